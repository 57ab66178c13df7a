//! Depolarizing gate noise and noisy execution of compiled gadget circuits.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compiler::template::{apply_gate, apply_one_qubit};
use crate::compiler::{Circuit, CompiledGadgets, Gate};
use crate::error::{Error, Result};
use crate::evolution::channels::{measure_and_reset_last, with_ancilla, without_ancilla};
use crate::evolution::{run_channel_steps, ChannelKind, ChannelSet, DrawMode, TrajectoryKey, TrotterPlan};
use crate::kernel;
use crate::linalg::{c, Matrix, C64, ONE, ZERO};
use crate::pauli::{Pauli, PauliString};
use crate::rng::stream_rng;
use crate::state;

/// Gate noise rates: one-qubit gates `p₁ = 0.1 p`, two-qubit gates `p₂ = p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepolarizingModel {
    pub p: f64,
}

impl DepolarizingModel {
    pub fn new(p: f64) -> Result<Self> {
        let m = DepolarizingModel { p };
        m.validate()?;
        Ok(m)
    }

    pub fn p1(&self) -> f64 {
        0.1 * self.p
    }

    pub fn p2(&self) -> f64 {
        self.p
    }

    pub fn rate(&self, k: usize) -> f64 {
        if k == 1 {
            self.p1()
        } else {
            self.p2()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_rate(self.p1())?;
        check_rate(self.p2())
    }
}

fn check_rate(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("depolarizing rate {p} outside [0, 1]")))
    }
}

fn pauli_2x2(p: Pauli) -> [[C64; 2]; 2] {
    match p {
        Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
        Pauli::Y => [[ZERO, c(0.0, -1.0)], [c(0.0, 1.0), ZERO]],
        Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
    }
}

/// Non-identity Pauli strings on `k` qubits; `None` marks an identity factor.
fn pauli_strings(k: usize) -> Vec<Vec<Option<Pauli>>> {
    let opts = [None, Some(Pauli::X), Some(Pauli::Y), Some(Pauli::Z)];
    (1..4usize.pow(k as u32))
        .map(|mut code| {
            let mut s = vec![None; k];
            for f in s.iter_mut().rev() {
                *f = opts[code % 4];
                code /= 4;
            }
            s
        })
        .collect()
}

/// `(1 − p)ρ + p/(4^k − 1) Σ_{P ≠ I} P ρ P` on `sites` (k ∈ {1, 2}).
pub fn depolarize(rho: &Matrix, sites: &[usize], p: f64) -> Result<Matrix> {
    check_rate(p)?;
    let n = state::qubits_of(rho)?;
    let k = sites.len();
    if !(1..=2).contains(&k) || sites.iter().any(|&s| s >= n) || (k == 2 && sites[0] == sites[1]) {
        return Err(Error::InvalidParameter(format!("depolarizing channel on sites {sites:?} of {n}")));
    }
    let d = rho.nrows();
    let src = rho.as_standard_layout().into_owned();
    let src = src.as_slice().expect("contiguous");
    let mut out: Vec<C64> = src.iter().map(|z| z * (1.0 - p)).collect();
    if p == 0.0 {
        return Ok(Matrix::from_shape_vec((d, d), out).expect("square"));
    }
    let w = p / (4usize.pow(k as u32) - 1) as f64;
    let mut buf = vec![ZERO; src.len()];
    for string in pauli_strings(k) {
        buf.copy_from_slice(src);
        conjugate_paulis(&mut buf, n, sites, &string);
        out.iter_mut().zip(&buf).for_each(|(o, b)| *o += b * w);
    }
    Ok(Matrix::from_shape_vec((d, d), out).expect("square"))
}

fn conjugate_paulis(data: &mut [C64], n: usize, sites: &[usize], string: &[Option<Pauli>]) {
    let d = 1usize << n;
    for pass in 0..2 {
        for (&s, f) in sites.iter().zip(string) {
            if let Some(p) = f {
                apply_one_qubit(data, n, d, s, &pauli_2x2(*p));
            }
        }
        if pass == 0 {
            kernel::dagger_in_place(data, d);
        }
    }
    kernel::dagger_in_place(data, d);
}

/// Pauli-twirl draw: with probability `p` a uniformly random non-identity
/// Pauli string on `k` qubits, otherwise `None`.
pub fn sample_twirl<R: Rng>(k: usize, p: f64, rng: &mut R) -> Option<Vec<Option<Pauli>>> {
    if rng.gen::<f64>() >= p {
        return None;
    }
    let total = 4usize.pow(k as u32) - 1;
    let mut code = rng.gen_range(1..=total);
    let opts = [None, Some(Pauli::X), Some(Pauli::Y), Some(Pauli::Z)];
    let mut s = vec![None; k];
    for f in s.iter_mut().rev() {
        *f = opts[code % 4];
        code /= 4;
    }
    Some(s)
}

fn gate_qubits(g: &Gate) -> Vec<usize> {
    match *g {
        Gate::U { qubit, .. } => vec![qubit],
        Gate::Cz { a, b } => vec![a, b],
    }
}

/// Conjugates a `2^k x 2^k` row-major operator by one gate.
fn conjugate_gate(data: &mut [C64], k: usize, gate: &Gate, params: &[f64]) {
    let d = 1usize << k;
    apply_gate(data, k, d, gate, params);
    kernel::dagger_in_place(data, d);
    apply_gate(data, k, d, gate, params);
    kernel::dagger_in_place(data, d);
}

/// Channel of a circuit with depolarizing noise after every gate, acting on
/// a `2^k x 2^k` density matrix.
pub fn noisy_circuit_apply(circuit: &Circuit, model: &DepolarizingModel, rho: &Matrix) -> Result<Matrix> {
    let k = circuit.n_qubits;
    let d = 1usize << k;
    if rho.dim() != (d, d) {
        return Err(Error::Shape(format!("state {:?} for a {k}-qubit circuit", rho.dim())));
    }
    let mut cur = rho.as_standard_layout().into_owned();
    for g in &circuit.gates {
        conjugate_gate(cur.as_slice_mut().expect("contiguous"), k, g, &circuit.params);
        let qs = gate_qubits(g);
        let p = model.rate(qs.len());
        if p > 0.0 {
            cur = depolarize(&cur, &qs, p)?;
        }
    }
    Ok(cur)
}

/// System channel of a noisy gadget circuit: ancilla (circuit qubit 0)
/// prepared in |0>, circuit run with gate noise, ancilla discarded.
/// Preparation and reset are noiseless.
pub fn noisy_gadget_superop(circuit: &Circuit, model: &DepolarizingModel) -> Result<Matrix> {
    let k = circuit.n_qubits;
    if k < 2 {
        return Err(Error::InvalidParameter("gadget circuits need an ancilla and a system qubit".into()));
    }
    let ds = 1usize << (k - 1);
    let mut s = Matrix::zeros((ds * ds, ds * ds));
    for i in 0..ds {
        for j in 0..ds {
            let mut input = Matrix::zeros((2 * ds, 2 * ds));
            input[[i, j]] = ONE;
            let out = state::trace_out_leading(&noisy_circuit_apply(circuit, model, &input)?, 1);
            for (idx, z) in out.iter().enumerate() {
                s[[idx, i * ds + j]] = *z;
            }
        }
    }
    Ok(s)
}

/// Local system channels of every compiled `(site, α)` under `model`,
/// computed once per distinct circuit.
pub fn noisy_local_channels(gadgets: &CompiledGadgets, model: &DepolarizingModel) -> Result<Vec<Vec<(Arc<Matrix>, Vec<usize>)>>> {
    let mut cache: Vec<(Circuit, Arc<Matrix>)> = Vec::new();
    let mut out = Vec::with_capacity(gadgets.n_sites);
    for (a, circuits) in gadgets.circuits.iter().enumerate() {
        let mut site = Vec::with_capacity(circuits.len());
        for c in circuits {
            let m = match cache.iter().find(|(k, _)| k == c) {
                Some((_, m)) => m.clone(),
                None => {
                    let m = Arc::new(noisy_gadget_superop(c, model)?);
                    cache.push((c.clone(), m.clone()));
                    m
                }
            };
            site.push((m, gadgets.supports[a].clone()));
        }
        out.push(site);
    }
    Ok(out)
}

/// Exact mean of the randomized product formula (per-step draws) with every
/// local channel replaced by its noisy compiled gadget.
pub fn noisy_mean_evolve<F: FnMut(usize, &Matrix)>(gadgets: &CompiledGadgets, model: &DepolarizingModel, rho0: &Matrix, plan: &TrotterPlan, observe: F) -> Result<Matrix> {
    model.validate()?;
    plan.validate(gadgets.n_sites)?;
    if plan.draw_mode != DrawMode::PerStep {
        return Err(Error::InvalidParameter("the exact noisy mean needs per-step draws".into()));
    }
    let local = noisy_local_channels(gadgets, model)?;
    let channels = ChannelSet::from_local(gadgets.n_sites, plan.tau, ChannelKind::Mean { rescale: plan.rescale }, local)?;
    Ok(run_channel_steps(&channels, rho0.as_standard_layout().into_owned(), plan, observe))
}

/// Monte-Carlo estimate of a weighted Pauli sum.
#[derive(Clone, Debug, Serialize)]
pub struct NoisyEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_circuits: usize,
    pub shots: usize,
}

/// Initial statevector of each noisy circuit.
#[derive(Clone, Debug)]
pub enum InitialVector {
    Fixed(Vec<C64>),
    /// A uniformly random computational basis state per circuit, which
    /// averages to the maximally mixed state.
    RandomBasis,
}

/// Runs `n_circuits` noisy statevector trajectories: each draws its jump
/// indices and twirled Pauli errors from key `(seed, i)`, then estimates
/// `Σ_j c_j <P_j>` with `shots` measurements per term (exact expectations
/// when `shots == 0`).
pub fn noisy_trajectory_run(
    gadgets: &CompiledGadgets,
    model: &DepolarizingModel,
    plan: &TrotterPlan,
    init: &InitialVector,
    observable: &[PauliString],
    n_circuits: usize,
    shots: usize,
    seed: u64,
) -> Result<NoisyEstimate> {
    model.validate()?;
    let n = gadgets.n_sites;
    plan.validate(n)?;
    let fixed_ok = match init {
        InitialVector::Fixed(v) => v.len() == 1 << n,
        InitialVector::RandomBasis => true,
    };
    if !fixed_ok || n_circuits == 0 {
        return Err(Error::InvalidParameter(format!("need an {n}-qubit initial state and at least one circuit")));
    }
    let words: Vec<_> = observable.iter().map(|t| (t.coefficient, t.word(n))).collect();
    let values: Vec<Result<f64>> = (0..n_circuits)
        .into_par_iter()
        .map(|i| {
            let key = TrajectoryKey::new(seed, i as u64);
            let draws = key.draws(n, plan);
            // substreams 2i and 2i+1 belong to the key; noise and shots use a third family
            let mut rng = stream_rng(seed ^ 0x6e6f_6973_6500_0000, i as u64);
            let mut psi = match init {
                InitialVector::Fixed(v) => with_ancilla(v),
                InitialVector::RandomBasis => {
                    let mut v = vec![ZERO; 1 << n];
                    v[rng.gen_range(0..1usize << n)] = ONE;
                    with_ancilla(&v)
                }
            };
            for m in 0..plan.steps {
                let alphas = match plan.draw_mode {
                    DrawMode::PerStep => &draws[m],
                    DrawMode::PerTrajectory => &draws[0],
                };
                for &a in &plan.site_order {
                    run_noisy_circuit(&mut psi, n, &gadgets.circuits[a][alphas[a]], &gadgets.supports[a], model, &mut rng);
                    measure_and_reset_last(&mut psi, rng.gen::<f64>());
                }
            }
            let sys = without_ancilla(&psi);
            let mut total = 0.0;
            for (coef, w) in &words {
                let exact = w.expectation_vector(&sys).re.clamp(-1.0, 1.0);
                let est = if shots == 0 {
                    exact
                } else {
                    let plus = Binomial::new(shots as u64, 0.5 * (1.0 + exact)).map_err(|e| Error::InvalidParameter(e.to_string()))?.sample(&mut rng);
                    2.0 * plus as f64 / shots as f64 - 1.0
                };
                total += coef * est;
            }
            Ok(total)
        })
        .collect();
    let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    let nc = n_circuits as f64;
    let mean = values.iter().sum::<f64>() / nc;
    let var = if n_circuits > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nc - 1.0) } else { f64::NAN };
    Ok(NoisyEstimate { mean, std_error: (var / nc).sqrt(), n_circuits, shots })
}

/// Applies a gadget circuit with sampled twirl errors to the `(n + 1)`-qubit
/// register (ancilla last).
fn run_noisy_circuit<R: Rng>(psi: &mut [C64], n: usize, circuit: &Circuit, support: &[usize], model: &DepolarizingModel, rng: &mut R) {
    let map = |q: usize| if q == 0 { n } else { support[q - 1] };
    for g in &circuit.gates {
        let global = match *g {
            Gate::U { qubit, offset } => Gate::U { qubit: map(qubit), offset },
            Gate::Cz { a, b } => Gate::Cz { a: map(a), b: map(b) },
        };
        apply_gate(psi, n + 1, 1, &global, &circuit.params);
        let qs: Vec<usize> = gate_qubits(&global);
        if let Some(string) = sample_twirl(qs.len(), model.rate(qs.len()), rng) {
            for (&q, f) in qs.iter().zip(&string) {
                if let Some(p) = f {
                    apply_one_qubit(psi, n + 1, 1, q, &pauli_2x2(*p));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::TemplateShape;
    use crate::linalg::{dagger, max_abs};
    use rand::SeedableRng;

    fn random_state(n: usize, seed: u64) -> Matrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = 1 << n;
        let x = Matrix::from_shape_fn((d, d), |_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let r = x.dot(&dagger(&x));
        let tr = crate::linalg::trace(&r).re;
        r.mapv(|z| z / tr)
    }

    #[test]
    fn zero_rate_is_identity() {
        let rho = random_state(3, 1);
        assert!(max_abs(&(depolarize(&rho, &[0, 2], 0.0).unwrap() - &rho)) < 1e-15);
        assert!(depolarize(&rho, &[1], 1.5).is_err());
        assert!(depolarize(&rho, &[0, 1, 2], 0.1).is_err());
    }

    #[test]
    fn single_qubit_hand_sum() {
        let p = 0.3;
        let out = depolarize(&state::basis_state(1, 0), &[0], p).unwrap();
        assert!((out[[0, 0]].re - (1.0 - 2.0 * p / 3.0)).abs() < 1e-15);
        assert!((out[[1, 1]].re - 2.0 * p / 3.0).abs() < 1e-15);
        assert!(out[[0, 1]].norm() < 1e-15);
    }

    #[test]
    fn trace_and_hermiticity_preserved() {
        for seed in 0..10 {
            let rho = random_state(3, seed);
            for sites in [vec![1], vec![2, 0]] {
                let out = depolarize(&rho, &sites, 0.37).unwrap();
                assert!((crate::linalg::trace(&out).re - 1.0).abs() < 1e-12);
                assert!(crate::linalg::hermitian_deviation(&out) < 1e-14);
            }
        }
    }

    #[test]
    fn two_qubit_full_depolarization_matches_formula() {
        // at p = 15/16 the two-qubit channel is the completely depolarizing map
        let rho = random_state(2, 4);
        let out = depolarize(&rho, &[0, 1], 15.0 / 16.0).unwrap();
        assert!(max_abs(&(out - state::maximally_mixed(2))) < 1e-14);
    }

    #[test]
    fn repeated_noise_drives_marginals_to_identity() {
        let mut rho = state::basis_state(2, 0b01);
        let mut last = f64::INFINITY;
        for _ in 0..30 {
            rho = depolarize(&rho, &[1], 0.2).unwrap();
            let m = state::reduced_state(&rho, &[1]).unwrap();
            let dist = crate::dissipator::trace_distance(&m, &state::maximally_mixed(1)).unwrap();
            assert!(dist < last);
            last = dist;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn twirl_sampling_matches_channel() {
        // n = 2: average of sampled Pauli errors on a fixed pure state
        let mut rng = stream_rng(3, 0);
        let psi = [c(0.6, 0.0), c(0.0, 0.48), c(0.64, 0.0), ZERO];
        let rho = state::pure_state(&psi);
        let p = 0.3;
        let exact = depolarize(&rho, &[0, 1], p).unwrap();
        let z0 = PauliString::new(1.0, &[(0, Pauli::Z)]).word(2);
        let xy = PauliString::new(1.0, &[(0, Pauli::X), (1, Pauli::Y)]).word(2);
        let samples = 100_000;
        let (mut s1, mut s1q, mut s2, mut s2q) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..samples {
            let mut v = psi.to_vec();
            if let Some(string) = sample_twirl(2, p, &mut rng) {
                for (q, f) in string.iter().enumerate() {
                    if let Some(pp) = f {
                        apply_one_qubit(&mut v, 2, 1, q, &pauli_2x2(*pp));
                    }
                }
            }
            let a = z0.expectation_vector(&v).re;
            let b = xy.expectation_vector(&v).re;
            s1 += a;
            s1q += a * a;
            s2 += b;
            s2q += b * b;
        }
        let ns = samples as f64;
        for (s, sq, want) in [(s1, s1q, z0.trace_with(&exact).re), (s2, s2q, xy.trace_with(&exact).re)] {
            let mean = s / ns;
            let se = ((sq / ns - mean * mean) / ns).sqrt();
            assert!((mean - want).abs() <= 3.0 * se, "mean {mean} vs {want} (se {se})");
        }
    }

    #[test]
    fn noiseless_gadget_superop_matches_unitary_channel() {
        let shape = TemplateShape::new(3, 1, vec![(0, 1), (1, 2)]).unwrap();
        let params: Vec<f64> = (0..shape.n_params()).map(|i| 0.37 * i as f64).collect();
        let circuit = shape.circuit(&params).unwrap();
        let s = noisy_gadget_superop(&circuit, &DepolarizingModel::new(0.0).unwrap()).unwrap();
        let want = crate::gadget::channel_by_partial_trace(&circuit.unitary()).unwrap();
        assert!(max_abs(&(s - want)) < 1e-12);
    }

    fn toy_gadgets(n: usize) -> CompiledGadgets {
        let mut supports = Vec::new();
        let mut circuits = Vec::new();
        for a in 0..n {
            let shape = TemplateShape::new(3, 1, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
            supports.push(vec![a, (a + 1) % n]);
            circuits.push(
                (0..3)
                    .map(|al| {
                        let params: Vec<f64> = (0..shape.n_params()).map(|i| 0.3 + 0.71 * (i + 5 * al + 11 * a) as f64 % 2.9).collect();
                        shape.circuit(&params).unwrap()
                    })
                    .collect(),
            );
        }
        CompiledGadgets { n_sites: n, supports, circuits, losses: vec![] }
    }

    fn observable() -> Vec<PauliString> {
        vec![PauliString::new(1.0, &[(0, Pauli::Z)]), PauliString::new(0.5, &[(1, Pauli::X), (2, Pauli::X)])]
    }

    fn exact_value(rho: &Matrix) -> f64 {
        observable().iter().map(|t| t.coefficient * t.word(3).trace_with(rho).re).sum()
    }

    #[test]
    fn noiseless_mean_matches_averaged_unitary_conjugation() {
        let g = toy_gadgets(3);
        let plan = TrotterPlan::new(0.1, 2, 3).unwrap();
        let got = noisy_mean_evolve(&g, &DepolarizingModel::new(0.0).unwrap(), &state::basis_state(3, 0b010), &plan, |_, _| {}).unwrap();
        // independent route: conjugate the 4-qubit state (ancilla last) by each circuit unitary
        let mut rho = state::basis_state(3, 0b010);
        for _ in 0..2 {
            for a in 0..3 {
                let mut acc = Matrix::zeros((8, 8));
                for c in &g.circuits[a] {
                    let big = crate::linalg::kron(&rho, &state::basis_state(1, 0));
                    let mut order = vec![3];
                    order.extend(&g.supports[a]);
                    let out = state::conjugate(&big, &order, &c.unitary()).unwrap();
                    acc += &state::reduced_state(&out, &[0, 1, 2]).unwrap();
                }
                rho = acc.mapv(|z| z / 3.0);
            }
        }
        assert!(max_abs(&(got - rho)) < 1e-12);
    }

    #[test]
    fn twirled_trajectories_match_exact_noisy_mean() {
        let g = toy_gadgets(3);
        let model = DepolarizingModel::new(0.05).unwrap();
        let plan = TrotterPlan::new(0.1, 2, 3).unwrap();
        let rho = noisy_mean_evolve(&g, &model, &state::basis_state(3, 0), &plan, |_, _| {}).unwrap();
        let want = exact_value(&rho);
        let mut psi0 = vec![ZERO; 8];
        psi0[0] = ONE;
        let psi0 = InitialVector::Fixed(psi0);
        let est = noisy_trajectory_run(&g, &model, &plan, &psi0, &observable(), 6000, 0, 17).unwrap();
        assert!((est.mean - want).abs() <= 3.0 * est.std_error, "{} ± {} vs {want}", est.mean, est.std_error);
        let shots = noisy_trajectory_run(&g, &model, &plan, &psi0, &observable(), 2000, 64, 18).unwrap();
        assert!((shots.mean - want).abs() <= 3.0 * shots.std_error);
        let again = noisy_trajectory_run(&g, &model, &plan, &psi0, &observable(), 2000, 64, 18).unwrap();
        assert_eq!(shots.mean, again.mean);
        // random basis starts average to the maximally mixed state
        let mixed = noisy_mean_evolve(&g, &model, &state::maximally_mixed(3), &plan, |_, _| {}).unwrap();
        let est = noisy_trajectory_run(&g, &model, &plan, &InitialVector::RandomBasis, &observable(), 6000, 0, 19).unwrap();
        assert!((est.mean - exact_value(&mixed)).abs() <= 3.0 * est.std_error);
    }

    #[test]
    fn model_rates() {
        let m = DepolarizingModel::new(1e-2).unwrap();
        assert!((m.p1() - 1e-3).abs() < 1e-18 && m.p2() == 1e-2);
        assert!(DepolarizingModel::new(2.0).is_err());
    }
}
