//! Matrix-free application of a truncated Lindbladian to full-lattice
//! operators.

use super::generator::TruncatedLindbladian;
use crate::error::{Error, Result};
use crate::kernel::{self, BitGather};
use crate::linalg::{Matrix, C64, ZERO};
use crate::state::{permutation_frame, FramedBlock, Workspace};

/// Buffers shared by the actions below.
pub struct ActionScratch {
    pub ws: Workspace,
    extra: Vec<C64>,
    part: Vec<C64>,
}

impl ActionScratch {
    pub fn new(n: usize) -> Self {
        ActionScratch { ws: Workspace::new(n), extra: Vec::new(), part: Vec::new() }
    }
}

/// A linear map on flattened `2^n x 2^n` operators that is valid for
/// Hermitian inputs.
pub trait HermitianAction {
    fn n_sites(&self) -> usize;

    /// `out = 𝓛(x)` for Hermitian `x`.
    fn apply_hermitian(&self, x: &[C64], out: &mut [C64], scratch: &mut ActionScratch);

    /// `out = 𝓛(x)` for arbitrary `x`, through its Hermitian and anti-Hermitian parts.
    fn apply_general(&self, x: &[C64], out: &mut [C64], scratch: &mut ActionScratch) {
        let d = 1usize << self.n_sites();
        let mut h1 = x.to_vec();
        kernel::dagger_in_place(&mut h1, d);
        let mut h2 = h1.clone();
        for i in 0..x.len() {
            h1[i] = (x[i] + h2[i]) * 0.5;
            h2[i] = (x[i] - h2[i]) * C64::new(0.0, -0.5);
        }
        self.apply_hermitian(&h1, out, scratch);
        let mut part = std::mem::take(&mut scratch.part);
        part.resize(x.len(), ZERO);
        self.apply_hermitian(&h2, &mut part, scratch);
        for (o, p) in out.iter_mut().zip(&part) {
            *o += C64::new(0.0, 1.0) * p;
        }
        scratch.part = part;
    }

    /// `x <- Σ_{k ≤ order} (dt 𝓛)^k x / k!` for Hermitian `x`.
    fn taylor_step(&self, x: &mut [C64], dt: f64, order: usize, scratch: &mut ActionScratch, term: &mut Vec<C64>, next: &mut Vec<C64>) {
        term.clear();
        term.extend_from_slice(x);
        next.resize(x.len(), ZERO);
        for k in 1..=order {
            self.apply_hermitian(term, next, scratch);
            let f = dt / k as f64;
            for (t, (nx, xi)) in term.iter_mut().zip(next.iter().zip(x.iter_mut())) {
                *t = nx * f;
                *xi += *t;
            }
        }
    }
}

/// `Σ_a 𝓛_a` with every site block framed on its own support.
pub struct LindbladAction {
    n: usize,
    blocks: Vec<FramedBlock>,
}

impl LindbladAction {
    pub fn new(lind: &TruncatedLindbladian) -> Result<Self> {
        let n = lind.n_sites();
        let blocks = (0..n)
            .map(|a| FramedBlock::new(n, lind.site_generators(a)[0].support.sites(), lind.site_block(a)))
            .collect::<Result<Vec<_>>>()?;
        Ok(LindbladAction { n, blocks })
    }

    pub fn from_blocks(n: usize, blocks: Vec<FramedBlock>) -> Self {
        LindbladAction { n, blocks }
    }

    /// Allocating convenience wrapper around `apply_general`.
    pub fn apply_matrix(&self, x: &Matrix) -> Matrix {
        let src = x.as_standard_layout();
        let mut out = Matrix::zeros(x.dim());
        let mut scratch = ActionScratch::new(self.n);
        self.apply_general(src.as_slice().expect("contiguous"), out.as_slice_mut().expect("contiguous"), &mut scratch);
        out
    }
}

impl HermitianAction for LindbladAction {
    fn n_sites(&self) -> usize {
        self.n
    }

    fn apply_hermitian(&self, x: &[C64], out: &mut [C64], scratch: &mut ActionScratch) {
        out.iter_mut().for_each(|z| *z = ZERO);
        for b in &self.blocks {
            b.add_hermitian(x, out, 1.0, &mut scratch.ws);
        }
    }
}

/// `𝓛(ρ) = Σ_g T_g 𝓛_0(ρ) T_g†`, exact on translation-invariant inputs only.
pub struct SymmetricAction {
    n: usize,
    reference: FramedBlock,
    frames: Vec<BitGather>,
}

impl SymmetricAction {
    pub fn new(lind: &TruncatedLindbladian) -> Result<Self> {
        if !lind.is_translation_linked() {
            return Err(Error::InvalidParameter("Lindbladian is not translation linked".into()));
        }
        let n = lind.n_sites();
        let reference = FramedBlock::new(n, lind.site_generators(0)[0].support.sites(), lind.site_block(0))?;
        let frames = lind.hamiltonian.lattice().translations().iter().map(|p| permutation_frame(p)).collect();
        Ok(SymmetricAction { n, reference, frames })
    }
}

impl HermitianAction for SymmetricAction {
    fn n_sites(&self) -> usize {
        self.n
    }

    fn apply_hermitian(&self, x: &[C64], out: &mut [C64], scratch: &mut ActionScratch) {
        let mut y = std::mem::take(&mut scratch.extra);
        y.clear();
        y.resize(x.len(), ZERO);
        self.reference.add_hermitian(x, &mut y, 1.0, &mut scratch.ws);
        out.iter_mut().for_each(|z| *z = ZERO);
        for f in &self.frames {
            f.gather_add(&y, out);
        }
        scratch.extra = y;
    }
}

/// Packs a Hermitian `d x d` operator into `d²` reals, isometrically for the
/// Hilbert–Schmidt inner product.
pub fn pack_hermitian(x: &[C64], d: usize, out: &mut [f64]) {
    let s = std::f64::consts::SQRT_2;
    let mut k = 0;
    for i in 0..d {
        out[k] = x[i * d + i].re;
        k += 1;
        for j in i + 1..d {
            let z = x[i * d + j];
            out[k] = s * z.re;
            out[k + 1] = s * z.im;
            k += 2;
        }
    }
}

/// Inverse of `pack_hermitian`.
pub fn unpack_hermitian(v: &[f64], d: usize, out: &mut [C64]) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut k = 0;
    for i in 0..d {
        out[i * d + i] = C64::new(v[k], 0.0);
        k += 1;
        for j in i + 1..d {
            let z = C64::new(s * v[k], s * v[k + 1]);
            out[i * d + j] = z;
            out[j * d + i] = z.conj();
            k += 2;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissipator::{build_lindbladian, EnvelopeKind, LindbladianOptions};
    use crate::hamiltonian::{build_model, Model};
    use crate::lattice::{Boundary, Lattice};
    use crate::linalg::{c, dagger, max_abs};
    use rand::{Rng, SeedableRng};

    fn lind(n: usize, beta: f64, r: usize) -> TruncatedLindbladian {
        let h = build_model(Model::Mfi, &Lattice::chain(n, Boundary::Periodic).unwrap(), &Default::default()).unwrap();
        build_lindbladian(&h, &LindbladianOptions::new(beta, r, EnvelopeKind::Gaussian)).unwrap()
    }

    fn random(d: usize, rng: &mut impl Rng) -> Matrix {
        Matrix::from_shape_fn((d, d), |_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
    }

    #[test]
    fn action_matches_dense_superoperator() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let l = lind(4, 0.8, 1);
        let s = l.superop_full().unwrap();
        let x = random(16, &mut rng);
        let flat = x.as_standard_layout().into_owned().into_shape(256).unwrap();
        let expect = s.dot(&flat).into_shape((16, 16)).unwrap();
        let got = LindbladAction::new(&l).unwrap().apply_matrix(&x);
        assert!(max_abs(&(&got - &expect)) < 1e-12);
    }

    #[test]
    fn symmetric_action_on_invariant_state() {
        let l = lind(5, 1.1, 1);
        let h = l.hamiltonian.dense().unwrap();
        let dec = crate::spectral::eig_hermitian(&h).unwrap();
        let rho = crate::spectral::thermal_state(&dec, 0.6);
        let full = LindbladAction::new(&l).unwrap();
        let sym = SymmetricAction::new(&l).unwrap();
        let mut scratch = ActionScratch::new(5);
        let x = rho.as_slice().unwrap();
        let mut a = vec![ZERO; x.len()];
        let mut b = vec![ZERO; x.len()];
        full.apply_hermitian(x, &mut a, &mut scratch);
        sym.apply_hermitian(x, &mut b, &mut scratch);
        let err = a.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn pack_roundtrip_is_isometric() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x = random(8, &mut rng);
        let h = (&x + &dagger(&x)).mapv(|z| z * 0.5);
        let mut v = vec![0.0; 64];
        pack_hermitian(h.as_slice().unwrap(), 8, &mut v);
        let norm2: f64 = v.iter().map(|a| a * a).sum();
        assert!((norm2 - crate::linalg::frobenius_norm(&h).powi(2)).abs() < 1e-12);
        let mut back = vec![ZERO; 64];
        unpack_hermitian(&v, 8, &mut back);
        assert!(back.iter().zip(h.iter()).all(|(a, b)| (a - b).norm() < 1e-15));
    }

    #[test]
    fn taylor_step_matches_expm() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let l = lind(3, 1.0, 1);
        let s = l.superop_full().unwrap();
        let x = random(8, &mut rng);
        let h = (&x + &dagger(&x)).mapv(|z| z * 0.5);
        let dt = 0.05;
        let prop = crate::linalg::expm(&s.mapv(|z| z * dt)).unwrap();
        let expect = prop.dot(&h.clone().into_shape(64).unwrap());
        let action = LindbladAction::new(&l).unwrap();
        let mut v = h.into_raw_vec();
        let (mut t, mut nx) = (Vec::new(), Vec::new());
        action.taylor_step(&mut v, dt, 12, &mut ActionScratch::new(3), &mut t, &mut nx);
        let err = v.iter().zip(expect.iter()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-13, "{err}");
    }
}
