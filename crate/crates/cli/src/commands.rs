//! `model`, `lindblad`, `gadget` and `compile`.

use locgibbs::compiler::{best_so_far, compile_gadget, TemplateShape};
use locgibbs::dissipator::{
    build_lindbladian, generator_norm_bound, gibbs_state, kms_residual_full, local_kms_residuals, steady_state, trace_distance, InitialState, SteadyOptions,
};
use locgibbs::gadget::{diamond_bounds, exact_local_channel, gadget_channel, log_log_slope};
use locgibbs::linalg::{frobenius_norm, DENSE_CAP};
use locgibbs::observables::{correlator_profile, energy, heat_capacity_eigen};
use locgibbs::spectral::{eig_hermitian, thermal_state};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::output::{OutputDir, Table};
use crate::CliError;

/// Largest system whose dense spectrum `model` reports.
const SPECTRUM_MAX_SITES: usize = 12;
/// Largest system for the full detailed-balance residual.
const FULL_KMS_MAX_SITES: usize = 5;

pub fn model(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let h = cfg.hamiltonian()?;
    let n = h.n_sites();
    let terms: Vec<Value> = h.terms().iter().map(|t| json!({ "label": t.label(), "coefficient": t.coefficient })).collect();
    let mut summary = json!({
        "model": cfg.model.name.name(),
        "n_sites": n,
        "extents": h.lattice().extents(),
        "diameter": h.lattice().diameter(),
        "n_terms": terms.len(),
        "locality": h.locality(),
        "coefficient_norm": h.coefficient_norm(),
        "translation_invariant": h.is_translation_invariant(),
    });
    if n <= SPECTRUM_MAX_SITES {
        let beta = cfg.lindblad.beta;
        let dec = eig_hermitian(&h.dense()?)?;
        let rho = thermal_state(&dec, beta);
        let e = dec.eigenvalues.as_slice().expect("contiguous");
        summary["ground_energy"] = json!(e[0]);
        summary["max_energy"] = json!(e[e.len() - 1]);
        summary["gap"] = json!(e.get(1).map(|e1| e1 - e[0]));
        summary["beta"] = json!(beta);
        summary["gibbs_energy_density"] = json!(energy(&rho, &h)? / n as f64);
        summary["gibbs_heat_capacity"] = json!(heat_capacity_eigen(&rho, &dec, beta)?);
    }
    out.write_json("model.json", &json!({ "summary": summary, "terms": terms }))?;
    Ok(summary)
}

pub fn lindblad(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let h = cfg.hamiltonian()?;
    let lind = build_lindbladian(&h, &cfg.lindbladian_options())?;
    let kms = local_kms_residuals(&lind)?;
    let mut table = Table::new(["site", "alpha", "support_size", "kms_residual", "l_norm", "g_norm"].map(String::from).to_vec());
    for (g, res) in lind.generators.iter().zip(&kms) {
        let alpha = lind.site_generators(g.site).iter().position(|x| x.alpha == g.alpha).expect("own site");
        table.push(vec![g.site as f64, alpha as f64, g.support.len() as f64, *res, frobenius_norm(&g.l), frobenius_norm(&g.g)]);
    }
    out.write_table("lindblad.csv", "lindblad", &table)?;
    let mut summary = json!({
        "generators": lind.generators.len(),
        "max_local_kms_residual": kms.iter().fold(0.0f64, |m, x| m.max(*x)),
        "generator_norm_bound": generator_norm_bound(&lind)?,
    });
    if h.n_sites() <= FULL_KMS_MAX_SITES {
        summary["full_kms_residual"] = json!(kms_residual_full(&lind)?);
    }
    let gibbs = gibbs_state(&h, cfg.lindblad.beta)?;
    let ss = steady_state(&lind, &SteadyOptions { initial: InitialState::Gibbs, ..SteadyOptions::default() })?;
    summary["steady_state"] = json!({
        "method": ss.method,
        "residual": ss.residual,
        "iterations": ss.iterations,
        "trace_distance_to_gibbs": trace_distance(&ss.rho, &gibbs)?,
    });
    if cfg.observables.correlators > 0 {
        let pairs = cfg.observables.correlators;
        let steady = correlator_profile(&ss.rho, pairs)?;
        let exact = correlator_profile(&gibbs, pairs)?;
        let mut t = Table::new(["l", "steady", "gibbs"].map(String::from).to_vec());
        for (l, (s, g)) in steady.iter().zip(&exact).enumerate() {
            t.push(vec![(l + 1) as f64, *s, *g]);
        }
        out.write_table("correlators.csv", "correlators", &t)?;
    }
    Ok(summary)
}

/// Default step sizes for the gadget error scan.
fn default_taus() -> Vec<f64> {
    (0..8).map(|k| 0.02 * 25f64.powf(k as f64 / 7.0)).collect()
}

/// Diamond-distance bounds between each site-0 gadget channel and the exact
/// local channel over a τ grid (the `tau` sweep axis if given).
pub fn gadget(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let h = cfg.hamiltonian()?;
    let lind = build_lindbladian(&h, &cfg.lindbladian_options())?;
    let taus = cfg.sweep.get("tau").cloned().unwrap_or_else(default_taus);
    if taus.iter().any(|t| !(*t > 0.0)) {
        return Err(CliError::Config("gadget step sizes must be positive".into()));
    }
    let mut table = Table::new(["tau", "alpha", "diamond_lower", "diamond_upper"].map(String::from).to_vec());
    let mut slopes = Vec::new();
    for (alpha, g) in lind.site_generators(0).iter().enumerate() {
        if 1usize << (2 * (g.support.len() + 1)) > DENSE_CAP * DENSE_CAP {
            return Err(locgibbs::Error::CapExceeded { dim: 1 << (g.support.len() + 1), cap: DENSE_CAP }.into());
        }
        let mut uppers = Vec::new();
        for &tau in &taus {
            let (lower, upper) = diamond_bounds(&gadget_channel(&g.l, &g.g, tau)?.superop(), &exact_local_channel(&g.l, &g.g, tau)?)?;
            table.push(vec![tau, alpha as f64, lower, upper]);
            uppers.push(upper);
        }
        slopes.push(if taus.len() >= 2 { log_log_slope(&taus, &uppers) } else { f64::NAN });
    }
    out.write_table("gadget.csv", "gadget", &table)?;
    Ok(json!({ "support_size": lind.site_generators(0)[0].support.len(), "slopes": slopes }))
}

/// Compiles the site-0 gadgets (time `rescale · τ`) onto the ladder template.
pub fn compile(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let h = cfg.hamiltonian()?;
    let lind = build_lindbladian(&h, &cfg.lindbladian_options())?;
    let time = cfg.evolution.rescale * cfg.evolution.tau;
    let mut restarts = Table::new(["alpha", "restart", "final_loss", "aborted"].map(String::from).to_vec());
    let mut trace = Table::new(["alpha", "iteration", "loss", "best_so_far"].map(String::from).to_vec());
    let mut per_alpha = Vec::new();
    for (alpha, g) in lind.site_generators(0).iter().enumerate() {
        let shape = TemplateShape::ladder(h.lattice(), g.support.sites(), 0, cfg.gadget.modules)?;
        let target = locgibbs::gadget::gadget_unitary(&g.l, &g.g, time)?;
        let res = compile_gadget(&target, &shape, &cfg.compile, cfg.seed.wrapping_add(alpha as u64))?;
        for r in &res.restarts {
            restarts.push(vec![alpha as f64, r.restart as f64, r.final_loss, r.aborted as u8 as f64]);
        }
        for (i, (l, b)) in res.best.trace.iter().zip(best_so_far(&res.best.trace)).enumerate() {
            trace.push(vec![alpha as f64, i as f64, *l, b]);
        }
        per_alpha.push(json!({
            "alpha": g.alpha.to_string(),
            "best_restart": res.best.restart,
            "best_loss": res.best_loss(),
            "depth": shape.depth(),
            "params": res.best.params,
        }));
    }
    out.write_table("compile.csv", "compile", &restarts)?;
    out.write_table("compile_trace.csv", "compile-trace", &trace)?;
    Ok(json!({ "time": time, "modules": cfg.gadget.modules, "gadgets": per_alpha }))
}
