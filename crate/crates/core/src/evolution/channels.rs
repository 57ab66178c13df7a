//! Local channels of the product formula, positioned on the lattice.

use std::sync::Arc;

use rayon::prelude::*;

use crate::dissipator::{add_embedded_superop, TruncatedLindbladian};
use crate::error::{Error, Result};
use crate::gadget;
use crate::kernel;
use crate::linalg::{self, Matrix, C64, ZERO};
use crate::state::{self, FramedBlock, FramedSuperop, LindbladBlock, Workspace};

/// Local superoperators are exponentiated densely up to this support size;
/// larger supports are propagated by Taylor series in the frame.
pub const SUPEROP_MAX_SITES: usize = 5;

/// Buffers reused across local channel applications.
pub struct EvolutionScratch {
    buf: Vec<C64>,
    ws: Option<Workspace>,
    term: Vec<C64>,
    next: Vec<C64>,
    acc: Vec<C64>,
}

impl EvolutionScratch {
    pub fn new() -> Self {
        EvolutionScratch { buf: Vec::new(), ws: None, term: Vec::new(), next: Vec::new(), acc: Vec::new() }
    }
}

impl Default for EvolutionScratch {
    fn default() -> Self {
        Self::new()
    }
}

/// One local channel acting on a full-lattice density matrix.
#[derive(Clone)]
pub enum LocalChannelOp {
    Superop(FramedSuperop),
    /// `exp(dt 𝓛_b)^substeps` by twelfth-order Taylor series.
    Taylor { block: FramedBlock, n: usize, dt: f64, substeps: usize },
    /// Uniform average of the member channels.
    Mixture(Vec<LocalChannelOp>),
}

impl LocalChannelOp {
    pub fn apply(&self, rho: &mut Matrix, scratch: &mut EvolutionScratch) {
        match self {
            LocalChannelOp::Superop(s) => s.apply(rho, &mut scratch.buf),
            LocalChannelOp::Taylor { block, n, dt, substeps } => {
                let ws = scratch.ws.get_or_insert_with(|| Workspace::new(*n));
                let x = rho.as_slice_mut().expect("contiguous");
                scratch.next.resize(x.len(), ZERO);
                for _ in 0..*substeps {
                    scratch.term.clear();
                    scratch.term.extend_from_slice(x);
                    for k in 1..=12 {
                        scratch.next.iter_mut().for_each(|z| *z = ZERO);
                        block.add_hermitian(&scratch.term, &mut scratch.next, dt / k as f64, ws);
                        std::mem::swap(&mut scratch.term, &mut scratch.next);
                        x.iter_mut().zip(&scratch.term).for_each(|(xi, t)| *xi += t);
                    }
                }
            }
            LocalChannelOp::Mixture(ops) => {
                let start = rho.clone();
                let mut acc = std::mem::take(&mut scratch.acc);
                acc.clear();
                acc.resize(rho.len(), ZERO);
                for op in ops {
                    let mut r = start.clone();
                    op.apply(&mut r, scratch);
                    acc.iter_mut().zip(r.iter()).for_each(|(a, b)| *a += b);
                }
                let w = 1.0 / ops.len() as f64;
                rho.iter_mut().zip(&acc).for_each(|(r, a)| *r = a * w);
                scratch.acc = acc;
            }
        }
    }
}

/// Which local channels a `ChannelSet` holds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChannelKind {
    /// `exp(τ Σ_α 𝓛_{a,α})` per site.
    Deterministic,
    /// `exp(rescale · τ 𝓛_{a,α})` per site and α.
    Sampled { rescale: f64 },
    /// `(1/3) Σ_α exp(rescale · τ 𝓛_{a,α})` per site.
    Mean { rescale: f64 },
}

/// Local channels for every site; `ops[a]` holds one entry, or three (X, Y, Z)
/// for `Sampled`.
pub struct ChannelSet {
    pub n: usize,
    pub tau: f64,
    pub kind: ChannelKind,
    pub ops: Vec<Vec<LocalChannelOp>>,
}

fn block_norm(block: &LindbladBlock) -> Result<f64> {
    let mut s = 2.0 * linalg::spectral_norm(&block.k)?;
    for l in &block.jumps {
        s += linalg::spectral_norm(l)?.powi(2);
    }
    Ok(s)
}

/// Local pieces of one site: blocks to exponentiate and the support order
/// the resulting superoperators are read in.
struct SiteSource {
    blocks: Vec<LindbladBlock>,
    support: Vec<usize>,
}

fn site_source(lind: &TruncatedLindbladian, a: usize, kind: ChannelKind, reference: bool) -> SiteSource {
    let gens = lind.site_generators(a);
    let (src, support) = match (&gens[0].link, reference) {
        (Some(link), true) => (lind.site_generators(0), link.ordered_support.clone()),
        _ => (gens, gens[0].support.sites().to_vec()),
    };
    let blocks = match kind {
        ChannelKind::Deterministic => vec![lind_site_block(src)],
        _ => src.iter().map(|g| g.block()).collect(),
    };
    SiteSource { blocks, support }
}

fn lind_site_block(gens: &[crate::dissipator::LocalGenerator]) -> LindbladBlock {
    let terms: Vec<(&Matrix, &Matrix)> = gens.iter().map(|g| (&g.l, &g.g)).collect();
    LindbladBlock::new(&terms)
}

impl ChannelSet {
    pub fn new(lind: &TruncatedLindbladian, tau: f64, kind: ChannelKind) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter(format!("τ must be positive, got {tau}")));
        }
        let n = lind.n_sites();
        let time = match kind {
            ChannelKind::Deterministic => tau,
            ChannelKind::Sampled { rescale } | ChannelKind::Mean { rescale } => rescale * tau,
        };
        let linked = lind.is_translation_linked();
        let dense_at = |a: usize| lind.site_generators(a)[0].support.len() <= SUPEROP_MAX_SITES;
        // exponentiated local superoperators, computed once per distinct site
        let exps = |src: &SiteSource| -> Result<Vec<Arc<Matrix>>> {
            src.blocks.iter().map(|b| Ok(Arc::new(linalg::expm(&b.superop().mapv(|z| z * time))?))).collect()
        };
        let reference = if linked && dense_at(0) { Some(exps(&site_source(lind, 0, kind, false))?) } else { None };
        let per_site: Vec<Result<Vec<LocalChannelOp>>> = (0..n)
            .into_par_iter()
            .map(|a| {
                let src = site_source(lind, a, kind, linked);
                let dense = dense_at(a);
                let members: Vec<LocalChannelOp> = if dense {
                    let mut mats = match &reference {
                        Some(r) => r.clone(),
                        None => exps(&src)?,
                    };
                    if let ChannelKind::Mean { .. } = kind {
                        let mut avg = Matrix::zeros(mats[0].dim());
                        for m in &mats {
                            avg += &**m;
                        }
                        avg.mapv_inplace(|z| z / mats.len() as f64);
                        mats = vec![Arc::new(avg)];
                    }
                    mats.into_iter().map(|m| Ok(LocalChannelOp::Superop(FramedSuperop::new(n, &src.support, m)?))).collect::<Result<_>>()?
                } else {
                    src.blocks
                        .into_iter()
                        .map(|b| {
                            let norm = block_norm(&b)? * time;
                            let substeps = (norm / 0.5).ceil().max(1.0) as usize;
                            Ok(LocalChannelOp::Taylor { block: FramedBlock::new(n, &src.support, b)?, n, dt: time / substeps as f64, substeps })
                        })
                        .collect::<Result<_>>()?
                };
                Ok(match kind {
                    ChannelKind::Mean { .. } if !dense => vec![LocalChannelOp::Mixture(members)],
                    _ => members,
                })
            })
            .collect();
        let ops = per_site.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(ChannelSet { n, tau, kind, ops })
    }

    /// Channel set from precomputed local superoperators: `local[a]` lists the
    /// per-α channels of site `a` with the support order each is read in.
    /// `Mean` averages them, `Sampled` keeps them apart.
    pub fn from_local(n: usize, tau: f64, kind: ChannelKind, local: Vec<Vec<(Arc<Matrix>, Vec<usize>)>>) -> Result<Self> {
        if local.len() != n {
            return Err(Error::Shape(format!("{} local channel lists for {n} sites", local.len())));
        }
        let ops = local
            .into_iter()
            .map(|site| -> Result<Vec<LocalChannelOp>> {
                match kind {
                    ChannelKind::Mean { .. } => {
                        let (first, support) = site.first().ok_or_else(|| Error::InvalidParameter("site without channels".into()))?;
                        let mut avg = Matrix::zeros(first.dim());
                        for (m, s) in &site {
                            if s != support {
                                return Err(Error::InvalidParameter("averaged channels must share a support order".into()));
                            }
                            avg += &**m;
                        }
                        avg.mapv_inplace(|z| z / site.len() as f64);
                        Ok(vec![LocalChannelOp::Superop(FramedSuperop::new(n, support, avg)?)])
                    }
                    _ => site.into_iter().map(|(m, s)| Ok(LocalChannelOp::Superop(FramedSuperop::new(n, &s, m)?))).collect(),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ChannelSet { n, tau, kind, ops })
    }

    /// Applies one full step in `order`; `alphas[a]` picks the sampled term.
    pub fn step(&self, rho: &mut Matrix, order: &[usize], alphas: Option<&[usize]>, scratch: &mut EvolutionScratch) {
        for &a in order {
            let j = alphas.map_or(0, |al| al[a]);
            self.ops[a][j].apply(rho, scratch);
        }
    }

    /// Dense superoperator of one step on the whole lattice; needs every
    /// local channel in superoperator form.
    pub fn step_superop(&self, order: &[usize], alphas: Option<&[usize]>) -> Result<Matrix> {
        let dim = 1usize << (2 * self.n);
        if dim > linalg::DENSE_CAP {
            return Err(Error::CapExceeded { dim, cap: linalg::DENSE_CAP });
        }
        let mut total = linalg::identity(dim);
        for &a in order {
            let j = alphas.map_or(0, |al| al[a]);
            let LocalChannelOp::Superop(op) = &self.ops[a][j] else {
                return Err(Error::InvalidParameter("local channel is not in superoperator form".into()));
            };
            let mut full = Matrix::zeros((dim, dim));
            add_embedded_superop(&mut full, self.n, op.support(), op.superop());
            total = full.dot(&total);
        }
        Ok(total)
    }
}

/// Gadget unitaries `exp(-i O √(rescale·τ))` for every site and α, with the
/// support order they act in.
pub struct GadgetSet {
    pub n: usize,
    pub supports: Vec<Vec<usize>>,
    pub unitaries: Vec<Vec<Arc<Matrix>>>,
}

impl GadgetSet {
    pub fn new(lind: &TruncatedLindbladian, tau: f64, rescale: f64) -> Result<Self> {
        let n = lind.n_sites();
        let time = tau * rescale;
        let linked = lind.is_translation_linked();
        let build = |a: usize| -> Result<Vec<Arc<Matrix>>> {
            lind.site_generators(a).iter().map(|g| Ok(Arc::new(gadget::gadget_unitary(&g.l, &g.g, time)?))).collect()
        };
        let reference = if linked { Some(build(0)?) } else { None };
        let mut supports = Vec::with_capacity(n);
        let mut unitaries = Vec::with_capacity(n);
        for a in 0..n {
            let g = &lind.site_generators(a)[0];
            match (&reference, &g.link) {
                (Some(r), Some(link)) => {
                    supports.push(link.ordered_support.clone());
                    unitaries.push(r.clone());
                }
                (Some(r), None) => {
                    supports.push(g.support.sites().to_vec());
                    unitaries.push(r.clone());
                }
                _ => {
                    supports.push(g.support.sites().to_vec());
                    unitaries.push(build(a)?);
                }
            }
        }
        Ok(GadgetSet { n, supports, unitaries })
    }

    /// Applies the gadget of `(a, α)` to `psi` over `n + 1` qubits, the last
    /// being the ancilla, then measures and resets the ancilla using `u01`
    /// uniform in [0, 1). Returns the measured bit.
    pub fn apply(&self, psi: &mut [C64], a: usize, alpha: usize, u01: f64) -> bool {
        let n = self.n;
        let mut order = Vec::with_capacity(self.supports[a].len() + 1);
        order.push(n);
        order.extend_from_slice(&self.supports[a]);
        state::apply_unitary_vector(psi, n + 1, &order, &self.unitaries[a][alpha]);
        measure_and_reset_last(psi, u01)
    }
}

/// Born-rule measurement of the least significant qubit followed by reset to |0>.
pub fn measure_and_reset_last(psi: &mut [C64], u01: f64) -> bool {
    let p1: f64 = psi.iter().skip(1).step_by(2).map(|z| z.norm_sqr()).sum();
    let p0: f64 = psi.iter().step_by(2).map(|z| z.norm_sqr()).sum();
    let outcome = u01 * (p0 + p1) >= p0;
    let norm = if outcome { p1 } else { p0 }.sqrt();
    for i in (0..psi.len()).step_by(2) {
        let keep = if outcome { psi[i + 1] } else { psi[i] };
        psi[i] = keep / norm;
        psi[i + 1] = ZERO;
    }
    outcome
}

/// Embeds an `n`-qubit state vector with an extra ancilla in |0>.
pub fn with_ancilla(psi: &[C64]) -> Vec<C64> {
    let mut out = kernel::zeros(2 * psi.len());
    for (i, z) in psi.iter().enumerate() {
        out[2 * i] = *z;
    }
    out
}

/// System part of a state whose ancilla is in |0>.
pub fn without_ancilla(psi: &[C64]) -> Vec<C64> {
    psi.iter().step_by(2).cloned().collect()
}
