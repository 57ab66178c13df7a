//! Density matrices and state vectors over a lattice, and the framed kernels
//! that apply local operators, superoperators and Lindblad terms to them.

use std::sync::Arc;

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};

use crate::error::{Error, Result};
use crate::kernel::{self, operator_frame, super_frame, support_first_order, vector_frame, BitGather};
use crate::linalg::{self, Matrix, C64, ONE, ZERO};

/// `I / 2^n`.
pub fn maximally_mixed(n: usize) -> Matrix {
    let d = 1usize << n;
    Matrix::from_diag_elem(d, C64::new(1.0 / d as f64, 0.0))
}

/// `|b><b|` for computational basis index `b`.
pub fn basis_state(n: usize, b: usize) -> Matrix {
    let d = 1usize << n;
    let mut m = Matrix::zeros((d, d));
    m[[b, b]] = ONE;
    m
}

/// `|psi><psi|`.
pub fn pure_state(psi: &[C64]) -> Matrix {
    let d = psi.len();
    Matrix::from_shape_fn((d, d), |(i, j)| psi[i] * psi[j].conj())
}

/// Number of qubits of a `2^n x 2^n` operator.
pub fn qubits_of(m: &Matrix) -> Result<usize> {
    let d = m.nrows();
    if m.ncols() != d || !d.is_power_of_two() {
        return Err(Error::Shape(format!("{}x{} is not a qubit operator", m.nrows(), m.ncols())));
    }
    Ok(d.trailing_zeros() as usize)
}

/// Trace, Hermiticity and positivity diagnostics of a candidate state.
#[derive(Clone, Copy, Debug)]
pub struct StateCheck {
    pub trace_error: f64,
    pub hermitian_deviation: f64,
    pub min_eigenvalue: f64,
}

impl StateCheck {
    pub fn is_valid(&self, tol: f64) -> bool {
        self.trace_error <= tol && self.hermitian_deviation <= tol && self.min_eigenvalue >= -tol
    }
}

pub fn check_state(rho: &Matrix) -> Result<StateCheck> {
    let h = linalg::hermitize(rho);
    let ev = linalg::eigvalsh(&h)?;
    Ok(StateCheck {
        trace_error: (linalg::trace(rho) - ONE).norm(),
        hermitian_deviation: linalg::hermitian_deviation(rho),
        min_eigenvalue: ev.iter().cloned().fold(f64::INFINITY, f64::min),
    })
}

/// `C = op * B + beta * C`, with `B` and `C` read as `k x (len/k)` row-major.
fn gemm_left(op: &Matrix, src: &[C64], dst: &mut [C64], beta: C64) {
    let k = op.nrows();
    let cols = src.len() / k;
    let b = ArrayView2::from_shape((k, cols), src).expect("framed buffer");
    let mut c = ArrayViewMut2::from_shape((k, cols), dst).expect("framed buffer");
    general_mat_mul(ONE, op, &b, beta, &mut c);
}

/// `dst += dst†` for a square row-major buffer.
fn add_own_dagger(data: &mut [C64], dim: usize) {
    for i in 0..dim {
        data[i * dim + i] = C64::new(2.0 * data[i * dim + i].re, 0.0);
        for j in i + 1..dim {
            let a = data[i * dim + j];
            let b = data[j * dim + i];
            data[i * dim + j] = a + b.conj();
            data[j * dim + i] = b + a.conj();
        }
    }
}

/// Applies `U` on `support` (in the given order) to a state vector.
pub fn apply_unitary_vector(psi: &mut [C64], n: usize, support: &[usize], u: &Matrix) {
    let g = vector_frame(n, &support_first_order(n, support));
    let mut framed = kernel::zeros(psi.len());
    g.gather(psi, &mut framed);
    let mut out = kernel::zeros(psi.len());
    gemm_left(u, &framed, &mut out, ZERO);
    g.scatter(&out, psi);
}

/// `O ρ O†` with `O` acting on `support`.
pub fn conjugate(rho: &Matrix, support: &[usize], op: &Matrix) -> Result<Matrix> {
    let n = qubits_of(rho)?;
    let d = rho.nrows();
    if op.nrows() != 1 << support.len() {
        return Err(Error::Shape(format!("operator of dim {} on {} sites", op.nrows(), support.len())));
    }
    let g = operator_frame(n, &support_first_order(n, support));
    let src = rho.as_standard_layout();
    let mut framed = kernel::zeros(d * d);
    g.gather(src.as_slice().expect("contiguous"), &mut framed);
    let mut z = kernel::zeros(d * d);
    // O X O† = (O (O X)†)† holds for any X.
    gemm_left(op, &framed, &mut z, ZERO);
    kernel::dagger_in_place(&mut z, d);
    gemm_left(op, &z, &mut framed, ZERO);
    kernel::dagger_in_place(&mut framed, d);
    let mut out = Matrix::zeros((d, d));
    g.scatter(&framed, out.as_slice_mut().expect("contiguous"));
    Ok(out)
}

/// Superoperator on `support` acting on the row-major vectorization of the
/// support block, applied to a full operator.
#[derive(Clone)]
pub struct FramedSuperop {
    gather: BitGather,
    support: Vec<usize>,
    superop: Arc<Matrix>,
}

impl FramedSuperop {
    pub fn new(n: usize, support: &[usize], superop: impl Into<Arc<Matrix>>) -> Result<Self> {
        let superop = superop.into();
        let k = support.len();
        if superop.dim() != (1 << (2 * k), 1 << (2 * k)) {
            return Err(Error::Shape(format!("superoperator {:?} on {k} sites", superop.dim())));
        }
        Ok(FramedSuperop { gather: super_frame(n, support), support: support.to_vec(), superop })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn superop(&self) -> &Matrix {
        &self.superop
    }

    /// In place; `scratch` must have the operator's length.
    pub fn apply(&self, rho: &mut Matrix, scratch: &mut Vec<C64>) {
        let len = rho.len();
        scratch.resize(len, ZERO);
        let data = rho.as_slice_mut().expect("density matrices are contiguous");
        self.gather.gather(data, scratch);
        gemm_left(&self.superop, scratch, data, ZERO);
        scratch.copy_from_slice(data);
        self.gather.scatter(scratch, data);
    }
}

/// Applies a local superoperator to an operator (allocating).
pub fn apply_superop(rho: &Matrix, support: &[usize], superop: &Matrix) -> Result<Matrix> {
    let n = qubits_of(rho)?;
    let op = FramedSuperop::new(n, support, superop.clone())?;
    let mut out = rho.as_standard_layout().into_owned();
    let mut scratch = Vec::new();
    op.apply(&mut out, &mut scratch);
    Ok(out)
}

/// A sum of Lindblad terms sharing one support:
/// `X -> K X + X K† + Σ_j L_j X L_j†` with `K = -iG - ½ Σ_j L_j† L_j`.
#[derive(Clone, Debug)]
pub struct LindbladBlock {
    pub k: Matrix,
    pub jumps: Vec<Matrix>,
}

impl LindbladBlock {
    pub fn new(terms: &[(&Matrix, &Matrix)]) -> Self {
        let d = terms[0].0.nrows();
        let mut k = Matrix::zeros((d, d));
        let mut jumps = Vec::with_capacity(terms.len());
        for (l, g) in terms {
            let ldl = linalg::dagger(l).dot(*l);
            k = k - g.mapv(|z| z * C64::new(0.0, 1.0)) - ldl.mapv(|z| z * 0.5);
            jumps.push((*l).clone());
        }
        LindbladBlock { k, jumps }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let root = s.sqrt();
        LindbladBlock { k: self.k.mapv(|z| z * s), jumps: self.jumps.iter().map(|l| l.mapv(|z| z * root)).collect() }
    }

    /// Dense superoperator on the block's own support (row-major vec).
    pub fn superop(&self) -> Matrix {
        let d = self.k.nrows();
        let id = linalg::identity(d);
        let mut s = linalg::kron(&self.k, &id) + linalg::kron(&id, &self.k.mapv(|z| z.conj()));
        for l in &self.jumps {
            s += &linalg::kron(l, &l.mapv(|z| z.conj()));
        }
        s
    }

    /// Action on a matrix of the block's own dimension.
    pub fn apply_local(&self, x: &Matrix) -> Matrix {
        let mut out = self.k.dot(x) + x.dot(&linalg::dagger(&self.k));
        for l in &self.jumps {
            out = out + l.dot(x).dot(&linalg::dagger(l));
        }
        out
    }
}

/// Reusable buffers for framed Lindblad applications on `n` qubits.
pub struct Workspace {
    framed: Vec<C64>,
    acc: Vec<C64>,
    z: Vec<C64>,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        let len = 1usize << (2 * n);
        Workspace { framed: kernel::zeros(len), acc: kernel::zeros(len), z: kernel::zeros(len) }
    }
}

/// A Lindblad block positioned on an ordered support of an `n`-qubit system.
#[derive(Clone)]
pub struct FramedBlock {
    pub block: LindbladBlock,
    gather: BitGather,
    dim: usize,
}

impl FramedBlock {
    pub fn new(n: usize, support: &[usize], block: LindbladBlock) -> Result<Self> {
        if block.k.nrows() != 1 << support.len() {
            return Err(Error::Shape(format!("block of dim {} on {} sites", block.k.nrows(), support.len())));
        }
        Ok(FramedBlock { block, gather: operator_frame(n, &support_first_order(n, support)), dim: 1 << n })
    }

    /// `out += scale * 𝓛(x)` for Hermitian `x`.
    pub fn add_hermitian(&self, x: &[C64], out: &mut [C64], scale: f64, ws: &mut Workspace) {
        let d = self.dim;
        self.gather.gather(x, &mut ws.framed);
        gemm_left(&self.block.k, &ws.framed, &mut ws.acc, ZERO);
        add_own_dagger(&mut ws.acc, d);
        for l in &self.block.jumps {
            gemm_left(l, &ws.framed, &mut ws.z, ZERO);
            // (L X)† = X L† for Hermitian X
            kernel::dagger_in_place(&mut ws.z, d);
            gemm_left(l, &ws.z, &mut ws.acc, ONE);
        }
        self.gather.scatter_add(&ws.acc, out, C64::new(scale, 0.0));
    }

    /// `out += scale * 𝓛(x)` for arbitrary `x`, through its Hermitian parts.
    pub fn add_general(&self, x: &[C64], out: &mut [C64], scale: f64, ws: &mut Workspace) {
        let d = self.dim;
        let mut re = x.to_vec();
        let mut im = x.to_vec();
        kernel::dagger_in_place(&mut re, d);
        kernel::dagger_in_place(&mut im, d);
        for i in 0..x.len() {
            let (a, b) = (x[i], re[i]);
            re[i] = (a + b) * 0.5;
            im[i] = (a - b) * C64::new(0.0, -0.5);
        }
        let mut part = kernel::zeros(x.len());
        self.add_hermitian(&re, out, scale, ws);
        self.add_hermitian(&im, &mut part, scale, ws);
        for (o, p) in out.iter_mut().zip(&part) {
            *o += C64::new(0.0, 1.0) * p;
        }
    }
}

/// Partial trace over the most significant `n_traced` qubits.
pub fn trace_out_leading(rho: &Matrix, n_traced: usize) -> Matrix {
    let d = rho.nrows();
    let keep = d >> n_traced;
    let mut out = Matrix::zeros((keep, keep));
    for a in 0..(1 << n_traced) {
        let off = a * keep;
        out += &rho.slice(ndarray::s![off..off + keep, off..off + keep]);
    }
    out
}

/// Reduced density matrix on `sites` (in the given order).
pub fn reduced_state(rho: &Matrix, sites: &[usize]) -> Result<Matrix> {
    let n = qubits_of(rho)?;
    let order = support_first_order(n, sites);
    let g = operator_frame(n, &order);
    let d = rho.nrows();
    let src = rho.as_standard_layout();
    let mut framed = Matrix::zeros((d, d));
    g.gather(src.as_slice().expect("contiguous"), framed.as_slice_mut().expect("contiguous"));
    let k = 1usize << sites.len();
    let rest = d / k;
    let mut out = Matrix::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            let mut acc = ZERO;
            for r in 0..rest {
                acc += framed[[i * rest + r, j * rest + r]];
            }
            out[[i, j]] = acc;
        }
    }
    Ok(out)
}

/// Computational-basis embedding of a site permutation: `T ρ T†` where the
/// qubit on site `s` moves to site `perm[s]`.
pub fn permutation_frame(perm: &[usize]) -> BitGather {
    let n = perm.len();
    let mut inv = vec![0; n];
    for (s, &p) in perm.iter().enumerate() {
        inv[p] = s;
    }
    operator_frame(n, &inv)
}
