//! Truncated Frobenius loss and its adjoint gradient.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, C64, ZERO};

use super::template::{apply_cz, apply_gate, apply_one_qubit, u_gate, u_gate_derivatives, Gate, TemplateShape};

/// `Σ_i Σ_{j < 2^{k-1}} |U_ij − V_ij|²`: only columns with the ancilla (most
/// significant qubit) in |0> contribute.
pub fn compilation_loss(target: &Matrix, v: &Matrix) -> Result<f64> {
    if target.dim() != v.dim() || target.nrows() != target.ncols() {
        return Err(Error::Shape(format!("target {:?} vs circuit {:?}", target.dim(), v.dim())));
    }
    let half = (target.ncols() / 2).max(1);
    let mut s = 0.0;
    for i in 0..target.nrows() {
        for j in 0..half {
            s += (target[[i, j]] - v[[i, j]]).norm_sqr();
        }
    }
    Ok(s)
}

/// The loss minimized over a global phase of `V`.
pub fn phase_aligned_loss(target: &Matrix, v: &Matrix) -> Result<f64> {
    if target.dim() != v.dim() {
        return Err(Error::Shape(format!("target {:?} vs circuit {:?}", target.dim(), v.dim())));
    }
    let half = (target.ncols() / 2).max(1);
    let (mut nu, mut nv, mut overlap) = (0.0, 0.0, ZERO);
    for i in 0..target.nrows() {
        for j in 0..half {
            nu += target[[i, j]].norm_sqr();
            nv += v[[i, j]].norm_sqr();
            overlap += target[[i, j]].conj() * v[[i, j]];
        }
    }
    Ok((nu + nv - 2.0 * overlap.norm()).max(0.0))
}

/// Evaluates the loss and its gradient for one template by a forward pass
/// over the ancilla-|0> columns and an adjoint backward pass.
pub struct LossEvaluator {
    shape: TemplateShape,
    gates: Vec<Gate>,
    target_half: Vec<C64>,
    dim: usize,
    cols: usize,
    states: Vec<Vec<C64>>,
}

impl LossEvaluator {
    pub fn new(shape: &TemplateShape, target: &Matrix) -> Result<Self> {
        let dim = 1usize << shape.n_qubits;
        if target.dim() != (dim, dim) {
            return Err(Error::Shape(format!("target {:?} for a {}-qubit template", target.dim(), shape.n_qubits)));
        }
        let cols = (dim / 2).max(1);
        let target_half = (0..dim).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|(i, j)| target[[i, j]]).collect();
        let gates = shape.gates();
        let states = vec![vec![ZERO; dim * cols]; gates.len() + 1];
        Ok(LossEvaluator { shape: shape.clone(), gates, target_half, dim, cols, states })
    }

    pub fn shape(&self) -> &TemplateShape {
        &self.shape
    }

    pub fn n_params(&self) -> usize {
        self.shape.n_params()
    }

    fn forward(&mut self, params: &[f64]) {
        let (dim, cols, k) = (self.dim, self.cols, self.shape.n_qubits);
        let s0 = &mut self.states[0];
        s0.iter_mut().for_each(|z| *z = ZERO);
        for j in 0..cols.min(dim) {
            s0[j * cols + j] = C64::new(1.0, 0.0);
        }
        for (l, g) in self.gates.iter().enumerate() {
            let (done, rest) = self.states.split_at_mut(l + 1);
            rest[0].copy_from_slice(&done[l]);
            apply_gate(&mut rest[0], k, cols, g, params);
        }
    }

    pub fn loss(&mut self, params: &[f64]) -> f64 {
        self.forward(params);
        let last = self.states.last().expect("nonempty");
        last.iter().zip(&self.target_half).map(|(v, u)| (u - v).norm_sqr()).sum()
    }

    /// Loss, with the gradient written into `grad`.
    pub fn loss_and_gradient(&mut self, params: &[f64], grad: &mut [f64]) -> f64 {
        self.forward(params);
        let (cols, k) = (self.cols, self.shape.n_qubits);
        let last = self.states.last().expect("nonempty");
        // adjoint state Y = U_P − V_P, propagated backwards through G†
        let mut y: Vec<C64> = self.target_half.iter().zip(last).map(|(u, v)| u - v).collect();
        let loss = y.iter().map(|z| z.norm_sqr()).sum();
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (l, g) in self.gates.iter().enumerate().rev() {
            let x = &self.states[l];
            match *g {
                Gate::U { qubit, offset } => {
                    let (th, ph, la) = (params[offset], params[offset + 1], params[offset + 2]);
                    let r = reduced_overlap(&y, x, k, cols, qubit);
                    for (p, du) in u_gate_derivatives(th, ph, la).iter().enumerate() {
                        let mut t = ZERO;
                        for a in 0..2 {
                            for b in 0..2 {
                                t += du[a][b] * r[a][b];
                            }
                        }
                        grad[offset + p] = -2.0 * t.re;
                    }
                    let u = u_gate(th, ph, la);
                    let udag = [[u[0][0].conj(), u[1][0].conj()], [u[0][1].conj(), u[1][1].conj()]];
                    apply_one_qubit(&mut y, k, cols, qubit, &udag);
                }
                Gate::Cz { a, b } => apply_cz(&mut y, k, cols, a, b),
            }
        }
        loss
    }
}

/// `R_ab = Σ conj(Y[(a, rest), c]) X[(b, rest), c]` over the other qubits and columns.
fn reduced_overlap(y: &[C64], x: &[C64], k: usize, cols: usize, qubit: usize) -> [[C64; 2]; 2] {
    let bit = 1usize << (k - 1 - qubit);
    let mut r = [[ZERO; 2]; 2];
    for r0 in 0..(1usize << k) {
        if r0 & bit != 0 {
            continue;
        }
        let rows = [r0, r0 | bit];
        for a in 0..2 {
            for b in 0..2 {
                let (ya, xb) = (&y[rows[a] * cols..(rows[a] + 1) * cols], &x[rows[b] * cols..(rows[b] + 1) * cols]);
                r[a][b] += ya.iter().zip(xb).map(|(p, q)| p.conj() * q).sum::<C64>();
            }
        }
    }
    r
}
