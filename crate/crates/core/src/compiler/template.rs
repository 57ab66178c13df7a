//! Single-qubit gates, gate lists and the CZ-ladder template.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::linalg::{self, c, Matrix, C64, ZERO};

/// `u(θ, φ, λ) = [[cos θ/2, -e^{iλ} sin θ/2], [e^{iφ} sin θ/2, e^{i(φ+λ)} cos θ/2]]`.
pub fn u_gate(theta: f64, phi: f64, lambda: f64) -> [[C64; 2]; 2] {
    let (s, co) = (0.5 * theta).sin_cos();
    [[c(co, 0.0), -C64::from_polar(s, lambda)], [C64::from_polar(s, phi), C64::from_polar(co, phi + lambda)]]
}

/// Partial derivatives of `u` with respect to `(θ, φ, λ)`.
pub fn u_gate_derivatives(theta: f64, phi: f64, lambda: f64) -> [[[C64; 2]; 2]; 3] {
    let (s, co) = (0.5 * theta).sin_cos();
    let i = c(0.0, 1.0);
    [
        [[c(-0.5 * s, 0.0), -C64::from_polar(0.5 * co, lambda)], [C64::from_polar(0.5 * co, phi), C64::from_polar(-0.5 * s, phi + lambda)]],
        [[ZERO, ZERO], [i * C64::from_polar(s, phi), i * C64::from_polar(co, phi + lambda)]],
        [[ZERO, -i * C64::from_polar(s, lambda)], [ZERO, i * C64::from_polar(co, phi + lambda)]],
    ]
}

pub fn u_matrix(theta: f64, phi: f64, lambda: f64) -> Matrix {
    let u = u_gate(theta, phi, lambda);
    Matrix::from_shape_fn((2, 2), |(a, b)| u[a][b])
}

/// A gate on qubits of a `k`-qubit register (qubit 0 most significant).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    /// `u(θ, φ, λ)` on `qubit`; the angles are `params[offset..offset + 3]`.
    U { qubit: usize, offset: usize },
    Cz { a: usize, b: usize },
}

/// Gate list together with its parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
    pub params: Vec<f64>,
}

impl Circuit {
    /// The dense unitary.
    pub fn unitary(&self) -> Matrix {
        let d = 1usize << self.n_qubits;
        let mut m = linalg::identity(d);
        let data = m.as_slice_mut().expect("contiguous");
        for g in &self.gates {
            apply_gate(data, self.n_qubits, d, g, &self.params);
        }
        m
    }

    pub fn two_qubit_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::Cz { .. })).count()
    }

    pub fn one_qubit_count(&self) -> usize {
        self.gates.len() - self.two_qubit_count()
    }
}

/// Left-multiplies the row-major `2^k x cols` block `data` by `gate`.
pub fn apply_gate(data: &mut [C64], k: usize, cols: usize, gate: &Gate, params: &[f64]) {
    match *gate {
        Gate::U { qubit, offset } => {
            let u = u_gate(params[offset], params[offset + 1], params[offset + 2]);
            apply_one_qubit(data, k, cols, qubit, &u);
        }
        Gate::Cz { a, b } => apply_cz(data, k, cols, a, b),
    }
}

/// Left-multiplies by the 2x2 matrix `u` on `qubit`.
pub fn apply_one_qubit(data: &mut [C64], k: usize, cols: usize, qubit: usize, u: &[[C64; 2]; 2]) {
    let bit = 1usize << (k - 1 - qubit);
    for r0 in 0..(1usize << k) {
        if r0 & bit != 0 {
            continue;
        }
        let r1 = r0 | bit;
        for col in 0..cols {
            let x0 = data[r0 * cols + col];
            let x1 = data[r1 * cols + col];
            data[r0 * cols + col] = u[0][0] * x0 + u[0][1] * x1;
            data[r1 * cols + col] = u[1][0] * x0 + u[1][1] * x1;
        }
    }
}

pub fn apply_cz(data: &mut [C64], k: usize, cols: usize, a: usize, b: usize) {
    let mask = (1usize << (k - 1 - a)) | (1usize << (k - 1 - b));
    for r in 0..(1usize << k) {
        if r & mask == mask {
            data[r * cols..(r + 1) * cols].iter_mut().for_each(|z| *z = -*z);
        }
    }
}

/// Layout of the variational template: `m` modules, each three rounds of
/// (single-qubit layer on every qubit, one CZ), followed by a final
/// single-qubit layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateShape {
    pub n_qubits: usize,
    pub modules: usize,
    /// Allowed CZ edges, ordered as even bonds then odd bonds.
    pub edges: Vec<(usize, usize)>,
}

impl TemplateShape {
    pub fn new(n_qubits: usize, modules: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if modules == 0 {
            return Err(Error::InvalidParameter("template needs at least one module".into()));
        }
        if edges.is_empty() && n_qubits > 1 {
            return Err(Error::InvalidParameter("template needs at least one CZ edge".into()));
        }
        if edges.iter().any(|&(a, b)| a == b || a >= n_qubits || b >= n_qubits) {
            return Err(Error::InvalidParameter(format!("invalid CZ edges {edges:?} for {n_qubits} qubits")));
        }
        Ok(TemplateShape { n_qubits, modules, edges })
    }

    /// Ladder layout for a gadget on `support` (lattice sites, in the
    /// target's qubit order) centered on `center`: qubit 0 is the ancilla,
    /// coupled only to the center; system qubits couple along lattice bonds.
    pub fn ladder(lattice: &Lattice, support: &[usize], center: usize, modules: usize) -> Result<Self> {
        let pos = support.iter().position(|&s| s == center).ok_or_else(|| Error::InvalidParameter(format!("center {center} not in support {support:?}")))?;
        let bonds: Vec<(usize, usize)> = lattice
            .edges()
            .into_iter()
            .filter_map(|(x, y)| {
                let px = support.iter().position(|&s| s == x)?;
                let py = support.iter().position(|&s| s == y)?;
                Some((px.min(py) + 1, px.max(py) + 1))
            })
            .collect();
        let mut edges = vec![(0, pos + 1)];
        edges.extend(bonds);
        edges.sort_by_key(|&(a, b)| (a.min(b) % 2, a.min(b), b));
        edges.dedup();
        Self::new(support.len() + 1, modules, edges)
    }

    /// Two-qubit depth `d = 3m`.
    pub fn depth(&self) -> usize {
        3 * self.modules
    }

    pub fn n_params(&self) -> usize {
        3 * self.n_qubits * (3 * self.modules + 1)
    }

    /// CZ edges of module `j`: three consecutive entries of the edge list,
    /// continuing cyclically from the previous module.
    pub fn module_edges(&self, j: usize) -> Vec<(usize, usize)> {
        if self.edges.is_empty() {
            return Vec::new();
        }
        (0..3).map(|e| self.edges[(3 * j + e) % self.edges.len()]).collect()
    }

    pub fn gates(&self) -> Vec<Gate> {
        let mut gates = Vec::new();
        let mut offset = 0;
        let mut layer = |gates: &mut Vec<Gate>| {
            for q in 0..self.n_qubits {
                gates.push(Gate::U { qubit: q, offset });
                offset += 3;
            }
        };
        for j in 0..self.modules {
            for (a, b) in self.module_edges(j) {
                layer(&mut gates);
                gates.push(Gate::Cz { a, b });
            }
        }
        layer(&mut gates);
        gates
    }

    pub fn circuit(&self, params: &[f64]) -> Result<Circuit> {
        if params.len() != self.n_params() {
            return Err(Error::Shape(format!("template takes {} parameters, got {}", self.n_params(), params.len())));
        }
        Ok(Circuit { n_qubits: self.n_qubits, gates: self.gates(), params: params.to_vec() })
    }
}

/// `V(θ)` of the template.
pub fn template_unitary(shape: &TemplateShape, params: &[f64]) -> Result<Matrix> {
    Ok(shape.circuit(params)?.unitary())
}
