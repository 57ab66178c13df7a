//! Local Hamiltonians as sums of weighted Pauli strings.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Region};
use crate::linalg::{Matrix, DENSE_CAP};
use crate::pauli::{Pauli, PauliString};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Mixed-field Ising chain: `Σ S^z S^z + g Σ S^x + h Σ S^z`.
    Mfi,
    /// Transverse-field Ising chain: `Σ S^z S^z + g Σ S^x`.
    Tfi1d,
    /// XXZ chain: `Σ (S^x S^x + S^y S^y) + Δ Σ S^z S^z`.
    Xxz,
    /// Transverse-field Ising model on a square lattice.
    Tfim2d,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Mfi => "mfi",
            Model::Tfi1d => "tfi1d",
            Model::Xxz => "xxz",
            Model::Tfim2d => "tfim2d",
        }
    }

    /// Couplings used when the caller supplies none.
    pub fn default_params(self) -> BTreeMap<String, f64> {
        let pairs: Vec<(&str, f64)> = match self {
            Model::Mfi => vec![("g", (5f64.sqrt() + 5.0) / 8.0), ("h", (5f64.sqrt() + 1.0) / 4.0)],
            Model::Tfi1d => vec![("g", 0.6)],
            Model::Xxz => vec![("delta", 0.6)],
            Model::Tfim2d => vec![("g", 0.2)],
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

impl FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mfi" => Ok(Model::Mfi),
            "tfi1d" => Ok(Model::Tfi1d),
            "xxz" => Ok(Model::Xxz),
            "tfim2d" => Ok(Model::Tfim2d),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A Hamiltonian restricted to a declared support (all sites unless truncated).
#[derive(Clone, Debug, PartialEq)]
pub struct LocalHamiltonian {
    lattice: Lattice,
    support: Region,
    terms: Vec<PauliString>,
}

impl LocalHamiltonian {
    pub fn new(lattice: Lattice, terms: Vec<PauliString>) -> Result<Self> {
        let n = lattice.n_sites();
        for t in &terms {
            if let Some(&s) = t.factors.keys().find(|&&s| s >= n) {
                return Err(Error::SiteOutOfRange { site: s, n_sites: n });
            }
            if !t.coefficient.is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite coefficient on {}", t.label())));
            }
        }
        let support = Region::new((0..n).collect());
        Ok(LocalHamiltonian { lattice, support, terms })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn support(&self) -> &Region {
        &self.support
    }

    pub fn terms(&self) -> &[PauliString] {
        &self.terms
    }

    pub fn n_sites(&self) -> usize {
        self.lattice.n_sites()
    }

    /// Largest number of sites any single term acts on.
    pub fn locality(&self) -> usize {
        self.terms.iter().map(|t| t.factors.len()).max().unwrap_or(0)
    }

    /// Terms whose support lies inside `ball(a, r)`; the result's declared
    /// support is the whole ball.
    pub fn truncate(&self, a: usize, r: usize) -> Result<LocalHamiltonian> {
        let ball = self.lattice.ball(a, r)?;
        let terms = self.terms.iter().filter(|t| t.factors.keys().all(|&s| ball.contains(s))).cloned().collect();
        Ok(LocalHamiltonian { lattice: self.lattice.clone(), support: ball, terms })
    }

    /// Dense matrix on `support` (first site most significant).
    pub fn to_dense(&self, support: &Region) -> Result<Matrix> {
        let d = 1usize << support.len();
        if d > DENSE_CAP {
            return Err(Error::CapExceeded { dim: d, cap: DENSE_CAP });
        }
        let mut m = Matrix::zeros((d, d));
        for t in &self.terms {
            m += &t.to_dense(support)?;
        }
        Ok(m)
    }

    /// Dense matrix on the declared support.
    pub fn dense(&self) -> Result<Matrix> {
        self.to_dense(&self.support)
    }

    /// Σ |c| over terms; an upper bound on the operator norm.
    pub fn coefficient_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.abs()).sum()
    }

    /// True when every coefficient is real and no term has an odd number of
    /// `Y` factors, so the dense matrix is real symmetric.
    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|t| t.factors.values().filter(|&&p| p == Pauli::Y).count() % 2 == 0)
    }

    /// Whether every lattice translation maps the term multiset onto itself.
    pub fn is_translation_invariant(&self) -> bool {
        if !self.lattice.is_fully_periodic() || self.support.len() != self.n_sites() {
            return false;
        }
        let key = |t: &PauliString, perm: Option<&[usize]>| -> (Vec<(usize, Pauli)>, i64) {
            let mut f: Vec<(usize, Pauli)> =
                t.factors.iter().map(|(&s, &p)| (perm.map_or(s, |m| m[s]), p)).collect();
            f.sort_unstable();
            (f, (t.coefficient * 1e12).round() as i64)
        };
        let mut base: Vec<_> = self.terms.iter().map(|t| key(t, None)).collect();
        base.sort();
        self.lattice.translations().iter().all(|perm| {
            let mut moved: Vec<_> = self.terms.iter().map(|t| key(t, Some(perm))).collect();
            moved.sort();
            moved == base
        })
    }
}

fn param(params: &BTreeMap<String, f64>, model: Model, key: &str) -> Result<f64> {
    if let Some(bad) = params.keys().find(|k| !model.default_params().contains_key(k.as_str())) {
        return Err(Error::InvalidParameter(format!("model `{model}` has no parameter `{bad}`")));
    }
    let v = params.get(key).copied().unwrap_or_else(|| model.default_params()[key]);
    if !v.is_finite() {
        return Err(Error::InvalidParameter(format!("`{key}` must be finite")));
    }
    Ok(v)
}

/// Builds one of the benchmark models on `lat`. Missing parameters take the
/// model defaults.
pub fn build_model(model: Model, lat: &Lattice, params: &BTreeMap<String, f64>) -> Result<LocalHamiltonian> {
    let need_dim = match model {
        Model::Tfim2d => 2,
        _ => 1,
    };
    if lat.dimension() != need_dim {
        return Err(Error::ModelDimension { model: model.name().into(), expected: need_dim, got: lat.dimension() });
    }
    let n = lat.n_sites();
    let edges = lat.edges();
    let mut terms = Vec::new();
    match model {
        Model::Mfi | Model::Tfi1d | Model::Tfim2d => {
            let g = param(params, model, "g")?;
            let h = if model == Model::Mfi { param(params, model, "h")? } else { 0.0 };
            for &(a, b) in &edges {
                terms.push(PauliString::new(0.25, &[(a, Pauli::Z), (b, Pauli::Z)]));
            }
            for s in 0..n {
                terms.push(PauliString::new(0.5 * g, &[(s, Pauli::X)]));
            }
            if model == Model::Mfi {
                for s in 0..n {
                    terms.push(PauliString::new(0.5 * h, &[(s, Pauli::Z)]));
                }
            }
        }
        Model::Xxz => {
            let delta = param(params, model, "delta")?;
            for &(a, b) in &edges {
                terms.push(PauliString::new(0.25, &[(a, Pauli::X), (b, Pauli::X)]));
                terms.push(PauliString::new(0.25, &[(a, Pauli::Y), (b, Pauli::Y)]));
                terms.push(PauliString::new(0.25 * delta, &[(a, Pauli::Z), (b, Pauli::Z)]));
            }
        }
    }
    LocalHamiltonian::new(lat.clone(), terms)
}
