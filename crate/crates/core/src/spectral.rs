//! Hermitian eigendecompositions, Bohr frequencies and spectral projections.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, C64};

#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    /// Ascending.
    pub eigenvalues: Array1<f64>,
    /// Eigenvectors as columns.
    pub eigenvectors: Matrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V† A V`.
    pub fn to_eigenbasis(&self, a: &Matrix) -> Matrix {
        linalg::dagger(&self.eigenvectors).dot(a).dot(&self.eigenvectors)
    }

    /// `V A V†`.
    pub fn from_eigenbasis(&self, a: &Matrix) -> Matrix {
        self.eigenvectors.dot(a).dot(&linalg::dagger(&self.eigenvectors))
    }

    /// `V f(Λ) V†`.
    pub fn function<F: Fn(f64) -> C64>(&self, f: F) -> Matrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (mut col, &lam) in scaled.columns_mut().into_iter().zip(self.eigenvalues.iter()) {
            let fl = f(lam);
            col.mapv_inplace(|z| z * fl);
        }
        scaled.dot(&linalg::dagger(v))
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Dense Hermitian eigendecomposition.
pub fn eig_hermitian(m: &Matrix) -> Result<SpectralDecomposition> {
    let (eigenvalues, eigenvectors) = linalg::eigh(m)?;
    Ok(SpectralDecomposition { eigenvalues, eigenvectors })
}

/// `V f(Λ) V†`.
pub fn hermitian_function<F: Fn(f64) -> C64>(dec: &SpectralDecomposition, f: F) -> Matrix {
    dec.function(f)
}

/// `e^{-βM} / tr e^{-βM}`, evaluated with the spectrum shifted by its minimum.
pub fn thermal_state(dec: &SpectralDecomposition, beta: f64) -> Matrix {
    let lmin = dec.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let z: f64 = dec.eigenvalues.iter().map(|&l| (-beta * (l - lmin)).exp()).sum();
    dec.function(|l| C64::new((-beta * (l - lmin)).exp() / z, 0.0))
}

/// Default clustering tolerance for a spectrum: `1e-9 * max(1, ‖H‖)`.
pub fn default_tolerance(dec: &SpectralDecomposition) -> f64 {
    1e-9 * dec.spectral_radius().max(1.0)
}

/// Distinct Bohr frequencies `λ_i - λ_j` after clustering, and the cluster
/// label of every eigen-index pair.
#[derive(Clone, Debug)]
pub struct BohrSpectrum {
    /// Ascending representatives; exactly antisymmetric, with `0` present.
    pub frequencies: Vec<f64>,
    /// `labels[[i, j]]` indexes `frequencies` for the gap `λ_i - λ_j`.
    pub labels: Array2<u32>,
    pub tolerance: f64,
}

impl BohrSpectrum {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Representative frequency of the pair `(i, j)`.
    #[inline]
    pub fn gap(&self, i: usize, j: usize) -> f64 {
        self.frequencies[self.labels[[i, j]] as usize]
    }

    /// Index of the cluster whose representative lies within the tolerance of `nu`.
    pub fn find(&self, nu: f64) -> Option<usize> {
        let idx = self.frequencies.partition_point(|&f| f < nu - self.tolerance);
        (idx < self.len() && (self.frequencies[idx] - nu).abs() <= self.tolerance).then_some(idx)
    }

    /// Eigen-index pairs belonging to frequency cluster `k`.
    pub fn pairs(&self, k: usize) -> Vec<(usize, usize)> {
        self.labels.indexed_iter().filter(|(_, &l)| l as usize == k).map(|((i, j), _)| (i, j)).collect()
    }
}

/// Clusters all pairwise gaps by sorted single linkage: consecutive sorted
/// gaps closer than `tol` share a cluster.
pub fn bohr_spectrum(dec: &SpectralDecomposition, tol: f64) -> Result<BohrSpectrum> {
    if tol <= 0.0 || !tol.is_finite() {
        return Err(Error::InvalidParameter(format!("Bohr tolerance must be positive, got {tol}")));
    }
    let d = dec.dim();
    let lam = &dec.eigenvalues;
    let mut gaps: Vec<(f64, u32)> = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            gaps.push((lam[i] - lam[j], (i * d + j) as u32));
        }
    }
    gaps.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let mut labels = Array2::<u32>::zeros((d, d));
    let mut sums: Vec<(f64, usize)> = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for &(g, idx) in &gaps {
        if sums.is_empty() || g - prev > tol {
            sums.push((0.0, 0));
        }
        let c = sums.len() - 1;
        sums[c].0 += g;
        sums[c].1 += 1;
        labels[[idx as usize / d, idx as usize % d]] = c as u32;
        prev = g;
    }
    let raw: Vec<f64> = sums.iter().map(|&(s, k)| s / k as f64).collect();
    // Gaps come in exact ± pairs, so cluster c mirrors cluster len-1-c.
    let m = raw.len();
    let mut frequencies = vec![0.0; m];
    for c in 0..m {
        frequencies[c] = 0.5 * (raw[c] - raw[m - 1 - c]);
    }
    if m % 2 == 1 {
        frequencies[m / 2] = 0.0;
    }
    Ok(BohrSpectrum { frequencies, labels, tolerance: tol })
}

/// `A_ν = Σ_{λ_i - λ_j = ν} P_i A P_j`; zero when `ν` is not a Bohr frequency.
pub fn frequency_component(a: &Matrix, dec: &SpectralDecomposition, bohr: &BohrSpectrum, nu: f64) -> Result<Matrix> {
    if a.dim() != (dec.dim(), dec.dim()) {
        return Err(Error::Shape(format!("operator {:?} vs spectrum of dimension {}", a.dim(), dec.dim())));
    }
    let Some(k) = bohr.find(nu) else {
        return Ok(Matrix::zeros(a.dim()));
    };
    let mut t = dec.to_eigenbasis(a);
    t.zip_mut_with(&bohr.labels, |z, &l| {
        if l as usize != k {
            *z = C64::new(0.0, 0.0);
        }
    });
    Ok(dec.from_eigenbasis(&t))
}
