//! Pauli matrices, weighted Pauli strings and their bit-mask algebra.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Region;
use crate::linalg::{Matrix, C64, I, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> Matrix {
        match self {
            Pauli::X => ndarray::array![[ZERO, ONE], [ONE, ZERO]],
            Pauli::Y => ndarray::array![[ZERO, -I], [I, ZERO]],
            Pauli::Z => ndarray::array![[ONE, ZERO], [ZERO, -ONE]],
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        };
        write!(f, "{c}")
    }
}

/// `phase * i^{|x & z|} * X^x Z^z` over `n` qubits, site 0 in the most
/// significant bit of the masks. `phase` counts powers of `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliWord {
    pub x: u64,
    pub z: u64,
    pub phase: u8,
}

impl PauliWord {
    pub fn identity() -> Self {
        PauliWord { x: 0, z: 0, phase: 0 }
    }

    pub fn phase_factor(&self) -> C64 {
        [ONE, I, -ONE, -I][(self.phase & 3) as usize]
    }

    pub fn mul(&self, other: &PauliWord) -> PauliWord {
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let own = (self.x & self.z).count_ones() + (other.x & other.z).count_ones();
        let result = (x & z).count_ones();
        let swap = 2 * (self.z & other.x).count_ones();
        let phase = ((self.phase as u32 + other.phase as u32 + own + swap + 4 * 64 - result) % 4) as u8;
        PauliWord { x, z, phase }
    }

    /// Image of basis state `j`: `P|j> = amp * |j ^ x>`.
    #[inline]
    pub fn apply_basis(&self, j: usize) -> (usize, C64) {
        let pow = self.phase as u32 + (self.x & self.z).count_ones() + 2 * ((j as u64) & self.z).count_ones();
        ((j ^ self.x as usize), [ONE, I, -ONE, -I][(pow % 4) as usize])
    }

    /// `tr(rho P)` for a dense `2^n x 2^n` operator.
    pub fn trace_with(&self, rho: &Matrix) -> C64 {
        let d = rho.nrows();
        let mut acc = ZERO;
        for j in 0..d {
            let (k, amp) = self.apply_basis(j);
            acc += amp * rho[[j, k]];
        }
        acc
    }

    /// `<psi| P |psi>`.
    pub fn expectation_vector(&self, psi: &[C64]) -> C64 {
        let mut acc = ZERO;
        for (j, &a) in psi.iter().enumerate() {
            let (k, amp) = self.apply_basis(j);
            acc += psi[k].conj() * amp * a;
        }
        acc
    }
}

/// Real coefficient times a tensor product of single-site Paulis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliString {
    pub coefficient: f64,
    pub factors: BTreeMap<usize, Pauli>,
}

impl PauliString {
    pub fn new(coefficient: f64, factors: &[(usize, Pauli)]) -> Self {
        PauliString { coefficient, factors: factors.iter().cloned().collect() }
    }

    pub fn support(&self) -> Region {
        Region::new(self.factors.keys().cloned().collect())
    }

    /// Bit-mask form on `n` qubits (coefficient dropped).
    pub fn word(&self, n: usize) -> PauliWord {
        let mut w = PauliWord::identity();
        for (&s, &p) in &self.factors {
            let bit = 1u64 << (n - 1 - s);
            let (x, z) = p.bits();
            if x {
                w.x |= bit;
            }
            if z {
                w.z |= bit;
            }
        }
        w
    }

    /// Dense matrix on `support`, first site most significant.
    pub fn to_dense(&self, support: &Region) -> Result<Matrix> {
        let k = support.len();
        let mut local = PauliWord::identity();
        for (&s, &p) in &self.factors {
            let pos = support.position(s).ok_or(Error::TermOutsideSupport(s))?;
            let bit = 1u64 << (k - 1 - pos);
            let (x, z) = p.bits();
            if x {
                local.x |= bit;
            }
            if z {
                local.z |= bit;
            }
        }
        let d = 1usize << k;
        let mut m = Matrix::zeros((d, d));
        for j in 0..d {
            let (i, amp) = local.apply_basis(j);
            m[[i, j]] = amp * self.coefficient;
        }
        Ok(m)
    }

    pub fn label(&self) -> String {
        self.factors.iter().map(|(s, p)| format!("{p}{s}")).collect::<Vec<_>>().join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron, max_abs};
    use proptest::prelude::*;

    fn dense_word(w: &PauliWord, n: usize) -> Matrix {
        let d = 1usize << n;
        let mut m = Matrix::zeros((d, d));
        for j in 0..d {
            let (i, amp) = w.apply_basis(j);
            m[[i, j]] = amp;
        }
        m
    }

    #[test]
    fn single_site_matrices() {
        let s = PauliString::new(0.5, &[(0, Pauli::Z)]);
        let m = s.to_dense(&Region::new(vec![0])).unwrap();
        assert_eq!(m[[0, 0]], C64::new(0.5, 0.0));
        assert_eq!(m[[1, 1]], C64::new(-0.5, 0.0));
        let y = PauliString::new(1.0, &[(3, Pauli::Y)]).to_dense(&Region::new(vec![3])).unwrap();
        assert!(max_abs(&(&y - &Pauli::Y.matrix())) == 0.0);
    }

    #[test]
    fn to_dense_uses_region_order() {
        let s = PauliString::new(1.0, &[(2, Pauli::X), (5, Pauli::Y)]);
        let m = s.to_dense(&Region::new(vec![5, 2, 7])).unwrap();
        let expect = kron(&kron(&Pauli::X.matrix(), &Pauli::Y.matrix()), &crate::linalg::identity(2));
        assert!(max_abs(&(&m - &expect)) == 0.0);
        assert!(matches!(s.to_dense(&Region::new(vec![2])), Err(Error::TermOutsideSupport(5))));
    }

    fn arb_word(n: usize) -> impl Strategy<Value = PauliWord> {
        let mask = (1u64 << n) - 1;
        (any::<u64>(), any::<u64>(), 0u8..4).prop_map(move |(x, z, phase)| PauliWord { x: x & mask, z: z & mask, phase })
    }

    proptest! {
        #[test]
        fn word_product_matches_dense(a in arb_word(3), b in arb_word(3)) {
            let pa = dense_word(&a, 3);
            let pb = dense_word(&b, 3);
            let ab = a.mul(&b);
            let dense_ab = dense_word(&ab, 3);
            prop_assert!(max_abs(&(pa.dot(&pb) - dense_ab)) < 1e-14);
        }

        #[test]
        fn trace_with_matches_dense(w in arb_word(3), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rho = Matrix::from_shape_fn((8, 8), |_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
            let dense = dense_word(&w, 3);
            let expect = crate::linalg::trace(&rho.dot(&dense));
            prop_assert!((w.trace_with(&rho) - expect).norm() < 1e-12);
        }
    }
}
