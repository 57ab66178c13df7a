//! Index-permutation kernels.
//!
//! Every local operation on a many-qubit state is done by moving the support
//! qubits to the most significant bits ("framing"), running one dense matrix
//! product, and moving them back. The permutations are driven by `BitGather`,
//! which maps destination indices to source indices with two lookup tables.

use crate::linalg::{C64, ZERO};

/// Destination-to-source index map for a permutation of index bits.
#[derive(Clone, Debug)]
pub struct BitGather {
    n_bits: usize,
    low_bits: usize,
    low: Vec<usize>,
    high: Vec<usize>,
}

impl BitGather {
    /// `source_bit[p]` is the bit of the source index that becomes bit `p`
    /// (counted from the least significant end) of the destination index.
    pub fn new(source_bit: &[usize]) -> Self {
        let n_bits = source_bit.len();
        debug_assert!({
            let mut seen = vec![false; n_bits];
            source_bit.iter().all(|&b| b < n_bits && !std::mem::replace(&mut seen[b], true))
        });
        let low_bits = n_bits / 2;
        let high_bits = n_bits - low_bits;
        let table = |offset: usize, width: usize| -> Vec<usize> {
            (0..1usize << width)
                .map(|v| {
                    (0..width)
                        .filter(|&p| v >> p & 1 == 1)
                        .map(|p| 1usize << source_bit[offset + p])
                        .sum()
                })
                .collect()
        };
        BitGather { n_bits, low_bits, low: table(0, low_bits), high: table(low_bits, high_bits) }
    }

    pub fn len(&self) -> usize {
        1 << self.n_bits
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn map(&self, i: usize) -> usize {
        self.high[i >> self.low_bits] + self.low[i & ((1 << self.low_bits) - 1)]
    }

    /// `dst[i] = src[map(i)]`.
    pub fn gather(&self, src: &[C64], dst: &mut [C64]) {
        debug_assert_eq!(src.len(), self.len());
        debug_assert_eq!(dst.len(), self.len());
        let w = self.low.len();
        for (h, chunk) in dst.chunks_mut(w).enumerate() {
            let base = self.high[h];
            for (d, &l) in chunk.iter_mut().zip(&self.low) {
                *d = src[base + l];
            }
        }
    }

    /// `dst[i] += src[map(i)]`.
    pub fn gather_add(&self, src: &[C64], dst: &mut [C64]) {
        let w = self.low.len();
        for (h, chunk) in dst.chunks_mut(w).enumerate() {
            let base = self.high[h];
            for (d, &l) in chunk.iter_mut().zip(&self.low) {
                *d += src[base + l];
            }
        }
    }

    /// `dst[map(i)] = src[i]`.
    pub fn scatter(&self, src: &[C64], dst: &mut [C64]) {
        let w = self.low.len();
        for (h, chunk) in src.chunks(w).enumerate() {
            let base = self.high[h];
            for (&s, &l) in chunk.iter().zip(&self.low) {
                dst[base + l] = s;
            }
        }
    }

    /// `dst[map(i)] += scale * src[i]`.
    pub fn scatter_add(&self, src: &[C64], dst: &mut [C64], scale: C64) {
        let w = self.low.len();
        for (h, chunk) in src.chunks(w).enumerate() {
            let base = self.high[h];
            for (&s, &l) in chunk.iter().zip(&self.low) {
                dst[base + l] += scale * s;
            }
        }
    }
}

/// Qubit order that puts `support` first (in the given order) followed by the
/// remaining sites in ascending order.
pub fn support_first_order(n: usize, support: &[usize]) -> Vec<usize> {
    let mut order = support.to_vec();
    let mut used = vec![false; n];
    for &s in support {
        used[s] = true;
    }
    order.extend((0..n).filter(|&s| !used[s]));
    order
}

/// Gather for a state vector: destination qubit slot `p` (0 = most
/// significant) holds source site `order[p]`.
pub fn vector_frame(n: usize, order: &[usize]) -> BitGather {
    let source_bit: Vec<usize> = (0..n).map(|bit| n - 1 - order[n - 1 - bit]).collect();
    BitGather::new(&source_bit)
}

/// Gather for a flattened `2^n x 2^n` operator (index = row * 2^n + col)
/// applying the same qubit reordering to rows and columns.
pub fn operator_frame(n: usize, order: &[usize]) -> BitGather {
    let mut source_bit = Vec::with_capacity(2 * n);
    for bit in 0..n {
        source_bit.push(n - 1 - order[n - 1 - bit]);
    }
    for bit in 0..n {
        source_bit.push(n + n - 1 - order[n - 1 - bit]);
    }
    BitGather::new(&source_bit)
}

/// Gather for a flattened operator into the superoperator frame
/// `[row support | col support | row rest | col rest]`, so the result reads as
/// a `4^k x 4^(n-k)` matrix whose row index is the row-major vectorization
/// of the support block.
pub fn super_frame(n: usize, support: &[usize]) -> BitGather {
    let k = support.len();
    let order = support_first_order(n, support);
    let (sup, rest) = order.split_at(k);
    let mut slots: Vec<usize> = Vec::with_capacity(2 * n);
    slots.extend(sup.iter().map(|&s| n + n - 1 - s));
    slots.extend(sup.iter().map(|&s| n - 1 - s));
    slots.extend(rest.iter().map(|&s| n + n - 1 - s));
    slots.extend(rest.iter().map(|&s| n - 1 - s));
    let total = 2 * n;
    let source_bit: Vec<usize> = (0..total).map(|bit| slots[total - 1 - bit]).collect();
    BitGather::new(&source_bit)
}

pub fn zeros(len: usize) -> Vec<C64> {
    vec![ZERO; len]
}

/// In-place conjugate transpose of a square row-major buffer.
pub fn dagger_in_place(data: &mut [C64], dim: usize) {
    const B: usize = 32;
    for bi in (0..dim).step_by(B) {
        for bj in (bi..dim).step_by(B) {
            for i in bi..(bi + B).min(dim) {
                let start = if bi == bj { i } else { bj };
                for j in start..(bj + B).min(dim) {
                    let a = data[i * dim + j];
                    let b = data[j * dim + i];
                    data[i * dim + j] = b.conj();
                    data[j * dim + i] = a.conj();
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits_of(i: usize, n: usize) -> Vec<usize> {
        (0..n).map(|p| i >> (n - 1 - p) & 1).collect()
    }

    #[test]
    fn vector_frame_moves_support_to_front() {
        let n = 4;
        let order = support_first_order(n, &[2, 0]);
        assert_eq!(order, vec![2, 0, 1, 3]);
        let g = vector_frame(n, &order);
        for i in 0..16 {
            let dst = bits_of(i, n);
            let src = bits_of(g.map(i), n);
            for p in 0..n {
                assert_eq!(dst[p], src[order[p]]);
            }
        }
    }

    #[test]
    fn gather_scatter_roundtrip() {
        let n = 3;
        let g = operator_frame(n, &[1, 2, 0]);
        let src: Vec<C64> = (0..64).map(|i| C64::new(i as f64, -(i as f64))).collect();
        let mut framed = zeros(64);
        g.gather(&src, &mut framed);
        let mut back = zeros(64);
        g.scatter(&framed, &mut back);
        assert_eq!(src, back);
    }

    #[test]
    fn super_frame_layout() {
        let n = 3;
        let support = [1usize];
        let g = super_frame(n, &support);
        // destination index bits: [r1 | c1 | r0 r2 | c0 c2]
        for i in 0..64 {
            let d = bits_of(i, 6);
            let src = g.map(i);
            let (row, col) = (src >> 3, src & 7);
            let rb = bits_of(row, 3);
            let cb = bits_of(col, 3);
            assert_eq!(d, vec![rb[1], cb[1], rb[0], rb[2], cb[0], cb[2]]);
        }
    }

    #[test]
    fn dagger_in_place_matches_definition() {
        let dim = 37;
        let data: Vec<C64> = (0..dim * dim).map(|i| C64::new(i as f64, (i % 7) as f64)).collect();
        let mut d = data.clone();
        dagger_in_place(&mut d, dim);
        for i in 0..dim {
            for j in 0..dim {
                assert_eq!(d[i * dim + j], data[j * dim + i].conj());
            }
        }
    }
}
