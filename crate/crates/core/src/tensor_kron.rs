//! Kronecker products, multi-index linearization and dense rank-one tensors.
//!
//! Everything here works on dense `M^K` objects. These routines are the
//! brute-force reference for the O(KM) product form in [`crate::sml_model`];
//! they are not meant for large `M` or `K`, so every allocation is checked
//! against [`DENSE_CAP`].
//!
//! Multi-indices are linearized row-major, first index most significant:
//!
//! ```text
//! flat(i_1, ..., i_K) = i_1 M^{K-1} + i_2 M^{K-2} + ... + i_K
//! ```
//!
//! which is the order produced by evaluating `a ⊗ b ⊗ c` as `(a ⊗ b) ⊗ c`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Maximum number of `f64` entries any dense oracle object may hold.
pub const DENSE_CAP: usize = 1_000_000;

pub(crate) fn check_cap(entries: u128) -> Result<usize> {
    if entries > DENSE_CAP as u128 {
        return Err(Error::SizeCap {
            requested: entries,
            cap: DENSE_CAP,
        });
    }
    Ok(entries as usize)
}

/// `M^K` with overflow-safe arithmetic, checked against [`DENSE_CAP`].
pub fn dense_len(m: usize, k: usize) -> Result<usize> {
    let mut n: u128 = 1;
    for _ in 0..k {
        n = n.saturating_mul(m as u128);
        if n > DENSE_CAP as u128 {
            return check_cap(n);
        }
    }
    check_cap(n)
}

/// A K-tuple of delays `(i_1, ..., i_K)`, each in `[0, M)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(indices: Vec<usize>) -> Self {
        MultiIndex(indices)
    }

    /// Inverse of [`flat_index`].
    pub fn from_flat(mut flat: usize, m: usize, k: usize) -> Result<Self> {
        let len = dense_len(m, k)?;
        if flat >= len {
            return Err(Error::IndexOutOfRange {
                context: "MultiIndex::from_flat",
                index: flat,
                bound: len,
            });
        }
        let mut idx = vec![0; k];
        for slot in idx.iter_mut().rev() {
            *slot = flat % m;
            flat /= m;
        }
        Ok(MultiIndex(idx))
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Kronecker product of two vectors: `out[p * b.len() + q] = a[p] * b[q]`.
pub fn kron(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        out.extend(b.iter().map(|&y| x * y));
    }
    out
}

/// `u ⊗ u ⊗ ... ⊗ u` (K times). Entry at multi-index `(j_1..j_K)` is `∏ u[j_s]`.
pub fn kron_power(u: &[f64], k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidOrder(0));
    }
    dense_len(u.len(), k)?;
    let mut acc = u.to_vec();
    for _ in 1..k {
        acc = kron(&acc, u);
    }
    Ok(acc)
}

/// Row-major linearization of a multi-index over an `M`-ary alphabet.
pub fn flat_index(mi: &MultiIndex, m: usize) -> Result<usize> {
    let mut flat = 0usize;
    for &i in mi.as_slice() {
        if i >= m {
            return Err(Error::IndexOutOfRange {
                context: "flat_index",
                index: i,
                bound: m,
            });
        }
        flat = flat
            .checked_mul(m)
            .and_then(|f| f.checked_add(i))
            .ok_or(Error::SizeCap {
                requested: u128::MAX,
                cap: DENSE_CAP,
            })?;
    }
    Ok(flat)
}

fn common_len<V: AsRef<[f64]>>(factors: &[V], context: &'static str) -> Result<usize> {
    let first = factors
        .first()
        .ok_or(Error::InvalidOrder(0))?
        .as_ref()
        .len();
    for f in factors {
        if f.as_ref().len() != first {
            return Err(Error::mismatch(context, first, f.as_ref().len()));
        }
    }
    Ok(first)
}

/// The rank-one tensor `w_1 ⊗ ... ⊗ w_K`.
pub fn simple_tensor<V: AsRef<[f64]>>(factors: &[V]) -> Result<Vec<f64>> {
    let m = common_len(factors, "simple_tensor")?;
    dense_len(m, factors.len())?;
    let mut acc = factors[0].as_ref().to_vec();
    for f in &factors[1..] {
        acc = kron(&acc, f.as_ref());
    }
    Ok(acc)
}

/// Dot product of two equal-length vectors.
pub fn contract(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::mismatch("contract", a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

/// `w_1 ⊗ ... ⊗ I_M ⊗ ... ⊗ w_K` with the identity in slot `s` (0-based).
///
/// The result is `M^K × M`; column `c` is [`simple_tensor`] with `w_s`
/// replaced by the unit vector `e_c`, so multiplying by `w_s` on the right
/// gives back `simple_tensor(factors)`.
pub fn partial_simple_tensor<V: AsRef<[f64]>>(factors: &[V], s: usize) -> Result<DMatrix<f64>> {
    let k = factors.len();
    let m = common_len(factors, "partial_simple_tensor")?;
    if s >= k {
        return Err(Error::IndexOutOfRange {
            context: "partial_simple_tensor",
            index: s,
            bound: k,
        });
    }
    let rows = dense_len(m, k)?;
    check_cap(rows as u128 * m as u128)?;

    let mut out = DMatrix::zeros(rows, m);
    let mut idx = vec![0usize; k];
    for p in 0..rows {
        let coeff: f64 = idx
            .iter()
            .enumerate()
            .filter(|&(t, _)| t != s)
            .map(|(t, &i)| factors[t].as_ref()[i])
            .product();
        out[(p, idx[s])] = coeff;

        // odometer increment, last index fastest
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < m {
                break;
            }
            *slot = 0;
        }
    }
    Ok(out)
}
