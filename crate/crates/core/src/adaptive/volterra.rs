use crate::error::{Error, Result};
use crate::sml_model::Regressor;

use super::{check_mu, AdaptiveFilter, Step};

/// `C(M+K-1, K)`, the number of distinct degree-K delay monomials.
pub fn basis_size(m: usize, k: usize) -> usize {
    let (n, r) = (m + k - 1, k);
    let mut c: u128 = 1;
    for i in 0..r {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c as usize
}

/// All nondecreasing K-tuples over `[0, M)`, in lexicographic order.
pub fn multisets(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(basis_size(m, k));
    let mut cur = vec![0usize; k];
    loop {
        out.push(cur.clone());
        // rightmost slot that can still grow
        let Some(pos) = (0..k).rev().find(|&p| cur[p] + 1 < m) else {
            return out;
        };
        let v = cur[pos] + 1;
        cur[pos..].iter_mut().for_each(|c| *c = v);
    }
}

/// Multiplications per iteration of [`VolterraLms::step`]: `K-1` per
/// monomial, then output, `μe`, and update.
pub fn volterra_mult_count(m: usize, k: usize) -> u64 {
    let c = basis_size(m, k);
    (c * (k - 1) + c + 1 + c) as u64
}

/// LMS on the symmetric-reduced homogeneous Volterra expansion of order K.
#[derive(Debug, Clone)]
pub struct VolterraLms {
    m: usize,
    k: usize,
    basis: Vec<Vec<usize>>,
    coeffs: Vec<f64>,
    phi: Vec<f64>,
    mu: f64,
    iter: u64,
    mult_count_last: u64,
}

impl VolterraLms {
    /// Zero-initialized filter.
    pub fn new(k: usize, m: usize, mu: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidOrder(k));
        }
        if m == 0 {
            return Err(Error::InvalidLength(m));
        }
        check_mu(mu)?;
        let basis = multisets(m, k);
        let n = basis.len();
        Ok(VolterraLms {
            m,
            k,
            basis,
            coeffs: vec![0.0; n],
            phi: vec![0.0; n],
            mu,
            iter: 0,
            mult_count_last: 0,
        })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn basis(&self) -> &[Vec<usize>] {
        &self.basis
    }

    pub fn step(&mut self, u: &Regressor, d: f64) -> Result<Step> {
        if u.len() != self.m {
            return Err(Error::mismatch("VolterraLms regressor", self.m, u.len()));
        }
        let x = u.as_slice();
        let mut mults = 0u64;
        for (p, mi) in self.phi.iter_mut().zip(&self.basis) {
            let mut it = mi.iter();
            let first = x[*it.next().expect("K >= 1")];
            *p = it.fold(first, |acc, &i| acc * x[i]);
            mults += (self.k - 1) as u64;
        }

        let y: f64 = self.phi.iter().zip(&self.coeffs).map(|(p, c)| p * c).sum();
        let e = d - y;
        let g = self.mu * e;
        for (c, &p) in self.coeffs.iter_mut().zip(&self.phi) {
            *c += g * p;
        }
        mults += 2 * self.coeffs.len() as u64 + 1;

        self.iter += 1;
        self.mult_count_last = mults;
        if !e.is_finite() || self.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Divergence {
                iteration: self.iter,
            });
        }
        Ok(Step { e, y })
    }
}

impl AdaptiveFilter for VolterraLms {
    fn name(&self) -> &'static str {
        "volterra-lms"
    }

    fn filter_len(&self) -> usize {
        self.m
    }

    fn order(&self) -> usize {
        self.k
    }

    fn step(&mut self, u: &Regressor, d: f64) -> Result<Step> {
        VolterraLms::step(self, u, d)
    }

    fn iteration(&self) -> u64 {
        self.iter
    }

    fn mult_count_last(&self) -> u64 {
        self.mult_count_last
    }

    fn mults_per_step(&self) -> u64 {
        volterra_mult_count(self.m, self.k)
    }
}
