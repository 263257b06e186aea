use crate::error::{Error, Result};
use crate::sml_model::{factor_outputs_into, leave_one_out_into, FactorWeights, Regressor};

use super::{check_mu, AdaptiveFilter, Step};

/// Starting point for the branch filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitScheme {
    /// `w_j = [2^{1-j}, 0, …, 0]` for `j < K`, `w_K = 0`.
    #[default]
    Staggered,
    /// `w_j = [2^{1-j}, 0, …, 0, 1]` for `j < K`, `w_K = 0`. For `M = 1`
    /// the trailing 1 overwrites the leading entry.
    StaggeredLastTap,
}

/// Initial weights for an order-`k`, length-`m` filter.
///
/// The last factor is always zero; a nonzero leading tap on the others is
/// what lets the update escape the all-zero critical point.
pub fn init_weights(k: usize, m: usize, scheme: InitScheme) -> Result<FactorWeights> {
    let mut w = FactorWeights::zeros(k, m)?;
    for (j, f) in w.factors_mut().iter_mut().enumerate().take(k - 1) {
        f[0] = 0.5f64.powi(j as i32);
        if scheme == InitScheme::StaggeredLastTap {
            f[m - 1] = 1.0;
        }
    }
    Ok(w)
}

/// The default, [`InitScheme::Staggered`], initialization.
pub fn sml_init(k: usize, m: usize) -> Result<FactorWeights> {
    init_weights(k, m, InitScheme::Staggered)
}

/// Multiplications per iteration quoted for real data and `K ≥ 2`.
pub fn reference_mult_count(m: usize, k: usize) -> u64 {
    (m * k + k * k - k + 2 * m + 2) as u64
}

/// Multiplications actually performed by [`SmlLms::step`].
///
/// `KM` branch outputs, `K(K-2)` leave-one-out products, one for `y`, one
/// for `μe`, `K` for `μe·y_s` and `KM` for the weight updates. Agrees with
/// [`reference_mult_count`] when `K = 2`.
pub fn sml_mult_count(m: usize, k: usize) -> u64 {
    let loo = k * k.saturating_sub(2);
    (2 * k * m + loo + 2 + k) as u64
}

/// Stochastic-gradient adaptation of the product-of-FIR filter.
#[derive(Debug, Clone)]
pub struct SmlLms {
    weights: FactorWeights,
    mu: f64,
    iter: u64,
    mult_count_last: u64,
    y_o: Vec<f64>,
    y_loo: Vec<f64>,
}

impl SmlLms {
    pub fn new(k: usize, m: usize, mu: f64) -> Result<Self> {
        Self::with_init(k, m, mu, InitScheme::Staggered)
    }

    pub fn with_init(k: usize, m: usize, mu: f64, scheme: InitScheme) -> Result<Self> {
        Self::from_weights(init_weights(k, m, scheme)?, mu)
    }

    pub fn from_weights(weights: FactorWeights, mu: f64) -> Result<Self> {
        check_mu(mu)?;
        let k = weights.order();
        Ok(SmlLms {
            weights,
            mu,
            iter: 0,
            mult_count_last: 0,
            y_o: vec![0.0; k],
            y_loo: vec![0.0; k],
        })
    }

    pub fn weights(&self) -> &FactorWeights {
        &self.weights
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// One iteration of the update
    ///
    /// ```text
    /// y_os = u·w_s,  y_s = ∏_{t≠s} y_ot,  y = y_K · y_oK,  e = d − y
    /// w_s ← w_s + (μ e y_s) u      for every s, all from the old weights
    /// ```
    pub fn step(&mut self, u: &Regressor, d: f64) -> Result<Step> {
        let m = self.weights.len();
        let k = self.weights.order();
        self.check(u)?;
        let x = u.as_slice();

        let (y, e, g, mut mults) =
            forward(x, d, self.mu, &self.weights, &mut self.y_o, &mut self.y_loo);
        for (w, &y_s) in self.weights.factors_mut().iter_mut().zip(&self.y_loo) {
            let c = g * y_s;
            for (wj, &uj) in w.iter_mut().zip(x) {
                *wj += c * uj;
            }
        }
        mults += (k + k * m) as u64;

        self.iter += 1;
        self.mult_count_last = mults;
        if !e.is_finite() || !self.weights.is_finite() {
            return Err(Error::Divergence {
                iteration: self.iter,
            });
        }
        Ok(Step { e, y })
    }
}

impl SmlLms {
    fn check(&self, u: &Regressor) -> Result<()> {
        if u.len() != self.weights.len() {
            return Err(Error::mismatch(
                "SmlLms regressor",
                self.weights.len(),
                u.len(),
            ));
        }
        Ok(())
    }

    /// The per-factor increments `(μ e y_s) u` that [`SmlLms::step`] would
    /// add for this sample, computed with the same operations.
    pub fn increment(&self, u: &Regressor, d: f64) -> Result<Vec<Vec<f64>>> {
        self.check(u)?;
        let k = self.weights.order();
        let x = u.as_slice();
        let (mut y_o, mut y_loo) = (vec![0.0; k], vec![0.0; k]);
        let (_, _, g, _) = forward(x, d, self.mu, &self.weights, &mut y_o, &mut y_loo);
        Ok(y_loo
            .iter()
            .map(|&y_s| {
                let c = g * y_s;
                x.iter().map(|&uj| c * uj).collect()
            })
            .collect())
    }
}

/// Output, error and scaled error `μe` from the old weights, plus the
/// multiplications spent.
fn forward(
    x: &[f64],
    d: f64,
    mu: f64,
    w: &FactorWeights,
    y_o: &mut [f64],
    y_loo: &mut [f64],
) -> (f64, f64, f64, u64) {
    let k = w.order();
    let mut mults = factor_outputs_into(x, w, y_o);
    mults += leave_one_out_into(y_o, y_loo);
    let y = y_loo[k - 1] * y_o[k - 1];
    let e = d - y;
    let g = mu * e;
    (y, e, g, mults + 2)
}

impl AdaptiveFilter for SmlLms {
    fn name(&self) -> &'static str {
        "sml-lms"
    }

    fn filter_len(&self) -> usize {
        self.weights.len()
    }

    fn order(&self) -> usize {
        self.weights.order()
    }

    fn step(&mut self, u: &Regressor, d: f64) -> Result<Step> {
        SmlLms::step(self, u, d)
    }

    fn iteration(&self) -> u64 {
        self.iter
    }

    fn mult_count_last(&self) -> u64 {
        self.mult_count_last
    }

    fn mults_per_step(&self) -> u64 {
        sml_mult_count(self.weights.len(), self.weights.order())
    }
}
