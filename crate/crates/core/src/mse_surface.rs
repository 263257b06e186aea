//! Mean-square-error surface of the SML filter.
//!
//! With `w = w_1 ⊗ ⋯ ⊗ w_K` and `u^{⊗K}` the K-th Kronecker power of the
//! regressor, the cost is the familiar
//!
//! ```text
//! MSE(w_1..w_K) = R_d − 2 R_{u^K d}·w + wᵀ R_{u^K} w
//! ```
//!
//! which is quadratic in `w` but of degree 2K in the individual factors.
//! The gradient with respect to `w_s` is
//!
//! ```text
//! ∇_s = 2 [R_{u^K} w − R_{u^K d}]ᵀ (w_1 ⊗ ⋯ ⊗ I_M ⊗ ⋯ ⊗ w_K)
//! ```
//!
//! This module uses the ordinary real gradient (the factor of 2 included),
//! so that `mse(W + εΔ) − mse(W) ≈ ε Σ_s ∇_s·Δ_s`. The complex-data
//! convention, which differentiates only the non-conjugated factor, is half
//! of this; [`crate::adaptive`] folds the difference into the step size.
//!
//! All of this is dense `M^K` algebra meant for analysis and testing.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sml_model::{FactorWeights, Regressor};
use crate::tensor_kron::{check_cap, dense_len, kron_power, partial_simple_tensor, simple_tensor};

/// Second-order statistics of `(u^{⊗K}, d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    /// `E[u^{⊗K}ᵀ u^{⊗K}]`, `M^K × M^K`.
    pub r_uk: DMatrix<f64>,
    /// `E[d · u^{⊗K}]`.
    pub r_ukd: DVector<f64>,
    /// `E[d²]`.
    pub r_d: f64,
    pub m: usize,
    pub k: usize,
    /// Number of samples averaged, 0 for analytic moments.
    pub sample_count: usize,
}

/// Ground truth for system identification: `d = u^{⊗K} h_o + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub factors: FactorWeights,
    pub noise_var: f64,
}

impl Plant {
    pub fn new(factors: FactorWeights, noise_var: f64) -> Result<Self> {
        if !noise_var.is_finite() || noise_var < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be finite and >= 0, got {noise_var}"
            )));
        }
        Ok(Plant { factors, noise_var })
    }

    /// Dense `h_o = h_{o1} ⊗ ⋯ ⊗ h_{oK}`.
    pub fn kernel(&self) -> Result<Vec<f64>> {
        simple_tensor(self.factors.factors())
    }
}

fn moment_dims(m: usize, k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::InvalidOrder(0));
    }
    if m == 0 {
        return Err(Error::InvalidLength(0));
    }
    let n = dense_len(m, k)?;
    check_cap(n as u128 * n as u128)?;
    Ok(n)
}

impl MomentSet {
    pub fn from_parts(
        r_uk: DMatrix<f64>,
        r_ukd: DVector<f64>,
        r_d: f64,
        m: usize,
        k: usize,
        sample_count: usize,
    ) -> Result<Self> {
        let n = moment_dims(m, k)?;
        if r_uk.nrows() != n || r_uk.ncols() != n {
            return Err(Error::mismatch(
                "MomentSet R_uK",
                n,
                r_uk.nrows().max(r_uk.ncols()),
            ));
        }
        if r_ukd.len() != n {
            return Err(Error::mismatch("MomentSet R_uKd", n, r_ukd.len()));
        }
        if !r_d.is_finite() || r_d < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "R_d must be finite and >= 0, got {r_d}"
            )));
        }
        Ok(MomentSet {
            r_uk,
            r_ukd,
            r_d,
            m,
            k,
            sample_count,
        })
    }

    fn check(&self, w: &FactorWeights) -> Result<()> {
        if w.order() != self.k {
            return Err(Error::mismatch("model order", self.k, w.order()));
        }
        if w.len() != self.m {
            return Err(Error::mismatch("filter length", self.m, w.len()));
        }
        Ok(())
    }

    /// Writes the moments as plain text:
    ///
    /// ```text
    /// M K sample_count
    /// R_d
    /// <M^K rows of R_uK, row-major, space separated>
    /// <one row holding R_uKd>
    /// ```
    ///
    /// Values are printed with 17 significant digits, which round-trips exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {}", self.m, self.k, self.sample_count);
        let _ = writeln!(s, "{:.16e}", self.r_d);
        let n = self.r_ukd.len();
        for i in 0..n {
            let row: Vec<String> = (0..n)
                .map(|j| format!("{:.16e}", self.r_uk[(i, j)]))
                .collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        let row: Vec<String> = self.r_ukd.iter().map(|x| format!("{x:.16e}")).collect();
        let _ = writeln!(s, "{}", row.join(" "));
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Parse(format!("moment file truncated before {what}")))
        };
        let header: Vec<usize> = next("header")?
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Parse(format!("bad header field {t:?}")))
            })
            .collect::<Result<_>>()?;
        let [m, k, sample_count] = header[..] else {
            return Err(Error::Parse("header must be `M K sample_count`".into()));
        };
        let n = moment_dims(m, k)?;
        let r_d = parse_row(next("R_d")?, 1)?[0];
        let mut r_uk = DMatrix::zeros(n, n);
        for i in 0..n {
            let row = parse_row(next("R_uK")?, n)?;
            for (j, v) in row.into_iter().enumerate() {
                r_uk[(i, j)] = v;
            }
        }
        let r_ukd = DVector::from_vec(parse_row(next("R_uKd")?, n)?);
        MomentSet::from_parts(r_uk, r_ukd, r_d, m, k, sample_count)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        MomentSet::from_text(&std::fs::read_to_string(path)?)
    }
}

fn parse_row(line: &str, expected: usize) -> Result<Vec<f64>> {
    let row: Vec<f64> = line
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Parse(format!("bad number {t:?}")))
        })
        .collect::<Result<_>>()?;
    if row.len() != expected {
        return Err(Error::Parse(format!(
            "expected {expected} values in row, found {}",
            row.len()
        )));
    }
    Ok(row)
}

/// Sample-average moments over paired regressors and desired samples.
pub fn estimate_moments(regressors: &[Regressor], desired: &[f64], k: usize) -> Result<MomentSet> {
    if regressors.is_empty() {
        return Err(Error::EmptyInput("estimate_moments regressors"));
    }
    if regressors.len() != desired.len() {
        return Err(Error::mismatch(
            "estimate_moments desired",
            regressors.len(),
            desired.len(),
        ));
    }
    let m = regressors[0].len();
    let n = moment_dims(m, k)?;

    let mut r_uk = DMatrix::zeros(n, n);
    let mut r_ukd = DVector::zeros(n);
    let mut r_d = 0.0;
    for (u, &d) in regressors.iter().zip(desired) {
        if u.len() != m {
            return Err(Error::mismatch("estimate_moments regressor", m, u.len()));
        }
        let uk = DVector::from_vec(kron_power(u.as_slice(), k)?);
        r_uk.ger(1.0, &uk, &uk, 1.0);
        r_ukd.axpy(d, &uk, 1.0);
        r_d += d * d;
    }
    let scale = 1.0 / regressors.len() as f64;
    r_uk *= scale;
    r_ukd *= scale;
    r_d *= scale;
    MomentSet::from_parts(r_uk, r_ukd, r_d, m, k, regressors.len())
}

fn tensor(w: &FactorWeights) -> Result<DVector<f64>> {
    Ok(DVector::from_vec(simple_tensor(w.factors())?))
}

pub fn mse(w: &FactorWeights, mom: &MomentSet) -> Result<f64> {
    mom.check(w)?;
    let wt = tensor(w)?;
    let quad = wt.dot(&(&mom.r_uk * &wt));
    Ok(mom.r_d - 2.0 * mom.r_ukd.dot(&wt) + quad)
}

/// Real gradient of [`mse`], one vector per factor.
pub fn grad(w: &FactorWeights, mom: &MomentSet) -> Result<Vec<Vec<f64>>> {
    mom.check(w)?;
    let wt = tensor(w)?;
    let resid = &mom.r_uk * &wt - &mom.r_ukd;
    (0..w.order())
        .map(|s| {
            let p = partial_simple_tensor(w.factors(), s)?;
            let g = p.tr_mul(&resid) * 2.0;
            Ok(g.as_slice().to_vec())
        })
        .collect()
}

/// `‖R_{u^K} w − R_{u^K d}‖`, zero exactly on the normal equations.
pub fn normal_residual(w: &FactorWeights, mom: &MomentSet) -> Result<f64> {
    mom.check(w)?;
    let wt = tensor(w)?;
    Ok((&mom.r_uk * &wt - &mom.r_ukd).norm())
}
