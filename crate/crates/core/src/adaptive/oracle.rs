//! Dense check that the SML-LMS increment is a stochastic-gradient step.
//!
//! One-sample moment estimates `R̃ = u^{⊗K}ᵀ u^{⊗K}` and `r̃ = d u^{⊗K}` are
//! substituted into the closed-form gradient (complex-data convention, no
//! factor 2) and contracted with `w_1 ⊗ ⋯ ⊗ I ⊗ ⋯ ⊗ w_K`. The update must
//! equal `−μ` times that.

use nalgebra::DVector;

use crate::error::Result;
use crate::sml_model::Regressor;
use crate::tensor_kron::{kron_power, partial_simple_tensor, simple_tensor};

use super::SmlLms;

/// Largest relative deviation between the update applied by
/// [`SmlLms::step`] and `−μ ∇̃` built from dense tensors.
pub fn increment_gap(state: &SmlLms, u: &Regressor, d: f64) -> Result<f64> {
    let w = state.weights();
    let k = w.order();
    let applied = state.increment(u, d)?;
    let uk = DVector::from_vec(kron_power(u.as_slice(), k)?);
    let wt = DVector::from_vec(simple_tensor(w.factors())?);
    let r_uk = &uk * uk.transpose();
    let r_ukd = &uk * d;
    let row = &r_uk * &wt - r_ukd;

    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (s, got) in applied.iter().enumerate().take(k) {
        let p = partial_simple_tensor(w.factors(), s)?;
        let expected = p.tr_mul(&row) * -state.mu();
        for (g, ex) in got.iter().zip(expected.iter()) {
            diff = diff.max((g - ex).abs());
            scale = scale.max(ex.abs());
        }
    }
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

/// True when the applied update matches the instantaneous gradient to 1e-10.
pub fn sml_step_matches_gradient(state: &SmlLms, u: &Regressor, d: f64) -> bool {
    matches!(increment_gap(state, u, d), Ok(gap) if gap <= 1e-10)
}
