//! Online adaptation: SML-LMS and a reduced-basis Volterra-LMS baseline.
//!
//! Both filters count the multiplications they perform in every step so the
//! per-iteration cost can be compared exactly rather than asymptotically.

mod oracle;
mod sml_lms;
mod trace;
mod volterra;

pub use oracle::{increment_gap, sml_step_matches_gradient};
pub use sml_lms::{
    init_weights, reference_mult_count, sml_init, sml_mult_count, InitScheme, SmlLms,
};
pub use trace::{ErrorTrace, TraceRecord};
pub use volterra::{basis_size, multisets, volterra_mult_count, VolterraLms};

use crate::error::{Error, Result};
use crate::mse_surface::Plant;
use crate::sml_model::{output_unchecked, DelayLine, Regressor};

/// A-priori error and output of one adaptation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub e: f64,
    pub y: f64,
}

/// Common interface of the sample-by-sample adaptive filters.
pub trait AdaptiveFilter {
    fn name(&self) -> &'static str;
    fn filter_len(&self) -> usize;
    fn order(&self) -> usize;
    /// Filters `u`, compares with `d` and adapts. `y` and `e` use the
    /// weights from before the update.
    fn step(&mut self, u: &Regressor, d: f64) -> Result<Step>;
    fn iteration(&self) -> u64;
    fn mult_count_last(&self) -> u64;
    /// Closed-form multiplications per step for this configuration.
    fn mults_per_step(&self) -> u64;
}

impl<F: AdaptiveFilter + ?Sized> AdaptiveFilter for Box<F> {
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn filter_len(&self) -> usize {
        (**self).filter_len()
    }
    fn order(&self) -> usize {
        (**self).order()
    }
    fn step(&mut self, u: &Regressor, d: f64) -> Result<Step> {
        (**self).step(u, d)
    }
    fn iteration(&self) -> u64 {
        (**self).iteration()
    }
    fn mult_count_last(&self) -> u64 {
        (**self).mult_count_last()
    }
    fn mults_per_step(&self) -> u64 {
        (**self).mults_per_step()
    }
}

pub(crate) fn check_mu(mu: f64) -> Result<()> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must be finite and > 0, got {mu}"
        )));
    }
    Ok(())
}

/// Drives `filter` over an input signal through a zero-padded delay line.
///
/// With a plant, each record also carries the a-priori excess error
/// `plant(u_i) − y(i)`, i.e. `u_i^{⊗K}(h_o − w[i−1])`.
pub fn run_filter<F: AdaptiveFilter + ?Sized>(
    filter: &mut F,
    inputs: &[f64],
    desired: &[f64],
    plant: Option<&Plant>,
) -> Result<ErrorTrace> {
    if inputs.len() != desired.len() {
        return Err(Error::mismatch(
            "run_filter desired",
            inputs.len(),
            desired.len(),
        ));
    }
    let m = filter.filter_len();
    if let Some(p) = plant {
        if p.factors.len() != m {
            return Err(Error::mismatch(
                "run_filter plant length",
                m,
                p.factors.len(),
            ));
        }
    }
    let mut line = DelayLine::new(m)?;
    let mut records = Vec::with_capacity(inputs.len());
    for (&x, &d) in inputs.iter().zip(desired) {
        let u = line.push(x);
        let Step { e, y } = filter.step(u, d)?;
        let excess_err = plant.map(|p| output_unchecked(u.as_slice(), &p.factors) - y);
        records.push(TraceRecord {
            iter: filter.iteration(),
            e,
            y,
            excess_err,
        });
    }
    Ok(ErrorTrace { records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sml_model::FactorWeights;

    #[test]
    fn empty_input_gives_empty_trace() {
        let mut f = SmlLms::new(2, 3, 0.1).unwrap();
        let t = run_filter(&mut f, &[], &[], None).unwrap();
        assert!(t.records.is_empty());
    }

    #[test]
    fn zero_input_freezes_weights() {
        let mut f = SmlLms::new(2, 3, 0.1).unwrap();
        let d = [0.5, -1.0, 2.0, 0.25];
        let t = run_filter(&mut f, &[0.0; 4], &d, None).unwrap();
        for (r, &di) in t.records.iter().zip(&d) {
            assert_eq!(r.e, di);
            assert_eq!(r.excess_err, None);
        }
        assert_eq!(f.weights(), &sml_init(2, 3).unwrap());
    }

    #[test]
    fn excess_error_uses_pre_update_weights() {
        let plant = Plant::new(
            FactorWeights::new(vec![vec![1.0, 0.5], vec![0.2, -0.3]]).unwrap(),
            0.0,
        )
        .unwrap();
        let x = [1.0, -0.5, 0.3, 2.0];
        let regs = crate::sml_model::regressors(&x, 2).unwrap();
        let d: Vec<f64> = regs
            .iter()
            .map(|u| crate::sml_model::output(u, &plant.factors).unwrap())
            .collect();
        let mut f = SmlLms::new(2, 2, 0.1).unwrap();
        let t = run_filter(&mut f, &x, &d, Some(&plant)).unwrap();
        // noiseless: excess error equals the a-priori error
        for r in &t.records {
            assert!((r.excess_err.unwrap() - r.e).abs() < 1e-15);
        }
        assert_eq!(t.records.last().unwrap().iter, 4);
    }

    #[test]
    fn mismatched_lengths() {
        let mut f = SmlLms::new(2, 2, 0.1).unwrap();
        assert!(run_filter(&mut f, &[1.0, 2.0], &[1.0], None).is_err());
        let plant = Plant::new(FactorWeights::zeros(2, 3).unwrap(), 0.0).unwrap();
        assert!(run_filter(&mut f, &[1.0], &[1.0], Some(&plant)).is_err());
    }

    #[test]
    fn divergence_propagates_iteration() {
        let mut f = SmlLms::from_weights(
            FactorWeights::new(vec![vec![1.0], vec![1.0]]).unwrap(),
            10.0,
        )
        .unwrap();
        let x = vec![1e30; 50];
        let d = vec![0.0; 50];
        match run_filter(&mut f, &x, &d, None) {
            Err(Error::Divergence { iteration }) => assert!((1..=50).contains(&iteration)),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn boxed_filters_dispatch() {
        let mut fs: Vec<Box<dyn AdaptiveFilter>> = vec![
            Box::new(SmlLms::new(2, 10, 0.01).unwrap()),
            Box::new(VolterraLms::new(2, 10, 0.01).unwrap()),
        ];
        let counts: Vec<u64> = fs.iter_mut().map(|f| f.mults_per_step()).collect();
        assert_eq!(counts, vec![44, 166]);
        assert_eq!(fs[1].name(), "volterra-lms");
    }
}
