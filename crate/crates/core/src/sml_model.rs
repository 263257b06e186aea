//! Product-of-FIR evaluation of the simple multilinear model.
//!
//! The filter output is `y(i) = (u_i·w_1)(u_i·w_2)⋯(u_i·w_K)`, i.e. a
//! homogeneous Volterra filter whose kernel is the rank-one tensor
//! `w_1 ⊗ ⋯ ⊗ w_K`, evaluated in O(KM) instead of O(M^K).

use crate::error::{Error, Result};

/// The K branch filters `{w_1, …, w_K}`, each of length `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorWeights {
    m: usize,
    factors: Vec<Vec<f64>>,
}

impl FactorWeights {
    pub fn new(factors: Vec<Vec<f64>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidOrder(0));
        }
        let m = factors[0].len();
        if m == 0 {
            return Err(Error::InvalidLength(0));
        }
        for f in &factors {
            if f.len() != m {
                return Err(Error::mismatch("FactorWeights::new", m, f.len()));
            }
            if f.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("factor weight"));
            }
        }
        Ok(FactorWeights { m, factors })
    }

    pub fn zeros(k: usize, m: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidOrder(k));
        }
        if m == 0 {
            return Err(Error::InvalidLength(m));
        }
        Ok(FactorWeights {
            m,
            factors: vec![vec![0.0; m]; k],
        })
    }

    /// Model order K.
    pub fn order(&self) -> usize {
        self.factors.len()
    }

    /// Filter length M.
    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn factor(&self, s: usize) -> &[f64] {
        &self.factors[s]
    }

    pub fn factors(&self) -> &[Vec<f64>] {
        &self.factors
    }

    pub fn into_factors(self) -> Vec<Vec<f64>> {
        self.factors
    }

    pub(crate) fn factors_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.factors
    }

    pub fn is_finite(&self) -> bool {
        self.factors.iter().flatten().all(|x| x.is_finite())
    }
}

/// Delay-line snapshot `[u(i), u(i-1), …, u(i-M+1)]`, newest sample first.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor(Vec<f64>);

impl Regressor {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidLength(0));
        }
        Ok(Regressor(samples))
    }

    /// Regressor at time `i` of `signal`, zero-padded before time 0.
    pub fn from_signal(signal: &[f64], i: usize, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidLength(0));
        }
        if i >= signal.len() {
            return Err(Error::IndexOutOfRange {
                context: "Regressor::from_signal",
                index: i,
                bound: signal.len(),
            });
        }
        Ok(Regressor(
            (0..m)
                .map(|lag| if lag <= i { signal[i - lag] } else { 0.0 })
                .collect(),
        ))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Every regressor of `signal`, in time order.
pub fn regressors(signal: &[f64], m: usize) -> Result<Vec<Regressor>> {
    let mut line = DelayLine::new(m)?;
    Ok(signal.iter().map(|&x| line.push(x).clone()).collect())
}

/// Streaming tapped delay line that starts filled with zeros.
#[derive(Debug, Clone)]
pub struct DelayLine {
    reg: Regressor,
}

impl DelayLine {
    pub fn new(m: usize) -> Result<Self> {
        Ok(DelayLine {
            reg: Regressor::new(vec![0.0; m])?,
        })
    }

    /// Shifts `x` in as the newest sample and returns the current regressor.
    pub fn push(&mut self, x: f64) -> &Regressor {
        let buf = &mut self.reg.0;
        let m = buf.len();
        buf.copy_within(0..m - 1, 1);
        buf[0] = x;
        &self.reg
    }

    pub fn regressor(&self) -> &Regressor {
        &self.reg
    }
}

/// Branch outputs, leave-one-out products and the full product for one regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorOutputs {
    pub y_o: Vec<f64>,
    pub y_loo: Vec<f64>,
    pub y: f64,
}

fn check_dims(u: &Regressor, w: &FactorWeights) -> Result<()> {
    if u.len() != w.len() {
        return Err(Error::mismatch("regressor length", w.len(), u.len()));
    }
    Ok(())
}

/// Writes `u·w_s` into `out[s]`; returns the number of multiplications.
pub(crate) fn factor_outputs_into(u: &[f64], w: &FactorWeights, out: &mut [f64]) -> u64 {
    for (o, ws) in out.iter_mut().zip(w.factors()) {
        *o = u.iter().zip(ws).map(|(a, b)| a * b).sum();
    }
    (w.order() * w.len()) as u64
}

/// Naive leave-one-out products, `K - 2` multiplications per branch.
///
/// No division, so zero branch outputs are handled exactly. Returns the
/// number of multiplications.
pub(crate) fn leave_one_out_into(y_o: &[f64], out: &mut [f64]) -> u64 {
    let mut mults = 0;
    for (s, slot) in out.iter_mut().enumerate() {
        let mut acc: Option<f64> = None;
        for (t, &y) in y_o.iter().enumerate() {
            if t == s {
                continue;
            }
            acc = Some(match acc {
                None => y,
                Some(a) => {
                    mults += 1;
                    a * y
                }
            });
        }
        *slot = acc.unwrap_or(1.0);
    }
    mults
}

pub fn factor_outputs(u: &Regressor, w: &FactorWeights) -> Result<Vec<f64>> {
    check_dims(u, w)?;
    let mut out = vec![0.0; w.order()];
    factor_outputs_into(u.as_slice(), w, &mut out);
    Ok(out)
}

/// `y_loo[s] = ∏_{t≠s} y_o[t]`; the empty product is 1.
pub fn leave_one_out(y_o: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; y_o.len()];
    leave_one_out_into(y_o, &mut out);
    out
}

/// All intermediate quantities, with `y = y_loo[K-1] · y_o[K-1]`.
pub fn evaluate(u: &Regressor, w: &FactorWeights) -> Result<FactorOutputs> {
    let y_o = factor_outputs(u, w)?;
    let y_loo = leave_one_out(&y_o);
    let k = y_o.len();
    let y = y_loo[k - 1] * y_o[k - 1];
    Ok(FactorOutputs { y_o, y_loo, y })
}

/// Filter output `(u·w_1)⋯(u·w_K)`.
pub fn output(u: &Regressor, w: &FactorWeights) -> Result<f64> {
    check_dims(u, w)?;
    Ok(output_unchecked(u.as_slice(), w))
}

// Left fold over the branch outputs: the same rounding sequence as
// `y_loo[K-1] * y_o[K-1]` with the naive leave-one-out.
pub(crate) fn output_unchecked(u: &[f64], w: &FactorWeights) -> f64 {
    let mut fs = w.factors().iter();
    let first = fs.next().expect("K >= 1");
    let dot = |ws: &Vec<f64>| u.iter().zip(ws).map(|(a, b)| a * b).sum::<f64>();
    fs.fold(dot(first), |acc, ws| acc * dot(ws))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_kron::{contract, kron_power, simple_tensor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_weights(rng: &mut ChaCha8Rng, k: usize, m: usize) -> FactorWeights {
        FactorWeights::new(
            (0..k)
                .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
        )
        .unwrap()
    }

    fn random_regressor(rng: &mut ChaCha8Rng, m: usize) -> Regressor {
        Regressor::new((0..m).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn weights_validation() {
        assert!(matches!(
            FactorWeights::new(vec![]),
            Err(Error::InvalidOrder(0))
        ));
        assert!(matches!(
            FactorWeights::new(vec![vec![1.0, 2.0], vec![1.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(FactorWeights::new(vec![vec![f64::NAN]]).is_err());
        assert!(FactorWeights::zeros(0, 3).is_err());
        assert!(FactorWeights::zeros(2, 0).is_err());
    }

    #[test]
    fn impulse_regressor_picks_first_tap() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_weights(&mut rng, 3, 4);
        let u = Regressor::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let y_o = factor_outputs(&u, &w).unwrap();
        for (s, y) in y_o.iter().enumerate() {
            assert_eq!(*y, w.factor(s)[0]);
        }
    }

    #[test]
    fn zero_weights_give_zero_branches() {
        let w = FactorWeights::zeros(2, 3).unwrap();
        let u = Regressor::new(vec![0.4, -2.0, 1.0]).unwrap();
        assert_eq!(factor_outputs(&u, &w).unwrap(), vec![0.0, 0.0]);
        assert_eq!(output(&u, &w).unwrap(), 0.0);
    }

    #[test]
    fn factor_outputs_match_dot_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = random_weights(&mut rng, 2, 3);
        let u = random_regressor(&mut rng, 3);
        let y_o = factor_outputs(&u, &w).unwrap();
        for (s, y) in y_o.iter().enumerate() {
            let d = contract(u.as_slice(), w.factor(s)).unwrap();
            assert!((y - d).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let w = FactorWeights::zeros(2, 3).unwrap();
        let u = Regressor::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            factor_outputs(&u, &w),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(output(&u, &w).is_err());
    }

    #[test]
    fn leave_one_out_examples() {
        assert_eq!(leave_one_out(&[3.0, 5.0]), vec![5.0, 3.0]);
        assert_eq!(leave_one_out(&[2.0, 0.0, 4.0]), vec![0.0, 8.0, 0.0]);
        assert_eq!(leave_one_out(&[7.0]), vec![1.0]);
    }

    #[test]
    fn leave_one_out_mult_count_is_k_times_k_minus_two() {
        for k in 1..=6usize {
            let y_o = vec![1.5; k];
            let mut out = vec![0.0; k];
            let n = leave_one_out_into(&y_o, &mut out);
            assert_eq!(n as usize, k * k.saturating_sub(2));
        }
    }

    #[test]
    fn cross_term_kernel() {
        let w = FactorWeights::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let (a, b) = (1.3, -0.7);
        let u = Regressor::new(vec![a, b]).unwrap();
        assert_eq!(output(&u, &w).unwrap(), a * b);
    }

    #[test]
    fn any_zero_factor_kills_output() {
        let w = FactorWeights::new(vec![vec![1.0, 2.0], vec![0.0, 0.0], vec![3.0, 1.0]]).unwrap();
        let u = Regressor::new(vec![0.5, 0.25]).unwrap();
        assert_eq!(output(&u, &w).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 1..=4 {
            let w = random_weights(&mut rng, k, 5);
            let u = random_regressor(&mut rng, 5);
            let fo = evaluate(&u, &w).unwrap();
            assert_eq!(fo.y, output(&u, &w).unwrap());
            for s in 0..k {
                let lhs = fo.y_loo[s] * fo.y_o[s];
                assert!((lhs - fo.y).abs() <= 1e-12 * fo.y.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn output_matches_kronecker_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let m = rng.random_range(1..=5);
            let k = rng.random_range(1..=3);
            let w = random_weights(&mut rng, k, m);
            let u = random_regressor(&mut rng, m);
            let dense = contract(
                &kron_power(u.as_slice(), k).unwrap(),
                &simple_tensor(w.factors()).unwrap(),
            )
            .unwrap();
            assert!((output(&u, &w).unwrap() - dense).abs() < 1e-10);
        }
    }

    #[test]
    fn balanced_rescaling_is_invisible() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let k = rng.random_range(2..=4);
            let w = random_weights(&mut rng, k, 4);
            let u = random_regressor(&mut rng, 4);
            let p = rng.random_range(0..k);
            let q = (p + rng.random_range(1..k)) % k;
            let alpha = rng.random_range(0.2..5.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
            let mut f = w.clone().into_factors();
            f[p].iter_mut().for_each(|x| *x *= alpha);
            f[q].iter_mut().for_each(|x| *x /= alpha);
            let w2 = FactorWeights::new(f).unwrap();
            let (y1, y2) = (output(&u, &w).unwrap(), output(&u, &w2).unwrap());
            assert!((y1 - y2).abs() <= 1e-10 * y1.abs().max(1e-12));
        }
    }

    #[test]
    fn separable_volterra_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for m in 1..=4 {
            for k in 1..=2 {
                let w = random_weights(&mut rng, k, m);
                let u = random_regressor(&mut rng, m);
                let x = u.as_slice();
                let explicit = if k == 1 {
                    (0..m).map(|i1| w.factor(0)[i1] * x[i1]).sum::<f64>()
                } else {
                    let mut acc = 0.0;
                    for i1 in 0..m {
                        for i2 in 0..m {
                            let h = w.factor(0)[i1] * w.factor(1)[i2];
                            acc += h * x[i1] * x[i2];
                        }
                    }
                    acc
                };
                assert!((output(&u, &w).unwrap() - explicit).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn delay_line_is_zero_padded_newest_first() {
        let sig = [1.0, 2.0, 3.0];
        let regs = regressors(&sig, 4).unwrap();
        assert_eq!(regs[0].as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(regs[2].as_slice(), &[3.0, 2.0, 1.0, 0.0]);
        assert_eq!(
            Regressor::from_signal(&sig, 1, 2).unwrap().as_slice(),
            &[2.0, 1.0]
        );
    }
}
