//! Self-check suite: the algebraic identities and oracles the library relies on,
//! run as a pass/fail table.
//!
//! Each check compares an implementation path against an independent one
//! (dense Kronecker algebra, finite differences, explicit loops, closed-form
//! operation counts) at a fixed tolerance.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::adaptive::{
    increment_gap, reference_mult_count, sml_mult_count, AdaptiveFilter, SmlLms, VolterraLms,
};
use crate::error::Result;
use crate::mse_surface::{estimate_moments, grad, mse, normal_residual, MomentSet};
use crate::simkit::{emse_ensemble, Execution, ExperimentConfig};
use crate::sml_model::{output, regressors, FactorWeights, Regressor};
use crate::tensor_kron::{
    contract, flat_index, kron, kron_power, partial_simple_tensor, simple_tensor, MultiIndex,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Small,
    Full,
}

/// Deliberate defects for checking that the suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Negates the closed-form gradient.
    GradSignFlip,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type GradFn = dyn Fn(&FactorWeights, &MomentSet) -> Result<Vec<Vec<f64>>>;

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn random_weights(rng: &mut ChaCha8Rng, k: usize, m: usize) -> FactorWeights {
    FactorWeights::new((0..k).map(|_| normals(rng, m)).collect()).expect("valid shape")
}

fn random_moments(rng: &mut ChaCha8Rng, m: usize, k: usize) -> MomentSet {
    let n = m.pow(k as u32);
    let a = DMatrix::from_fn(n + 2, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let r_uk = a.transpose() * &a / (n + 2) as f64;
    let r_ukd = DVector::from_vec(normals(rng, n));
    let r_d = rng.random_range(0.5..3.0);
    MomentSet::from_parts(r_uk, r_ukd, r_d, m, k, 0).expect("valid shape")
}

/// Relative error between the closed-form and central-difference gradient,
/// worst case over `instances` random problems.
pub fn gradient_check(instances: usize, seed: u64, grad_fn: &GradFn) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let m = rng.random_range(1..=4);
        let k = rng.random_range(1..=3);
        let mom = random_moments(&mut rng, m, k);
        let w = random_weights(&mut rng, k, m);
        let g = grad_fn(&w, &mom)?;
        let (mut num, mut den) = (0.0, 0.0);
        for s in 0..k {
            for j in 0..m {
                let mut plus = w.clone().into_factors();
                let mut minus = plus.clone();
                plus[s][j] += h;
                minus[s][j] -= h;
                let fd = (mse(&FactorWeights::new(plus)?, &mom)?
                    - mse(&FactorWeights::new(minus)?, &mom)?)
                    / (2.0 * h);
                num += (fd - g[s][j]).powi(2);
                den += fd.powi(2);
            }
        }
        worst = worst.max((num / den.max(1e-300)).sqrt());
    }
    Ok(worst)
}

/// Worst relative misfit when a degree-2K polynomial through `2K+1` samples
/// of the MSE along a random line predicts the next sample.
pub fn degree_check(k: usize, lines: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = 3;
    let deg = 2 * k;
    let mut worst: f64 = 0.0;
    for _ in 0..lines {
        let mom = random_moments(&mut rng, m, k);
        let w = random_weights(&mut rng, k, m);
        let dir = random_weights(&mut rng, k, m);
        let at = |t: f64| -> Result<f64> {
            let f = w
                .factors()
                .iter()
                .zip(dir.factors())
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + 0.3 * t * y).collect())
                .collect();
            mse(&FactorWeights::new(f)?, &mom)
        };
        let samples: Vec<f64> = (0..=deg).map(|i| at(i as f64)).collect::<Result<_>>()?;
        let target = (deg + 1) as f64;
        // Lagrange extrapolation to t = deg + 1
        let mut pred = 0.0;
        for (i, fi) in samples.iter().enumerate() {
            let xi = i as f64;
            let mut l = 1.0;
            for j in 0..=deg {
                if j != i {
                    l *= (target - j as f64) / (xi - j as f64);
                }
            }
            pred += fi * l;
        }
        let actual = at(target)?;
        worst = worst.max((pred - actual).abs() / actual.abs().max(1e-300));
    }
    Ok(worst)
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    let t = Instant::now();
    let (passed, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckResult {
        name,
        passed,
        detail,
        seconds: t.elapsed().as_secs_f64(),
    }
}

pub fn run_suite(scale: Scale, fault: Fault) -> Vec<CheckResult> {
    let grad_fn: Box<GradFn> = match fault {
        Fault::None => Box::new(grad),
        Fault::GradSignFlip => Box::new(|w: &FactorWeights, m: &MomentSet| {
            grad(w, m).map(|g| {
                g.into_iter()
                    .map(|v| v.into_iter().map(|x| -x).collect())
                    .collect()
            })
        }),
    };

    let mut out = vec![
        timed("kron mixed-product identity", || {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let mut worst: f64 = 0.0;
            for _ in 0..500 {
                let (n1, n2) = (rng.random_range(1..5), rng.random_range(1..5));
                let (a, c) = (normals(&mut rng, n1), normals(&mut rng, n1));
                let (b, d) = (normals(&mut rng, n2), normals(&mut rng, n2));
                let lhs = contract(&kron(&a, &b), &kron(&c, &d))?;
                let rhs = contract(&a, &c)? * contract(&b, &d)?;
                worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1.0));
            }
            Ok((worst <= 1e-12, format!("max rel err {worst:.2e}")))
        }),
        timed("kron power index formula", || {
            let mut bad = 0;
            for m in 1..=4 {
                let u: Vec<f64> = (0..m).map(|j| 1.0 + j as f64 * 0.75).collect();
                for k in 1..=3 {
                    let uk = kron_power(&u, k)?;
                    for p in 0..uk.len() {
                        let mi = MultiIndex::from_flat(p, m, k)?;
                        let prod: f64 = mi.as_slice().iter().map(|&j| u[j]).product();
                        if uk[flat_index(&mi, m)?] != prod {
                            bad += 1;
                        }
                    }
                }
            }
            Ok((bad == 0, format!("{bad} mismatched entries")))
        }),
        timed("partial tensor reproduces simple tensor", || {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let mut worst: f64 = 0.0;
            for _ in 0..200 {
                let (m, k) = (rng.random_range(1..=4), rng.random_range(1..=3));
                let w = random_weights(&mut rng, k, m);
                let s = rng.random_range(0..k);
                let back = partial_simple_tensor(w.factors(), s)?
                    * DVector::from_column_slice(w.factor(s));
                for (x, y) in back.iter().zip(simple_tensor(w.factors())?) {
                    worst = worst.max((x - y).abs() / y.abs().max(1.0));
                }
            }
            Ok((worst <= 1e-12, format!("max rel err {worst:.2e}")))
        }),
        timed("product form equals Kronecker contraction", || {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut worst: f64 = 0.0;
            for _ in 0..1000 {
                let (m, k) = (rng.random_range(1..=5), rng.random_range(1..=3));
                let w = random_weights(&mut rng, k, m);
                let u = Regressor::new(normals(&mut rng, m))?;
                let dense = contract(&kron_power(u.as_slice(), k)?, &simple_tensor(w.factors())?)?;
                worst = worst.max((output(&u, &w)? - dense).abs());
            }
            Ok((worst <= 1e-10, format!("max abs err {worst:.2e}")))
        }),
        timed("gradient matches central differences", || {
            let worst = gradient_check(200, 4, grad_fn.as_ref())?;
            Ok((
                worst < 1e-5,
                format!("max rel err {worst:.2e} over 200 draws"),
            ))
        }),
        timed("planted solution solves normal equations", || {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let plant = random_weights(&mut rng, 2, 4);
            let regs = regressors(&normals(&mut rng, 2000), 4)?;
            let d: Vec<f64> = regs
                .iter()
                .map(|u| output(u, &plant))
                .collect::<Result<_>>()?;
            let res = normal_residual(&plant, &estimate_moments(&regs, &d, 2)?)?;
            Ok((res <= 1e-12, format!("residual {res:.2e}")))
        }),
        timed("MSE has degree 2K along lines", || {
            let e2 = degree_check(2, 20, 6)?;
            let e3 = degree_check(3, 20, 7)?;
            Ok((
                e2 <= 1e-8 && e3 <= 1e-8,
                format!("K=2 {e2:.2e}, K=3 {e3:.2e}"),
            ))
        }),
        timed("update equals -mu x instantaneous gradient", || {
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            let mut worst: f64 = 0.0;
            for _ in 0..100 {
                let (m, k) = (rng.random_range(1..=4), rng.random_range(1..=3));
                let st = SmlLms::from_weights(random_weights(&mut rng, k, m), 0.01)?;
                let u = Regressor::new(normals(&mut rng, m))?;
                worst = worst.max(increment_gap(&st, &u, rng.sample(StandardNormal))?);
            }
            Ok((worst <= 1e-10, format!("max rel gap {worst:.2e}")))
        }),
        timed("multiplication census", || {
            let mut bad = Vec::new();
            for m in 2..=10 {
                for k in 2..=4 {
                    let mut f = SmlLms::new(k, m, 1e-3)?;
                    f.step(&Regressor::new(vec![0.5; m])?, 1.0)?;
                    if f.mult_count_last() != sml_mult_count(m, k) {
                        bad.push((m, k));
                    }
                }
                if sml_mult_count(m, 2) != reference_mult_count(m, 2) {
                    bad.push((m, 2));
                }
            }
            let at = sml_mult_count(10, 2);
            Ok((
                bad.is_empty() && at == 44,
                format!("2MK+K^2-K+2 exact; M=10,K=2 -> {at}; mismatches {bad:?}"),
            ))
        }),
        timed("zero weights stay zero", || {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let mut f = SmlLms::from_weights(FactorWeights::zeros(2, 10)?, 0.01)?;
            for _ in 0..100 {
                f.step(
                    &Regressor::new(normals(&mut rng, 10))?,
                    rng.sample(StandardNormal),
                )?;
            }
            let ok = f.weights().factors().iter().flatten().all(|&x| x == 0.0);
            Ok((ok, "100 iterations".into()))
        }),
        timed("K=1 reduces to classical LMS", || {
            let mut rng = ChaCha8Rng::seed_from_u64(10);
            let mut a = SmlLms::new(1, 5, 0.01)?;
            let mut b = VolterraLms::new(1, 5, 0.01)?;
            let mut worst: f64 = 0.0;
            for u in regressors(&normals(&mut rng, 1000), 5)? {
                let d = rng.sample(StandardNormal);
                a.step(&u, d)?;
                b.step(&u, d)?;
                for (x, y) in a.weights().factor(0).iter().zip(b.coeffs()) {
                    worst = worst.max((x - y).abs());
                }
            }
            Ok((worst <= 1e-14, format!("max weight gap {worst:.2e}")))
        }),
    ];

    if scale == Scale::Full {
        out.push(timed("white-input moments, N = 1e5", || {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let m = 4;
            let regs = regressors(&normals(&mut rng, 100_000), m)?;
            let mom = estimate_moments(&regs, &vec![0.0; regs.len()], 1)?;
            let err = (mom.r_uk - DMatrix::identity(m, m)).abs().max();
            Ok((err < 5e-2, format!("max |R - I| {err:.2e}")))
        }));
        out.push(timed("normal residual shrinks as 1/sqrt(N)", || {
            let resid = |n: usize| -> Result<f64> {
                let mut acc = 0.0;
                for seed in 0..6 {
                    let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
                    let plant = random_weights(&mut rng, 2, 2);
                    let regs = regressors(&normals(&mut rng, n), 2)?;
                    let d: Vec<f64> = regs
                        .iter()
                        .map(
                            |u| Ok(output(u, &plant)? + 0.5 * rng.sample::<f64, _>(StandardNormal)),
                        )
                        .collect::<Result<_>>()?;
                    acc += normal_residual(&plant, &estimate_moments(&regs, &d, 2)?)?;
                }
                Ok(acc / 6.0)
            };
            let r: Vec<f64> = [1_000, 10_000, 100_000]
                .into_iter()
                .map(resid)
                .collect::<Result<_>>()?;
            let (q1, q2) = (r[0] / r[1], r[1] / r[2]);
            let ok = [q1, q2].iter().all(|q| (1.58..6.33).contains(q));
            Ok((
                ok,
                format!("decade ratios {q1:.2}, {q2:.2} (sqrt 10 = 3.16)"),
            ))
        }));
        out.push(timed(
            "no divergence at mu = 1e-3 (M=10, K=2, 100 seeds)",
            || {
                let cfg = ExperimentConfig {
                    mu: 1e-3,
                    plant_seed: 1,
                    signal_seed: 2,
                    ..ExperimentConfig::new(10, 2, 7000, 100)
                };
                let curve = emse_ensemble(&cfg, Execution::Parallel)?;
                let ok = curve.diverged.is_empty() && curve.values.iter().all(|v| v.is_finite());
                Ok((ok, format!("final EMSE {:.1} dB", curve.steady_state_db())))
            },
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let results = run_suite(Scale::Small, Fault::None);
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn sign_flip_is_caught() {
        let results = run_suite(Scale::Small, Fault::GradSignFlip);
        let g = results
            .iter()
            .find(|r| r.name.starts_with("gradient"))
            .unwrap();
        assert!(!g.passed);
        assert_eq!(results.iter().filter(|r| !r.passed).count(), 1);
    }
}
