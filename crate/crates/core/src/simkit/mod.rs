//! System-identification experiments and Monte-Carlo EMSE learning curves.
//!
//! A single plant is drawn per experiment. Each realization gets its own
//! white Gaussian input and measurement-noise streams, derived from
//! `signal_seed` and the realization index, so any subset of realizations
//! can be regenerated on its own.

mod config;

pub use config::{ConfigFile, DEFAULT_TARGET_EMSE_DB, SCHEMA_VERSION};

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::adaptive::{
    run_filter, sml_mult_count, volterra_mult_count, AdaptiveFilter, InitScheme, SmlLms,
    VolterraLms,
};
use crate::error::{Error, Result};
use crate::mse_surface::Plant;
use crate::sml_model::{output_unchecked, DelayLine, FactorWeights};

/// Probe regressors used to set the plant's output power.
pub const PLANT_PROBES: usize = 10_000;

/// Realizations reduced together before blocks are combined in order.
const BLOCK: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum PlantSpec {
    /// Unit-norm Gaussian factors scaled for unit output power.
    RandomGaussian,
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    SmlLms,
    VolterraLms,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::SmlLms => "sml-lms",
            Algorithm::VolterraLms => "volterra-lms",
        }
    }

    pub fn mults_per_step(&self, m: usize, k: usize) -> u64 {
        match self {
            Algorithm::SmlLms => sml_mult_count(m, k),
            Algorithm::VolterraLms => volterra_mult_count(m, k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// One realization block after another.
    Serial,
    /// Blocks on the rayon pool. The reduction order is fixed, so the
    /// result is bit-identical to [`Execution::Serial`].
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub m: usize,
    pub k: usize,
    pub n_iters: usize,
    pub n_realizations: usize,
    pub noise_var: f64,
    pub mu: f64,
    pub plant_seed: u64,
    pub signal_seed: u64,
    pub plant_spec: PlantSpec,
    pub algorithm: Algorithm,
    pub init: InitScheme,
    /// Drop diverged realizations from the average instead of failing.
    pub exclude_diverged: bool,
}

impl ExperimentConfig {
    /// SML-LMS with noise variance 1e-3 and `mu = 1e-3`; seeds 0.
    pub fn new(m: usize, k: usize, n_iters: usize, n_realizations: usize) -> Self {
        ExperimentConfig {
            m,
            k,
            n_iters,
            n_realizations,
            noise_var: 1e-3,
            mu: 1e-3,
            plant_seed: 0,
            signal_seed: 0,
            plant_spec: PlantSpec::RandomGaussian,
            algorithm: Algorithm::SmlLms,
            init: InitScheme::Staggered,
            exclude_diverged: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.m == 0 {
            return bad("m must be >= 1".into());
        }
        if self.k == 0 {
            return bad("k must be >= 1".into());
        }
        if self.n_iters == 0 {
            return bad("n_iters must be >= 1".into());
        }
        if self.n_realizations == 0 {
            return bad("n_realizations must be >= 1".into());
        }
        if !(self.noise_var.is_finite() && self.noise_var >= 0.0) {
            return bad(format!(
                "noise_var must be finite and >= 0, got {}",
                self.noise_var
            ));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return bad(format!("mu must be finite and > 0, got {}", self.mu));
        }
        if let PlantSpec::Explicit(f) = &self.plant_spec {
            if f.len() != self.k || f.iter().any(|h| h.len() != self.m) {
                return bad(format!(
                    "plant_factors must be {} vectors of length {}",
                    self.k, self.m
                ));
            }
        }
        Ok(())
    }

    /// Fresh filter for one realization.
    pub fn build_filter(&self) -> Result<Box<dyn AdaptiveFilter + Send>> {
        Ok(match self.algorithm {
            Algorithm::SmlLms => Box::new(SmlLms::with_init(self.k, self.m, self.mu, self.init)?),
            Algorithm::VolterraLms => Box::new(VolterraLms::new(self.k, self.m, self.mu)?),
        })
    }
}

/// SplitMix64 finalizer; decorrelates `(base, index)` pairs into seeds.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `n` i.i.d. standard normal samples.
pub fn gen_input(n: usize, seed: u64) -> Vec<f64> {
    normals(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

/// The plant factors before the output-power gain: i.i.d. Gaussian entries,
/// each factor scaled to unit Euclidean norm.
pub fn unit_plant_factors(k: usize, m: usize, plant_seed: u64) -> Result<FactorWeights> {
    let mut rng = ChaCha8Rng::seed_from_u64(plant_seed);
    let mut factors = Vec::with_capacity(k);
    for _ in 0..k {
        let mut h = normals(&mut rng, m);
        let norm = h.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::NonFinite("zero-norm plant factor"));
        }
        h.iter_mut().for_each(|x| *x /= norm);
        factors.push(h);
    }
    FactorWeights::new(factors)
}

pub fn gen_plant(cfg: &ExperimentConfig) -> Result<Plant> {
    cfg.validate()?;
    let factors = match &cfg.plant_spec {
        PlantSpec::Explicit(f) => FactorWeights::new(f.clone())?,
        PlantSpec::RandomGaussian => {
            let unit = unit_plant_factors(cfg.k, cfg.m, cfg.plant_seed)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.plant_seed, 1));
            let power = (0..PLANT_PROBES)
                .map(|_| {
                    let u = normals(&mut rng, cfg.m);
                    output_unchecked(&u, &unit).powi(2)
                })
                .sum::<f64>()
                / PLANT_PROBES as f64;
            // spread the gain evenly so no factor dominates the others
            let per_factor = power.powf(-0.5 / cfg.k as f64);
            let scaled = unit
                .into_factors()
                .into_iter()
                .map(|h| h.into_iter().map(|x| x * per_factor).collect())
                .collect();
            FactorWeights::new(scaled)?
        }
    };
    Plant::new(factors, cfg.noise_var)
}

/// Plant output plus independent Gaussian noise of variance `plant.noise_var`.
pub fn synth_desired(plant: &Plant, inputs: &[f64], noise_seed: u64) -> Result<Vec<f64>> {
    let mut line = DelayLine::new(plant.factors.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let sd = plant.noise_var.sqrt();
    Ok(inputs
        .iter()
        .map(|&x| {
            let u = line.push(x);
            let n: f64 = rng.sample(StandardNormal);
            output_unchecked(u.as_slice(), &plant.factors) + sd * n
        })
        .collect())
}

/// Input and noise seeds of realization `r`.
pub fn realization_seeds(signal_seed: u64, r: usize) -> (u64, u64) {
    (
        derive_seed(signal_seed, 2 * r as u64),
        derive_seed(signal_seed, 2 * r as u64 + 1),
    )
}

/// Ensemble-averaged excess mean-square error per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct EmseCurve {
    pub values: Vec<f64>,
    pub realizations_used: usize,
    /// `(realization, iteration)` of every excluded realization.
    pub diverged: Vec<(usize, u64)>,
}

impl EmseCurve {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn db(&self) -> Vec<f64> {
        self.values.iter().map(|v| 10.0 * v.log10()).collect()
    }

    /// Mean over the last 10% of iterations (at least one).
    pub fn steady_state(&self) -> f64 {
        let n = self.values.len();
        let tail = n.div_ceil(10).max(1).min(n);
        self.values[n - tail..].iter().sum::<f64>() / tail as f64
    }

    pub fn steady_state_db(&self) -> f64 {
        10.0 * self.steady_state().log10()
    }

    /// First iteration (1-based) at which the curve is at or below `target_db`.
    pub fn iterations_to(&self, target_db: f64) -> Option<usize> {
        let target = 10f64.powf(target_db / 10.0);
        self.values.iter().position(|&v| v <= target).map(|i| i + 1)
    }

    /// CSV with header `iter,emse_linear,emse_db`, iterations 1-based.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["iter", "emse_linear", "emse_db"])?;
        for (i, v) in self.values.iter().enumerate() {
            wtr.write_record([
                (i + 1).to_string(),
                format!("{v:.16e}"),
                format!("{:.16e}", 10.0 * v.log10()),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads the linear column back; realization bookkeeping is not stored.
    pub fn read_csv<R: Read>(input: R) -> Result<Vec<f64>> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut values = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let iter: usize = row[0]
                .parse()
                .map_err(|_| Error::Parse(format!("bad iteration {:?}", &row[0])))?;
            if iter != i + 1 {
                return Err(Error::Parse(format!(
                    "expected iteration {}, found {iter}",
                    i + 1
                )));
            }
            values.push(
                row[1]
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad value {:?}", &row[1])))?,
            );
        }
        Ok(values)
    }
}

struct BlockSum {
    sum: Vec<f64>,
    used: usize,
    diverged: Vec<(usize, u64)>,
}

fn run_realization<F: AdaptiveFilter + ?Sized>(
    cfg: &ExperimentConfig,
    plant: &Plant,
    filter: &mut F,
    r: usize,
) -> Result<Vec<f64>> {
    let (input_seed, noise_seed) = realization_seeds(cfg.signal_seed, r);
    let inputs = gen_input(cfg.n_iters, input_seed);
    let desired = synth_desired(plant, &inputs, noise_seed)?;
    let trace = run_filter(filter, &inputs, &desired, Some(plant)).map_err(|e| match e {
        Error::Divergence { iteration } => Error::RealizationDiverged {
            realization: r,
            iteration,
        },
        other => other,
    })?;
    let mut sq = Vec::with_capacity(trace.records.len());
    for rec in &trace.records {
        let x = rec.excess_err.expect("plant supplied").powi(2);
        if !x.is_finite() {
            return Err(Error::RealizationDiverged {
                realization: r,
                iteration: rec.iter,
            });
        }
        sq.push(x);
    }
    Ok(sq)
}

/// Monte-Carlo EMSE curve for the configured algorithm and plant.
pub fn emse_ensemble(cfg: &ExperimentConfig, exec: Execution) -> Result<EmseCurve> {
    let plant = gen_plant(cfg)?;
    emse_ensemble_with(cfg, exec, &plant, || cfg.build_filter())
}

/// As [`emse_ensemble`], with a caller-supplied plant and filter factory.
pub fn emse_ensemble_with<F, B>(
    cfg: &ExperimentConfig,
    exec: Execution,
    plant: &Plant,
    build: B,
) -> Result<EmseCurve>
where
    F: AdaptiveFilter,
    B: Fn() -> Result<F> + Sync,
{
    cfg.validate()?;
    if plant.factors.len() != cfg.m || plant.factors.order() != cfg.k {
        return Err(Error::mismatch(
            "plant shape",
            cfg.m * cfg.k,
            plant.factors.len() * plant.factors.order(),
        ));
    }
    let n_blocks = cfg.n_realizations.div_ceil(BLOCK);
    let block = |b: usize| -> Result<BlockSum> {
        let mut acc = BlockSum {
            sum: vec![0.0; cfg.n_iters],
            used: 0,
            diverged: Vec::new(),
        };
        let end = ((b + 1) * BLOCK).min(cfg.n_realizations);
        for r in b * BLOCK..end {
            let mut filter = build()?;
            match run_realization(cfg, plant, &mut filter, r) {
                Ok(sq) => {
                    acc.sum.iter_mut().zip(&sq).for_each(|(a, x)| *a += x);
                    acc.used += 1;
                }
                Err(Error::RealizationDiverged {
                    realization,
                    iteration,
                }) if cfg.exclude_diverged => acc.diverged.push((realization, iteration)),
                Err(e) => return Err(e),
            }
        }
        Ok(acc)
    };

    let blocks: Vec<BlockSum> = match exec {
        Execution::Serial => (0..n_blocks).map(block).collect::<Result<_>>()?,
        Execution::Parallel => (0..n_blocks)
            .into_par_iter()
            .map(block)
            .collect::<Result<_>>()?,
    };

    let mut total = vec![0.0; cfg.n_iters];
    let mut used = 0;
    let mut diverged = Vec::new();
    for b in blocks {
        total.iter_mut().zip(&b.sum).for_each(|(t, x)| *t += x);
        used += b.used;
        diverged.extend(b.diverged);
    }
    if used == 0 {
        let (realization, iteration) = diverged[0];
        return Err(Error::RealizationDiverged {
            realization,
            iteration,
        });
    }
    let inv = 1.0 / used as f64;
    total.iter_mut().for_each(|t| *t *= inv);
    Ok(EmseCurve {
        values: total,
        realizations_used: used,
        diverged,
    })
}
