//! `sml`: run SML-LMS system-identification experiments, compare algorithms
//! and execute the self-check suite.
//!
//! Exit codes: 0 success, 1 I/O error (missing or unreadable file), 2 config
//! or usage error, 3 divergence, 4 verification failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use chrono::{DateTime, SecondsFormat, Utc};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};
use sml_core::simkit::{emse_ensemble, ConfigFile, EmseCurve, Execution, ExperimentConfig};
use sml_core::verify::{run_suite, Fault, Scale};
use sml_core::Error;

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "sml", version, about = "SML-LMS adaptive filter experiments")]
struct Cli {
    /// Output directory for CSV and manifest files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Run realizations one after another on a single thread.
    #[arg(long, global = true)]
    serial: bool,
    /// Replace the config's `signal_seed`.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every algorithm listed in a config and write its EMSE curve.
    Run { config: PathBuf },
    /// Run the self-check suite and print a pass/fail table.
    Verify {
        #[arg(long, value_enum, default_value_t = ScaleArg::Small)]
        scale: ScaleArg,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
    /// Run two or more algorithms on the same plant and signals and
    /// summarize them side by side.
    Compare { config: PathBuf },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScaleArg {
    Small,
    Full,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FaultArg {
    GradSignFlip,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn new(code: u8, msg: impl Into<String>) -> Self {
        Failure {
            code,
            msg: msg.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) => EXIT_IO,
            e if e.is_divergence() => EXIT_DIVERGED,
            _ => EXIT_CONFIG,
        };
        Failure::new(code, e.to_string())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::new(EXIT_IO, format!("{}: {e}", path.display()))
}

#[derive(Serialize)]
struct AlgorithmSummary {
    index: usize,
    algorithm: &'static str,
    mu: f64,
    csv: String,
    steady_state_emse_db: f64,
    iterations_to_target: Option<usize>,
    mults_per_iter: u64,
    realizations_used: usize,
    diverged: usize,
}

#[derive(Serialize)]
struct Seeds {
    plant_seed: u64,
    signal_seed: u64,
    seed_override: Option<u64>,
}

#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    config_path: String,
    config_sha: String,
    config: String,
    seeds: Seeds,
    execution: &'static str,
    target_emse_db: f64,
    algorithms: Vec<AlgorithmSummary>,
    divergence_count: usize,
    csv_files: Vec<String>,
    started_at: String,
    finished_at: String,
    wall_time_s: f64,
}

/// Hash of `blob <len>\0<content>`, as git computes object ids but with SHA-256.
fn git_style_sha256(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    hex::encode(h.finalize())
}

fn rfc3339(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn load_config(path: &Path, seed_override: Option<u64>) -> Result<(String, ConfigFile), Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut cfg = ConfigFile::parse(&text)
        .map_err(|e| Failure::new(EXIT_CONFIG, format!("{}: {e}", path.display())))?;
    if let Some(seed) = seed_override {
        cfg.experiments
            .iter_mut()
            .for_each(|e| e.signal_seed = seed);
    }
    Ok((text, cfg))
}

fn write_csv(path: &Path, curve: &EmseCurve) -> Result<(), Failure> {
    let f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    curve.write_csv(std::io::BufWriter::new(f))?;
    Ok(())
}

fn experiment(
    cli: &Cli,
    command: &'static str,
    path: &Path,
    min_algorithms: usize,
) -> Result<(), Failure> {
    let (text, cfg) = load_config(path, cli.seed_override)?;
    if cfg.experiments.len() < min_algorithms {
        return Err(Failure::new(
            EXIT_CONFIG,
            format!(
                "{command} needs at least {min_algorithms} [[algorithm]] entries, found {}",
                cfg.experiments.len()
            ),
        ));
    }
    fs::create_dir_all(&cli.out).map_err(|e| io_err(&cli.out, e))?;
    let exec = if cli.serial {
        Execution::Serial
    } else {
        Execution::Parallel
    };

    let started = Utc::now();
    let clock = Instant::now();
    let mut summaries = Vec::new();
    let mut csv_files = Vec::new();
    for (i, exp) in cfg.experiments.iter().enumerate() {
        let curve = emse_ensemble(exp, exec)?;
        let name = format!("{command}_emse_{i}_{}.csv", exp.algorithm.as_str());
        write_csv(&cli.out.join(&name), &curve)?;
        summaries.push(summarize(i, exp, &curve, &name, cfg.target_emse_db));
        csv_files.push(name);
    }

    if command == "compare" {
        let name = "compare_summary.csv".to_string();
        write_summary_csv(&cli.out.join(&name), &summaries)?;
        csv_files.push(name);
        print_summary(&summaries, cfg.target_emse_db);
    } else {
        for s in &summaries {
            println!(
                "{}: steady-state EMSE {:.2} dB -> {}",
                s.algorithm,
                s.steady_state_emse_db,
                cli.out.join(&s.csv).display()
            );
        }
    }

    let first = &cfg.experiments[0];
    let manifest = RunManifest {
        command,
        config_path: path.display().to_string(),
        config_sha: git_style_sha256(text.as_bytes()),
        config: text,
        seeds: Seeds {
            plant_seed: first.plant_seed,
            signal_seed: first.signal_seed,
            seed_override: cli.seed_override,
        },
        execution: if cli.serial { "serial" } else { "parallel" },
        target_emse_db: cfg.target_emse_db,
        divergence_count: summaries.iter().map(|s| s.diverged).sum(),
        algorithms: summaries,
        csv_files,
        started_at: rfc3339(started),
        finished_at: rfc3339(Utc::now()),
        wall_time_s: clock.elapsed().as_secs_f64(),
    };
    let mpath = cli.out.join(format!("{command}_manifest.json"));
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&mpath, json + "\n").map_err(|e| io_err(&mpath, e))?;
    Ok(())
}

fn summarize(
    index: usize,
    exp: &ExperimentConfig,
    curve: &EmseCurve,
    csv: &str,
    target_db: f64,
) -> AlgorithmSummary {
    AlgorithmSummary {
        index,
        algorithm: exp.algorithm.as_str(),
        mu: exp.mu,
        csv: csv.to_string(),
        steady_state_emse_db: curve.steady_state_db(),
        iterations_to_target: curve.iterations_to(target_db),
        mults_per_iter: exp.algorithm.mults_per_step(exp.m, exp.k),
        realizations_used: curve.realizations_used,
        diverged: curve.diverged.len(),
    }
}

fn write_summary_csv(path: &Path, rows: &[AlgorithmSummary]) -> Result<(), Failure> {
    let mut out = String::from(
        "index,algorithm,mu,steady_state_emse_db,iterations_to_target,mults_per_iter,realizations_used,diverged\n",
    );
    for s in rows {
        out.push_str(&format!(
            "{},{},{:e},{:.6},{},{},{},{}\n",
            s.index,
            s.algorithm,
            s.mu,
            s.steady_state_emse_db,
            s.iterations_to_target
                .map_or(String::new(), |n| n.to_string()),
            s.mults_per_iter,
            s.realizations_used,
            s.diverged
        ));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

fn print_summary(rows: &[AlgorithmSummary], target_db: f64) {
    println!(
        "{:<3} {:<14} {:>10} {:>12} {:>12} {:>11}",
        "#", "algorithm", "mu", "steady dB", "iters@target", "mults/iter"
    );
    for s in rows {
        let reach = s
            .iterations_to_target
            .map_or("-".to_string(), |n| n.to_string());
        println!(
            "{:<3} {:<14} {:>10.3e} {:>12.2} {:>12} {:>11}",
            s.index, s.algorithm, s.mu, s.steady_state_emse_db, reach, s.mults_per_iter
        );
    }
    println!("target EMSE {target_db} dB");
}

fn verify(scale: ScaleArg, fault: Option<FaultArg>) -> Result<(), Failure> {
    let scale = match scale {
        ScaleArg::Small => Scale::Small,
        ScaleArg::Full => Scale::Full,
    };
    let fault = match fault {
        None => Fault::None,
        Some(FaultArg::GradSignFlip) => Fault::GradSignFlip,
    };
    let results = run_suite(scale, fault);
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut failed = 0;
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!(
            "{tag}  {:<width$}  {:>7.2}s  {}",
            r.name, r.seconds, r.detail
        );
        failed += usize::from(!r.passed);
    }
    println!("{} checks, {failed} failed", results.len());
    if failed > 0 {
        return Err(Failure::new(EXIT_VERIFY, format!("{failed} checks failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let res = match &cli.cmd {
        Command::Run { config } => experiment(&cli, "run", config, 1),
        Command::Compare { config } => experiment(&cli, "compare", config, 2),
        Command::Verify {
            scale,
            inject_fault,
        } => verify(*scale, *inject_fault),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn git_style_hash_matches_git() {
        // `printf 'hello\n' | git hash-object --object-format=sha256 --stdin`
        assert_eq!(
            git_style_sha256(b"hello\n"),
            "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4"
        );
    }

    #[test]
    fn errors_map_to_exit_codes() {
        let io = Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, "x"));
        assert_eq!(Failure::from(io).code, EXIT_IO);
        assert_eq!(
            Failure::from(Error::Divergence { iteration: 3 }).code,
            EXIT_DIVERGED
        );
        assert_eq!(Failure::from(Error::Config("bad".into())).code, EXIT_CONFIG);
    }
}
