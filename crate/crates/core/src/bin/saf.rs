use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use saf_core::harness::io::{
    parse_config, read_model, read_observation, read_pgm, read_vector, write_model,
    write_observation, write_pgm, write_vector, GrayImage,
};
use saf_core::harness::{
    bench_summary, median_nmse, nmse_snr_slope, paired_iteration_wins, run_experiment,
    run_single_solve, success_rates, write_trace_csv, ExperimentKind, ExperimentOutput,
    ExperimentSpec, ResultWriter,
};
use saf_core::measurement::{build_cdp_model, build_gaussian_model, observe, DftShape, Noise};
use saf_core::numerics::{nmse, sample_gaussian_vector, Field, RngSeed};
use saf_core::objective::{verify_kernel_properties, ObjectiveKind, SafParams};
use saf_core::init::InitConfig;
use saf_core::solver::SolverConfig;
use saf_core::{Error, Result};

/// Phase retrieval experiments with smooth amplitude flow.
///
/// Any flag may also be given in a key=value file passed with --config;
/// flags on the command line win.
#[derive(Parser, Debug)]
#[command(name = "saf", version, args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Success rate versus m/n on Gaussian models.
    Sweep(GridArgs),
    /// Median NMSE versus SNR.
    Snr(GridArgs),
    /// Iterations and time to NMSE 1e-14.
    Bench {
        #[command(flatten)]
        grid: GridArgs,
        /// SAF base step 6 (real) / 10 (complex).
        #[arg(long)]
        tuned_steps: bool,
    },
    /// Coded-diffraction recovery of a grayscale image.
    Cdp {
        #[command(flatten)]
        grid: GridArgs,
        /// 8-bit PGM input; a synthetic gradient when omitted.
        #[arg(long)]
        image: Option<PathBuf>,
        /// Prefix for recovered images, written as <prefix>_k<K>_<algo>.pgm.
        #[arg(long)]
        out_image: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Dft::TwoD)]
        dft: Dft,
    },
    /// Solve an instance read from disk.
    Solve(SolveArgs),
    /// Check the structural properties of the SAF gradient kernel.
    VerifyKernel(KernelArgs),
    /// Write a random instance (model, observation, truth) to disk.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Dft {
    #[value(name = "1d")]
    OneD,
    #[value(name = "2d")]
    TwoD,
}

#[derive(Args, Debug)]
struct SafArgs {
    /// SAF smoothing exponent.
    #[arg(long)]
    k: Option<f64>,
    /// SAF smoothing scale ε = γ·b.
    #[arg(long)]
    gamma: Option<f64>,
}

impl SafArgs {
    fn params(&self) -> Result<SafParams> {
        let d = SafParams::default();
        SafParams::new(self.k.unwrap_or(d.k()), self.gamma.unwrap_or(d.gamma()))
    }
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long)]
    n: Option<usize>,
    /// Oversampling ratios m/n, comma separated.
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum)]
    field: Option<FieldArg>,
    /// Algorithms, comma separated: saf, af, wf.
    #[arg(long, value_delimiter = ',')]
    algo: Option<Vec<String>>,
    /// SNR values in dB, comma separated; `inf` is noiseless.
    #[arg(long, value_delimiter = ',')]
    snr: Option<Vec<f64>>,
    /// Mask counts K, comma separated.
    #[arg(long, value_delimiter = ',')]
    masks: Option<Vec<usize>>,
    /// Result CSV; a `.timing.csv` sidecar is written next to it. Stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Base step for every algorithm.
    #[arg(long)]
    mu: Option<f64>,
    #[command(flatten)]
    saf: SafArgs,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    success_nmse: Option<f64>,
    /// n = 1000, 100 trials, 256×256 CDP image.
    #[arg(long)]
    full_scale: bool,
    /// key=value file with defaults for these flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FieldArg {
    Real,
    Complex,
}

impl From<FieldArg> for Field {
    fn from(f: FieldArg) -> Field {
        match f {
            FieldArg::Real => Field::Real,
            FieldArg::Complex => Field::Complex,
        }
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    obs: PathBuf,
    /// Solution vector output.
    #[arg(long)]
    out: PathBuf,
    /// Per-iteration trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Optional ground truth, only used to report the final NMSE.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value = "saf")]
    algo: String,
    #[arg(long)]
    mu: Option<f64>,
    #[command(flatten)]
    saf: SafArgs,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct KernelArgs {
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 10_000)]
    grid: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    saf: SafArgs,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Number of measurements (Gaussian).
    #[arg(long)]
    m: Option<usize>,
    /// CDP with this many masks and a 1-D DFT instead of a Gaussian model.
    #[arg(long)]
    masks: Option<usize>,
    #[arg(long, value_enum, default_value_t = FieldArg::Real)]
    field: FieldArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long)]
    model_out: PathBuf,
    #[arg(long)]
    obs_out: PathBuf,
    #[arg(long)]
    truth_out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Splices `--config` file entries in front of the explicit flags so that
/// flags given on the command line override them.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        } else if s == "--config" {
            path = args.get(i + 1).map(PathBuf::from);
        }
    }
    let Some(path) = path else { return Ok(args) };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut injected = Vec::new();
    for (key, value) in parse_config(&text, &path.display().to_string())? {
        let flag = format!("--{}", key.replace('_', "-"));
        match value.as_str() {
            "true" => injected.push(OsString::from(flag)),
            "false" => {}
            _ => {
                injected.push(OsString::from(flag));
                injected.push(OsString::from(value));
            }
        }
    }
    // argv[0], subcommand, then config entries, then the rest.
    let split = args.len().min(2);
    let mut out: Vec<OsString> = args[..split].to_vec();
    out.extend(injected);
    out.extend(args[split..].iter().cloned());
    Ok(out)
}

fn parse_algorithms(names: &[String], saf: SafParams) -> Result<Vec<ObjectiveKind>> {
    names
        .iter()
        .map(|s| {
            s.parse::<ObjectiveKind>().map(|k| match k {
                ObjectiveKind::Saf(_) => ObjectiveKind::Saf(saf),
                other => other,
            })
        })
        .collect()
}

fn build_spec(kind: ExperimentKind, g: &GridArgs) -> Result<ExperimentSpec> {
    let field = g.field.map_or(Field::Real, Field::from);
    let mut spec = ExperimentSpec::new(kind, field);
    if g.full_scale {
        spec = spec.full_scale();
    }
    spec.seed = g.seed;
    spec.workers = g.workers;
    spec.mu = g.mu;
    if let Some(n) = g.n {
        spec.n = n;
    }
    if let Some(r) = &g.ratios {
        spec.ratios = r.clone();
    }
    if let Some(t) = g.trials {
        spec.trials = t;
    }
    if let Some(s) = &g.snr {
        spec.snrs = s.clone();
    }
    if let Some(k) = &g.masks {
        spec.masks = k.clone();
    }
    if let Some(t) = g.max_iters {
        spec.max_iters = t;
    }
    if let Some(s) = g.success_nmse {
        spec.success_nmse = s;
    }
    let saf = g.saf.params()?;
    spec.algorithms = match &g.algo {
        Some(names) => parse_algorithms(names, saf)?,
        None => spec
            .algorithms
            .iter()
            .map(|k| match k {
                ObjectiveKind::Saf(_) => ObjectiveKind::Saf(saf),
                other => *other,
            })
            .collect(),
    };
    spec.validate()?;
    Ok(spec)
}

fn run_grid(spec: &ExperimentSpec, out: Option<&Path>, image: Option<&GrayImage>) -> Result<ExperimentOutput> {
    match out {
        Some(path) => {
            let mut w = ResultWriter::create(path)?;
            run_experiment(spec, image, |rows| w.write_rows(rows))
        }
        None => {
            let mut w = ResultWriter::new(io::stdout().lock(), None)?;
            run_experiment(spec, image, |rows| w.write_rows(rows))
        }
    }
}

fn report_rates(out: &ExperimentOutput) {
    for s in success_rates(&out.rows) {
        let grid = match s.masks {
            Some(k) => format!("K={k}"),
            None => format!("m/n={:.3}", s.m as f64 / s.n as f64),
        };
        eprintln!(
            "{:<4} {grid:<10} success {}/{} ({:.1}%)",
            s.algorithm,
            s.successes,
            s.trials,
            100.0 * s.rate()
        );
    }
}

fn cmd_grid(kind: ExperimentKind, g: &GridArgs, tuned_steps: bool) -> Result<()> {
    let mut spec = build_spec(kind, g)?;
    spec.tuned_steps = tuned_steps;
    let out = run_grid(&spec, g.out.as_deref(), None)?;
    match kind {
        ExperimentKind::SnrSweep => {
            let med = median_nmse(&out.rows);
            for s in &med {
                let snr = s.snr_db.map_or("inf".to_string(), |v| format!("{v}"));
                eprintln!(
                    "{:<4} m={:<6} snr={snr:<6} median NMSE {:.3e}",
                    s.algorithm, s.m, s.median_nmse
                );
            }
            for alg in &spec.algorithms {
                for s in success_rates(&out.rows).iter().filter(|s| s.algorithm == alg.name()) {
                    if let Some(slope) = nmse_snr_slope(&med, alg.name(), s.m) {
                        eprintln!("{:<4} m={:<6} slope {slope:+.4} per dB", alg.name(), s.m);
                    }
                }
            }
        }
        ExperimentKind::TimingBench => {
            for s in bench_summary(&out.rows) {
                eprintln!(
                    "{:<4} m={:<6} {}/{} successful, mean {:.2} iterations, mean {:.4e} s",
                    s.algorithm, s.m, s.successes, s.trials, s.mean_iterations, s.mean_seconds
                );
            }
            let names: Vec<&str> = spec.algorithms.iter().map(|a| a.name()).collect();
            for (i, a) in names.iter().enumerate() {
                for b in &names[i + 1..] {
                    let (wins, pairs) = paired_iteration_wins(&out.rows, a, b);
                    eprintln!("{a} fewer iterations than {b} in {wins}/{pairs} joint successes");
                }
            }
        }
        _ => report_rates(&out),
    }
    Ok(())
}

fn cmd_cdp(g: &GridArgs, image: Option<&Path>, out_image: Option<&Path>, dft: Dft) -> Result<()> {
    let mut spec = build_spec(ExperimentKind::CdpImage, g)?;
    spec.cdp_2d = matches!(dft, Dft::TwoD);
    let img = match image {
        Some(p) => read_pgm(p)?,
        None if g.full_scale => GrayImage::synthetic_gradient(256, 256)?,
        None => GrayImage::synthetic_gradient(64, 64)?,
    };
    let out = run_grid(&spec, g.out.as_deref(), Some(&img))?;
    report_rates(&out);
    if let Some(prefix) = out_image {
        for r in &out.images {
            let path = PathBuf::from(format!("{}_k{}_{}.pgm", prefix.display(), r.masks, r.algorithm));
            write_pgm(&path, &r.image)?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_solve(a: &SolveArgs) -> Result<()> {
    let model = read_model(&a.model)?;
    let obs = read_observation(&a.obs)?;
    if obs.len() != model.m() {
        return Err(Error::InvalidConfig(format!(
            "{} has {} amplitudes but {} has {} rows",
            a.obs.display(),
            obs.len(),
            a.model.display(),
            model.m()
        )));
    }
    let alg = parse_algorithms(std::slice::from_ref(&a.algo), a.saf.params()?)?[0];
    let mut cfg = SolverConfig::new(alg, model.field());
    if let Some(mu) = a.mu {
        cfg.mu = mu;
    }
    if let Some(t) = a.max_iters {
        cfg.max_iters = t;
    }
    let res = run_single_solve(&model, &obs, &cfg, &InitConfig::with_seed(RngSeed::new(a.seed, 0)))?;
    write_vector(&a.out, &res.z)?;
    if let Some(path) = &a.trace {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        write_trace_csv(BufWriter::new(f), &res.trace)?;
    }
    let last = res.trace.final_record().map_or(f64::NAN, |r| r.loss);
    eprintln!(
        "{}: {} after {} iterations, loss {last:.6e}",
        alg.name(),
        res.trace.status,
        res.trace.iterations()
    );
    if let Some(path) = &a.truth {
        let x = read_vector(path)?;
        eprintln!("NMSE vs truth {:.6e}", nmse(&res.z, &x)?);
    }
    Ok(())
}

fn cmd_verify(a: &KernelArgs) -> Result<bool> {
    let params = a.saf.params()?;
    let start = std::time::Instant::now();
    let report = verify_kernel_properties(a.samples, a.grid, &params, &mut RngSeed::new(a.seed, 0).rng());
    print!("{report}");
    println!("elapsed {:.3} s", start.elapsed().as_secs_f64());
    Ok(report.all_passed())
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let field = Field::from(a.field);
    let seed = RngSeed::new(a.seed, 0);
    let x = sample_gaussian_vector(a.n, field, &mut seed.derive(0).rng())?;
    let model = match a.masks {
        Some(k) => build_cdp_model(DftShape::OneD(a.n), k, field, &mut seed.derive(1).rng())?,
        None => {
            let m = a.m.unwrap_or(if field.is_real() { 4 * a.n } else { 6 * a.n });
            build_gaussian_model(m, a.n, field, &mut seed.derive(1).rng())?
        }
    };
    let noise = a.snr.map_or(Noise::None, Noise::from_snr);
    let obs = observe(&model, &x, noise, &mut seed.derive(2).rng())?;
    write_model(&a.model_out, &model)?;
    write_observation(&a.obs_out, &obs)?;
    write_vector(&a.truth_out, &x)?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Sweep(g) => cmd_grid(ExperimentKind::SuccessSweep, g, false)?,
        Command::Snr(g) => cmd_grid(ExperimentKind::SnrSweep, g, false)?,
        Command::Bench { grid, tuned_steps } => cmd_grid(ExperimentKind::TimingBench, grid, *tuned_steps)?,
        Command::Cdp { grid, image, out_image, dft } => {
            cmd_cdp(grid, image.as_deref(), out_image.as_deref(), *dft)?
        }
        Command::Solve(a) => cmd_solve(a)?,
        Command::VerifyKernel(a) => return cmd_verify(a),
        Command::Gen(a) => cmd_gen(a)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let args = match expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let cli = Cli::parse_from(args);
    let result = run(cli);
    let _ = io::stdout().flush();
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
