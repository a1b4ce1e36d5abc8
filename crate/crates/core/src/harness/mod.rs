//! Monte-Carlo experiment drivers, CSV output and instance I/O.
//!
//! Every trial of every experiment goes through [`solve_instance`], which is
//! the single entry point into [`solver::run`]. Trials are independent tasks
//! run on a worker pool; rows are handed to the caller in (grid, trial) order
//! no matter which worker finishes first.
//!
//! Randomness for trial `i` at grid point `g` is keyed by a hash of the grid
//! point's values and `i`, not by its position in the grid, so reordering or
//! subsetting the grid leaves every surviving trial unchanged.

pub mod io;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::init::{initialize, InitConfig};
use crate::measurement::{
    build_cdp_model, build_gaussian_model, observe, DftShape, MeasurementModel, Noise, NoiseMeta,
    Observation,
};
use crate::numerics::{
    inner, nmse, phase_of, sample_gaussian_vector, splitmix64, Field, RngSeed, SignalVector,
};
use crate::objective::ObjectiveKind;
use crate::solver::{self, SolverConfig, SolverStatus, SolverTrace};

use self::io::{fmt_f64, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    SuccessSweep,
    SnrSweep,
    TimingBench,
    CdpImage,
    SingleSolve,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::SuccessSweep => "success_sweep",
            ExperimentKind::SnrSweep => "snr_sweep",
            ExperimentKind::TimingBench => "timing_bench",
            ExperimentKind::CdpImage => "cdp_image",
            ExperimentKind::SingleSolve => "single_solve",
        }
    }

    fn tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "success_sweep" => ExperimentKind::SuccessSweep,
            "snr_sweep" => ExperimentKind::SnrSweep,
            "timing_bench" => ExperimentKind::TimingBench,
            "cdp_image" => ExperimentKind::CdpImage,
            "single_solve" => ExperimentKind::SingleSolve,
            other => return Err(Error::InvalidConfig(format!("unknown experiment `{other}`"))),
        })
    }
}

/// Full description of one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub field: Field,
    /// Signal length for Gaussian experiments. CDP takes it from the image.
    pub n: usize,
    /// Oversampling grid m/n (Gaussian experiments).
    pub ratios: Vec<f64>,
    /// Mask-count grid K (CDP).
    pub masks: Vec<usize>,
    /// SNR grid in dB; `+∞` is noiseless. Empty means noiseless only.
    pub snrs: Vec<f64>,
    pub trials: usize,
    pub algorithms: Vec<ObjectiveKind>,
    /// A trial succeeds when its final NMSE is below this.
    pub success_nmse: f64,
    /// Stop each run as soon as it succeeds. Off for SNR sweeps, which run
    /// to the gradient stop.
    pub stop_at_success: bool,
    pub seed: u64,
    /// Overrides the default base step for every algorithm.
    pub mu: Option<f64>,
    /// Use μ = 6 (real) / 10 (complex) for SAF in the timing bench.
    pub tuned_steps: bool,
    pub max_iters: usize,
    /// Worker threads; 0 lets the pool pick.
    pub workers: usize,
    /// Treat CDP images with a 2-D DFT (otherwise the vectorized 1-D DFT).
    pub cdp_2d: bool,
}

impl ExperimentSpec {
    /// Desk-scale defaults for `kind`.
    pub fn new(kind: ExperimentKind, field: Field) -> Self {
        let mut spec = ExperimentSpec {
            kind,
            field,
            n: 100,
            ratios: vec![1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0],
            masks: vec![5],
            snrs: vec![],
            trials: 50,
            algorithms: vec![ObjectiveKind::default()],
            success_nmse: 1e-5,
            stop_at_success: true,
            seed: 0,
            mu: None,
            tuned_steps: false,
            max_iters: 5000,
            workers: 0,
            cdp_2d: true,
        };
        match kind {
            ExperimentKind::SnrSweep => {
                spec.ratios = vec![4.0];
                spec.snrs = vec![20.0, 30.0, 40.0, 50.0];
                spec.stop_at_success = false;
            }
            ExperimentKind::TimingBench => {
                spec.ratios = vec![if field.is_real() { 2.0 } else { 4.0 }];
                spec.success_nmse = 1e-14;
                spec.algorithms = vec![ObjectiveKind::default(), ObjectiveKind::Af];
            }
            ExperimentKind::CdpImage => {
                spec.trials = 20;
                spec.success_nmse = 1e-10;
                spec.max_iters = 500;
            }
            _ => {}
        }
        spec
    }

    /// Scales to n = 1000 and 100 trials.
    pub fn full_scale(mut self) -> Self {
        self.n = 1000;
        self.trials = 100;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.algorithms.is_empty() {
            return bad("at least one algorithm is required");
        }
        if !(self.success_nmse > 0.0) {
            return bad("success_nmse must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        match self.kind {
            ExperimentKind::CdpImage => {
                if self.masks.is_empty() || self.masks.contains(&0) {
                    return bad("mask grid must be non-empty with K >= 1");
                }
            }
            ExperimentKind::SingleSolve => {}
            _ => {
                if self.n == 0 {
                    return bad("n must be at least 1");
                }
                if self.ratios.is_empty() {
                    return bad("ratio grid must be non-empty");
                }
                if self.ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                    return bad("ratios must be positive");
                }
                if self.ratios.iter().any(|r| self.m_for(*r) == 0) {
                    return bad("a ratio rounds to m = 0");
                }
            }
        }
        if self.kind == ExperimentKind::SnrSweep && self.snrs.is_empty() {
            return bad("snr list must be non-empty");
        }
        if self.snrs.iter().any(|s| s.is_nan()) {
            return bad("snr values must not be NaN");
        }
        if let Some(mu) = self.mu {
            if !(mu > 0.0 && mu.is_finite()) {
                return bad("mu must be positive");
            }
        }
        Ok(())
    }

    fn m_for(&self, ratio: f64) -> usize {
        (ratio * self.n as f64).round() as usize
    }

    /// Solver settings for one algorithm of this experiment.
    pub fn solver_config(&self, objective: ObjectiveKind) -> SolverConfig {
        let mut cfg = SolverConfig::new(objective, self.field);
        cfg.max_iters = self.max_iters;
        if let Some(mu) = self.mu {
            cfg.mu = mu;
        } else if self.tuned_steps
            && self.kind == ExperimentKind::TimingBench
            && matches!(objective, ObjectiveKind::Saf(_))
        {
            cfg.mu = if self.field.is_real() { 6.0 } else { 10.0 };
        }
        if self.stop_at_success {
            cfg.stop_nmse_tol = Some(self.success_nmse);
        }
        cfg
    }

    fn grid(&self) -> Vec<GridPoint> {
        let snrs: Vec<Option<f64>> = if self.snrs.is_empty() {
            vec![None]
        } else {
            self.snrs.iter().map(|s| s.is_finite().then_some(*s)).collect()
        };
        let mut points = Vec::new();
        match self.kind {
            ExperimentKind::CdpImage => {
                for &k in &self.masks {
                    points.push(GridPoint { m: 0, masks: Some(k), snr_db: None });
                }
            }
            _ => {
                for &r in &self.ratios {
                    for &snr_db in &snrs {
                        points.push(GridPoint { m: self.m_for(r), masks: None, snr_db });
                    }
                }
            }
        }
        points
    }

    /// Randomness key for one trial: a hash of the experiment identity, the
    /// grid point's values and the trial index.
    pub fn trial_seed(&self, n: usize, point: &GridPoint, trial: usize) -> RngSeed {
        let words = [
            self.kind.tag(),
            self.field.is_real() as u64,
            n as u64,
            point.m as u64,
            point.masks.map_or(0, |k| k as u64),
            point.snr_db.map_or(u64::MAX, f64::to_bits),
            trial as u64,
        ];
        let stream = words.iter().fold(0x5af0_5af0_5af0_5af0, |h, w| splitmix64(h ^ w));
        RngSeed::new(self.seed, stream)
    }
}

/// One grid coordinate. `m` is 0 for CDP, where it follows from K.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub m: usize,
    pub masks: Option<usize>,
    pub snr_db: Option<f64>,
}

/// One (grid point, trial, algorithm) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: ExperimentKind,
    pub field: Field,
    pub algorithm: String,
    pub n: usize,
    pub m: usize,
    pub masks: Option<usize>,
    pub snr_db: Option<f64>,
    pub trial: usize,
    pub seed: u64,
    pub stream: u64,
    pub success: bool,
    pub final_nmse: f64,
    pub init_nmse: f64,
    pub iterations: usize,
    /// Solver status, or `error` when the trial could not be run.
    pub status: String,
    /// Realized noise variance, when noise was added.
    pub sigma2: Option<f64>,
    /// Descent time only. Written to the timing sidecar, never the main CSV.
    pub wall_seconds: f64,
}

pub const RESULT_HEADER: [&str; 16] = [
    "experiment",
    "field",
    "algorithm",
    "n",
    "m",
    "masks",
    "snr_db",
    "trial",
    "seed",
    "stream",
    "success",
    "final_nmse",
    "init_nmse",
    "iterations",
    "status",
    "sigma2",
];

pub const TIMING_HEADER: [&str; 9] = [
    "experiment",
    "field",
    "algorithm",
    "n",
    "m",
    "masks",
    "snr_db",
    "trial",
    "wall_seconds",
];

fn opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

impl ResultRow {
    fn key_fields(&self) -> [String; 7] {
        [
            self.experiment.to_string(),
            self.field.to_string(),
            self.algorithm.clone(),
            self.n.to_string(),
            self.m.to_string(),
            self.masks.map(|k| k.to_string()).unwrap_or_default(),
            opt_f64(self.snr_db),
        ]
    }

    pub fn record(&self) -> Vec<String> {
        let mut r = self.key_fields().to_vec();
        r.extend([
            self.trial.to_string(),
            self.seed.to_string(),
            self.stream.to_string(),
            (self.success as u8).to_string(),
            fmt_f64(self.final_nmse),
            fmt_f64(self.init_nmse),
            self.iterations.to_string(),
            self.status.clone(),
            opt_f64(self.sigma2),
        ]);
        r
    }

    pub fn timing_record(&self) -> Vec<String> {
        let mut r = self.key_fields().to_vec();
        r.extend([self.trial.to_string(), fmt_f64(self.wall_seconds)]);
        r
    }
}

/// Writes result rows to a main CSV and, optionally, a timing sidecar.
/// Both are flushed after every batch so partial sweeps are readable.
pub struct ResultWriter<W: Write> {
    main: csv::Writer<W>,
    timing: Option<csv::Writer<W>>,
}

impl<W: Write> ResultWriter<W> {
    pub fn new(main: W, timing: Option<W>) -> Result<Self> {
        let mut main = csv::Writer::from_writer(main);
        main.write_record(RESULT_HEADER)?;
        main.flush().map_err(csv::Error::from)?;
        let timing = match timing {
            Some(t) => {
                let mut t = csv::Writer::from_writer(t);
                t.write_record(TIMING_HEADER)?;
                t.flush().map_err(csv::Error::from)?;
                Some(t)
            }
            None => None,
        };
        Ok(ResultWriter { main, timing })
    }

    pub fn write_rows(&mut self, rows: &[ResultRow]) -> Result<()> {
        for row in rows {
            self.main.write_record(row.record())?;
            if let Some(t) = &mut self.timing {
                t.write_record(row.timing_record())?;
            }
        }
        self.main.flush().map_err(csv::Error::from)?;
        if let Some(t) = &mut self.timing {
            t.flush().map_err(csv::Error::from)?;
        }
        Ok(())
    }

    pub fn into_inner(self) -> Result<(W, Option<W>)> {
        let main = self
            .main
            .into_inner()
            .map_err(|e| Error::Csv(csv::Error::from(e.into_error())))?;
        let timing = match self.timing {
            Some(t) => Some(
                t.into_inner()
                    .map_err(|e| Error::Csv(csv::Error::from(e.into_error())))?,
            ),
            None => None,
        };
        Ok((main, timing))
    }
}

/// `results.csv` → `results.timing.csv`.
pub fn timing_path(out: &Path) -> PathBuf {
    out.with_extension("timing.csv")
}

impl ResultWriter<File> {
    /// Creates `out` and its timing sidecar.
    pub fn create(out: &Path) -> Result<Self> {
        let main = File::create(out).map_err(|e| Error::io(out, e))?;
        let tpath = timing_path(out);
        let timing = File::create(&tpath).map_err(|e| Error::io(&tpath, e))?;
        Self::new(main, Some(timing))
    }
}

/// Recovered CDP image from trial 0 of one mask count.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredImage {
    pub masks: usize,
    pub algorithm: String,
    pub image: GrayImage,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub images: Vec<RecoveredImage>,
}

#[derive(Debug, Clone, Copy)]
struct Task {
    point: GridPoint,
    trial: usize,
}

struct TrialOutput {
    rows: Vec<ResultRow>,
    images: Vec<RecoveredImage>,
}

/// A generated problem: model, observation and the withheld truth.
pub struct Instance {
    pub model: MeasurementModel,
    pub obs: Observation,
    pub truth: SignalVector,
}

/// Result of one solver run from a shared initializer.
pub struct SolveOutcome {
    pub z: SignalVector,
    pub trace: SolverTrace,
    pub wall_seconds: f64,
}

/// The only path from the harness into the solver.
pub fn solve_instance(
    model: &MeasurementModel,
    obs: &Observation,
    cfg: &SolverConfig,
    init: &SignalVector,
    truth: Option<&SignalVector>,
) -> Result<SolveOutcome> {
    let start = Instant::now();
    let (z, trace) = solver::run(model, obs, cfg, init, truth)?;
    Ok(SolveOutcome {
        z,
        trace,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Initialization and descent without ground truth, as for a user-supplied
/// instance.
pub fn run_single_solve(
    model: &MeasurementModel,
    obs: &Observation,
    cfg: &SolverConfig,
    init_cfg: &InitConfig,
) -> Result<SolveOutcome> {
    if obs.len() != model.m() {
        return Err(Error::InvalidConfig(format!(
            "observation has {} amplitudes but the model has {} rows",
            obs.len(),
            model.m()
        )));
    }
    let z0 = initialize(model, obs, init_cfg)?;
    solve_instance(model, obs, cfg, &z0, None)
}

pub const TRACE_HEADER: [&str; 7] = ["t", "loss", "step", "backtracks", "armijo", "grad_norm", "nmse"];

/// One row per trace record, t = 0 included.
pub fn write_trace_csv<W: Write>(out: W, trace: &SolverTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        w.write_record([
            r.t.to_string(),
            fmt_f64(r.loss),
            fmt_f64(r.step),
            r.backtracks.to_string(),
            (r.armijo as u8).to_string(),
            fmt_f64(r.grad_norm),
            opt_f64(r.nmse),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Rotates `z` onto `x` (sign flip for the real field).
pub fn align_phase(z: &SignalVector, x: &SignalVector) -> Result<SignalVector> {
    let rot = phase_of(inner(z.as_slice(), x.as_slice()));
    match z.field() {
        Field::Real => z.scaled(Complex64::new(if rot.re < 0.0 { -1.0 } else { 1.0 }, 0.0)),
        Field::Complex => z.scaled(rot),
    }
}

fn image_signal(image: &GrayImage, field: Field) -> Result<SignalVector> {
    SignalVector::new(
        field,
        image.pixels.iter().map(|p| Complex64::new(*p, 0.0)).collect(),
    )
}

fn make_instance(
    spec: &ExperimentSpec,
    image: Option<&GrayImage>,
    point: &GridPoint,
    seed: RngSeed,
) -> Result<Instance> {
    let (model, truth) = match (spec.kind, image) {
        (ExperimentKind::CdpImage, Some(img)) => {
            let shape = if spec.cdp_2d {
                DftShape::TwoD { rows: img.rows, cols: img.cols }
            } else {
                DftShape::OneD(img.rows * img.cols)
            };
            let k = point.masks.unwrap_or(1);
            let model = build_cdp_model(shape, k, spec.field, &mut seed.derive(1).rng())?;
            (model, image_signal(img, spec.field)?)
        }
        (ExperimentKind::CdpImage, None) => {
            return Err(Error::InvalidConfig("CDP experiment needs an image".into()))
        }
        _ => {
            let x = sample_gaussian_vector(spec.n, spec.field, &mut seed.derive(0).rng())?;
            let model = build_gaussian_model(point.m, spec.n, spec.field, &mut seed.derive(1).rng())?;
            (model, x)
        }
    };
    let noise = point.snr_db.map_or(Noise::None, Noise::from_snr);
    let obs = observe(&model, &truth, noise, &mut seed.derive(2).rng())?;
    Ok(Instance { model, obs, truth })
}

fn run_trial(spec: &ExperimentSpec, image: Option<&GrayImage>, task: &Task) -> TrialOutput {
    let n = image.map_or(spec.n, |i| i.rows * i.cols);
    let seed = spec.trial_seed(n, &task.point, task.trial);
    let m = match task.point.masks {
        Some(k) => k * n,
        None => task.point.m,
    };
    let row = |algorithm: &ObjectiveKind| ResultRow {
        experiment: spec.kind,
        field: spec.field,
        algorithm: algorithm.name().to_string(),
        n,
        m,
        masks: task.point.masks,
        snr_db: task.point.snr_db,
        trial: task.trial,
        seed: seed.seed,
        stream: seed.stream_id,
        success: false,
        final_nmse: f64::NAN,
        init_nmse: f64::NAN,
        iterations: 0,
        status: "error".to_string(),
        sigma2: None,
        wall_seconds: 0.0,
    };

    let prepared = make_instance(spec, image, &task.point, seed).and_then(|inst| {
        let z0 = initialize(&inst.model, &inst.obs, &InitConfig::with_seed(seed.derive(3)))?;
        let init_nmse = nmse(&z0, &inst.truth)?;
        Ok((inst, z0, init_nmse))
    });
    let (inst, z0, init_nmse) = match prepared {
        Ok(p) => p,
        Err(_) => {
            return TrialOutput {
                rows: spec.algorithms.iter().map(row).collect(),
                images: vec![],
            }
        }
    };
    let sigma2 = match inst.obs.noise() {
        NoiseMeta::GaussianIntensity { sigma2, .. } => Some(sigma2),
        NoiseMeta::Noiseless => None,
    };

    let mut out = TrialOutput { rows: vec![], images: vec![] };
    for alg in &spec.algorithms {
        let mut r = row(alg);
        r.init_nmse = init_nmse;
        r.sigma2 = sigma2;
        let cfg = spec.solver_config(*alg);
        if let Ok(res) = solve_instance(&inst.model, &inst.obs, &cfg, &z0, Some(&inst.truth)) {
            let final_nmse = match res.trace.status {
                SolverStatus::Failed => f64::NAN,
                _ => nmse(&res.z, &inst.truth).unwrap_or(f64::NAN),
            };
            r.final_nmse = final_nmse;
            r.success = final_nmse <= spec.success_nmse;
            r.iterations = res.trace.iterations();
            r.status = res.trace.status.as_str().to_string();
            r.wall_seconds = res.wall_seconds;
            if let (Some(img), Some(k), 0) = (image, task.point.masks, task.trial) {
                if let Ok(aligned) = align_phase(&res.z, &inst.truth) {
                    let pixels = aligned.as_slice().iter().map(|v| v.re.clamp(0.0, 1.0)).collect();
                    if let Ok(image) = GrayImage::new(img.rows, img.cols, pixels) {
                        out.images.push(RecoveredImage {
                            masks: k,
                            algorithm: r.algorithm.clone(),
                            image,
                        });
                    }
                }
            }
        }
        out.rows.push(r);
    }
    out
}

/// Runs `work` over `items` on `workers` threads and feeds results to `sink`
/// in item order. The first sink error stops new work and is returned.
fn for_each_ordered<T, R, F, S>(items: &[T], workers: usize, work: F, mut sink: S) -> Result<()>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
    S: FnMut(R) -> Result<()>,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    let abort = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel();
    let mut result = Ok(());
    std::thread::scope(|s| {
        let (pool, work, abort) = (&pool, &work, &abort);
        s.spawn(move || {
            pool.install(|| {
                items.par_iter().enumerate().for_each_with(tx, |tx, (i, item)| {
                    if !abort.load(Ordering::Relaxed) {
                        let _ = tx.send((i, Some(work(item))));
                    } else {
                        let _ = tx.send((i, None));
                    }
                })
            })
        });
        let mut pending = BTreeMap::new();
        let mut next = 0;
        for (i, r) in rx {
            pending.insert(i, r);
            while let Some(r) = pending.remove(&next) {
                if let (Ok(()), Some(r)) = (&result, r) {
                    result = sink(r);
                    if result.is_err() {
                        abort.store(true, Ordering::Relaxed);
                    }
                }
                next += 1;
            }
        }
    });
    result
}

/// Runs any grid experiment. `on_trial` receives each trial's rows in
/// deterministic (grid, trial) order as soon as they are available.
pub fn run_experiment<F>(
    spec: &ExperimentSpec,
    image: Option<&GrayImage>,
    mut on_trial: F,
) -> Result<ExperimentOutput>
where
    F: FnMut(&[ResultRow]) -> Result<()>,
{
    if spec.kind == ExperimentKind::SingleSolve {
        return Err(Error::InvalidConfig(
            "single solves run through run_single_solve".into(),
        ));
    }
    spec.validate()?;
    let tasks: Vec<Task> = spec
        .grid()
        .into_iter()
        .flat_map(|point| (0..spec.trials).map(move |trial| Task { point, trial }))
        .collect();
    let mut output = ExperimentOutput::default();
    for_each_ordered(
        &tasks,
        spec.workers,
        |task| run_trial(spec, image, task),
        |trial| {
            on_trial(&trial.rows)?;
            output.rows.extend(trial.rows);
            output.images.extend(trial.images);
            Ok(())
        },
    )?;
    Ok(output)
}

fn expect_kind(spec: &ExperimentSpec, kind: ExperimentKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::InvalidConfig(format!(
            "expected a {kind} spec, got {}",
            spec.kind
        )));
    }
    Ok(())
}

pub fn run_success_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    expect_kind(spec, ExperimentKind::SuccessSweep)?;
    Ok(run_experiment(spec, None, |_| Ok(()))?.rows)
}

pub fn run_snr_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    expect_kind(spec, ExperimentKind::SnrSweep)?;
    Ok(run_experiment(spec, None, |_| Ok(()))?.rows)
}

pub fn run_timing_bench(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    expect_kind(spec, ExperimentKind::TimingBench)?;
    Ok(run_experiment(spec, None, |_| Ok(()))?.rows)
}

pub fn run_cdp_image(spec: &ExperimentSpec, image: &GrayImage) -> Result<ExperimentOutput> {
    expect_kind(spec, ExperimentKind::CdpImage)?;
    run_experiment(spec, Some(image), |_| Ok(()))
}

/// Success counts per (algorithm, m, K), in first-seen order.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSummary {
    pub algorithm: String,
    pub n: usize,
    pub m: usize,
    pub masks: Option<usize>,
    pub trials: usize,
    pub successes: usize,
}

impl RateSummary {
    pub fn rate(&self) -> f64 {
        self.successes as f64 / self.trials.max(1) as f64
    }
}

pub fn success_rates(rows: &[ResultRow]) -> Vec<RateSummary> {
    let mut out: Vec<RateSummary> = Vec::new();
    for r in rows {
        match out
            .iter_mut()
            .find(|s| s.algorithm == r.algorithm && s.m == r.m && s.masks == r.masks)
        {
            Some(s) => {
                s.trials += 1;
                s.successes += r.success as usize;
            }
            None => out.push(RateSummary {
                algorithm: r.algorithm.clone(),
                n: r.n,
                m: r.m,
                masks: r.masks,
                trials: 1,
                successes: r.success as usize,
            }),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmseSummary {
    pub algorithm: String,
    pub m: usize,
    pub snr_db: Option<f64>,
    pub median_nmse: f64,
    pub trials: usize,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let k = values.len() / 2;
    if values.len() % 2 == 1 {
        values[k]
    } else {
        0.5 * (values[k - 1] + values[k])
    }
}

/// Median final NMSE per (algorithm, m, SNR). Failed runs count as NaN,
/// which sorts above every finite value.
pub fn median_nmse(rows: &[ResultRow]) -> Vec<NmseSummary> {
    let mut groups: Vec<(String, usize, Option<f64>, Vec<f64>)> = Vec::new();
    for r in rows {
        let v = if r.final_nmse.is_nan() { f64::INFINITY } else { r.final_nmse };
        match groups
            .iter_mut()
            .find(|g| g.0 == r.algorithm && g.1 == r.m && g.2 == r.snr_db)
        {
            Some(g) => g.3.push(v),
            None => groups.push((r.algorithm.clone(), r.m, r.snr_db, vec![v])),
        }
    }
    groups
        .into_iter()
        .map(|(algorithm, m, snr_db, mut v)| NmseSummary {
            algorithm,
            m,
            snr_db,
            trials: v.len(),
            median_nmse: median(&mut v),
        })
        .collect()
}

/// Least-squares slope of y against x.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Slope of log₁₀(median NMSE) per dB for one (algorithm, m).
pub fn nmse_snr_slope(summaries: &[NmseSummary], algorithm: &str, m: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> = summaries
        .iter()
        .filter(|s| s.algorithm == algorithm && s.m == m)
        .filter_map(|s| Some((s.snr_db?, s.median_nmse.log10())))
        .collect();
    (pts.len() >= 2).then(|| fit_slope(&pts))
}

/// Means over successful trials only; failures are counted separately.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    pub algorithm: String,
    pub m: usize,
    pub trials: usize,
    pub successes: usize,
    pub mean_iterations: f64,
    pub mean_seconds: f64,
}

pub fn bench_summary(rows: &[ResultRow]) -> Vec<BenchSummary> {
    success_rates(rows)
        .into_iter()
        .map(|s| {
            let ok: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.algorithm == s.algorithm && r.m == s.m && r.success)
                .collect();
            let k = ok.len() as f64;
            BenchSummary {
                mean_iterations: ok.iter().map(|r| r.iterations as f64).sum::<f64>() / k,
                mean_seconds: ok.iter().map(|r| r.wall_seconds).sum::<f64>() / k,
                algorithm: s.algorithm,
                m: s.m,
                trials: s.trials,
                successes: s.successes,
            }
        })
        .collect()
}

/// Among instances where both `a` and `b` succeeded, counts those where `a`
/// took strictly fewer iterations. Returns (wins, joint successes).
pub fn paired_iteration_wins(rows: &[ResultRow], a: &str, b: &str) -> (usize, usize) {
    let key = |r: &ResultRow| (r.m, r.masks, r.snr_db.map(f64::to_bits), r.trial);
    let mut wins = 0;
    let mut pairs = 0;
    for ra in rows.iter().filter(|r| r.algorithm == a && r.success) {
        if let Some(rb) = rows
            .iter()
            .find(|r| r.algorithm == b && r.success && key(r) == key(ra))
        {
            pairs += 1;
            wins += (ra.iterations < rb.iterations) as usize;
        }
    }
    (wins, pairs)
}
