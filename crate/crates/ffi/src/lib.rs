//! C ABI over `saf-core`.
//!
//! Models and observations are opaque heap handles created by `saf_*_new`
//! functions and released with the matching `_free`. Every fallible call
//! returns a [`SafErrorCode`]; on failure a message is available from
//! [`saf_last_error_message`] on the same thread. Vectors cross the boundary
//! as split real/imaginary `double` arrays; the imaginary pointer may be null
//! for real-field data. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use saf_core::harness::io::read_model;
use saf_core::harness::run_single_solve;
use saf_core::init::InitConfig;
use saf_core::measurement::{
    build_cdp_model, build_gaussian_model, observe, DftShape, MeasurementModel, Noise, Observation,
};
use saf_core::numerics::{nmse, Field, RngSeed, SignalVector};
use saf_core::objective::{ObjectiveKind, SafParams};
use saf_core::solver::{SolverConfig, SolverStatus};
use saf_core::Error;

/// Opaque measurement model.
pub struct SafModel(MeasurementModel);

/// Opaque amplitude vector.
pub struct SafObservation(Observation);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SafErrorCode {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Domain = 4,
    DegenerateSpectrum = 5,
    Parse = 6,
    Io = 7,
    Panic = 8,
}

/// Values written to `status` by [`saf_solve`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SafSolverStatus {
    MaxIters = 0,
    GradConverged = 1,
    NmseConverged = 2,
    Failed = 3,
}

pub const SAF_ALGO_SAF: i32 = 0;
pub const SAF_ALGO_AF: i32 = 1;
pub const SAF_ALGO_WF: i32 = 2;

/// Solver options. Fill with [`saf_solve_options_default`] and adjust.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SafSolveOptions {
    /// One of `SAF_ALGO_*`.
    pub algorithm: i32,
    /// Base step; ≤ 0 selects the default for the algorithm and field.
    pub mu: f64,
    /// 0 selects the default (5000).
    pub max_iters: usize,
    pub k: f64,
    pub gamma: f64,
    /// Seeds the initializer's power iteration.
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn code_of(e: &Error) -> SafErrorCode {
    match e {
        Error::DimensionMismatch { .. } | Error::FieldMismatch { .. } => SafErrorCode::DimensionMismatch,
        Error::Domain(_) => SafErrorCode::Domain,
        Error::InvalidConfig(_) => SafErrorCode::InvalidArgument,
        Error::DegenerateSpectrum => SafErrorCode::DegenerateSpectrum,
        Error::Parse { .. } => SafErrorCode::Parse,
        Error::Io { .. } | Error::Csv(_) => SafErrorCode::Io,
    }
}

struct Fail(SafErrorCode, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(code_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SafErrorCode::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(SafErrorCode::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SafErrorCode {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SafErrorCode::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            SafErrorCode::Panic
        }
    }
}

fn field_of(complex: i32) -> Field {
    if complex != 0 {
        Field::Complex
    } else {
        Field::Real
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn signal(re: *const f64, im: *const f64, n: usize, field: Field) -> Result<SignalVector, Fail> {
    let re = slice(re, n, "real part")?;
    let data = match (field, im.is_null()) {
        (Field::Complex, false) => {
            let im = slice(im, n, "imaginary part")?;
            re.iter().zip(im).map(|(a, b)| Complex64::new(*a, *b)).collect()
        }
        (Field::Complex, true) | (Field::Real, _) => re.iter().map(|a| Complex64::new(*a, 0.0)).collect(),
    };
    Ok(SignalVector::new(field, data)?)
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn saf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Dense model with i.i.d. N(0,1) (real) or CN(0,1) (complex) entries.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn saf_gaussian_model_new(
    m: usize,
    n: usize,
    complex: i32,
    seed: u64,
    stream: u64,
    out: *mut *mut SafModel,
) -> SafErrorCode {
    guard(|| {
        let mut rng = RngSeed::new(seed, stream).rng();
        put(out, SafModel(build_gaussian_model(m, n, field_of(complex), &mut rng)?))
    })
}

/// CDP model with `masks` random masks over a 1-D transform of length
/// `rows` (when `cols` is 0) or a `rows`×`cols` 2-D transform.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn saf_cdp_model_new(
    rows: usize,
    cols: usize,
    masks: usize,
    complex: i32,
    seed: u64,
    stream: u64,
    out: *mut *mut SafModel,
) -> SafErrorCode {
    guard(|| {
        if rows == 0 {
            return Err(invalid("rows must be at least 1"));
        }
        let shape = if cols == 0 { DftShape::OneD(rows) } else { DftShape::TwoD { rows, cols } };
        let mut rng = RngSeed::new(seed, stream).rng();
        put(out, SafModel(build_cdp_model(shape, masks, field_of(complex), &mut rng)?))
    })
}

/// Loads a model from its plain-text dump.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` as for the constructors.
#[no_mangle]
pub unsafe extern "C" fn saf_model_read(path: *const c_char, out: *mut *mut SafModel) -> SafErrorCode {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| invalid("path is not UTF-8"))?;
        put(out, SafModel(read_model(path.as_ref())?))
    })
}

/// # Safety
/// `model` must be null or a handle from a `saf_*model*` constructor, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn saf_model_free(model: *mut SafModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of measurements, 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn saf_model_m(model: *const SafModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.m())
}

/// Signal length, 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn saf_model_n(model: *const SafModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.n())
}

/// 1 for complex signals, 0 for real (or a null handle).
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn saf_model_is_complex(model: *const SafModel) -> i32 {
    model.as_ref().map_or(0, |m| (!m.0.field().is_real()) as i32)
}

/// Measures `x` (length n). `snr_db` = ±∞ or NaN means noiseless.
///
/// # Safety
/// `x_re` must point to n doubles; `x_im` must be null or point to n doubles;
/// `model` must be a live handle; `out` as for the constructors.
#[no_mangle]
pub unsafe extern "C" fn saf_observe(
    model: *const SafModel,
    x_re: *const f64,
    x_im: *const f64,
    n: usize,
    snr_db: f64,
    seed: u64,
    stream: u64,
    out: *mut *mut SafObservation,
) -> SafErrorCode {
    guard(|| {
        let model = &model.as_ref().ok_or_else(|| null("model"))?.0;
        let x = signal(x_re, x_im, n, model.field())?;
        let noise = Noise::from_snr(snr_db);
        let obs = observe(model, &x, noise, &mut RngSeed::new(seed, stream).rng())?;
        put(out, SafObservation(obs))
    })
}

/// Wraps `m` nonnegative amplitudes.
///
/// # Safety
/// `b` must point to `m` doubles; `out` as for the constructors.
#[no_mangle]
pub unsafe extern "C" fn saf_observation_from_amplitudes(
    b: *const f64,
    m: usize,
    out: *mut *mut SafObservation,
) -> SafErrorCode {
    guard(|| {
        let b = slice(b, m, "amplitudes")?;
        put(out, SafObservation(Observation::new(b.to_vec())?))
    })
}

/// # Safety
/// `obs` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn saf_observation_len(obs: *const SafObservation) -> usize {
    obs.as_ref().map_or(0, |o| o.0.len())
}

/// Copies the amplitudes into `out`, which must hold exactly `len` values.
///
/// # Safety
/// `obs` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn saf_observation_amplitudes(
    obs: *const SafObservation,
    out: *mut f64,
    len: usize,
) -> SafErrorCode {
    guard(|| {
        let obs = &obs.as_ref().ok_or_else(|| null("observation"))?.0;
        if len != obs.len() {
            return Err(Fail(
                SafErrorCode::DimensionMismatch,
                format!("buffer holds {len} values, observation has {}", obs.len()),
            ));
        }
        if out.is_null() {
            return Err(null("output buffer"));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(obs.amplitudes());
        Ok(())
    })
}

/// # Safety
/// `obs` must be null or a live handle, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn saf_observation_free(obs: *mut SafObservation) {
    if !obs.is_null() {
        drop(Box::from_raw(obs));
    }
}

/// SAF with k = 4, γ = 1, default step, 5000 iterations, seed 0.
///
/// # Safety
/// `out` must point to writable storage for one options struct.
#[no_mangle]
pub unsafe extern "C" fn saf_solve_options_default(out: *mut SafSolveOptions) -> SafErrorCode {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("options"))?;
        let p = SafParams::default();
        *out = SafSolveOptions {
            algorithm: SAF_ALGO_SAF,
            mu: 0.0,
            max_iters: 0,
            k: p.k(),
            gamma: p.gamma(),
            seed: 0,
        };
        Ok(())
    })
}

fn objective_of(o: &SafSolveOptions) -> Result<ObjectiveKind, Fail> {
    match o.algorithm {
        SAF_ALGO_SAF => Ok(ObjectiveKind::Saf(SafParams::new(o.k, o.gamma)?)),
        SAF_ALGO_AF => Ok(ObjectiveKind::Af),
        SAF_ALGO_WF => Ok(ObjectiveKind::Wf),
        other => Err(invalid(format!("unknown algorithm {other}"))),
    }
}

/// Initializes and runs the solver without ground truth. The estimate is
/// written to `out_re`/`out_im` (length n; `out_im` may be null for real
/// models). `iterations` and `status` may be null.
///
/// # Safety
/// Handles must be live; `options` may be null for defaults; output buffers
/// must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn saf_solve(
    model: *const SafModel,
    obs: *const SafObservation,
    options: *const SafSolveOptions,
    out_re: *mut f64,
    out_im: *mut f64,
    n: usize,
    iterations: *mut usize,
    status: *mut SafSolverStatus,
) -> SafErrorCode {
    guard(|| {
        let model = &model.as_ref().ok_or_else(|| null("model"))?.0;
        let obs = &obs.as_ref().ok_or_else(|| null("observation"))?.0;
        let opts = match options.as_ref() {
            Some(o) => *o,
            None => {
                let mut o = std::mem::MaybeUninit::uninit();
                saf_solve_options_default(o.as_mut_ptr());
                o.assume_init()
            }
        };
        if n != model.n() {
            return Err(Fail(
                SafErrorCode::DimensionMismatch,
                format!("output buffers hold {n} values, model signal length is {}", model.n()),
            ));
        }
        if out_re.is_null() {
            return Err(null("out_re"));
        }
        if !model.field().is_real() && out_im.is_null() {
            return Err(null("out_im (complex model)"));
        }
        let mut cfg = SolverConfig::new(objective_of(&opts)?, model.field());
        if opts.mu > 0.0 {
            cfg.mu = opts.mu;
        }
        if opts.max_iters > 0 {
            cfg.max_iters = opts.max_iters;
        }
        let res = run_single_solve(model, obs, &cfg, &InitConfig::with_seed(RngSeed::new(opts.seed, 0)))?;
        let re = std::slice::from_raw_parts_mut(out_re, n);
        for (r, z) in re.iter_mut().zip(res.z.as_slice()) {
            *r = z.re;
        }
        if !out_im.is_null() {
            let im = std::slice::from_raw_parts_mut(out_im, n);
            for (i, z) in im.iter_mut().zip(res.z.as_slice()) {
                *i = z.im;
            }
        }
        if let Some(it) = iterations.as_mut() {
            *it = res.trace.iterations();
        }
        if let Some(st) = status.as_mut() {
            *st = match res.trace.status {
                SolverStatus::MaxIters => SafSolverStatus::MaxIters,
                SolverStatus::GradConverged => SafSolverStatus::GradConverged,
                SolverStatus::NmseConverged => SafSolverStatus::NmseConverged,
                SolverStatus::Failed => SafSolverStatus::Failed,
            };
        }
        Ok(())
    })
}

/// dist²(z, x)/‖x‖² up to a global phase (sign for `complex` = 0).
///
/// # Safety
/// Real parts must point to n doubles; imaginary parts may be null.
#[no_mangle]
pub unsafe extern "C" fn saf_nmse(
    z_re: *const f64,
    z_im: *const f64,
    x_re: *const f64,
    x_im: *const f64,
    n: usize,
    complex: i32,
    out: *mut f64,
) -> SafErrorCode {
    guard(|| {
        let field = field_of(complex);
        let z = signal(z_re, z_im, n, field)?;
        let x = signal(x_re, x_im, n, field)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = nmse(&z, &x)?;
        Ok(())
    })
}
