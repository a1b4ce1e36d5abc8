//! Sensing ensembles and amplitude observations.
//!
//! Every model exposes the same linear pair: `forward` maps a signal to the
//! m pre-modulus measurements u = Az, and `adjoint` is its adjoint with
//! respect to the field's inner product. For a real field that is
//! Re⟨·,·⟩, so the adjoint keeps only the real part of A'w.

mod dft;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::numerics::{gaussian_scalar, norm_sqr, Field, SignalVector};

pub use dft::{DftShape, UnitaryDft};

/// Dense m×n sensing matrix. Row i holds aᵢ' so that (Az)ᵢ = ⟨aᵢ, z⟩.
#[derive(Debug, Clone)]
pub struct DenseModel {
    field: Field,
    m: usize,
    n: usize,
    entries: DenseEntries,
    row_norm_sqr: Vec<f64>,
}

#[derive(Debug, Clone)]
enum DenseEntries {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl DenseModel {
    /// Builds a model from row-major entries. Real-field models must have
    /// zero imaginary parts.
    pub fn from_rows(field: Field, m: usize, n: usize, entries: Vec<Complex64>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Domain("dense model needs m ≥ 1 and n ≥ 1".into()));
        }
        if entries.len() != m * n {
            return Err(Error::dim("dense model entries", m * n, entries.len()));
        }
        if let Some(i) = entries.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite matrix entry in row {}",
                i / n
            )));
        }
        let row_norm_sqr = entries.chunks(n).map(norm_sqr).collect();
        let entries = match field {
            Field::Real => {
                if entries.iter().any(|v| v.im != 0.0) {
                    return Err(Error::Domain(
                        "real-field matrix has a nonzero imaginary part".into(),
                    ));
                }
                DenseEntries::Real(entries.into_iter().map(|v| v.re).collect())
            }
            Field::Complex => DenseEntries::Complex(entries),
        };
        Ok(DenseModel {
            field,
            m,
            n,
            entries,
            row_norm_sqr,
        })
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        match &self.entries {
            DenseEntries::Real(a) => Complex64::new(a[i * self.n + j], 0.0),
            DenseEntries::Complex(a) => a[i * self.n + j],
        }
    }

    fn forward_into(&self, z: &[Complex64], out: &mut [Complex64]) {
        match &self.entries {
            DenseEntries::Real(a) => {
                // z is real: its imaginary parts are zero by the field invariant.
                for (row, o) in a.chunks_exact(self.n).zip(out.iter_mut()) {
                    let s: f64 = row.iter().zip(z).map(|(r, v)| r * v.re).sum();
                    *o = Complex64::new(s, 0.0);
                }
            }
            DenseEntries::Complex(a) => {
                for (row, o) in a.chunks_exact(self.n).zip(out.iter_mut()) {
                    *o = row.iter().zip(z).map(|(r, v)| r * v).sum();
                }
            }
        }
    }

    fn adjoint_into(&self, w: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        match &self.entries {
            DenseEntries::Real(a) => {
                for (row, wi) in a.chunks_exact(self.n).zip(w) {
                    if wi.re == 0.0 {
                        continue;
                    }
                    for (o, r) in out.iter_mut().zip(row) {
                        o.re += r * wi.re;
                    }
                }
            }
            DenseEntries::Complex(a) => {
                for (row, wi) in a.chunks_exact(self.n).zip(w) {
                    for (o, r) in out.iter_mut().zip(row) {
                        *o += r.conj() * wi;
                    }
                }
            }
        }
    }
}

/// Coded diffraction patterns: K unit-modulus masks followed by a unitary DFT.
#[derive(Debug, Clone)]
pub struct CdpModel {
    field: Field,
    masks: Vec<Vec<Complex64>>,
    dft: UnitaryDft,
}

/// The four mask symbols {1, −1, j, −j}.
pub const MASK_SYMBOLS: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(0.0, -1.0),
];

impl CdpModel {
    pub fn new(field: Field, shape: DftShape, masks: Vec<Vec<Complex64>>) -> Result<Self> {
        let n = shape.len();
        if n == 0 {
            return Err(Error::Domain("CDP signal dimension must be at least 1".into()));
        }
        if masks.is_empty() {
            return Err(Error::Domain("CDP model needs at least one mask".into()));
        }
        for (k, mask) in masks.iter().enumerate() {
            if mask.len() != n {
                return Err(Error::dim("CDP mask", n, mask.len()));
            }
            if let Some(j) = mask.iter().position(|d| (d.norm_sqr() - 1.0).abs() > 1e-12) {
                return Err(Error::Domain(format!(
                    "mask {k} entry {j} is not unit modulus"
                )));
            }
        }
        Ok(CdpModel {
            field,
            masks,
            dft: UnitaryDft::new(shape),
        })
    }

    pub fn masks(&self) -> &[Vec<Complex64>] {
        &self.masks
    }

    pub fn shape(&self) -> DftShape {
        self.dft.shape()
    }

    fn n(&self) -> usize {
        self.dft.shape().len()
    }

    fn forward_into(&self, z: &[Complex64], out: &mut [Complex64]) {
        let n = self.n();
        for (mask, block) in self.masks.iter().zip(out.chunks_exact_mut(n)) {
            for ((o, d), v) in block.iter_mut().zip(mask).zip(z) {
                *o = d * v;
            }
            self.dft.forward(block);
        }
    }

    fn adjoint_into(&self, w: &[Complex64], out: &mut [Complex64]) {
        let n = self.n();
        out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (mask, block) in self.masks.iter().zip(w.chunks_exact(n)) {
            buf.copy_from_slice(block);
            self.dft.inverse(&mut buf);
            for ((o, d), v) in out.iter_mut().zip(mask).zip(&buf) {
                *o += d.conj() * v;
            }
        }
    }
}

/// A sensing operator: dense Gaussian-style matrix or matrix-free CDP.
#[derive(Debug, Clone)]
pub enum MeasurementModel {
    Dense(DenseModel),
    Cdp(CdpModel),
}

impl MeasurementModel {
    pub fn field(&self) -> Field {
        match self {
            MeasurementModel::Dense(d) => d.field,
            MeasurementModel::Cdp(c) => c.field,
        }
    }

    /// Signal dimension.
    pub fn n(&self) -> usize {
        match self {
            MeasurementModel::Dense(d) => d.n,
            MeasurementModel::Cdp(c) => c.n(),
        }
    }

    /// Number of measurements (K·n for CDP).
    pub fn m(&self) -> usize {
        match self {
            MeasurementModel::Dense(d) => d.m,
            MeasurementModel::Cdp(c) => c.masks.len() * c.n(),
        }
    }

    /// ‖aᵢ‖². Every CDP row has unit norm.
    pub fn row_norm_sqr(&self, i: usize) -> f64 {
        match self {
            MeasurementModel::Dense(d) => d.row_norm_sqr[i],
            MeasurementModel::Cdp(_) => 1.0,
        }
    }

    /// Factor that puts (1/m)·A'A on the scale of the identity.
    ///
    /// Gaussian rows satisfy E‖aᵢ‖² = n, so (1/m)A'A ≈ I already. Unitary CDP
    /// rows have unit norm and (1/m)A'A = I/n, so step sizes are multiplied by n.
    pub fn step_scale(&self) -> f64 {
        match self {
            MeasurementModel::Dense(_) => 1.0,
            MeasurementModel::Cdp(c) => c.n() as f64,
        }
    }

    pub fn forward(&self, z: &SignalVector) -> Result<Vec<Complex64>> {
        self.check_signal(z)?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.m()];
        self.forward_raw(z.as_slice(), &mut out);
        Ok(out)
    }

    pub fn adjoint(&self, w: &[Complex64]) -> Result<SignalVector> {
        if w.len() != self.m() {
            return Err(Error::dim("adjoint input", self.m(), w.len()));
        }
        Ok(SignalVector::from_raw(self.field(), self.adjoint_raw(w)))
    }

    pub(crate) fn check_signal(&self, z: &SignalVector) -> Result<()> {
        if z.field() != self.field() {
            return Err(Error::FieldMismatch {
                left: self.field(),
                right: z.field(),
            });
        }
        if z.len() != self.n() {
            return Err(Error::dim("signal vs model", self.n(), z.len()));
        }
        Ok(())
    }

    /// Unchecked forward: `z.len() == n`, `out.len() == m`.
    pub(crate) fn forward_raw(&self, z: &[Complex64], out: &mut [Complex64]) {
        match self {
            MeasurementModel::Dense(d) => d.forward_into(z, out),
            MeasurementModel::Cdp(c) => c.forward_into(z, out),
        }
    }

    /// Unchecked adjoint, already projected into the model's field.
    pub(crate) fn adjoint_raw(&self, w: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n()];
        match self {
            MeasurementModel::Dense(d) => d.adjoint_into(w, &mut out),
            MeasurementModel::Cdp(c) => c.adjoint_into(w, &mut out),
        }
        if self.field().is_real() {
            out.iter_mut().for_each(|v| v.im = 0.0);
        }
        out
    }
}

/// Dense model with i.i.d. N(0,1) or CN(0,1) entries.
pub fn build_gaussian_model<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    field: Field,
    rng: &mut R,
) -> Result<MeasurementModel> {
    if m == 0 || n == 0 {
        return Err(Error::Domain("dense model needs m ≥ 1 and n ≥ 1".into()));
    }
    let entries = (0..m * n).map(|_| gaussian_scalar(field, rng)).collect();
    Ok(MeasurementModel::Dense(DenseModel::from_rows(
        field, m, n, entries,
    )?))
}

/// CDP model with `k` masks drawn uniformly from {1, −1, j, −j}.
pub fn build_cdp_model<R: Rng + ?Sized>(
    shape: DftShape,
    k: usize,
    field: Field,
    rng: &mut R,
) -> Result<MeasurementModel> {
    if k == 0 {
        return Err(Error::Domain("CDP model needs at least one mask".into()));
    }
    let n = shape.len();
    let masks = (0..k)
        .map(|_| {
            (0..n)
                .map(|_| MASK_SYMBOLS[rng.random_range(0..4)])
                .collect()
        })
        .collect();
    Ok(MeasurementModel::Cdp(CdpModel::new(field, shape, masks)?))
}

/// Provenance of an observation vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseMeta {
    Noiseless,
    /// Additive Gaussian intensity noise at the requested SNR with the
    /// realized variance σ².
    GaussianIntensity { snr_db: f64, sigma2: f64 },
}

/// Nonnegative amplitude measurements b.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    b: Vec<f64>,
    noise: NoiseMeta,
}

impl Observation {
    pub fn new(b: Vec<f64>) -> Result<Self> {
        Self::with_meta(b, NoiseMeta::Noiseless)
    }

    pub fn with_meta(b: Vec<f64>, noise: NoiseMeta) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::Domain("observation is empty".into()));
        }
        if let Some(i) = b.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain(format!(
                "amplitude {i} is negative or non-finite: {}",
                b[i]
            )));
        }
        Ok(Observation { b, noise })
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.b
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn noise(&self) -> NoiseMeta {
        self.noise
    }

    /// Same observation with every amplitude multiplied by `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::with_meta(self.b.iter().map(|v| v * c).collect(), self.noise)
    }
}

/// Noise request for [`observe`]. A non-finite SNR (`+∞`) means noiseless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    None,
    SnrDb(f64),
}

impl Noise {
    pub fn from_snr(snr_db: f64) -> Self {
        if snr_db.is_finite() {
            Noise::SnrDb(snr_db)
        } else {
            Noise::None
        }
    }
}

/// bᵢ = |(Ax)ᵢ|, or with intensity noise bᵢ = √max(0, |(Ax)ᵢ|² + ηᵢ) where
/// ηᵢ ~ N(0, σ²) and σ² = ‖Ax‖² / (m·10^{SNR/10}).
pub fn observe<R: Rng + ?Sized>(
    model: &MeasurementModel,
    x: &SignalVector,
    noise: Noise,
    rng: &mut R,
) -> Result<Observation> {
    let u = model.forward(x)?;
    let snr_db = match noise {
        Noise::SnrDb(s) if s.is_finite() => s,
        _ => return Observation::new(u.iter().map(|v| v.norm()).collect()),
    };
    let energy = norm_sqr(&u);
    if x.norm_sqr() == 0.0 || energy == 0.0 {
        return Err(Error::Domain(
            "noisy observation of a signal with zero measurement energy".into(),
        ));
    }
    let m = u.len() as f64;
    let sigma2 = energy / (m * 10f64.powf(snr_db / 10.0));
    let normal = Normal::new(0.0, sigma2.sqrt())
        .map_err(|e| Error::Domain(format!("noise distribution: {e}")))?;
    let b = u
        .iter()
        .map(|v| (v.norm_sqr() + normal.sample(rng)).max(0.0).sqrt())
        .collect();
    Observation::with_meta(b, NoiseMeta::GaussianIntensity { snr_db, sigma2 })
}
