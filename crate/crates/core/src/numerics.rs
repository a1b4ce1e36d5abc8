//! Field selection, signal vectors, phase-invariant metrics and the seeding
//! contract shared by every other module.
//!
//! All arithmetic is carried out on `Complex64` storage. A real-field vector
//! keeps every imaginary part at exactly zero, which lets the dense and
//! Fourier measurement paths share one representation.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Number field of a problem instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Real,
    Complex,
}

impl Field {
    pub fn is_real(self) -> bool {
        matches!(self, Field::Real)
    }

    /// Projects a value into the field (drops the imaginary part for `Real`).
    #[inline]
    pub fn project(self, v: Complex64) -> Complex64 {
        match self {
            Field::Real => Complex64::new(v.re, 0.0),
            Field::Complex => v,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Field::Real => "real",
            Field::Complex => "complex",
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "real" => Ok(Field::Real),
            "complex" => Ok(Field::Complex),
            other => Err(Error::InvalidConfig(format!(
                "unknown field `{other}` (expected real or complex)"
            ))),
        }
    }
}

/// A signal in ℝⁿ or ℂⁿ: the unknown, an iterate, or an error vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalVector {
    field: Field,
    data: Vec<Complex64>,
}

impl SignalVector {
    /// Validating constructor. Rejects empty or non-finite data, and real-field
    /// data with nonzero imaginary parts.
    pub fn new(field: Field, data: Vec<Complex64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Domain("signal dimension must be at least 1".into()));
        }
        if let Some(i) = data.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Domain(format!("non-finite signal entry at index {i}")));
        }
        if field.is_real() && data.iter().any(|v| v.im != 0.0) {
            return Err(Error::Domain(
                "real-field signal has a nonzero imaginary part".into(),
            ));
        }
        Ok(SignalVector { field, data })
    }

    pub fn real(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        Self::new(
            Field::Real,
            values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
        )
    }

    pub fn complex(values: Vec<Complex64>) -> Result<Self> {
        Self::new(Field::Complex, values)
    }

    pub fn zeros(field: Field, n: usize) -> Result<Self> {
        Self::new(field, vec![Complex64::new(0.0, 0.0); n])
    }

    /// Unchecked constructor for internal hot paths. The caller guarantees the
    /// field invariant; finiteness is tracked separately by the solver.
    pub(crate) fn from_raw(field: Field, data: Vec<Complex64>) -> Self {
        debug_assert!(!data.is_empty());
        SignalVector { field, data }
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Returns `c · self`. A non-real factor is rejected for real signals.
    pub fn scaled(&self, c: Complex64) -> Result<Self> {
        if self.field.is_real() && c.im != 0.0 {
            return Err(Error::Domain(
                "cannot scale a real signal by a complex factor".into(),
            ));
        }
        Ok(Self::from_raw(
            self.field,
            self.data.iter().map(|v| v * c).collect(),
        ))
    }

    /// `self + c · other`.
    pub fn axpy(&self, c: f64, other: &SignalVector) -> Result<Self> {
        check_compatible(self, other)?;
        Ok(Self::from_raw(
            self.field,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b * c)
                .collect(),
        ))
    }

    /// Inner product ⟨self, other⟩ = self' · other.
    pub fn inner(&self, other: &SignalVector) -> Result<Complex64> {
        check_compatible(self, other)?;
        Ok(inner(&self.data, &other.data))
    }
}

fn check_compatible(u: &SignalVector, v: &SignalVector) -> Result<()> {
    if u.field != v.field {
        return Err(Error::FieldMismatch {
            left: u.field,
            right: v.field,
        });
    }
    if u.len() != v.len() {
        return Err(Error::dim("signal pair", u.len(), v.len()));
    }
    Ok(())
}

/// ⟨u, v⟩ = Σ conj(uᵢ) vᵢ.
pub fn inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm_sqr(u: &[Complex64]) -> f64 {
    u.iter().map(|v| v.norm_sqr()).sum()
}

pub fn norm(u: &[Complex64]) -> f64 {
    norm_sqr(u).sqrt()
}

/// Distance between `u` and `v` modulo a global phase applied to `u`.
///
/// The optimal rotation is e^{jθ*} with θ* = arg⟨u, v⟩; for the real field
/// the rotation is restricted to a sign flip. The residual is evaluated
/// directly rather than through ‖u‖² + ‖v‖² − 2|⟨u,v⟩|, which loses half the
/// significant digits when u ≈ v.
pub fn dist_up_to_phase(u: &SignalVector, v: &SignalVector) -> Result<f64> {
    check_compatible(u, v)?;
    let (a, b) = (u.as_slice(), v.as_slice());
    match u.field {
        Field::Real => {
            let (mut minus, mut plus) = (0.0, 0.0);
            for (x, y) in a.iter().zip(b) {
                minus += (x.re - y.re).powi(2);
                plus += (x.re + y.re).powi(2);
            }
            Ok(minus.min(plus).sqrt())
        }
        Field::Complex => {
            let rot = phase_of(inner(a, b));
            Ok(a
                .iter()
                .zip(b)
                .map(|(x, y)| (x * rot - y).norm_sqr())
                .sum::<f64>()
                .sqrt())
        }
    }
}

/// Unit-modulus phase of `c`, or 1 when `c` is zero.
pub(crate) fn phase_of(c: Complex64) -> Complex64 {
    let r = c.norm();
    if r > 0.0 {
        c / r
    } else {
        Complex64::new(1.0, 0.0)
    }
}

/// Normalized mean-square error dist²(z, x) / ‖x‖².
pub fn nmse(z: &SignalVector, x: &SignalVector) -> Result<f64> {
    let nx = x.norm_sqr();
    if nx == 0.0 {
        return Err(Error::Domain("NMSE reference has zero norm".into()));
    }
    let d = dist_up_to_phase(z, x)?;
    Ok(d * d / nx)
}

/// Reproducible randomness key. Identical `(seed, stream_id)` pairs yield
/// identical sample sequences regardless of which worker draws them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngSeed {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngSeed { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Child key for an independent sub-stream (model, noise, init start...).
    pub fn derive(&self, label: u64) -> RngSeed {
        RngSeed {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(label)),
        }
    }
}

/// SplitMix64 finalizer; a bijective 64-bit mixer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One standard Gaussian draw in the given field: N(0,1) or CN(0,1).
#[inline]
pub fn gaussian_scalar<R: Rng + ?Sized>(field: Field, rng: &mut R) -> Complex64 {
    match field {
        Field::Real => Complex64::new(rng.sample(StandardNormal), 0.0),
        Field::Complex => {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        }
    }
}

/// i.i.d. N(0, Iₙ) (real) or CN(0, Iₙ) (complex) vector.
pub fn sample_gaussian_vector<R: Rng + ?Sized>(
    n: usize,
    field: Field,
    rng: &mut R,
) -> Result<SignalVector> {
    if n == 0 {
        return Err(Error::Domain("signal dimension must be at least 1".into()));
    }
    Ok(SignalVector::from_raw(
        field,
        (0..n).map(|_| gaussian_scalar(field, rng)).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dist_basic_cases() {
        let x = SignalVector::real([1.0, -2.0, 3.0]).unwrap();
        let neg = x.scaled(c(-1.0, 0.0)).unwrap();
        assert_eq!(dist_up_to_phase(&x, &x).unwrap(), 0.0);
        assert_eq!(dist_up_to_phase(&neg, &x).unwrap(), 0.0);

        let u = SignalVector::real([1.0, 0.0]).unwrap();
        let v = SignalVector::real([0.0, 1.0]).unwrap();
        assert!((dist_up_to_phase(&u, &v).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn nmse_cases() {
        let x = SignalVector::complex(vec![c(1.0, 2.0), c(-0.5, 0.25), c(3.0, -1.0)]).unwrap();
        assert_eq!(nmse(&x, &x).unwrap(), 0.0);
        let two = x.scaled(c(2.0, 0.0)).unwrap();
        assert!((nmse(&two, &x).unwrap() - 1.0).abs() < 1e-14);
        let rot = x
            .scaled(Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_3))
            .unwrap();
        assert!(nmse(&rot, &x).unwrap() < 1e-28);

        let zero = SignalVector::zeros(Field::Complex, 3).unwrap();
        assert!(matches!(nmse(&x, &zero), Err(Error::Domain(_))));
    }

    #[test]
    fn mismatches_are_rejected() {
        let r = SignalVector::real([1.0, 2.0]).unwrap();
        let cpx = SignalVector::complex(vec![c(1.0, 0.0), c(2.0, 0.0)]).unwrap();
        let short = SignalVector::real([1.0]).unwrap();
        assert!(matches!(
            dist_up_to_phase(&r, &cpx),
            Err(Error::FieldMismatch { .. })
        ));
        assert!(matches!(
            dist_up_to_phase(&r, &short),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn construction_invariants() {
        assert!(SignalVector::real(Vec::<f64>::new()).is_err());
        assert!(SignalVector::real([1.0, f64::NAN]).is_err());
        assert!(SignalVector::new(Field::Real, vec![c(1.0, 1e-3)]).is_err());
        assert!(SignalVector::real([1.0]).unwrap().scaled(c(0.0, 1.0)).is_err());
    }

    #[test]
    fn gaussian_energy_per_entry() {
        for field in [Field::Real, Field::Complex] {
            let mut rng = RngSeed::new(11, 3).rng();
            let draws = 10_000;
            let n = 100;
            let mean: f64 = (0..draws)
                .map(|_| sample_gaussian_vector(n, field, &mut rng).unwrap().norm_sqr() / n as f64)
                .sum::<f64>()
                / draws as f64;
            assert!((mean - 1.0).abs() < 0.02, "{field}: {mean}");
        }
    }

    #[test]
    fn complex_entries_split_variance_evenly() {
        let mut rng = RngSeed::new(5, 0).rng();
        let v = sample_gaussian_vector(200_000, Field::Complex, &mut rng).unwrap();
        let n = v.len() as f64;
        let re2 = v.as_slice().iter().map(|z| z.re * z.re).sum::<f64>() / n;
        let im2 = v.as_slice().iter().map(|z| z.im * z.im).sum::<f64>() / n;
        assert!((re2 - 0.5).abs() < 0.01 && (im2 - 0.5).abs() < 0.01);
        assert!((re2 + im2 - 1.0).abs() < 0.02);
    }

    #[test]
    fn seeding_is_reproducible_and_streams_differ() {
        let key = RngSeed::new(42, 7);
        let a = sample_gaussian_vector(16, Field::Complex, &mut key.rng()).unwrap();
        let b = sample_gaussian_vector(16, Field::Complex, &mut key.rng()).unwrap();
        assert_eq!(a, b);
        let other = sample_gaussian_vector(16, Field::Complex, &mut key.derive(1).rng()).unwrap();
        assert_ne!(a, other);
    }

    /// Brute-force oracle: minimize over a uniform θ grid.
    fn grid_dist(u: &SignalVector, v: &SignalVector, points: usize) -> f64 {
        (0..points)
            .map(|k| {
                let rot = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / points as f64);
                u.as_slice()
                    .iter()
                    .zip(v.as_slice())
                    .map(|(a, b)| (a * rot - b).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn complex_vec(n: usize) -> impl Strategy<Value = SignalVector> {
        prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), n)
            .prop_map(|v| SignalVector::complex(v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap())
    }

    fn unit_box_vec(n: usize) -> impl Strategy<Value = SignalVector> {
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n)
            .prop_map(|v| SignalVector::complex(v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap())
    }

    proptest! {
        #[test]
        fn closed_form_matches_grid_search(u in unit_box_vec(4), v in unit_box_vec(4)) {
            // Entries in [-1,1] keep |<u,v>| <= 8, so the grid's squared-distance
            // excess is at most 8 (pi/1e4)^2 < 1e-6.
            let exact = dist_up_to_phase(&u, &v).unwrap();
            let grid = grid_dist(&u, &v, 10_000);
            prop_assert!(grid >= exact - 1e-12);
            prop_assert!(grid * grid - exact * exact < 1e-6);
        }

        #[test]
        fn dist_is_symmetric_and_phase_blind(
            u in complex_vec(5), v in complex_vec(5), a in 0.0..6.3f64, b in 0.0..6.3f64
        ) {
            let d = dist_up_to_phase(&u, &v).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert!((d - dist_up_to_phase(&v, &u).unwrap()).abs() < 1e-12);
            let ur = u.scaled(Complex64::from_polar(1.0, a)).unwrap();
            let vr = v.scaled(Complex64::from_polar(1.0, b)).unwrap();
            prop_assert!((d - dist_up_to_phase(&ur, &vr).unwrap()).abs() < 1e-12);
            prop_assert!(dist_up_to_phase(&ur, &u).unwrap() < 1e-12);
        }

        #[test]
        fn dist_triangle(u in complex_vec(3), v in complex_vec(3), w in complex_vec(3)) {
            let uw = dist_up_to_phase(&u, &w).unwrap();
            let uv = dist_up_to_phase(&u, &v).unwrap();
            let vw = dist_up_to_phase(&v, &w).unwrap();
            prop_assert!(uw <= uv + vw + 1e-10);
        }

        #[test]
        fn real_dist_triangle(
            u in prop::collection::vec(-3.0..3.0f64, 3),
            v in prop::collection::vec(-3.0..3.0f64, 3),
            w in prop::collection::vec(-3.0..3.0f64, 3),
        ) {
            let (u, v, w) = (
                SignalVector::real(u).unwrap(),
                SignalVector::real(v).unwrap(),
                SignalVector::real(w).unwrap(),
            );
            let uw = dist_up_to_phase(&u, &w).unwrap();
            prop_assert!(uw <= dist_up_to_phase(&u, &v).unwrap() + dist_up_to_phase(&v, &w).unwrap() + 1e-10);
            prop_assert!((dist_up_to_phase(&u, &v).unwrap() - dist_up_to_phase(&v, &u).unwrap()).abs() < 1e-12);
        }
    }
}
