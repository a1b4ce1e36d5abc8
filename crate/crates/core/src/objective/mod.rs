//! Amplitude-based losses and their gradients.
//!
//! Every objective here has the form ℓ(z) = (1/2m) Σ ρ(|uᵢ|, bᵢ) with
//! u = forward(z), and its gradient factors as (1/m)·adjoint(c ⊙ u) with a
//! real weight cᵢ per measurement. Only the scalar pair (ρ, c) differs
//! between the smooth amplitude loss and the AF/WF baselines, so dense and
//! CDP models, real and complex fields, all share one evaluation path.
//!
//! For complex signals the returned gradient is 2·∂ℓ/∂z̄, i.e. the gradient
//! of ℓ viewed as a function of (Re z, Im z). The directional derivative
//! along d is then Re⟨∇ℓ(z), d⟩ in both fields.

mod kernel;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measurement::{MeasurementModel, Observation};
use crate::numerics::SignalVector;

pub use kernel::{kernel_f, verify_kernel_properties, KernelReport, PropertyCheck};

/// Shape parameters of the smooth surrogate gₖ,ε(x) = (|x|ᵏ + εᵏ)^{1/k}
/// with per-measurement ε = γ·bᵢ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafParams {
    k: f64,
    gamma: f64,
}

impl Default for SafParams {
    fn default() -> Self {
        SafParams { k: 4.0, gamma: 1.0 }
    }
}

impl SafParams {
    pub fn new(k: f64, gamma: f64) -> Result<Self> {
        if !(k.is_finite() && k >= 2.0) {
            return Err(Error::InvalidConfig(format!("k must be ≥ 2, got {k}")));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be ≥ 0, got {gamma}"
            )));
        }
        Ok(SafParams { k, gamma })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// (|x|ᵏ + epsᵏ)^{1/k}, evaluated with the larger of |x| and eps factored out.
pub fn smooth_abs(x: f64, eps: f64, k: f64) -> f64 {
    let a = x.abs();
    let s = a.max(eps);
    if s == 0.0 {
        return 0.0;
    }
    let (p, q) = (a / s, eps / s);
    let inner = if k == 4.0 {
        let (p2, q2) = (p * p, q * q);
        (p2 * p2 + q2 * q2).sqrt().sqrt()
    } else if k == 2.0 {
        (p * p + q * q).sqrt()
    } else {
        (p.powf(k) + q.powf(k)).powf(1.0 / k)
    };
    s * inner
}

/// Real weight cᵢ multiplying uᵢ in the smooth-loss gradient:
///
/// c = (g(|u|) − g(b)) · (|u|ᵏ + γᵏbᵏ)^{1/k−1} · |u|^{k−2}.
///
/// Rewritten as (1 − g(b)/g(|u|)) · (|u|/g(|u|))^{k−2}, every factor is
/// bounded, so nothing overflows for |u| ≫ ε or underflows for |u| ≪ ε.
pub fn saf_weight(u_abs: f64, b: f64, params: &SafParams) -> f64 {
    let k = params.k;
    let eps = params.gamma * b;
    let gu = smooth_abs(u_abs, eps, k);
    if gu == 0.0 {
        return 0.0;
    }
    let gb = smooth_abs(b, eps, k);
    let r = u_abs / gu;
    let tail = if k == 4.0 {
        r * r
    } else if k == 2.0 {
        1.0
    } else {
        r.powf(k - 2.0)
    };
    (1.0 - gb / gu) * tail
}

/// Which loss drives the descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectiveKind {
    /// Smooth amplitude loss (1/2m) Σ (g(|uᵢ|) − g(bᵢ))².
    Saf(SafParams),
    /// Amplitude loss (1/2m) Σ (|uᵢ| − bᵢ)²; weight 0 where uᵢ = 0.
    Af,
    /// Intensity loss (1/2m) Σ (|uᵢ|² − bᵢ²)².
    Wf,
}

impl Default for ObjectiveKind {
    fn default() -> Self {
        ObjectiveKind::Saf(SafParams::default())
    }
}

impl ObjectiveKind {
    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveKind::Saf(_) => "saf",
            ObjectiveKind::Af => "af",
            ObjectiveKind::Wf => "wf",
        }
    }

    /// Loss summand ρ(|u|, b) and gradient weight c(|u|, b).
    #[inline]
    pub fn term(&self, u_abs: f64, b: f64) -> (f64, f64) {
        match self {
            ObjectiveKind::Saf(p) => {
                let eps = p.gamma * b;
                let d = smooth_abs(u_abs, eps, p.k) - smooth_abs(b, eps, p.k);
                (d * d, saf_weight(u_abs, b, p))
            }
            ObjectiveKind::Af => {
                let d = u_abs - b;
                let c = if u_abs > 0.0 { d / u_abs } else { 0.0 };
                (d * d, c)
            }
            ObjectiveKind::Wf => {
                let d = u_abs * u_abs - b * b;
                (d * d, 2.0 * d)
            }
        }
    }

    /// Loss from precomputed measurements u = forward(z).
    pub(crate) fn loss_from_forward(&self, u: &[Complex64], b: &[f64]) -> f64 {
        let sum: f64 = u.iter().zip(b).map(|(v, bi)| self.term(v.norm(), *bi).0).sum();
        sum / (2.0 * b.len() as f64)
    }

    /// Gradient from precomputed measurements, already field-projected.
    pub(crate) fn gradient_from_forward(
        &self,
        model: &MeasurementModel,
        u: &[Complex64],
        b: &[f64],
    ) -> Vec<Complex64> {
        let inv_m = 1.0 / b.len() as f64;
        let weighted: Vec<Complex64> = u
            .iter()
            .zip(b)
            .map(|(v, bi)| v * (self.term(v.norm(), *bi).1 * inv_m))
            .collect();
        model.adjoint_raw(&weighted)
    }

    fn prepare(
        &self,
        model: &MeasurementModel,
        obs: &Observation,
        z: &SignalVector,
    ) -> Result<Vec<Complex64>> {
        if obs.len() != model.m() {
            return Err(Error::dim("observation vs model", model.m(), obs.len()));
        }
        model.forward(z)
    }

    pub fn loss(&self, model: &MeasurementModel, obs: &Observation, z: &SignalVector) -> Result<f64> {
        let u = self.prepare(model, obs, z)?;
        Ok(self.loss_from_forward(&u, obs.amplitudes()))
    }

    pub fn gradient(
        &self,
        model: &MeasurementModel,
        obs: &Observation,
        z: &SignalVector,
    ) -> Result<SignalVector> {
        let u = self.prepare(model, obs, z)?;
        Ok(SignalVector::from_raw(
            model.field(),
            self.gradient_from_forward(model, &u, obs.amplitudes()),
        ))
    }

    /// Loss and gradient sharing one forward pass.
    pub fn evaluate(
        &self,
        model: &MeasurementModel,
        obs: &Observation,
        z: &SignalVector,
    ) -> Result<(f64, SignalVector)> {
        let u = self.prepare(model, obs, z)?;
        let b = obs.amplitudes();
        Ok((
            self.loss_from_forward(&u, b),
            SignalVector::from_raw(model.field(), self.gradient_from_forward(model, &u, b)),
        ))
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    /// Parses `saf`, `af` or `wf`; `saf` gets the default (k, γ).
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "saf" => Ok(ObjectiveKind::default()),
            "af" => Ok(ObjectiveKind::Af),
            "wf" => Ok(ObjectiveKind::Wf),
            other => Err(Error::InvalidConfig(format!(
                "unknown algorithm `{other}` (expected saf, af or wf)"
            ))),
        }
    }
}

pub fn saf_loss(
    model: &MeasurementModel,
    obs: &Observation,
    z: &SignalVector,
    params: &SafParams,
) -> Result<f64> {
    ObjectiveKind::Saf(*params).loss(model, obs, z)
}

pub fn saf_grad(
    model: &MeasurementModel,
    obs: &Observation,
    z: &SignalVector,
    params: &SafParams,
) -> Result<SignalVector> {
    ObjectiveKind::Saf(*params).gradient(model, obs, z)
}

pub fn af_loss(model: &MeasurementModel, obs: &Observation, z: &SignalVector) -> Result<f64> {
    ObjectiveKind::Af.loss(model, obs, z)
}

pub fn af_grad(
    model: &MeasurementModel,
    obs: &Observation,
    z: &SignalVector,
) -> Result<SignalVector> {
    ObjectiveKind::Af.gradient(model, obs, z)
}

pub fn wf_loss(model: &MeasurementModel, obs: &Observation, z: &SignalVector) -> Result<f64> {
    ObjectiveKind::Wf.loss(model, obs, z)
}

pub fn wf_grad(
    model: &MeasurementModel,
    obs: &Observation,
    z: &SignalVector,
) -> Result<SignalVector> {
    ObjectiveKind::Wf.gradient(model, obs, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{build_gaussian_model, observe, DenseModel, Noise};
    use crate::numerics::{inner, sample_gaussian_vector, Field, RngSeed};

    fn scalar_model(a: f64) -> MeasurementModel {
        MeasurementModel::Dense(
            DenseModel::from_rows(Field::Real, 1, 1, vec![Complex64::new(a, 0.0)]).unwrap(),
        )
    }

    #[test]
    fn smooth_abs_cases() {
        assert_eq!(smooth_abs(0.0, 1.0, 4.0), 1.0);
        assert_eq!(smooth_abs(-3.5, 0.0, 4.0), 3.5);
        assert!((smooth_abs(1.0, 1.0, 4.0) - 2f64.powf(0.25)).abs() < 1e-15);
        assert!((smooth_abs(1.0, 1.0, 4.0) - 1.189207115002721).abs() < 1e-15);
        // General-k path agrees with the direct formula.
        let direct = (2f64.powf(3.0) + 0.5f64.powf(3.0)).powf(1.0 / 3.0);
        assert!((smooth_abs(2.0, 0.5, 3.0) - direct).abs() < 1e-15);
        // No overflow where the direct formula would.
        assert!((smooth_abs(1e100, 1e99, 4.0) / 1e100 - (1.0 + 1e-4f64).powf(0.25)).abs() < 1e-15);
        assert_eq!(smooth_abs(0.0, 0.0, 4.0), 0.0);
    }

    #[test]
    fn saf_weight_cases() {
        let p = SafParams::default();
        assert!(saf_weight(1.7, 1.7, &p).abs() < 1e-15);
        assert_eq!(saf_weight(0.0, 2.0, &p), 0.0);
        assert_eq!(saf_weight(0.0, 0.0, &p), 0.0);
        assert!(saf_weight(1e-300, 0.0, &SafParams::new(4.0, 0.0).unwrap()).is_finite());
        // f(2,1) = c(2,1)·2, reference from direct evaluation of
        // ((x⁴+y⁴)^{1/4} − 2^{1/4}y)(x⁴+y⁴)^{−3/4}x³ in extended precision.
        assert!((saf_weight(2.0, 1.0, &p) * 2.0 - 0.8039384578123494).abs() < 1e-9);
        // Large and tiny magnitudes stay finite.
        assert!(saf_weight(1e200, 1.0, &p).is_finite());
        assert!(saf_weight(1e-200, 1.0, &p).is_finite());
        assert!(SafParams::new(1.5, 1.0).is_err());
        assert!(SafParams::new(4.0, -1.0).is_err());
    }

    #[test]
    fn one_dimensional_loss_and_gradient() {
        let model = scalar_model(1.0);
        let obs = Observation::new(vec![1.0]).unwrap();
        let z = SignalVector::real([2.0]).unwrap();
        let p = SafParams::default();
        // ½(17^{1/4} − 2^{1/4})²; reference value from 40-digit arithmetic.
        let expect = 0.5 * (17f64.powf(0.25) - 2f64.powf(0.25)).powi(2);
        assert!((saf_loss(&model, &obs, &z, &p).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.3539231912289598).abs() < 1e-15);
        let g = saf_grad(&model, &obs, &z, &p).unwrap();
        assert!((g.as_slice()[0].re - 0.8039384578123494).abs() < 1e-9);
    }

    #[test]
    fn truth_is_a_stationary_global_minimum() {
        for field in [Field::Real, Field::Complex] {
            let mut rng = RngSeed::new(21, 0).rng();
            let model = build_gaussian_model(60, 10, field, &mut rng).unwrap();
            let x = sample_gaussian_vector(10, field, &mut rng).unwrap();
            let obs = observe(&model, &x, Noise::None, &mut rng).unwrap();
            for kind in [ObjectiveKind::default(), ObjectiveKind::Af, ObjectiveKind::Wf] {
                let (l, g) = kind.evaluate(&model, &obs, &x).unwrap();
                assert!(l < 1e-24, "{kind}: {l}");
                assert!(g.norm() < 1e-12 * x.norm().max(1.0) * 10.0, "{kind}: {}", g.norm());
            }
            if field == Field::Complex {
                let xr = x.scaled(Complex64::from_polar(1.0, 0.77)).unwrap();
                assert!(saf_loss(&model, &obs, &xr, &SafParams::default()).unwrap() < 1e-24);
            }
        }
    }

    #[test]
    fn zero_gamma_reduces_to_amplitude_loss() {
        let mut rng = RngSeed::new(22, 0).rng();
        let model = build_gaussian_model(40, 8, Field::Complex, &mut rng).unwrap();
        let x = sample_gaussian_vector(8, Field::Complex, &mut rng).unwrap();
        let obs = observe(&model, &x, Noise::None, &mut rng).unwrap();
        let z = sample_gaussian_vector(8, Field::Complex, &mut rng).unwrap();
        let p0 = SafParams::new(4.0, 0.0).unwrap();
        let (a, b) = (
            saf_loss(&model, &obs, &z, &p0).unwrap(),
            af_loss(&model, &obs, &z).unwrap(),
        );
        assert!((a - b).abs() < 1e-12 * b.max(1.0));
        let (ga, gb) = (
            saf_grad(&model, &obs, &z, &p0).unwrap(),
            af_grad(&model, &obs, &z).unwrap(),
        );
        assert!(ga.axpy(-1.0, &gb).unwrap().norm() < 1e-12 * gb.norm().max(1.0));
    }

    #[test]
    fn amplitude_weight_vanishes_at_zero_measurement() {
        assert_eq!(ObjectiveKind::Af.term(0.0, 3.0), (9.0, 0.0));
        // z = 0 gives a zero gradient rather than NaN.
        let model = scalar_model(1.0);
        let obs = Observation::new(vec![1.0]).unwrap();
        let g = af_grad(&model, &obs, &SignalVector::real([0.0]).unwrap()).unwrap();
        assert_eq!(g.as_slice()[0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn intensity_loss_scaling() {
        // b = |Az|, evaluate at 2z: (1/2m)Σ(4|u|² − |u|²)² = (9/2m)Σ|u|⁴.
        let mut rng = RngSeed::new(23, 0).rng();
        let model = build_gaussian_model(30, 5, Field::Real, &mut rng).unwrap();
        let z = sample_gaussian_vector(5, Field::Real, &mut rng).unwrap();
        let obs = observe(&model, &z, Noise::None, &mut rng).unwrap();
        let u = model.forward(&z).unwrap();
        let expect = 9.0 / 60.0 * u.iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>();
        let got = wf_loss(&model, &obs, &z.scaled(Complex64::new(2.0, 0.0)).unwrap()).unwrap();
        assert!((got - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn losses_are_phase_invariant() {
        let mut rng = RngSeed::new(24, 0).rng();
        let model = build_gaussian_model(30, 6, Field::Complex, &mut rng).unwrap();
        let x = sample_gaussian_vector(6, Field::Complex, &mut rng).unwrap();
        let obs = observe(&model, &x, Noise::None, &mut rng).unwrap();
        let z = sample_gaussian_vector(6, Field::Complex, &mut rng).unwrap();
        let zr = z.scaled(Complex64::from_polar(1.0, 2.1)).unwrap();
        for kind in [ObjectiveKind::default(), ObjectiveKind::Af, ObjectiveKind::Wf] {
            let (a, b) = (kind.loss(&model, &obs, &z).unwrap(), kind.loss(&model, &obs, &zr).unwrap());
            assert!((a - b).abs() < 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn gradient_is_a_descent_direction() {
        let mut rng = RngSeed::new(25, 0).rng();
        let model = build_gaussian_model(50, 6, Field::Complex, &mut rng).unwrap();
        let x = sample_gaussian_vector(6, Field::Complex, &mut rng).unwrap();
        let obs = observe(&model, &x, Noise::None, &mut rng).unwrap();
        let z = sample_gaussian_vector(6, Field::Complex, &mut rng).unwrap();
        let kind = ObjectiveKind::default();
        let (l, g) = kind.evaluate(&model, &obs, &z).unwrap();
        let step = 1e-4;
        let l2 = kind.loss(&model, &obs, &z.axpy(-step, &g).unwrap()).unwrap();
        let predicted = step * inner(g.as_slice(), g.as_slice()).re;
        assert!(((l - l2) - predicted).abs() < 1e-2 * predicted);
    }

    #[test]
    fn observation_length_is_checked() {
        let model = scalar_model(1.0);
        let obs = Observation::new(vec![1.0, 2.0]).unwrap();
        let z = SignalVector::real([1.0]).unwrap();
        assert!(matches!(
            ObjectiveKind::Af.loss(&model, &obs, &z),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn parse_names() {
        assert_eq!("SAF".parse::<ObjectiveKind>().unwrap(), ObjectiveKind::default());
        assert_eq!("wf".parse::<ObjectiveKind>().unwrap(), ObjectiveKind::Wf);
        assert!("taf".parse::<ObjectiveKind>().is_err());
    }
}
