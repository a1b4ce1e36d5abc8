//! Weighted maximal-correlation initialization.
//!
//! The norm of x is estimated as η = √(Σbᵢ²/m); the direction is the leading
//! eigenvector of M = Σ_{i∈𝓘} √bᵢ aᵢaᵢ'/‖aᵢ‖², where 𝓘 holds the I largest
//! ratios bᵢ/‖aᵢ‖. M is only ever applied, never assembled.

use std::cmp::Ordering;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measurement::{MeasurementModel, Observation};
use crate::numerics::{dist_up_to_phase, gaussian_scalar, norm, Field, RngSeed, SignalVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig {
    /// |𝓘|; `None` means ⌊3m/13⌋ (at least 1).
    pub truncation: Option<usize>,
    pub power_iters_max: usize,
    pub power_tol: f64,
    pub rng: RngSeed,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            truncation: None,
            power_iters_max: 200,
            power_tol: 1e-6,
            rng: RngSeed::default(),
        }
    }
}

impl InitConfig {
    pub fn with_seed(rng: RngSeed) -> Self {
        InitConfig {
            rng,
            ..Default::default()
        }
    }

    pub fn truncation_for(&self, m: usize) -> usize {
        self.truncation.unwrap_or((3 * m / 13).max(1))
    }
}

/// η = √(mean bᵢ²). Returns 0 for an all-zero observation.
pub fn estimate_norm(obs: &Observation) -> f64 {
    let b = obs.amplitudes();
    (b.iter().map(|v| v * v).sum::<f64>() / b.len() as f64).sqrt()
}

/// Indices (0-based, ascending) of the `count` largest bᵢ/‖aᵢ‖. Ties go to
/// the lower index; zero rows are never selected.
pub fn select_top_indices(
    obs: &Observation,
    model: &MeasurementModel,
    count: usize,
) -> Result<Vec<usize>> {
    let m = model.m();
    if obs.len() != m {
        return Err(Error::dim("observation vs model", m, obs.len()));
    }
    if count == 0 || count > m {
        return Err(Error::InvalidConfig(format!(
            "truncation count {count} outside 1..={m}"
        )));
    }
    let b = obs.amplitudes();
    let mut scored: Vec<(usize, f64)> = (0..m)
        .filter_map(|i| {
            let r2 = model.row_norm_sqr(i);
            (r2 > 0.0).then(|| (i, b[i] / r2.sqrt()))
        })
        .collect();
    scored.sort_by(|a, c| {
        c.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then(a.0.cmp(&c.0))
    });
    scored.truncate(count);
    let mut idx: Vec<usize> = scored.into_iter().map(|(i, _)| i).collect();
    idx.sort_unstable();
    Ok(idx)
}

/// Outcome of a power iteration.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub vector: SignalVector,
    /// Rayleigh quotient ⟨v, Mv⟩.
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Leading eigenvector of a Hermitian PSD operator by power iteration from
/// a seeded random start. Stops once successive iterates are within
/// `power_tol` of each other up to phase. The result is unit-norm with its
/// largest-magnitude entry rotated to be real and positive.
pub fn leading_eigenvector<F>(
    n: usize,
    field: Field,
    mut apply: F,
    cfg: &InitConfig,
) -> Result<Eigenpair>
where
    F: FnMut(&[Complex64]) -> Vec<Complex64>,
{
    let mut rng = cfg.rng.rng();
    let start: Vec<Complex64> = (0..n).map(|_| gaussian_scalar(field, &mut rng)).collect();
    leading_eigenvector_from(SignalVector::new(field, start)?, &mut apply, cfg)
}

/// Power iteration from an explicit start vector.
pub fn leading_eigenvector_from<F>(
    start: SignalVector,
    apply: &mut F,
    cfg: &InitConfig,
) -> Result<Eigenpair>
where
    F: FnMut(&[Complex64]) -> Vec<Complex64>,
{
    let field = start.field();
    let mut v = normalized(start.into_vec()).ok_or(Error::DegenerateSpectrum)?;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.power_iters_max {
        iterations += 1;
        let next = normalized(apply(&v)).ok_or(Error::DegenerateSpectrum)?;
        let delta = dist_up_to_phase(
            &SignalVector::from_raw(field, next.clone()),
            &SignalVector::from_raw(field, v),
        )?;
        v = next;
        if delta < cfg.power_tol {
            converged = true;
            break;
        }
    }
    canonicalize_phase(&mut v);
    let mv = apply(&v);
    let value = crate::numerics::inner(&v, &mv).re;
    Ok(Eigenpair {
        vector: SignalVector::from_raw(field, v),
        value,
        iterations,
        converged,
    })
}

fn normalized(mut v: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let r = norm(&v);
    if !(r > 0.0 && r.is_finite()) {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= r);
    Some(v)
}

fn canonicalize_phase(v: &mut [Complex64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.norm_sqr() > v[best].norm_sqr() {
            best = i;
        }
    }
    let rot = crate::numerics::phase_of(v[best]).conj();
    v.iter_mut().for_each(|x| *x *= rot);
    v[best].im = 0.0;
}

/// Diagonal weights √bᵢ/‖aᵢ‖² on 𝓘 and zero elsewhere, so that
/// M·v = adjoint(w ⊙ forward(v)).
pub fn correlation_weights(
    model: &MeasurementModel,
    obs: &Observation,
    count: usize,
) -> Result<Vec<f64>> {
    let idx = select_top_indices(obs, model, count)?;
    let b = obs.amplitudes();
    let mut w = vec![0.0; model.m()];
    for i in idx {
        w[i] = b[i].sqrt() / model.row_norm_sqr(i);
    }
    Ok(w)
}

/// Applies M matrix-free.
pub fn apply_correlation(model: &MeasurementModel, weights: &[f64], v: &[Complex64]) -> Vec<Complex64> {
    let mut u = vec![Complex64::new(0.0, 0.0); model.m()];
    model.forward_raw(v, &mut u);
    for (ui, wi) in u.iter_mut().zip(weights) {
        *ui *= *wi;
    }
    model.adjoint_raw(&u)
}

/// z₀ = η · (leading eigenvector of M), with η rescaled by √step_scale so it
/// estimates ‖x‖ for models whose rows are not on the E‖aᵢ‖² = n scale
/// (unitary CDP gives mean bᵢ² = ‖x‖²/n).
pub fn initialize(
    model: &MeasurementModel,
    obs: &Observation,
    cfg: &InitConfig,
) -> Result<SignalVector> {
    if obs.len() != model.m() {
        return Err(Error::dim("observation vs model", model.m(), obs.len()));
    }
    let eta = estimate_norm(obs);
    if eta == 0.0 {
        return Err(Error::Domain("all observed amplitudes are zero".into()));
    }
    let weights = correlation_weights(model, obs, cfg.truncation_for(model.m()))?;
    let pair = leading_eigenvector(
        model.n(),
        model.field(),
        |v| apply_correlation(model, &weights, v),
        cfg,
    )?;
    let norm = eta * model.step_scale().sqrt();
    pair.vector.scaled(Complex64::new(norm, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{build_cdp_model, build_gaussian_model, observe, DenseModel, DftShape, Noise};
    use crate::numerics::{sample_gaussian_vector, inner};
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn dense(m: usize, n: usize, rows: &[f64]) -> MeasurementModel {
        MeasurementModel::Dense(
            DenseModel::from_rows(Field::Real, m, n, rows.iter().map(|v| c(*v)).collect()).unwrap(),
        )
    }

    #[test]
    fn norm_estimate() {
        let obs = Observation::new(vec![3.0, 4.0]).unwrap();
        assert!((estimate_norm(&obs) - 12.5f64.sqrt()).abs() < 1e-15);
        assert!((estimate_norm(&Observation::new(vec![2.5; 7]).unwrap()) - 2.5).abs() < 1e-15);
        assert_eq!(estimate_norm(&Observation::new(vec![0.0; 3]).unwrap()), 0.0);
    }

    #[test]
    fn norm_estimate_is_consistent_for_gaussians() {
        let mut rng = RngSeed::new(30, 0).rng();
        let model = build_gaussian_model(2500, 50, Field::Real, &mut rng).unwrap();
        let x = sample_gaussian_vector(50, Field::Real, &mut rng).unwrap();
        let obs = observe(&model, &x, Noise::None, &mut rng).unwrap();
        assert!((estimate_norm(&obs) / x.norm() - 1.0).abs() < 0.05);
    }

    #[test]
    fn top_index_selection() {
        let obs = Observation::new(vec![3.0, 4.0]).unwrap();
        let unit = dense(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(select_top_indices(&obs, &unit, 1).unwrap(), vec![1]);
        assert_eq!(select_top_indices(&obs, &unit, 2).unwrap(), vec![0, 1]);
        let skewed = dense(2, 1, &[1.0, 10.0]);
        assert_eq!(select_top_indices(&obs, &skewed, 1).unwrap(), vec![0]);
        // Ties resolve to the lower index; zero rows are skipped.
        let tied = Observation::new(vec![2.0, 2.0, 2.0]).unwrap();
        let with_zero = dense(3, 1, &[0.0, 1.0, 1.0]);
        assert_eq!(select_top_indices(&tied, &with_zero, 1).unwrap(), vec![1]);
        assert!(select_top_indices(&obs, &unit, 0).is_err());
        assert!(select_top_indices(&obs, &unit, 3).is_err());
    }

    #[test]
    fn power_iteration_on_diagonal() {
        let diag = [2.0, 1.0];
        let mut apply = |v: &[Complex64]| v.iter().zip(diag).map(|(x, d)| x * d).collect();
        let start = SignalVector::real([1.0, 1.0]).unwrap();
        let pair = leading_eigenvector_from(start, &mut apply, &InitConfig::default()).unwrap();
        let e1 = SignalVector::real([1.0, 0.0]).unwrap();
        assert!(dist_up_to_phase(&pair.vector, &e1).unwrap() < 1e-6);
        assert!(pair.converged);
        assert!((pair.value - 2.0).abs() < 1e-6);
    }

    #[test]
    fn identity_operator_converges_immediately() {
        let mut apply = |v: &[Complex64]| v.to_vec();
        let start = SignalVector::real([0.6, -0.8]).unwrap();
        let pair = leading_eigenvector_from(start, &mut apply, &InitConfig::default()).unwrap();
        assert_eq!(pair.iterations, 1);
        // Canonical phase: the largest entry is made positive.
        assert!((pair.vector.as_slice()[1].re - 0.8).abs() < 1e-15);
        assert!((pair.vector.as_slice()[0].re + 0.6).abs() < 1e-15);
    }

    #[test]
    fn zero_operator_is_degenerate() {
        let mut apply = |v: &[Complex64]| vec![Complex64::new(0.0, 0.0); v.len()];
        let start = SignalVector::real([1.0, 0.0]).unwrap();
        assert!(matches!(
            leading_eigenvector_from(start, &mut apply, &InitConfig::default()),
            Err(Error::DegenerateSpectrum)
        ));
    }

    #[test]
    fn identity_sensing_example() {
        // A = I₂, x = (3, 4): M = √3 e₁e₁' + 2 e₂e₂', so z₀ = √12.5 · e₂.
        let model = dense(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let x = SignalVector::real([3.0, 4.0]).unwrap();
        let obs = observe(&model, &x, Noise::None, &mut RngSeed::default().rng()).unwrap();
        let cfg = InitConfig {
            truncation: Some(2),
            power_tol: 1e-12,
            ..Default::default()
        };
        let z0 = initialize(&model, &obs, &cfg).unwrap();
        let expect = SignalVector::real([0.0, 12.5f64.sqrt()]).unwrap();
        assert!(dist_up_to_phase(&z0, &expect).unwrap() < 1e-6);
    }

    #[test]
    fn matrix_free_apply_matches_assembled_matrix() {
        for field in [Field::Real, Field::Complex] {
            let mut rng = RngSeed::new(31, 0).rng();
            let (m, n) = (120, 12);
            let model = build_gaussian_model(m, n, field, &mut rng).unwrap();
            let x = sample_gaussian_vector(n, field, &mut rng).unwrap();
            let obs = observe(&model, &x, Noise::None, &mut rng).unwrap();
            let w = correlation_weights(&model, &obs, 30).unwrap();
            let MeasurementModel::Dense(d) = &model else { unreachable!() };
            // Assemble M = Σ wᵢ aᵢ aᵢ', with row i of A equal to aᵢ'.
            let mut mat = vec![Complex64::new(0.0, 0.0); n * n];
            for i in 0..m {
                for r in 0..n {
                    for s in 0..n {
                        mat[r * n + s] += d.entry(i, r).conj() * d.entry(i, s) * w[i];
                    }
                }
            }
            let v = sample_gaussian_vector(n, field, &mut rng).unwrap();
            let got = apply_correlation(&model, &w, v.as_slice());
            for r in 0..n {
                let mut e: Complex64 = (0..n).map(|s| mat[r * n + s] * v.as_slice()[s]).sum();
                if field.is_real() {
                    e.im = 0.0;
                }
                assert!((got[r] - e).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn eigen_residual_is_small() {
        for field in [Field::Real, Field::Complex] {
            let mut rng = RngSeed::new(32, 1).rng();
            let model = build_gaussian_model(300, 20, field, &mut rng).unwrap();
            let x = sample_gaussian_vector(20, field, &mut rng).unwrap();
            let obs = observe(&model, &x, Noise::None, &mut rng).unwrap();
            let w = correlation_weights(&model, &obs, 69).unwrap();
            let cfg = InitConfig {
                power_iters_max: 5000,
                ..InitConfig::with_seed(RngSeed::new(1, 1))
            };
            let pair = leading_eigenvector(20, field, |v| apply_correlation(&model, &w, v), &cfg).unwrap();
            assert!(pair.converged);
            let mv = apply_correlation(&model, &w, pair.vector.as_slice());
            let resid: f64 = mv
                .iter()
                .zip(pair.vector.as_slice())
                .map(|(a, v)| (a - v * pair.value).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(resid <= 10.0 * cfg.power_tol * pair.value, "{resid} vs {}", pair.value);
        }
    }

    #[test]
    fn cdp_initializer_runs_matrix_free() {
        let mut rng = RngSeed::new(33, 0).rng();
        let model = build_cdp_model(DftShape::OneD(64), 6, Field::Complex, &mut rng).unwrap();
        let x = sample_gaussian_vector(64, Field::Complex, &mut rng).unwrap();
        let obs = observe(&model, &x, Noise::None, &mut rng).unwrap();
        let z0 = initialize(&model, &obs, &InitConfig::default()).unwrap();
        // Unitary blocks: Σ bᵢ² = K‖x‖² exactly, so the rescaled η is exact.
        assert!((estimate_norm(&obs) * 8.0 - x.norm()).abs() < 1e-12 * x.norm());
        assert!((z0.norm() - x.norm()).abs() < 1e-12 * x.norm());
        assert!(dist_up_to_phase(&z0, &x).unwrap() < 0.8 * x.norm());
    }

    #[test]
    fn scaling_observations_scales_the_initializer() {
        let mut rng = RngSeed::new(34, 0).rng();
        let model = build_gaussian_model(400, 40, Field::Complex, &mut rng).unwrap();
        let x = sample_gaussian_vector(40, Field::Complex, &mut rng).unwrap();
        let obs = observe(&model, &x, Noise::None, &mut rng).unwrap();
        let cfg = InitConfig::with_seed(RngSeed::new(2, 3));
        let z = initialize(&model, &obs, &cfg).unwrap();
        let z3 = initialize(&model, &obs.scaled(3.0).unwrap(), &cfg).unwrap();
        let expect = z.scaled(c(3.0)).unwrap();
        assert!(dist_up_to_phase(&z3, &expect).unwrap() < 1e-5 * z3.norm());
        let cos = inner(z.as_slice(), z3.as_slice()).norm() / (z.norm() * z3.norm());
        assert!(cos > 1.0 - 1e-10);
    }

    proptest! {
        #[test]
        fn selection_is_scale_invariant_and_permutation_equivariant(
            b in prop::collection::vec(0.0..10.0f64, 12),
            scale in 0.1..100.0f64,
            count in 1usize..12,
            shift in 0usize..12,
        ) {
            let rows: Vec<f64> = (0..12).map(|i| 1.0 + (i % 3) as f64).collect();
            let model = dense(12, 1, &rows);
            let obs = Observation::new(b.clone()).unwrap();
            let base = select_top_indices(&obs, &model, count).unwrap();
            let scaled = Observation::new(b.iter().map(|v| v * scale).collect()).unwrap();
            // Scaling may reorder exact ties only through rounding; compare scores instead.
            let score = |idx: &[usize]| {
                let mut s: Vec<f64> = idx.iter().map(|&i| b[i] / rows[i]).collect();
                s.sort_by(|a, c| a.partial_cmp(c).unwrap());
                s
            };
            let sel = select_top_indices(&scaled, &model, count).unwrap();
            prop_assert_eq!(score(&base), score(&sel));

            // Rotating measurements (rows and amplitudes together) rotates 𝓘.
            let perm: Vec<usize> = (0..12).map(|i| (i + shift) % 12).collect();
            let prow: Vec<f64> = perm.iter().map(|&i| rows[i]).collect();
            let pb: Vec<f64> = perm.iter().map(|&i| b[i]).collect();
            let psel = select_top_indices(&Observation::new(pb).unwrap(), &dense(12, 1, &prow), count).unwrap();
            let mut mapped: Vec<usize> = psel.iter().map(|&j| perm[j]).collect();
            mapped.sort_unstable();
            prop_assert_eq!(score(&mapped), score(&base));
        }
    }
}
