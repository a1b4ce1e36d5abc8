//! The real-field gradient kernel f(x, b) = c(|x|, b)·x, so that the
//! per-measurement gradient is f(aᵢ'z, bᵢ)·aᵢ, and numerical checks of the
//! four structural properties the convergence argument relies on.

use std::fmt;

use rand::Rng;

use super::{saf_weight, SafParams};

/// f(x, b) for real x.
pub fn kernel_f(x: f64, b: f64, params: &SafParams) -> f64 {
    saf_weight(x.abs(), b, params) * x
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    /// Bound the worst value is compared against.
    pub bound: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelReport {
    pub checks: Vec<PropertyCheck>,
}

impl KernelReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for KernelReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<4} {:<44} worst={:+.6e} bound={:+.1e} n={}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.worst,
                c.bound,
                c.evaluations
            )?;
        }
        Ok(())
    }
}

/// Tolerance absorbing floating-point rounding in the sign/ratio checks.
const ROUNDING: f64 = 1e-12;

/// Evaluates the kernel on `samples` random (x, b) pairs per property and on
/// a `grid`-point lattice over [−0.2, 0.2] (with b = 1) for the quadratic
/// lower bound.
///
/// 1. oddness: max |f(x,b) + f(−x,b)| ≤ 1e-12;
/// 2. f(±b + x, b)·x ≥ 0 for x ∈ [−b, b];
/// 3. f(±1 + x, 1)·x − 0.18x² ≥ 0 for x ∈ [−0.2, 0.2];
/// 4. |f(±b + x, b) / x| ≤ 1.
pub fn verify_kernel_properties<R: Rng + ?Sized>(
    samples: usize,
    grid: usize,
    params: &SafParams,
    rng: &mut R,
) -> KernelReport {
    let samples = samples.max(1);
    let grid = grid.max(2);
    let f = |x: f64, b: f64| kernel_f(x, b, params);
    let draw_b = |rng: &mut R| 10f64.powf(rng.random_range(-3.0..3.0));
    let sign = |rng: &mut R| if rng.random_bool(0.5) { 1.0 } else { -1.0 };

    let mut odd = 0.0f64;
    for _ in 0..samples {
        let b = draw_b(rng);
        let x = rng.random_range(-10.0..10.0) * b;
        odd = odd.max((f(x, b) + f(-x, b)).abs() / b);
    }

    let mut sign_min = f64::INFINITY;
    for _ in 0..samples {
        let b = draw_b(rng);
        let s = sign(rng);
        let x = rng.random_range(-1.0..=1.0) * b;
        // Normalized by b² so the bound is scale-free.
        sign_min = sign_min.min(f(s * b + x, b) * x / (b * b));
    }

    let mut quad_min = f64::INFINITY;
    for i in 0..grid {
        let x = -0.2 + 0.4 * i as f64 / (grid - 1) as f64;
        for s in [1.0, -1.0] {
            quad_min = quad_min.min(f(s + x, 1.0) * x - 0.18 * x * x);
        }
    }

    let mut ratio_max = 0.0f64;
    for _ in 0..samples {
        let b = draw_b(rng);
        let s = sign(rng);
        let x = rng.random_range(-10.0..10.0) * b;
        if x == 0.0 {
            continue;
        }
        ratio_max = ratio_max.max((f(s * b + x, b) / x).abs());
    }

    KernelReport {
        checks: vec![
            PropertyCheck {
                name: "P1 oddness |f(x,b)+f(-x,b)|/b",
                passed: odd <= ROUNDING,
                worst: odd,
                bound: ROUNDING,
                evaluations: samples,
            },
            PropertyCheck {
                name: "P2 f(+-b+x,b)x/b^2 >= 0 on [-b,b]",
                passed: sign_min >= -ROUNDING,
                worst: sign_min,
                bound: -ROUNDING,
                evaluations: samples,
            },
            PropertyCheck {
                name: "P3 f(+-1+x,1)x-0.18x^2 >= 0 on [-.2,.2]",
                passed: quad_min >= -ROUNDING,
                worst: quad_min,
                bound: -ROUNDING,
                evaluations: 2 * grid,
            },
            PropertyCheck {
                name: "P4 |f(+-b+x,b)/x| <= 1",
                passed: ratio_max <= 1.0 + ROUNDING,
                worst: ratio_max,
                bound: 1.0 + ROUNDING,
                evaluations: samples,
            },
        ],
    }
}
