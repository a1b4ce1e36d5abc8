use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Layout of the transform applied to a vectorized signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DftShape {
    /// Single n-point transform over the whole vector.
    OneD(usize),
    /// Separable transform over a row-major `rows × cols` image.
    TwoD { rows: usize, cols: usize },
}

impl DftShape {
    pub fn len(&self) -> usize {
        match *self {
            DftShape::OneD(n) => n,
            DftShape::TwoD { rows, cols } => rows * cols,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Unitary DFT: both directions are scaled by 1/√n so ‖F u‖ = ‖u‖.
#[derive(Clone)]
pub struct UnitaryDft {
    shape: DftShape,
    scale: f64,
    // (forward, inverse) pairs along the row axis and, for 2-D, the column axis.
    rows_fft: (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
    cols_fft: Option<(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>,
}

impl fmt::Debug for UnitaryDft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UnitaryDft").field("shape", &self.shape).finish()
    }
}

impl UnitaryDft {
    pub fn new(shape: DftShape) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        let (row_len, cols_fft) = match shape {
            DftShape::OneD(n) => (n, None),
            DftShape::TwoD { rows, cols } => (
                cols,
                Some((
                    planner.plan_fft_forward(rows),
                    planner.plan_fft_inverse(rows),
                )),
            ),
        };
        UnitaryDft {
            shape,
            scale: 1.0 / (shape.len() as f64).sqrt(),
            rows_fft: (
                planner.plan_fft_forward(row_len),
                planner.plan_fft_inverse(row_len),
            ),
            cols_fft,
        }
    }

    pub fn shape(&self) -> DftShape {
        self.shape
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.apply(buf, false);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.apply(buf, true);
    }

    fn apply(&self, buf: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(buf.len(), self.shape.len());
        let pick = |pair: &(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)| {
            if inverse {
                pair.1.clone()
            } else {
                pair.0.clone()
            }
        };
        // rustfft processes every contiguous chunk of the plan length.
        pick(&self.rows_fft).process(buf);
        if let (DftShape::TwoD { rows, cols }, Some(col_pair)) = (self.shape, &self.cols_fft) {
            let mut t = transpose(buf, rows, cols);
            pick(col_pair).process(&mut t);
            let back = transpose(&t, cols, rows);
            buf.copy_from_slice(&back);
        }
        for v in buf.iter_mut() {
            *v *= self.scale;
        }
    }
}

fn transpose(src: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = src[r * cols + c];
        }
    }
    out
}
