//! FFT plans for one- and two-dimensional grids.
//!
//! Transforms are unnormalized in both directions; callers fold the `1/N`
//! factor into whatever multiplier they apply in momentum space.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::model::TransverseGrid;

/// Forward/inverse plans for a grid. Cheap to clone and shareable across
/// threads; all mutable state lives in [`Scratch`].
#[derive(Clone)]
pub struct Spectral {
    grid: TransverseGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Per-worker buffers for [`Spectral`].
#[derive(Debug, Default)]
pub struct Scratch {
    fft: Vec<Complex64>,
    transpose: Vec<Complex64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("grid", &self.grid)
            .finish()
    }
}

impl Spectral {
    pub fn new(grid: TransverseGrid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.n()),
            inverse: planner.plan_fft_inverse(grid.n()),
        }
    }

    pub fn grid(&self) -> &TransverseGrid {
        &self.grid
    }

    pub fn scratch(&self) -> Scratch {
        let fft_len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        let transpose = if self.grid.dim() == 2 {
            self.grid.len()
        } else {
            0
        };
        Scratch {
            fft: vec![Complex64::default(); fft_len],
            transpose: vec![Complex64::default(); transpose],
        }
    }

    /// `X(q) = sum_j x_j exp(-i q j dx)`.
    pub fn forward(&self, data: &mut [Complex64], scratch: &mut Scratch) {
        self.run(&*self.forward, data, scratch);
    }

    /// `x_j = sum_q X(q) exp(+i q j dx)`, no `1/N`.
    pub fn inverse(&self, data: &mut [Complex64], scratch: &mut Scratch) {
        self.run(&*self.inverse, data, scratch);
    }

    fn run(&self, plan: &dyn Fft<f64>, data: &mut [Complex64], scratch: &mut Scratch) {
        assert_eq!(data.len(), self.grid.len(), "buffer does not match grid");
        plan.process_with_scratch(data, &mut scratch.fft);
        if self.grid.dim() == 2 {
            let n = self.grid.n();
            transpose(data, &mut scratch.transpose, n);
            plan.process_with_scratch(&mut scratch.transpose, &mut scratch.fft);
            transpose(&scratch.transpose, data, n);
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const BLOCK: usize = 32;
    for rb in (0..n).step_by(BLOCK) {
        for cb in (0..n).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(n) {
                for c in cb..(cb + BLOCK).min(n) {
                    dst[c * n + r] = src[r * n + c];
                }
            }
        }
    }
}
