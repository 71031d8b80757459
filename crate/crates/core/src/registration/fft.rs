//! In-place 3D DFT over an x-fastest buffer.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

pub(crate) struct Fft3 {
    dims: [usize; 3],
    plans: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    pub(crate) fn new(dims: [usize; 3], direction: FftDirection) -> Self {
        let mut planner = FftPlanner::new();
        let plans = dims.map(|n| planner.plan_fft(n, direction));
        Fft3 { dims, plans }
    }

    /// Unnormalized transform; every 1D line is transformed independently so
    /// the output does not depend on the worker count.
    pub(crate) fn process(&self, data: &mut [Complex64]) {
        let [nx, ny, nz] = self.dims;
        assert_eq!(data.len(), nx * ny * nz);
        let slab = nx * ny;

        let px = &self.plans[0];
        data.par_chunks_mut(slab).for_each_init(
            || vec![Complex64::default(); px.get_inplace_scratch_len()],
            |scratch, s| px.process_with_scratch(s, scratch),
        );

        let py = &self.plans[1];
        data.par_chunks_mut(slab).for_each_init(
            || {
                (
                    vec![Complex64::default(); ny],
                    vec![Complex64::default(); py.get_inplace_scratch_len()],
                )
            },
            |(line, scratch), s| {
                for i in 0..nx {
                    for j in 0..ny {
                        line[j] = s[i + nx * j];
                    }
                    py.process_with_scratch(line, scratch);
                    for j in 0..ny {
                        s[i + nx * j] = line[j];
                    }
                }
            },
        );

        let pz = &self.plans[2];
        let mut lines = vec![Complex64::default(); data.len()];
        {
            let src: &[Complex64] = data;
            lines
                .par_chunks_mut(nz)
                .enumerate()
                .for_each_init(
                    || vec![Complex64::default(); pz.get_inplace_scratch_len()],
                    |scratch, (col, line)| {
                        for (k, v) in line.iter_mut().enumerate() {
                            *v = src[col + slab * k];
                        }
                        pz.process_with_scratch(line, scratch);
                    },
                );
        }
        let lines = &lines;
        data.par_chunks_mut(slab).enumerate().for_each(|(k, s)| {
            for (col, v) in s.iter_mut().enumerate() {
                *v = lines[col * nz + k];
            }
        });
    }
}
