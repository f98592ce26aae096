//! Multi-dimensional FFT on periodic boxes stored with the first coordinate
//! varying fastest.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

pub(crate) fn fft_nd(data: &mut [Complex64], side: usize, dim: usize, inverse: bool) {
    debug_assert_eq!(data.len(), side.pow(dim as u32));
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(side)
    } else {
        planner.plan_fft_forward(side)
    };
    let mut line = vec![Complex64::new(0.0, 0.0); side];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut stride = 1usize;
    for _ in 0..dim {
        let block = stride * side;
        for base in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[start + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, v) in line.iter().enumerate() {
                    data[start + k * stride] = *v;
                }
            }
        }
        stride = block;
    }
}

/// Multi-index of a flat position, first coordinate fastest.
pub(crate) fn unflatten(mut index: usize, side: usize, out: &mut [usize]) {
    for o in out.iter_mut() {
        *o = index % side;
        index /= side;
    }
}
