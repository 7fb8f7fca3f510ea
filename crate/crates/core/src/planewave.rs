//! Sums of plane waves Σ_j c_j e^{i k_j x_n} over uniform k- and x-grids.
//!
//! With `std` the sum is a chirp-z transform (Bluestein's algorithm on top of
//! rustfft), O((M+N) log(M+N)). Without it the sum runs directly with a
//! phase recurrence, O(M·N). Both evaluate the same expression.

use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

/// Reseed interval of the direct-sum phase recurrence.
const RESEED: usize = 64;

pub struct PlaneWaveSum {
    m: usize,
    n: usize,
    dk: f64,
    h: f64,
    #[cfg(feature = "std")]
    fast: Option<chirp::Chirp>,
}

impl core::fmt::Debug for PlaneWaveSum {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("PlaneWaveSum").field("m", &self.m).field("n", &self.n).finish()
    }
}

impl PlaneWaveSum {
    /// Plan for `m` wavenumbers spaced `dk` and `n` positions spaced `h`.
    pub fn new(m: usize, dk: f64, n: usize, h: f64) -> Self {
        PlaneWaveSum {
            m,
            n,
            dk,
            h,
            #[cfg(feature = "std")]
            fast: (m > 0 && n > 0).then(|| chirp::Chirp::new(m, dk, n, h)),
        }
    }

    pub fn positions(&self) -> usize {
        self.n
    }

    /// F_n = Σ_j c_j e^{i (k0 + j dk)(x0 + n h)}.
    pub fn eval(&self, c: &[Complex64], k0: f64, x0: f64) -> Vec<Complex64> {
        assert_eq!(c.len(), self.m, "coefficient count must match the plan");
        #[cfg(feature = "std")]
        if let Some(fast) = &self.fast {
            return fast.eval(c, k0, x0);
        }
        self.eval_direct(c, k0, x0)
    }

    /// Reference evaluation by direct summation.
    pub fn eval_direct(&self, c: &[Complex64], k0: f64, x0: f64) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| {
                let x = x0 + i as f64 * self.h;
                sum_at(c, k0, self.dk, x)
            })
            .collect()
    }
}

/// Σ_j c_j e^{i (k0 + j dk) x} at one position.
pub fn sum_at(c: &[Complex64], k0: f64, dk: f64, x: f64) -> Complex64 {
    let step = Complex64::from_polar(1.0, dk * x);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut phase = Complex64::new(1.0, 0.0);
    for (j, &cj) in c.iter().enumerate() {
        if j % RESEED == 0 {
            phase = Complex64::from_polar(1.0, (k0 + j as f64 * dk) * x);
        }
        acc += cj * phase;
        phase *= step;
    }
    acc
}

#[cfg(feature = "std")]
mod chirp {
    use super::*;
    use rustfft::{Fft, FftPlanner};
    use std::sync::Arc;

    pub struct Chirp {
        m: usize,
        n: usize,
        dk: f64,
        h: f64,
        len: usize,
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
        kernel: Vec<Complex64>,
    }

    /// e^{iθj²/2}. The phase reaches ~1e4 rad on the largest grids used,
    /// which still leaves ~1e-12 rad of rounding.
    fn chirp(theta: f64, j: usize) -> Complex64 {
        let jj = (j as f64) * (j as f64);
        Complex64::from_polar(1.0, 0.5 * theta * jj)
    }

    impl Chirp {
        pub fn new(m: usize, dk: f64, n: usize, h: f64) -> Self {
            let len = (m + n - 1).next_power_of_two();
            let mut planner = FftPlanner::new();
            let forward = planner.plan_fft_forward(len);
            let inverse = planner.plan_fft_inverse(len);
            let theta = dk * h;
            let mut kernel = vec![Complex64::new(0.0, 0.0); len];
            for (i, slot) in kernel.iter_mut().enumerate().take(n) {
                *slot = chirp(-theta, i);
            }
            for j in 1..m {
                kernel[len - j] = chirp(-theta, j);
            }
            forward.process(&mut kernel);
            Chirp { m, n, dk, h, len, forward, inverse, kernel }
        }

        // j·n = (j² + n² − (n − j)²)/2 turns the sum into a convolution.
        pub fn eval(&self, c: &[Complex64], k0: f64, x0: f64) -> Vec<Complex64> {
            let theta = self.dk * self.h;
            let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
            for (j, (slot, &cj)) in buf.iter_mut().zip(c).enumerate().take(self.m) {
                *slot = cj * Complex64::from_polar(1.0, j as f64 * self.dk * x0) * chirp(theta, j);
            }
            self.forward.process(&mut buf);
            for (b, k) in buf.iter_mut().zip(&self.kernel) {
                *b *= k;
            }
            self.inverse.process(&mut buf);
            let scale = 1.0 / self.len as f64;
            (0..self.n)
                .map(|i| {
                    let x = x0 + i as f64 * self.h;
                    buf[i] * chirp(theta, i) * Complex64::from_polar(scale, k0 * x)
                })
                .collect()
        }
    }
}
