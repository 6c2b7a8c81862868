//! FFT helpers on the periodic grid.
//!
//! Conventions: `forward` is the unnormalized DFT `û_κ = Σ_j u_j e^{-iκx_j}`,
//! `inverse` includes the `1/n`, so `inverse(forward(u)) = u`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

thread_local! {
    static PLANS: RefCell<HashMap<usize, Plans>> = RefCell::new(HashMap::new());
}

fn plans(n: usize) -> Plans {
    PLANS.with(|cell| {
        cell.borrow_mut()
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
            })
            .clone()
    })
}

pub fn forward(data: &mut [Complex64]) {
    plans(data.len()).0.process(data);
}

pub fn inverse(data: &mut [Complex64]) {
    let n = data.len();
    plans(n).1.process(data);
    let s = 1.0 / n as f64;
    data.iter_mut().for_each(|v| *v *= s);
}

/// Signed integer frequency index of FFT bin `j` (`0, 1, .., n/2-1, -n/2, .., -1`).
pub fn frequency_index(j: usize, n: usize) -> i64 {
    if j < n.div_ceil(2) {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Angular wavenumbers `2πκ/period` in FFT order.
pub fn wavenumbers(n: usize, period: f64) -> Vec<f64> {
    let base = 2.0 * PI / period;
    (0..n).map(|j| base * frequency_index(j, n) as f64).collect()
}

pub fn to_complex(real: &[f64]) -> Vec<Complex64> {
    real.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// Spectral derivative of order `k` of a real periodic sample vector.
///
/// For odd `k` the Nyquist bin is dropped so the result stays real.
pub fn spectral_derivative(samples: &[f64], period: f64, k: u32) -> Vec<f64> {
    let n = samples.len();
    let mut buf = to_complex(samples);
    forward(&mut buf);
    let kap = wavenumbers(n, period);
    for (j, v) in buf.iter_mut().enumerate() {
        if k % 2 == 1 && n % 2 == 0 && j == n / 2 {
            *v = Complex64::new(0.0, 0.0);
            continue;
        }
        *v *= Complex64::new(0.0, kap[j]).powu(k);
    }
    inverse(&mut buf);
    buf.iter().map(|v| v.re).collect()
}

/// Trigonometric interpolant built from real samples.
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    period: f64,
    /// Normalized coefficients `û_κ / n` for κ in FFT order.
    coeffs: Vec<Complex64>,
}

impl TrigInterpolant {
    pub fn new(samples: &[f64], period: f64) -> Self {
        let n = samples.len();
        let mut buf = to_complex(samples);
        forward(&mut buf);
        let s = 1.0 / n as f64;
        buf.iter_mut().for_each(|v| *v *= s);
        if n % 2 == 0 {
            // Split the Nyquist term symmetrically so the interpolant is real.
            buf[n / 2] *= 0.5;
        }
        TrigInterpolant { period, coeffs: buf }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// k-th derivative of the interpolant at `x`.
    pub fn eval_derivative(&self, x: f64, k: u32) -> f64 {
        let n = self.coeffs.len();
        let base = 2.0 * PI / self.period;
        let mut acc = 0.0;
        for (j, c) in self.coeffs.iter().enumerate() {
            let kappa = base * frequency_index(j, n) as f64;
            let phase = Complex64::from_polar(1.0, kappa * x);
            let factor = Complex64::new(0.0, kappa).powu(k);
            acc += (c * factor * phase).re;
            if n % 2 == 0 && j == n / 2 {
                // Conjugate Nyquist partner at +n/2.
                let phase = Complex64::from_polar(1.0, -kappa * x);
                let factor = Complex64::new(0.0, -kappa).powu(k);
                acc += (c * factor * phase).re;
            }
        }
        acc
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_derivative(x, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn derivative_of_trig_polynomial() {
        let n = 64;
        let xs: Vec<f64> = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
        let f: Vec<f64> = xs.iter().map(|x| (3.0 * x).sin() + 0.5 * x.cos()).collect();
        let d1 = spectral_derivative(&f, 2.0 * PI, 1);
        let d2 = spectral_derivative(&f, 2.0 * PI, 2);
        for (j, x) in xs.iter().enumerate() {
            assert_relative_eq!(d1[j], 3.0 * (3.0 * x).cos() - 0.5 * x.sin(), epsilon = 1e-12);
            assert_relative_eq!(d2[j], -9.0 * (3.0 * x).sin() - 0.5 * x.cos(), epsilon = 1e-11);
        }
    }

    #[test]
    fn interpolant_reproduces_off_grid_values() {
        let n = 32;
        let period = 3.0;
        let w = 2.0 * PI / period;
        let f: Vec<f64> = (0..n)
            .map(|j| {
                let x = period * j as f64 / n as f64;
                (w * x).cos() + 0.25 * (2.0 * w * x).sin()
            })
            .collect();
        let it = TrigInterpolant::new(&f, period);
        for &x in &[0.1, 1.234, 2.9] {
            let exact = (w * x).cos() + 0.25 * (2.0 * w * x).sin();
            assert_relative_eq!(it.eval(x), exact, epsilon = 1e-13);
            let d = -w * (w * x).sin() + 0.5 * w * (2.0 * w * x).cos();
            assert_relative_eq!(it.eval_derivative(x, 1), d, epsilon = 1e-12);
        }
    }

    #[test]
    fn roundtrip() {
        let mut v: Vec<Complex64> = (0..16).map(|j| Complex64::new(j as f64, -(j as f64) * 0.5)).collect();
        let orig = v.clone();
        forward(&mut v);
        inverse(&mut v);
        for (a, b) in v.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
