//! Small numerical building blocks shared by the stages.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub type C64 = Complex64;

/// One classical Runge–Kutta step for `y' = f(t, y)`.
pub fn rk4_step<F>(f: &F, t: f64, y: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let k1 = f(t, y);
    let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
    let k2 = f(t + 0.5 * h, &y2);
    let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
    let k3 = f(t + 0.5 * h, &y3);
    let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
    let k4 = f(t + h, &y4);
    (0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Angular frequencies matching the standard FFT output ordering for `n` samples spaced `d`.
pub fn fft_freq(n: usize, d: f64) -> Vec<f64> {
    let scale = 2.0 * std::f64::consts::PI / (n as f64 * d);
    (0..n)
        .map(|k| {
            let k = k as i64;
            let n = n as i64;
            let m = if k <= (n - 1) / 2 { k } else { k - n };
            m as f64 * scale
        })
        .collect()
}

/// Forward/inverse plan pair for a fixed length. The inverse is normalized.
#[derive(Clone)]
pub struct FftPair {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl FftPair {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, buf: &mut [C64]) {
        self.fwd.process(buf);
    }

    pub fn inverse(&self, buf: &mut [C64]) {
        self.inv.process(buf);
        let s = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|v| *v *= s);
    }
}

/// Coefficients of the 6th-order central first-derivative stencil (offsets 1..=3).
const D1_C6: [f64; 3] = [3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];

/// First derivative of uniformly sampled data. Sixth order in the interior, lower order
/// one-sided stencils within three samples of either end.
pub fn derivative_uniform<T>(v: &[T], h: f64) -> Vec<T>
where
    T: Copy
        + Default
        + std::ops::Add<Output = T>
        + std::ops::Sub<Output = T>
        + std::ops::Mul<f64, Output = T>,
{
    let n = v.len();
    let mut out = vec![T::default(); n];
    if n < 2 {
        return out;
    }
    if n < 7 {
        for i in 0..n {
            let (a, b) = if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            out[i] = (v[b] - v[a]) * (1.0 / ((b - a) as f64 * h));
        }
        return out;
    }
    for i in 3..n - 3 {
        let mut acc = T::default();
        for (k, c) in D1_C6.iter().enumerate() {
            acc = acc + (v[i + k + 1] - v[i - k - 1]) * *c;
        }
        out[i] = acc * (1.0 / h);
    }
    // fourth order one-sided / shifted stencils near the ends
    let fwd = |i: usize| -> T {
        (v[i] * (-25.0) + v[i + 1] * 48.0 - v[i + 2] * 36.0 + v[i + 3] * 16.0 - v[i + 4] * 3.0)
            * (1.0 / (12.0 * h))
    };
    let bwd = |i: usize| -> T {
        (v[i] * 25.0 - v[i - 1] * 48.0 + v[i - 2] * 36.0 - v[i - 3] * 16.0 + v[i - 4] * 3.0)
            * (1.0 / (12.0 * h))
    };
    let c4 = |i: usize| -> T {
        ((v[i + 1] - v[i - 1]) * 8.0 - (v[i + 2] - v[i - 2])) * (1.0 / (12.0 * h))
    };
    out[0] = fwd(0);
    out[1] = (v[0] * (-3.0) - v[1] * 10.0 + v[2] * 18.0 - v[3] * 6.0 + v[4]) * (1.0 / (12.0 * h));
    out[2] = c4(2);
    out[n - 3] = c4(n - 3);
    out[n - 2] = (v[n - 1] * 3.0 + v[n - 2] * 10.0 - v[n - 3] * 18.0 + v[n - 4] * 6.0 - v[n - 5])
        * (1.0 / (12.0 * h));
    out[n - 1] = bwd(n - 1);
    out
}

/// Cumulative trapezoid integral of uniformly sampled `f`, anchored to zero at index `anchor`.
pub fn cumulative_trapezoid<T>(f: &[T], h: f64, anchor: usize) -> Vec<T>
where
    T: Copy
        + Default
        + std::ops::Add<Output = T>
        + std::ops::Sub<Output = T>
        + std::ops::Mul<f64, Output = T>,
{
    let n = f.len();
    let mut out = vec![T::default(); n];
    for i in anchor + 1..n {
        out[i] = out[i - 1] + (f[i - 1] + f[i]) * (0.5 * h);
    }
    for i in (0..anchor).rev() {
        out[i] = out[i + 1] - (f[i] + f[i + 1]) * (0.5 * h);
    }
    out
}

/// Piecewise cubic Hermite interpolation through `(xs, ys)` with slopes `ds`; `xs` strictly increasing.
/// Returns `None` outside `[xs[0], xs[last]]`.
pub fn hermite_eval(xs: &[f64], ys: &[f64], ds: &[f64], x: f64) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || x < xs[0] || x > xs[n - 1] {
        return None;
    }
    let j = match xs.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
        Ok(i) => i.min(n - 2),
        Err(i) => i - 1,
    };
    let h = xs[j + 1] - xs[j];
    let s = (x - xs[j]) / h;
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let val = h00 * ys[j] + h10 * h * ds[j] + h01 * ys[j + 1] + h11 * h * ds[j + 1];
    let dh00 = (6.0 * s2 - 6.0 * s) / h;
    let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
    let dh01 = (-6.0 * s2 + 6.0 * s) / h;
    let dh11 = 3.0 * s2 - 2.0 * s;
    let der = dh00 * ys[j] + dh10 * ds[j] + dh01 * ys[j + 1] + dh11 * ds[j + 1];
    Some((val, der))
}

/// Slopes for a cubic interpolant through nonuniform data (three-point estimates, second order
/// at the ends). Used when derivatives are not supplied.
pub fn finite_difference_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut d = vec![0.0; n];
    if n < 2 {
        return d;
    }
    if n == 2 {
        let s = (ys[1] - ys[0]) / (xs[1] - xs[0]);
        return vec![s, s];
    }
    let three = |a: usize, b: usize, c: usize, at: usize| -> f64 {
        // derivative of the quadratic through points a, b, c evaluated at `at`
        let (x0, x1, x2) = (xs[a], xs[b], xs[c]);
        let x = xs[at];
        ys[a] * ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2))
            + ys[b] * ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2))
            + ys[c] * ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1))
    };
    d[0] = three(0, 1, 2, 0);
    for i in 1..n - 1 {
        d[i] = three(i - 1, i, i + 1, i);
    }
    d[n - 1] = three(n - 3, n - 2, n - 1, n - 1);
    d
}

/// C^∞ step: 0 for `s <= 0`, 1 for `s >= 1`, with maximal slope 2 at `s = 1/2`.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let f = |u: f64| if u > 0.0 { (-1.0 / u).exp() } else { 0.0 };
    let a = f(s);
    a / (a + f(1.0 - s))
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_derivative(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    let a = (-1.0 / s).exp();
    let b = (-1.0 / (1.0 - s)).exp();
    let da = a / (s * s);
    let db = -b / ((1.0 - s) * (1.0 - s));
    (da * (a + b) - a * (da + db)) / ((a + b) * (a + b))
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Evaluate a real polynomial with coefficients in increasing degree.
pub fn poly_eval(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

/// Antiderivative of a polynomial vanishing at zero.
pub fn poly_integral(coeffs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0];
    out.extend(coeffs.iter().enumerate().map(|(k, c)| c / (k as f64 + 1.0)));
    out
}

/// Cumulative integral of uniformly sampled `f`, anchored to zero at `anchor`: trapezoid with the
/// Euler–Maclaurin endpoint correction `h^2 (f'_i - f'_{i+1}) / 12` per cell (fourth order).
pub fn cumulative_integral<T>(f: &[T], h: f64, anchor: usize) -> Vec<T>
where
    T: Copy
        + Default
        + std::ops::Add<Output = T>
        + std::ops::Sub<Output = T>
        + std::ops::Mul<f64, Output = T>,
{
    let n = f.len();
    if n < 6 {
        return cumulative_trapezoid(f, h, anchor);
    }
    let d = derivative_uniform(f, h);
    let cell = |i: usize| (f[i] + f[i + 1]) * (0.5 * h) + (d[i] - d[i + 1]) * (h * h / 12.0);
    let mut out = vec![T::default(); n];
    for i in anchor + 1..n {
        out[i] = out[i - 1] + cell(i - 1);
    }
    for i in (0..anchor).rev() {
        out[i] = out[i + 1] - cell(i);
    }
    out
}

/// Four-point Lagrange interpolation of samples at `x0 + j dx`; zero outside the sampled range.
pub fn lagrange4_uniform<T>(v: &[T], x0: f64, dx: f64, x: f64) -> T
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = v.len();
    let u = (x - x0) / dx;
    if !(u >= 0.0 && u <= (n - 1) as f64) || n < 4 {
        return T::default();
    }
    let j = (u.floor() as usize).clamp(1, n - 3);
    let s = u - j as f64;
    let w = [
        -s * (s - 1.0) * (s - 2.0) / 6.0,
        (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
        -(s + 1.0) * s * (s - 2.0) / 2.0,
        (s + 1.0) * s * (s - 1.0) / 6.0,
    ];
    v[j - 1] * w[0] + v[j] * w[1] + v[j + 1] * w[2] + v[j + 2] * w[3]
}

/// Apply the Fourier multiplier `m(k)` (angular frequency `k`) to a periodic row in place.
pub fn fourier_multiply(fft: &FftPair, freqs: &[f64], row: &mut [C64], m: impl Fn(f64) -> C64) {
    fft.forward(row);
    row.iter_mut().zip(freqs).for_each(|(v, &k)| *v *= m(k));
    fft.inverse(row);
}

/// Quintic Hermite interpolation from values and first and second derivatives at strictly
/// increasing nodes. Returns `(value, first, second)` derivative at `x`, or `None` outside the nodes.
pub fn quintic_hermite_eval(
    xs: &[f64],
    f: &[f64],
    d1: &[f64],
    d2: &[f64],
    x: f64,
) -> Option<(f64, f64, f64)> {
    const BASIS: [[f64; 6]; 6] = [
        [1.0, 0.0, 0.0, -10.0, 15.0, -6.0],
        [0.0, 1.0, 0.0, -6.0, 8.0, -3.0],
        [0.0, 0.0, 0.5, -1.5, 1.5, -0.5],
        [0.0, 0.0, 0.0, 10.0, -15.0, 6.0],
        [0.0, 0.0, 0.0, -4.0, 7.0, -3.0],
        [0.0, 0.0, 0.0, 0.5, -1.0, 0.5],
    ];
    let n = xs.len();
    if n < 2 || x < xs[0] || x > xs[n - 1] {
        return None;
    }
    let k = xs.partition_point(|&v| v <= x).clamp(1, n - 1);
    let (x0, x1) = (xs[k - 1], xs[k]);
    let h = x1 - x0;
    let s = (x - x0) / h;
    let w = [
        f[k - 1],
        h * d1[k - 1],
        h * h * d2[k - 1],
        f[k],
        h * d1[k],
        h * h * d2[k],
    ];
    let mut c = [0.0; 6];
    for (b, wb) in BASIS.iter().zip(w) {
        for p in 0..6 {
            c[p] += wb * b[p];
        }
    }
    let val = c.iter().rev().fold(0.0, |acc, &ci| acc * s + ci);
    let der = (1..6).rev().fold(0.0, |acc, p| acc * s + p as f64 * c[p]);
    let der2 = (2..6)
        .rev()
        .fold(0.0, |acc, p| acc * s + (p * (p - 1)) as f64 * c[p]);
    Some((val, der / h, der2 / (h * h)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rk4_exponential() {
        let f = |_t: f64, y: &[f64]| vec![y[0]];
        let mut y = vec![1.0];
        let h = 0.01;
        for i in 0..100 {
            y = rk4_step(&f, i as f64 * h, &y, h);
        }
        assert_relative_eq!(y[0], 1f64.exp(), max_relative = 1e-9);
    }

    #[test]
    fn derivative_of_sine_is_accurate() {
        let h = 0.01;
        let v: Vec<f64> = (0..200).map(|i| (i as f64 * h).sin()).collect();
        let d = derivative_uniform(&v, h);
        for (i, di) in d.iter().enumerate() {
            let tol = if (3..197).contains(&i) { 1e-11 } else { 1e-7 };
            assert!((di - (i as f64 * h).cos()).abs() < tol, "i={i}");
        }
    }

    #[test]
    fn trapezoid_anchor_is_zero() {
        let f: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let c = cumulative_trapezoid(&f, 0.1, 5);
        assert_eq!(c[5], 0.0);
        assert_relative_eq!(c[10], (1.0 - 0.25) / 2.0, epsilon = 1e-12);
        assert_relative_eq!(c[0], -(0.25) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let xs = [0.0, 0.3, 0.7, 1.2];
        let p = |x: f64| x * x * x - 2.0 * x + 1.0;
        let dp = |x: f64| 3.0 * x * x - 2.0;
        let ys: Vec<f64> = xs.iter().map(|&x| p(x)).collect();
        let ds: Vec<f64> = xs.iter().map(|&x| dp(x)).collect();
        for x in [0.05, 0.5, 1.1] {
            let (v, d) = hermite_eval(&xs, &ys, &ds, x).unwrap();
            assert_relative_eq!(v, p(x), epsilon = 1e-12);
            assert_relative_eq!(d, dp(x), epsilon = 1e-12);
        }
        assert!(hermite_eval(&xs, &ys, &ds, 1.3).is_none());
    }

    #[test]
    fn smooth_step_slope_bound() {
        let mut m: f64 = 0.0;
        for i in 0..=1000 {
            m = m.max(smooth_step_derivative(i as f64 / 1000.0));
        }
        assert!(m <= 2.0 + 1e-9);
        assert_relative_eq!(smooth_step(0.5), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn fft_freq_layout() {
        let f = fft_freq(4, 1.0);
        let s = std::f64::consts::FRAC_PI_2;
        assert_eq!(f, vec![0.0, s, -2.0 * s, -s]);
    }

    #[test]
    fn quintic_hermite_reproduces_quintics() {
        let p = |x: f64| 1.0 - 2.0 * x + 0.5 * x.powi(3) + 0.3 * x.powi(5);
        let dp = |x: f64| -2.0 + 1.5 * x * x + 1.5 * x.powi(4);
        let ddp = |x: f64| 3.0 * x + 6.0 * x.powi(3);
        let xs = [-1.0, -0.3, 0.4, 1.2];
        let f: Vec<f64> = xs.iter().map(|&x| p(x)).collect();
        let d1: Vec<f64> = xs.iter().map(|&x| dp(x)).collect();
        let d2: Vec<f64> = xs.iter().map(|&x| ddp(x)).collect();
        for x in [-1.0, -0.5, 0.0, 0.9, 1.2] {
            let (v, d, dd) = quintic_hermite_eval(&xs, &f, &d1, &d2, x).unwrap();
            assert!(
                (v - p(x)).abs() < 1e-12
                    && (d - dp(x)).abs() < 1e-11
                    && (dd - ddp(x)).abs() < 1e-10
            );
        }
        assert!(quintic_hermite_eval(&xs, &f, &d1, &d2, 1.3).is_none());
    }

    #[test]
    fn corrected_cumulative_integral_is_fourth_order() {
        let err = |n: usize| {
            let h = 2.0 / (n - 1) as f64;
            let f: Vec<f64> = (0..n).map(|i| (-1.0 + i as f64 * h).cos()).collect();
            let c = cumulative_integral(&f, h, n / 2);
            (0..n)
                .map(|i| {
                    (c[i] - ((-1.0 + i as f64 * h).sin() - (-1.0 + (n / 2) as f64 * h).sin())).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(41), err(81));
        assert!(e1 / e2 > 12.0, "{e1} {e2}");
    }

    #[test]
    fn lagrange_reproduces_cubics() {
        let p = |x: f64| 1.0 + x - 2.0 * x * x + 0.5 * x * x * x;
        let v: Vec<f64> = (0..10).map(|j| p(-1.0 + 0.25 * j as f64)).collect();
        for x in [-1.0, -0.9, 0.13, 1.1, 1.25] {
            assert!((lagrange4_uniform(&v, -1.0, 0.25, x) - p(x)).abs() < 1e-12);
        }
        assert_eq!(lagrange4_uniform(&v, -1.0, 0.25, 1.3), 0.0);
    }
}
