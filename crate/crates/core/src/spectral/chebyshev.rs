//! Chebyshev polynomial approximation of the filter bank, applied through
//! repeated Laplacian products instead of an eigendecomposition.

use std::f64::consts::PI;

use super::wavelet::{transpose_channels, FilterBank, WaveletFeature};
use super::SpectralError;
use crate::par::{self, Exec};
use crate::proxy::Laplacian;

/// Chebyshev coefficients of `h` on `[0, lambda_max]`, computed with
/// Gauss–Chebyshev quadrature.
pub fn chebyshev_coefficients(h: impl Fn(f64) -> f64, lambda_max: f64, order: usize) -> Vec<f64> {
    let quad = (order + 1).max(64) * 4;
    let half = lambda_max / 2.0;
    let samples: Vec<(f64, f64)> = (0..quad)
        .map(|i| {
            let theta = PI * (i as f64 + 0.5) / quad as f64;
            (theta, h(half * (theta.cos() + 1.0)))
        })
        .collect();
    (0..=order)
        .map(|k| {
            2.0 / quad as f64
                * samples
                    .iter()
                    .map(|(theta, v)| v * (k as f64 * theta).cos())
                    .sum::<f64>()
        })
        .collect()
}

fn laplacian_apply(l: &Laplacian, x: &[f64]) -> Vec<f64> {
    let m = l.matrix();
    let n = l.len();
    (0..n)
        .map(|i| (0..n).map(|j| m[(i, j)] * x[j]).sum())
        .collect()
}

/// Applies the polynomial with coefficients `c` in the shifted Laplacian
/// `(2/λmax)·L − I` to `f`.
pub fn chebyshev_apply(l: &Laplacian, lambda_max: f64, c: &[f64], f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let a = lambda_max / 2.0;
    let shifted = |x: &[f64]| -> Vec<f64> {
        laplacian_apply(l, x)
            .into_iter()
            .zip(x)
            .map(|(lx, xi)| lx / a - xi)
            .collect()
    };
    let mut out: Vec<f64> = f.iter().map(|v| 0.5 * c[0] * v).collect();
    if c.len() == 1 {
        return out;
    }
    let mut prev = f.to_vec();
    let mut cur = shifted(f);
    for i in 0..n {
        out[i] += c[1] * cur[i];
    }
    for ck in &c[2..] {
        let next: Vec<f64> = shifted(&cur)
            .into_iter()
            .zip(&prev)
            .map(|(s, p)| 2.0 * s - p)
            .collect();
        for i in 0..n {
            out[i] += ck * next[i];
        }
        prev = cur;
        cur = next;
    }
    out
}

/// Approximate wavelet coefficients of `f` without an eigendecomposition.
/// `lambda_max` must bound the spectrum of `l` from above.
pub fn chebyshev_wavelet_features(
    l: &Laplacian,
    lambda_max: f64,
    bank: &FilterBank,
    f: &[f64],
    order: usize,
    exec: Exec,
) -> Result<Vec<WaveletFeature>, SpectralError> {
    if f.len() != l.len() {
        return Err(SpectralError::DimensionMismatch {
            expected: l.len(),
            got: f.len(),
        });
    }
    if !(lambda_max > 0.0) {
        return Err(SpectralError::NonpositiveLambdaMax(lambda_max));
    }
    let per_channel = par::map_range(exec, bank.channel_count(), |j| {
        let c = chebyshev_coefficients(|x| bank.response(j, x), lambda_max, order);
        chebyshev_apply(l, lambda_max, &c, f)
    });
    Ok(transpose_channels(&per_channel, l.len()))
}

/// Upper bound on the largest Laplacian eigenvalue: twice the maximum degree.
pub fn degree_bound(l: &Laplacian) -> f64 {
    let m = l.matrix();
    (0..l.len()).map(|i| 2.0 * m[(i, i)]).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_smooth_function() {
        let c = chebyshev_coefficients(|x| (0.3 * x).exp(), 4.0, 20);
        // evaluate the series at a point through the trigonometric form
        let x: f64 = 1.3;
        let t = (x / 2.0 - 1.0).acos();
        let approx = 0.5 * c[0] + c[1..].iter().enumerate().map(|(k, ck)| ck * ((k as f64 + 1.0) * t).cos()).sum::<f64>();
        assert!((approx - (0.3 * x).exp()).abs() < 1e-12);
    }
}
