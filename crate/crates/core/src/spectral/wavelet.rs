use faer::Mat;

use super::kernel::{meyer_scaling, Kernel, SpectralKernel};
use super::{gft, SpectralBasis, SpectralError};
use crate::par::{self, Exec};

/// Number of wavelet scales in the default bank.
pub const DEFAULT_SCALE_COUNT: usize = 7;

/// Ratio between the largest and the smallest scale.
pub const SCALE_RANGE: f64 = 20.0;

/// Logarithmically spaced scales, largest first.
///
/// The smallest scale maps `lambda_max` onto the kernel peak at 4/3; the
/// largest is [`SCALE_RANGE`] times that, so the bank's passbands cover
/// `(lambda_max / 40, lambda_max]`.
pub fn scale_grid(lambda_max: f64, count: usize) -> Result<Vec<f64>, SpectralError> {
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return Err(SpectralError::NonpositiveLambdaMax(lambda_max));
    }
    if count < 2 {
        return Err(SpectralError::InvalidScaleCount(count));
    }
    let s_min = 4.0 / (3.0 * lambda_max);
    let last = (count - 1) as f64;
    Ok((0..count)
        .map(|j| s_min * SCALE_RANGE.powf(1.0 - j as f64 / last))
        .collect())
}

/// Kernel plus scales; scales are strictly decreasing and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    kernel: Kernel,
    scales: Vec<f64>,
    lowpass: bool,
}

impl FilterBank {
    pub fn new(kernel: Kernel, scales: Vec<f64>) -> Result<Self, SpectralError> {
        if scales.is_empty()
            || scales.iter().any(|s| !(*s > 0.0))
            || scales.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(SpectralError::InvalidScales);
        }
        Ok(Self {
            kernel,
            scales,
            lowpass: false,
        })
    }

    /// Meyer bank with `count` scales fitted to `lambda_max`.
    pub fn meyer(lambda_max: f64, count: usize) -> Result<Self, SpectralError> {
        Self::new(Kernel::Meyer, scale_grid(lambda_max, count)?)
    }

    /// Appends a low-pass channel at the largest scale after the wavelet
    /// channels.
    pub fn with_lowpass(mut self, on: bool) -> Self {
        self.lowpass = on;
        self
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn has_lowpass(&self) -> bool {
        self.lowpass
    }

    /// Wavelet channels plus the optional low-pass channel.
    pub fn channel_count(&self) -> usize {
        self.scales.len() + self.lowpass as usize
    }

    /// Filter response of channel `j` at eigenvalue `lambda`.
    pub fn response(&self, j: usize, lambda: f64) -> f64 {
        if j < self.scales.len() {
            self.kernel.eval(self.scales[j] * lambda)
        } else {
            meyer_scaling(self.scales[0] * lambda)
        }
    }

    fn responses(&self, j: usize, eigenvalues: &[f64]) -> Vec<f64> {
        eigenvalues.iter().map(|&l| self.response(j, l)).collect()
    }
}

/// Per-node multiscale coefficients, one entry per bank channel.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFeature {
    pub node_index: usize,
    pub coefficients: Vec<f64>,
}

fn check_channel(bank: &FilterBank, j: usize) -> Result<(), SpectralError> {
    if j >= bank.channel_count() {
        return Err(SpectralError::IndexOutOfRange(j));
    }
    Ok(())
}

/// The localized atom `U·G_s(Λ)·Uᵀ·δ_n` for channel `j` centered at node `n`.
pub fn wavelet_atom(
    basis: &SpectralBasis,
    bank: &FilterBank,
    j: usize,
    n: usize,
) -> Result<Vec<f64>, SpectralError> {
    check_channel(bank, j)?;
    if n >= basis.len() {
        return Err(SpectralError::IndexOutOfRange(n));
    }
    let u = basis.eigenvectors();
    let dirac_spectrum: Vec<f64> = (0..basis.len()).map(|l| u[(n, l)]).collect();
    Ok(basis.filter_coefficients(&dirac_spectrum, &bank.responses(j, basis.eigenvalues())))
}

/// Dense filter operator `U·G_s(Λ)·Uᵀ` for channel `j`.
pub fn wavelet_operator(
    basis: &SpectralBasis,
    bank: &FilterBank,
    j: usize,
) -> Result<Mat<f64>, SpectralError> {
    check_channel(bank, j)?;
    let n = basis.len();
    let u = basis.eigenvectors();
    let g = bank.responses(j, basis.eigenvalues());
    let scaled = Mat::from_fn(n, n, |i, l| u[(i, l)] * g[l]);
    Ok(&scaled * u.transpose())
}

/// Coefficients of `f` on every node and channel.
pub fn wavelet_features(
    basis: &SpectralBasis,
    bank: &FilterBank,
    f: &[f64],
) -> Result<Vec<WaveletFeature>, SpectralError> {
    wavelet_features_with(basis, bank, f, Exec::default())
}

/// [`wavelet_features`] with an explicit execution mode; channels are
/// filtered concurrently in parallel mode.
pub fn wavelet_features_with(
    basis: &SpectralBasis,
    bank: &FilterBank,
    f: &[f64],
    exec: Exec,
) -> Result<Vec<WaveletFeature>, SpectralError> {
    let spectrum = gft(basis, f)?;
    let channels = bank.channel_count();
    let per_channel: Vec<Vec<f64>> = par::map_range(exec, channels, |j| {
        basis.filter_coefficients(&spectrum, &bank.responses(j, basis.eigenvalues()))
    });
    Ok(transpose_channels(&per_channel, basis.len()))
}

pub(crate) fn transpose_channels(per_channel: &[Vec<f64>], n: usize) -> Vec<WaveletFeature> {
    (0..n)
        .map(|i| WaveletFeature {
            node_index: i,
            coefficients: per_channel.iter().map(|c| c[i]).collect(),
        })
        .collect()
}

/// CSV with one row per eigenvalue and one response column per channel.
pub fn spectrum_csv(basis: &SpectralBasis, bank: &FilterBank) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("index,eigenvalue");
    for j in 0..bank.channel_count() {
        if j < bank.scales().len() {
            let _ = write!(out, ",g_s{j}");
        } else {
            out.push_str(",h_lowpass");
        }
    }
    out.push('\n');
    for (l, &lam) in basis.eigenvalues().iter().enumerate() {
        let _ = write!(out, "{l},{lam}");
        for j in 0..bank.channel_count() {
            let _ = write!(out, ",{}", bank.response(j, lam));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_length_and_order() {
        let s = scale_grid(3.7, 7).unwrap();
        assert_eq!(s.len(), 7);
        assert!(s.windows(2).all(|w| w[0] > w[1]));
        assert_relative_eq!(s[0] / s[6], SCALE_RANGE, epsilon = 1e-12);
    }

    #[test]
    fn grid_is_homogeneous_in_lambda_max() {
        let a = scale_grid(2.0, 7).unwrap();
        let b = scale_grid(4.0, 7).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x / 2.0, *y, epsilon = 1e-15);
        }
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert_eq!(scale_grid(0.0, 7), Err(SpectralError::NonpositiveLambdaMax(0.0)));
        assert_eq!(scale_grid(1.0, 1), Err(SpectralError::InvalidScaleCount(1)));
    }

    #[test]
    fn every_channel_sees_part_of_the_spectrum() {
        let lmax = 5.0;
        let bank = FilterBank::meyer(lmax, 7).unwrap();
        for j in 0..7 {
            let best = (1..=1000)
                .map(|k| bank.response(j, lmax * k as f64 / 1000.0))
                .fold(0.0, f64::max);
            assert!(best > 0.5, "channel {j} is nearly dead: {best}");
        }
    }

    #[test]
    fn bank_validation() {
        assert!(FilterBank::new(Kernel::Meyer, vec![1.0, 2.0]).is_err());
        assert!(FilterBank::new(Kernel::Meyer, vec![]).is_err());
        assert!(FilterBank::new(Kernel::Meyer, vec![2.0, -1.0]).is_err());
    }
}
