//! Graph Fourier transform and spectral graph wavelets.

mod basis;
mod chebyshev;
mod kernel;
mod wavelet;

pub use basis::{eigendecompose, eigendecompose_capped, gft, inverse_gft, SpectralBasis, DEFAULT_EIGEN_CAP};
pub use chebyshev::{chebyshev_apply, chebyshev_coefficients, chebyshev_wavelet_features, degree_bound};
pub use kernel::{meyer_kernel, meyer_nu, meyer_scaling, Kernel, SpectralKernel};
pub use wavelet::{
    scale_grid, spectrum_csv, wavelet_atom, wavelet_features, wavelet_features_with, wavelet_operator,
    FilterBank, WaveletFeature, DEFAULT_SCALE_COUNT, SCALE_RANGE,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("matrix of size {n} exceeds the eigendecomposition cap {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("eigensolver did not converge")]
    ConvergenceFailure,
    #[error("expected a signal of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("largest eigenvalue must be positive, got {0}")]
    NonpositiveLambdaMax(f64),
    #[error("need at least two scales, got {0}")]
    InvalidScaleCount(usize),
    #[error("scales must be positive and strictly decreasing")]
    InvalidScales,
}
