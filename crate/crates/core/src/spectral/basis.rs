use faer::{Mat, Side};

use super::SpectralError;
use crate::proxy::Laplacian;

/// Default upper bound on the size of a dense eigendecomposition.
pub const DEFAULT_EIGEN_CAP: usize = 3000;

/// Eigenvalues (nondecreasing) and orthonormal eigenvectors (columns) of a
/// graph Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    eigenvalues: Vec<f64>,
    eigenvectors: Mat<f64>,
}

impl SpectralBasis {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Mat<f64> {
        &self.eigenvectors
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// `U·diag(response)·Uᵀ·f` without forming the operator.
    pub(crate) fn filter_coefficients(&self, spectrum: &[f64], response: &[f64]) -> Vec<f64> {
        let n = self.len();
        let u = &self.eigenvectors;
        let weighted: Vec<f64> = spectrum.iter().zip(response).map(|(c, g)| c * g).collect();
        let mut out = vec![0.0; n];
        for (l, &w) in weighted.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let col = u.col(l);
            for (o, i) in out.iter_mut().zip(0..n) {
                *o += col[i] * w;
            }
        }
        out
    }
}

pub fn eigendecompose(l: &Laplacian) -> Result<SpectralBasis, SpectralError> {
    eigendecompose_capped(l, DEFAULT_EIGEN_CAP)
}

/// Dense symmetric eigendecomposition; eigenvalues in `[-1e-10, 0)` are
/// clamped to zero.
pub fn eigendecompose_capped(l: &Laplacian, cap: usize) -> Result<SpectralBasis, SpectralError> {
    let n = l.len();
    if n > cap {
        return Err(SpectralError::TooLarge { n, cap });
    }
    if n == 0 {
        return Ok(SpectralBasis {
            eigenvalues: Vec::new(),
            eigenvectors: Mat::zeros(0, 0),
        });
    }
    let evd = l
        .matrix()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| SpectralError::ConvergenceFailure)?;
    let s = evd.S().column_vector();
    let eigenvalues = (0..n)
        .map(|i| {
            let v = s[i];
            if (-1e-10..0.0).contains(&v) {
                0.0
            } else {
                v
            }
        })
        .collect();
    Ok(SpectralBasis {
        eigenvalues,
        eigenvectors: evd.U().to_owned(),
    })
}

/// Graph Fourier transform `Uᵀ·f`.
pub fn gft(basis: &SpectralBasis, f: &[f64]) -> Result<Vec<f64>, SpectralError> {
    let n = basis.len();
    if f.len() != n {
        return Err(SpectralError::DimensionMismatch {
            expected: n,
            got: f.len(),
        });
    }
    let u = basis.eigenvectors();
    Ok((0..n)
        .map(|l| {
            let col = u.col(l);
            (0..n).map(|i| col[i] * f[i]).sum()
        })
        .collect())
}

/// Inverse transform `U·F`.
pub fn inverse_gft(basis: &SpectralBasis, spectrum: &[f64]) -> Result<Vec<f64>, SpectralError> {
    let n = basis.len();
    if spectrum.len() != n {
        return Err(SpectralError::DimensionMismatch {
            expected: n,
            got: spectrum.len(),
        });
    }
    Ok(basis.filter_coefficients(spectrum, &vec![1.0; n]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn path_laplacian(n: usize) -> Laplacian {
        Laplacian::from_matrix(Mat::from_fn(n, n, |i, j| {
            if i == j {
                let deg = (i > 0) as usize + (i + 1 < n) as usize;
                deg as f64
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        }))
    }

    #[test]
    fn single_node() {
        let b = eigendecompose(&Laplacian::from_matrix(Mat::zeros(1, 1))).unwrap();
        assert_eq!(b.eigenvalues(), &[0.0]);
        assert_relative_eq!(b.eigenvectors()[(0, 0)].abs(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn cap_is_enforced() {
        assert_eq!(
            eigendecompose_capped(&path_laplacian(5), 4).unwrap_err(),
            SpectralError::TooLarge { n: 5, cap: 4 }
        );
    }

    #[test]
    fn constant_signal_lives_in_first_coefficient() {
        let b = eigendecompose(&path_laplacian(8)).unwrap();
        let f = vec![2.5; 8];
        let spec = gft(&b, &f).unwrap();
        assert_relative_eq!(spec[0].abs(), 2.5 * 8f64.sqrt(), epsilon = 1e-12);
        assert!(spec[1..].iter().all(|c| c.abs() < 1e-9));
    }

    #[test]
    fn eigenvector_maps_to_impulse() {
        let b = eigendecompose(&path_laplacian(8)).unwrap();
        let f: Vec<f64> = (0..8).map(|i| b.eigenvectors()[(i, 3)]).collect();
        let spec = gft(&b, &f).unwrap();
        for (l, c) in spec.iter().enumerate() {
            assert_relative_eq!(*c, if l == 3 { 1.0 } else { 0.0 }, epsilon = 1e-12);
        }
    }

    #[test]
    fn inverse_round_trip() {
        let b = eigendecompose(&path_laplacian(10)).unwrap();
        let f: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).cos()).collect();
        let back = inverse_gft(&b, &gft(&b, &f).unwrap()).unwrap();
        for (a, c) in f.iter().zip(&back) {
            assert_relative_eq!(a, c, epsilon = 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let b = eigendecompose(&path_laplacian(4)).unwrap();
        assert!(matches!(gft(&b, &[1.0; 3]), Err(SpectralError::DimensionMismatch { .. })));
    }
}
