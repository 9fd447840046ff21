use std::f64::consts::FRAC_PI_2;

/// A spectral filter kernel `g(x)`, applied to scaled eigenvalues `s·λ`.
pub trait SpectralKernel: Send + Sync {
    fn eval(&self, x: f64) -> f64;
}

/// Meyer auxiliary polynomial `ν(t) = t⁴(35 − 84t + 70t² − 20t³)`, clamped
/// to `[0, 1]` outside the unit interval.
pub fn meyer_nu(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    // rounding can push the polynomial a hair past 1 near t = 1
    (t.powi(4) * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t * t * t)).clamp(0.0, 1.0)
}

/// Band-pass Meyer wavelet kernel with unit base frequency: zero up to 2/3,
/// rising to one at 4/3, falling back to zero at 8/3.
pub fn meyer_kernel(x: f64) -> f64 {
    const LO: f64 = 2.0 / 3.0;
    const MID: f64 = 4.0 / 3.0;
    const HI: f64 = 8.0 / 3.0;
    if x <= LO || x >= HI {
        0.0
    } else if x <= MID {
        (FRAC_PI_2 * meyer_nu(1.5 * x - 1.0)).sin()
    } else {
        (FRAC_PI_2 * meyer_nu(0.75 * x - 1.0)).cos().max(0.0)
    }
}

/// Low-pass companion of [`meyer_kernel`]: one up to 2/3, zero from 4/3.
pub fn meyer_scaling(x: f64) -> f64 {
    const LO: f64 = 2.0 / 3.0;
    const MID: f64 = 4.0 / 3.0;
    if x <= LO {
        1.0
    } else if x >= MID {
        0.0
    } else {
        (FRAC_PI_2 * meyer_nu(1.5 * x - 1.0)).cos().max(0.0)
    }
}

/// Named kernels available to a filter bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    #[default]
    Meyer,
    /// `g ≡ 1`; the filter operator is the identity.
    Identity,
}

impl SpectralKernel for Kernel {
    fn eval(&self, x: f64) -> f64 {
        match self {
            Kernel::Meyer => meyer_kernel(x),
            Kernel::Identity => 1.0,
        }
    }
}
