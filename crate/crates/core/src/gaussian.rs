//! Closed-form Gaussian densities and their evolution in a harmonic well.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A normalised Gaussian probability density with the given mean and
/// standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian<T> {
    mean: T,
    std: T,
}

impl<T: Real> Gaussian<T> {
    pub fn new(mean: T, std: T) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::invalid("mean", format!("must be finite, got {mean}")));
        }
        if !(std > T::zero()) || !std.is_finite() {
            return Err(Error::invalid("std", format!("must be finite and > 0, got {std}")));
        }
        Ok(Self { mean, std })
    }

    /// Zero-mean density of width `std`.
    pub fn centered(std: T) -> Result<Self> {
        Self::new(T::zero(), std)
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    pub fn std(&self) -> T {
        self.std
    }

    pub fn variance(&self) -> T {
        self.std * self.std
    }

    pub fn pdf(&self, x: T) -> T {
        let z = (x - self.mean) / self.std;
        (-(z * z) / T::lit(2.0)).exp() / (self.std * T::TAU().sqrt())
    }

    pub fn cdf(&self, x: T) -> T {
        let z = ((x - self.mean) / self.std).as_f64();
        T::lit(0.5 * libm::erfc(-z / std::f64::consts::SQRT_2))
    }
}

/// Mass, angular frequency and action constant of the oscillator
/// `V = m ω² x² / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorParams<T> {
    pub mass: T,
    pub omega: T,
    pub hbar: T,
}

impl<T: Real> OscillatorParams<T> {
    pub fn new(mass: T, omega: T, hbar: T) -> Result<Self> {
        for (name, v) in [("mass", mass), ("omega", omega), ("hbar", hbar)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(Self { mass, omega, hbar })
    }

    /// Natural units, `ħ = 1`.
    pub fn natural(mass: T, omega: T) -> Result<Self> {
        Self::new(mass, omega, T::one())
    }

    /// `σ_gs = sqrt(ħ / (m ω))`.
    pub fn sigma_gs(&self) -> T {
        ground_state_width(self)
    }

    pub fn period(&self) -> T {
        T::TAU() / self.omega
    }
}

/// Centre and width of a Gaussian wave packet. `width` is the standard
/// deviation of `|Ψ|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavePacket<T> {
    pub center: T,
    pub width: T,
}

impl<T: Real> WavePacket<T> {
    pub fn new(center: T, width: T) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::invalid("center", format!("must be finite, got {center}")));
        }
        if !(width > T::zero()) || !width.is_finite() {
            return Err(Error::invalid("width", format!("must be finite and > 0, got {width}")));
        }
        Ok(Self { center, width })
    }

    pub fn density(&self) -> Gaussian<T> {
        Gaussian {
            mean: self.center,
            std: self.width,
        }
    }
}

pub fn ground_state_width<T: Real>(params: &OscillatorParams<T>) -> T {
    (params.hbar / (params.mass * params.omega)).sqrt()
}

/// Width at time `t` of the position density of a packet that started with
/// width `sigma_x0`:
///
/// ```text
/// σ(t) = σ_gs² / (2√2 σ_x0) · sqrt(4q⁴ + 1 + (4q⁴ − 1) cos 2ωt),   q = σ_x0 / σ_gs
/// ```
///
/// The radicand is evaluated as `8q⁴ cos²ωt + 2 sin²ωt` (the same expression
/// after `1 ± cos 2ωt = 2cos²ωt, 2sin²ωt`), which avoids the cancellation of
/// `1 − 1` for narrow packets near `t = 0`. Equivalently
/// `σ(t)² = σ_x0² cos²ωt + σ_gs⁴ sin²ωt / (4σ_x0²)`.
pub fn evolved_width<T: Real>(params: &OscillatorParams<T>, sigma_x0: T, t: T) -> T {
    let gs = params.sigma_gs();
    let q = sigma_x0 / gs;
    let (sin, cos) = (params.omega * t).sin_cos();
    let radicand = T::lit(8.0) * q.powi(4) * cos * cos + T::lit(2.0) * sin * sin;
    gs * gs / (T::lit(2.0) * T::SQRT_2() * sigma_x0) * radicand.sqrt()
}

/// Position density at time `t` of a packet evolving freely in the well.
pub fn evolved_density<T: Real>(
    params: &OscillatorParams<T>,
    packet: &WavePacket<T>,
    t: T,
) -> Gaussian<T> {
    Gaussian {
        mean: packet.center * (params.omega * t).cos(),
        std: evolved_width(params, packet.width, t),
    }
}

/// Pointwise product of two Gaussian densities, written as `scale · pdf(result)`.
pub fn gaussian_product<T: Real>(a: &Gaussian<T>, b: &Gaussian<T>) -> (Gaussian<T>, T) {
    let va = a.variance();
    let vb = b.variance();
    let total = va + vb;
    let product = Gaussian {
        mean: (a.mean * vb + b.mean * va) / total,
        std: (va * vb / total).sqrt(),
    };
    (product, gaussian_overlap_integral(a, b))
}

/// `∫ 𝒢(x − μ₁, σ₁) 𝒢(x − μ₂, σ₂) dx = 𝒢(μ₁ − μ₂, sqrt(σ₁² + σ₂²))`.
pub fn gaussian_overlap_integral<T: Real>(a: &Gaussian<T>, b: &Gaussian<T>) -> T {
    let combined = Gaussian {
        mean: T::zero(),
        std: (a.variance() + b.variance()).sqrt(),
    };
    combined.pdf(a.mean - b.mean)
}
