//! Closed-form statistics of the periodic measurement chain.
//!
//! After every measurement the state is a Gaussian of width `σ_M` centred on
//! the outcome, so the density before the next measurement is
//! `𝒢(x − ρ x_prev, σ_step)` with `ρ = cos ωt_M` and `σ_step = σ(t_M)` evolved
//! from width `σ_M`. The first density is the evolved initial packet with
//! width `σ_first`. Everything below follows from that two-parameter chain.

use crate::error::{Error, Result};
use crate::gaussian::{evolved_width, Gaussian, OscillatorParams};
use crate::scalar::Real;

/// Resonance guard on `|sin ωt_M|`.
pub const RESONANCE_EPS: f64 = 1e-9;

/// Measurement period, instrument width and optional Gaussian jitter of the
/// period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementScheme<T> {
    pub t_m: T,
    pub sigma_m: T,
    pub jitter_std: T,
}

impl<T: Real> MeasurementScheme<T> {
    pub fn new(t_m: T, sigma_m: T) -> Result<Self> {
        Self::with_jitter(t_m, sigma_m, T::zero())
    }

    pub fn with_jitter(t_m: T, sigma_m: T, jitter_std: T) -> Result<Self> {
        if !(t_m > T::zero()) || !t_m.is_finite() {
            return Err(Error::invalid("t_m", format!("must be finite and > 0, got {t_m}")));
        }
        if !(sigma_m > T::zero()) || !sigma_m.is_finite() {
            return Err(Error::invalid("sigma_m", format!("must be finite and > 0, got {sigma_m}")));
        }
        if !(jitter_std >= T::zero()) || !jitter_std.is_finite() {
            return Err(Error::invalid(
                "jitter_std",
                format!("must be finite and >= 0, got {jitter_std}"),
            ));
        }
        Ok(Self {
            t_m,
            sigma_m,
            jitter_std,
        })
    }

    pub fn rho(&self, params: &OscillatorParams<T>) -> T {
        (params.omega * self.t_m).cos()
    }

    pub fn tau_m(&self, params: &OscillatorParams<T>) -> T {
        self.t_m / params.period()
    }

    /// `Err(Resonance)` when `|sin ωt_M| <= RESONANCE_EPS`.
    pub fn check_resonance(&self, params: &OscillatorParams<T>) -> Result<()> {
        let s = (params.omega * self.t_m).sin().abs().as_f64();
        if s <= RESONANCE_EPS {
            return Err(Error::Resonance {
                sin_abs: s,
                tau_m: self.tau_m(params).as_f64(),
            });
        }
        Ok(())
    }
}

/// The two widths and memory coefficient that fully determine the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainClosedForm<T> {
    pub sigma_step: T,
    pub sigma_first: T,
    pub rho: T,
    /// `1 − ρ² = sin² ωt_M`, kept separately so it is not lost to cancellation
    /// near resonance.
    one_minus_rho2: T,
    tau_m: Option<T>,
}

impl<T: Real> ChainClosedForm<T> {
    pub fn new(sigma_step: T, sigma_first: T, rho: T) -> Result<Self> {
        if !(sigma_step > T::zero()) || !sigma_step.is_finite() {
            return Err(Error::invalid("sigma_step", format!("must be > 0, got {sigma_step}")));
        }
        if !(sigma_first > T::zero()) || !sigma_first.is_finite() {
            return Err(Error::invalid("sigma_first", format!("must be > 0, got {sigma_first}")));
        }
        if !(rho.abs() <= T::one()) {
            return Err(Error::invalid("rho", format!("must satisfy |rho| <= 1, got {rho}")));
        }
        Ok(Self {
            sigma_step,
            sigma_first,
            rho,
            one_minus_rho2: (T::one() - rho) * (T::one() + rho),
            tau_m: None,
        })
    }

    /// Chain for an oscillator measured with `scheme`, starting from a packet
    /// of width `initial_width`.
    pub fn from_setup(
        params: &OscillatorParams<T>,
        scheme: &MeasurementScheme<T>,
        initial_width: T,
    ) -> Result<Self> {
        let (sin, cos) = (params.omega * scheme.t_m).sin_cos();
        let mut cf = Self::new(
            evolved_width(params, scheme.sigma_m, scheme.t_m),
            evolved_width(params, initial_width, scheme.t_m),
            cos,
        )?;
        cf.one_minus_rho2 = sin * sin;
        cf.tau_m = Some(scheme.tau_m(params));
        Ok(cf)
    }

    pub fn sin_abs(&self) -> T {
        self.one_minus_rho2.sqrt()
    }

    pub fn one_minus_rho2(&self) -> T {
        self.one_minus_rho2
    }

    pub fn check_resonance(&self) -> Result<()> {
        let s = self.sin_abs().as_f64();
        if s <= RESONANCE_EPS {
            return Err(Error::Resonance {
                sin_abs: s,
                tau_m: self.tau_m.map_or(f64::NAN, Real::as_f64),
            });
        }
        Ok(())
    }

    /// `Σ_{j<k} ρ^{2j}`, evaluated in the `ρ²` domain.
    fn geometric(&self, k: usize) -> T {
        geometric_sum(self.rho * self.rho, self.one_minus_rho2, k)
    }

    fn rho2_pow(&self, k: usize) -> T {
        let r = self.rho * self.rho;
        if k == 0 {
            T::one()
        } else {
            r.powf(T::from_count(k))
        }
    }
}

fn geometric_sum<T: Real>(r: T, eps: T, k: usize) -> T {
    if k == 0 {
        return T::zero();
    }
    let kf = T::from_count(k);
    if eps == T::zero() {
        return kf;
    }
    if eps >= T::lit(0.5) {
        (T::one() - r.powf(kf)) / eps
    } else {
        -(kf * (-eps).ln_1p()).exp_m1() / eps
    }
}

/// Non-dimensional measurement point: `ς_M = σ_M / σ_gs`, `τ_M = t_M / T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NondimPoint<T> {
    pub varsigma_m: T,
    pub tau_m: T,
}

impl<T: Real> NondimPoint<T> {
    pub fn new(varsigma_m: T, tau_m: T) -> Result<Self> {
        if !(varsigma_m > T::zero()) || !varsigma_m.is_finite() {
            return Err(Error::invalid("varsigma_m", format!("must be > 0, got {varsigma_m}")));
        }
        if !(tau_m > T::zero()) || !tau_m.is_finite() {
            return Err(Error::invalid("tau_m", format!("must be > 0, got {tau_m}")));
        }
        Ok(Self { varsigma_m, tau_m })
    }

    pub fn from_scheme(params: &OscillatorParams<T>, scheme: &MeasurementScheme<T>) -> Self {
        Self {
            varsigma_m: scheme.sigma_m / params.sigma_gs(),
            tau_m: scheme.tau_m(params),
        }
    }

    /// Dimensional scheme for `params`, without jitter.
    pub fn to_scheme(&self, params: &OscillatorParams<T>) -> Result<MeasurementScheme<T>> {
        MeasurementScheme::new(self.tau_m * params.period(), self.varsigma_m * params.sigma_gs())
    }
}

/// Density of the `n`-th outcome (`n >= 1`) averaged over all earlier
/// outcomes: zero mean, variance
/// `σ_step² Σ_{k=0}^{n−2} ρ^{2k} + σ_first² ρ^{2(n−1)}`.
pub fn density_before_nth<T: Real>(cf: &ChainClosedForm<T>, n: usize) -> Result<Gaussian<T>> {
    if n == 0 {
        return Err(Error::invalid("n", "measurement index starts at 1"));
    }
    let var = cf.sigma_step * cf.sigma_step * cf.geometric(n - 1)
        + cf.sigma_first * cf.sigma_first * cf.rho2_pow(n - 1);
    Gaussian::centered(var.sqrt())
}

/// Width of the limiting distribution, `|σ_step / sin ωt_M|`.
pub fn limiting_sigma<T: Real>(cf: &ChainClosedForm<T>) -> Result<T> {
    cf.check_resonance()?;
    Ok((cf.sigma_step / cf.sin_abs()).abs())
}

/// `sqrt(σ_M² cot² ωt_M + σ_gs⁴ / (4σ_M²))`.
pub fn limiting_sigma_simplified<T: Real>(
    params: &OscillatorParams<T>,
    scheme: &MeasurementScheme<T>,
) -> Result<T> {
    scheme.check_resonance(params)?;
    let (sin, cos) = (params.omega * scheme.t_m).sin_cos();
    let cot = cos / sin;
    let gs2 = params.sigma_gs().powi(2);
    let sm = scheme.sigma_m;
    Ok((sm * sm * cot * cot + gs2 * gs2 / (T::lit(4.0) * sm * sm)).sqrt())
}

/// Non-dimensional limiting width
/// `ς∞ = sqrt(ς_M² cot² 2πτ_M + 1 / (4ς_M²))`.
pub fn nondim_limit<T: Real>(p: &NondimPoint<T>) -> Result<T> {
    let (sin, cos) = (T::TAU() * p.tau_m).sin_cos();
    if sin.abs().as_f64() <= RESONANCE_EPS {
        return Err(Error::Resonance {
            sin_abs: sin.abs().as_f64(),
            tau_m: p.tau_m.as_f64(),
        });
    }
    let cot = cos / sin;
    let v = p.varsigma_m;
    Ok((v * v * cot * cot + T::one() / (T::lit(4.0) * v * v)).sqrt())
}

/// Instrument precision minimising `ς∞` at fixed `τ_M`: `sqrt(tan(2πτ_M) / 2)`.
/// Only defined where `tan 2πτ_M` is finite and positive.
pub fn optimal_precision<T: Real>(tau_m: T) -> Result<T> {
    let (sin, cos) = (T::TAU() * tau_m).sin_cos();
    if cos.abs().as_f64() <= RESONANCE_EPS {
        return Err(Error::Domain(format!(
            "tan(2*pi*tau_M) diverges at tau_M = {tau_m}; varsigma_inf decreases monotonically"
        )));
    }
    let tan = sin / cos;
    if !(tan > T::zero()) {
        return Err(Error::Domain(format!(
            "tan(2*pi*tau_M) = {tan} <= 0 at tau_M = {tau_m}"
        )));
    }
    Ok((tan / T::lit(2.0)).sqrt())
}

/// `s_n² = (1/n) Σ_{i=1}^{n} σ_i²`, the variance of the pooled first `n`
/// outcomes.
///
/// Summing the arithmetico-geometric series in closed form gives
/// `s_n² = σ∞² + (σ_first² − σ∞²) · G_n / n` with `G_n = (1 − ρ^{2n}) / (1 − ρ²)`.
/// When `n (1 − ρ²)` is small that form cancels badly, and the sum is taken
/// term by term in the `ρ²` domain instead.
pub fn ensemble_variance_partial<T: Real>(cf: &ChainClosedForm<T>, n: usize) -> Result<T> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one measurement"));
    }
    cf.check_resonance()?;
    let eps = cf.one_minus_rho2;
    let first2 = cf.sigma_first * cf.sigma_first;
    let step2 = cf.sigma_step * cf.sigma_step;
    let nf = T::from_count(n);
    if (nf * eps).as_f64() >= 1e-2 {
        let inf2 = step2 / eps;
        return Ok(inf2 + (first2 - inf2) * cf.geometric(n) / nf);
    }
    let r = cf.rho * cf.rho;
    let (mut sum, mut comp) = (T::zero(), T::zero());
    for i in 0..n {
        let term = first2 * cf.rho2_pow(i) + step2 * geometric_sum(r, eps, i);
        let t = sum + term;
        comp = comp + ((sum - t) + term);
        sum = t;
    }
    Ok((sum + comp) / nf)
}

/// Instrument width `σ_M` for which the pre-measurement width `σ(t_M)` grown
/// from `σ_M` equals `σ_M / ratio`, i.e. `σ_M = ratio · σ(t_M)`.
///
/// From `σ(t)² = σ_M² cos²ωt + σ_gs⁴ sin²ωt / (4σ_M²)`:
/// `σ_M⁴ (1/ratio² − cos²ωt) = σ_gs⁴ sin²ωt / 4`.
pub fn sigma_m_for_ratio<T: Real>(params: &OscillatorParams<T>, t_m: T, ratio: T) -> Result<T> {
    if !(ratio > T::zero() && ratio < T::one()) {
        return Err(Error::invalid("ratio", format!("must lie in (0, 1), got {ratio}")));
    }
    let (sin, cos) = (params.omega * t_m).sin_cos();
    if sin.abs().as_f64() <= RESONANCE_EPS {
        return Err(Error::Resonance {
            sin_abs: sin.abs().as_f64(),
            tau_m: (t_m / params.period()).as_f64(),
        });
    }
    let denom = T::one() / (ratio * ratio) - cos * cos;
    let gs = params.sigma_gs();
    Ok(gs * (sin.abs() / (T::lit(2.0) * denom.sqrt())).sqrt())
}

/// Weak-measurement parameters `(σ_W, x_W)` whose Gaussian window, applied to
/// `prior` and renormalised, reproduces the replacement state `𝒢(x − x_M, σ_M)`.
pub fn povm_parameters<T: Real>(sigma_m: T, x_m: T, prior: &Gaussian<T>) -> Result<(T, T)> {
    if !(sigma_m > T::zero()) {
        return Err(Error::invalid("sigma_m", format!("must be > 0, got {sigma_m}")));
    }
    let vp = prior.variance();
    let vm = sigma_m * sigma_m;
    if !(prior.std() > sigma_m) {
        return Err(Error::Precision {
            sigma_m: sigma_m.as_f64(),
            prior_std: prior.std().as_f64(),
        });
    }
    let gap = vp - vm;
    let sigma_w2 = vm * vp / gap;
    let x_w = (x_m * vp - prior.mean() * vm) / gap;
    Ok((sigma_w2.sqrt(), x_w))
}
