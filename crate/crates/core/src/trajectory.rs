//! Monte Carlo measurement records from the exact Gaussian chain.
//!
//! Because every post-measurement state is Gaussian, the outcome of the next
//! measurement is exactly `ρ · x_prev + σ_step · z` with `z ~ 𝒩(0, 1)`; the
//! simulation has no discretisation error.

use rayon::prelude::*;

use crate::chain::{limiting_sigma, ChainClosedForm, MeasurementScheme};
use crate::error::{Error, Result};
use crate::gaussian::{evolved_width, OscillatorParams, WavePacket};
use crate::rng::{NormalStream, StreamRole};
use crate::scalar::Real;
use crate::stats::RunningStats;

/// Jittered periods are clamped below at this fraction of `t_M`.
pub const JITTER_FLOOR: f64 = 1e-6;

/// Histogram half-width in units of the predicted limiting width.
pub const HISTOGRAM_SIGMAS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig<T> {
    pub params: OscillatorParams<T>,
    pub scheme: MeasurementScheme<T>,
    pub initial: WavePacket<T>,
    pub n_measurements: usize,
    pub seed: u64,
}

impl<T: Real> ChainConfig<T> {
    pub fn new(
        params: OscillatorParams<T>,
        scheme: MeasurementScheme<T>,
        initial: WavePacket<T>,
        n_measurements: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_measurements == 0 {
            return Err(Error::invalid("n_measurements", "must be at least 1"));
        }
        Ok(Self {
            params,
            scheme,
            initial,
            n_measurements,
            seed,
        })
    }

    pub fn closed_form(&self) -> Result<ChainClosedForm<T>> {
        ChainClosedForm::from_setup(&self.params, &self.scheme, self.initial.width)
    }

    /// Predicted limiting width, ignoring jitter.
    pub fn predicted_sigma(&self) -> Result<T> {
        limiting_sigma(&self.closed_form()?)
    }

    /// Histogram half-width: `±6 σ∞`. Exactly resonant jittered runs have no
    /// prediction, so the jitter-smeared `|sin ωt|` stands in for it.
    pub fn histogram_half_width(&self) -> Result<T> {
        let cf = self.closed_form()?;
        let sin = cf
            .sin_abs()
            .max(self.params.omega * self.scheme.jitter_std)
            .max(T::lit(1e-3));
        Ok(T::lit(HISTOGRAM_SIGMAS) * cf.sigma_step / sin)
    }
}

/// Outcomes in measurement order, and the effective periods when the period
/// was jittered.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord<T> {
    pub samples: Vec<T>,
    pub periods: Option<Vec<T>>,
}

impl<T: Real> MeasurementRecord<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Period preceding measurement `i`.
    pub fn period(&self, i: usize, nominal: T) -> T {
        self.periods.as_ref().map_or(nominal, |p| p[i])
    }
}

/// One draw from the density before the next measurement.
#[inline]
pub fn chain_step<T: Real>(x_prev: T, rho: T, sigma_step: T, noise: T) -> T {
    x_prev * rho + sigma_step * noise
}

pub fn run_chain<T: Real>(cfg: &ChainConfig<T>) -> Result<(MeasurementRecord<T>, RunningStats<T>)> {
    run_chain_indexed(cfg, 0)
}

fn run_chain_indexed<T: Real>(
    cfg: &ChainConfig<T>,
    chain: u64,
) -> Result<(MeasurementRecord<T>, RunningStats<T>)> {
    cfg.scheme.check_resonance(&cfg.params)?;
    let cf = cfg.closed_form()?;
    let mut stats = RunningStats::with_range(cfg.histogram_half_width()?)?;
    let mut noise = NormalStream::for_chain(cfg.seed, chain, StreamRole::Outcome);
    let mut samples = Vec::with_capacity(cfg.n_measurements);

    let first_mean = cfg.initial.center * (cfg.params.omega * cfg.scheme.t_m).cos();
    let mut x = first_mean + cf.sigma_first * T::lit(noise.standard_normal());
    samples.push(x);
    stats.push(x);
    for _ in 1..cfg.n_measurements {
        x = chain_step(x, cf.rho, cf.sigma_step, T::lit(noise.standard_normal()));
        samples.push(x);
        stats.push(x);
    }
    Ok((
        MeasurementRecord {
            samples,
            periods: None,
        },
        stats,
    ))
}

/// Chain whose period is redrawn before every measurement as
/// `max(t_min, t_M + jitter_std · η)`, with the step coefficients recomputed
/// for that period. Resonant nominal periods are allowed.
pub fn run_chain_jittered<T: Real>(
    cfg: &ChainConfig<T>,
) -> Result<(MeasurementRecord<T>, RunningStats<T>)> {
    run_jittered_indexed(cfg, 0)
}

fn run_jittered_indexed<T: Real>(
    cfg: &ChainConfig<T>,
    chain: u64,
) -> Result<(MeasurementRecord<T>, RunningStats<T>)> {
    let p = &cfg.params;
    let s = &cfg.scheme;
    let t_min = T::lit(JITTER_FLOOR) * s.t_m;
    let mut stats = RunningStats::with_range(cfg.histogram_half_width()?)?;
    let mut noise = NormalStream::for_chain(cfg.seed, chain, StreamRole::Outcome);
    let mut jitter = NormalStream::for_chain(cfg.seed, chain, StreamRole::Jitter);
    let mut samples = Vec::with_capacity(cfg.n_measurements);
    let mut periods = Vec::with_capacity(cfg.n_measurements);

    let mut next_period = || (s.t_m + s.jitter_std * T::lit(jitter.standard_normal())).max(t_min);

    let t = next_period();
    let mean = cfg.initial.center * (p.omega * t).cos();
    let mut x = mean + evolved_width(p, cfg.initial.width, t) * T::lit(noise.standard_normal());
    samples.push(x);
    periods.push(t);
    stats.push(x);
    for _ in 1..cfg.n_measurements {
        let t = next_period();
        let rho = (p.omega * t).cos();
        let sigma_step = evolved_width(p, s.sigma_m, t);
        x = chain_step(x, rho, sigma_step, T::lit(noise.standard_normal()));
        samples.push(x);
        periods.push(t);
        stats.push(x);
    }
    Ok((
        MeasurementRecord {
            samples,
            periods: Some(periods),
        },
        stats,
    ))
}

/// `n_chains` independent chains on disjoint random streams, run in parallel
/// and merged in chain order. Chain 0 is the chain [`run_chain`] produces.
pub fn run_ensemble<T: Real>(cfg: &ChainConfig<T>, n_chains: usize) -> Result<RunningStats<T>> {
    if n_chains == 0 {
        return Err(Error::invalid("n_chains", "must be at least 1"));
    }
    let jittered = cfg.scheme.jitter_std > T::zero();
    let parts: Vec<RunningStats<T>> = (0..n_chains as u64)
        .into_par_iter()
        .map(|c| {
            let run = if jittered {
                run_jittered_indexed(cfg, c)
            } else {
                run_chain_indexed(cfg, c)
            };
            run.map(|(_, stats)| stats)
        })
        .collect::<Result<_>>()?;
    let mut parts = parts.into_iter();
    let mut total = parts.next().expect("at least one chain");
    for part in parts {
        total.merge(&part)?;
    }
    Ok(total)
}

/// Sample standard deviation of the first `n` outcomes for each `n` in
/// `checkpoints` (which must be increasing).
pub fn running_std<T: Real>(samples: &[T], checkpoints: &[usize]) -> Vec<Option<T>> {
    let mut out = Vec::with_capacity(checkpoints.len());
    let (mut count, mut mean, mut m2) = (0usize, T::zero(), T::zero());
    let mut it = samples.iter();
    for &n in checkpoints {
        while count < n {
            let Some(&x) = it.next() else { break };
            count += 1;
            let d = x - mean;
            mean = mean + d / T::from_count(count);
            m2 = m2 + d * (x - mean);
        }
        out.push((count >= 2 && count == n).then(|| (m2 / T::from_count(count - 1)).sqrt()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::density_before_nth;
    use std::f64::consts::TAU;

    fn fig2(n: usize, seed: u64) -> ChainConfig<f64> {
        let p = OscillatorParams::natural(1.0, 0.707).unwrap();
        let s = MeasurementScheme::new(p.period() / 5.0, 0.5).unwrap();
        ChainConfig::new(p, s, WavePacket::new(0.0, 1.0).unwrap(), n, seed).unwrap()
    }

    #[test]
    fn step_examples() {
        assert_eq!(chain_step(2.0, 0.3, 1.5, 0.0), 0.6);
        assert_eq!(chain_step(2.0, 0.0, 1.5, -2.0), -3.0);
    }

    #[test]
    fn step_distribution() {
        let mut rng = NormalStream::new(99, 0);
        let n = 1_000_000;
        let mut s = RunningStats::with_range(10.0).unwrap();
        for _ in 0..n {
            s.push(chain_step(1.7, 0.4, 0.8, rng.standard_normal()));
        }
        let se_mean = 0.8 / (n as f64).sqrt();
        let se_std = 0.8 / (2.0 * n as f64).sqrt();
        assert!((s.mean() - 0.68).abs() < 4.0 * se_mean);
        assert!((s.std().unwrap() - 0.8).abs() < 4.0 * se_std);
    }

    #[test]
    fn rejects_zero_measurements() {
        let c = fig2(1, 0);
        assert!(ChainConfig::new(c.params, c.scheme, c.initial, 0, 0).is_err());
    }

    #[test]
    fn single_measurement_record() {
        let (rec, stats) = run_chain(&fig2(1, 4)).unwrap();
        assert_eq!(rec.len(), 1);
        assert_eq!(stats.count(), 1);
        assert_eq!(stats.std(), None);
    }

    #[test]
    fn deterministic_per_seed() {
        let (a, _) = run_chain(&fig2(1000, 17)).unwrap();
        let (b, _) = run_chain(&fig2(1000, 17)).unwrap();
        let (c, _) = run_chain(&fig2(1000, 18)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn resonance_is_rejected() {
        let mut cfg = fig2(10, 0);
        cfg.scheme.t_m = cfg.params.period() / 2.0;
        assert!(matches!(run_chain(&cfg), Err(Error::Resonance { .. })));
        // the jittered engine still runs
        cfg.scheme.jitter_std = 0.01 * cfg.scheme.t_m;
        assert!(run_chain_jittered(&cfg).is_ok());
    }

    #[test]
    fn zero_jitter_matches_plain_chain() {
        let cfg = fig2(5000, 23);
        let (plain, _) = run_chain(&cfg).unwrap();
        let (jit, _) = run_chain_jittered(&cfg).unwrap();
        assert_eq!(plain.samples, jit.samples);
        assert!(jit.periods.unwrap().iter().all(|&t| t == cfg.scheme.t_m));
    }

    #[test]
    fn near_resonance_jitter_stays_finite() {
        let mut cfg = fig2(20_000, 2);
        cfg.scheme.t_m = 0.999 * cfg.params.period() / 2.0;
        cfg.scheme.jitter_std = 0.01 * cfg.scheme.t_m;
        let (rec, stats) = run_chain_jittered(&cfg).unwrap();
        assert!(rec.samples.iter().all(|x| x.is_finite()));
        assert!(stats.std().unwrap().is_finite());
    }

    #[test]
    fn marginals_follow_closed_form() {
        // Across seeds, outcome i has the width of the i-th density.
        let cfg = fig2(10, 0);
        let cf = cfg.closed_form().unwrap();
        let seeds = 100_000;
        let idx = [1usize, 2, 3, 10];
        let mut acc: Vec<RunningStats<f64>> =
            idx.iter().map(|_| RunningStats::with_range(10.0).unwrap()).collect();
        for seed in 0..seeds {
            let (rec, _) = run_chain(&ChainConfig { seed, ..cfg }).unwrap();
            for (k, &i) in idx.iter().enumerate() {
                acc[k].push(rec.samples[i - 1]);
            }
        }
        for (k, &i) in idx.iter().enumerate() {
            let want = density_before_nth(&cf, i).unwrap().std();
            let se = want / (2.0 * seeds as f64).sqrt();
            let got = acc[k].std().unwrap();
            assert!((got - want).abs() < 4.0 * se, "i={i} got {got} want {want}");
        }
    }

    #[test]
    fn first_sample_mean_follows_packet() {
        let mut cfg = fig2(1, 0);
        cfg.initial = WavePacket::new(2.0, 0.3).unwrap();
        let mut s = RunningStats::with_range(10.0).unwrap();
        for seed in 0..40_000 {
            let (rec, _) = run_chain(&ChainConfig { seed, ..cfg }).unwrap();
            s.push(rec.samples[0]);
        }
        let want = 2.0 * (TAU / 5.0).cos();
        let sd = evolved_width(&cfg.params, 0.3, cfg.scheme.t_m);
        assert!((s.mean() - want).abs() < 4.0 * sd / 200.0);
    }

    #[test]
    fn ensemble_of_one_is_plain_chain() {
        let cfg = fig2(10_000, 8);
        let (_, stats) = run_chain(&cfg).unwrap();
        assert_eq!(run_ensemble(&cfg, 1).unwrap(), stats);
        assert!(run_ensemble(&cfg, 0).is_err());
    }

    #[test]
    fn running_std_checkpoints() {
        let xs = [1.0, 3.0, 5.0, 7.0];
        let r = running_std(&xs, &[1, 2, 4, 9]);
        assert_eq!(r[0], None);
        assert!((r[1].unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((r[2].unwrap() - (20.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(r[3], None);
    }
}
