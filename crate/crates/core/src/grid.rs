//! Brute-force Schrödinger evolution on a periodic spatial grid.
//!
//! The harmonic Hamiltonian is split symmetrically (Strang) into potential
//! half-steps applied in position space and a kinetic step applied in
//! momentum space through an FFT. Free evolution never renormalises; only a
//! measurement does. This module is an oracle for [`crate::gaussian`] and
//! [`crate::trajectory`] and deliberately does not use their closed forms.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftNum, FftPlanner};

use crate::chain::povm_parameters;
use crate::error::{Error, Result};
use crate::gaussian::{Gaussian, OscillatorParams, WavePacket};
use crate::rng::{NormalStream, StreamRole};
use crate::scalar::Real;
use crate::trajectory::{ChainConfig, MeasurementRecord, JITTER_FLOOR};

pub const MIN_POINTS: usize = 256;
pub const DEFAULT_POINTS: usize = 4096;
pub const DEFAULT_STEPS_PER_PERIOD: usize = 1024;
/// Widths below this many grid spacings are rejected.
pub const MIN_SPACINGS_PER_WIDTH: f64 = 4.0;
/// Packets must sit this many widths inside the grid.
pub const PACKET_MARGIN: f64 = 8.0;
/// Fraction of the grid, at each end, watched for leakage.
pub const EDGE_FRACTION: f64 = 0.05;
pub const LEAKAGE_LIMIT: f64 = 1e-6;

/// Uniform periodic grid `x_j = x_min + j·dx`, `j = 0..n_points`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    x_min: T,
    x_max: T,
    dx: T,
    xs: Vec<T>,
    ks: Vec<T>,
}

impl<T: Real> Grid<T> {
    pub fn new(x_min: T, x_max: T, n_points: usize) -> Result<Self> {
        if !(x_max > x_min) {
            return Err(Error::invalid("grid", format!("need x_max > x_min, got [{x_min}, {x_max}]")));
        }
        if !n_points.is_power_of_two() || n_points < MIN_POINTS {
            return Err(Error::invalid(
                "n_points",
                format!("must be a power of two >= {MIN_POINTS}, got {n_points}"),
            ));
        }
        let n = T::from_count(n_points);
        let length = x_max - x_min;
        let dx = length / n;
        let xs = (0..n_points).map(|j| x_min + dx * T::from_count(j)).collect();
        let dk = T::TAU() / length;
        let ks = (0..n_points)
            .map(|j| {
                if j < n_points / 2 {
                    dk * T::from_count(j)
                } else {
                    -(dk * T::from_count(n_points - j))
                }
            })
            .collect();
        Ok(Self {
            x_min,
            x_max,
            dx,
            xs,
            ks,
        })
    }

    /// Grid on `[−half_width, half_width)`.
    pub fn symmetric(half_width: T, n_points: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n_points)
    }

    /// `±max(12 σ∞, 12 σ_gs)` with [`DEFAULT_POINTS`] points.
    pub fn default_for(params: &OscillatorParams<T>, predicted_sigma: T) -> Result<Self> {
        let half = T::lit(12.0) * predicted_sigma.max(params.sigma_gs());
        Self::symmetric(half, DEFAULT_POINTS)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    pub fn x_min(&self) -> T {
        self.x_min
    }

    pub fn x_max(&self) -> T {
        self.x_max
    }

    pub fn positions(&self) -> &[T] {
        &self.xs
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> &[T] {
        &self.ks
    }

    fn check_width(&self, what: &str, width: T) -> Result<()> {
        if width.as_f64() < MIN_SPACINGS_PER_WIDTH * self.dx.as_f64() {
            return Err(Error::GridTooCoarse(format!(
                "{what} {width} is under {MIN_SPACINGS_PER_WIDTH} grid spacings (dx = {})",
                self.dx
            )));
        }
        Ok(())
    }
}

/// Complex amplitudes on a [`Grid`].
#[derive(Debug, Clone)]
pub struct GridWavefunction<T> {
    grid: Arc<Grid<T>>,
    amps: Vec<Complex<T>>,
}

impl<T: Real> GridWavefunction<T> {
    pub fn from_amplitudes(grid: Arc<Grid<T>>, amps: Vec<Complex<T>>) -> Result<Self> {
        if amps.len() != grid.len() {
            return Err(Error::invalid(
                "amplitudes",
                format!("expected {} values, got {}", grid.len(), amps.len()),
            ));
        }
        Ok(Self { grid, amps })
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    /// `|ψ|²` at each grid point.
    pub fn density(&self) -> Vec<T> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `Σ |ψ|² dx`.
    pub fn norm(&self) -> T {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<T>() * self.grid.dx
    }

    pub fn normalize(&mut self) {
        let scale = T::one() / self.norm().sqrt();
        self.amps.iter_mut().for_each(|a| *a = *a * scale);
    }

    /// Mean and standard deviation of the position density.
    pub fn position_moments(&self) -> (T, T) {
        let xs = self.grid.positions();
        let mut mass = T::zero();
        let mut first = T::zero();
        for (a, &x) in self.amps.iter().zip(xs) {
            let p = a.norm_sqr();
            mass = mass + p;
            first = first + p * x;
        }
        let mean = first / mass;
        let var = self
            .amps
            .iter()
            .zip(xs)
            .map(|(a, &x)| a.norm_sqr() * (x - mean) * (x - mean))
            .sum::<T>()
            / mass;
        (mean, var.sqrt())
    }

    /// Probability within [`EDGE_FRACTION`] of either end of the grid.
    pub fn edge_mass(&self) -> T {
        let n = self.amps.len();
        let edge = ((n as f64) * EDGE_FRACTION).ceil() as usize;
        let lo: T = self.amps[..edge].iter().map(|a| a.norm_sqr()).sum();
        let hi: T = self.amps[n - edge..].iter().map(|a| a.norm_sqr()).sum();
        (lo + hi) * self.grid.dx
    }
}

/// Discretised Gaussian packet `∝ exp(−(x − x0)² / (4σ²))`, renormalised on
/// the grid.
pub fn init_packet<T: Real>(grid: &Arc<Grid<T>>, packet: &WavePacket<T>) -> Result<GridWavefunction<T>> {
    let reach = T::lit(PACKET_MARGIN) * packet.width;
    if packet.center + reach >= grid.x_max || packet.center - reach <= grid.x_min {
        return Err(Error::GridTooSmall(format!(
            "packet at {} with width {} needs ±{PACKET_MARGIN} widths inside [{}, {})",
            packet.center, packet.width, grid.x_min, grid.x_max
        )));
    }
    grid.check_width("packet width", packet.width)?;
    let mut psi = GridWavefunction {
        grid: Arc::clone(grid),
        amps: gaussian_amplitudes(grid, packet.center, packet.width),
    };
    psi.normalize();
    Ok(psi)
}

fn gaussian_amplitudes<T: Real>(grid: &Grid<T>, center: T, width: T) -> Vec<Complex<T>> {
    let denom = T::lit(4.0) * width * width;
    grid.positions()
        .iter()
        .map(|&x| Complex::new((-(x - center) * (x - center) / denom).exp(), T::zero()))
        .collect()
}

/// Split-operator propagator for the harmonic Hamiltonian on one grid. FFT
/// plans and phase tables are cached, so one propagator should be reused for
/// a whole chain.
pub struct Propagator<T: FftNum> {
    grid: Arc<Grid<T>>,
    params: OscillatorParams<T>,
    steps_per_period: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    scratch: Vec<Complex<T>>,
    cached_dt: Option<T>,
    half_potential: Vec<Complex<T>>,
    full_potential: Vec<Complex<T>>,
    kinetic: Vec<Complex<T>>,
}

impl<T: Real + FftNum> Propagator<T> {
    pub fn new(grid: Arc<Grid<T>>, params: OscillatorParams<T>) -> Result<Self> {
        Self::with_steps(grid, params, DEFAULT_STEPS_PER_PERIOD)
    }

    /// `steps_per_period` bounds the time step at `T_osc / steps_per_period`.
    pub fn with_steps(
        grid: Arc<Grid<T>>,
        params: OscillatorParams<T>,
        steps_per_period: usize,
    ) -> Result<Self> {
        if steps_per_period == 0 {
            return Err(Error::invalid("steps_per_period", "must be at least 1"));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.len());
        let inverse = planner.plan_fft_inverse(grid.len());
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Ok(Self {
            grid,
            params,
            steps_per_period,
            forward,
            inverse,
            scratch: vec![Complex::default(); scratch_len],
            cached_dt: None,
            half_potential: Vec::new(),
            full_potential: Vec::new(),
            kinetic: Vec::new(),
        })
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn params(&self) -> &OscillatorParams<T> {
        &self.params
    }

    fn potential(&self, x: T) -> T {
        T::lit(0.5) * self.params.mass * self.params.omega * self.params.omega * x * x
    }

    fn prepare(&mut self, dt: T) {
        if self.cached_dt == Some(dt) {
            return;
        }
        let p = self.params;
        let half = T::lit(0.5);
        self.half_potential = self
            .grid
            .positions()
            .iter()
            .map(|&x| Complex::from_polar(T::one(), -self.potential(x) * dt * half / p.hbar))
            .collect();
        self.full_potential = self.half_potential.iter().map(|c| c * c).collect();
        let inv_n = T::one() / T::from_count(self.grid.len());
        self.kinetic = self
            .grid
            .wavenumbers()
            .iter()
            .map(|&k| Complex::from_polar(inv_n, -p.hbar * k * k * dt * half / p.mass))
            .collect();
        self.cached_dt = Some(dt);
    }

    /// Number of Strang steps used for an interval `t`.
    pub fn steps_for(&self, t: T) -> usize {
        let dt_max = self.params.period() / T::from_count(self.steps_per_period);
        let n = (t / dt_max).as_f64();
        (n - 1e-9).ceil().max(1.0) as usize
    }

    /// Evolve `psi` in place for time `t >= 0`.
    pub fn evolve(&mut self, psi: &mut GridWavefunction<T>, t: T) -> Result<()> {
        if !Arc::ptr_eq(&psi.grid, &self.grid) && *psi.grid != *self.grid {
            return Err(Error::invalid("psi", "wavefunction lives on a different grid"));
        }
        if !(t >= T::zero()) || !t.is_finite() {
            return Err(Error::invalid("t", format!("must be finite and >= 0, got {t}")));
        }
        if t == T::zero() {
            return Ok(());
        }
        let steps = self.steps_for(t);
        self.prepare(t / T::from_count(steps));
        let amps = &mut psi.amps;
        mul_assign(amps, &self.half_potential);
        for i in 0..steps {
            self.forward.process_with_scratch(amps, &mut self.scratch);
            mul_assign(amps, &self.kinetic);
            self.inverse.process_with_scratch(amps, &mut self.scratch);
            if i + 1 < steps {
                mul_assign(amps, &self.full_potential);
            }
        }
        mul_assign(amps, &self.half_potential);
        Ok(())
    }

    /// `⟨H⟩` of a normalised state, with the kinetic term evaluated
    /// spectrally.
    pub fn energy(&mut self, psi: &GridWavefunction<T>) -> T {
        let p = self.params;
        let norm = psi.norm();
        let potential = psi
            .amps
            .iter()
            .zip(self.grid.positions())
            .map(|(a, &x)| a.norm_sqr() * self.potential(x))
            .sum::<T>()
            * self.grid.dx
            / norm;
        let mut spectrum = psi.amps.clone();
        self.forward.process_with_scratch(&mut spectrum, &mut self.scratch);
        let total: T = spectrum.iter().map(|c| c.norm_sqr()).sum();
        let kinetic = spectrum
            .iter()
            .zip(self.grid.wavenumbers())
            .map(|(c, &k)| c.norm_sqr() * p.hbar * p.hbar * k * k / (T::lit(2.0) * p.mass))
            .sum::<T>()
            / total;
        kinetic + potential
    }
}

fn mul_assign<T: Real>(amps: &mut [Complex<T>], phases: &[Complex<T>]) {
    amps.iter_mut().zip(phases).for_each(|(a, p)| *a = *a * p);
}

/// One-shot evolution with a fresh default propagator.
pub fn evolve<T: Real + FftNum>(
    psi: &GridWavefunction<T>,
    t: T,
    params: &OscillatorParams<T>,
) -> Result<GridWavefunction<T>> {
    let mut prop = Propagator::new(Arc::clone(&psi.grid), *params)?;
    let mut out = psi.clone();
    prop.evolve(&mut out, t)?;
    Ok(out)
}

/// How a measurement updates the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollapseMode {
    /// Discard the state and substitute a Gaussian of width `σ_M` centred on
    /// the outcome.
    Replace,
    /// Multiply the state by the weak-measurement window whose width `σ_W`
    /// and centre `x_W` are chosen from a Gaussian fit of the prior density so
    /// that, for a Gaussian prior, the post-measurement density is exactly
    /// that of [`Replace`](Self::Replace). The phase of the prior survives.
    WeakProduct,
}

/// Random stream consumed by measurements: one uniform per outcome.
#[derive(Debug, Clone)]
pub struct CollapseRng {
    outcome: NormalStream,
}

impl CollapseRng {
    pub fn new(seed: u64, chain: u64) -> Self {
        Self {
            outcome: NormalStream::for_chain(seed, chain, StreamRole::Outcome),
        }
    }
}

/// Position drawn from the discrete density by inverse CDF, each grid point
/// owning a cell of width `dx` with linear interpolation inside it.
pub fn sample_position<T: Real>(psi: &GridWavefunction<T>, u: f64) -> T {
    let dens = psi.density();
    let total: f64 = dens.iter().map(|p| p.as_f64()).sum();
    let target = u * total;
    let mut cum = 0.0;
    let xs = psi.grid.positions();
    let dx = psi.grid.dx.as_f64();
    for (i, p) in dens.iter().enumerate() {
        let p = p.as_f64();
        if p > 0.0 && cum + p >= target {
            let frac = ((target - cum) / p).clamp(0.0, 1.0);
            return T::lit(xs[i].as_f64() - 0.5 * dx + frac * dx);
        }
        cum += p;
    }
    // u rounded past the last occupied cell
    let last = dens.iter().rposition(|p| *p > T::zero()).unwrap_or(dens.len() - 1);
    T::lit(xs[last].as_f64() + 0.5 * dx)
}

/// Measure position with instrument width `sigma_m` and collapse the state.
/// Returns the recorded outcome and the normalised post-measurement state.
pub fn measure_and_collapse<T: Real>(
    psi: &GridWavefunction<T>,
    sigma_m: T,
    mode: CollapseMode,
    rng: &mut CollapseRng,
) -> Result<(T, GridWavefunction<T>)> {
    let grid = &psi.grid;
    grid.check_width("instrument width", sigma_m)?;
    let x = sample_position(psi, rng.outcome.uniform());
    let amps = match mode {
        CollapseMode::Replace => gaussian_amplitudes(grid, x, sigma_m),
        CollapseMode::WeakProduct => {
            let (mean, std) = psi.position_moments();
            let prior = Gaussian::new(mean, std)?;
            let (sigma_w, x_w) = povm_parameters(sigma_m, x, &prior)?;
            let window = gaussian_amplitudes(grid, x_w, sigma_w);
            psi.amps.iter().zip(&window).map(|(a, w)| a * w.re).collect()
        }
    };
    let mut out = GridWavefunction {
        grid: Arc::clone(grid),
        amps,
    };
    if !(out.norm() > T::zero()) {
        return Err(Error::GridTooSmall(format!(
            "weak window at {x} has no overlap with the state on the grid"
        )));
    }
    out.normalize();
    Ok((x, out))
}

/// Observer for per-measurement states: `(measurement index, before, after)`.
pub type SnapshotFn<'a, T> = dyn FnMut(usize, &GridWavefunction<T>, &GridWavefunction<T>) + 'a;

/// Measurement chain driven entirely by grid dynamics.
pub fn run_chain_grid<T: Real + FftNum>(
    cfg: &ChainConfig<T>,
    grid: Grid<T>,
    mode: CollapseMode,
) -> Result<MeasurementRecord<T>> {
    let mut prop = Propagator::new(Arc::new(grid), cfg.params)?;
    run_chain_grid_with(cfg, &mut prop, mode, None)
}

/// As [`run_chain_grid`], with a caller-configured propagator and an optional
/// snapshot observer.
pub fn run_chain_grid_with<T: Real + FftNum>(
    cfg: &ChainConfig<T>,
    prop: &mut Propagator<T>,
    mode: CollapseMode,
    mut snapshot: Option<&mut SnapshotFn<'_, T>>,
) -> Result<MeasurementRecord<T>> {
    let grid = Arc::clone(prop.grid());
    if let Ok(sigma_inf) = cfg.predicted_sigma() {
        let reach = T::lit(PACKET_MARGIN) * sigma_inf;
        if grid.x_max < reach || grid.x_min > -reach {
            return Err(Error::GridTooSmall(format!(
                "grid [{}, {}) does not cover ±{PACKET_MARGIN}·σ∞ = ±{reach}",
                grid.x_min, grid.x_max
            )));
        }
    }
    grid.check_width("instrument width", cfg.scheme.sigma_m)?;

    let scheme = cfg.scheme;
    let mut rng = CollapseRng::new(cfg.seed, 0);
    let mut jitter = NormalStream::for_chain(cfg.seed, 0, StreamRole::Jitter);
    let jittered = scheme.jitter_std > T::zero();
    let t_min = T::lit(JITTER_FLOOR) * scheme.t_m;

    let mut psi = init_packet(&grid, &cfg.initial)?;
    let mut samples = Vec::with_capacity(cfg.n_measurements);
    let mut periods = jittered.then(|| Vec::with_capacity(cfg.n_measurements));
    for step in 0..cfg.n_measurements {
        let t = if jittered {
            (scheme.t_m + scheme.jitter_std * T::lit(jitter.standard_normal())).max(t_min)
        } else {
            scheme.t_m
        };
        prop.evolve(&mut psi, t)?;
        let edge = psi.edge_mass().as_f64();
        if edge > LEAKAGE_LIMIT {
            return Err(Error::Leakage { mass: edge, step });
        }
        let (x, next) = measure_and_collapse(&psi, scheme.sigma_m, mode, &mut rng)?;
        if let Some(f) = snapshot.as_mut() {
            f(step, &psi, &next);
        }
        psi = next;
        samples.push(x);
        if let Some(p) = periods.as_mut() {
            p.push(t);
        }
    }
    Ok(MeasurementRecord { samples, periods })
}
