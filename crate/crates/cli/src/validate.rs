//! Cross-check battery: closed forms against the grid solver, the sampled
//! chain, quadrature, direct summation and the weak-measurement mapping.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use qho_core::chain::{
    density_before_nth, ensemble_variance_partial, limiting_sigma, limiting_sigma_simplified,
    povm_parameters, sigma_m_for_ratio,
};
use qho_core::gaussian::{evolved_width, gaussian_product};
use qho_core::grid::{
    init_packet, measure_and_collapse, CollapseRng, Propagator, LEAKAGE_LIMIT,
    MIN_SPACINGS_PER_WIDTH,
};
use qho_core::oracle::{average_variance, convolved_second_std};
use qho_core::rng::NormalStream;
use qho_core::stats::batch_std_error;
use qho_core::trajectory::run_chain;
use qho_core::{
    ChainClosedForm, ChainConfig, CollapseMode, Gaussian, Grid, MeasurementScheme, WavePacket,
};

use crate::config::RunConfig;
use crate::output::OutputSet;
use crate::simulate::{grid_half_width, STD_ERROR_BATCHES};
use crate::CliResult;

pub const IDENTITY_TOL: f64 = 1e-12;
pub const GRID_TOL: f64 = 1e-4;
pub const CHAIN_TOL: f64 = 0.01;
pub const QUADRATURE_TOL: f64 = 1e-6;
pub const PARTIAL_SUM_TOL: f64 = 1e-10;
pub const POVM_TOL: f64 = 1e-9;
/// The collapse comparison runs with `σ_M = GAP_RATIO · σ(t_M)`.
pub const GAP_RATIO: f64 = 0.1;
/// Caps on the collapse comparison's grid, which runs two full grid chains.
pub const GAP_MAX_POINTS: usize = 2048;
pub const GAP_MAX_STEPS_PER_PERIOD: usize = 256;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst relative error seen, or `None` if the check could not run.
    pub measured: Option<f64>,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn measured(name: &'static str, measured: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name,
            passed: measured <= tolerance,
            measured: Some(measured),
            tolerance,
            detail,
        }
    }

    fn failed(name: &'static str, tolerance: f64, detail: String) -> Self {
        Self {
            name,
            passed: false,
            measured: None,
            tolerance,
            detail,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidateReport {
    pub command: &'static str,
    pub config: RunConfig,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn uniform(rng: &mut NormalStream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.uniform()
}

/// Random non-resonant chain setups, after the configured one.
fn closed_forms(cfg: &RunConfig, count: usize, stream: u64) -> Vec<ChainClosedForm<f64>> {
    let mut out = Vec::with_capacity(count + 1);
    if let Ok(cf) = cfg.chain_config().closed_form() {
        if cf.check_resonance().is_ok() {
            out.push(cf);
        }
    }
    let mut rng = NormalStream::new(cfg.seed, stream);
    while out.len() < count + 1 {
        let step = uniform(&mut rng, 0.2, 3.0);
        let first = uniform(&mut rng, 0.2, 3.0);
        let rho = uniform(&mut rng, -0.95, 0.95);
        out.push(ChainClosedForm::new(step, first, rho).expect("valid draw"));
    }
    out
}

fn formula_identity(cfg: &RunConfig) -> CheckResult {
    let mut rng = NormalStream::new(cfg.seed, 101);
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < 10_000 {
        let p = qho_core::OscillatorParams::new(
            uniform(&mut rng, 0.1, 10.0),
            uniform(&mut rng, 0.1, 10.0),
            uniform(&mut rng, 0.1, 10.0),
        )
        .expect("positive draw");
        let t = uniform(&mut rng, 0.0, 1.0) * p.period();
        let s = MeasurementScheme::new(t, uniform(&mut rng, 0.05, 5.0) * p.sigma_gs()).expect("positive draw");
        if (p.omega * t).sin().abs() < 1e-3 {
            continue;
        }
        let a = ChainClosedForm::from_setup(&p, &s, s.sigma_m).and_then(|cf| limiting_sigma(&cf));
        let b = limiting_sigma_simplified(&p, &s);
        if let (Ok(a), Ok(b)) = (a, b) {
            worst = worst.max(rel(a, b));
            checked += 1;
        }
    }
    CheckResult::measured(
        "formula_identity",
        worst,
        IDENTITY_TOL,
        format!("two forms of the limiting width over {checked} random setups"),
    )
}

fn grid_spectral(cfg: &RunConfig) -> CheckResult {
    let name = "grid_vs_closed_form";
    let run = || -> qho_core::Result<(f64, String)> {
        let chain = cfg.chain_config();
        let p = chain.params;
        let gs = p.sigma_gs();
        let widths = [cfg.scheme.sigma_m, cfg.initial.width, gs];
        let times = [cfg.scheme.t_m, p.period() / 8.0, 0.375 * p.period()];
        let center = gs;
        let spread = widths
            .iter()
            .flat_map(|&w| times.iter().map(move |&t| (w, t)))
            .map(|(w, t)| evolved_width(&p, w, t).max(w))
            .fold(0.0f64, f64::max);
        let base = grid_half_width(cfg, &chain).unwrap_or(0.0);
        let half = base.max(center + 12.0 * spread);
        let grid = Arc::new(Grid::symmetric(half, cfg.grid.points)?);
        let mut prop = Propagator::with_steps(Arc::clone(&grid), p, cfg.grid.steps_per_period)?;
        let mut worst = 0.0f64;
        for &w in &widths {
            for &t in &times {
                let mut psi = init_packet(&grid, &WavePacket::new(center, w)?)?;
                prop.evolve(&mut psi, t)?;
                let (m, s) = psi.position_moments();
                let s_ref = evolved_width(&p, w, t);
                let m_ref = center * (p.omega * t).cos();
                worst = worst.max(rel(s, s_ref)).max((m - m_ref).abs() / s_ref);
            }
        }
        Ok((
            worst,
            format!(
                "9 packets on {} points over ±{half:.4} (dx = {:.4}), {} steps per period",
                grid.len(),
                grid.dx(),
                cfg.grid.steps_per_period
            ),
        ))
    };
    match run() {
        Ok((worst, detail)) => CheckResult::measured(name, worst, GRID_TOL, detail),
        Err(e) => CheckResult::failed(name, GRID_TOL, format!("grid unusable: {e}")),
    }
}

fn chain_limit(cfg: &RunConfig) -> CheckResult {
    let name = "chain_vs_limit";
    let mut chain = cfg.chain_config();
    chain.scheme.jitter_std = 0.0;
    let run = || -> qho_core::Result<CheckResult> {
        let sigma = chain.predicted_sigma()?;
        let (rec, stats) = run_chain(&chain)?;
        let Some(std) = stats.std() else {
            return Ok(CheckResult::failed(name, CHAIN_TOL, "need at least 2 measurements".into()));
        };
        // Short runs get four standard errors of slack.
        let se = batch_std_error(&rec.samples, STD_ERROR_BATCHES).unwrap_or(f64::INFINITY);
        let tol = CHAIN_TOL.max(4.0 * se / sigma);
        Ok(CheckResult::measured(
            name,
            rel(std, sigma),
            tol,
            format!(
                "sample std {std:.6} vs {sigma:.6} over {} measurements (jitter off)",
                rec.len()
            ),
        ))
    };
    run().unwrap_or_else(|e| CheckResult::failed(name, CHAIN_TOL, e.to_string()))
}

fn quadrature(cfg: &RunConfig) -> CheckResult {
    let forms = closed_forms(cfg, 20, 102);
    let worst = forms
        .par_iter()
        .map(|cf| {
            let closed = density_before_nth(cf, 2).map(|g| g.std()).unwrap_or(f64::NAN);
            let quad = convolved_second_std(cf.sigma_first, cf.sigma_step, cf.rho);
            rel(quad, closed)
        })
        .reduce(|| 0.0, |a: f64, b: f64| if b.is_nan() { b } else { a.max(b) });
    CheckResult::measured(
        "quadrature_second_density",
        worst,
        QUADRATURE_TOL,
        format!("convolution of the first density with the step kernel, {} setups", forms.len()),
    )
}

fn partial_sums(cfg: &RunConfig) -> CheckResult {
    let mut forms = closed_forms(cfg, 10, 103);
    // near resonance, where the closed series cancels
    forms.push(ChainClosedForm::new(1e-3, 1.5, (1.0f64 - 1e-7).sqrt()).expect("valid"));
    let ns = [1usize, 2, 10, 100, 1000, 10_000];
    let worst = forms
        .par_iter()
        .flat_map_iter(|cf| {
            ns.iter().map(move |&n| {
                let closed = ensemble_variance_partial(cf, n).unwrap_or(f64::NAN);
                rel(closed, average_variance(cf.sigma_first, cf.sigma_step, cf.rho, n))
            })
        })
        .reduce(|| 0.0, |a: f64, b: f64| if b.is_nan() { b } else { a.max(b) });
    CheckResult::measured(
        "partial_sums",
        worst,
        PARTIAL_SUM_TOL,
        format!("pooled variance of the first n outcomes, n up to 10^4, {} setups", forms.len()),
    )
}

fn povm(cfg: &RunConfig) -> CheckResult {
    let name = "povm_round_trip";
    let mut rng = NormalStream::new(cfg.seed, 104);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let sigma_m = uniform(&mut rng, 0.05, 2.0);
        let prior_std = sigma_m * uniform(&mut rng, 1.05, 20.0);
        let prior = Gaussian::new(uniform(&mut rng, -5.0, 5.0), prior_std).expect("positive");
        let x_m = uniform(&mut rng, -5.0, 5.0);
        let (sigma_w, x_w) = match povm_parameters(sigma_m, x_m, &prior) {
            Ok(v) => v,
            Err(e) => return CheckResult::failed(name, POVM_TOL, e.to_string()),
        };
        let window = Gaussian::new(x_w, sigma_w).expect("positive");
        let (post, _) = gaussian_product(&window, &prior);
        worst = worst
            .max(rel(post.std(), sigma_m))
            .max((post.mean() - x_m).abs() / x_m.abs().max(sigma_m));
    }
    CheckResult::measured(
        name,
        worst,
        POVM_TOL,
        "weak window times prior against the replacement state, 1000 cases".into(),
    )
}

/// Outcome of running the replace and weak-product grid chains side by side.
#[derive(Debug, Clone, Serialize)]
pub struct CollapseGap {
    pub sigma_m: f64,
    pub requested: usize,
    /// Outcomes each chain produced before finishing or leaking.
    pub replace_len: usize,
    pub weak_len: usize,
    /// Sample stds over the common prefix of the two records.
    pub replace_std: Option<f64>,
    pub weak_std: Option<f64>,
    /// `|weak / replace − 1|` over the common prefix.
    pub gap: Option<f64>,
    pub setup: String,
}

/// Grid chain that stops, rather than failing, when probability reaches the
/// boundary strips. Returns the outcomes so far and whether it stopped early.
fn grid_chain_prefix(
    chain: &ChainConfig<f64>,
    prop: &mut Propagator<f64>,
    mode: CollapseMode,
) -> qho_core::Result<(Vec<f64>, bool)> {
    let grid = Arc::clone(prop.grid());
    let mut rng = CollapseRng::new(chain.seed, 0);
    let mut psi = init_packet(&grid, &chain.initial)?;
    let mut out = Vec::with_capacity(chain.n_measurements);
    for _ in 0..chain.n_measurements {
        prop.evolve(&mut psi, chain.scheme.t_m)?;
        if psi.edge_mass() > LEAKAGE_LIMIT {
            return Ok((out, true));
        }
        let (x, next) = measure_and_collapse(&psi, chain.scheme.sigma_m, mode, &mut rng)?;
        out.push(x);
        psi = next;
    }
    Ok((out, false))
}

fn sample_std(xs: &[f64]) -> Option<f64> {
    (xs.len() >= 2).then(|| {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
    })
}

/// Replace and weak-product grid chains with `σ_M = 0.1 σ(t_M)`, sharing
/// their outcome stream. The weak chain keeps the prior's phase and heats,
/// so it may leave the grid early; the stds are then compared over the
/// steps both chains completed.
pub fn collapse_gap_run(cfg: &RunConfig, n: usize) -> qho_core::Result<CollapseGap> {
    let p = cfg.params();
    let sigma_m = sigma_m_for_ratio(&p, cfg.scheme.t_m, GAP_RATIO)?;
    let scheme = MeasurementScheme::new(cfg.scheme.t_m, sigma_m)?;
    let chain = ChainConfig::new(p, scheme, cfg.initial(), n, cfg.seed)?;
    let sigma_inf = chain.predicted_sigma()?;
    let reach = cfg.initial.center.abs() + 12.0 * cfg.initial.width;
    let half = cfg
        .grid
        .half_width
        .unwrap_or((12.0 * sigma_inf.max(p.sigma_gs())).max(reach));
    let points = cfg.grid.points.min(GAP_MAX_POINTS);
    let steps = cfg.grid.steps_per_period.min(GAP_MAX_STEPS_PER_PERIOD);
    let grid = Arc::new(Grid::symmetric(half, points)?);
    grid_check(&grid, sigma_m)?;
    let run = |mode: CollapseMode| -> qho_core::Result<(Vec<f64>, bool)> {
        let mut prop = Propagator::with_steps(Arc::clone(&grid), p, steps)?;
        grid_chain_prefix(&chain, &mut prop, mode)
    };
    let (replace, weak) = rayon::join(|| run(CollapseMode::Replace), || run(CollapseMode::WeakProduct));
    let ((replace, r_left), (weak, w_left)) = (replace?, weak?);
    let common = replace.len().min(weak.len());
    let replace_std = sample_std(&replace[..common]);
    let weak_std = sample_std(&weak[..common]);
    let stopped = |left: bool, len: usize| if left { format!("left the grid after {len}") } else { format!("completed {len}") };
    Ok(CollapseGap {
        sigma_m,
        requested: n,
        replace_len: replace.len(),
        weak_len: weak.len(),
        replace_std,
        weak_std,
        gap: replace_std.zip(weak_std).map(|(r, w)| rel(w, r)),
        setup: format!(
            "sigma_M = {sigma_m:.6} (0.1 sigma(t_M)), {points} points over ±{half:.3}, {steps} steps per period; replace {}, weak {} of {n} measurements",
            stopped(r_left, replace.len()),
            stopped(w_left, weak.len()),
        ),
    })
}

/// The instrument must be resolved before the comparison means anything.
fn grid_check(grid: &Grid<f64>, sigma_m: f64) -> qho_core::Result<()> {
    if sigma_m < MIN_SPACINGS_PER_WIDTH * grid.dx() {
        return Err(qho_core::Error::GridTooCoarse(format!(
            "instrument width {sigma_m} is under {MIN_SPACINGS_PER_WIDTH} grid spacings (dx = {})",
            grid.dx()
        )));
    }
    Ok(())
}

fn collapse_gap(cfg: &RunConfig) -> CheckResult {
    let name = "collapse_gap";
    let tol = cfg.validate.weak_gap_tol;
    match collapse_gap_run(cfg, cfg.validate.grid_measurements) {
        Ok(g) => match (g.gap, g.replace_std, g.weak_std) {
            (Some(gap), Some(r), Some(w)) => CheckResult {
                name,
                // a chain that left the grid did not produce the requested record
                passed: gap <= tol && g.replace_len == g.requested && g.weak_len == g.requested,
                measured: Some(gap),
                tolerance: tol,
                detail: format!("replace std {r:.6}, weak std {w:.6}; {}", g.setup),
            },
            _ => CheckResult::failed(name, tol, format!("too few outcomes to compare; {}", g.setup)),
        },
        Err(e) => CheckResult::failed(name, tol, e.to_string()),
    }
}

type Check = fn(&RunConfig) -> CheckResult;

const CHECKS: [Check; 7] = [
    formula_identity,
    grid_spectral,
    chain_limit,
    quadrature,
    partial_sums,
    povm,
    collapse_gap,
];

pub fn validate(cfg: &RunConfig) -> ValidateReport {
    let checks: Vec<CheckResult> = CHECKS.par_iter().map(|check| check(cfg)).collect();
    ValidateReport {
        command: "validate",
        config: cfg.clone(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

/// Runs the battery and writes `validate.json`, pass or fail.
pub fn run(cfg: &RunConfig) -> CliResult<ValidateReport> {
    let report = validate(cfg);
    let mut out = OutputSet::create(&cfg.out)?;
    out.write_json("validate.json", &report)?;
    out.commit();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Overrides;

    fn cfg(o: Overrides) -> RunConfig {
        RunConfig::resolve(&o.merge().unwrap()).unwrap()
    }

    #[test]
    fn cheap_checks_pass_on_defaults() {
        let c = cfg(Overrides {
            n: Some(100_000),
            ..Default::default()
        });
        for check in [formula_identity, quadrature, partial_sums, povm, chain_limit, grid_spectral] {
            let r = check(&c);
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn coarse_grid_fails_with_diagnostic() {
        let c = cfg(Overrides {
            grid_points: Some(256),
            ..Default::default()
        });
        let r = grid_spectral(&c);
        assert!(!r.passed);
        assert!(r.detail.contains("coarse"), "{}", r.detail);
    }

    #[test]
    fn resonant_config_fails_chain_check() {
        let c = cfg(Overrides {
            tau_m: Some(0.5),
            ..Default::default()
        });
        assert!(!chain_limit(&c).passed);
    }
}
