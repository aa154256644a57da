//! Monte Carlo measurement records and their plot-ready tables.

use std::sync::Arc;

use serde::Serialize;

use qho_core::grid::{run_chain_grid_with, Propagator};
use qho_core::ks::thinned_normality;
use qho_core::stats::{batch_std_error, DEFAULT_BINS};
use qho_core::trajectory::{run_chain, run_chain_jittered, running_std, HISTOGRAM_SIGMAS};
use qho_core::{ChainConfig, Gaussian, Grid, MeasurementRecord, RunningStats};

use crate::config::{Engine, RunConfig};
use crate::output::{num, opt_num, Csv, OutputSet};
use crate::CliResult;

/// Batches used for the standard error of the sample std.
pub const STD_ERROR_BATCHES: usize = 50;

#[derive(Debug, Clone, Serialize)]
pub struct KsSummary {
    pub statistic: f64,
    pub n: usize,
    pub stride: usize,
    pub critical_1pct: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramSummary {
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
    pub underflow: u64,
    pub overflow: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub points: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    pub steps_per_period: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub command: &'static str,
    pub config: RunConfig,
    pub n: usize,
    pub sample_mean: f64,
    pub sample_std: Option<f64>,
    /// Batch-means standard error of `sample_std`.
    pub sample_std_error: Option<f64>,
    /// Limiting width at the nominal period; `None` at resonance.
    pub sigma_inf_predicted: Option<f64>,
    pub relative_error: Option<f64>,
    pub ks: Option<KsSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_note: Option<String>,
    pub histogram: HistogramSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSummary>,
    pub files: Vec<String>,
}

/// Half-width of the grid engine's box: the larger of `12 σ∞`, `12 σ_gs` and
/// the initial packet's reach, unless the config fixes it.
pub fn grid_half_width(cfg: &RunConfig, chain: &ChainConfig<f64>) -> CliResult<f64> {
    if let Some(h) = cfg.grid.half_width {
        return Ok(h);
    }
    let spread = match chain.predicted_sigma() {
        Ok(s) => s,
        Err(_) => chain.histogram_half_width()? / HISTOGRAM_SIGMAS,
    };
    let reach = cfg.initial.center.abs() + 12.0 * cfg.initial.width;
    Ok((12.0 * spread.max(chain.params.sigma_gs())).max(reach))
}

/// Checkpoints for the running std: every `n` up to 10, then twenty per
/// decade, then the full length.
pub fn checkpoints(n: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (1..=n.min(10)).collect();
    let mut k = 21;
    loop {
        let c = 10f64.powf(k as f64 / 20.0).round() as usize;
        if c >= n {
            break;
        }
        if out.last() != Some(&c) {
            out.push(c);
        }
        k += 1;
    }
    if out.last() != Some(&n) {
        out.push(n);
    }
    out
}

/// Receives (measurement count, positions, density before, density after).
pub type SnapshotSink<'a> = dyn FnMut(usize, &[f64], &[f64], &[f64]) + 'a;

/// Measurement record for `cfg`, plus the grid used when the engine is the
/// grid solver. Grid densities are handed to `snapshot` every
/// `grid.snapshot_every` measurements.
pub fn record(
    cfg: &RunConfig,
    mut snapshot: Option<&mut SnapshotSink<'_>>,
) -> CliResult<(MeasurementRecord<f64>, Option<GridSummary>)> {
    let chain = cfg.chain_config();
    let jittered = cfg.scheme.jitter_std > 0.0;
    match cfg.engine {
        Engine::Chain => {
            let (rec, _) = if jittered {
                run_chain_jittered(&chain)?
            } else {
                run_chain(&chain)?
            };
            Ok((rec, None))
        }
        Engine::Grid => {
            if !jittered {
                chain.scheme.check_resonance(&chain.params)?;
            }
            let half = grid_half_width(cfg, &chain)?;
            let grid = Arc::new(Grid::symmetric(half, cfg.grid.points)?);
            let summary = GridSummary {
                points: grid.len(),
                x_min: grid.x_min(),
                x_max: grid.x_max(),
                dx: grid.dx(),
                steps_per_period: cfg.grid.steps_per_period,
            };
            let mut prop = Propagator::with_steps(Arc::clone(&grid), chain.params, cfg.grid.steps_per_period)?;
            let every = cfg.grid.snapshot_every;
            let rec = match snapshot.as_mut().filter(|_| every > 0) {
                Some(f) => {
                    let xs = grid.positions();
                    let mut obs = |i: usize, before: &qho_core::GridWavefunction<f64>, after: &qho_core::GridWavefunction<f64>| {
                        if (i + 1).is_multiple_of(every) {
                            f(i + 1, xs, &before.density(), &after.density());
                        }
                    };
                    run_chain_grid_with(&chain, &mut prop, cfg.collapse.into(), Some(&mut obs))?
                }
                None => run_chain_grid_with(&chain, &mut prop, cfg.collapse.into(), None)?,
            };
            Ok((rec, Some(summary)))
        }
    }
}

fn meta(cfg: &RunConfig) -> Vec<(&'static str, String)> {
    vec![
        ("engine", format!("{:?}", cfg.engine).to_lowercase()),
        ("collapse", format!("{:?}", cfg.collapse).to_lowercase()),
        ("seed", cfg.seed.to_string()),
        ("n_measurements", cfg.n_measurements.to_string()),
        ("mass", num(cfg.oscillator.mass)),
        ("omega", num(cfg.oscillator.omega)),
        ("hbar", num(cfg.oscillator.hbar)),
        ("t_m", num(cfg.scheme.t_m)),
        ("sigma_m", num(cfg.scheme.sigma_m)),
        ("jitter_std", num(cfg.scheme.jitter_std)),
    ]
}

/// Runs the simulation and writes `samples.csv`, `running_std.csv`,
/// `histogram.csv`, `summary.json` (and `snapshots.csv` for grid runs with
/// snapshots enabled) into `cfg.out`.
pub fn run(cfg: &RunConfig) -> CliResult<SimulateSummary> {
    let chain = cfg.chain_config();
    let mut out = OutputSet::create(&cfg.out)?;
    let meta = meta(cfg);

    let mut snap = (cfg.engine == Engine::Grid && cfg.grid.snapshot_every > 0).then(|| {
        Csv::new("qho.snapshots", &meta, &["measurement", "x", "density_before", "density_after"])
    });
    let mut sink = |i: usize, xs: &[f64], before: &[f64], after: &[f64]| {
        if let Some(csv) = snap.as_mut() {
            for ((x, b), a) in xs.iter().zip(before).zip(after) {
                csv.row(&[i.to_string(), num(*x), num(*b), num(*a)]);
            }
        }
    };
    let (rec, grid) = record(cfg, Some(&mut sink))?;
    let snap = snap;

    let samples = &rec.samples;
    let nominal = cfg.scheme.t_m;
    let mut csv = Csv::new("qho.samples", &meta, &["index", "x_m", "t_eff"]);
    for (i, x) in samples.iter().enumerate() {
        csv.row(&[(i + 1).to_string(), num(*x), num(rec.period(i, nominal))]);
    }
    out.write_csv("samples.csv", &csv)?;

    let marks = checkpoints(samples.len());
    let mut csv = Csv::new("qho.running_std", &meta, &["n", "std"]);
    for (n, s) in marks.iter().zip(running_std(samples, &marks)) {
        csv.row(&[n.to_string(), s.map(num).unwrap_or_else(|| "null".into())]);
    }
    out.write_csv("running_std.csv", &csv)?;

    let predicted = chain.predicted_sigma().ok();
    let mut stats = RunningStats::with_range(chain.histogram_half_width()?)?;
    samples.iter().for_each(|&x| stats.push(x));
    let hist = stats.histogram();
    let overlay = predicted.map(Gaussian::centered).transpose()?;
    let edges = hist.edges();
    let width = hist.bin_width();
    let total = samples.len() as f64;
    let mut csv = Csv::new(
        "qho.histogram",
        &meta,
        &["bin_lo", "bin_hi", "count", "density", "analytic"],
    );
    for (i, &count) in hist.counts().iter().enumerate() {
        let (lo, hi) = (edges[i], edges[i + 1]);
        let analytic = overlay.map(|g| g.pdf(0.5 * (lo + hi)));
        csv.row(&[
            num(lo),
            num(hi),
            count.to_string(),
            num(count as f64 / (total * width)),
            opt_num(analytic),
        ]);
    }
    out.write_csv("histogram.csv", &csv)?;

    if let Some(csv) = &snap {
        out.write_csv("snapshots.csv", csv)?;
    }

    let sample_std = stats.std();
    let (ks, ks_note) = match predicted {
        None => (None, Some("no limiting width at a resonant period".to_string())),
        Some(sigma) => match thinned_normality(samples, chain.scheme.rho(&chain.params), sigma) {
            Ok(k) => (
                Some(KsSummary {
                    statistic: k.statistic,
                    n: k.n,
                    stride: k.stride,
                    critical_1pct: k.critical,
                    passed: k.passed(),
                }),
                None,
            ),
            Err(e) => (None, Some(e.to_string())),
        },
    };
    let (lo, hi) = hist.range();
    let mut files: Vec<String> = ["samples.csv", "running_std.csv", "histogram.csv"]
        .into_iter()
        .map(String::from)
        .collect();
    if snap.is_some() {
        files.push("snapshots.csv".into());
    }
    files.push("summary.json".into());
    let summary = SimulateSummary {
        command: "simulate",
        config: cfg.clone(),
        n: samples.len(),
        sample_mean: stats.mean(),
        sample_std,
        sample_std_error: batch_std_error(samples, STD_ERROR_BATCHES).ok(),
        sigma_inf_predicted: predicted,
        relative_error: sample_std.zip(predicted).map(|(s, p)| s / p - 1.0),
        ks,
        ks_note,
        histogram: HistogramSummary {
            bins: DEFAULT_BINS,
            lo,
            hi,
            underflow: hist.underflow(),
            overflow: hist.overflow(),
        },
        grid,
        files,
    };
    out.write_json("summary.json", &summary)?;
    out.commit();
    Ok(summary)
}
