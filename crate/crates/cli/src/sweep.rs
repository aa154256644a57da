//! Non-dimensional limiting width over a grid of `(ς_M, τ_M)`.

use rayon::prelude::*;
use serde::Serialize;

use qho_core::chain::{nondim_limit, optimal_precision};
use qho_core::{Error, NondimPoint};

use crate::config::{AxisSpec, RawConfig, RunConfig};
use crate::output::{num, opt_num, Csv, OutputSet};
use crate::{CliResult, ConfigError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CellFlag {
    Ok,
    Resonant,
    Invalid,
    Domain,
}

impl CellFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            CellFlag::Ok => "ok",
            CellFlag::Resonant => "resonant",
            CellFlag::Invalid => "invalid",
            CellFlag::Domain => "domain",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub varsigma_m: f64,
    pub tau_m: f64,
    pub varsigma_inf: Option<f64>,
    pub flag: CellFlag,
}

/// Axis values; an axis missing from the spec is pinned at the config value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub varsigma_m: Vec<f64>,
    pub tau_m: Vec<f64>,
    pub varsigma_axis: Option<AxisSpec>,
    pub tau_axis: Option<AxisSpec>,
}

impl SweepSpec {
    pub fn resolve(raw: &RawConfig, cfg: &RunConfig) -> Result<Self, ConfigError> {
        let (v_axis, t_axis) = (raw.sweep.varsigma_m, raw.sweep.tau_m);
        if v_axis.is_none() && t_axis.is_none() {
            return Err(ConfigError(
                "sweep needs --varsigma-range and/or --tau-range (or a [sweep] table)".into(),
            ));
        }
        let point = NondimPoint::from_scheme(&cfg.params(), &cfg.scheme());
        let values = |axis: Option<AxisSpec>, name: &str, pinned: f64| -> Result<Vec<f64>, ConfigError> {
            match axis {
                Some(a) => {
                    a.validate(name)?;
                    Ok(a.values())
                }
                None => Ok(vec![pinned]),
            }
        };
        Ok(Self {
            varsigma_m: values(v_axis, "varsigma_m", point.varsigma_m)?,
            tau_m: values(t_axis, "tau_m", point.tau_m)?,
            varsigma_axis: v_axis,
            tau_axis: t_axis,
        })
    }
}

/// Any finite `τ_M` is evaluated (the width is even and periodic in it), so
/// `τ_M = 0` comes out resonant; a non-positive `ς_M` is invalid.
pub fn evaluate(varsigma_m: f64, tau_m: f64) -> Cell {
    let point = NondimPoint::new(varsigma_m, 1.0).map(|p| NondimPoint { tau_m, ..p });
    let checked = point.and_then(|p| {
        if tau_m.is_finite() {
            nondim_limit(&p)
        } else {
            Err(Error::Domain(format!("tau_M = {tau_m}")))
        }
    });
    let (value, flag) = match checked {
        Ok(v) => (Some(v), CellFlag::Ok),
        Err(Error::Resonance { .. }) => (None, CellFlag::Resonant),
        Err(Error::InvalidParameter { .. }) => (None, CellFlag::Invalid),
        Err(_) => (None, CellFlag::Domain),
    };
    Cell {
        varsigma_m,
        tau_m,
        varsigma_inf: value,
        flag,
    }
}

/// Cells in row-major order: `τ_M` outer, `ς_M` inner. Cells are evaluated
/// in parallel; the order is fixed.
pub fn cells(spec: &SweepSpec) -> Vec<Cell> {
    let nv = spec.varsigma_m.len();
    (0..spec.tau_m.len() * nv)
        .into_par_iter()
        .map(|i| evaluate(spec.varsigma_m[i % nv], spec.tau_m[i / nv]))
        .collect()
}

/// Smallest flagged-ok value along one line of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineMinimum {
    /// The coordinate held fixed along the line.
    pub fixed: f64,
    /// Where the minimum sits on the swept coordinate.
    pub argmin: f64,
    pub min: f64,
    /// Closed-form optimum for lines at fixed `τ_M`, where one exists.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_argmin: Option<f64>,
    /// Every local minimum along a line in `τ_M`, where the global one
    /// repeats with period 1/2.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub local_argmins: Vec<f64>,
}

/// Positions of the local minima among consecutive flagged-ok cells.
fn local_argmins<'a>(line: impl Iterator<Item = &'a Cell>) -> Vec<f64> {
    let pts: Vec<(f64, Option<f64>)> = line.map(|c| (c.tau_m, c.varsigma_inf)).collect();
    let mut out = Vec::new();
    for i in 0..pts.len() {
        let Some(v) = pts[i].1 else { continue };
        let left = i.checked_sub(1).and_then(|j| pts[j].1);
        let right = pts.get(i + 1).and_then(|p| p.1);
        let below_left = left.is_none_or(|l| v < l);
        let below_right = right.is_none_or(|r| v <= r);
        if (left.is_some() || right.is_some()) && below_left && below_right {
            out.push(pts[i].0);
        }
    }
    out
}

fn line_min<'a>(line: impl Iterator<Item = &'a Cell>, by_tau: bool) -> Option<(f64, f64)> {
    line.filter_map(|c| c.varsigma_inf.map(|v| (if by_tau { c.tau_m } else { c.varsigma_m }, v)))
        .fold(None, |best: Option<(f64, f64)>, (x, v)| match best {
            Some((_, b)) if b <= v => best,
            _ => Some((x, v)),
        })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub command: &'static str,
    pub config: RunConfig,
    pub sweep: SweepSpec,
    pub cells: usize,
    pub ok: usize,
    pub flagged: usize,
    /// Minimum over `ς_M` for each `τ_M` (present when `ς_M` is swept).
    pub minima_over_varsigma: Vec<LineMinimum>,
    /// Minimum over `τ_M` for each `ς_M` (present when `τ_M` is swept).
    pub minima_over_tau: Vec<LineMinimum>,
    pub files: Vec<String>,
}

pub fn summarise(cfg: &RunConfig, spec: &SweepSpec, cells: &[Cell]) -> SweepSummary {
    let nv = spec.varsigma_m.len();
    let nt = spec.tau_m.len();
    let mut over_v = Vec::new();
    if nv > 1 {
        for (r, &tau) in spec.tau_m.iter().enumerate() {
            if let Some((argmin, min)) = line_min(cells[r * nv..(r + 1) * nv].iter(), false) {
                over_v.push(LineMinimum {
                    fixed: tau,
                    argmin,
                    min,
                    predicted_argmin: optimal_precision(tau).ok(),
                    local_argmins: Vec::new(),
                });
            }
        }
    }
    let mut over_t = Vec::new();
    if nt > 1 {
        for (c, &v) in spec.varsigma_m.iter().enumerate() {
            if let Some((argmin, min)) = line_min(cells.iter().skip(c).step_by(nv), true) {
                over_t.push(LineMinimum {
                    fixed: v,
                    argmin,
                    min,
                    predicted_argmin: None,
                    local_argmins: local_argmins(cells.iter().skip(c).step_by(nv)),
                });
            }
        }
    }
    let ok = cells.iter().filter(|c| c.flag == CellFlag::Ok).count();
    SweepSummary {
        command: "sweep",
        config: cfg.clone(),
        sweep: spec.clone(),
        cells: cells.len(),
        ok,
        flagged: cells.len() - ok,
        minima_over_varsigma: over_v,
        minima_over_tau: over_t,
        files: vec!["sweep.csv".into(), "sweep.json".into()],
    }
}

pub fn to_csv(cells: &[Cell]) -> Csv {
    let mut csv = Csv::new(
        "qho.sweep",
        &[("quantity", "varsigma_inf = sigma_inf / sigma_gs".into())],
        &["varsigma_M", "tau_M", "varsigma_inf", "flag"],
    );
    for c in cells {
        csv.row(&[
            num(c.varsigma_m),
            num(c.tau_m),
            opt_num(c.varsigma_inf),
            c.flag.as_str().to_string(),
        ]);
    }
    csv
}

/// Writes `sweep.csv` and `sweep.json`. Only I/O can fail the run.
pub fn run(cfg: &RunConfig, spec: &SweepSpec) -> CliResult<SweepSummary> {
    let cells = cells(spec);
    let summary = summarise(cfg, spec, &cells);
    let mut out = OutputSet::create(&cfg.out)?;
    out.write_csv("sweep.csv", &to_csv(&cells))?;
    out.write_json("sweep.json", &summary)?;
    out.commit();
    Ok(summary)
}
