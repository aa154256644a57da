//! Closed-form summary of one configuration.

use serde::Serialize;

use qho_core::chain::{
    limiting_sigma, limiting_sigma_simplified, nondim_limit, optimal_precision,
};
use qho_core::gaussian::evolved_width;
use qho_core::NondimPoint;

use crate::config::RunConfig;
use crate::output::OutputSet;
use crate::CliResult;

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeSummary {
    pub command: &'static str,
    pub config: RunConfig,
    pub sigma_gs: f64,
    pub period: f64,
    pub tau_m: f64,
    pub varsigma_m: f64,
    /// Width reached by a freshly collapsed packet after one period.
    pub sigma_t_m: f64,
    pub rho: f64,
    pub sigma_inf: f64,
    pub sigma_inf_simplified: f64,
    pub varsigma_inf: f64,
    /// `None` when `tan 2πτ_M` is not positive and finite.
    pub optimal_varsigma_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimal_note: Option<String>,
    /// Limiting width at the optimal instrument, when one exists.
    pub optimal_varsigma_inf: Option<f64>,
}

/// Jitter is ignored: the closed forms describe the nominal period.
pub fn analyze(cfg: &RunConfig) -> CliResult<AnalyzeSummary> {
    let params = cfg.params();
    let scheme = cfg.scheme();
    scheme.check_resonance(&params)?;
    let chain = cfg.chain_config();
    let cf = chain.closed_form()?;
    let point = NondimPoint::from_scheme(&params, &scheme);
    let (optimal, note) = match optimal_precision(point.tau_m) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let optimal_inf = optimal
        .map(|v| nondim_limit(&NondimPoint::new(v, point.tau_m)?))
        .transpose()?;
    Ok(AnalyzeSummary {
        command: "analyze",
        config: cfg.clone(),
        sigma_gs: params.sigma_gs(),
        period: params.period(),
        tau_m: point.tau_m,
        varsigma_m: point.varsigma_m,
        sigma_t_m: evolved_width(&params, scheme.sigma_m, scheme.t_m),
        rho: scheme.rho(&params),
        sigma_inf: limiting_sigma(&cf)?,
        sigma_inf_simplified: limiting_sigma_simplified(&params, &scheme)?,
        varsigma_inf: nondim_limit(&point)?,
        optimal_varsigma_m: optimal,
        optimal_note: note,
        optimal_varsigma_inf: optimal_inf,
    })
}

/// Runs the analysis and writes `analyze.json` when `write` is set.
pub fn run(cfg: &RunConfig, write: bool) -> CliResult<AnalyzeSummary> {
    let summary = analyze(cfg)?;
    if write {
        let mut out = OutputSet::create(&cfg.out)?;
        out.write_json("analyze.json", &summary)?;
        out.commit();
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Overrides;
    use crate::CliError;

    fn cfg(o: Overrides) -> RunConfig {
        RunConfig::resolve(&o.merge().unwrap()).unwrap()
    }

    #[test]
    fn histogram_setup() {
        let s = analyze(&cfg(Overrides::default())).unwrap();
        assert!((s.sigma_inf - 1.423_726_6).abs() < 1e-6);
        assert!((s.sigma_inf - s.sigma_inf_simplified).abs() < 1e-12);
        assert!((s.sigma_gs - 1.189_296_9).abs() < 1e-6);
        assert!((s.rho - (std::f64::consts::TAU / 5.0).cos()).abs() < 1e-12);
        assert!((s.varsigma_inf * s.sigma_gs - s.sigma_inf).abs() < 1e-12);
    }

    #[test]
    fn quarter_period() {
        let s = analyze(&cfg(Overrides {
            tau_m: Some(0.25),
            varsigma_m: Some(0.5),
            ..Default::default()
        }))
        .unwrap();
        assert!((s.varsigma_inf - 1.0).abs() < 1e-12);
        assert!(s.optimal_varsigma_m.is_none());
        assert!(s.optimal_note.is_some());
    }

    #[test]
    fn optimum_is_reported() {
        let s = analyze(&cfg(Overrides {
            tau_m: Some(0.125),
            ..Default::default()
        }))
        .unwrap();
        assert!((s.optimal_varsigma_m.unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((s.optimal_varsigma_inf.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_period_is_resonant() {
        let err = analyze(&cfg(Overrides {
            tau_m: Some(0.5),
            ..Default::default()
        }))
        .unwrap_err();
        assert_eq!(err.exit_code(), crate::EXIT_DOMAIN);
        assert!(matches!(err, CliError::Core(qho_core::Error::Resonance { .. })));
        assert!(err.to_string().contains("tau_M = 0.5"));
    }
}
