//! Flat key-value configs for runs and scans, with file loading, flag
//! overrides, and the validation that is stricter than the library's.

use std::path::Path;

use pxp_core::experiments::{ScanAxis, ScanMetric, ScanTarget};
use pxp_core::hilbert::BoundaryCondition;
use pxp_core::protocols::{DriveParams, EtaMode, ProtocolKind};
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

/// One trajectory job: drive parameters plus run length and realization count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub protocol: ProtocolKind,
    pub l: usize,
    pub bc: BoundaryCondition,
    pub w: f64,
    pub lambda: f64,
    pub delta_w: f64,
    pub delta_lambda: f64,
    pub period: f64,
    pub dt_amp: f64,
    pub eta: EtaMode,
    pub cycles: usize,
    pub realizations: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            protocol: ProtocolKind::U3,
            l: 12,
            bc: BoundaryCondition::Periodic,
            w: 1.0,
            lambda: 10.0,
            delta_w: 0.0,
            delta_lambda: 0.0,
            period: 1.0,
            dt_amp: 0.0,
            eta: EtaMode::Binary,
            cycles: 1000,
            realizations: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    /// Thermalization time m0.
    M0,
    /// Late-window mean magnetization.
    Mbar,
    /// Time-averaged fidelity.
    Fbar,
}

/// One grid scan: drive parameters, two axes, and the per-cell metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub protocol: ProtocolKind,
    pub l: usize,
    pub bc: BoundaryCondition,
    pub w: f64,
    pub lambda: f64,
    pub delta_w: f64,
    pub delta_lambda: f64,
    pub period: f64,
    pub dt_amp: f64,
    pub eta: EtaMode,
    pub seed: u64,
    pub m_max: usize,
    pub metric: MetricKind,
    /// Drift threshold for the m0 metric; defaults per protocol family.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub axis1: String,
    pub axis1_values: Vec<f64>,
    pub axis2: String,
    pub axis2_values: Vec<f64>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        let r = RunConfig::default();
        ScanConfig {
            protocol: r.protocol,
            l: r.l,
            bc: r.bc,
            w: r.w,
            lambda: r.lambda,
            delta_w: r.delta_w,
            delta_lambda: r.delta_lambda,
            period: r.period,
            dt_amp: r.dt_amp,
            eta: r.eta,
            seed: r.seed,
            m_max: 2000,
            metric: MetricKind::M0,
            epsilon: None,
            axis1: String::from("period"),
            axis1_values: Vec::new(),
            axis2: String::from("lambda"),
            axis2_values: Vec::new(),
        }
    }
}

/// Default m0 drift threshold: dipolar drives move the magnetization far less
/// per cycle than the four-pulse drives, so their departure mark is tighter.
pub fn default_epsilon(protocol: ProtocolKind) -> f64 {
    if protocol.is_dipolar() {
        0.05
    } else {
        0.1
    }
}

pub fn parse_axis_target(key: &str) -> CliResult<ScanTarget> {
    match key {
        "w" => Ok(ScanTarget::W),
        "lambda" => Ok(ScanTarget::Lambda),
        "period" => Ok(ScanTarget::Period),
        "dt_amp" => Ok(ScanTarget::DtAmp),
        "delta_w" => Ok(ScanTarget::DeltaW),
        "delta_lambda" => Ok(ScanTarget::DeltaLambda),
        _ => Err(CliError::validation(format!(
            "unknown axis key `{key}`; expected one of w, lambda, period, dt_amp, delta_w, delta_lambda"
        ))),
    }
}

fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::runtime(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::validation(format!("invalid config {}: {e}", path.display())))
}

pub fn load_run_config(path: &Path) -> CliResult<RunConfig> {
    load_toml(path)
}

pub fn load_scan_config(path: &Path) -> CliResult<ScanConfig> {
    load_toml(path)
}

impl RunConfig {
    pub fn drive_params(&self) -> CliResult<DriveParams> {
        Ok(DriveParams::new(
            self.w,
            self.lambda,
            self.delta_w,
            self.delta_lambda,
            self.period,
            self.dt_amp,
            self.eta,
            self.seed,
        )?)
    }

    /// Strict single-run validation. Scans are looser on purpose: a grid may
    /// legitimately touch dt_amp = T/4, where a drawn -1 skips a pulse, and
    /// per-cell validation handles anything beyond.
    pub fn validate_run(&self) -> CliResult<Vec<String>> {
        self.drive_params()?;
        let mut warnings = Vec::new();
        if self.cycles == 0 {
            return Err(CliError::validation("cycles must be at least 1"));
        }
        if self.realizations == 0 {
            return Err(CliError::validation("realizations must be at least 1"));
        }
        if self.protocol.is_dipolar() {
            if self.dt_amp != 0.0 {
                warnings.push(String::from(
                    "dt_amp is ignored by dipolar protocols; the cycle has no length jitter",
                ));
            }
        } else {
            let quarter = self.period / 4.0;
            if self.dt_amp >= quarter {
                return Err(CliError::validation(format!(
                    "dt_amp {} must stay below period/4 = {quarter}; larger jitter drives a pulse length to zero or below",
                    self.dt_amp
                )));
            }
            if self.dt_amp > self.period / 8.0 {
                warnings.push(format!(
                    "dt_amp {} exceeds period/8 = {}; pulse lengths vary by more than half their base",
                    self.dt_amp,
                    self.period / 8.0
                ));
            }
        }
        if self.protocol == ProtocolKind::U3 && (self.delta_w != 0.0 || self.delta_lambda != 0.0) {
            return Err(CliError::validation(
                "the three-parameter protocol has no detuning slots; set delta_w = delta_lambda = 0 or pick u4/u5",
            ));
        }
        Ok(warnings)
    }
}

impl ScanConfig {
    pub fn drive_params(&self) -> CliResult<DriveParams> {
        Ok(DriveParams::new(
            self.w,
            self.lambda,
            self.delta_w,
            self.delta_lambda,
            self.period,
            self.dt_amp,
            self.eta,
            self.seed,
        )?)
    }

    pub fn metric(&self) -> ScanMetric {
        match self.metric {
            MetricKind::M0 => ScanMetric::ThermalizationTime {
                epsilon: self.epsilon.unwrap_or_else(|| default_epsilon(self.protocol)),
            },
            MetricKind::Mbar => ScanMetric::AvgMagnetization,
            MetricKind::Fbar => ScanMetric::AvgFidelity,
        }
    }

    pub fn axes(&self) -> CliResult<(ScanAxis, ScanAxis)> {
        let mut axes = Vec::with_capacity(2);
        for (key, values) in
            [(&self.axis1, &self.axis1_values), (&self.axis2, &self.axis2_values)]
        {
            let target = parse_axis_target(key)?;
            if values.is_empty() {
                return Err(CliError::validation(format!("axis `{key}` has no values")));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(CliError::validation(format!("axis `{key}` has a non-finite value")));
            }
            axes.push(ScanAxis { target, values: values.clone() });
        }
        let second = axes.pop().expect("two axes");
        let first = axes.pop().expect("two axes");
        if first.target == second.target {
            return Err(CliError::validation(format!(
                "both axes target `{}`; pick two different parameters",
                self.axis1
            )));
        }
        Ok((first, second))
    }

    pub fn validate_scan(&self) -> CliResult<()> {
        self.drive_params()?;
        self.axes()?;
        if self.m_max == 0 {
            return Err(CliError::validation("m_max must be at least 1"));
        }
        if let Some(e) = self.epsilon {
            if !(e.is_finite() && e > 0.0) {
                return Err(CliError::validation(format!("epsilon must be positive, got {e}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_config_round_trips_through_toml() {
        let mut c = RunConfig::default();
        c.protocol = ProtocolKind::DipolarThueMorse;
        c.bc = BoundaryCondition::Open;
        c.eta = EtaMode::Uniform;
        c.lambda = 2.5;
        c.seed = 77;
        let text = toml::to_string(&c).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn scan_config_round_trips_through_toml() {
        let mut c = ScanConfig::default();
        c.axis1_values = vec![1.0, 2.0];
        c.axis2 = String::from("delta_w");
        c.axis2_values = vec![0.01];
        c.epsilon = Some(0.2);
        c.metric = MetricKind::Fbar;
        let text = toml::to_string(&c).unwrap();
        let back: ScanConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn empty_config_gives_defaults() {
        let c: RunConfig = toml::from_str("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.l, 12);
        assert_eq!(c.bc, BoundaryCondition::Periodic);
        assert_eq!(c.eta, EtaMode::Binary);
    }

    #[test]
    fn unknown_key_is_named_in_the_error() {
        let err = toml::from_str::<RunConfig>("lamda = 3.0").unwrap_err();
        assert!(err.to_string().contains("lamda"), "{err}");
    }

    #[test]
    fn enum_tokens_parse() {
        let c: RunConfig =
            toml::from_str("protocol = \"dp-fib\"\nbc = \"obc\"\neta = \"uniform\"").unwrap();
        assert_eq!(c.protocol, ProtocolKind::DipolarFibonacci);
        assert_eq!(c.bc, BoundaryCondition::Open);
        assert_eq!(c.eta, EtaMode::Uniform);
    }

    #[test]
    fn run_validation_rejects_quarter_period_jitter() {
        let mut c = RunConfig::default();
        c.period = 1.0;
        c.dt_amp = 0.25;
        let err = c.validate_run().unwrap_err();
        assert!(matches!(err, CliError::Validation(_)));
        assert!(err.to_string().contains("period/4"), "{err}");
    }

    #[test]
    fn run_validation_warns_in_the_large_jitter_band() {
        let mut c = RunConfig::default();
        c.period = 1.0;
        c.dt_amp = 0.2;
        let warnings = c.validate_run().unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("period/8"));
        c.dt_amp = 0.1;
        assert!(c.validate_run().unwrap().is_empty());
    }

    #[test]
    fn run_validation_rejects_detuned_three_parameter_drive() {
        let mut c = RunConfig::default();
        c.delta_lambda = 0.01;
        assert!(c.validate_run().is_err());
        c.protocol = ProtocolKind::U4;
        assert!(c.validate_run().is_ok());
    }

    #[test]
    fn epsilon_defaults_split_by_family() {
        assert_eq!(default_epsilon(ProtocolKind::U3), 0.1);
        assert_eq!(default_epsilon(ProtocolKind::U5), 0.1);
        assert_eq!(default_epsilon(ProtocolKind::DipolarRandom), 0.05);
        let mut c = ScanConfig::default();
        c.protocol = ProtocolKind::DipolarRandom;
        match c.metric() {
            ScanMetric::ThermalizationTime { epsilon } => assert_eq!(epsilon, 0.05),
            other => panic!("unexpected metric {other:?}"),
        }
    }

    #[test]
    fn scan_axes_validated() {
        let mut c = ScanConfig::default();
        c.axis1_values = vec![1.0];
        c.axis2_values = vec![2.0];
        assert!(c.validate_scan().is_ok());
        c.axis2 = String::from("period");
        let err = c.validate_scan().unwrap_err();
        assert!(err.to_string().contains("two different"), "{err}");
        c.axis2 = String::from("nope");
        let err = c.validate_scan().unwrap_err();
        assert!(err.to_string().contains("nope"), "{err}");
        c.axis2 = String::from("lambda");
        c.axis2_values.clear();
        assert!(c.validate_scan().is_err());
    }

    #[test]
    fn scan_permits_quarter_period_jitter() {
        let mut c = ScanConfig::default();
        c.protocol = ProtocolKind::U4;
        c.period = 0.5;
        c.dt_amp = 0.125;
        c.axis1_values = vec![0.5, 0.75];
        c.axis2 = String::from("delta_w");
        c.axis2_values = vec![0.02];
        assert!(c.validate_scan().is_ok());
    }
}
