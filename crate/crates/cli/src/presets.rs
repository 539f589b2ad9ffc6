//! Canned trajectory and scan jobs reproducing the published figure setups.
//! System size and cycle budget default to desk scale and stay overridable;
//! everything else is pinned by the respective captions.

use std::f64::consts::PI;

use pxp_core::protocols::ProtocolKind;

use crate::config::{MetricKind, RunConfig, ScanConfig};
use crate::{serde_token, CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub enum PresetJob {
    Trajectories(Vec<(String, RunConfig)>),
    Scans(Vec<(String, ScanConfig)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub job: PresetJob,
}

pub const PRESET_NAMES: [&str; 8] =
    ["fig1", "fig2", "fig3a", "fig3b", "fig4", "fig5", "fig6", "fig7"];

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|k| lo + step * k as f64).collect()
}

fn log10space(lo_exp: f64, hi_exp: f64, n: usize) -> Vec<f64> {
    linspace(lo_exp, hi_exp, n).into_iter().map(|e| 10f64.powf(e)).collect()
}

const DIPOLAR_KINDS: [ProtocolKind; 4] = [
    ProtocolKind::DipolarPeriodic,
    ProtocolKind::DipolarRandom,
    ProtocolKind::DipolarFibonacci,
    ProtocolKind::DipolarThueMorse,
];

/// Shared base for the dipolar comparison figures: equal rates, small field
/// offset, quarter-pi cycle.
fn dipolar_run_base(l: usize, cycles: usize, seed: u64) -> RunConfig {
    RunConfig {
        protocol: ProtocolKind::DipolarPeriodic,
        l,
        w: 1.0,
        lambda: 1.0,
        delta_w: 0.0,
        delta_lambda: 0.01,
        period: PI / 4.0,
        dt_amp: 0.0,
        cycles,
        seed,
        ..RunConfig::default()
    }
}

fn dipolar_series(l: usize, cycles: usize, seed: u64) -> Vec<(String, RunConfig)> {
    DIPOLAR_KINDS
        .iter()
        .map(|&kind| {
            let mut c = dipolar_run_base(l, cycles, seed);
            c.protocol = kind;
            (serde_token(&kind), c)
        })
        .collect()
}

/// Build a named preset. `l` and `m_max` fall back to per-preset defaults;
/// `wdt` is accepted by fig2 only, where both published pulse jitters are of
/// interest.
pub fn build_preset(
    name: &str,
    l: Option<usize>,
    m_max: Option<usize>,
    seed: u64,
    wdt: Option<f64>,
) -> CliResult<Preset> {
    if wdt.is_some() && name != "fig2" {
        return Err(CliError::validation("--wdt applies to the fig2 preset only"));
    }
    let job = match name {
        "fig1" => {
            // Strong-detuning trajectories at the frozen and the heating
            // jitter quantum. Period chosen to keep all pulse lengths
            // positive at the larger jitter; the cycle matrix is period
            // independent anyway.
            let l = l.unwrap_or(12);
            let cycles = m_max.unwrap_or(1000);
            let base = RunConfig {
                protocol: ProtocolKind::U3,
                l,
                w: 1.0,
                lambda: 10.0,
                period: 2.0,
                cycles,
                seed,
                ..RunConfig::default()
            };
            let series = [("ldt-pi-over-2", PI / 20.0), ("ldt-pi-over-8", PI / 80.0)]
                .into_iter()
                .map(|(label, dt)| {
                    let mut c = base;
                    c.dt_amp = dt;
                    (String::from(label), c)
                })
                .collect();
            PresetJob::Trajectories(series)
        }
        "fig2" => {
            // Thermalization-time landscape of the three-parameter drive
            // over rate ratio and period. The period axis starts where the
            // largest pulse jitter just reaches a quarter period.
            let wdt = wdt.unwrap_or(0.5);
            if !(wdt > 0.0 && wdt <= 0.5) {
                return Err(CliError::validation(format!(
                    "--wdt must lie in (0, 0.5] to keep pulse lengths nonnegative on the period grid, got {wdt}"
                )));
            }
            let c = ScanConfig {
                protocol: ProtocolKind::U3,
                l: l.unwrap_or(10),
                w: 1.0,
                lambda: 1.0,
                dt_amp: wdt,
                seed,
                m_max: m_max.unwrap_or(600),
                metric: MetricKind::M0,
                axis1: String::from("period"),
                axis1_values: linspace(2.0, 5.0, 7),
                axis2: String::from("lambda"),
                axis2_values: linspace(0.5, 12.0, 24),
                ..ScanConfig::default()
            };
            PresetJob::Scans(vec![(serde_token(&c.protocol), c)])
        }
        "fig3a" | "fig3b" => {
            // Detuned flip drives around the predicted special periods, at
            // the pi/2 jitter quantum and strong detuning ratio. The period
            // axis is in units of 4 pi / lambda, where the half-flip zeros
            // sit at multiples of 1/2 and the quarter-flip zeros at 1/2 and
            // 3/2; the first row has dT = T/4 exactly, which a drawn -1
            // turns into a skipped pulse.
            let lambda = 4.0 * PI;
            let protocol = if name == "fig3a" { ProtocolKind::U4 } else { ProtocolKind::U5 };
            let c = ScanConfig {
                protocol,
                l: l.unwrap_or(10),
                w: 1.0,
                lambda,
                dt_amp: PI / (2.0 * lambda),
                seed,
                m_max: m_max.unwrap_or(2000),
                metric: MetricKind::M0,
                axis1: String::from("period"),
                axis1_values: linspace(0.5, 1.5, 9).iter().map(|x| x * 4.0 * PI / lambda).collect(),
                axis2: String::from("delta_w"),
                axis2_values: vec![0.005, 0.01, 0.02, 0.04],
                ..ScanConfig::default()
            };
            PresetJob::Scans(vec![(serde_token(&c.protocol), c)])
        }
        "fig4" => {
            // Dipolar random drive: thermalization time against field offset
            // at drive frequencies 1, 2, 3 (period 2 pi / frequency).
            let c = ScanConfig {
                protocol: ProtocolKind::DipolarRandom,
                l: l.unwrap_or(10),
                w: 1.0,
                lambda: 1.0,
                seed,
                m_max: m_max.unwrap_or(2000),
                metric: MetricKind::M0,
                axis1: String::from("period"),
                axis1_values: vec![2.0 * PI, PI, 2.0 * PI / 3.0],
                axis2: String::from("delta_lambda"),
                axis2_values: log10space(-3.0, -1.0, 13),
                ..ScanConfig::default()
            };
            PresetJob::Scans(vec![(serde_token(&c.protocol), c)])
        }
        "fig5" => PresetJob::Trajectories(dipolar_series(
            l.unwrap_or(10),
            m_max.unwrap_or(2000),
            seed,
        )),
        "fig6" => PresetJob::Trajectories(dipolar_series(
            l.unwrap_or(10),
            m_max.unwrap_or(10_000),
            seed,
        )),
        "fig7" => {
            // Averaged-fidelity landscape per dipolar protocol over period
            // and field offset.
            let series = DIPOLAR_KINDS
                .iter()
                .map(|&kind| {
                    let c = ScanConfig {
                        protocol: kind,
                        l: l.unwrap_or(10),
                        w: 1.0,
                        lambda: 1.0,
                        seed,
                        m_max: m_max.unwrap_or(2500),
                        metric: MetricKind::Fbar,
                        axis1: String::from("period"),
                        axis1_values: (1..=6).map(|k| k as f64 * PI / 8.0).collect(),
                        axis2: String::from("delta_lambda"),
                        axis2_values: vec![0.002, 0.005, 0.01, 0.02, 0.05, 0.1],
                        ..ScanConfig::default()
                    };
                    (serde_token(&kind), c)
                })
                .collect();
            PresetJob::Scans(series)
        }
        _ => {
            return Err(CliError::validation(format!(
                "unknown preset `{name}`; available: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    let name = PRESET_NAMES
        .iter()
        .find(|&&n| n == name)
        .expect("name matched above");
    Ok(Preset { name, job })
}
