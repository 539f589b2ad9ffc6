//! Observables, thermalization metrics, and two-axis grid scans.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{FockBasis, StateVector};
use crate::protocols::{run_protocol, DriveParams, ProtocolKind};
use crate::C64;

/// Inclusive cycle window for the late-time magnetization average.
pub const AVG_MAG_WINDOW: (usize, usize) = (950, 1050);
/// Last cycle entering the time-averaged fidelity.
pub const AVG_FID_CYCLES: usize = 2500;

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    /// Per-cycle site-averaged z magnetization, row 0 is the initial state.
    pub magnetization: Vec<f64>,
    /// Per-cycle overlap-squared with the initial state.
    pub fidelity: Vec<f64>,
}

impl Trajectory {
    pub fn with_capacity(cycles: usize) -> Self {
        Trajectory {
            magnetization: Vec::with_capacity(cycles + 1),
            fidelity: Vec::with_capacity(cycles + 1),
        }
    }

    pub fn push(&mut self, m: f64, f: f64) {
        self.magnetization.push(m);
        self.fidelity.push(f);
    }

    /// Number of applied cycles (records minus the initial row).
    pub fn cycles(&self) -> usize {
        self.magnetization.len().saturating_sub(1)
    }
}

/// Site-averaged z magnetization, diagonal in the occupation basis.
pub fn magnetization(basis: &FockBasis, state: &StateVector) -> f64 {
    let l = basis.l() as f64;
    basis
        .states()
        .iter()
        .zip(state.iter())
        .map(|(&s, a)| a.norm_sqr() * (2.0 * s.count_ones() as f64 - l))
        .sum::<f64>()
        / l
}

/// Squared overlap |<reference|state>|^2.
pub fn fidelity(reference: &StateVector, state: &StateVector) -> f64 {
    reference
        .iter()
        .zip(state.iter())
        .map(|(r, s)| r.conj() * s)
        .sum::<C64>()
        .norm_sqr()
}

/// Mean magnetization over the late-time window, a true mean over all 101
/// window cycles.
pub fn avg_magnetization(traj: &Trajectory) -> Result<f64> {
    let (lo, hi) = AVG_MAG_WINDOW;
    if traj.cycles() < hi {
        return Err(Error::ShortTrajectory { needed: hi, got: traj.cycles() });
    }
    let n = hi - lo + 1;
    Ok(traj.magnetization[lo..=hi].iter().sum::<f64>() / n as f64)
}

/// Mean fidelity over cycles 1..=2500.
pub fn avg_fidelity(traj: &Trajectory) -> Result<f64> {
    if traj.cycles() < AVG_FID_CYCLES {
        return Err(Error::ShortTrajectory { needed: AVG_FID_CYCLES, got: traj.cycles() });
    }
    Ok(traj.fidelity[1..=AVG_FID_CYCLES].iter().sum::<f64>() / AVG_FID_CYCLES as f64)
}

/// Smallest cycle index m at which |M(m)/M(0) - 1| >= epsilon. Returns
/// (cycles, true) if the threshold is never crossed.
pub fn thermalization_time(traj: &Trajectory, epsilon: f64) -> (usize, bool) {
    let m0 = traj.magnetization[0];
    for (m, &mag) in traj.magnetization.iter().enumerate().skip(1) {
        if (mag / m0 - 1.0).abs() >= epsilon {
            return (m, false);
        }
    }
    (traj.cycles(), true)
}

/// Drive parameter a scan axis varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanTarget {
    W,
    Lambda,
    Period,
    DtAmp,
    DeltaW,
    DeltaLambda,
}

impl ScanTarget {
    pub fn label(self) -> &'static str {
        match self {
            ScanTarget::W => "w",
            ScanTarget::Lambda => "lambda",
            ScanTarget::Period => "T",
            ScanTarget::DtAmp => "dT",
            ScanTarget::DeltaW => "dw",
            ScanTarget::DeltaLambda => "dlambda",
        }
    }

    fn apply(self, params: &mut DriveParams, value: f64) {
        match self {
            ScanTarget::W => params.w = value,
            ScanTarget::Lambda => params.lambda = value,
            ScanTarget::Period => params.period = value,
            ScanTarget::DtAmp => params.dt_amp = value,
            ScanTarget::DeltaW => params.delta_w = value,
            ScanTarget::DeltaLambda => params.delta_lambda = value,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScanAxis {
    pub target: ScanTarget,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScanMetric {
    /// Cycle count of the first magnetization departure past epsilon.
    ThermalizationTime { epsilon: f64 },
    /// Late-window mean magnetization.
    AvgMagnetization,
    /// Time-averaged fidelity.
    AvgFidelity,
}

impl ScanMetric {
    fn required_cycles(self) -> usize {
        match self {
            ScanMetric::ThermalizationTime { .. } => 1,
            ScanMetric::AvgMagnetization => AVG_MAG_WINDOW.1,
            ScanMetric::AvgFidelity => AVG_FID_CYCLES,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub i: usize,
    pub j: usize,
    pub axis1: f64,
    pub axis2: f64,
    /// Metric value; NaN when the cell errored.
    pub value: f64,
    pub censored: bool,
    pub seed: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub target1: ScanTarget,
    pub target2: ScanTarget,
    pub values1: Vec<f64>,
    pub values2: Vec<f64>,
    pub metric: ScanMetric,
    /// Row-major over (axis1 index, axis2 index).
    pub cells: Vec<CellResult>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent per-cell seed from the master seed and the flat cell index.
pub fn derive_cell_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

/// Evaluate a metric over the product grid of two axes. Cells run
/// independently with seeds derived from (fixed.seed, cell index); per-cell
/// failures are recorded in the cell and do not stop the scan.
#[allow(clippy::too_many_arguments)]
pub fn scan_2d(
    basis: &FockBasis,
    fixed: &DriveParams,
    kind: ProtocolKind,
    axis1: &ScanAxis,
    axis2: &ScanAxis,
    metric: ScanMetric,
    m_max: usize,
    threads: Option<usize>,
) -> Result<ScanResult> {
    if axis1.values.is_empty() || axis2.values.is_empty() {
        return Err(Error::precondition("scan axes must be nonempty"));
    }
    if m_max < metric.required_cycles() {
        return Err(Error::precondition(format!(
            "{metric:?} needs at least {} cycles, got m_max={m_max}",
            metric.required_cycles()
        )));
    }
    let n2 = axis2.values.len();
    let indices: Vec<(usize, usize)> = axis1
        .values
        .iter()
        .enumerate()
        .flat_map(|(i, _)| (0..n2).map(move |j| (i, j)))
        .collect();
    let eval = |&(i, j): &(usize, usize)| -> CellResult {
        let v1 = axis1.values[i];
        let v2 = axis2.values[j];
        let seed = derive_cell_seed(fixed.seed, (i * n2 + j) as u64);
        let mut params = *fixed;
        axis1.target.apply(&mut params, v1);
        axis2.target.apply(&mut params, v2);
        params.seed = seed;
        let mut cell = CellResult {
            i,
            j,
            axis1: v1,
            axis2: v2,
            value: f64::NAN,
            censored: false,
            seed,
            error: None,
        };
        let checked = DriveParams::new(
            params.w,
            params.lambda,
            params.delta_w,
            params.delta_lambda,
            params.period,
            params.dt_amp,
            params.eta_mode,
            params.seed,
        );
        let outcome = checked.and_then(|p| run_protocol(basis, &p, kind, m_max, None)).and_then(
            |traj| match metric {
                ScanMetric::ThermalizationTime { epsilon } => {
                    let (m0, censored) = thermalization_time(&traj, epsilon);
                    Ok((m0 as f64, censored))
                }
                ScanMetric::AvgMagnetization => Ok((avg_magnetization(&traj)?, false)),
                ScanMetric::AvgFidelity => Ok((avg_fidelity(&traj)?, false)),
            },
        );
        match outcome {
            Ok((value, censored)) => {
                cell.value = value;
                cell.censored = censored;
            }
            Err(e) => cell.error = Some(e.to_string()),
        }
        cell
    };
    let cells: Vec<CellResult> = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::precondition(format!("thread pool: {e}")))?
            .install(|| indices.par_iter().map(eval).collect()),
        None => indices.par_iter().map(eval).collect(),
    };
    Ok(ScanResult {
        target1: axis1.target,
        target2: axis2.target,
        values1: axis1.values.clone(),
        values2: axis2.values.clone(),
        metric,
        cells,
    })
}

/// 17 significant digits, enough for bit-exact f64 round trip.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trajectory_csv<W: Write>(out: &mut W, traj: &Trajectory) -> io::Result<()> {
    writeln!(out, "m,M,F")?;
    for (m, (mag, fid)) in traj.magnetization.iter().zip(&traj.fidelity).enumerate() {
        writeln!(out, "{m},{},{}", fmt_float(*mag), fmt_float(*fid))?;
    }
    Ok(())
}

pub fn write_scan_csv<W: Write>(out: &mut W, scan: &ScanResult) -> io::Result<()> {
    writeln!(out, "axis1,axis2,metric,censored,seed")?;
    for cell in &scan.cells {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_float(cell.axis1),
            fmt_float(cell.axis2),
            fmt_float(cell.value),
            u8::from(cell.censored),
            cell.seed
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{all_down_state, enumerate_basis, BoundaryCondition};
    use crate::protocols::EtaMode;
    use ndarray::Array1;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn magnetization_of_reference_states() {
        for l in [2, 4, 7, 10] {
            let basis = enumerate_basis(l, BoundaryCondition::Periodic).unwrap();
            let state = all_down_state(&basis);
            assert_eq!(magnetization(&basis, &state), -1.0);
        }
        let basis = enumerate_basis(4, BoundaryCondition::Periodic).unwrap();
        let one_up = basis.index_of(0b0001).unwrap();
        let mut state = Array1::zeros(basis.dim());
        state[one_up] = c(1.0, 0.0);
        assert!((magnetization(&basis, &state) + 0.5).abs() < 1e-15);

        // equal superposition of the vacuum and a one-up state
        let vac = basis.index_of(0).unwrap();
        let mut state = Array1::<C64>::zeros(basis.dim());
        state[vac] = c(1.0 / 2f64.sqrt(), 0.0);
        state[one_up] = c(0.0, 1.0 / 2f64.sqrt());
        assert!((magnetization(&basis, &state) + 0.75).abs() < 1e-15);
    }

    #[test]
    fn fidelity_of_reference_states() {
        let basis = enumerate_basis(4, BoundaryCondition::Periodic).unwrap();
        let a = all_down_state(&basis);
        let mut b = Array1::<C64>::zeros(basis.dim());
        b[basis.index_of(0b0001).unwrap()] = c(1.0, 0.0);
        assert_eq!(fidelity(&a, &a), 1.0);
        assert_eq!(fidelity(&a, &b), 0.0);
        let mix = (&a + &b).mapv(|x| x / 2f64.sqrt());
        assert!((fidelity(&a, &mix) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn observables_ignore_global_phase() {
        let basis = enumerate_basis(6, BoundaryCondition::Periodic).unwrap();
        let mut state = Array1::<C64>::zeros(basis.dim());
        for (i, x) in state.iter_mut().enumerate() {
            *x = c(0.3 + i as f64, (i as f64).sin());
        }
        let norm = state.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        state.mapv_inplace(|x| x / norm);
        let reference = all_down_state(&basis);
        let phase = c(0.0, 0.7).exp();
        let rotated = state.mapv(|x| x * phase);
        assert!((magnetization(&basis, &state) - magnetization(&basis, &rotated)).abs() < 1e-12);
        assert!((fidelity(&reference, &state) - fidelity(&reference, &rotated)).abs() < 1e-12);
    }

    fn synthetic(mag: impl Fn(usize) -> f64, cycles: usize) -> Trajectory {
        let mut t = Trajectory::with_capacity(cycles);
        for m in 0..=cycles {
            t.push(mag(m), 1.0);
        }
        t
    }

    #[test]
    fn window_average_is_true_mean() {
        let t = synthetic(|_| -1.0, 1100);
        assert_eq!(avg_magnetization(&t).unwrap(), -1.0);
        let t = synthetic(|m| m as f64 / 1000.0, 1050);
        assert!((avg_magnetization(&t).unwrap() - 1.0).abs() < 1e-12);
        let t = synthetic(|_| -1.0, 1049);
        assert!(matches!(avg_magnetization(&t), Err(Error::ShortTrajectory { .. })));
    }

    #[test]
    fn fidelity_average_over_leading_cycles() {
        let mut t = synthetic(|_| -1.0, 2500);
        assert_eq!(avg_fidelity(&t).unwrap(), 1.0);
        for (m, f) in t.fidelity.iter_mut().enumerate() {
            *f = if m <= 1250 { 1.0 } else { 0.0 };
        }
        assert!((avg_fidelity(&t).unwrap() - 0.5).abs() < 1e-15);
        let t = synthetic(|_| -1.0, 2499);
        assert!(matches!(avg_fidelity(&t), Err(Error::ShortTrajectory { .. })));
    }

    #[test]
    fn first_departure_and_censoring() {
        let mut t = Trajectory::default();
        for m in [-1.0, -1.0, -0.85, -0.5] {
            t.push(m, 1.0);
        }
        assert_eq!(thermalization_time(&t, 0.1), (2, false));
        let frozen = synthetic(|_| -1.0, 40);
        assert_eq!(thermalization_time(&frozen, 0.1), (40, true));
    }

    proptest! {
        #[test]
        fn departure_time_monotone_in_epsilon(
            mags in proptest::collection::vec(-1.0f64..=-0.2, 5..60),
            e1 in 0.01f64..0.5,
            de in 0.0f64..0.5,
        ) {
            let mut t = Trajectory::default();
            t.push(-1.0, 1.0);
            for m in mags {
                t.push(m, 1.0);
            }
            let (m1, _) = thermalization_time(&t, e1);
            let (m2, _) = thermalization_time(&t, e1 + de);
            prop_assert!(m1 <= m2);
        }
    }

    #[test]
    fn trajectory_observable_ranges() {
        let basis = enumerate_basis(6, BoundaryCondition::Periodic).unwrap();
        let params = DriveParams::new(1.0, 1.5, 0.0, 0.0, 2.0, 0.4, EtaMode::Binary, 21).unwrap();
        let traj = run_protocol(&basis, &params, ProtocolKind::U4, 300, None).unwrap();
        assert!(traj.magnetization.iter().all(|&m| (-1.0 - 1e-10..=1.0 + 1e-10).contains(&m)));
        assert!(traj.fidelity.iter().all(|&f| (-1e-10..=1.0 + 1e-10).contains(&f)));
    }

    #[test]
    fn float_format_round_trips() {
        for v in [1.0 / 3.0, -0.0, 1e-17, 2.0_f64.powi(-40) + 1.0, f64::MAX, -1.0] {
            let s = fmt_float(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn cell_seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..64).map(|i| derive_cell_seed(42, i)).collect();
        let b: Vec<u64> = (0..64).map(|i| derive_cell_seed(42, i)).collect();
        assert_eq!(a, b);
        let mut uniq = a.clone();
        uniq.sort_unstable();
        uniq.dedup();
        assert_eq!(uniq.len(), a.len());
        assert_ne!(derive_cell_seed(1, 0), derive_cell_seed(2, 0));
    }

    fn small_scan() -> ScanResult {
        let basis = enumerate_basis(4, BoundaryCondition::Periodic).unwrap();
        let fixed = DriveParams::new(1.0, 1.0, 0.0, 0.0, 2.0, 0.4, EtaMode::Binary, 5).unwrap();
        let axis1 = ScanAxis { target: ScanTarget::Lambda, values: vec![0.5, 1.0, 2.0] };
        let axis2 = ScanAxis { target: ScanTarget::Period, values: vec![2.0, 3.0] };
        scan_2d(
            &basis,
            &fixed,
            ProtocolKind::U3,
            &axis1,
            &axis2,
            ScanMetric::ThermalizationTime { epsilon: 0.1 },
            40,
            None,
        )
        .unwrap()
    }

    #[test]
    fn scan_covers_grid_deterministically() {
        let a = small_scan();
        assert_eq!(a.cells.len(), 6);
        for (k, cell) in a.cells.iter().enumerate() {
            assert_eq!((cell.i, cell.j), (k / 2, k % 2));
            assert!(cell.error.is_none());
            assert!(cell.value >= 1.0 || cell.censored);
        }
        let b = small_scan();
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        write_scan_csv(&mut ca, &a).unwrap();
        write_scan_csv(&mut cb, &b).unwrap();
        assert_eq!(ca, cb);
        assert!(ca.starts_with(b"axis1,axis2,metric,censored,seed\n"));
    }

    #[test]
    fn scan_records_cell_failures_and_continues() {
        let basis = enumerate_basis(4, BoundaryCondition::Periodic).unwrap();
        let fixed = DriveParams::new(1.0, 1.0, 0.0, 0.0, 2.0, 0.4, EtaMode::Binary, 5).unwrap();
        let axis1 = ScanAxis { target: ScanTarget::Period, values: vec![0.0, 2.0] };
        let axis2 = ScanAxis { target: ScanTarget::Lambda, values: vec![1.0] };
        let scan = scan_2d(
            &basis,
            &fixed,
            ProtocolKind::U3,
            &axis1,
            &axis2,
            ScanMetric::ThermalizationTime { epsilon: 0.1 },
            20,
            Some(1),
        )
        .unwrap();
        assert!(scan.cells[0].error.is_some());
        assert!(scan.cells[0].value.is_nan());
        assert!(scan.cells[1].error.is_none());
    }

    #[test]
    fn scan_rejects_short_budget_and_empty_axes() {
        let basis = enumerate_basis(4, BoundaryCondition::Periodic).unwrap();
        let fixed = DriveParams::new(1.0, 1.0, 0.0, 0.0, 2.0, 0.4, EtaMode::Binary, 5).unwrap();
        let full = ScanAxis { target: ScanTarget::Lambda, values: vec![1.0] };
        let empty = ScanAxis { target: ScanTarget::Period, values: vec![] };
        assert!(scan_2d(
            &basis,
            &fixed,
            ProtocolKind::U3,
            &full,
            &empty,
            ScanMetric::ThermalizationTime { epsilon: 0.1 },
            10,
            None
        )
        .is_err());
        assert!(scan_2d(
            &basis,
            &fixed,
            ProtocolKind::U3,
            &full,
            &full,
            ScanMetric::AvgMagnetization,
            100,
            None
        )
        .is_err());
    }

    #[test]
    fn trajectory_csv_layout() {
        let mut t = Trajectory::default();
        t.push(-1.0, 1.0);
        t.push(-0.5, 0.25);
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &t).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "m,M,F");
        assert!(lines[1].starts_with("0,-1.0000000000000000e0,"));
        assert_eq!(lines.len(), 3);
    }
}
