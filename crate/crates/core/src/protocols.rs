//! Drive programs: four-pulse cycles with randomly jittered pulse lengths and
//! two-pulse dipole unitaries arranged in periodic, random, or quasiperiodic
//! sequences.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{fidelity, magnetization, Trajectory};
use crate::hilbert::{all_down_state, norm_sq, FockBasis, StateVector};
use crate::operators::PulseParams;
use crate::propagator::PropagatorCache;
use crate::C64;

/// Abort threshold for |<psi|psi> - 1| accumulated over a run.
pub const NORM_DRIFT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EtaMode {
    /// Pulse-length signs drawn uniformly from {-1, +1}.
    #[default]
    Binary,
    /// Pulse-length factors drawn uniformly from [-1, 1].
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtocolKind {
    #[serde(rename = "u3")]
    U3,
    #[serde(rename = "u4")]
    U4,
    #[serde(rename = "u5")]
    U5,
    #[serde(rename = "dp-periodic")]
    DipolarPeriodic,
    #[serde(rename = "dp-random")]
    DipolarRandom,
    #[serde(rename = "dp-fib")]
    DipolarFibonacci,
    #[serde(rename = "dp-tm")]
    DipolarThueMorse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    Periodic,
    Random,
    Fibonacci,
    ThueMorse,
}

impl ProtocolKind {
    pub fn is_dipolar(self) -> bool {
        self.sequence_kind().is_some()
    }

    pub fn sequence_kind(self) -> Option<SequenceKind> {
        match self {
            ProtocolKind::DipolarPeriodic => Some(SequenceKind::Periodic),
            ProtocolKind::DipolarRandom => Some(SequenceKind::Random),
            ProtocolKind::DipolarFibonacci => Some(SequenceKind::Fibonacci),
            ProtocolKind::DipolarThueMorse => Some(SequenceKind::ThueMorse),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    pub w: f64,
    pub lambda: f64,
    pub delta_w: f64,
    pub delta_lambda: f64,
    /// Base cycle period T; four-pulse cycles nominally split it into
    /// quarters, dipole unitaries into two halves of two quarters each.
    pub period: f64,
    /// Amplitude dT of the per-pulse length jitter eta*dT. Ignored by the
    /// dipolar kinds, which carry no time randomness.
    pub dt_amp: f64,
    pub eta_mode: EtaMode,
    pub seed: u64,
}

impl DriveParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        w: f64,
        lambda: f64,
        delta_w: f64,
        delta_lambda: f64,
        period: f64,
        dt_amp: f64,
        eta_mode: EtaMode,
        seed: u64,
    ) -> Result<Self> {
        for (name, v) in [
            ("w", w),
            ("lambda", lambda),
            ("delta_w", delta_w),
            ("delta_lambda", delta_lambda),
            ("period", period),
            ("dt_amp", dt_amp),
        ] {
            if !v.is_finite() {
                return Err(Error::precondition(format!("{name} must be finite, got {v}")));
            }
        }
        if period <= 0.0 {
            return Err(Error::precondition(format!("period must be positive, got {period}")));
        }
        if dt_amp < 0.0 {
            return Err(Error::precondition(format!("dt_amp must be nonnegative, got {dt_amp}")));
        }
        Ok(DriveParams { w, lambda, delta_w, delta_lambda, period, dt_amp, eta_mode, seed })
    }
}

/// Jitter factors for pulse lengths, one draw per pulse.
pub fn draw_etas(rng: &mut impl Rng, n: usize, mode: EtaMode) -> Vec<f64> {
    (0..n)
        .map(|_| match mode {
            EtaMode::Binary => {
                if rng.random_range(0..=1) == 0 {
                    -1.0
                } else {
                    1.0
                }
            }
            EtaMode::Uniform => rng.random_range(-1.0..=1.0),
        })
        .collect()
}

/// Per-pulse (a, b) field signs in application order for the four-pulse kinds.
pub fn pulse_signs(kind: ProtocolKind) -> Option<[(i8, i8); 4]> {
    match kind {
        ProtocolKind::U3 => Some([(-1, -1), (1, 1), (1, -1), (-1, 1)]),
        // a alternates every pulse, b flips once at the half cycle
        ProtocolKind::U4 => Some([(1, 1), (-1, 1), (1, -1), (-1, -1)]),
        // b alternates every pulse, a flips once at the half cycle
        ProtocolKind::U5 => Some([(1, 1), (1, -1), (-1, 1), (-1, -1)]),
        _ => None,
    }
}

/// One cycle of a four-pulse kind as (pulse, duration) in application order.
/// Durations are T/4 + eta_i * dT. The z-field offset never enters these
/// cycles; U3 additionally requires a vanishing x-field offset.
pub fn cycle_pulses(
    params: &DriveParams,
    kind: ProtocolKind,
    etas: [f64; 4],
) -> Result<[(PulseParams, f64); 4]> {
    let signs = pulse_signs(kind)
        .ok_or_else(|| Error::precondition(format!("{kind:?} is not a four-pulse kind")))?;
    if kind == ProtocolKind::U3 && (params.delta_w != 0.0 || params.delta_lambda != 0.0) {
        return Err(Error::precondition(format!(
            "the undetuned cycle requires delta_w = delta_lambda = 0, got ({}, {})",
            params.delta_w, params.delta_lambda
        )));
    }
    let quarter = params.period / 4.0;
    let mut out = [(PulseParams::new(1, 1, 0.0, 0.0, 0.0, 0.0)?, 0.0); 4];
    for (i, &(a, b)) in signs.iter().enumerate() {
        let p = PulseParams::new(a, b, params.w, params.lambda, params.delta_w, 0.0)?;
        let duration = quarter + etas[i] * params.dt_amp;
        // Zero is allowed: at dt_amp = T/4 a drawn -1 skips the pulse.
        if duration < 0.0 {
            return Err(Error::precondition(format!(
                "pulse {i} has negative duration {duration} (period {}, dt_amp {})",
                params.period, params.dt_amp
            )));
        }
        out[i] = (p, duration);
    }
    Ok(out)
}

fn cycle_unitary(
    basis: &FockBasis,
    params: &DriveParams,
    kind: ProtocolKind,
    etas: [f64; 4],
    cache: &mut PropagatorCache,
) -> Result<Array2<C64>> {
    let pulses = cycle_pulses(params, kind, etas)?;
    let mut u = Array2::<C64>::eye(basis.dim());
    for (p, t) in pulses {
        let prop = cache.propagator(basis, &p, t)?;
        u = prop.dot(&u);
    }
    Ok(u)
}

pub fn cycle_unitary_u3(
    basis: &FockBasis,
    params: &DriveParams,
    etas: [f64; 4],
    cache: &mut PropagatorCache,
) -> Result<Array2<C64>> {
    cycle_unitary(basis, params, ProtocolKind::U3, etas, cache)
}

pub fn cycle_unitary_u4(
    basis: &FockBasis,
    params: &DriveParams,
    etas: [f64; 4],
    cache: &mut PropagatorCache,
) -> Result<Array2<C64>> {
    cycle_unitary(basis, params, ProtocolKind::U4, etas, cache)
}

pub fn cycle_unitary_u5(
    basis: &FockBasis,
    params: &DriveParams,
    etas: [f64; 4],
    cache: &mut PropagatorCache,
) -> Result<Array2<C64>> {
    cycle_unitary(basis, params, ProtocolKind::U5, etas, cache)
}

/// The two dipole unitaries. Each spans a full period: a half period with the
/// x field up (sign +) or down (sign -) against b = 1, then the same half
/// period against b = -1. The first returned unitary applies the minus dipole
/// first, the second the plus dipole first.
pub fn dipole_unitaries(
    basis: &FockBasis,
    params: &DriveParams,
    cache: &mut PropagatorCache,
) -> Result<(Array2<C64>, Array2<C64>)> {
    let quarter = params.period / 4.0;
    let mut half = |a: i8| -> Result<Array2<C64>> {
        let first = PulseParams::new(a, 1, params.w, params.lambda, params.delta_w, params.delta_lambda)?;
        let second = PulseParams::new(a, -1, params.w, params.lambda, params.delta_w, params.delta_lambda)?;
        let p1 = cache.propagator(basis, &first, quarter)?;
        let p2 = cache.propagator(basis, &second, quarter)?;
        Ok(p2.dot(&*p1))
    };
    let u_plus = half(1)?;
    let u_minus = half(-1)?;
    let u1 = u_plus.dot(&u_minus);
    let u2 = u_minus.dot(&u_plus);
    Ok((u1, u2))
}

/// Symbol stream over {1, 2} in application order.
pub fn sequence_symbols(kind: SequenceKind, m: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sequence_symbols_with(&mut rng, kind, m)
}

pub fn sequence_symbols_with(rng: &mut impl Rng, kind: SequenceKind, m: usize) -> Vec<u8> {
    match kind {
        SequenceKind::Periodic => vec![1; m],
        SequenceKind::Random => (0..m).map(|_| rng.random_range(1..=2) as u8).collect(),
        // symbol at step n is 1 + parity of the binary digits of n
        SequenceKind::ThueMorse => (0..m as u64).map(|n| 1 + (n.count_ones() & 1) as u8).collect(),
        SequenceKind::Fibonacci => {
            let mut prev: Vec<u8> = vec![1];
            let mut cur: Vec<u8> = vec![1, 2];
            while cur.len() < m {
                let mut next = cur.clone();
                next.extend_from_slice(&prev);
                prev = cur;
                cur = next;
            }
            cur.truncate(m);
            cur
        }
    }
}

/// A fully materialized run: either per-cycle pulse lists or a symbol stream
/// over the two dipole unitaries.
pub enum DriveProgram {
    Pulsed {
        cycles: Vec<[(PulseParams, f64); 4]>,
        /// Apply cached dense propagators (few distinct pulse lengths) rather
        /// than per-pulse spectral evolution (all lengths distinct).
        dense: bool,
    },
    Dipolar {
        symbols: Vec<u8>,
        u1: Array2<C64>,
        u2: Array2<C64>,
    },
}

impl DriveProgram {
    pub fn cycles(&self) -> usize {
        match self {
            DriveProgram::Pulsed { cycles, .. } => cycles.len(),
            DriveProgram::Dipolar { symbols, .. } => symbols.len(),
        }
    }
}

pub fn build_program(
    basis: &FockBasis,
    params: &DriveParams,
    kind: ProtocolKind,
    m_max: usize,
    cache: &mut PropagatorCache,
    rng: &mut ChaCha8Rng,
) -> Result<DriveProgram> {
    if let Some(seq) = kind.sequence_kind() {
        let symbols = sequence_symbols_with(rng, seq, m_max);
        let (u1, u2) = dipole_unitaries(basis, params, cache)?;
        Ok(DriveProgram::Dipolar { symbols, u1, u2 })
    } else {
        let mut cycles = Vec::with_capacity(m_max);
        for _ in 0..m_max {
            let e = draw_etas(rng, 4, params.eta_mode);
            cycles.push(cycle_pulses(params, kind, [e[0], e[1], e[2], e[3]])?);
        }
        Ok(DriveProgram::Pulsed { cycles, dense: params.eta_mode == EtaMode::Binary })
    }
}

/// Apply a program to the all-down state, recording observables after every
/// cycle (row 0 is the initial state). The observer, when given, is invoked
/// at every cycle boundary including m = 0.
pub fn run_program(
    basis: &FockBasis,
    program: &DriveProgram,
    cache: &mut PropagatorCache,
    mut observer: Option<&mut dyn FnMut(usize, &StateVector)>,
) -> Result<Trajectory> {
    let initial = all_down_state(basis);
    let mut state = initial.clone();
    let mut traj = Trajectory::with_capacity(program.cycles());
    traj.push(magnetization(basis, &state), fidelity(&initial, &state));
    if let Some(obs) = observer.as_deref_mut() {
        obs(0, &state);
    }
    let step = |m: usize, state: &StateVector, traj: &mut Trajectory| -> Result<()> {
        let drift = (norm_sq(state) - 1.0).abs();
        if drift > NORM_DRIFT_TOL {
            return Err(Error::NormDrift { cycle: m, drift });
        }
        traj.push(magnetization(basis, state), fidelity(&initial, state));
        Ok(())
    };
    match program {
        DriveProgram::Pulsed { cycles, dense } => {
            for (i, cycle) in cycles.iter().enumerate() {
                for (p, t) in cycle.iter() {
                    state = if *dense {
                        cache.propagator(basis, p, *t)?.dot(&state)
                    } else {
                        cache.decomposition(basis, p)?.evolve(&state, *t)
                    };
                }
                step(i + 1, &state, &mut traj)?;
                if let Some(obs) = observer.as_deref_mut() {
                    obs(i + 1, &state);
                }
            }
        }
        DriveProgram::Dipolar { symbols, u1, u2 } => {
            for (i, &s) in symbols.iter().enumerate() {
                state = if s == 1 { u1.dot(&state) } else { u2.dot(&state) };
                step(i + 1, &state, &mut traj)?;
                if let Some(obs) = observer.as_deref_mut() {
                    obs(i + 1, &state);
                }
            }
        }
    }
    Ok(traj)
}

/// Build and run a program for `m_max` cycles, seeding the stream from the
/// params.
pub fn run_protocol(
    basis: &FockBasis,
    params: &DriveParams,
    kind: ProtocolKind,
    m_max: usize,
    observer: Option<&mut dyn FnMut(usize, &StateVector)>,
) -> Result<Trajectory> {
    let mut cache = PropagatorCache::new(basis);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let program = build_program(basis, params, kind, m_max, &mut cache, &mut rng)?;
    run_program(basis, &program, &mut cache, observer)
}
