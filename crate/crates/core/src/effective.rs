//! Closed-form leading-order predictions for the drive families and the
//! numerical extractions used to compare them with exact cycle propagators.

use ndarray::Array2;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hilbert::FockBasis;
use crate::operators::{build_c_operator, build_hr, hermiticity_error};
use crate::propagator::{diagonalize, extract_heff};
use crate::protocols::ProtocolKind;
use crate::C64;

/// One member of a slow-thermalization period family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecialPeriodFamily {
    pub protocol: ProtocolKind,
    pub p: u32,
    pub t_star: f64,
}

/// Periods at which the leading correction to the frozen evolution vanishes.
/// The half-period field flip family sits at lambda T* = 2 pi p (p >= 1);
/// the quarter-period flip family at lambda T* = 4 pi (p + 1/2) (p >= 0).
pub fn special_periods(
    protocol: ProtocolKind,
    lambda: f64,
    p_max: u32,
) -> Result<Vec<SpecialPeriodFamily>> {
    if !(lambda > 0.0) {
        return Err(Error::precondition(format!(
            "special periods need lambda > 0, got {lambda}"
        )));
    }
    if p_max < 1 {
        return Err(Error::precondition("p_max must be at least 1"));
    }
    let family = |p: u32, t_star: f64| SpecialPeriodFamily { protocol, p, t_star };
    match protocol {
        ProtocolKind::U4 => Ok((1..=p_max)
            .map(|p| family(p, 2.0 * PI * f64::from(p) / lambda))
            .collect()),
        ProtocolKind::U5 => Ok((0..=p_max)
            .map(|p| family(p, 4.0 * PI / lambda * (f64::from(p) + 0.5)))
            .collect()),
        other => Err(Error::precondition(format!(
            "{other:?} has no special period family"
        ))),
    }
}

/// Coefficients of a 2x2 Hermitian matrix on {I, tau_z, tau_x, tau_y}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliCoeffs {
    pub identity: f64,
    pub z: f64,
    pub x: f64,
    pub y: f64,
}

impl PauliCoeffs {
    pub fn reconstruct(&self) -> Array2<C64> {
        let (i0, z, x, y) = (self.identity, self.z, self.x, self.y);
        ndarray::array![
            [C64::new(i0 + z, 0.0), C64::new(x, -y)],
            [C64::new(x, y), C64::new(i0 - z, 0.0)],
        ]
    }
}

pub const PAULI_HERMITICITY_TOL: f64 = 1e-12;

pub fn pauli_decompose(h: &Array2<C64>) -> Result<PauliCoeffs> {
    if h.nrows() != 2 || h.ncols() != 2 {
        return Err(Error::DimensionMismatch { left: h.nrows(), right: 2 });
    }
    let dev = hermiticity_error(h);
    if dev > PAULI_HERMITICITY_TOL {
        return Err(Error::NotHermitian { max_dev: dev, tol: PAULI_HERMITICITY_TOL });
    }
    Ok(PauliCoeffs {
        identity: (h[(0, 0)].re + h[(1, 1)].re) / 2.0,
        z: (h[(0, 0)].re - h[(1, 1)].re) / 2.0,
        x: h[(0, 1)].re,
        y: -h[(0, 1)].im,
    })
}

/// Integral of exp(-2i (eta1 - eta2) lambda t) over one jitter quantum.
/// Vanishes when (eta1 - eta2) lambda dT is a multiple of pi.
pub fn first_order_integral_block(lambda: f64, dt_amp: f64, eta1: f64, eta2: f64) -> C64 {
    let k = 2.0 * (eta1 - eta2) * lambda;
    if k == 0.0 {
        return C64::new(dt_amp, 0.0);
    }
    (C64::new(1.0, 0.0) - C64::new(0.0, -k * dt_amp).exp()) / C64::new(0.0, k)
}

/// Reference quadrature for the same integrand.
pub fn block_quadrature(lambda: f64, dt_amp: f64, eta1: f64, eta2: f64, n: usize) -> C64 {
    let k = 2.0 * (eta1 - eta2) * lambda;
    simpson(|t| C64::new(0.0, -k * t).exp(), 0.0, dt_amp, n)
}

/// Scalar in front of the hop-and-count operator in the second-order
/// generator of the undetuned jitter cycle. The field direction is frozen
/// across pulses 1-2 and reversed across 3-4, so the first pair enters with
/// the opposite sign of the second.
pub fn heff2_coefficient(w: f64, lambda: f64, etas: [f64; 4]) -> f64 {
    (etas[0] - etas[1] + etas[2] - etas[3]) * w * w / (2.0 * lambda)
}

/// Second-order effective generator of the undetuned jitter cycle in the
/// strong-field regime, valid when lambda dT is an odd multiple of pi/2.
pub fn heff2_block(basis: &FockBasis, w: f64, lambda: f64, etas: [f64; 4]) -> Result<Array2<C64>> {
    if lambda == 0.0 {
        return Err(Error::precondition("the strong-field expansion needs lambda != 0"));
    }
    let coeff = heff2_coefficient(w, lambda, etas);
    Ok(build_c_operator(basis).mapv(|x| x * coeff))
}

fn segment_boundaries(period: f64, dt_amp: f64, etas: [f64; 4]) -> Result<[f64; 4]> {
    if !(period > 0.0) || dt_amp < 0.0 {
        return Err(Error::precondition(format!(
            "need period > 0 and dt_amp >= 0, got ({period}, {dt_amp})"
        )));
    }
    let quarter = period / 4.0;
    let mut bounds = [0.0; 4];
    let mut acc = 0.0;
    for (i, &eta) in etas.iter().enumerate() {
        let dur = quarter + eta * dt_amp;
        if dur <= 0.0 {
            return Err(Error::precondition(format!(
                "pulse {i} has non-positive duration {dur}"
            )));
        }
        acc += dur;
        bounds[i] = acc;
    }
    Ok(bounds)
}

/// Piecewise-linear phase time accumulated by the frozen field up to t.
/// The half-period flip drive rises to the half-cycle boundary and falls
/// back; the quarter-period flip drive zigzags across all four pulses.
pub fn retarded_time(
    kind: ProtocolKind,
    period: f64,
    dt_amp: f64,
    etas: [f64; 4],
    t: f64,
) -> Result<f64> {
    let bounds = segment_boundaries(period, dt_amp, etas)?;
    let total = bounds[3];
    if !(0.0..=total).contains(&t) {
        return Err(Error::precondition(format!(
            "t = {t} outside the cycle [0, {total}]"
        )));
    }
    match kind {
        ProtocolKind::U4 => {
            let t01 = bounds[1];
            Ok(if t <= t01 { t } else { 2.0 * t01 - t })
        }
        ProtocolKind::U5 => {
            let [t1, t2, t3, _] = bounds;
            Ok(if t <= t1 {
                t
            } else if t <= t2 {
                2.0 * t1 - t
            } else if t <= t3 {
                t + 2.0 * t1 - 2.0 * t2
            } else {
                2.0 * t3 - 2.0 * t2 + 2.0 * t1 - t
            })
        }
        other => Err(Error::precondition(format!(
            "{other:?} has no zigzag phase structure"
        ))),
    }
}

/// Frozen-field propagator at time t inside one cycle: a diagonal phase
/// exp(+i lambda z_s B(t)) per configuration, with B the retarded time.
pub fn u4_u5_zeroth_order(
    basis: &FockBasis,
    lambda: f64,
    period: f64,
    dt_amp: f64,
    etas: [f64; 4],
    kind: ProtocolKind,
    t: f64,
) -> Result<Array2<C64>> {
    let b = retarded_time(kind, period, dt_amp, etas, t)?;
    let l = basis.l() as i32;
    let d = basis.dim();
    let mut u = Array2::<C64>::zeros((d, d));
    for (s, &mask) in basis.states().iter().enumerate() {
        let z = f64::from(2 * mask.count_ones() as i32 - l);
        u[(s, s)] = C64::new(0.0, lambda * z * b).exp();
    }
    Ok(u)
}

/// Closed form of the two-segment first-order integral for the half-period
/// flip drive, for arbitrary jitter.
pub fn first_order_a_integral(lambda: f64, period: f64, dt_amp: f64, etas: [f64; 4]) -> Result<C64> {
    let bounds = segment_boundaries(period, dt_amp, etas)?;
    let (t01, t02) = (bounds[1], bounds[3]);
    if lambda == 0.0 {
        return Ok(C64::new(t02, 0.0));
    }
    let e = |b: f64| C64::new(0.0, -2.0 * lambda * b).exp();
    let num = C64::new(1.0, 0.0) - 2.0 * e(t01) + e(2.0 * t01 - t02);
    Ok(num / C64::new(0.0, 2.0 * lambda))
}

/// The same amplitude once the jitter quantum satisfies lambda dT = p pi/2
/// with sign-valued offsets: every jitter phase collapses and the value
/// depends on the period alone. Zero exactly at lambda T = 2 p pi.
pub fn first_order_a(lambda: f64, period: f64) -> C64 {
    if lambda == 0.0 {
        return C64::new(period, 0.0);
    }
    (C64::new(1.0, 0.0) - C64::new(0.0, -lambda * period).exp()) / C64::new(0.0, lambda)
}

/// Closed form of the four-segment first-order integral for the
/// quarter-period flip drive, for arbitrary jitter.
pub fn first_order_b_integral(lambda: f64, period: f64, dt_amp: f64, etas: [f64; 4]) -> Result<C64> {
    let bounds = segment_boundaries(period, dt_amp, etas)?;
    let [t1, t2, t3, t4] = bounds;
    if lambda == 0.0 {
        return Ok(C64::new(t4, 0.0));
    }
    let e = |b: f64| C64::new(0.0, -2.0 * lambda * b).exp();
    let b1 = t1;
    let b2 = 2.0 * t1 - t2;
    let b3 = 2.0 * t1 - 2.0 * t2 + t3;
    let b4 = 2.0 * t1 - 2.0 * t2 + 2.0 * t3 - t4;
    let num = C64::new(1.0, 0.0) - 2.0 * e(b1) + 2.0 * e(b2) - 2.0 * e(b3) + e(b4);
    Ok(num / C64::new(0.0, 2.0 * lambda))
}

/// Dimensionless envelope of the quarter-period flip amplitude under the
/// odd-multiple jitter condition. Its zeros define the second period family.
pub fn first_order_b_envelope(lambda: f64, period: f64) -> f64 {
    (lambda * period / 4.0).cos()
}

/// Reference quadrature of exp(-2 i lambda B(t)) over one cycle, summed
/// segment by segment so the kinks of B never cross a panel.
pub fn zigzag_quadrature(
    kind: ProtocolKind,
    lambda: f64,
    period: f64,
    dt_amp: f64,
    etas: [f64; 4],
    n_per_segment: usize,
) -> Result<C64> {
    let bounds = segment_boundaries(period, dt_amp, etas)?;
    let mut total = C64::new(0.0, 0.0);
    let mut lo = 0.0;
    for &hi in &bounds {
        total += simpson(
            |t| {
                let b = retarded_time(kind, period, dt_amp, etas, t).expect("t inside cycle");
                C64::new(0.0, -2.0 * lambda * b).exp()
            },
            lo,
            hi,
            n_per_segment,
        );
        lo = hi;
    }
    Ok(total)
}

fn simpson<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, n: usize) -> C64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * (h / 3.0)
}

/// First order in the field offset for one reduced dipole-pair cycle,
/// reported for the reversed-sense generator (the convention in which the
/// series checks below quote their coefficients). Both off-diagonal
/// coefficients share the factor G and vanish together where sin(x0/4) = 0,
/// i.e. at periods with T sqrt(lambda^2 + 3 w^2) = 4 p pi.
pub fn single_cycle_first_order(
    w: f64,
    lambda: f64,
    delta_lambda: f64,
    period: f64,
) -> PauliCoeffs {
    let t = period;
    let x0 = t * (lambda * lambda + 3.0 * w * w).sqrt();
    let lt2 = (lambda * t).powi(2);
    let wt2 = (w * t).powi(2);
    let g = lt2 * x0 + 6.0 * wt2 * (x0 / 2.0).sin();
    let x05 = x0.powi(5);
    PauliCoeffs {
        identity: -2.0 * delta_lambda,
        z: -delta_lambda * (lt2 + 3.0 * wt2 * (x0 / 2.0).cos()) * g / x05,
        x: 2.0 * 3.0_f64.sqrt() * w * lambda * t * t * delta_lambda * (x0 / 4.0).sin().powi(2) * g
            / x05,
        y: -(3.0_f64.sqrt()) * w * t * delta_lambda * (x0 / 2.0).sin() * g / x0.powi(4),
    }
}

/// Reduced two-level pulse run with the reversed sense, so that the
/// extracted generator of a cycle carries the same signs as
/// single_cycle_first_order.
fn reduced_pulse(a: i8, b: i8, w: f64, lambda: f64, delta_lambda: f64, t: f64) -> Result<Array2<C64>> {
    Ok(diagonalize(&build_hr(a, b, w, lambda, delta_lambda))?.propagator(-t))
}

/// The two reduced dipole-pair unitaries over one period, mirroring the full
/// chain construction: each half applies the b = +1 pulse first, the first
/// returned cycle applies the minus dipole first.
pub fn reduced_cycle_unitaries(
    w: f64,
    lambda: f64,
    delta_lambda: f64,
    period: f64,
) -> Result<(Array2<C64>, Array2<C64>)> {
    let quarter = period / 4.0;
    let half = |a: i8| -> Result<Array2<C64>> {
        let first = reduced_pulse(a, 1, w, lambda, delta_lambda, quarter)?;
        let second = reduced_pulse(a, -1, w, lambda, delta_lambda, quarter)?;
        Ok(second.dot(&first))
    };
    let plus = half(1)?;
    let minus = half(-1)?;
    Ok((plus.dot(&minus), minus.dot(&plus)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReducedCheckKind {
    /// Cycle pair with alternating orientation: offsets cancel at first order
    /// everywhere off the diagonal.
    AlternatingPair,
    /// The same cycle twice: first-order off-diagonal terms survive.
    RepeatedPair,
    /// One cycle against its closed-form first-order coefficients.
    SingleCycle,
}

#[derive(Debug, Clone)]
pub struct SeriesRow {
    pub label: String,
    pub observed: f64,
    pub expected: f64,
    /// Absolute bound on |observed - expected|.
    pub tolerance: f64,
    pub pass: bool,
}

impl SeriesRow {
    fn new(label: impl Into<String>, observed: f64, expected: f64, tolerance: f64) -> Self {
        let pass = (observed - expected).abs() <= tolerance;
        SeriesRow { label: label.into(), observed, expected, tolerance, pass }
    }
}

#[derive(Debug, Clone)]
pub struct ReducedSeriesReport {
    pub kind: ReducedCheckKind,
    pub rows: Vec<SeriesRow>,
}

impl ReducedSeriesReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

fn cycle_coeffs(u: &Array2<C64>, span: f64) -> Result<PauliCoeffs> {
    pauli_decompose(&extract_heff(u, span)?.matrix)
}

/// Fits leading powers and coefficients of the reduced-model generator
/// against their series predictions. Rows that miss their tolerance come
/// back with pass = false rather than an error; errors are structural.
pub fn l3_series_check(w: f64, lambda: f64, kind: ReducedCheckKind) -> Result<ReducedSeriesReport> {
    let mut rows = Vec::new();
    match kind {
        ReducedCheckKind::AlternatingPair => {
            let t = 0.05;
            // Nine log-spaced offsets over two decades; the exponent fit uses
            // the upper decade where the quadratic signal clears the
            // eigensolver noise floor by several orders.
            let deltas: Vec<f64> = (0..9).map(|k| 10f64.powf(-4.0 + k as f64 / 4.0)).collect();
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            let mut z_at_mid = 0.0;
            for &dl in &deltas {
                let (u1, u2) = reduced_cycle_unitaries(w, lambda, dl, t)?;
                let c = cycle_coeffs(&u1.dot(&u2), 2.0 * t)?;
                if dl >= 1e-3 {
                    xs.push((dl, c.x.abs()));
                    ys.push((dl, c.y.abs()));
                }
                if (dl - 1e-3).abs() < 1e-12 {
                    z_at_mid = c.z;
                }
            }
            rows.push(SeriesRow::new("alternating x exponent", log_log_slope(&xs), 2.0, 0.1));
            rows.push(SeriesRow::new("alternating y exponent", log_log_slope(&ys), 2.0, 0.1));
            let dl = 1e-3;
            let z_exp = dl * (-1.0 + w * w * t * t / 2.0);
            rows.push(SeriesRow::new(
                "alternating z coefficient",
                z_at_mid,
                z_exp,
                0.05 * z_exp.abs(),
            ));
        }
        ReducedCheckKind::RepeatedPair => {
            let t = 0.05;
            let dl = 1e-3;
            let (u1, _) = reduced_cycle_unitaries(w, lambda, dl, t)?;
            let c = cycle_coeffs(&u1.dot(&u1), 2.0 * t)?;
            let y_exp = -(3.0_f64.sqrt()) * w * t * dl / 2.0;
            let x_exp = 3.0_f64.sqrt() * w * lambda * t * t * dl / 8.0;
            let z_exp = dl * (-1.0 + w * w * t * t / 2.0);
            rows.push(SeriesRow::new("repeated y coefficient", c.y, y_exp, 0.05 * y_exp.abs()));
            rows.push(SeriesRow::new("repeated x coefficient", c.x, x_exp, 0.05 * x_exp.abs()));
            rows.push(SeriesRow::new("repeated z coefficient", c.z, z_exp, 0.05 * z_exp.abs()));
        }
        ReducedCheckKind::SingleCycle => {
            let dl = 1e-4;
            for &t in &[0.3, 1.0, 2.0] {
                let (u1, _) = reduced_cycle_unitaries(w, lambda, dl, t)?;
                let c = cycle_coeffs(&u1, t)?;
                let pred = single_cycle_first_order(w, lambda, dl, t);
                rows.push(SeriesRow::new(
                    format!("single z at T={t}"),
                    c.z,
                    pred.z,
                    0.01 * pred.z.abs(),
                ));
                rows.push(SeriesRow::new(
                    format!("single x at T={t}"),
                    c.x,
                    pred.x,
                    0.01 * pred.x.abs(),
                ));
            }
            // Both off-diagonal coefficients vanish where sin(x0/4) = 0. The
            // x coefficient touches zero quadratically, so the root is
            // located through the signed factor and x is checked there.
            let eps = (lambda * lambda + 3.0 * w * w).sqrt();
            let target = 4.0 * PI / eps;
            let root = bisect(
                |t| (t * eps / 4.0).sin(),
                target - 0.5,
                target + 0.5,
                1e-10,
            )
            .ok_or_else(|| Error::precondition("no sign change in the root bracket"))?;
            rows.push(SeriesRow::new("single off-diagonal root (w T)", w * root, w * target, 1e-8));
            let at_root = single_cycle_first_order(w, lambda, dl, root);
            rows.push(SeriesRow::new("single x at root", at_root.x, 0.0, 1e-12));
        }
    }
    Ok(ReducedSeriesReport { kind, rows })
}
