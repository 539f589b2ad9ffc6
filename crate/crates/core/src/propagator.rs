//! Exact step evolution: Hermitian eigendecomposition, unitary pulse
//! propagators, a per-run propagator cache, and principal-branch extraction of
//! effective generators from cycle unitaries.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};

use crate::error::{Error, Result};
use crate::hilbert::{BoundaryCondition, FockBasis, StateVector};
use crate::operators::{build_hamiltonian, hermiticity_error, PulseParams};
use crate::C64;

const HERMITICITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Ascending eigenvalues.
    pub energies: Array1<f64>,
    /// Eigenvectors as columns, unitary.
    pub vectors: Array2<C64>,
}

pub fn diagonalize(h: &Array2<C64>) -> Result<SpectralDecomposition> {
    let scale = h.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let dev = hermiticity_error(h);
    if dev > HERMITICITY_TOL * scale {
        return Err(Error::NotHermitian { max_dev: dev, tol: HERMITICITY_TOL * scale });
    }
    let (energies, raw) = h
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Eigensolver(e.to_string()))?;
    // The LAPACK wrapper's eigenvector layout for complex input depends on
    // the buffer's memory order (a row-major Hermitian matrix reaches the
    // column-major backend as its conjugate). Instead of hard-coding that,
    // take whichever reading of the returned array best satisfies H V = V E.
    // All four must be ranked: on a matrix whose eigenvectors are close to
    // the computational basis several readings come within any absolute
    // tolerance of each other, and only the true one reaches the floating
    // point floor. The gate scales with the matrix norm for the same reason.
    let d = h.nrows();
    let tol = 1e-10 * scale * (d as f64).sqrt().max(1.0);
    let mut best: Option<(f64, Array2<C64>)> = None;
    for reading in 0..4 {
        let vectors: Array2<C64> = match reading {
            0 => raw.as_standard_layout().into_owned(),
            1 => raw.mapv(|x| x.conj()),
            2 => raw.t().as_standard_layout().into_owned(),
            _ => raw.t().mapv(|x| x.conj()),
        };
        let hv = h.dot(&vectors);
        let resid = hv
            .indexed_iter()
            .map(|((r, c), x)| (x - vectors[[r, c]] * energies[c]).norm())
            .fold(0.0, f64::max);
        if best.as_ref().is_none_or(|(r, _)| resid < *r) {
            best = Some((resid, vectors));
        }
    }
    let (resid, vectors) = best.expect("four readings were ranked");
    if resid <= tol {
        Ok(SpectralDecomposition { energies, vectors })
    } else {
        Err(Error::Eigensolver(format!(
            "no reading of the eigenvector array satisfies the spectral residual \
             (best {resid:e}, tolerance {tol:e})"
        )))
    }
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Dense propagator U = V diag(e^{-i E t}) V^dag. `t` may be negative.
    pub fn propagator(&self, t: f64) -> Array2<C64> {
        let phases = self.energies.mapv(|e| (-C64::i() * e * t).exp());
        let scaled = &self.vectors * &phases; // scales column k by phases[k]
        let vdag = self.vectors.t().mapv(|x| x.conj());
        scaled.dot(&vdag)
    }

    /// Evolve a state for duration `t` without forming the dense propagator.
    pub fn evolve(&self, state: &StateVector, t: f64) -> StateVector {
        let vdag = self.vectors.t().mapv(|x| x.conj());
        let mut coeffs = vdag.dot(state);
        coeffs
            .iter_mut()
            .zip(self.energies.iter())
            .for_each(|(a, &e)| *a *= (-C64::i() * e * t).exp());
        self.vectors.dot(&coeffs)
    }
}

pub fn evolve(state: &StateVector, u: &Array2<C64>) -> Result<StateVector> {
    if state.len() != u.ncols() {
        return Err(Error::DimensionMismatch { left: u.ncols(), right: state.len() });
    }
    Ok(u.dot(state))
}

#[derive(Debug, Clone)]
pub struct HeffResult {
    pub matrix: Array2<C64>,
    /// Set when any eigenphase lies within 1e-8 of the +-pi branch cut, where
    /// the principal logarithm is ill-determined.
    pub branch_warning: bool,
}

/// Eigenphases and orthonormal eigenvectors of a unitary matrix.
///
/// U is normal, so its Hermitian part A = (U+U^dag)/2 and anti-Hermitian part
/// B = (U-U^dag)/(2i) commute; diagonalizing A and then B restricted to each
/// degenerate block of A yields a joint orthonormal eigenbasis with
/// eigenvalue cos(theta) + i sin(theta). This avoids the non-orthogonal
/// eigenvectors a general eigensolver can return for clustered phases.
fn unitary_eigenphases(u: &Array2<C64>) -> Result<(Vec<f64>, Array2<C64>)> {
    let d = u.nrows();
    let udag = u.t().mapv(|x| x.conj());
    let a = (u + &udag).mapv(|x| x * 0.5);
    let b = (u - &udag).mapv(|x| x * C64::new(0.0, -0.5));
    let dec_a = diagonalize(&a)?;
    let (alpha, mut v) = (dec_a.energies, dec_a.vectors);
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && alpha[end] - alpha[end - 1] < 1e-7 {
            end += 1;
        }
        if end - start > 1 {
            let block = v.slice(ndarray::s![.., start..end]).to_owned();
            let b_block = block.t().mapv(|x| x.conj()).dot(&b).dot(&block);
            let rotated = block.dot(&diagonalize(&b_block)?.vectors);
            v.slice_mut(ndarray::s![.., start..end]).assign(&rotated);
        }
        start = end;
    }
    // Each column now spans a one-dimensional joint eigenspace; the phase is
    // read off the Rayleigh quotient of U itself, which keeps vector and
    // phase paired even when the two partial spectra order a cluster
    // differently.
    let uv = u.dot(&v);
    let theta = (0..d)
        .map(|k| {
            let mu: C64 = v.column(k).iter().zip(uv.column(k)).map(|(x, y)| x.conj() * y).sum();
            let th = mu.im.atan2(mu.re);
            if th == -PI {
                PI // principal branch is (-pi, pi]
            } else {
                th
            }
        })
        .collect();
    Ok((theta, v))
}

/// Principal-branch effective generator: H = (i/total_time) log U with
/// eigenphases in (-pi, pi].
pub fn extract_heff(u: &Array2<C64>, total_time: f64) -> Result<HeffResult> {
    if total_time <= 0.0 {
        return Err(Error::precondition(format!(
            "total_time must be positive, got {total_time}"
        )));
    }
    let (theta, v) = unitary_eigenphases(u)?;
    let branch_warning = theta.iter().any(|&t| PI - t.abs() < 1e-8);
    // U = V e^{i theta} V^dag = e^{-i H t}  =>  H eigenvalues -theta/t
    let energies = Array1::from_iter(theta.iter().map(|&t| -t / total_time));
    let diag = energies.mapv(|e| C64::new(e, 0.0));
    let scaled = &v * &diag;
    let vdag = v.t().mapv(|x| x.conj());
    let h = scaled.dot(&vdag);
    let hdag = h.t().mapv(|x| x.conj());
    let matrix = (&h + &hdag).mapv(|x| x * 0.5);
    Ok(HeffResult { matrix, branch_warning })
}

/// Per-run store of spectral decompositions and dense pulse propagators,
/// bound to one basis. With binary eta there are at most 4 sign pairs x 2
/// durations = 8 distinct propagators per drive configuration.
pub struct PropagatorCache {
    l: usize,
    bc: BoundaryCondition,
    decomps: HashMap<[u64; 6], Arc<SpectralDecomposition>>,
    props: HashMap<[u64; 7], Arc<Array2<C64>>>,
}

fn params_key(p: &PulseParams) -> [u64; 6] {
    [
        p.a as u64,
        p.b as u64,
        p.w.to_bits(),
        p.lambda.to_bits(),
        p.delta_w.to_bits(),
        p.delta_lambda.to_bits(),
    ]
}

impl PropagatorCache {
    pub fn new(basis: &FockBasis) -> Self {
        PropagatorCache {
            l: basis.l(),
            bc: basis.bc(),
            decomps: HashMap::new(),
            props: HashMap::new(),
        }
    }

    fn check_basis(&self, basis: &FockBasis) {
        assert!(
            self.l == basis.l() && self.bc == basis.bc(),
            "cache bound to L={} {:?}, used with L={} {:?}",
            self.l,
            self.bc,
            basis.l(),
            basis.bc()
        );
    }

    pub fn decomposition(
        &mut self,
        basis: &FockBasis,
        params: &PulseParams,
    ) -> Result<Arc<SpectralDecomposition>> {
        self.check_basis(basis);
        let key = params_key(params);
        if let Some(d) = self.decomps.get(&key) {
            return Ok(Arc::clone(d));
        }
        let h = build_hamiltonian(basis, params);
        let decomp = Arc::new(diagonalize(&h)?);
        self.decomps.insert(key, Arc::clone(&decomp));
        Ok(decomp)
    }

    /// Dense propagator for (params, t), keyed bitwise: a hit returns the
    /// identical matrix built on first use.
    pub fn propagator(
        &mut self,
        basis: &FockBasis,
        params: &PulseParams,
        t: f64,
    ) -> Result<Arc<Array2<C64>>> {
        self.check_basis(basis);
        let pk = params_key(params);
        let key = [pk[0], pk[1], pk[2], pk[3], pk[4], pk[5], t.to_bits()];
        if let Some(u) = self.props.get(&key) {
            return Ok(Arc::clone(u));
        }
        let decomp = self.decomposition(basis, params)?;
        let u = Arc::new(decomp.propagator(t));
        self.props.insert(key, Arc::clone(&u));
        Ok(u)
    }

    pub fn cached_propagators(&self) -> usize {
        self.props.len()
    }

    pub fn cached_decompositions(&self) -> usize {
        self.decomps.len()
    }
}

pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn identity(d: usize) -> Array2<C64> {
    Array2::eye(d)
}

pub fn unitarity_error(u: &Array2<C64>) -> f64 {
    let udag = u.t().mapv(|x| x.conj());
    max_abs_diff(&udag.dot(u), &Array2::eye(u.nrows()))
}
