//! Dense operator matrices in the constrained Fock basis: the projected
//! spin-flip (PXP) term, the total-field term, pulse Hamiltonians, the
//! second-order effective operator C-hat, and the two-level reduced model.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{BoundaryCondition, FockBasis};
use crate::C64;

/// Static couplings of one square pulse. The pulse Hamiltonian uses the
/// effective couplings w_eff = a*w + dw and lambda_eff = b*lambda + dl.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    pub a: i8,
    pub b: i8,
    pub w: f64,
    pub lambda: f64,
    pub delta_w: f64,
    pub delta_lambda: f64,
}

impl PulseParams {
    pub fn new(a: i8, b: i8, w: f64, lambda: f64, delta_w: f64, delta_lambda: f64) -> Result<Self> {
        if !matches!(a, -1 | 1) || !matches!(b, -1 | 1) {
            return Err(Error::precondition(format!(
                "pulse signs must be +1 or -1, got a={a}, b={b}"
            )));
        }
        Ok(PulseParams { a, b, w, lambda, delta_w, delta_lambda })
    }

    pub fn w_eff(&self) -> f64 {
        f64::from(self.a) * self.w + self.delta_w
    }

    pub fn lambda_eff(&self) -> f64 {
        f64::from(self.b) * self.lambda + self.delta_lambda
    }
}

pub fn hermiticity_error(m: &Array2<C64>) -> f64 {
    let mut max = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            max = max.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    max
}

/// Sum over sites of the projected flip P_{j-1} sigma^x_j P_{j+1}: element 1
/// between masks differing by one flip at a site whose existing neighbors are
/// down. A missing neighbor at an open edge counts as down.
pub fn build_pxp_term(basis: &FockBasis) -> Array2<C64> {
    let d = basis.dim();
    let mut m = Array2::zeros((d, d));
    for (i, &s) in basis.states().iter().enumerate() {
        for j in 0..basis.l() {
            if basis.all_down(s, basis.neighbors(j)) {
                let flipped = s ^ (1 << j);
                let k = basis.index_of(flipped).expect("flip with down neighbors stays admissible");
                m[[k, i]] = C64::new(1.0, 0.0);
            }
        }
    }
    m
}

/// Diagonal total-field term sum_j sigma^z_j: entry 2*popcount - L.
pub fn build_sz_total(basis: &FockBasis) -> Array2<C64> {
    let d = basis.dim();
    let l = basis.l() as i32;
    let mut m = Array2::zeros((d, d));
    for (i, &s) in basis.states().iter().enumerate() {
        m[[i, i]] = C64::new(f64::from(2 * s.count_ones() as i32 - l), 0.0);
    }
    m
}

/// Pulse Hamiltonian H = (a*w + dw) * PXP - (b*lambda + dl) * Sz.
pub fn build_hamiltonian(basis: &FockBasis, p: &PulseParams) -> Array2<C64> {
    let mut h = build_pxp_term(basis);
    h.mapv_inplace(|x| x * p.w_eff());
    let le = p.lambda_eff();
    let l = basis.l() as i32;
    for (i, &s) in basis.states().iter().enumerate() {
        h[[i, i]] -= C64::new(le * f64::from(2 * s.count_ones() as i32 - l), 0.0);
    }
    h
}

/// Second-order effective operator: for each site j, the projected field
/// P_{j-1} sigma^z_j P_{j+1} plus blockade-constrained nearest-neighbor
/// hopping P_{j-1} (s+_j s-_{j+1} + s-_j s+_{j+1}) P_{j+2}.
///
/// The sandwich projectors are applied in operator order (rightmost factor
/// first): P_{j+2} on the incoming state, P_{j-1} on the flipped state. The
/// distinction only matters when projector sites coincide with the hopping
/// pair (periodic L <= 3).
pub fn build_c_operator(basis: &FockBasis) -> Array2<C64> {
    let d = basis.dim();
    let l = basis.l();
    let open = basis.bc() == BoundaryCondition::Open;
    let mut m = Array2::<C64>::zeros((d, d));
    for (i, &s) in basis.states().iter().enumerate() {
        for j in 0..l {
            if basis.all_down(s, basis.neighbors(j)) {
                let sign = if s >> j & 1 == 1 { 1.0 } else { -1.0 };
                m[[i, i]] += C64::new(sign, 0.0);
            }
            if open && j + 1 == l {
                continue;
            }
            let j1 = (j + 1) % l;
            if (s >> j & 1) == (s >> j1 & 1) {
                continue;
            }
            let pre_ok = if open && j + 2 >= l {
                true
            } else {
                s >> ((j + 2) % l) & 1 == 0
            };
            if !pre_ok {
                continue;
            }
            let t = s ^ (1 << j) ^ (1 << j1);
            let post_ok = if open && j == 0 {
                true
            } else {
                t >> ((j + l - 1) % l) & 1 == 0
            };
            if !post_ok {
                continue;
            }
            let k = basis.index_of(t).expect("projected hop stays admissible");
            m[[k, i]] += C64::new(1.0, 0.0);
        }
    }
    m
}

/// Two-level reduced Hamiltonian of the L=3 periodic chain in its
/// zero-momentum sector: sqrt(3)*a*w * tau^x + (2I + tau^z) * (b*lambda + dl),
/// with basis index 0 the symmetric one-up state and index 1 the vacuum.
pub fn build_hr(a: i8, b: i8, w: f64, lambda: f64, delta_lambda: f64) -> Array2<C64> {
    let off = 3f64.sqrt() * f64::from(a) * w;
    let field = f64::from(b) * lambda + delta_lambda;
    let mut m = Array2::zeros((2, 2));
    m[[0, 0]] = C64::new(3.0 * field, 0.0);
    m[[1, 1]] = C64::new(field, 0.0);
    m[[0, 1]] = C64::new(off, 0.0);
    m[[1, 0]] = C64::new(off, 0.0);
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::enumerate_basis;
    use ndarray::array;
    use BoundaryCondition::{Open, Periodic};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn pxp_l3_periodic_connects_vacuum_to_single_flips() {
        let basis = enumerate_basis(3, Periodic).unwrap();
        let m = build_pxp_term(&basis);
        let expected = array![
            [c(0.), c(1.), c(1.), c(1.)],
            [c(1.), c(0.), c(0.), c(0.)],
            [c(1.), c(0.), c(0.), c(0.)],
            [c(1.), c(0.), c(0.), c(0.)],
        ];
        assert_eq!(m, expected);
    }

    #[test]
    fn pxp_l2_open() {
        let basis = enumerate_basis(2, Open).unwrap();
        let m = build_pxp_term(&basis);
        let expected = array![
            [c(0.), c(1.), c(1.)],
            [c(1.), c(0.), c(0.)],
            [c(1.), c(0.), c(0.)],
        ];
        assert_eq!(m, expected);
    }

    #[test]
    fn pxp_projected_on_symmetric_state_gives_sqrt3() {
        let basis = enumerate_basis(3, Periodic).unwrap();
        let m = build_pxp_term(&basis);
        // <sym|M|vac> with |sym> = (|001>+|010>+|100>)/sqrt(3), |vac> index 0
        let amp: C64 = (1..4).map(|k| m[[k, 0]]).sum::<C64>() / 3f64.sqrt();
        assert!((amp.re - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn pxp_closes_on_basis_in_unconstrained_embedding() {
        // Apply the literal projected flip to every admissible mask inside the
        // full 2^L space and check no weight leaves the admissible set, and
        // that the projected matrix equals the constrained construction.
        for (l, bc) in [(6, Periodic), (7, Open), (10, Periodic)] {
            let basis = enumerate_basis(l, bc).unwrap();
            let m = build_pxp_term(&basis);
            for (i, &s) in basis.states().iter().enumerate() {
                let mut image = std::collections::HashMap::new();
                for j in 0..l {
                    let nb_down = match bc {
                        Periodic => {
                            s >> ((j + 1) % l) & 1 == 0 && s >> ((j + l - 1) % l) & 1 == 0
                        }
                        Open => {
                            (j + 1 >= l || s >> (j + 1) & 1 == 0)
                                && (j == 0 || s >> (j - 1) & 1 == 0)
                        }
                    };
                    if nb_down {
                        *image.entry(s ^ (1 << j)).or_insert(0.0) += 1.0;
                    }
                }
                for (&mask, &weight) in &image {
                    let k = basis
                        .index_of(mask)
                        .unwrap_or_else(|| panic!("weight escaped the blockade at L={l}"));
                    assert_eq!(m[[k, i]], c(weight));
                }
                let col_sum: f64 = (0..basis.dim()).map(|k| m[[k, i]].norm()).sum();
                assert_eq!(col_sum as usize, image.len());
            }
        }
    }

    #[test]
    fn sz_total_diagonal_entries() {
        let basis = enumerate_basis(3, Periodic).unwrap();
        let m = build_sz_total(&basis);
        for (i, expect) in [-3.0, -1.0, -1.0, -1.0].into_iter().enumerate() {
            assert_eq!(m[[i, i]], c(expect));
        }
        assert_eq!(m.sum(), c(-6.0));
    }

    #[test]
    fn hamiltonian_pure_field() {
        let basis = enumerate_basis(3, Periodic).unwrap();
        let p = PulseParams::new(1, 1, 0.0, 1.0, 0.0, 0.0).unwrap();
        let h = build_hamiltonian(&basis, &p);
        let expected = Array2::from_diag(&array![c(3.), c(1.), c(1.), c(1.)]);
        assert_eq!(h, expected);
    }

    #[test]
    fn hamiltonian_field_dominated_structure() {
        let basis = enumerate_basis(3, Periodic).unwrap();
        let p = PulseParams::new(1, 1, 1.0, 10.0, 0.0, 0.0).unwrap();
        let h = build_hamiltonian(&basis, &p);
        let pxp = build_pxp_term(&basis);
        for i in 0..4 {
            for j in 0..4 {
                if i == j {
                    let expect = 10.0 * if i == 0 { 3.0 } else { 1.0 };
                    assert_eq!(h[[i, i]], c(expect));
                } else {
                    assert_eq!(h[[i, j]], pxp[[i, j]]);
                }
            }
        }
    }

    #[test]
    fn hamiltonian_antisymmetry_under_sign_flip() {
        let basis = enumerate_basis(8, Periodic).unwrap();
        for (a, b) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
            let p = PulseParams::new(a, b, 0.7, 3.1, 0.0, 0.0).unwrap();
            let q = PulseParams::new(-a, -b, 0.7, 3.1, 0.0, 0.0).unwrap();
            let sum = build_hamiltonian(&basis, &p) + build_hamiltonian(&basis, &q);
            assert!(sum.iter().all(|x| x.norm() == 0.0));
        }
    }

    #[test]
    fn pulse_sign_validation() {
        assert!(PulseParams::new(0, 1, 1.0, 1.0, 0.0, 0.0).is_err());
        assert!(PulseParams::new(1, 2, 1.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn c_operator_vacuum_diagonal() {
        let basis = enumerate_basis(3, Periodic).unwrap();
        let m = build_c_operator(&basis);
        assert_eq!(m[[0, 0]], c(-3.0));
    }

    /// Independent oracle: the operator equals the commutator of the raising
    /// and lowering halves of the projected flip term.
    #[test]
    fn c_operator_matches_commutator_oracle() {
        for (l, bc) in [(2, Periodic), (3, Periodic), (4, Open), (8, Periodic), (12, Periodic), (9, Open)]
        {
            let basis = enumerate_basis(l, bc).unwrap();
            let d = basis.dim();
            // raising half: moves a mask with site j down (neighbors down) to
            // the mask with site j up
            let mut sp = Array2::<C64>::zeros((d, d));
            for (i, &s) in basis.states().iter().enumerate() {
                for j in 0..l {
                    if s >> j & 1 == 0 && basis.all_down(s, basis.neighbors(j)) {
                        let k = basis.index_of(s | 1 << j).unwrap();
                        sp[[k, i]] = c(1.0);
                    }
                }
            }
            let sm = sp.t().mapv(|x| x.conj());
            let comm = sp.dot(&sm) - sm.dot(&sp);
            let built = build_c_operator(&basis);
            let dev = (&comm - &built).iter().map(|x| x.norm()).fold(0.0, f64::max);
            assert!(dev < 1e-12, "L={l} {bc:?}: max deviation {dev:.3e}");
            assert!(hermiticity_error(&built) < 1e-12);
        }
    }

    #[test]
    fn hr_literal_assembly() {
        let h = build_hr(1, 1, 1.0, 1.0, 0.0);
        let s3 = 3f64.sqrt();
        assert_eq!(h, array![[c(3.0), c(s3)], [c(s3), c(1.0)]]);

        // flipping a only flips the off-diagonal sign
        let h2 = build_hr(-1, 1, 1.0, 1.0, 0.0);
        assert_eq!(h2[[0, 1]], c(-s3));
        assert_eq!(h2[[0, 0]], h[[0, 0]]);

        // b=-1 with small detuning
        let h3 = build_hr(1, -1, 1.0, 1.0, 0.1);
        assert!((h3[[0, 0]].re - 3.0 * (-0.9)).abs() < 1e-15);
        assert!((h3[[1, 1]].re - (-0.9)).abs() < 1e-15);
        assert_eq!(h3[[1, 0]], c(s3));
    }

    #[test]
    fn hermiticity_across_parameters() {
        for (l, bc) in [(5, Periodic), (6, Open)] {
            let basis = enumerate_basis(l, bc).unwrap();
            for (a, b) in [(1, 1), (-1, 1), (1, -1), (-1, -1)] {
                let p = PulseParams::new(a, b, 0.33, 2.5, 0.07, -0.02).unwrap();
                assert!(hermiticity_error(&build_hamiltonian(&basis, &p)) < 1e-12);
            }
            assert!(hermiticity_error(&build_pxp_term(&basis)) < 1e-12);
            assert!(hermiticity_error(&build_sz_total(&basis)) < 1e-12);
            assert!(hermiticity_error(&build_c_operator(&basis)) < 1e-12);
        }
    }
}
