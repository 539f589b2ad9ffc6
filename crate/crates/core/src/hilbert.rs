//! Blockade-constrained Fock space of the PXP chain.
//!
//! Basis states are L-bit masks (bit j = spin up at site j) with no two
//! adjacent up spins; adjacency wraps around the chain iff the boundary
//! condition is periodic. The dimension follows the Fibonacci recurrence for
//! open chains and the Lucas numbers for periodic ones, both ~ const * phi^L.

use std::collections::HashMap;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

pub const L_MIN: usize = 2;
pub const L_MAX: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum BoundaryCondition {
    #[default]
    #[serde(rename = "pbc")]
    Periodic,
    #[serde(rename = "obc")]
    Open,
}

/// Dense basis of the constrained chain: admissible bitmasks in ascending
/// order plus the inverse index map.
#[derive(Debug, Clone)]
pub struct FockBasis {
    l: usize,
    bc: BoundaryCondition,
    states: Vec<u32>,
    index_of: HashMap<u32, usize>,
}

/// True iff `mask` has no two adjacent set bits on a length-`l` chain.
pub fn admissible(mask: u32, l: usize, bc: BoundaryCondition) -> bool {
    if mask & (mask >> 1) != 0 {
        return false;
    }
    match bc {
        BoundaryCondition::Periodic => {
            // wraparound pair: site l-1 and site 0
            l < 2 || (mask >> (l - 1)) & mask & 1 == 0
        }
        BoundaryCondition::Open => true,
    }
}

pub fn enumerate_basis(l: usize, bc: BoundaryCondition) -> Result<FockBasis> {
    if !(L_MIN..=L_MAX).contains(&l) {
        return Err(Error::LengthOutOfRange(l));
    }
    let states: Vec<u32> = (0..1u32 << l).filter(|&m| admissible(m, l, bc)).collect();
    let index_of = states.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    Ok(FockBasis { l, bc, states, index_of })
}

impl FockBasis {
    pub fn l(&self) -> usize {
        self.l
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[u32] {
        &self.states
    }

    pub fn state(&self, index: usize) -> u32 {
        self.states[index]
    }

    pub fn index_of(&self, mask: u32) -> Option<usize> {
        self.index_of.get(&mask).copied()
    }

    /// Neighbor sites of `site`; the missing neighbor of an open edge site is
    /// treated as permanently down and therefore not listed.
    pub fn neighbors(&self, site: usize) -> impl Iterator<Item = usize> + '_ {
        let l = self.l;
        let wrap = self.bc == BoundaryCondition::Periodic;
        [site.checked_sub(1).or(wrap.then_some(l - 1)), {
            if site + 1 < l {
                Some(site + 1)
            } else {
                wrap.then_some(0)
            }
        }]
        .into_iter()
        .flatten()
    }

    /// True iff every site in `sites` is down in `mask`. Out-of-range sites
    /// must not be passed; use `neighbors` to resolve boundary sites.
    pub fn all_down(&self, mask: u32, sites: impl IntoIterator<Item = usize>) -> bool {
        sites.into_iter().all(|s| mask & (1 << s) == 0)
    }
}

pub type StateVector = Array1<C64>;

/// Unit vector on the all-down configuration (bitmask 0, which sorts first).
pub fn all_down_state(basis: &FockBasis) -> StateVector {
    let mut v = Array1::zeros(basis.dim());
    v[0] = C64::new(1.0, 0.0);
    debug_assert_eq!(basis.state(0), 0);
    v
}

pub fn norm_sq(state: &StateVector) -> f64 {
    state.iter().map(|a| a.norm_sqr()).sum()
}
