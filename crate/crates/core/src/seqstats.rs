//! Pair-elimination statistics for dipole symbol streams: the greedy
//! first-two reduction, exact averages over all binary streams, and the
//! reduced lengths of the structured protocol sequences.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::protocols::{sequence_symbols, SequenceKind};

/// Largest stream accepted by the exact enumeration (2^20 sequences).
pub const BRUTEFORCE_N_MAX: usize = 20;
/// Largest stream the protocol reducer will materialize.
pub const STREAM_LEN_MAX: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionReport {
    pub input_len: usize,
    /// Symbols kept by the reduction, in application order.
    pub reduced: Vec<u8>,
}

impl ReductionReport {
    pub fn reduced_len(&self) -> usize {
        self.reduced.len()
    }
}

/// Left-to-right reduction: equal leading pair keeps its first symbol and
/// moves on by one, an opposite pair annihilates and moves on by two, a
/// trailing singleton is kept. This is the greedy first-two rule, not free
/// cancellation: [2,1,1,2] loses all four symbols even though nothing is
/// adjacent-inverse in the stack sense.
pub fn reduce_sequence(seq: &[u8]) -> ReductionReport {
    assert!(seq.iter().all(|&s| s == 1 || s == 2), "symbols must be 1 or 2");
    let mut reduced = Vec::new();
    let mut i = 0;
    while i < seq.len() {
        if i + 1 == seq.len() || seq[i] == seq[i + 1] {
            reduced.push(seq[i]);
            i += 1;
        } else {
            i += 2;
        }
    }
    ReductionReport { input_len: seq.len(), reduced }
}

/// Exact mean reduced length over all 2^N binary streams of length N.
pub fn avg_reduced_length_bruteforce(n: usize) -> Result<BigRational> {
    if n > BRUTEFORCE_N_MAX {
        return Err(Error::EnumerationTooLarge { limit: BRUTEFORCE_N_MAX, got: n });
    }
    let total: u64 = (0u64..1u64 << n)
        .into_par_iter()
        .map(|idx| {
            let seq: Vec<u8> = (0..n).map(|i| 1 + ((idx >> i) & 1) as u8).collect();
            reduce_sequence(&seq).reduced_len() as u64
        })
        .sum();
    Ok(BigRational::new(total.into(), BigInt::one() << n))
}

/// Closed form N/3 + (4/9)(1 - (-1/2)^N) for the same mean.
pub fn avg_reduced_length_closed(n: usize) -> BigRational {
    let first = BigRational::new(BigInt::from(n), 3.into());
    let sign = if n % 2 == 0 { BigInt::one() } else { -BigInt::one() };
    let alternating = BigRational::new(sign, BigInt::one() << n); // (-1/2)^N
    let correction = BigRational::new(4.into(), 9.into()) * (BigRational::one() - alternating);
    first + correction
}

/// How a protocol stream is sized: structured sequences by construction
/// level, arbitrary ones by plain length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamSize {
    Level(u32),
    Length(usize),
}

/// Fibonacci numbers in the convention F_1 = 1, F_2 = 2.
pub fn fibonacci_number(k: u32) -> Result<usize> {
    if k == 0 || k > 60 {
        return Err(Error::precondition(format!("Fibonacci index {k} out of range 1..=60")));
    }
    let (mut a, mut b) = (1usize, 2usize);
    for _ in 1..k {
        (a, b) = (b, a + b);
    }
    Ok(a)
}

/// Stream length at a construction level: the doubling word has 2^(K-1)
/// symbols, the concatenation word F_K.
pub fn level_length(kind: SequenceKind, level: u32) -> Result<usize> {
    match kind {
        SequenceKind::ThueMorse => {
            if level == 0 || level > 24 {
                return Err(Error::precondition(format!("level {level} out of range 1..=24")));
            }
            Ok(1 << (level - 1))
        }
        SequenceKind::Fibonacci => fibonacci_number(level),
        other => Err(Error::precondition(format!("{other:?} has no construction levels"))),
    }
}

/// Reduces a protocol's symbol stream. The seed only matters for the random
/// kind.
pub fn protocol_reduced_lengths(
    kind: SequenceKind,
    size: StreamSize,
    seed: u64,
) -> Result<ReductionReport> {
    let n = match size {
        StreamSize::Level(level) => level_length(kind, level)?,
        StreamSize::Length(n) => n,
    };
    if n > STREAM_LEN_MAX {
        return Err(Error::EnumerationTooLarge { limit: STREAM_LEN_MAX, got: n });
    }
    Ok(reduce_sequence(&sequence_symbols(kind, n, seed)))
}
