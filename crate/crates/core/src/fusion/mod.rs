//! Decision-level fusion of single-code verdicts by weighted majority, and
//! the random code sequences used during evaluation.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::REST_GESTURE;
use crate::error::{Error, Result};
use crate::matcher::MatchScore;
use crate::seed;

/// Longest code sequence used in evaluation.
pub const MAX_CODELENGTH: usize = 6;

/// Ordered, repetition-free list of gesture codes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u16>", into = "Vec<u16>")]
pub struct CodeSequence(Vec<u16>);

impl CodeSequence {
    pub fn new(codes: Vec<u16>) -> Result<Self> {
        Self::with_limit(codes, MAX_CODELENGTH)
    }

    fn with_limit(codes: Vec<u16>, max_len: usize) -> Result<Self> {
        if codes.is_empty() || codes.len() > max_len {
            return Err(Error::Config(format!(
                "code sequence length {} outside 1..={max_len}",
                codes.len()
            )));
        }
        for (i, &c) in codes.iter().enumerate() {
            if c == 0 || c == REST_GESTURE {
                return Err(Error::Config(format!("gesture {c} cannot be used as a code")));
            }
            if codes[..i].contains(&c) {
                return Err(Error::Config(format!("gesture {c} repeated in sequence")));
            }
        }
        Ok(Self(codes))
    }

    pub fn codes(&self) -> &[u16] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The first `m` codes.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.len() {
            return Err(Error::Config(format!(
                "prefix length {m} outside 1..={}",
                self.len()
            )));
        }
        Ok(Self(self.0[..m].to_vec()))
    }
}

impl TryFrom<Vec<u16>> for CodeSequence {
    type Error = Error;

    fn try_from(v: Vec<u16>) -> Result<Self> {
        Self::with_limit(v, usize::MAX)
    }
}

impl From<CodeSequence> for Vec<u16> {
    fn from(s: CodeSequence) -> Self {
        s.0
    }
}

/// Per-code weights for one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeWeights {
    /// Single-code accuracy of each code, in sequence order.
    pub raw_accuracy: Vec<f64>,
    /// Normalized to sum to one.
    pub normalized: Vec<f64>,
}

impl CodeWeights {
    pub fn uniform(m: usize) -> Self {
        Self {
            raw_accuracy: vec![1.0; m],
            normalized: vec![1.0 / m as f64; m],
        }
    }

    pub fn len(&self) -> usize {
        self.normalized.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normalized.is_empty()
    }
}

/// `w_m = a_m / sum_k a_k` over the codes of `sequence`.
pub fn normalize_weights(
    accuracies: &BTreeMap<u16, f64>,
    sequence: &CodeSequence,
) -> Result<CodeWeights> {
    let raw: Vec<f64> = sequence
        .codes()
        .iter()
        .map(|g| {
            accuracies
                .get(g)
                .copied()
                .ok_or_else(|| Error::Missing(format!("no accuracy for gesture {g}")))
        })
        .collect::<Result<_>>()?;
    if let Some(a) = raw.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(Error::Config(format!("accuracy {a} must be finite and non-negative")));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::Config(
            "all code accuracies are zero; weights are undefined".into(),
        ));
    }
    Ok(CodeWeights {
        normalized: raw.iter().map(|a| a / total).collect(),
        raw_accuracy: raw,
    })
}

/// Outcome of weighted-majority voting over the codes of one attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionDecision {
    pub per_code_certainty: Vec<u8>,
    pub discriminant: f64,
    pub accepted: bool,
}

/// `g = sum_m w_m d_m`; accept on a strict majority `g > 0.5`.
pub fn fuse(certainties: &[u8], weights: &CodeWeights) -> Result<FusionDecision> {
    if certainties.len() != weights.len() {
        return Err(Error::Dimension {
            expected: weights.len(),
            actual: certainties.len(),
        });
    }
    let discriminant = weighted_vote(certainties.iter().map(|&d| d != 0), &weights.normalized);
    Ok(FusionDecision {
        per_code_certainty: certainties.iter().map(|&d| u8::from(d != 0)).collect(),
        discriminant,
        accepted: discriminant > 0.5,
    })
}

/// Weighted vote summed in code order; shared by [`fuse`] and the
/// evaluation sweep so both produce bit-identical discriminants.
pub(crate) fn weighted_vote(votes: impl Iterator<Item = bool>, weights: &[f64]) -> f64 {
    votes
        .zip(weights)
        .fold(0.0, |g, (d, &w)| if d { g + w } else { g })
}

/// `1` when the attempt score is within the threshold (inclusive).
pub fn certainty_from_score(score: &MatchScore, threshold: f64) -> u8 {
    certainty_from_value(score.value, threshold)
}

pub fn certainty_from_value(score: f64, threshold: f64) -> u8 {
    u8::from(score <= threshold)
}

/// `count` sequences of `m` distinct gestures drawn uniformly without
/// replacement from `gesture_pool`, reproducible from `rng_seed`.
pub fn sample_sequences(
    rng_seed: u64,
    count: usize,
    m: usize,
    gesture_pool: &[u16],
) -> Result<Vec<CodeSequence>> {
    check_pool(gesture_pool, m)?;
    let mut rng = seed::stream(rng_seed, "code-sequences", &[m as u64]);
    (0..count)
        .map(|_| draw_sequence(&mut rng, gesture_pool, m))
        .collect()
}

fn check_pool(pool: &[u16], m: usize) -> Result<()> {
    if m > pool.len() {
        return Err(Error::Config(format!(
            "cannot draw {m} distinct gestures from a pool of {}",
            pool.len()
        )));
    }
    for (i, g) in pool.iter().enumerate() {
        if pool[..i].contains(g) {
            return Err(Error::Config(format!("gesture {g} repeated in pool")));
        }
    }
    Ok(())
}

pub(crate) fn draw_sequence(rng: &mut impl Rng, pool: &[u16], m: usize) -> Result<CodeSequence> {
    let mut codes = pool.to_vec();
    let (chosen, _) = codes.partial_shuffle(rng, m);
    CodeSequence::with_limit(chosen.to_vec(), usize::MAX)
}

/// A random sequence whose first `m` codes differ, as a whole, from the
/// first `m` codes of `genuine`.
pub(crate) fn draw_different_prefix(
    rng: &mut impl Rng,
    pool: &[u16],
    genuine: &CodeSequence,
    m: usize,
) -> Result<CodeSequence> {
    check_pool(pool, genuine.len())?;
    if pool.len() == m && m == 1 {
        return Err(Error::Config("a one-gesture pool admits no different sequence".into()));
    }
    loop {
        let s = draw_sequence(rng, pool, genuine.len())?;
        if s.codes()[..m] != genuine.codes()[..m] {
            return Ok(s);
        }
    }
}
