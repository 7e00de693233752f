//! Discrete overlap measures between a passage bag `S` and a reference bag `R`.
//!
//! - KL divergence with Dirichlet smoothing at `μ = 1`:
//!   `Σ_{ω∈R} P(ω|R) · ln( P(ω|R)(|S|+1) / (P(ω|S)|S| + P(ω|Ω)) )`
//! - LogSim: `Σ_{ω∈S∩R} exp(-|ln(L(ω,S)/L(ω,R))|) · P(ω|R)` with
//!   `L(ω,X) = ln(1 + P(ω|X)|R|)`
//! - F1 over unit supports: `2|S∩R| / (|S|+|R|)`
//! - ROUGE-N recall with clipped counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::textproc::UnitBag;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub direction: Direction,
}

impl Score {
    pub fn higher(value: f64) -> Self {
        Score {
            value,
            direction: Direction::HigherIsBetter,
        }
    }

    pub fn lower(value: f64) -> Self {
        Score {
            value,
            direction: Direction::LowerIsBetter,
        }
    }
}

/// Maximum-likelihood unit distribution of a bag. Empty for an empty bag.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProbDist {
    probs: BTreeMap<String, f64>,
}

impl ProbDist {
    pub fn from_bag(bag: &UnitBag) -> Self {
        let total = bag.total() as f64;
        ProbDist {
            probs: bag.iter().map(|(u, c)| (u.to_string(), c as f64 / total)).collect(),
        }
    }

    pub fn prob(&self, unit: &str) -> f64 {
        self.probs.get(unit).copied().unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.probs.iter().map(|(u, &p)| (u.as_str(), p))
    }
}

/// Unit distribution over a whole pool, `P(ω|Ω)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BackgroundModel {
    dist: ProbDist,
}

impl BackgroundModel {
    pub fn from_bag(union: &UnitBag) -> Self {
        BackgroundModel {
            dist: ProbDist::from_bag(union),
        }
    }

    pub fn from_bags<'b>(bags: impl IntoIterator<Item = &'b UnitBag>) -> Self {
        let mut iter = bags.into_iter().peekable();
        let Some(first) = iter.peek() else {
            return Self::default();
        };
        let mut union = UnitBag::new(first.kind());
        for bag in iter {
            union.merge(bag);
        }
        Self::from_bag(&union)
    }

    pub fn prob(&self, unit: &str) -> f64 {
        self.dist.prob(unit)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.dist.iter()
    }
}

fn require_reference(reference: &UnitBag) -> Result<()> {
    if reference.is_empty() {
        Err(Error::EmptyReference("<bag>".into()))
    } else {
        Ok(())
    }
}

fn background_prob(background: &BackgroundModel, unit: &str) -> Result<f64> {
    let p = background.prob(unit);
    if p > 0.0 {
        Ok(p)
    } else {
        Err(Error::BackgroundMissingUnit(unit.to_string()))
    }
}

/// KL divergence of the passage from the reference. Lower is better.
///
/// An empty passage scores `Σ P(ω|R) ln(P(ω|R)/P(ω|Ω))`, which is zero
/// when the background equals the reference distribution.
pub fn kl_divergence(reference: &UnitBag, passage: &UnitBag, background: &BackgroundModel) -> Result<Score> {
    require_reference(reference)?;
    reference.ensure_same_kind(passage)?;
    let r_total = reference.total() as f64;
    let ln_s1 = ((passage.total() + 1) as f64).ln();
    let mut sum = 0.0;
    for (unit, count) in reference.iter() {
        let p_r = count as f64 / r_total;
        let p_bg = background_prob(background, unit)?;
        // P(ω|S)·|S| is the raw passage count.
        let smoothed = passage.count(unit) as f64 + p_bg;
        sum += p_r * (p_r.ln() + ln_s1 - smoothed.ln());
    }
    Ok(Score::lower(sum))
}

/// KL divergence against one fixed reference, scoring a passage in
/// `O(|S| log |R|)` instead of `O(|R|)`.
///
/// Splits the sum into a reference-only constant plus corrections for the
/// units the passage shares with the reference.
#[derive(Debug, Clone)]
pub struct KlScorer {
    base: f64,
}

impl KlScorer {
    pub fn new(reference: &UnitBag, background: &BackgroundModel) -> Result<Self> {
        require_reference(reference)?;
        let r_total = reference.total() as f64;
        let mut base = 0.0;
        for (unit, count) in reference.iter() {
            let p_r = count as f64 / r_total;
            base += p_r * (p_r.ln() - background_prob(background, unit)?.ln());
        }
        Ok(KlScorer { base })
    }

    pub fn score(&self, reference: &UnitBag, passage: &UnitBag, background: &BackgroundModel) -> Result<Score> {
        reference.ensure_same_kind(passage)?;
        let r_total = reference.total() as f64;
        let mut terms = Vec::new();
        for (unit, count) in passage.iter() {
            let r_count = reference.count(unit);
            if r_count == 0 {
                continue;
            }
            let p_r = r_count as f64 / r_total;
            let p_bg = background_prob(background, unit)?;
            terms.push(p_r * (p_bg.ln() - (count as f64 + p_bg).ln()));
        }
        Ok(Score::lower(self.base + ((passage.total() + 1) as f64).ln() + order_free_sum(terms)))
    }
}

// Equal multisets of terms give bit-identical sums, so tied scores stay tied.
fn order_free_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}

/// LogSim similarity in `[0, 1]`.
pub fn logsim(passage: &UnitBag, reference: &UnitBag) -> Result<Score> {
    require_reference(reference)?;
    reference.ensure_same_kind(passage)?;
    if passage.is_empty() {
        return Ok(Score::higher(0.0));
    }
    let r_total = reference.total() as f64;
    let s_total = passage.total() as f64;
    let mut terms = Vec::new();
    for (unit, s_count) in passage.iter() {
        let r_count = reference.count(unit);
        if r_count == 0 {
            continue;
        }
        let p_r = r_count as f64 / r_total;
        let p_s = s_count as f64 / s_total;
        let l_s = (p_s * r_total).ln_1p();
        let l_r = (p_r * r_total).ln_1p();
        terms.push((-(l_s.ln() - l_r.ln()).abs()).exp() * p_r);
    }
    Ok(Score::higher(order_free_sum(terms)))
}

/// F1 over the sets of distinct units. Two empty bags score 0.
pub fn f1(passage: &UnitBag, reference: &UnitBag) -> Result<Score> {
    reference.ensure_same_kind(passage)?;
    let denom = passage.support_size() + reference.support_size();
    if denom == 0 {
        return Ok(Score::higher(0.0));
    }
    let (small, large) = if passage.support_size() <= reference.support_size() {
        (passage, reference)
    } else {
        (reference, passage)
    };
    let shared = small.iter().filter(|(u, _)| large.contains(u)).count();
    Ok(Score::higher(2.0 * shared as f64 / denom as f64))
}

/// ROUGE-N recall: clipped matches over reference unit occurrences.
pub fn rouge_n(candidate: &UnitBag, reference: &UnitBag) -> Result<Score> {
    require_reference(reference)?;
    reference.ensure_same_kind(candidate)?;
    let matched: u64 = candidate
        .iter()
        .map(|(u, c)| c.min(reference.count(u)))
        .sum();
    Ok(Score::higher(matched as f64 / reference.total() as f64))
}
