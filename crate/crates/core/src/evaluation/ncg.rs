use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MeasureId, Mode};
use crate::discrete::Direction;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPassage {
    pub passage_id: String,
    pub topic_id: String,
    pub measure: MeasureId,
    pub value: f64,
    pub ref_score: f64,
}

/// How equal measure values are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TieBreak {
    /// Ascending passage id.
    #[default]
    PassageId,
    /// Seeded shuffle before a stable sort.
    Random { seed: u64 },
}

fn by_goodness(direction: Direction) -> impl Fn(&ScoredPassage, &ScoredPassage) -> Ordering {
    move |a, b| {
        let ord = a.value.partial_cmp(&b.value).unwrap_or_else(|| a.value.total_cmp(&b.value));
        match direction {
            Direction::HigherIsBetter => ord.reverse(),
            Direction::LowerIsBetter => ord,
        }
    }
}

/// Best passages first according to the measure's direction.
pub fn rank(mut scored: Vec<ScoredPassage>, tie_break: TieBreak) -> Result<Vec<ScoredPassage>> {
    let Some(first) = scored.first() else {
        return Ok(scored);
    };
    let measure = first.measure;
    if let Some(other) = scored.iter().find(|s| s.measure != measure) {
        return Err(Error::MixedMeasures(measure.to_string(), other.measure.to_string()));
    }
    let goodness = by_goodness(measure.direction());
    match tie_break {
        TieBreak::PassageId => {
            scored.sort_by(|a, b| goodness(a, b).then_with(|| a.passage_id.cmp(&b.passage_id)));
        }
        TieBreak::Random { seed } => {
            scored.sort_by(|a, b| a.passage_id.cmp(&b.passage_id));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            scored.shuffle(&mut rng);
            scored.sort_by(goodness);
        }
    }
    Ok(scored)
}

/// One entry of a cut-off grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cutoff {
    At(usize),
    /// The size of the ranked list.
    All,
}

impl Cutoff {
    pub fn default_grid() -> Vec<Cutoff> {
        [10, 25, 50, 100, 250, 500, 1000, 2500, 5000, 10000, 20000]
            .into_iter()
            .map(Cutoff::At)
            .chain([Cutoff::All])
            .collect()
    }

    /// Positive, strictly increasing, `all` only in last position.
    pub fn validate_grid(grid: &[Cutoff]) -> Result<()> {
        if grid.is_empty() {
            return Err(Error::InvalidConfig("cut-off grid is empty".into()));
        }
        let mut last = 0;
        for (i, c) in grid.iter().enumerate() {
            match *c {
                Cutoff::At(0) => return Err(Error::InvalidConfig("cut-offs must be positive".into())),
                Cutoff::At(k) if k <= last => {
                    return Err(Error::InvalidConfig("cut-offs must be strictly increasing".into()))
                }
                Cutoff::At(k) => last = k,
                Cutoff::All if i + 1 != grid.len() => {
                    return Err(Error::InvalidConfig("`all` must be the last cut-off".into()))
                }
                Cutoff::All => {}
            }
        }
        Ok(())
    }

    /// Cut-offs for a list of `n` passages: clipped to `n`, deduplicated, sorted.
    pub fn resolve(grid: &[Cutoff], n: usize) -> Vec<usize> {
        let mut ks: Vec<usize> = grid
            .iter()
            .map(|c| match *c {
                Cutoff::At(k) => k.min(n),
                Cutoff::All => n,
            })
            .filter(|&k| k > 0)
            .collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }

    pub fn parse_grid(s: &str) -> Result<Vec<Cutoff>> {
        s.split(',').map(|p| p.trim().parse()).collect()
    }
}

impl FromStr for Cutoff {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(Cutoff::All);
        }
        s.parse()
            .map(Cutoff::At)
            .map_err(|_| Error::InvalidConfig(format!("bad cut-off `{s}`; expected a positive integer or `all`")))
    }
}

impl fmt::Display for Cutoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cutoff::At(k) => write!(f, "{k}"),
            Cutoff::All => f.write_str("all"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NcgCurve {
    pub measure: MeasureId,
    pub mode: Mode,
    /// `(k, nCG@k)` with strictly increasing `k`.
    pub points: Vec<(usize, f64)>,
}

/// Normalized cumulative gain of a ranking at each cut-off.
///
/// The gain at `k` is the grade sum of the first `k` ranked passages, divided
/// by the grade sum of the `k` best-graded passages of the same list. A zero
/// ideal gain yields 0.
pub fn ncg_curve(ranked: &[ScoredPassage], cutoffs: &[Cutoff], measure: MeasureId, mode: Mode) -> NcgCurve {
    let n = ranked.len();
    let prefix = |grades: &[f64]| {
        let mut acc = 0.0;
        let mut sums = Vec::with_capacity(grades.len() + 1);
        sums.push(0.0);
        for g in grades {
            acc += g;
            sums.push(acc);
        }
        sums
    };
    let actual: Vec<f64> = ranked.iter().map(|s| s.ref_score).collect();
    let mut ideal = actual.clone();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let (gain, best) = (prefix(&actual), prefix(&ideal));
    let points = Cutoff::resolve(cutoffs, n)
        .into_iter()
        .map(|k| {
            let ncg = if best[k] > 0.0 { (gain[k] / best[k]).min(1.0) } else { 0.0 };
            (k, ncg)
        })
        .collect();
    NcgCurve { measure, mode, points }
}
