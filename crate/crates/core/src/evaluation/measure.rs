use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::discrete::Direction;
use crate::textproc::{Granularity, UnitKind};
use crate::{Error, Result};

/// The evaluated measures. Declaration order fixes output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measure {
    F1Uni,
    F1Bi,
    F1Skip,
    KlUni,
    KlBi,
    KlSkip,
    LogSimUni,
    LogSimBi,
    LogSimSkip,
    W2vGoogle,
    W2vClef,
    W2vClefBi,
    W2vWikiBi,
    LenInv,
    Rouge1,
    Rouge2,
}

/// Shape of a measure's computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    F1,
    Kl,
    LogSim,
    Rouge,
    Embedding,
    LenInv,
}

impl Measure {
    pub const ALL: [Measure; 16] = [
        Measure::F1Uni,
        Measure::F1Bi,
        Measure::F1Skip,
        Measure::KlUni,
        Measure::KlBi,
        Measure::KlSkip,
        Measure::LogSimUni,
        Measure::LogSimBi,
        Measure::LogSimSkip,
        Measure::W2vGoogle,
        Measure::W2vClef,
        Measure::W2vClefBi,
        Measure::W2vWikiBi,
        Measure::LenInv,
        Measure::Rouge1,
        Measure::Rouge2,
    ];

    /// The nine F1/KL/LogSim measures.
    pub const DISCRETE: [Measure; 9] = [
        Measure::F1Uni,
        Measure::F1Bi,
        Measure::F1Skip,
        Measure::KlUni,
        Measure::KlBi,
        Measure::KlSkip,
        Measure::LogSimUni,
        Measure::LogSimBi,
        Measure::LogSimSkip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::F1Uni => "F1_1",
            Measure::F1Bi => "F1_2",
            Measure::F1Skip => "F1_sk",
            Measure::KlUni => "KL_1",
            Measure::KlBi => "KL_2",
            Measure::KlSkip => "KL_sk",
            Measure::LogSimUni => "LS_1",
            Measure::LogSimBi => "LS_2",
            Measure::LogSimSkip => "LS_sk",
            Measure::W2vGoogle => "W2V_g",
            Measure::W2vClef => "W2V_c",
            Measure::W2vClefBi => "W2V_c_bi",
            Measure::W2vWikiBi => "W2V_wp_bi",
            Measure::LenInv => "LEN_INV",
            Measure::Rouge1 => "ROUGE_1",
            Measure::Rouge2 => "ROUGE_2",
        }
    }

    pub fn family(self) -> Family {
        use Measure::*;
        match self {
            F1Uni | F1Bi | F1Skip => Family::F1,
            KlUni | KlBi | KlSkip => Family::Kl,
            LogSimUni | LogSimBi | LogSimSkip => Family::LogSim,
            Rouge1 | Rouge2 => Family::Rouge,
            W2vGoogle | W2vClef | W2vClefBi | W2vWikiBi => Family::Embedding,
            LenInv => Family::LenInv,
        }
    }

    /// Unit granularity the measure works on; `None` for the length baseline.
    pub fn granularity(self) -> Option<Granularity> {
        use Measure::*;
        match self {
            F1Uni | KlUni | LogSimUni | Rouge1 | W2vGoogle | W2vClef => Some(Granularity::Unigram),
            F1Bi | KlBi | LogSimBi | Rouge2 | W2vClefBi | W2vWikiBi => Some(Granularity::Bigram),
            F1Skip | KlSkip | LogSimSkip => Some(Granularity::SkipGap1),
            LenInv => None,
        }
    }

    pub fn direction(self) -> Direction {
        match self.family() {
            Family::Kl => Direction::LowerIsBetter,
            _ => Direction::HigherIsBetter,
        }
    }

    /// Bag-based measures can be restricted to anchor text.
    pub fn supports_entity_restriction(self) -> bool {
        matches!(self.family(), Family::F1 | Family::Kl | Family::LogSim | Family::Rouge)
    }

    /// The measure of `family` over `granularity`, when one exists.
    pub fn of(family: Family, granularity: Granularity) -> Option<Measure> {
        use Granularity::*;
        Some(match (family, granularity) {
            (Family::F1, Unigram) => Measure::F1Uni,
            (Family::F1, Bigram) => Measure::F1Bi,
            (Family::F1, SkipGap1) => Measure::F1Skip,
            (Family::Kl, Unigram) => Measure::KlUni,
            (Family::Kl, Bigram) => Measure::KlBi,
            (Family::Kl, SkipGap1) => Measure::KlSkip,
            (Family::LogSim, Unigram) => Measure::LogSimUni,
            (Family::LogSim, Bigram) => Measure::LogSimBi,
            (Family::LogSim, SkipGap1) => Measure::LogSimSkip,
            (Family::Rouge, Unigram) => Measure::Rouge1,
            (Family::Rouge, Bigram) => Measure::Rouge2,
            _ => return None,
        })
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Comma-separated list of every accepted measure name.
pub fn valid_measure_names() -> String {
    Measure::ALL.iter().map(|m| m.name()).collect::<Vec<_>>().join(", ")
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown measure `{s}`; valid measures: {}",
                    valid_measure_names()
                ))
            })
    }
}

/// A measure, optionally restricted to anchor text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MeasureId {
    pub measure: Measure,
    pub entity_restricted: bool,
}

impl MeasureId {
    pub const fn full(measure: Measure) -> Self {
        MeasureId {
            measure,
            entity_restricted: false,
        }
    }

    pub fn restricted(measure: Measure) -> Result<Self> {
        if !measure.supports_entity_restriction() {
            return Err(Error::InvalidConfig(format!(
                "{measure} cannot be restricted to entities"
            )));
        }
        Ok(MeasureId {
            measure,
            entity_restricted: true,
        })
    }

    pub fn unit_kind(self) -> Option<UnitKind> {
        self.measure
            .granularity()
            .map(|g| UnitKind::new(g, self.entity_restricted))
    }

    pub fn direction(self) -> Direction {
        self.measure.direction()
    }
}

impl fmt::Display for MeasureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entity_restricted {
            write!(f, "{}:ent", self.measure)
        } else {
            write!(f, "{}", self.measure)
        }
    }
}

/// Parses `F1_1` or `F1_1:ent`, case-insensitively.
impl FromStr for MeasureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.rsplit_once(':') {
            Some((name, suffix)) if suffix.eq_ignore_ascii_case("ent") => MeasureId::restricted(name.parse()?),
            _ => Ok(MeasureId::full(s.parse()?)),
        }
    }
}
