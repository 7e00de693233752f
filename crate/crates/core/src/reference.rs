//! Textual references built from assessed passages.
//!
//! An informativeness reference for topic `τ` pools every passage of `τ`
//! with a positive grade. An interestingness reference for `τ` pools every
//! informative passage of the *other* topics whose fold differs from the
//! fold of `τ`. Each passage is graded for exactly one topic, so the
//! interestingness reference depends only on the fold of `τ`.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Pool;
use crate::discrete::ProbDist;
use crate::textproc::{AnalyzedPool, UnitBag, UnitKind};
use crate::{Error, Result};

pub const DEFAULT_FOLDS: usize = 12;

/// Topic-level split of a pool into folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_count: usize,
    pub topic_to_fold: BTreeMap<String, usize>,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn fold_of(&self, topic_id: &str) -> Option<usize> {
        self.topic_to_fold.get(topic_id).copied()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.fold_count];
        for &f in self.topic_to_fold.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffles topic ids with a seeded ChaCha8 generator and deals them round-robin.
pub fn assign_folds(pool: &Pool, fold_count: usize, seed: u64) -> Result<FoldAssignment> {
    let topics = pool.topics().len();
    if fold_count < 2 || fold_count > topics {
        return Err(Error::FoldCount {
            requested: fold_count,
            topics,
        });
    }
    let mut ids: Vec<&str> = pool.topics().iter().map(|t| t.topic_id.as_str()).collect();
    ids.sort_unstable();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let topic_to_fold = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id.to_string(), i % fold_count))
        .collect();
    Ok(FoldAssignment {
        fold_count,
        topic_to_fold,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReferenceKind {
    Informativeness { topic_id: String },
    Interestingness { topic_id: String, excluded_fold: usize },
}

#[derive(Debug, Clone)]
pub struct Reference {
    pub kind: ReferenceKind,
    pub bag: UnitBag,
    pub dist: ProbDist,
    pub total_len: u64,
    /// Passage ids in ascending order.
    pub source_passage_ids: Vec<String>,
    /// Pool indices of the source passages, in the same order.
    pub source_indices: Vec<usize>,
}

fn sorted_by_id(pool: &Pool, mut indices: Vec<usize>) -> Vec<usize> {
    indices.sort_by(|&a, &b| pool.passages()[a].passage_id.cmp(&pool.passages()[b].passage_id));
    indices
}

/// Indices of the informative passages of `topic_id`, ordered by passage id.
pub fn topic_reference_sources(pool: &Pool, topic_id: &str) -> Result<Vec<usize>> {
    if pool.topic(topic_id).is_none() {
        return Err(Error::NoSuchTopic(topic_id.to_string()));
    }
    let indices = pool
        .passages()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.topic_id == topic_id && p.is_informative())
        .map(|(i, _)| i)
        .collect();
    Ok(sorted_by_id(pool, indices))
}

/// Indices of the informative passages of topics outside the fold of `topic_id`.
pub fn interestingness_sources(pool: &Pool, topic_id: &str, folds: &FoldAssignment) -> Result<Vec<usize>> {
    let own = folds
        .fold_of(topic_id)
        .ok_or_else(|| Error::NoSuchTopic(topic_id.to_string()))?;
    fold_complement_sources(pool, own, folds)
}

/// Informative passages whose topic is not in `fold`.
pub fn fold_complement_sources(pool: &Pool, fold: usize, folds: &FoldAssignment) -> Result<Vec<usize>> {
    let mut indices = Vec::new();
    for (i, p) in pool.passages().iter().enumerate() {
        if !p.is_informative() {
            continue;
        }
        let f = folds
            .fold_of(&p.topic_id)
            .ok_or_else(|| Error::NoSuchTopic(p.topic_id.clone()))?;
        if f != fold {
            indices.push(i);
        }
    }
    Ok(sorted_by_id(pool, indices))
}

fn assemble(analyzed: &AnalyzedPool<'_>, kind: ReferenceKind, unit_kind: UnitKind, sources: Vec<usize>) -> Result<Reference> {
    let mut bag = UnitBag::new(unit_kind);
    for &i in &sources {
        bag.merge(analyzed.bag(i, unit_kind));
    }
    if bag.is_empty() {
        let topic = match &kind {
            ReferenceKind::Informativeness { topic_id } | ReferenceKind::Interestingness { topic_id, .. } => {
                topic_id.clone()
            }
        };
        return Err(Error::EmptyReference(topic));
    }
    let passages = analyzed.pool().passages();
    Ok(Reference {
        kind,
        dist: ProbDist::from_bag(&bag),
        total_len: bag.total(),
        bag,
        source_passage_ids: sources.iter().map(|&i| passages[i].passage_id.clone()).collect(),
        source_indices: sources,
    })
}

/// Pools the informative passages of one topic.
pub fn build_topic_reference(analyzed: &AnalyzedPool<'_>, topic_id: &str, kind: UnitKind) -> Result<Reference> {
    let sources = topic_reference_sources(analyzed.pool(), topic_id)?;
    assemble(
        analyzed,
        ReferenceKind::Informativeness {
            topic_id: topic_id.to_string(),
        },
        kind,
        sources,
    )
}

/// Pools the informative passages of every topic in another fold.
pub fn build_interestingness_reference(
    analyzed: &AnalyzedPool<'_>,
    topic_id: &str,
    folds: &FoldAssignment,
    kind: UnitKind,
) -> Result<Reference> {
    let sources = interestingness_sources(analyzed.pool(), topic_id, folds)?;
    let excluded_fold = folds.fold_of(topic_id).expect("checked by interestingness_sources");
    assemble(
        analyzed,
        ReferenceKind::Interestingness {
            topic_id: topic_id.to_string(),
            excluded_fold,
        },
        kind,
        sources,
    )
}
