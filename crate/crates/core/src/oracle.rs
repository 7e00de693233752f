//! Deliberately naive reference implementations.
//!
//! Each function restates its definition directly over `HashMap` counts,
//! sharing no code with the optimised scorers. Tests and `selftest` compare
//! the two.

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Pool;
use crate::discrete::{kl_divergence, rouge_n, BackgroundModel};
use crate::embeddings::DocVector;
use crate::evaluation::{ncg_curve, rank, Cutoff, Measure, MeasureId, Mode, ScoredPassage, TieBreak};
use crate::reference::{assign_folds, interestingness_sources, topic_reference_sources};
use crate::textproc::{Granularity, UnitBag, UnitKind};

pub type Counts = HashMap<String, u64>;

fn total(c: &Counts) -> f64 {
    c.values().sum::<u64>() as f64
}

fn get(c: &Counts, w: &str) -> f64 {
    c.get(w).copied().unwrap_or(0) as f64
}

/// `Σ_{ω∈R} P(ω|R) ln( P(ω|R)(|S|+1) / (P(ω|S)|S| + P(ω|Ω)) )`.
pub fn kl(reference: &Counts, passage: &Counts, background: &HashMap<String, f64>) -> f64 {
    let r = total(reference);
    let s = total(passage);
    reference
        .iter()
        .filter(|(_, &c)| c > 0)
        .map(|(w, &c)| {
            let p_r = c as f64 / r;
            let p_s = if s > 0.0 { get(passage, w) / s } else { 0.0 };
            p_r * (p_r * (s + 1.0) / (p_s * s + background[w])).ln()
        })
        .sum()
}

/// `Σ_{ω∈S∩R} exp(-|ln(L_S/L_R)|) P(ω|R)`, `L_X = ln(1 + P(ω|X)|R|)`.
pub fn logsim(passage: &Counts, reference: &Counts) -> f64 {
    let r = total(reference);
    let s = total(passage);
    let mut sum = 0.0;
    for (w, &sc) in passage {
        let rc = get(reference, w);
        if sc == 0 || rc == 0.0 {
            continue;
        }
        let l_s = (1.0 + sc as f64 / s * r).ln();
        let l_r = (1.0 + rc / r * r).ln();
        sum += (-(l_s / l_r).ln().abs()).exp() * (rc / r);
    }
    sum
}

/// `2|S∩R| / (|S|+|R|)` over distinct units.
pub fn f1(passage: &Counts, reference: &Counts) -> f64 {
    let s: HashSet<&String> = passage.iter().filter(|(_, &c)| c > 0).map(|(w, _)| w).collect();
    let r: HashSet<&String> = reference.iter().filter(|(_, &c)| c > 0).map(|(w, _)| w).collect();
    if s.is_empty() && r.is_empty() {
        return 0.0;
    }
    2.0 * s.intersection(&r).count() as f64 / (s.len() + r.len()) as f64
}

/// `Σ min(c_S, c_R) / Σ c_R`.
pub fn rouge(candidate: &Counts, reference: &Counts) -> f64 {
    let matched: u64 = reference
        .iter()
        .map(|(w, &c)| c.min(candidate.get(w).copied().unwrap_or(0)))
        .sum();
    matched as f64 / total(reference)
}

pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        0.0
    } else {
        dot / (nu * nv)
    }
}

/// nCG@k of `grades` taken in ranked order; the ideal is found by
/// enumerating every `k`-subset, so keep inputs small.
pub fn ncg_at(grades: &[f64], k: usize) -> f64 {
    let n = grades.len();
    let k = k.min(n);
    let gain: f64 = grades[..k].iter().sum();
    let mut best = 0.0f64;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == k {
            let s: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| grades[i]).sum();
            best = best.max(s);
        }
    }
    if best == 0.0 {
        0.0
    } else {
        gain / best
    }
}

/// `{ p : topic(p) = τ ∧ grade(p) > 0 }`.
pub fn topic_sources(pool: &Pool, topic_id: &str) -> BTreeSet<String> {
    pool.passages()
        .iter()
        .filter(|p| p.topic_id == topic_id && p.ref_score > 0.0)
        .map(|p| p.passage_id.clone())
        .collect()
}

/// `{ p : fold(topic(p)) ≠ fold(τ) ∧ grade(p) > 0 }`.
pub fn fold_sources(pool: &Pool, topic_id: &str, fold_of: &HashMap<String, usize>) -> BTreeSet<String> {
    pool.passages()
        .iter()
        .filter(|p| fold_of[&p.topic_id] != fold_of[topic_id] && p.ref_score > 0.0)
        .map(|p| p.passage_id.clone())
        .collect()
}

pub fn counts_of(bag: &UnitBag) -> Counts {
    bag.iter().map(|(w, c)| (w.to_string(), c)).collect()
}

/// Random counts over a vocabulary of at most `vocab` letters.
pub fn random_counts<R: Rng>(rng: &mut R, vocab: usize, max_count: u64, min_support: usize) -> Counts {
    loop {
        let c: Counts = (0..vocab)
            .filter_map(|i| {
                let n = rng.gen_range(0..=max_count);
                (n > 0).then(|| (((b'a' + i as u8) as char).to_string(), n))
            })
            .collect();
        if c.len() >= min_support {
            return c;
        }
    }
}

pub fn bag_of(counts: &Counts) -> UnitBag {
    let mut bag = UnitBag::new(UnitKind::full(Granularity::Unigram));
    for (w, &c) in counts {
        bag.insert(w.clone(), c);
    }
    bag
}

/// Outcome of one oracle comparison.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

/// Compares every discrete metric, cosine and nCG against the naive forms
/// on `cases` random small inputs.
pub fn run_suite(seed: u64, cases: usize) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errs = [0.0f64; 6];
    for _ in 0..cases {
        let r = random_counts(&mut rng, 8, 5, 1);
        let s = random_counts(&mut rng, 8, 5, 0);
        let (rb, sb) = (bag_of(&r), bag_of(&s));

        let mut union = rb.clone();
        union.merge(&sb);
        let bg = BackgroundModel::from_bag(&union);
        let bg_map: HashMap<String, f64> = bg.iter().map(|(w, p)| (w.to_string(), p)).collect();

        let diff = |a: f64, b: f64| (a - b).abs();
        errs[0] = errs[0].max(diff(kl_divergence(&rb, &sb, &bg).unwrap().value, kl(&r, &s, &bg_map)));
        errs[1] = errs[1].max(diff(crate::discrete::logsim(&sb, &rb).unwrap().value, logsim(&s, &r)));
        errs[2] = errs[2].max(diff(crate::discrete::f1(&sb, &rb).unwrap().value, f1(&s, &r)));
        errs[3] = errs[3].max(diff(rouge_n(&sb, &rb).unwrap().value, rouge(&s, &r)));

        let dim = rng.gen_range(1..=6);
        let u: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c = cosine_of(&u, &v);
        errs[4] = errs[4].max(diff(c, cosine(&u, &v)));

        let n = rng.gen_range(1..=8);
        let scored: Vec<ScoredPassage> = (0..n)
            .map(|i| ScoredPassage {
                passage_id: format!("p{i}"),
                topic_id: "t".into(),
                measure: MeasureId::full(Measure::F1Uni),
                value: rng.gen_range(0.0..1.0),
                ref_score: [0.0, 0.5, 1.0, 2.0][rng.gen_range(0..4)],
            })
            .collect();
        let ranked = rank(scored, TieBreak::PassageId).unwrap();
        let grades: Vec<f64> = ranked.iter().map(|s| s.ref_score).collect();
        let grid: Vec<Cutoff> = (1..=n).map(Cutoff::At).collect();
        let curve = ncg_curve(&ranked, &grid, MeasureId::full(Measure::F1Uni), Mode::Informativeness);
        for &(k, v) in &curve.points {
            errs[5] = errs[5].max(diff(v, ncg_at(&grades, k)));
        }
    }
    let names = ["KL", "LogSim", "F1", "ROUGE-N", "cosine", "nCG"];
    let tolerances = [1e-12, 1e-12, 1e-12, 1e-12, 1e-12, 1e-12];
    names
        .into_iter()
        .zip(errs)
        .zip(tolerances)
        .map(|((name, max_error), tolerance)| Check {
            name,
            cases,
            max_error,
            tolerance,
        })
        .collect()
}

fn cosine_of(u: &[f64], v: &[f64]) -> f64 {
    let to_doc = |x: &[f64]| DocVector {
        components: x.to_vec(),
        oov_count: 0,
    };
    crate::embeddings::cosine(&to_doc(u), &to_doc(v)).unwrap().value
}

/// Checks reference source sets against [`topic_sources`] and
/// [`fold_sources`] for every topic of `pool` under `seeds` fold seeds.
pub fn reference_sources_match(pool: &Pool, fold_count: usize, seeds: impl IntoIterator<Item = u64>) -> bool {
    let ids = |idx: Vec<usize>| -> BTreeSet<String> {
        idx.into_iter().map(|i| pool.passages()[i].passage_id.clone()).collect()
    };
    for t in pool.topics() {
        if ids(topic_reference_sources(pool, &t.topic_id).unwrap()) != topic_sources(pool, &t.topic_id) {
            return false;
        }
    }
    for seed in seeds {
        let folds = assign_folds(pool, fold_count, seed).unwrap();
        let fold_of: HashMap<String, usize> = folds.topic_to_fold.clone().into_iter().collect();
        for t in pool.topics() {
            let got = ids(interestingness_sources(pool, &t.topic_id, &folds).unwrap());
            if got != fold_sources(pool, &t.topic_id, &fold_of) {
                return false;
            }
            let own_fold = fold_of[&t.topic_id];
            let leaked = pool
                .passages()
                .iter()
                .any(|p| got.contains(&p.passage_id) && fold_of[&p.topic_id] == own_fold);
            if leaked {
                return false;
            }
        }
    }
    true
}

/// Random permutation of `0..n`.
pub fn permutation<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}
