//! Deterministic synthetic pools for fixtures and load tests.
//!
//! Each topic draws words from a shared vocabulary plus a small topical
//! vocabulary; informative passages use more topical words. About one
//! passage in three carries an anchor span of one to three words.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnchorSpan, Passage, Pool, Topic};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub topics: usize,
    pub passages: usize,
    pub vocab: usize,
    pub words_per_passage: (usize, usize),
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            topics: 6,
            passages: 120,
            vocab: 400,
            words_per_passage: (4, 30),
            seed: 0,
        }
    }
}

const TOPICAL_WORDS: usize = 25;
const GRADES: [f64; 4] = [0.0, 0.5, 1.0, 2.0];

fn word(i: usize) -> String {
    // Letters only, so the tokenizer keeps it whole and the stemmer rarely changes it.
    let mut n = i;
    let mut s = String::from("w");
    loop {
        s.push((b'a' + (n % 26) as u8) as char);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    s
}

/// Builds a pool of `spec.passages` passages spread evenly over `spec.topics`.
pub fn generate(spec: &SynthSpec) -> Result<Pool> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let vocab = spec.vocab.max(1);
    let zipf = WeightedIndex::new((1..=vocab).map(|r| 1.0 / r as f64)).expect("positive weights");
    let grade_weights = WeightedIndex::new([5.0, 2.0, 2.0, 1.0]).expect("positive weights");

    let topics: Vec<Topic> = (0..spec.topics)
        .map(|t| Topic {
            topic_id: format!("T{t:03}"),
            text: format!("synthetic topic {t}"),
        })
        .collect();

    let (lo, hi) = spec.words_per_passage;
    let passages = (0..spec.passages)
        .map(|i| {
            let t = i % spec.topics.max(1);
            let grade = GRADES[grade_weights.sample(&mut rng)];
            let topical_rate = if grade > 0.0 { 0.4 } else { 0.1 };
            let len = rng.gen_range(lo..=hi.max(lo));
            let words: Vec<String> = (0..len)
                .map(|_| {
                    if rng.gen_bool(topical_rate) {
                        word(vocab + t * TOPICAL_WORDS + rng.gen_range(0..TOPICAL_WORDS))
                    } else {
                        word(zipf.sample(&mut rng))
                    }
                })
                .collect();
            let text = words.join(" ");
            let mut anchors = Vec::new();
            if !words.is_empty() && rng.gen_ratio(1, 3) {
                let w = rng.gen_range(0..words.len());
                let span = rng.gen_range(1..=3).min(words.len() - w);
                let start: usize = words[..w].iter().map(|x| x.len() + 1).sum();
                let label = words[w..w + span].join(" ");
                anchors.push(AnchorSpan {
                    start,
                    end: start + label.len(),
                    entity_label: label,
                });
            }
            Passage {
                passage_id: format!("P{i:07}"),
                topic_id: topics.get(t).map_or_else(String::new, |x| x.topic_id.clone()),
                text,
                ref_score: grade,
                anchors,
            }
        })
        .collect();
    Pool::new(topics, passages, format!("synthetic seed={}", spec.seed))
}
