//! Passage pools: topics, assessed passages, anchors and deduplication.
//!
//! Pools are read from two files. Topics are TSV (`topic_id<TAB>text`), one
//! per line. Passages are JSON Lines:
//!
//! ```text
//! {"passage_id":"p1","topic_id":"t1","text":"...","ref_score":0.5,"anchors":[{"start":0,"end":5,"entity":"Paris"}]}
//! ```
//!
//! Anchor offsets count Unicode scalar values, not bytes.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of leading and trailing characters compared by [`dedup`].
pub const DEDUP_KEY_CHARS: usize = 25;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub topic_id: String,
    pub text: String,
}

/// Character span of a hyperlink anchor inside a passage, end exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorSpan {
    pub start: usize,
    pub end: usize,
    #[serde(rename = "entity")]
    pub entity_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub passage_id: String,
    pub topic_id: String,
    pub text: String,
    pub ref_score: f64,
    #[serde(default)]
    pub anchors: Vec<AnchorSpan>,
}

impl Passage {
    /// A passage is informative when at least part of it was marked by an assessor.
    pub fn is_informative(&self) -> bool {
        self.ref_score > 0.0
    }
}

/// True for grades in `[0,1] ∪ {2}`.
pub fn valid_ref_score(value: f64) -> bool {
    (0.0..=1.0).contains(&value) || value == 2.0
}

/// A validated, immutable passage pool.
#[derive(Debug, Clone)]
pub struct Pool {
    topics: Vec<Topic>,
    passages: Vec<Passage>,
    provenance: String,
    topic_index: HashMap<String, usize>,
}

impl PartialEq for Pool {
    fn eq(&self, other: &Self) -> bool {
        self.topics == other.topics
            && self.passages == other.passages
            && self.provenance == other.provenance
    }
}

impl Pool {
    /// Builds a pool from in-memory records, applying the same checks as [`load_pool`].
    pub fn new(topics: Vec<Topic>, passages: Vec<Passage>, provenance: impl Into<String>) -> Result<Self> {
        let mut topic_index = HashMap::with_capacity(topics.len());
        for (i, topic) in topics.iter().enumerate() {
            validate_topic(topic, "<memory>", i + 1)?;
            if topic_index.insert(topic.topic_id.clone(), i).is_some() {
                return Err(Error::Duplicate {
                    path: "<memory>".into(),
                    line: i + 1,
                    what: "topic_id",
                    id: topic.topic_id.clone(),
                });
            }
        }
        let mut seen = HashSet::with_capacity(passages.len());
        for (i, passage) in passages.iter().enumerate() {
            validate_passage(passage, &topic_index, "<memory>", i + 1)?;
            if !seen.insert(passage.passage_id.as_str()) {
                return Err(Error::Duplicate {
                    path: "<memory>".into(),
                    line: i + 1,
                    what: "passage_id",
                    id: passage.passage_id.clone(),
                });
            }
        }
        Ok(Pool {
            topics,
            passages,
            provenance: provenance.into(),
            topic_index,
        })
    }

    pub fn topics(&self) -> &[Topic] {
        &self.topics
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn topic(&self, topic_id: &str) -> Option<&Topic> {
        self.topic_index.get(topic_id).map(|&i| &self.topics[i])
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    /// Same topics, a filtered passage list. Skips validation since the
    /// passages are already known to be valid.
    fn with_passages(&self, passages: Vec<Passage>, provenance: String) -> Pool {
        Pool {
            topics: self.topics.clone(),
            passages,
            provenance,
            topic_index: self.topic_index.clone(),
        }
    }
}

fn validate_topic(topic: &Topic, path: &str, line: usize) -> Result<()> {
    let malformed = |field: &str, message: &str| Error::Malformed {
        path: path.to_string(),
        line,
        field: field.to_string(),
        message: message.to_string(),
    };
    if topic.topic_id.is_empty() {
        return Err(malformed("topic_id", "empty topic id"));
    }
    if topic.text.trim().is_empty() {
        return Err(malformed("text", "empty topic text"));
    }
    if topic.topic_id.contains(['\t', '\n', '\r']) || topic.text.contains(['\n', '\r']) {
        return Err(malformed("text", "line breaks or tab in topic id are not representable"));
    }
    Ok(())
}

fn validate_passage(
    passage: &Passage,
    topics: &HashMap<String, usize>,
    path: &str,
    line: usize,
) -> Result<()> {
    let malformed = |field: &str, message: String| Error::Malformed {
        path: path.to_string(),
        line,
        field: field.to_string(),
        message,
    };
    if passage.passage_id.is_empty() {
        return Err(malformed("passage_id", "empty passage id".into()));
    }
    if passage.text.is_empty() {
        return Err(malformed("text", "empty passage text".into()));
    }
    if !topics.contains_key(&passage.topic_id) {
        return Err(Error::UnknownTopic {
            path: path.to_string(),
            line,
            passage_id: passage.passage_id.clone(),
            topic_id: passage.topic_id.clone(),
        });
    }
    if !valid_ref_score(passage.ref_score) {
        return Err(Error::ScoreOutOfDomain {
            path: path.to_string(),
            line,
            value: passage.ref_score,
        });
    }
    let len = passage.text.chars().count();
    for anchor in &passage.anchors {
        if anchor.start >= anchor.end || anchor.end > len {
            return Err(malformed(
                "anchors",
                format!(
                    "span [{}, {}) invalid for text of {} characters",
                    anchor.start, anchor.end, len
                ),
            ));
        }
    }
    let mut spans: Vec<(usize, usize)> = passage.anchors.iter().map(|a| (a.start, a.end)).collect();
    spans.sort_unstable();
    if spans.windows(2).any(|w| w[1].0 < w[0].1) {
        return Err(Error::OverlappingAnchors {
            path: path.to_string(),
            line,
            passage_id: passage.passage_id.clone(),
        });
    }
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Reads a topics TSV file. Blank lines are skipped.
pub fn load_topics(path: &Path) -> Result<Vec<Topic>> {
    let display = path.display().to_string();
    let mut topics = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let (id, text) = line.split_once('\t').ok_or_else(|| Error::Malformed {
            path: display.clone(),
            line: i + 1,
            field: "text".into(),
            message: "expected `topic_id<TAB>text`".into(),
        })?;
        let topic = Topic {
            topic_id: id.to_string(),
            text: text.to_string(),
        };
        validate_topic(&topic, &display, i + 1)?;
        topics.push(topic);
    }
    Ok(topics)
}

/// Loads and validates a passage pool.
pub fn load_pool(passages_path: &Path, topics_path: &Path) -> Result<Pool> {
    let topics = load_topics(topics_path)?;
    let topics_display = topics_path.display().to_string();
    let mut topic_index = HashMap::with_capacity(topics.len());
    for (i, topic) in topics.iter().enumerate() {
        if topic_index.insert(topic.topic_id.clone(), i).is_some() {
            return Err(Error::Duplicate {
                path: topics_display,
                line: i + 1,
                what: "topic_id",
                id: topic.topic_id.clone(),
            });
        }
    }

    let display = passages_path.display().to_string();
    let mut passages = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in open(passages_path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(passages_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let passage: Passage = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: display.clone(),
            line: i + 1,
            field: json_field_hint(&e),
            message: e.to_string(),
        })?;
        validate_passage(&passage, &topic_index, &display, i + 1)?;
        if !seen.insert(passage.passage_id.clone()) {
            return Err(Error::Duplicate {
                path: display,
                line: i + 1,
                what: "passage_id",
                id: passage.passage_id,
            });
        }
        passages.push(passage);
    }

    Ok(Pool {
        topics,
        passages,
        provenance: format!("passages={display}; topics={topics_display}"),
        topic_index,
    })
}

fn json_field_hint(err: &serde_json::Error) -> String {
    let msg = err.to_string();
    // serde names the offending field in backticks, e.g. "missing field `text`".
    msg.split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "record".to_string())
}

/// Writes the pool back out in the formats read by [`load_pool`].
pub fn save_pool(pool: &Pool, passages_path: &Path, topics_path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(topics_path).map_err(|e| Error::io(topics_path, e))?);
    for topic in &pool.topics {
        writeln!(out, "{}\t{}", topic.topic_id, topic.text).map_err(|e| Error::io(topics_path, e))?;
    }
    out.flush().map_err(|e| Error::io(topics_path, e))?;

    let mut out =
        BufWriter::new(File::create(passages_path).map_err(|e| Error::io(passages_path, e))?);
    for passage in &pool.passages {
        serde_json::to_writer(&mut out, passage)?;
        out.write_all(b"\n").map_err(|e| Error::io(passages_path, e))?;
    }
    out.flush().map_err(|e| Error::io(passages_path, e))
}

/// Grouping used when looking for duplicate passages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DedupScope {
    #[default]
    PerTopic,
    Global,
}

/// `(first 25 chars, last 25 chars)` of the trimmed text, or the whole
/// trimmed text twice when it is shorter than that.
pub fn dedup_key(text: &str) -> (String, String) {
    let trimmed = text.trim();
    let chars: Vec<char> = trimmed.chars().collect();
    if chars.len() < DEDUP_KEY_CHARS {
        return (trimmed.to_string(), trimmed.to_string());
    }
    let head = chars[..DEDUP_KEY_CHARS].iter().collect();
    let tail = chars[chars.len() - DEDUP_KEY_CHARS..].iter().collect();
    (head, tail)
}

/// Drops every passage whose leading and trailing 25 characters both match an
/// earlier passage's. The first passage of each class survives.
pub fn dedup(pool: &Pool, scope: DedupScope) -> Pool {
    let mut seen: HashSet<(Option<&str>, String, String)> = HashSet::new();
    let mut kept = Vec::with_capacity(pool.passages.len());
    for passage in &pool.passages {
        let (head, tail) = dedup_key(&passage.text);
        let group = match scope {
            DedupScope::PerTopic => Some(passage.topic_id.as_str()),
            DedupScope::Global => None,
        };
        if seen.insert((group, head, tail)) {
            kept.push(passage.clone());
        }
    }
    pool.with_passages(kept, pool.provenance.clone())
}

/// Histogram buckets of reference grades.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreHistogram {
    pub zero: usize,
    pub partial: usize,
    pub one: usize,
    pub two: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolStats {
    pub passages: usize,
    pub topics: usize,
    pub informative: usize,
    pub histogram: ScoreHistogram,
}

pub fn pool_stats(pool: &Pool) -> PoolStats {
    let mut stats = PoolStats {
        passages: pool.passages.len(),
        topics: pool.topics.len(),
        ..Default::default()
    };
    for p in &pool.passages {
        let s = p.ref_score;
        if s > 0.0 {
            stats.informative += 1;
        }
        match s {
            s if s == 0.0 => stats.histogram.zero += 1,
            s if s < 1.0 => stats.histogram.partial += 1,
            s if s == 1.0 => stats.histogram.one += 1,
            _ => stats.histogram.two += 1,
        }
    }
    stats
}
