//! From raw text to unit bags.
//!
//! The pipeline is `tokenize -> remove_stopwords -> stem -> extract_units`.
//! Pair units (bi-grams and skip-grams) are serialized as `a␟b` using
//! [`PAIR_SEPARATOR`].

mod porter;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Passage, Pool};
use crate::{Error, Result};

pub use porter::stem;

/// U+241F SYMBOL FOR UNIT SEPARATOR, joins the two halves of a pair unit.
pub const PAIR_SEPARATOR: char = '\u{241F}';

const SMART_STOPLIST: &str = include_str!("../../data/smart_stoplist.txt");

/// Lowercases and splits on every maximal run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stoplist(HashSet<String>);

impl Stoplist {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The SMART stoplist.
    pub fn smart() -> Self {
        Self::parse(SMART_STOPLIST)
    }

    /// One token per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        Stoplist(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty())
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        std::fs::read_to_string(path)
            .map(|s| Self::parse(&s))
            .map_err(|e| Error::io(path, e))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Stoplist {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Stoplist(iter.into_iter().map(Into::into).collect())
    }
}

pub fn remove_stopwords(tokens: Vec<String>, stoplist: &Stoplist) -> Vec<String> {
    tokens.into_iter().filter(|t| !stoplist.contains(t)).collect()
}

/// Token stream of the anchor texts of a passage, in document order.
///
/// Each span is tokenized separately, so adjacent anchors never fuse into a
/// single token. Entity labels are not used.
pub fn restrict_to_anchors(passage: &Passage) -> Vec<String> {
    let mut spans: Vec<_> = passage.anchors.iter().map(|a| (a.start, a.end)).collect();
    spans.sort_unstable();
    let chars: Vec<char> = passage.text.chars().collect();
    spans
        .into_iter()
        .flat_map(|(start, end)| {
            let surface: String = chars[start..end.min(chars.len())].iter().collect();
            tokenize(&surface)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub enum Granularity {
    #[default]
    Unigram,
    Bigram,
    SkipGap1,
}

impl Granularity {
    pub const ALL: [Granularity; 3] = [Granularity::Unigram, Granularity::Bigram, Granularity::SkipGap1];

    pub fn name(self) -> &'static str {
        match self {
            Granularity::Unigram => "unigram",
            Granularity::Bigram => "bigram",
            Granularity::SkipGap1 => "skipgram",
        }
    }

    /// Accepts `1`, `2`, `sk` and the long names.
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1" | "uni" | "unigram" => Some(Granularity::Unigram),
            "2" | "bi" | "bigram" => Some(Granularity::Bigram),
            "sk" | "skip" | "skipgram" | "skipgap1" => Some(Granularity::SkipGap1),
            _ => None,
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Whether gap-1 skip-grams also count adjacent pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SkipMode {
    /// Pairs at distance 1 or 2.
    #[default]
    Inclusive,
    /// Pairs at distance exactly 2.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnitKind {
    pub granularity: Granularity,
    pub entity_restricted: bool,
}

impl UnitKind {
    pub const fn new(granularity: Granularity, entity_restricted: bool) -> Self {
        UnitKind {
            granularity,
            entity_restricted,
        }
    }

    pub const fn full(granularity: Granularity) -> Self {
        Self::new(granularity, false)
    }

    fn slot(self) -> usize {
        self.granularity as usize * 2 + self.entity_restricted as usize
    }
}

impl fmt::Display for UnitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entity_restricted {
            write!(f, "{}+entities", self.granularity)
        } else {
            write!(f, "{}", self.granularity)
        }
    }
}

pub fn join_pair(a: &str, b: &str) -> String {
    let mut s = String::with_capacity(a.len() + b.len() + PAIR_SEPARATOR.len_utf8());
    s.push_str(a);
    s.push(PAIR_SEPARATOR);
    s.push_str(b);
    s
}

/// Ordered unit sequence for a preprocessed token list.
pub fn unit_sequence<S: AsRef<str>>(tokens: &[S], granularity: Granularity, skip: SkipMode) -> Vec<String> {
    let n = tokens.len();
    let t = |i: usize| tokens[i].as_ref();
    match granularity {
        Granularity::Unigram => tokens.iter().map(|s| s.as_ref().to_string()).collect(),
        Granularity::Bigram => (1..n).map(|i| join_pair(t(i - 1), t(i))).collect(),
        Granularity::SkipGap1 => {
            let mut out = Vec::with_capacity(2 * n);
            for i in 0..n {
                if skip == SkipMode::Inclusive && i + 1 < n {
                    out.push(join_pair(t(i), t(i + 1)));
                }
                if i + 2 < n {
                    out.push(join_pair(t(i), t(i + 2)));
                }
            }
            out
        }
    }
}

/// Multiset of text units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitBag {
    units: BTreeMap<String, u64>,
    total: u64,
    kind: UnitKind,
}

impl UnitBag {
    pub fn new(kind: UnitKind) -> Self {
        UnitBag {
            units: BTreeMap::new(),
            total: 0,
            kind,
        }
    }

    pub fn from_units<I, S>(kind: UnitKind, units: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut bag = Self::new(kind);
        for u in units {
            bag.insert(u, 1);
        }
        bag
    }

    /// Zero counts are ignored.
    pub fn insert(&mut self, unit: impl Into<String>, count: u64) {
        if count == 0 {
            return;
        }
        *self.units.entry(unit.into()).or_insert(0) += count;
        self.total += count;
    }

    pub fn merge(&mut self, other: &UnitBag) {
        for (u, &c) in &other.units {
            match self.units.get_mut(u) {
                Some(existing) => *existing += c,
                None => {
                    self.units.insert(u.clone(), c);
                }
            }
        }
        self.total += other.total;
    }

    pub fn count(&self, unit: &str) -> u64 {
        self.units.get(unit).copied().unwrap_or(0)
    }

    pub fn contains(&self, unit: &str) -> bool {
        self.units.contains_key(unit)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct units.
    pub fn support_size(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn kind(&self) -> UnitKind {
        self.kind
    }

    /// Units in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> + '_ {
        self.units.iter().map(|(u, &c)| (u.as_str(), c))
    }

    pub(crate) fn ensure_same_kind(&self, other: &UnitBag) -> Result<()> {
        if self.kind == other.kind {
            Ok(())
        } else {
            Err(Error::KindMismatch {
                expected: self.kind.to_string(),
                found: other.kind.to_string(),
            })
        }
    }
}

pub fn extract_units<S: AsRef<str>>(tokens: &[S], kind: UnitKind) -> UnitBag {
    extract_units_with(tokens, kind, SkipMode::Inclusive)
}

pub fn extract_units_with<S: AsRef<str>>(tokens: &[S], kind: UnitKind, skip: SkipMode) -> UnitBag {
    UnitBag::from_units(kind, unit_sequence(tokens, kind.granularity, skip))
}

/// Tokenizer, stoplist and stemmer settings applied uniformly to passages and references.
#[derive(Debug, Clone)]
pub struct Analyzer {
    pub stoplist: Stoplist,
    pub skip_mode: SkipMode,
}

impl Default for Analyzer {
    fn default() -> Self {
        Analyzer {
            stoplist: Stoplist::smart(),
            skip_mode: SkipMode::Inclusive,
        }
    }
}

impl Analyzer {
    pub fn new(stoplist: Stoplist, skip_mode: SkipMode) -> Self {
        Analyzer { stoplist, skip_mode }
    }

    /// Tokens after stopword removal, not stemmed.
    pub fn surface_terms(&self, text: &str) -> Vec<String> {
        remove_stopwords(tokenize(text), &self.stoplist)
    }

    /// Stopped and stemmed tokens.
    pub fn terms(&self, text: &str) -> Vec<String> {
        stem_all(self.surface_terms(text))
    }

    pub fn anchor_terms(&self, passage: &Passage) -> Vec<String> {
        stem_all(remove_stopwords(restrict_to_anchors(passage), &self.stoplist))
    }

    pub fn passage_terms(&self, passage: &Passage, entity_restricted: bool) -> Vec<String> {
        if entity_restricted {
            self.anchor_terms(passage)
        } else {
            self.terms(&passage.text)
        }
    }

    pub fn passage_bag(&self, passage: &Passage, kind: UnitKind) -> UnitBag {
        extract_units_with(
            &self.passage_terms(passage, kind.entity_restricted),
            kind,
            self.skip_mode,
        )
    }
}

fn stem_all(tokens: Vec<String>) -> Vec<String> {
    tokens.iter().map(|t| stem(t)).collect()
}

/// A pool with every passage preprocessed once. Unit bags are built per
/// [`UnitKind`] on first use.
pub struct AnalyzedPool<'a> {
    pool: &'a Pool,
    analyzer: Analyzer,
    terms: Vec<Vec<String>>,
    anchor_terms: Vec<Vec<String>>,
    surface: OnceLock<Vec<Vec<String>>>,
    bags: [OnceLock<Vec<UnitBag>>; 6],
}

impl<'a> AnalyzedPool<'a> {
    pub fn new(pool: &'a Pool, analyzer: Analyzer) -> Self {
        let (terms, anchor_terms) = pool
            .passages()
            .par_iter()
            .map(|p| (analyzer.terms(&p.text), analyzer.anchor_terms(p)))
            .unzip();
        AnalyzedPool {
            pool,
            analyzer,
            terms,
            anchor_terms,
            surface: OnceLock::new(),
            bags: Default::default(),
        }
    }

    pub fn pool(&self) -> &'a Pool {
        self.pool
    }

    pub fn analyzer(&self) -> &Analyzer {
        &self.analyzer
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self, index: usize, entity_restricted: bool) -> &[String] {
        if entity_restricted {
            &self.anchor_terms[index]
        } else {
            &self.terms[index]
        }
    }

    /// Stopped but unstemmed tokens, for stores keyed on surface words.
    pub fn surface_terms(&self, index: usize) -> &[String] {
        &self.surface.get_or_init(|| {
            self.pool
                .passages()
                .par_iter()
                .map(|p| self.analyzer.surface_terms(&p.text))
                .collect()
        })[index]
    }

    pub fn bags(&self, kind: UnitKind) -> &[UnitBag] {
        self.bags[kind.slot()].get_or_init(|| {
            (0..self.len())
                .into_par_iter()
                .map(|i| extract_units_with(self.terms(i, kind.entity_restricted), kind, self.analyzer.skip_mode))
                .collect()
        })
    }

    pub fn bag(&self, index: usize, kind: UnitKind) -> &UnitBag {
        &self.bags(kind)[index]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AnchorSpan;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("The U.S. wins!"), ["the", "u", "s", "wins"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("abc"), ["abc"]);
        assert_eq!(tokenize("In 2012, São-Paulo"), ["in", "2012", "são", "paulo"]);
    }

    #[test]
    fn stopword_examples() {
        let stop: Stoplist = ["the"].into_iter().collect();
        assert_eq!(remove_stopwords(strings(&["the", "cat"]), &stop), ["cat"]);
        assert_eq!(remove_stopwords(strings(&["cat"]), &Stoplist::empty()), ["cat"]);
        assert!(remove_stopwords(strings(&["the", "the"]), &stop).is_empty());
    }

    #[test]
    fn smart_list_is_complete() {
        let smart = Stoplist::smart();
        // 571 entries in the source list; `would` appears twice.
        assert_eq!(SMART_STOPLIST.lines().filter(|l| !l.starts_with('#')).count(), 571);
        assert_eq!(smart.len(), 570);
        assert!(smart.contains("the") && smart.contains("zero"));
        let parsed = Stoplist::parse("# comment\nThe\n\nof # trailing\n");
        assert_eq!(parsed, ["the", "of"].into_iter().collect());
    }

    #[test]
    fn extract_examples() {
        let abc = strings(&["a", "b", "c"]);
        let bi = extract_units(&abc, UnitKind::full(Granularity::Bigram));
        assert_eq!(bi.iter().collect::<Vec<_>>(), [("a\u{241F}b", 1), ("b\u{241F}c", 1)]);
        assert_eq!(bi.total(), 2);

        let sk = extract_units(&abc, UnitKind::full(Granularity::SkipGap1));
        assert_eq!(sk.total(), 3);
        assert_eq!(sk.count("a\u{241F}c"), 1);
        assert_eq!(sk.count("a\u{241F}b"), 1);
        assert_eq!(sk.count("b\u{241F}c"), 1);

        let strict = extract_units_with(&abc, UnitKind::full(Granularity::SkipGap1), SkipMode::Strict);
        assert_eq!(strict.iter().collect::<Vec<_>>(), [("a\u{241F}c", 1)]);

        assert!(extract_units(&strings(&["a"]), UnitKind::full(Granularity::Bigram)).is_empty());

        let rep = extract_units(&strings(&["x", "x", "x"]), UnitKind::full(Granularity::Bigram));
        assert_eq!(rep.count("x\u{241F}x"), 2);
    }

    fn anchored(text: &str, spans: &[(usize, usize)]) -> Passage {
        Passage {
            passage_id: "p".into(),
            topic_id: "t".into(),
            text: text.into(),
            ref_score: 0.0,
            anchors: spans
                .iter()
                .map(|&(start, end)| AnchorSpan {
                    start,
                    end,
                    entity_label: "Entity_Label".into(),
                })
                .collect(),
        }
    }

    #[test]
    fn anchor_restriction() {
        let p = anchored("see [Paris] and [Berlin]", &[(17, 23), (5, 10)]);
        assert_eq!(restrict_to_anchors(&p), ["paris", "berlin"]);
        assert!(restrict_to_anchors(&anchored("no anchors here", &[])).is_empty());
        let text = "The U.S. wins!";
        let full = anchored(text, &[(0, text.chars().count())]);
        assert_eq!(restrict_to_anchors(&full), tokenize(text));
        let a = Analyzer::default();
        assert_eq!(a.anchor_terms(&full), a.terms(text));
    }

    #[test]
    fn analyzer_pipeline() {
        let a = Analyzer::default();
        assert_eq!(a.terms("The cats were running quickly"), ["cat", "run", "quickli"]);
        assert_eq!(a.surface_terms("The cats were running"), ["cats", "running"]);
    }
}
