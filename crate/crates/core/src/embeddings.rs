//! Pre-trained word-vector stores and additive document vectors.
//!
//! Two on-disk layouts are read, both starting with an ASCII header line
//! `"<vocab> <dim>\n"`:
//!
//! - text: one `"<word> <f1> ... <fdim>"` line per entry;
//! - binary: per entry `"<word> "` followed by `dim` little-endian `f32`s.
//!   A newline between entries, as written by the original word2vec tool,
//!   is accepted on input.
//!
//! Bi-gram stores use the same `a␟b` pair keys as [`crate::textproc`].

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, ErrorKind, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::discrete::Score;
use crate::textproc::{Granularity, PAIR_SEPARATOR};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum VectorFormat {
    #[default]
    Text,
    Binary,
}

impl VectorFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Some(VectorFormat::Text),
            "binary" | "bin" => Some(VectorFormat::Binary),
            _ => None,
        }
    }
}

/// Which token form the store vocabulary is keyed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum UnitForm {
    /// Porter stems, as produced for locally trained models.
    #[default]
    Stemmed,
    /// Lowercased words, for general-purpose external models.
    Surface,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StoreOptions {
    pub format: VectorFormat,
    /// Only [`Granularity::Unigram`] and [`Granularity::Bigram`] are meaningful.
    pub granularity: Granularity,
    pub form: UnitForm,
    /// Rewrite `_` in keys to the pair separator (for `new_york` style bi-gram files).
    pub underscore_pairs: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
    granularity: Granularity,
    form: UnitForm,
}

impl EmbeddingStore {
    pub fn new(dim: usize, granularity: Granularity, form: UnitForm) -> Self {
        EmbeddingStore {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            granularity,
            form,
        }
    }

    /// Adds a vector; fails on a duplicate word or wrong length.
    pub fn push(&mut self, word: impl Into<String>, vector: &[f32]) -> Result<()> {
        let word = word.into();
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: vector.len(),
            });
        }
        if self.index.contains_key(&word) {
            return Err(Error::VectorFormat {
                path: "<memory>".into(),
                message: format!("duplicate word `{word}`"),
            });
        }
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn form(&self) -> UnitForm {
        self.form
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.index
            .get(word)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> + '_ {
        self.words
            .iter()
            .zip(self.data.chunks_exact(self.dim.max(1)))
            .map(|(w, v)| (w.as_str(), v))
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (word, v) in self.iter() {
            out.write_all(word.as_bytes())?;
            for x in v {
                write!(out, " {x}")?;
            }
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (word, v) in self.iter() {
            out.write_all(word.as_bytes())?;
            out.write_all(b" ")?;
            for x in v {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        out.flush()
    }

    pub fn save(&self, path: &Path, format: VectorFormat) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let out = BufWriter::new(file);
        match format {
            VectorFormat::Text => self.write_text(out),
            VectorFormat::Binary => self.write_binary(out),
        }
        .map_err(|e| Error::io(path, e))
    }
}

/// Vocabulary size and dimensionality from a header line.
pub fn parse_header(line: &str, path: &str) -> Result<(usize, usize)> {
    let bad = || Error::VectorFormat {
        path: path.to_string(),
        message: format!("expected header `<vocab> <dim>`, found `{}`", line.trim()),
    };
    let mut parts = line.split_whitespace();
    let vocab = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
    let dim: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
    if parts.next().is_some() || dim == 0 {
        return Err(bad());
    }
    Ok((vocab, dim))
}

pub fn load_store(path: &Path, options: &StoreOptions) -> Result<EmbeddingStore> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::with_capacity(1 << 20, file);
    let name = path.display().to_string();
    match options.format {
        VectorFormat::Text => read_text(reader, options, &name),
        VectorFormat::Binary => read_binary(reader, options, &name),
    }
}

fn translate_key(word: String, options: &StoreOptions) -> String {
    if options.underscore_pairs {
        word.replace('_', PAIR_SEPARATOR.encode_utf8(&mut [0; 4]))
    } else {
        word
    }
}

fn format_err(path: &str, message: String) -> Error {
    Error::VectorFormat {
        path: path.to_string(),
        message,
    }
}

fn push_entry(store: &mut EmbeddingStore, word: String, vector: &[f32], path: &str, entry: usize) -> Result<()> {
    store.push(word, vector).map_err(|e| match e {
        Error::VectorFormat { message, .. } => format_err(path, format!("entry {entry}: {message}")),
        other => other,
    })
}

pub fn read_text<R: BufRead>(mut reader: R, options: &StoreOptions, path: &str) -> Result<EmbeddingStore> {
    let mut header = String::new();
    reader.read_line(&mut header).map_err(|e| Error::io(path, e))?;
    let (vocab, dim) = parse_header(&header, path)?;
    let mut store = EmbeddingStore::new(dim, options.granularity, options.form);
    let mut vector = Vec::with_capacity(dim);
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if store.len() == vocab {
            return Err(format_err(path, format!("more entries than the {vocab} declared in the header")));
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap_or_default().to_string();
        vector.clear();
        for part in parts {
            let x: f32 = part
                .parse()
                .map_err(|_| format_err(path, format!("line {}: bad float `{part}`", i + 2)))?;
            vector.push(x);
        }
        if vector.len() != dim {
            return Err(format_err(
                path,
                format!("line {}: dimension mismatch, expected {dim} values, found {}", i + 2, vector.len()),
            ));
        }
        push_entry(&mut store, translate_key(word, options), &vector, path, i + 1)?;
    }
    if store.len() != vocab {
        return Err(Error::TruncatedVectors {
            path: path.to_string(),
            expected: vocab,
            found: store.len(),
        });
    }
    Ok(store)
}

pub fn read_binary<R: BufRead>(mut reader: R, options: &StoreOptions, path: &str) -> Result<EmbeddingStore> {
    let mut header = Vec::new();
    reader.read_until(b'\n', &mut header).map_err(|e| Error::io(path, e))?;
    let (vocab, dim) = parse_header(&String::from_utf8_lossy(&header), path)?;
    let mut store = EmbeddingStore::new(dim, options.granularity, options.form);
    let truncated = |found| Error::TruncatedVectors {
        path: path.to_string(),
        expected: vocab,
        found,
    };
    let mut word = Vec::new();
    let mut raw = vec![0u8; dim * 4];
    let mut vector = vec![0f32; dim];
    for entry in 0..vocab {
        skip_newlines(&mut reader).map_err(|e| Error::io(path, e))?;
        word.clear();
        reader.read_until(b' ', &mut word).map_err(|e| Error::io(path, e))?;
        if word.pop() != Some(b' ') {
            return Err(truncated(entry));
        }
        if let Err(e) = reader.read_exact(&mut raw) {
            return Err(if e.kind() == ErrorKind::UnexpectedEof {
                truncated(entry)
            } else {
                Error::io(path, e)
            });
        }
        for (x, bytes) in vector.iter_mut().zip(raw.chunks_exact(4)) {
            *x = f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
        }
        let text = String::from_utf8(std::mem::take(&mut word))
            .map_err(|_| format_err(path, format!("entry {}: word is not UTF-8", entry + 1)))?;
        push_entry(&mut store, translate_key(text, options), &vector, path, entry + 1)?;
    }
    let mut rest = Vec::new();
    reader.read_to_end(&mut rest).map_err(|e| Error::io(path, e))?;
    if rest.iter().any(|b| !b.is_ascii_whitespace()) {
        return Err(format_err(path, format!("data after the {vocab} declared entries")));
    }
    Ok(store)
}

fn skip_newlines<R: BufRead>(reader: &mut R) -> std::io::Result<()> {
    loop {
        let buf = reader.fill_buf()?;
        let n = buf.iter().take_while(|&&b| b == b'\n' || b == b'\r').count();
        let at_end = n < buf.len() || buf.is_empty();
        reader.consume(n);
        if at_end {
            return Ok(());
        }
    }
}

/// Sum of unit embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct DocVector {
    pub components: Vec<f64>,
    /// Unit occurrences missing from the store.
    pub oov_count: usize,
}

impl DocVector {
    pub fn zeros(dim: usize) -> Self {
        DocVector {
            components: vec![0.0; dim],
            oov_count: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|&x| x == 0.0)
    }

    pub fn add(&mut self, other: &DocVector) {
        for (a, b) in self.components.iter_mut().zip(&other.components) {
            *a += b;
        }
        self.oov_count += other.oov_count;
    }

    pub fn norm(&self) -> f64 {
        self.components.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Element-wise sum over unit occurrences; OOV units are skipped and counted.
pub fn doc_vector<S: AsRef<str>>(units: &[S], store: &EmbeddingStore) -> DocVector {
    let mut doc = DocVector::zeros(store.dim());
    for unit in units {
        match store.get(unit.as_ref()) {
            Some(v) => {
                for (acc, &x) in doc.components.iter_mut().zip(v) {
                    *acc += f64::from(x);
                }
            }
            None => doc.oov_count += 1,
        }
    }
    doc
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine(u: &DocVector, v: &DocVector) -> Result<Score> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            left: u.dim(),
            right: v.dim(),
        });
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Ok(Score::higher(0.0));
    }
    let dot: f64 = u.components.iter().zip(&v.components).map(|(a, b)| a * b).sum();
    Ok(Score::higher(dot / (nu * nv)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> StoreOptions {
        StoreOptions::default()
    }

    #[test]
    fn parses_text_store() {
        let store = read_text("2 3\na 1 0 0\nb 0 1 0\n".as_bytes(), &opts(), "t").unwrap();
        assert_eq!(store.dim(), 3);
        assert_eq!(store.len(), 2);
        assert_eq!(store.get("b").unwrap(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn text_store_errors() {
        assert!(matches!(
            read_text("5 3\na 1 0 0\nb 0 1 0\nc 0 0 1\nd 1 1 1\n".as_bytes(), &opts(), "t"),
            Err(Error::TruncatedVectors { expected: 5, found: 4, .. })
        ));
        assert!(matches!(
            read_text("1 3\na 1 0\n".as_bytes(), &opts(), "t"),
            Err(Error::VectorFormat { .. })
        ));
        assert!(matches!(
            read_text("2 1\na 1\na 2\n".as_bytes(), &opts(), "t"),
            Err(Error::VectorFormat { message, .. }) if message.contains("duplicate")
        ));
        assert!(read_text("1 1\na 1\nb 2\n".as_bytes(), &opts(), "t").is_err());
        assert!(read_text("oops\n".as_bytes(), &opts(), "t").is_err());
    }

    #[test]
    fn binary_round_trip_and_newline_tolerance() {
        let mut store = EmbeddingStore::new(2, Granularity::Unigram, UnitForm::Stemmed);
        store.push("a", &[1.5, -0.25]).unwrap();
        store.push("é", &[f32::MIN_POSITIVE, 3.0e38]).unwrap();
        let mut bytes = Vec::new();
        store.write_binary(&mut bytes).unwrap();
        assert_eq!(read_binary(bytes.as_slice(), &opts(), "b").unwrap(), store);

        // word2vec-style records terminated by a newline
        let mut classic = b"2 2\n".to_vec();
        for (w, v) in store.iter() {
            classic.extend_from_slice(w.as_bytes());
            classic.push(b' ');
            v.iter().for_each(|x| classic.extend_from_slice(&x.to_le_bytes()));
            classic.push(b'\n');
        }
        assert_eq!(read_binary(classic.as_slice(), &opts(), "b").unwrap(), store);

        let cut = &bytes[..bytes.len() - 3];
        assert!(matches!(read_binary(cut, &opts(), "b"), Err(Error::TruncatedVectors { found: 1, .. })));
    }

    #[test]
    fn underscore_keys_become_pairs() {
        let o = StoreOptions {
            granularity: Granularity::Bigram,
            underscore_pairs: true,
            ..opts()
        };
        let store = read_text("1 1\nnew_york 1\n".as_bytes(), &o, "t").unwrap();
        assert!(store.get("new\u{241F}york").is_some());
    }

    #[test]
    fn doc_vector_examples() {
        let store = read_text("2 3\na 1 0 0\nb 0 1 0\n".as_bytes(), &opts(), "t").unwrap();
        let d = doc_vector(&["a", "b"], &store);
        assert_eq!(d.components, [1.0, 1.0, 0.0]);
        assert_eq!(d.oov_count, 0);
        assert_eq!(doc_vector(&["a", "a"], &store).components, [2.0, 0.0, 0.0]);
        let z = doc_vector(&["zzz"], &store);
        assert_eq!(z.components, [0.0; 3]);
        assert_eq!(z.oov_count, 1);
    }

    #[test]
    fn cosine_examples() {
        let v = |c: &[f64]| DocVector {
            components: c.to_vec(),
            oov_count: 0,
        };
        assert!((cosine(&v(&[0.3, 2.0]), &v(&[0.3, 2.0])).unwrap().value - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap().value, 0.0);
        let c = cosine(&v(&[1.0, 1.0]), &v(&[1.0, 0.0])).unwrap().value;
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(cosine(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])).unwrap().value, 0.0);
        assert!(matches!(cosine(&v(&[1.0]), &v(&[1.0, 0.0])), Err(Error::DimensionMismatch { .. })));
    }
}
