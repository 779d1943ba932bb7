//! Pretrained word vectors in the plain-text `word c1 c2 ...` format.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const EMBEDDING_DIM: usize = 300;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
    zero: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: HashMap::new(),
            zero: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts or replaces a word vector.
    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding vector has non-finite components"));
        }
        self.entries.insert(word.into(), vector);
        Ok(())
    }

    /// Loads a 300-dimensional table.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with_dim(path, EMBEDDING_DIM)
    }

    pub fn load_with_dim(path: impl AsRef<Path>, dim: usize) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut table = Self::new(dim);
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let vector = parts
                .map(|p| {
                    p.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                        path: path.into(),
                        line: line_no,
                        msg: format!("`{p}` is not a finite number"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if vector.len() != dim {
                return Err(Error::Parse {
                    path: path.into(),
                    line: line_no,
                    msg: format!("expected {dim} components, found {}", vector.len()),
                });
            }
            table.entries.insert(word.to_string(), vector);
        }
        Ok(table)
    }

    /// Writes the table sorted by word so output is reproducible.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        let mut words: Vec<&String> = self.entries.keys().collect();
        words.sort();
        for word in words {
            out.write_all(word.as_bytes()).map_err(io)?;
            for v in &self.entries[word] {
                write!(out, " {v}").map_err(io)?;
            }
            writeln!(out).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    /// Returns the word's vector and whether it was in the vocabulary.
    /// Out-of-vocabulary words map to the zero vector.
    pub fn lookup(&self, word: &str) -> (&[f64], bool) {
        match self.entries.get(word) {
            Some(v) => (v, true),
            None => (&self.zero, false),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    /// Fraction of tokens missing from the table; 0 for an empty slice.
    pub fn oov_rate<S: AsRef<str>>(&self, tokens: &[S]) -> f64 {
        if tokens.is_empty() {
            return 0.0;
        }
        let missing = tokens.iter().filter(|t| !self.contains(t.as_ref())).count();
        missing as f64 / tokens.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(word: &str, n: usize, base: f64) -> String {
        let nums: Vec<String> = (0..n).map(|i| format!("{}", base + i as f64 * 0.001)).collect();
        format!("{word} {}\n", nums.join(" "))
    }

    #[test]
    fn loads_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.txt");
        fs::write(&p, line("cat", 300, 0.1) + &line("dog", 300, -0.3)).unwrap();
        let t = EmbeddingTable::load(&p).unwrap();
        assert_eq!(t.len(), 2);
        let (v, known) = t.lookup("dog");
        assert!(known);
        assert_eq!(v[5], "-0.295".parse::<f64>().unwrap());
    }

    #[test]
    fn wrong_width_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.txt");
        fs::write(&p, line("cat", 300, 0.1) + &line("dog", 299, 0.0)).unwrap();
        match EmbeddingTable::load(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&p, "cat 1 2 x\n").unwrap();
        assert!(EmbeddingTable::load_with_dim(&p, 3).is_err());
    }

    #[test]
    fn duplicates_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.txt");
        fs::write(&p, "a 1 2\nb 3 4\na 5 6\n").unwrap();
        let t = EmbeddingTable::load_with_dim(&p, 2).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.lookup("a").0, &[5.0, 6.0]);
    }

    #[test]
    fn oov_is_zero_and_pure() {
        let mut t = EmbeddingTable::new(300);
        t.insert("x", vec![1.0; 300]).unwrap();
        let (v, known) = t.lookup("missing");
        assert!(!known);
        assert_eq!(v.len(), 300);
        assert!(v.iter().all(|&c| c == 0.0));
        assert_eq!(t.lookup("x"), t.lookup("x"));
        assert_eq!(t.oov_rate(&["x", "y"]), 0.5);
    }

    #[test]
    fn write_reload_round_trip() {
        let mut t = EmbeddingTable::new(4);
        t.insert("beta", vec![0.1, -2.5e-7, 3.0, 1.0 / 3.0]).unwrap();
        t.insert("alpha", vec![f64::MIN_POSITIVE, 0.0, -0.0, 12345.678]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.txt");
        t.write(&p).unwrap();
        assert_eq!(EmbeddingTable::load_with_dim(&p, 4).unwrap(), t);
    }
}
