//! Static word vectors in word2vec text format, used by the baseline models.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;

/// Vector used for a word absent from the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OovPolicy {
    #[default]
    Zeros,
    /// Standard normal vector keyed by `(seed, word)`, so a given word always
    /// gets the same vector.
    RandomNormal(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    pub oov: OovPolicy,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            oov: OovPolicy::Zeros,
        }
    }

    /// Adds a word; a repeated word keeps its first vector.
    pub fn insert(&mut self, word: &str, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Validation(format!(
                "vector for {word:?} has {} entries, table dimension is {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite value in vector for {word:?}")));
        }
        if self.index.contains_key(word) {
            return Ok(());
        }
        self.index.insert(word.to_string(), self.words.len());
        self.words.push(word.to_string());
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

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Exact lookup; no fallback.
    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index
            .get(word)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    fn oov_vector(&self, word: &str, out: &mut [f64]) {
        match self.oov {
            OovPolicy::Zeros => out.fill(0.0),
            OovPolicy::RandomNormal(seed) => {
                let mut r = rng::stream(seed, rng::domain::OOV, rng::fnv1a(word.as_bytes()));
                for v in out.iter_mut() {
                    *v = StandardNormal.sample(&mut r);
                }
            }
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "{} {}", self.len(), self.dim).map_err(io)?;
        for (i, word) in self.words.iter().enumerate() {
            write!(w, "{word}").map_err(io)?;
            for v in &self.data[i * self.dim..(i + 1) * self.dim] {
                write!(w, " {v}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Loads a word2vec text file: a `count dim` header, then `word v1 .. vdim` rows.
pub fn load_vectors(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();

    let header = match lines.next() {
        Some(h) => h.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::parse(path, 1, "empty file, expected `count dim` header")),
    };
    let parts: Vec<&str> = header.split_whitespace().collect();
    let (count, dim) = match parts.as_slice() {
        [c, d] => match (c.parse::<usize>(), d.parse::<usize>()) {
            (Ok(c), Ok(d)) if d > 0 => (c, d),
            _ => return Err(Error::parse(path, 1, format!("bad header {header:?}"))),
        },
        _ => return Err(Error::parse(path, 1, format!("bad header {header:?}"))),
    };

    let mut table = EmbeddingTable::new(dim);
    let mut rows = 0usize;
    let mut buf = Vec::with_capacity(dim);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().unwrap_or_default();
        buf.clear();
        for f in fields {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("not a number: {f:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, lineno, format!("non-finite value {f:?}")));
            }
            buf.push(v);
        }
        if buf.len() != dim {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {dim} values for {word:?}, found {}", buf.len()),
            ));
        }
        table.insert(word, &buf)?;
        rows += 1;
    }
    if rows != count {
        return Err(Error::parse(
            path,
            1,
            format!("header declares {count} rows, file has {rows}"),
        ));
    }
    Ok(table)
}

/// `max_len x dim` matrix: row i holds token i, rows past the sequence are zero.
pub fn embed_sequence<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable, max_len: usize) -> Array2<f64> {
    let dim = table.dim();
    let mut out = Array2::zeros((max_len, dim));
    for (i, tok) in tokens.iter().take(max_len).enumerate() {
        let mut row = out.row_mut(i);
        let row = row.as_slice_mut().expect("standard layout");
        match table.get(tok.as_ref()) {
            Some(v) => row.copy_from_slice(v),
            None => table.oov_vector(tok.as_ref(), row),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const FIXTURE: &str = "3 4\ntin 0.1 0.2 0.3 0.4\nxã_hội -1 0 1 2.5\nnóng 0 0 0 1e-3\n";

    #[test]
    fn loads_hand_written_fixture() {
        let f = write_tmp(FIXTURE);
        let t = load_vectors(f.path()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.dim(), 4);
        assert_eq!(t.get("xã_hội").unwrap(), &[-1.0, 0.0, 1.0, 2.5]);
        assert_eq!(t.get("nóng").unwrap()[3], 1e-3);
        assert!(t.get("missing").is_none());
    }

    #[test]
    fn empty_table_keeps_dimension() {
        let f = write_tmp("0 300\n");
        let t = load_vectors(f.path()).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.dim(), 300);
    }

    #[test]
    fn short_row_reports_its_line() {
        let row: Vec<String> = (0..299).map(|i| i.to_string()).collect();
        let f = write_tmp(&format!("1 300\nword {}\n", row.join(" ")));
        match load_vectors(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_value_is_rejected() {
        let f = write_tmp("1 2\nw 1 NaN\n");
        assert!(matches!(load_vectors(f.path()), Err(Error::Parse { line: 2, .. })));
        let f = write_tmp("1 2\nw inf 1\n");
        assert!(load_vectors(f.path()).is_err());
    }

    #[test]
    fn embed_sequence_cases() {
        let t = load_vectors(write_tmp(FIXTURE).path()).unwrap();
        let empty: [&str; 0] = [];
        let m = embed_sequence(&empty, &t, 5);
        assert_eq!(m.dim(), (5, 4));
        assert!(m.iter().all(|v| *v == 0.0));

        let m = embed_sequence(&["tin"], &t, 5);
        assert_eq!(m.row(0).to_vec(), vec![0.1, 0.2, 0.3, 0.4]);
        assert!(m.rows().into_iter().skip(1).all(|r| r.iter().all(|v| *v == 0.0)));

        let m = embed_sequence(&["foo", "bar"], &t, 3);
        assert!(m.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn random_oov_is_stable_per_word() {
        let mut t = load_vectors(write_tmp(FIXTURE).path()).unwrap();
        t.oov = OovPolicy::RandomNormal(7);
        let m = embed_sequence(&["foo", "bar", "foo"], &t, 3);
        assert_eq!(m.row(0), m.row(2));
        assert_ne!(m.row(0), m.row(1));
        assert!(m.row(0).iter().any(|v| *v != 0.0));
    }

    #[test]
    fn write_then_load() {
        let t = load_vectors(write_tmp(FIXTURE).path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        t.write(out.path()).unwrap();
        assert_eq!(load_vectors(out.path()).unwrap(), t);
    }
}
