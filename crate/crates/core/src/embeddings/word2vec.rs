//! Reader and writer for the word2vec binary format.
//!
//! Layout: ASCII header `"{vocab_size} {dim}\n"`, then per word the word
//! bytes, a single space, `dim` little-endian `f32`s and a newline. The
//! newline after the final entry is optional when reading.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Word2Vec {
    pub words: Vec<String>,
    pub dim: usize,
    /// Row-major `words.len() × dim`.
    pub values: Vec<f32>,
}

impl Word2Vec {
    pub fn new(words: Vec<String>, dim: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != words.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: words.len() * dim,
                got: values.len(),
            });
        }
        Ok(Word2Vec { words, dim, values })
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn read_word2vec_binary(path: impl AsRef<Path>) -> Result<Word2Vec> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_from(&mut BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

fn read_from<R: BufRead>(reader: &mut R) -> Result<Word2Vec> {
    let mut header = Vec::new();
    reader.read_until(b'\n', &mut header).map_err(|e| Error::io("<word2vec>", e))?;
    if header.last() != Some(&b'\n') {
        return Err(Error::BadHeader("missing newline".into()));
    }
    let header = std::str::from_utf8(&header[..header.len() - 1]).map_err(|_| Error::BadHeader("not ASCII".into()))?;
    let mut fields = header.split(' ');
    let (Some(n), Some(d), None) = (fields.next(), fields.next(), fields.next()) else {
        return Err(Error::BadHeader(format!("expected \"<count> <dim>\", got {header:?}")));
    };
    let n: usize = n.parse().map_err(|_| Error::BadHeader(format!("bad count {n:?}")))?;
    let dim: usize = d.parse().map_err(|_| Error::BadHeader(format!("bad dimension {d:?}")))?;

    let mut words = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n.saturating_mul(dim).min(1 << 28));
    let mut buf = vec![0u8; dim * 4];
    let truncated = |got| Error::TruncatedFile { expected: n, got };

    for got in 0..n {
        let mut word = Vec::new();
        reader.read_until(b' ', &mut word).map_err(|e| Error::io("<word2vec>", e))?;
        if word.pop() != Some(b' ') {
            return Err(truncated(got));
        }
        let word = String::from_utf8_lossy(&word).into_owned();

        match reader.read_exact(&mut buf) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Err(truncated(got)),
            Err(e) => return Err(Error::io("<word2vec>", e)),
        }
        let start = values.len();
        values.extend(buf.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])));
        if values[start..].iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(word));
        }
        words.push(word);

        let next = reader.fill_buf().map_err(|e| Error::io("<word2vec>", e))?;
        if next.first() == Some(&b'\n') {
            reader.consume(1);
        }
    }
    Ok(Word2Vec { words, dim, values })
}

pub fn write_word2vec_binary(words: &[String], dim: usize, values: &[f32], path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode(words, dim, values)?;
    crate::io::write_atomic(path.as_ref(), &bytes)
}

fn encode(words: &[String], dim: usize, values: &[f32]) -> Result<Vec<u8>> {
    if values.len() != words.len() * dim {
        return Err(Error::DimensionMismatch {
            expected: words.len() * dim,
            got: values.len(),
        });
    }
    let mut out = BufWriter::new(Vec::with_capacity(16 + values.len() * 4 + words.len() * 8));
    let io = |e| Error::io("<word2vec>", e);
    writeln!(out, "{} {}", words.len(), dim).map_err(io)?;
    for (word, row) in words.iter().zip(values.chunks(dim.max(1))) {
        if word.is_empty() || word.bytes().any(|b| b == b' ' || b == b'\n') {
            return Err(Error::InvalidWord(word.clone()));
        }
        out.write_all(word.as_bytes()).map_err(io)?;
        out.write_all(b" ").map_err(io)?;
        for v in row.iter().take(dim) {
            out.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        out.write_all(b"\n").map_err(io)?;
    }
    out.into_inner().map_err(|e| io(e.into_error()))
}
