//! Embedding persistence.
//!
//! Text format: header line `<vocab_size> <d>`, then one `<user_id> <d
//! floats>` line per user. Binary format: the same header line, then per
//! user the id, one space, d little-endian f32 values, and a newline.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::skipgram::model::EmbeddingModel;

impl EmbeddingModel {
    /// Write the input vectors (the embeddings) as text.
    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        write_text(&mut w, self.dim(), self.rows(), self.vocab().len())
            .map_err(|e| Error::io(path, e))
    }

    /// Write the input vectors with f32 payloads.
    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        write_binary(&mut w, self.dim(), self.rows(), self.vocab().len())
            .map_err(|e| Error::io(path, e))
    }

    fn rows(&self) -> impl Iterator<Item = (&str, &[f64])> {
        (0..self.vocab().len()).map(|i| (self.vocab().word(i), self.input_row(i)))
    }
}

fn write_text<'a, W: Write>(
    w: &mut W,
    dim: usize,
    rows: impl Iterator<Item = (&'a str, &'a [f64])>,
    count: usize,
) -> std::io::Result<()> {
    writeln!(w, "{count} {dim}")?;
    for (user, vector) in rows {
        write!(w, "{user}")?;
        for x in vector {
            write!(w, " {x:.6}")?;
        }
        writeln!(w)?;
    }
    w.flush()
}

fn write_binary<'a, W: Write>(
    w: &mut W,
    dim: usize,
    rows: impl Iterator<Item = (&'a str, &'a [f64])>,
    count: usize,
) -> std::io::Result<()> {
    writeln!(w, "{count} {dim}")?;
    for (user, vector) in rows {
        w.write_all(user.as_bytes())?;
        w.write_all(b" ")?;
        for x in vector {
            w.write_all(&(*x as f32).to_le_bytes())?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Embeddings as loaded from disk: ids and vectors only, file order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEmbeddings {
    pub dim: usize,
    pub vectors: Vec<(String, Vec<f64>)>,
}

impl RawEmbeddings {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let rows = self.vectors.iter().map(|(u, v)| (u.as_str(), v.as_slice()));
        write_text(&mut w, self.dim, rows, self.vectors.len()).map_err(|e| Error::io(path, e))
    }

    pub fn load_text(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing header"))?
            .map_err(|e| Error::io(path, e))?;
        let (count, dim) = parse_header(&header)
            .ok_or_else(|| Error::parse(path, 1, format!("bad header {header:?}")))?;
        let mut vectors = Vec::with_capacity(count);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(' ');
            let user = fields.next().unwrap_or("").to_string();
            if user.is_empty() {
                return Err(Error::parse(path, i + 2, "empty user id"));
            }
            let vector: Vec<f64> = fields
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(path, i + 2, format!("bad float: {e}")))?;
            if vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: vector.len(),
                });
            }
            vectors.push((user, vector));
        }
        if vectors.len() != count {
            return Err(Error::parse(
                path,
                1,
                format!("header claims {count} rows, found {}", vectors.len()),
            ));
        }
        Ok(RawEmbeddings { dim, vectors })
    }

    pub fn load_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let mut header = Vec::new();
        r.read_until(b'\n', &mut header)
            .map_err(|e| Error::io(path, e))?;
        let header = String::from_utf8_lossy(&header);
        let (count, dim) = parse_header(header.trim_end())
            .ok_or_else(|| Error::parse(path, 1, format!("bad header {:?}", header.trim_end())))?;
        let mut vectors = Vec::with_capacity(count);
        for row in 0..count {
            let mut id = Vec::new();
            let n = r
                .read_until(b' ', &mut id)
                .map_err(|e| Error::io(path, e))?;
            if n == 0 {
                return Err(Error::parse(path, row + 2, "unexpected end of file"));
            }
            id.pop(); // trailing space
            let user = String::from_utf8(id)
                .map_err(|_| Error::parse(path, row + 2, "user id is not UTF-8"))?;
            if user.is_empty() {
                return Err(Error::parse(path, row + 2, "empty user id"));
            }
            let mut buf = vec![0u8; dim * 4 + 1];
            r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
            if buf.pop() != Some(b'\n') {
                return Err(Error::parse(path, row + 2, "missing row terminator"));
            }
            let vector: Vec<f64> = buf
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            vectors.push((user, vector));
        }
        Ok(RawEmbeddings { dim, vectors })
    }
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut parts = line.split(' ');
    let count = parts.next()?.parse().ok()?;
    let dim = parts.next()?.parse().ok()?;
    if parts.next().is_some() {
        return None;
    }
    Some((count, dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::WalkCorpus;
    use crate::skipgram::train::{train, TrainConfig, TrainMode};

    fn small_model() -> EmbeddingModel {
        let corpus = WalkCorpus {
            walks: vec![
                vec!["carol".into(), "alice".into(), "bob".into()],
                vec!["alice".into(), "bob".into(), "carol".into()],
            ],
        };
        train(
            &corpus,
            &TrainConfig {
                dim: 4,
                window: 2,
                subsample_threshold: None,
                epochs: 2,
                mode: TrainMode::NegativeSampling { negatives: 2 },
                rng_seed: 1,
                ..TrainConfig::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn text_round_trip() {
        let model = small_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        model.save_text(&path).unwrap();
        let raw = RawEmbeddings::load_text(&path).unwrap();
        assert_eq!(raw.dim, 4);
        assert_eq!(raw.len(), 3);
        assert_eq!(raw.vectors[0].0, model.vocab().word(0));
        for (i, (_, v)) in raw.vectors.iter().enumerate() {
            for (a, b) in v.iter().zip(model.input_row(i)) {
                assert!((a - b).abs() < 1e-6); // text keeps 6 decimals
            }
        }
    }

    #[test]
    fn binary_round_trip() {
        let model = small_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.bin");
        model.save_binary(&path).unwrap();
        let raw = RawEmbeddings::load_binary(&path).unwrap();
        assert_eq!(raw.dim, 4);
        assert_eq!(raw.len(), 3);
        for (i, (user, v)) in raw.vectors.iter().enumerate() {
            assert_eq!(user, model.vocab().word(i));
            for (a, b) in v.iter().zip(model.input_row(i)) {
                assert!((a - b).abs() < 1e-6); // f32 payload
            }
        }
    }

    #[test]
    fn raw_save_load_is_identity() {
        let raw = RawEmbeddings {
            dim: 3,
            vectors: vec![
                ("u1".into(), vec![0.5, -0.25, 0.125]),
                ("u2".into(), vec![1.0, 0.0, -1.0]),
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw.txt");
        raw.save_text(&path).unwrap();
        assert_eq!(RawEmbeddings::load_text(&path).unwrap(), raw);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");

        std::fs::write(&path, "not a header\n").unwrap();
        assert!(matches!(
            RawEmbeddings::load_text(&path),
            Err(Error::Parse { line: 1, .. })
        ));

        std::fs::write(&path, "2 3\nu1 0.1 0.2 0.3\n").unwrap();
        assert!(RawEmbeddings::load_text(&path).is_err()); // row count short

        std::fs::write(&path, "1 3\nu1 0.1 0.2\n").unwrap();
        assert!(matches!(
            RawEmbeddings::load_text(&path),
            Err(Error::DimensionMismatch {
                expected: 3,
                got: 2
            })
        ));

        std::fs::write(&path, "1 2\nu1 0.1 zzz\n").unwrap();
        assert!(matches!(
            RawEmbeddings::load_text(&path),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let model = small_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.bin");
        model.save_binary(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(RawEmbeddings::load_binary(&path).is_err());
    }
}
