//! `LIDM1` model container: one JSON header line, then the feature and
//! output matrices as little-endian `f32`, row-major, in that order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LangIdConfig, LangIdModel};
use crate::{Error, Result};

const FORMAT: &str = "LIDM1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    labels: Vec<String>,
    word_vocab: Vec<String>,
    config: LangIdConfig,
    feature_shape: [usize; 2],
    output_shape: [usize; 2],
}

fn io_err(e: std::io::Error) -> Error {
    Error::Format(e.to_string())
}

fn write_block<W: Write>(w: &mut W, values: &[f32]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    Ok(())
}

fn read_block<R: Read>(r: &mut R, len: usize) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; len * 4];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Format("truncated matrix data".into()))?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

impl LangIdModel {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let dim = self.config.dim;
        let header = Header {
            format: FORMAT.to_owned(),
            labels: self.labels.clone(),
            word_vocab: self.word_vocab.clone(),
            config: self.config.clone(),
            feature_shape: [self.feature_embeddings.len() / dim, dim],
            output_shape: [self.labels.len(), dim],
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n").map_err(io_err)?;
        write_block(&mut w, &self.feature_embeddings)?;
        write_block(&mut w, &self.output_weights)?;
        w.flush().map_err(io_err)
    }

    pub fn read_from<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = Vec::new();
        r.read_until(b'\n', &mut line).map_err(io_err)?;
        let header: Header = serde_json::from_slice(&line)
            .map_err(|e| Error::Format(format!("bad header: {e}")))?;
        if header.format != FORMAT {
            return Err(Error::Format(format!("unsupported format `{}`", header.format)));
        }
        let dim = header.config.dim;
        if header.feature_shape[1] != dim || header.output_shape[1] != dim {
            return Err(Error::Format("matrix width does not match dim".into()));
        }
        let features = read_block(&mut r, header.feature_shape[0] * dim)?;
        let output = read_block(&mut r, header.output_shape[0] * dim)?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(io_err)? != 0 {
            return Err(Error::Format("trailing bytes after matrices".into()));
        }
        LangIdModel::from_parts(header.labels, header.word_vocab, header.config, features, output)
            .map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }
}
