//! Versioned little-endian binary format for fitted models and cached
//! feature blocks.
//!
//! Every file starts with the magic `AFLM`, a `u16` format version and a
//! `u8` kind tag. Shapes are `u32`, reals `f64`, strings `u32` length plus
//! UTF-8 bytes.

use super::{ElmModel, LstmModel, MinMaxScaler, PcaModel};
use crate::data::FeatureBlock;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"AFLM";
pub const FORMAT_VERSION: u16 = 1;

const KIND_PCA: u8 = 1;
const KIND_SCALER: u8 = 2;
const KIND_ELM: u8 = 3;
const KIND_LSTM: u8 = 4;
const KIND_BLOCKS: u8 = 5;

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Pca(PcaModel),
    Scaler(MinMaxScaler),
    Elm(ElmModel),
    Lstm(LstmModel),
}

struct Writer(Vec<u8>);

impl Writer {
    fn new(kind: u8) -> Self {
        let mut v = MAGIC.to_vec();
        v.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        v.push(kind);
        Writer(v)
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
    fn vec(&mut self, v: &[f64]) {
        self.u32(v.len());
        self.f64s(v);
    }
    fn matrix(&mut self, m: &[Vec<f64>]) {
        self.u32(m.len());
        self.u32(m.first().map_or(0, Vec::len));
        for r in m {
            self.f64s(r);
        }
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn open(buf: &'a [u8]) -> Result<(Self, u8)> {
        if buf.len() < 7 || &buf[..4] != MAGIC {
            return Err(Error::parse("model file", "bad magic"));
        }
        let version = u16::from_le_bytes([buf[4], buf[5]]);
        if version != FORMAT_VERSION {
            return Err(Error::parse(
                "model file",
                format!("format version {version}, expected {FORMAT_VERSION}"),
            ));
        }
        Ok((Reader { buf, pos: 7 }, buf[6]))
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::parse("model file", "truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = n
            .checked_mul(8)
            .ok_or_else(|| Error::parse("model file", "size overflow"))?;
        Ok(self
            .take(bytes)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
    fn vec(&mut self) -> Result<Vec<f64>> {
        let n = self.u32()?;
        self.f64s(n)
    }
    fn matrix(&mut self) -> Result<Vec<Vec<f64>>> {
        let rows = self.u32()?;
        let cols = self.u32()?;
        let flat = self.f64s(
            rows.checked_mul(cols)
                .ok_or_else(|| Error::parse("model file", "size overflow"))?,
        )?;
        if cols == 0 {
            if rows > 0 {
                return Err(Error::parse("model file", "zero-width matrix rows"));
            }
            return Ok(Vec::new());
        }
        Ok(flat.chunks(cols).map(|c| c.to_vec()).collect())
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::parse("model file", "invalid UTF-8"))
    }
    fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::parse("model file", "trailing bytes"));
        }
        Ok(())
    }
}

fn shape_err(msg: &str) -> Error {
    Error::parse("model file", msg)
}

impl Model {
    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            Model::Pca(m) => {
                let mut w = Writer::new(KIND_PCA);
                w.vec(&m.mean);
                w.matrix(&m.components);
                w.vec(&m.explained_variance);
                w.0
            }
            Model::Scaler(s) => {
                let mut w = Writer::new(KIND_SCALER);
                w.vec(&s.min);
                w.vec(&s.max);
                w.0
            }
            Model::Elm(m) => {
                let mut w = Writer::new(KIND_ELM);
                w.u32(m.n_classes);
                w.matrix(&m.input_weights);
                w.vec(&m.biases);
                w.matrix(&m.output_weights);
                w.0
            }
            Model::Lstm(m) => {
                let mut w = Writer::new(KIND_LSTM);
                w.u32(m.n_inputs);
                w.u32(m.n_classes);
                w.u32(m.layer_sizes.len());
                for &l in &m.layer_sizes {
                    w.u32(l);
                }
                w.vec(&m.params);
                w.0
            }
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (mut r, kind) = Reader::open(bytes)?;
        let model = match kind {
            KIND_PCA => {
                let mean = r.vec()?;
                let components = r.matrix()?;
                let explained_variance = r.vec()?;
                if components.iter().any(|c| c.len() != mean.len()) || explained_variance.len() != components.len() {
                    return Err(shape_err("inconsistent PCA shapes"));
                }
                Model::Pca(PcaModel {
                    mean,
                    components,
                    explained_variance,
                })
            }
            KIND_SCALER => {
                let min = r.vec()?;
                let max = r.vec()?;
                if min.len() != max.len() {
                    return Err(shape_err("inconsistent scaler shapes"));
                }
                Model::Scaler(MinMaxScaler { min, max })
            }
            KIND_ELM => {
                let n_classes = r.u32()?;
                let input_weights = r.matrix()?;
                let biases = r.vec()?;
                let output_weights = r.matrix()?;
                if biases.len() != input_weights.len()
                    || output_weights.len() != biases.len()
                    || output_weights.iter().any(|o| o.len() != n_classes)
                {
                    return Err(shape_err("inconsistent ELM shapes"));
                }
                Model::Elm(ElmModel {
                    input_weights,
                    biases,
                    output_weights,
                    n_classes,
                })
            }
            KIND_LSTM => {
                let n_inputs = r.u32()?;
                let n_classes = r.u32()?;
                let n_layers = r.u32()?;
                if n_layers > 64 {
                    return Err(shape_err("too many LSTM layers"));
                }
                let layers = (0..n_layers).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
                let params = r.vec()?;
                if LstmModel::param_count(n_inputs, &layers, n_classes) != Some(params.len()) {
                    return Err(shape_err("LSTM parameter count mismatch"));
                }
                let mut m = LstmModel::new(n_inputs, &layers, n_classes, 0).map_err(|e| shape_err(&e.to_string()))?;
                m.params = params;
                Model::Lstm(m)
            }
            other => return Err(shape_err(&format!("unknown kind {other}"))),
        };
        r.finish()?;
        Ok(model)
    }
}

/// Encodes feature blocks for the on-disk cache.
pub fn encode_blocks(blocks: &[FeatureBlock]) -> Vec<u8> {
    let mut w = Writer::new(KIND_BLOCKS);
    w.u32(blocks.len());
    for b in blocks {
        w.str(&b.trial_id);
        w.str(&b.modality);
        w.str(&b.method);
        w.u32(b.names.len());
        for n in &b.names {
            w.str(n);
        }
        w.f64s(&b.values);
    }
    w.0
}

pub fn decode_blocks(bytes: &[u8]) -> Result<Vec<FeatureBlock>> {
    let (mut r, kind) = Reader::open(bytes)?;
    if kind != KIND_BLOCKS {
        return Err(shape_err(&format!("kind {kind} is not a feature cache")));
    }
    let n = r.u32()?;
    let mut out = Vec::new();
    for _ in 0..n {
        let trial_id = r.str()?;
        let modality = r.str()?;
        let method = r.str()?;
        let k = r.u32()?;
        let mut names = Vec::new();
        for _ in 0..k {
            names.push(r.str()?);
        }
        let values = r.f64s(k)?;
        out.push(FeatureBlock::new(trial_id, modality, method, names, values));
    }
    r.finish()?;
    Ok(out)
}
