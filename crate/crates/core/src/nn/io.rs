//! Binary model container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "MLPB" | version: u32 | n_layers: u32 | dims: u32 x (n_layers + 1)
//!        | head: u8 (0 = sigmoid, 1 = identity) | leaky slope: f64
//!        | n_sites: u32 | sites: u32 x n_sites
//!        | parameters: f64 x param_count   (canonical order)
//! then zero or more sections until end of file:
//!        tag: [u8; 4] | length: u64 | payload: length bytes
//! ```
//!
//! Known section tags are `ZCOV` (covariance state, see
//! [`CovarianceState`](crate::policy::CovarianceState)) and `GENB`
//! (generator metadata, see [`Generator`](crate::gan::Generator)).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::mlp::{DenseLayer, MlpModel, OutputHead};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MLPB";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub tag: [u8; 4],
    pub payload: Vec<u8>,
}

pub fn write_container<W: Write>(w: &mut W, model: &MlpModel, sections: &[Section]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let dims = model.dims();
    write_u32(w, model.layers().len())?;
    for d in &dims {
        write_u32(w, *d)?;
    }
    w.write_all(&[match model.head() {
        OutputHead::Sigmoid => 0u8,
        OutputHead::Identity => 1u8,
    }])?;
    w.write_all(&model.slope().to_le_bytes())?;
    write_u32(w, model.dropout_sites().len())?;
    for s in model.dropout_sites() {
        write_u32(w, *s)?;
    }
    for p in model.params() {
        w.write_all(&p.to_le_bytes())?;
    }
    for section in sections {
        w.write_all(&section.tag)?;
        w.write_all(&(section.payload.len() as u64).to_le_bytes())?;
        w.write_all(&section.payload)?;
    }
    Ok(())
}

pub fn read_container<R: Read>(r: &mut R) -> Result<(MlpModel, Vec<Section>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n_layers = read_u32(r)? as usize;
    if n_layers == 0 || n_layers > 1024 {
        return Err(Error::Format(format!("implausible layer count {n_layers}")));
    }
    let dims = (0..=n_layers)
        .map(|_| read_u32(r).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut head = [0u8; 1];
    r.read_exact(&mut head)
        .map_err(|_| Error::Format("truncated header".into()))?;
    let head = match head[0] {
        0 => OutputHead::Sigmoid,
        1 => OutputHead::Identity,
        other => return Err(Error::Format(format!("unknown head {other}"))),
    };
    let slope = read_f64(r)?;
    let n_sites = read_u32(r)? as usize;
    if n_sites > n_layers {
        return Err(Error::Format(format!("implausible site count {n_sites}")));
    }
    let sites = (0..n_sites)
        .map(|_| read_u32(r).map(|s| s as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut layers = Vec::with_capacity(n_layers);
    for w in dims.windows(2) {
        let (inputs, outputs) = (w[0], w[1]);
        let weights = read_f64s(r, inputs * outputs)?;
        let bias = read_f64s(r, outputs)?;
        layers.push(DenseLayer::from_parts(inputs, outputs, weights, bias)?);
    }
    let model = MlpModel::from_layers(layers, head, slope, sites)
        .map_err(|e| Error::Format(e.to_string()))?;

    let mut sections = Vec::new();
    loop {
        let mut tag = [0u8; 4];
        match read_exact_or_eof(r, &mut tag)? {
            false => break,
            true => {
                let len = read_u64(r)? as usize;
                let mut payload = Vec::new();
                r.take(len as u64).read_to_end(&mut payload)?;
                if payload.len() != len {
                    return Err(Error::Format(format!(
                        "section {} truncated",
                        String::from_utf8_lossy(&tag)
                    )));
                }
                sections.push(Section { tag, payload });
            }
        }
    }
    Ok((model, sections))
}

pub fn save_model(path: impl AsRef<Path>, model: &MlpModel, sections: &[Section]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_container(&mut w, model, sections)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(MlpModel, Vec<Section>)> {
    let mut r = BufReader::new(File::open(path)?);
    read_container(&mut r)
}

fn read_exact_or_eof<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(false);
            }
            return Err(Error::Format("truncated section tag".into()));
        }
        filled += n;
    }
    Ok(true)
}

fn write_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("unexpected end of data".into()))?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("unexpected end of data".into()))?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| read_f64(r)).collect()
}

/// Little-endian payload builder for sections.
#[derive(Debug, Default)]
pub struct PayloadWriter(Vec<u8>);

impl PayloadWriter {
    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.0.push(v);
        self
    }
    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.0.extend_from_slice(&v.to_le_bytes());
        self
    }
    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.0.extend_from_slice(&v.to_le_bytes());
        self
    }
    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.0.extend_from_slice(&v.to_le_bytes());
        self
    }
    pub fn f64s(&mut self, vs: &[f64]) -> &mut Self {
        for v in vs {
            self.f64(*v);
        }
        self
    }
    pub fn finish(self, tag: &[u8; 4]) -> Section {
        Section {
            tag: *tag,
            payload: self.0,
        }
    }
}
