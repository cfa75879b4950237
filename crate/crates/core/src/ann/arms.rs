use std::path::Path;

use crate::error::{check_dim, Error, Result};

/// Arm embeddings keyed by id, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSet {
    dim: usize,
    ids: Vec<u64>,
    data: Vec<f64>,
}

impl ArmSet {
    pub fn new(dim: usize, ids: Vec<u64>, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Contract("arm dimension must be positive".into()));
        }
        check_dim("arm data", ids.len() * dim, data.len())?;
        Ok(Self { dim, ids, data })
    }

    /// Ids `0..n` for row-major `data`.
    pub fn from_rows(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::Contract("arm data is not a whole number of rows".into()));
        }
        let ids = (0..(data.len() / dim) as u64).collect();
        Self::new(dim, ids, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Embedding of the arm at position `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &[f64])> {
        self.ids.iter().copied().zip(self.data.chunks(self.dim))
    }
}

/// Reads `id,e0,...,e{d-1}` CSV (header required).
pub fn read_arm_embeddings(path: impl AsRef<Path>) -> Result<ArmSet> {
    let path = path.as_ref();
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("id") || headers.len() < 2 {
        return Err(parse_err(1, "header must be id,e0,...".into()));
    }
    for (j, h) in headers.iter().skip(1).enumerate() {
        if h != format!("e{j}") {
            return Err(parse_err(1, format!("expected column e{j}, found {h}")));
        }
    }
    let dim = headers.len() - 1;
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record?;
        if record.len() != dim + 1 {
            return Err(parse_err(line, format!("expected {} fields, found {}", dim + 1, record.len())));
        }
        let id: u64 = record[0]
            .trim()
            .parse()
            .map_err(|e| parse_err(line, format!("id: {e}")))?;
        ids.push(id);
        for field in record.iter().skip(1) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| parse_err(line, format!("value {field:?}: {e}")))?;
            data.push(v);
        }
    }
    ArmSet::new(dim, ids, data)
}

pub fn write_arm_embeddings(path: impl AsRef<Path>, arms: &ArmSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["id".to_string()];
    header.extend((0..arms.dim()).map(|j| format!("e{j}")));
    w.write_record(&header)?;
    for (id, v) in arms.iter() {
        let mut rec = vec![id.to_string()];
        rec.extend(v.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
