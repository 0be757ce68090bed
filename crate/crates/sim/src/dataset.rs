//! CSV datasets of item embeddings with fixed success probabilities.
//!
//! Header `id,p,f1,...,fd`; one item per row.

use std::path::{Path, PathBuf};

use cascade_core::env::ChunkedDataset;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: header must be `id,p,f1,...,fd`")]
    Header { path: PathBuf },
    #[error("{path}, line {line}: {msg}")]
    Row { path: PathBuf, line: u64, msg: String },
    #[error("{path}: {source}")]
    Model { path: PathBuf, source: cascade_core::Error },
}

pub fn load_dataset(path: &Path, chunk_size: usize) -> Result<ChunkedDataset, DatasetError> {
    let csv_err = |source| DatasetError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    let dim = header.len().saturating_sub(2);
    let header_ok =
        dim >= 1 && &header[0] == "id" && &header[1] == "p" && (1..=dim).all(|i| header[i + 1] == format!("f{i}"));
    if !header_ok {
        return Err(DatasetError::Header {
            path: path.to_path_buf(),
        });
    }
    let mut ids = Vec::new();
    let mut probs = Vec::new();
    let mut features = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let row_err = |msg: String| DatasetError::Row {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let id: u64 = record[0]
            .parse()
            .map_err(|_| row_err(format!("bad id {:?}", &record[0])))?;
        let p: f64 = record[1]
            .parse()
            .map_err(|_| row_err(format!("bad probability {:?}", &record[1])))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(row_err(format!("probability {p} outside [0, 1]")));
        }
        ids.push(id);
        probs.push(p);
        for field in record.iter().skip(2) {
            let v: f64 = field.parse().map_err(|_| row_err(format!("bad feature {field:?}")))?;
            if !v.is_finite() {
                return Err(row_err("non-finite feature".into()));
            }
            features.push(v);
        }
    }
    ChunkedDataset::new(dim, ids, probs, features, chunk_size).map_err(|source| DatasetError::Model {
        path: path.to_path_buf(),
        source,
    })
}
