//! File formats.
//!
//! * Events: CSV with header `seq_id,t,dim` (both ids 1-based), plus a
//!   sidecar JSON `{"D": int, "T": float, "num_seqs": int}` next to it with
//!   the `.json` extension. The sidecar may carry an optional `sources` array
//!   with one source tag (or `null`) per sequence.
//! * Models: JSON `{"D": int, "w": float, "mu": [...], "A": [[...]]}` with `A`
//!   row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HawkesModel;
use crate::sequence::{Event, EventSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    #[serde(rename = "D")]
    pub dim: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub num_seqs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sources: Option<Vec<Option<u64>>>,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Write events and the sidecar header. All sequences must share `D` and `T`.
pub fn write_sequences<W: Write, S: Write>(seqs: &[EventSequence], csv_out: W, sidecar_out: S) -> Result<()> {
    let first = seqs.first().ok_or_else(|| Error::EmptyData("no sequences to write".into()))?;
    let (dim, horizon) = (first.dim(), first.horizon());
    if seqs.iter().any(|s| s.dim() != dim || s.horizon() != horizon) {
        return Err(Error::InvalidParameter("sequences must share dimension and horizon".into()));
    }
    let mut w = csv::Writer::from_writer(csv_out);
    w.write_record(["seq_id", "t", "dim"])?;
    for (k, s) in seqs.iter().enumerate() {
        for e in s.events() {
            w.write_record([(k + 1).to_string(), e.t.to_string(), (e.dim + 1).to_string()])?;
        }
    }
    w.flush()?;
    let tags: Vec<Option<u64>> = seqs.iter().map(|s| s.source_id()).collect();
    let sidecar = Sidecar {
        dim,
        horizon,
        num_seqs: seqs.len(),
        sources: tags.iter().any(|t| t.is_some()).then_some(tags),
    };
    serde_json::to_writer(sidecar_out, &sidecar)?;
    Ok(())
}

pub fn read_sequences<R: Read, S: Read>(csv_in: R, sidecar_in: S) -> Result<Vec<EventSequence>> {
    let sidecar: Sidecar = serde_json::from_reader(sidecar_in)?;
    if let Some(src) = &sidecar.sources {
        if src.len() != sidecar.num_seqs {
            return Err(Error::Malformed("sidecar sources do not match num_seqs".into()));
        }
    }
    let mut events: Vec<Vec<Event>> = vec![Vec::new(); sidecar.num_seqs];
    let mut r = csv::Reader::from_reader(csv_in);
    let headers = r.headers()?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["seq_id", "t", "dim"] {
        return Err(Error::Malformed(format!("expected header seq_id,t,dim, found {headers:?}")));
    }
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse_err = |what: &str| Error::Malformed(format!("row {}: bad {what}", line + 2));
        let seq: usize = rec.get(0).and_then(|v| v.trim().parse().ok()).ok_or_else(|| parse_err("seq_id"))?;
        let t: f64 = rec.get(1).and_then(|v| v.trim().parse().ok()).ok_or_else(|| parse_err("t"))?;
        let dim: usize = rec.get(2).and_then(|v| v.trim().parse().ok()).ok_or_else(|| parse_err("dim"))?;
        if seq == 0 || seq > sidecar.num_seqs {
            return Err(Error::Malformed(format!("row {}: seq_id {seq} outside 1..={}", line + 2, sidecar.num_seqs)));
        }
        if dim == 0 {
            return Err(Error::Malformed(format!("row {}: dimensions are 1-based", line + 2)));
        }
        events[seq - 1].push(Event::new(t, dim - 1));
    }
    events
        .into_iter()
        .enumerate()
        .map(|(k, ev)| {
            let tag = sidecar.sources.as_ref().and_then(|s| s[k]);
            EventSequence::new(ev, sidecar.dim, sidecar.horizon, tag)
        })
        .collect()
}

pub fn save_sequences(seqs: &[EventSequence], csv_path: &Path) -> Result<()> {
    let csv = BufWriter::new(File::create(csv_path)?);
    let side = BufWriter::new(File::create(sidecar_path(csv_path))?);
    write_sequences(seqs, csv, side)
}

pub fn load_sequences(csv_path: &Path) -> Result<Vec<EventSequence>> {
    let side = File::open(sidecar_path(csv_path))?;
    let csv = File::open(csv_path)?;
    read_sequences(BufReader::new(csv), BufReader::new(side))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(rename = "D")]
    pub dim: usize,
    pub w: f64,
    pub mu: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
}

impl From<&HawkesModel> for ModelFile {
    fn from(m: &HawkesModel) -> Self {
        let a = m.infectivity();
        Self {
            dim: m.dim(),
            w: m.decay(),
            mu: m.mu().to_vec(),
            a: (0..m.dim()).map(|i| a.row(i).iter().copied().collect()).collect(),
        }
    }
}

impl TryFrom<ModelFile> for HawkesModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.mu.len() != f.dim {
            return Err(Error::DimensionMismatch(format!("D = {} but mu has {} entries", f.dim, f.mu.len())));
        }
        HawkesModel::from_rows(f.mu, &f.a, f.w)
    }
}

pub fn model_to_json(m: &HawkesModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ModelFile::from(m))?)
}

pub fn model_from_json(s: &str) -> Result<HawkesModel> {
    let f: ModelFile = serde_json::from_str(s)?;
    f.try_into()
}

pub fn load_model(path: &Path) -> Result<HawkesModel> {
    model_from_json(&std::fs::read_to_string(path)?)
}

pub fn save_model(m: &HawkesModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_json(m)?)?;
    Ok(())
}
