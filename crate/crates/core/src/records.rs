//! Per-item, per-candidate probe values, decoupled from the model that
//! produced them.
//!
//! Two on-disk encodings carry the same content:
//!
//! * text: a JSON header line, one JSON line per item with hex-float
//!   values, and a trailer line with the item count and a SHA-256 of every
//!   preceding byte;
//! * binary: magic `TVRC`, a `u32` version, the probe table, per-item
//!   little-endian `f64` blocks, and a trailing SHA-256.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hexfloat;
use crate::probe::{ProbeId, ProbeKind};

pub const FORMAT_VERSION: u32 = 1;
pub const BINARY_MAGIC: &[u8; 4] = b"TVRC";

/// Row-major `rows x cols` matrix of probe values; rows are candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ValueMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidRecords(format!(
                "matrix data length {} != {rows} x {cols}",
                data.len()
            )));
        }
        Ok(ValueMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidRecords("ragged matrix row".into()));
        }
        let n = rows.len();
        ValueMatrix::new(n, cols, rows.into_iter().flatten().collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Values of one probe column across candidates.
    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn select_columns(&self, cols: &[usize]) -> ValueMatrix {
        let data = (0..self.rows)
            .flat_map(|r| cols.iter().map(move |&c| self.get(r, c)))
            .collect();
        ValueMatrix {
            rows: self.rows,
            cols: cols.len(),
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemRecord {
    pub item_id: String,
    pub label: Option<usize>,
    pub values: ValueMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRecordSet {
    dataset_name: String,
    probes: Vec<ProbeId>,
    items: Vec<ItemRecord>,
}

impl ProbeRecordSet {
    /// Validates and canonicalises: columns are reordered so that `probes`
    /// is sorted.
    pub fn new(
        dataset_name: impl Into<String>,
        probes: Vec<ProbeId>,
        items: Vec<ItemRecord>,
    ) -> Result<Self> {
        for p in &probes {
            p.validate_shape()
                .map_err(|e| Error::InvalidRecords(e.to_string()))?;
        }
        let mut order: Vec<usize> = (0..probes.len()).collect();
        order.sort_by_key(|&i| probes[i]);
        let sorted: Vec<ProbeId> = order.iter().map(|&i| probes[i]).collect();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidRecords(format!("duplicate probe {}", w[0])));
        }
        let identity = order.iter().enumerate().all(|(a, &b)| a == b);

        let mut seen = HashSet::new();
        let mut canon = Vec::with_capacity(items.len());
        for item in items {
            if !seen.insert(item.item_id.clone()) {
                return Err(Error::InvalidRecords(format!(
                    "duplicate item_id `{}`",
                    item.item_id
                )));
            }
            if item.values.rows() == 0 {
                return Err(Error::InvalidRecords(format!(
                    "item `{}` has no candidates",
                    item.item_id
                )));
            }
            if item.values.cols() != probes.len() {
                return Err(Error::InvalidRecords(format!(
                    "item `{}` has {} columns, expected {}",
                    item.item_id,
                    item.values.cols(),
                    probes.len()
                )));
            }
            if item.values.data().iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidRecords(format!(
                    "item `{}` has a non-finite value",
                    item.item_id
                )));
            }
            if let Some(l) = item.label {
                if l >= item.values.rows() {
                    return Err(Error::LabelOutOfRange {
                        item_id: item.item_id.clone(),
                        label: l,
                        n_candidates: item.values.rows(),
                    });
                }
            }
            let values = if identity {
                item.values
            } else {
                item.values.select_columns(&order)
            };
            canon.push(ItemRecord { values, ..item });
        }
        Ok(ProbeRecordSet {
            dataset_name: dataset_name.into(),
            probes: sorted,
            items: canon,
        })
    }

    pub fn dataset_name(&self) -> &str {
        &self.dataset_name
    }

    pub fn probes(&self) -> &[ProbeId] {
        &self.probes
    }

    pub fn items(&self) -> &[ItemRecord] {
        &self.items
    }

    pub fn n_probes(&self) -> usize {
        self.probes.len()
    }

    pub fn column_of(&self, probe: &ProbeId) -> Option<usize> {
        self.probes.binary_search(probe).ok()
    }

    /// Labels of every item, failing on the first unlabeled one.
    pub fn labels(&self) -> Result<Vec<usize>> {
        self.items
            .iter()
            .map(|i| i.label.ok_or_else(|| Error::Unlabeled(i.item_id.clone())))
            .collect()
    }

    pub fn random_guess(&self) -> f64 {
        if self.items.is_empty() {
            return 0.0;
        }
        self.items
            .iter()
            .map(|i| 1.0 / i.values.rows() as f64)
            .sum::<f64>()
            / self.items.len() as f64
    }

    /// Items whose ids are in `ids`, kept in record order.
    pub fn subset(&self, ids: &HashSet<String>) -> ProbeRecordSet {
        ProbeRecordSet {
            dataset_name: self.dataset_name.clone(),
            probes: self.probes.clone(),
            items: self
                .items
                .iter()
                .filter(|i| ids.contains(&i.item_id))
                .cloned()
                .collect(),
        }
    }

    /// Items whose ids are not in `ids`.
    pub fn without(&self, ids: &HashSet<String>) -> ProbeRecordSet {
        ProbeRecordSet {
            dataset_name: self.dataset_name.clone(),
            probes: self.probes.clone(),
            items: self
                .items
                .iter()
                .filter(|i| !ids.contains(&i.item_id))
                .cloned()
                .collect(),
        }
    }

    /// Restricts columns to probes of one kind.
    pub fn of_kind(&self, kind: ProbeKind) -> ProbeRecordSet {
        let cols: Vec<usize> = (0..self.probes.len())
            .filter(|&c| self.probes[c].kind == kind)
            .collect();
        self.with_columns(&cols)
    }

    pub fn with_columns(&self, cols: &[usize]) -> ProbeRecordSet {
        ProbeRecordSet {
            dataset_name: self.dataset_name.clone(),
            probes: cols.iter().map(|&c| self.probes[c]).collect(),
            items: self
                .items
                .iter()
                .map(|i| ItemRecord {
                    item_id: i.item_id.clone(),
                    label: i.label,
                    values: i.values.select_columns(cols),
                })
                .collect(),
        }
    }

    /// Same records with every value negated.
    pub fn negated(&self) -> ProbeRecordSet {
        ProbeRecordSet {
            dataset_name: self.dataset_name.clone(),
            probes: self.probes.clone(),
            items: self
                .items
                .iter()
                .map(|i| ItemRecord {
                    item_id: i.item_id.clone(),
                    label: i.label,
                    values: ValueMatrix {
                        rows: i.values.rows,
                        cols: i.values.cols,
                        data: i.values.data.iter().map(|v| -v).collect(),
                    },
                })
                .collect(),
        }
    }

    /// Replaces labels with those of `labels` (keyed by item_id).
    pub fn relabel(&self, labels: &HashMap<String, Option<usize>>) -> Result<ProbeRecordSet> {
        let items = self
            .items
            .iter()
            .map(|i| {
                let label = *labels.get(&i.item_id).ok_or_else(|| {
                    Error::InvalidInput(format!("item `{}` missing from dataset", i.item_id))
                })?;
                Ok(ItemRecord {
                    label,
                    ..i.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ProbeRecordSet::new(self.dataset_name.clone(), self.probes.clone(), items)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Text,
    Binary,
}

#[derive(Serialize, Deserialize)]
struct TextHeader {
    dataset: String,
    probes: Vec<ProbeId>,
    #[serde(default = "default_version")]
    version: u32,
}

fn default_version() -> u32 {
    FORMAT_VERSION
}

#[derive(Serialize, Deserialize)]
struct TextItem {
    item_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
    values: Vec<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct TrailerBody {
    n_items: usize,
    sha256: String,
}

#[derive(Serialize, Deserialize)]
struct Trailer {
    end: TrailerBody,
}

pub fn encode_text(records: &ProbeRecordSet) -> Vec<u8> {
    let mut out = String::new();
    let header = TextHeader {
        dataset: records.dataset_name.clone(),
        probes: records.probes.clone(),
        version: FORMAT_VERSION,
    };
    out.push_str(&serde_json::to_string(&header).expect("header serialises"));
    out.push('\n');
    for item in &records.items {
        let values = (0..item.values.rows())
            .map(|r| {
                item.values
                    .row(r)
                    .iter()
                    .map(|&v| hexfloat::format_f64(v))
                    .collect()
            })
            .collect();
        let line = TextItem {
            item_id: item.item_id.clone(),
            label: item.label,
            values,
        };
        out.push_str(&serde_json::to_string(&line).expect("item serialises"));
        out.push('\n');
    }
    let digest = hex::encode(Sha256::digest(out.as_bytes()));
    let trailer = Trailer {
        end: TrailerBody {
            n_items: records.items.len(),
            sha256: digest,
        },
    };
    out.push_str(&serde_json::to_string(&trailer).expect("trailer serialises"));
    out.push('\n');
    out.into_bytes()
}

pub fn decode_text(bytes: &[u8]) -> Result<ProbeRecordSet> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| Error::Integrity("record file is not valid UTF-8".into()))?;
    let mut lines = text.split_inclusive('\n');
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Integrity("empty record file".into()))?;
    let header: TextHeader = serde_json::from_str(header_line)
        .map_err(|e| Error::Integrity(format!("bad header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(header.version));
    }
    let mut consumed = header_line.len();
    let mut items = Vec::new();
    let mut trailer = None;
    for (n, line) in lines.enumerate() {
        if line.starts_with("{\"end\"") {
            if !line.ends_with('\n') {
                return Err(Error::Integrity("truncated trailer line".into()));
            }
            let t: Trailer = serde_json::from_str(line)
                .map_err(|e| Error::Integrity(format!("bad trailer: {e}")))?;
            trailer = Some((t, consumed, consumed + line.len()));
            break;
        }
        if !line.ends_with('\n') {
            return Err(Error::Integrity("truncated item line".into()));
        }
        let rec: TextItem = serde_json::from_str(line)
            .map_err(|e| Error::Integrity(format!("item line {}: {e}", n + 2)))?;
        let rows = rec
            .values
            .iter()
            .map(|r| r.iter().map(|v| hexfloat::parse_f64(v)).collect())
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let values = ValueMatrix::from_rows(rows)
            .map_err(|_| Error::InvalidRecords(format!("item `{}`: ragged matrix row", rec.item_id)))?;
        items.push(ItemRecord {
            item_id: rec.item_id,
            label: rec.label,
            values,
        });
        consumed += line.len();
    }
    let (trailer, body_len, total_len) =
        trailer.ok_or_else(|| Error::Integrity("missing trailer (file truncated?)".into()))?;
    if total_len != bytes.len() {
        return Err(Error::Integrity("trailing data after trailer".into()));
    }
    if trailer.end.n_items != items.len() {
        return Err(Error::Integrity(format!(
            "trailer declares {} items, found {}",
            trailer.end.n_items,
            items.len()
        )));
    }
    let digest = hex::encode(Sha256::digest(&bytes[..body_len]));
    if digest != trailer.end.sha256 {
        return Err(Error::Integrity("checksum mismatch".into()));
    }
    ProbeRecordSet::new(header.dataset, header.probes, items)
}

const NONE_INDEX: u64 = u64::MAX;

fn kind_code(k: ProbeKind) -> u8 {
    match k {
        ProbeKind::MlpKey => 0,
        ProbeKind::AttnHeadNorm => 1,
        ProbeKind::LogLikelihood => 2,
    }
}

pub fn encode_binary(records: &ProbeRecordSet) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let name = records.dataset_name.as_bytes();
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name);
    out.extend_from_slice(&(records.probes.len() as u64).to_le_bytes());
    for p in &records.probes {
        out.push(kind_code(p.kind));
        out.extend_from_slice(&p.layer.map_or(NONE_INDEX, |v| v as u64).to_le_bytes());
        out.extend_from_slice(&p.index.map_or(NONE_INDEX, |v| v as u64).to_le_bytes());
    }
    out.extend_from_slice(&(records.items.len() as u64).to_le_bytes());
    for item in &records.items {
        let id = item.item_id.as_bytes();
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id);
        out.extend_from_slice(&item.label.map_or(-1i64, |l| l as i64).to_le_bytes());
        out.extend_from_slice(&(item.values.rows() as u32).to_le_bytes());
        for v in item.values.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Integrity("unexpected end of binary records".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Integrity("invalid UTF-8 string".into()))
    }
}

pub fn decode_binary(bytes: &[u8]) -> Result<ProbeRecordSet> {
    if bytes.len() < 8 || &bytes[..4] != BINARY_MAGIC {
        return Err(Error::Integrity("missing TVRC magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    if bytes.len() < 8 + 32 {
        return Err(Error::Integrity("binary records truncated".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Integrity("checksum mismatch".into()));
    }
    let mut c = Cursor { buf: body, pos: 8 };
    let name = c.string()?;
    let n_probes = c.u64()? as usize;
    let mut probes = Vec::with_capacity(n_probes.min(1 << 24));
    for _ in 0..n_probes {
        let kind = match c.u8()? {
            0 => ProbeKind::MlpKey,
            1 => ProbeKind::AttnHeadNorm,
            2 => ProbeKind::LogLikelihood,
            k => return Err(Error::Integrity(format!("unknown probe kind code {k}"))),
        };
        let opt = |v: u64| (v != NONE_INDEX).then_some(v as usize);
        let layer = opt(c.u64()?);
        let index = opt(c.u64()?);
        probes.push(ProbeId { kind, layer, index });
    }
    let n_items = c.u64()? as usize;
    let mut items = Vec::with_capacity(n_items.min(1 << 20));
    for _ in 0..n_items {
        let item_id = c.string()?;
        let label = i64::from_le_bytes(c.take(8)?.try_into().unwrap());
        let label = (label >= 0).then_some(label as usize);
        let rows = c.u32()? as usize;
        let raw = c.take(rows * n_probes * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        items.push(ItemRecord {
            item_id,
            label,
            values: ValueMatrix::new(rows, n_probes, data)?,
        });
    }
    if c.pos != body.len() {
        return Err(Error::Integrity("trailing bytes in binary records".into()));
    }
    ProbeRecordSet::new(name, probes, items)
}

pub fn write_records(records: &ProbeRecordSet, path: &Path, format: RecordFormat) -> Result<()> {
    let bytes = match format {
        RecordFormat::Text => encode_text(records),
        RecordFormat::Binary => encode_binary(records),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads either encoding, detected from the leading bytes.
pub fn read_records(path: &Path) -> Result<ProbeRecordSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_records(&bytes)
}

pub fn decode_records(bytes: &[u8]) -> Result<ProbeRecordSet> {
    if bytes.starts_with(BINARY_MAGIC) {
        decode_binary(bytes)
    } else {
        decode_text(bytes)
    }
}
