//! Feature storage: the MIAF binary frame-matrix format, the NDJSON manifest,
//! and in-memory datasets built from them.
//!
//! A MIAF file is a little-endian binary blob:
//!
//! ```text
//! offset  size      field
//! 0       4         magic  b"MIAF"
//! 4       4         version (u32) = 1
//! 8       4         m, frame count (u32)
//! 12      4         q, dimensionality (u32)
//! 16      4*m*q     float32 payload, row-major (frame-major)
//! ```
//!
//! Identity metadata (utterance and speaker IDs, membership) lives in the
//! manifest, never in the feature file.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MIAF";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

/// Ground-truth (or pseudo) membership of an utterance or speaker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Membership {
    Seen,
    Unseen,
    #[default]
    Unknown,
}

impl Membership {
    pub fn as_str(self) -> &'static str {
        match self {
            Membership::Seen => "seen",
            Membership::Unseen => "unseen",
            Membership::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Membership {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Membership {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seen" => Ok(Membership::Seen),
            "unseen" => Ok(Membership::Unseen),
            "unknown" => Ok(Membership::Unknown),
            other => Err(Error::Validation(format!(
                "unknown membership token {other:?} (expected seen, unseen or unknown)"
            ))),
        }
    }
}

/// Row-major `m × q` matrix of frame representations.
#[derive(Debug, Clone, PartialEq)]
pub struct Frames {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Frames {
    /// Builds a frame matrix, rejecting shape mismatches, `q == 0` and
    /// non-finite entries.
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("dimensionality q must be at least 1".into()));
        }
        if data.len() != rows * dim {
            return Err(Error::Validation(format!(
                "frame data has {} values, expected {rows}x{dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value at frame {}, coordinate {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Frames { rows, dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Validation(format!(
                    "frame {i} has {} coordinates, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Frames::new(rows.len(), dim, data)
    }

    /// Number of frames (m).
    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    /// Dimensionality (q).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rounds every value through `f32`, the storage precision.
    pub fn quantized(&self) -> Frames {
        Frames {
            rows: self.rows,
            dim: self.dim,
            data: self.data.iter().map(|&v| v as f32 as f64).collect(),
        }
    }
}

/// One utterance's frame-level representations plus its identity.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub utterance_id: String,
    pub speaker_id: String,
    pub frames: Frames,
}

impl FeatureSequence {
    pub fn new(utterance_id: impl Into<String>, speaker_id: impl Into<String>, frames: Frames) -> Self {
        FeatureSequence {
            utterance_id: utterance_id.into(),
            speaker_id: speaker_id.into(),
            frames,
        }
    }
}

fn encode(frames: &Frames) -> Result<Vec<u8>> {
    let m = u32::try_from(frames.len()).map_err(|_| Error::Validation("frame count exceeds u32".into()))?;
    let q = u32::try_from(frames.dim()).map_err(|_| Error::Validation("dimensionality exceeds u32".into()))?;
    let mut buf = Vec::with_capacity(HEADER_LEN + frames.as_slice().len() * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&m.to_le_bytes());
    buf.extend_from_slice(&q.to_le_bytes());
    for (i, &v) in frames.as_slice().iter().enumerate() {
        let stored = v as f32;
        if !stored.is_finite() {
            return Err(Error::Validation(format!(
                "value {v} at frame {}, coordinate {} is not representable as float32",
                i / frames.dim(),
                i % frames.dim()
            )));
        }
        buf.extend_from_slice(&stored.to_le_bytes());
    }
    Ok(buf)
}

/// Writes `seq.frames` in the MIAF layout. Values are stored as `f32`, so the
/// round trip is exact for sequences whose values are `f32`-representable
/// (see [`Frames::quantized`]).
pub fn write_feature_file(seq: &FeatureSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf = encode(&seq.frames)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<(usize, usize)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(
            path,
            format!(
                "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
                bytes.len()
            ),
        ));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::format(path, "bad magic, expected \"MIAF\""));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(4);
    if version != FORMAT_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported version {version} (this reader supports {FORMAT_VERSION})"),
        ));
    }
    let (m, q) = (word(8) as usize, word(12) as usize);
    if q == 0 {
        return Err(Error::format(path, "dimensionality q is 0"));
    }
    Ok((m, q))
}

/// Reads only the header and returns `(m, q)`.
pub fn read_feature_header(path: impl AsRef<Path>) -> Result<(usize, usize)> {
    let path = path.as_ref();
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut head = Vec::with_capacity(HEADER_LEN);
    file.by_ref()
        .take(HEADER_LEN as u64)
        .read_to_end(&mut head)
        .map_err(|e| Error::io(path, e))?;
    parse_header(path, &head)
}

/// Reads a MIAF file into 64-bit frames.
pub fn read_feature_file(path: impl AsRef<Path>) -> Result<Frames> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (m, q) = parse_header(path, &bytes)?;
    let payload = &bytes[HEADER_LEN..];
    let expected = m
        .checked_mul(q)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(path, "header shape overflows"))?;
    if payload.len() < expected {
        return Err(Error::format(
            path,
            format!(
                "truncated payload: {} bytes, header declares {m}x{q} ({expected} bytes)",
                payload.len()
            ),
        ));
    }
    if payload.len() > expected {
        return Err(Error::format(
            path,
            format!("{} trailing bytes after the {m}x{q} payload", payload.len() - expected),
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Frames::new(m, q, data).map_err(|e| Error::format(path, e.to_string()))
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub utterance_id: String,
    pub speaker_id: String,
    /// Feature file path, relative to the manifest's directory.
    pub path: String,
    #[serde(default)]
    pub membership: Membership,
}

/// Optional metadata line: `{"meta": {"q": 768, ...}}`. Free-form fields
/// other than `q` are preserved but not interpreted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// An index of feature files with identities and membership labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    /// Directory relative paths resolve against.
    pub root: PathBuf,
    pub meta: Option<ManifestMeta>,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Deserialize)]
struct RawEntry {
    utterance_id: String,
    speaker_id: String,
    path: String,
    #[serde(default)]
    membership: Option<String>,
}

impl Manifest {
    /// Parses NDJSON manifest text. Blank lines are skipped; unknown fields
    /// are ignored. Does not touch the filesystem.
    pub fn parse(text: &str, root: impl Into<PathBuf>) -> Result<Manifest> {
        let mut meta = None;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let value: serde_json::Value = serde_json::from_str(line)
                .map_err(|e| Error::Validation(format!("manifest line {}: invalid JSON: {e}", lineno + 1)))?;
            if let Some(m) = value.get("meta") {
                if meta.is_some() {
                    return Err(Error::Validation(format!(
                        "manifest line {}: second metadata line",
                        lineno + 1
                    )));
                }
                meta = Some(
                    serde_json::from_value(m.clone())
                        .map_err(|e| Error::Validation(format!("manifest line {}: bad metadata: {e}", lineno + 1)))?,
                );
                continue;
            }
            let raw: RawEntry = serde_json::from_value(value)
                .map_err(|e| Error::Validation(format!("manifest line {}: {e}", lineno + 1)))?;
            let membership = match raw.membership.as_deref() {
                None => Membership::Unknown,
                Some(tok) => tok.parse().map_err(|_| {
                    Error::Validation(format!(
                        "manifest line {}: unknown membership token {tok:?}",
                        lineno + 1
                    ))
                })?,
            };
            entries.push(ManifestEntry {
                utterance_id: raw.utterance_id,
                speaker_id: raw.speaker_id,
                path: raw.path,
                membership,
            });
        }
        let manifest = Manifest {
            root: root.into(),
            meta,
            entries,
        };
        manifest.check_unique_ids()?;
        Ok(manifest)
    }

    fn check_unique_ids(&self) -> Result<()> {
        let mut seen = HashSet::new();
        let mut dups = Vec::new();
        for e in &self.entries {
            if !seen.insert(e.utterance_id.as_str()) && !dups.contains(&e.utterance_id) {
                dups.push(e.utterance_id.clone());
            }
        }
        if dups.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "duplicate utterance_id(s): {}",
                dups.join(", ")
            )))
        }
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Declared dimensionality, if any.
    pub fn declared_q(&self) -> Option<usize> {
        self.meta.as_ref().and_then(|m| m.q)
    }

    /// Checks that every path resolves to a MIAF file and that all headers
    /// agree on q (with the metadata line's q when present). Returns that q,
    /// or `None` for an empty manifest without metadata.
    pub fn validate_files(&self) -> Result<Option<usize>> {
        let mut q = self.declared_q();
        for e in &self.entries {
            let (_, file_q) = read_feature_header(self.resolve(e))?;
            match q {
                None => q = Some(file_q),
                Some(expected) if expected != file_q => {
                    return Err(Error::Validation(format!(
                        "utterance {}: feature file has q={file_q}, manifest expects q={expected}",
                        e.utterance_id
                    )))
                }
                _ => {}
            }
        }
        Ok(q)
    }

    /// Partitions entries by speaker, ordered by first appearance. Entry order
    /// within a group follows the manifest.
    pub fn group_by_speaker(&self) -> Vec<(&str, Vec<&ManifestEntry>)> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut groups: Vec<(&str, Vec<&ManifestEntry>)> = Vec::new();
        for e in &self.entries {
            let slot = *index.entry(e.speaker_id.as_str()).or_insert_with(|| {
                groups.push((e.speaker_id.as_str(), Vec::new()));
                groups.len() - 1
            });
            groups[slot].1.push(e);
        }
        groups
    }

    pub fn to_ndjson(&self) -> Result<String> {
        let mut out = String::new();
        if let Some(meta) = &self.meta {
            out.push_str(&serde_json::to_string(&serde_json::json!({ "meta": meta }))?);
            out.push('\n');
        }
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_ndjson()?).map_err(|e| Error::io(path, e))
    }
}

/// Parses a manifest file and validates IDs and feature-file headers.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest = Manifest::parse(&text, root)?;
    manifest.validate_files()?;
    Ok(manifest)
}

/// A speaker's utterances, borrowed from a [`Dataset`].
#[derive(Debug, Clone)]
pub struct SpeakerGroup<'a> {
    pub speaker_id: &'a str,
    pub sequences: Vec<&'a FeatureSequence>,
    /// Shared membership of the speaker's entries; `Unknown` when they disagree.
    pub membership: Membership,
}

impl SpeakerGroup<'_> {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }
}

/// A manifest with every feature file loaded. Immutable after load.
#[derive(Debug, Clone)]
pub struct Dataset {
    manifest: Manifest,
    sequences: Vec<FeatureSequence>,
    q: Option<usize>,
    by_id: HashMap<String, usize>,
}

impl Dataset {
    pub fn open(manifest_path: impl AsRef<Path>) -> Result<Dataset> {
        Dataset::load(load_manifest(manifest_path)?)
    }

    /// Loads every feature file of `manifest` in manifest order.
    pub fn load(manifest: Manifest) -> Result<Dataset> {
        let mut sequences = Vec::with_capacity(manifest.len());
        for e in &manifest.entries {
            let frames = read_feature_file(manifest.resolve(e))?;
            sequences.push(FeatureSequence::new(&e.utterance_id, &e.speaker_id, frames));
        }
        Dataset::from_parts(manifest, sequences)
    }

    /// Builds a dataset from in-memory sequences. `sequences[i]` must belong
    /// to `manifest.entries[i]`.
    pub fn from_parts(manifest: Manifest, sequences: Vec<FeatureSequence>) -> Result<Dataset> {
        manifest.check_unique_ids()?;
        if manifest.len() != sequences.len() {
            return Err(Error::Validation(format!(
                "{} manifest entries but {} sequences",
                manifest.len(),
                sequences.len()
            )));
        }
        let mut q = manifest.declared_q();
        for (e, s) in manifest.entries.iter().zip(&sequences) {
            if e.utterance_id != s.utterance_id || e.speaker_id != s.speaker_id {
                return Err(Error::Validation(format!(
                    "sequence {} does not match manifest entry {}",
                    s.utterance_id, e.utterance_id
                )));
            }
            match q {
                None => q = Some(s.frames.dim()),
                Some(expected) if expected != s.frames.dim() => {
                    return Err(Error::Validation(format!(
                        "utterance {}: q={} differs from dataset q={expected}",
                        s.utterance_id,
                        s.frames.dim()
                    )))
                }
                _ => {}
            }
        }
        let by_id = manifest
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.utterance_id.clone(), i))
            .collect();
        Ok(Dataset {
            manifest,
            sequences,
            q,
            by_id,
        })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn sequences(&self) -> &[FeatureSequence] {
        &self.sequences
    }

    pub fn entries(&self) -> impl Iterator<Item = (&ManifestEntry, &FeatureSequence)> {
        self.manifest.entries.iter().zip(&self.sequences)
    }

    pub fn dim(&self) -> Option<usize> {
        self.q
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn get(&self, utterance_id: &str) -> Option<&FeatureSequence> {
        self.by_id.get(utterance_id).map(|&i| &self.sequences[i])
    }

    pub fn membership(&self, utterance_id: &str) -> Option<Membership> {
        self.by_id
            .get(utterance_id)
            .map(|&i| self.manifest.entries[i].membership)
    }

    pub fn speaker_groups(&self) -> Vec<SpeakerGroup<'_>> {
        self.manifest
            .group_by_speaker()
            .into_iter()
            .map(|(speaker_id, entries)| {
                let first = entries[0].membership;
                let membership = if entries.iter().all(|e| e.membership == first) {
                    first
                } else {
                    Membership::Unknown
                };
                SpeakerGroup {
                    speaker_id,
                    sequences: entries
                        .iter()
                        .map(|e| &self.sequences[self.by_id[&e.utterance_id]])
                        .collect(),
                    membership,
                }
            })
            .collect()
    }

    pub fn speaker_group(&self, speaker_id: &str) -> Option<SpeakerGroup<'_>> {
        self.speaker_groups().into_iter().find(|g| g.speaker_id == speaker_id)
    }
}
