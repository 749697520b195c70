//! EMBGEOM1 embedding dumps and their JSON manifests.
//!
//! Layout of the binary file (all integers and floats little-endian):
//!
//! | bytes  | content                          |
//! |--------|----------------------------------|
//! | 0..8   | ASCII magic `EMBGEOM1`           |
//! | 8..12  | u32 version, always 1            |
//! | 12..16 | u32 dtype, 0 = float32           |
//! | 16..20 | u32 dim                          |
//! | 20..28 | u64 count                        |
//! | 28..   | count * dim f32 values, row-major |
//!
//! The manifest lives next to the dump at `<dump path>.manifest.json` and binds
//! contiguous row spans to language codes.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"EMBGEOM1";
pub const VERSION: u32 = 1;
pub const DTYPE_F32: u32 = 0;
pub const HEADER_LEN: usize = 28;
pub const MANIFEST_SUFFIX: &str = ".manifest.json";

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic {found:?}, expected \"EMBGEOM1\"")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("unsupported dtype code {0}, only float32 (0) is supported")]
    UnsupportedDtype(u32),
    #[error("header truncated: {found} bytes, need {HEADER_LEN}")]
    TruncatedHeader { found: usize },
    #[error("payload truncated: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },
    #[error("{extra} unexpected bytes after payload")]
    TrailingBytes { extra: u64 },
    #[error("dimension must be positive")]
    ZeroDim,
    #[error("dump holds no rows")]
    Empty,
    #[error("data length {len} is not a multiple of dim {dim}")]
    Shape { len: usize, dim: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("row {row} has zero norm")]
    ZeroNormRow { row: usize },
    #[error("manifest dim {manifest} does not match dump dim {dump}")]
    DimMismatch { dump: usize, manifest: usize },
    #[error("manifest does not describe this set: {0}")]
    ManifestMismatch(String),
    #[error("invalid manifest: {}", join_violations(.0))]
    InvalidManifest(Vec<ManifestViolation>),
    #[error("cannot parse manifest {}: {source}", path.display())]
    ManifestParse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn join_violations(v: &[ManifestViolation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// A single broken manifest invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ManifestViolation {
    #[error("no languages listed")]
    NoLanguages,
    #[error("dim must be positive")]
    ZeroDim,
    #[error("language code {0:?} appears more than once")]
    DuplicateCode(String),
    #[error("language {code:?} has an empty span")]
    EmptySpan { code: String },
    #[error("gap before {code:?}: rows {expected}..{found} are unassigned")]
    Gap {
        code: String,
        expected: usize,
        found: usize,
    },
    #[error("span of {code:?} starts at {start} but previous span ends at {previous_end}")]
    Overlap {
        code: String,
        start: usize,
        previous_end: usize,
    },
    #[error("spans cover {covered} rows, dump has {n_rows}")]
    Coverage { covered: usize, n_rows: usize },
    #[error("sentence-level dump: {code:?} has {count} rows, expected {expected}")]
    UnequalCounts {
        code: String,
        count: usize,
        expected: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageSpan {
    pub code: String,
    pub start_row: usize,
    pub count: usize,
}

impl LanguageSpan {
    pub fn new(code: impl Into<String>, start_row: usize, count: usize) -> Self {
        Self {
            code: code.into(),
            start_row,
            count,
        }
    }

    pub fn rows(&self) -> std::ops::Range<usize> {
        self.start_row..self.start_row + self.count
    }
}

/// Lays out consecutive spans from `(code, count)` pairs.
pub fn contiguous_spans<S: AsRef<str>>(counts: &[(S, usize)]) -> Vec<LanguageSpan> {
    let mut start = 0;
    counts
        .iter()
        .map(|(code, n)| {
            let span = LanguageSpan::new(code.as_ref(), start, *n);
            start += n;
            span
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Mean,
    Cls,
    /// One row per token; rows are not aligned across languages.
    None,
}

impl Pooling {
    pub fn is_sentence_level(self) -> bool {
        !matches!(self, Pooling::None)
    }
}

/// Hidden layer the vectors were taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Last,
    Index(i64),
}

impl Serialize for Layer {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Layer::Last => s.serialize_str("last"),
            Layer::Index(i) => s.serialize_i64(*i),
        }
    }
}

impl<'de> Deserialize<'de> for Layer {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(i) => Ok(Layer::Index(i)),
            Raw::Str(s) if s == "last" => Ok(Layer::Last),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "layer must be an integer or \"last\", got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Layer::Last => f.write_str("last"),
            Layer::Index(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub model_id: String,
    pub layer: Layer,
    pub pooling: Pooling,
    pub dim: usize,
    pub languages: Vec<LanguageSpan>,
}

impl Manifest {
    pub fn n_rows(&self) -> usize {
        self.languages.iter().map(|l| l.count).sum()
    }
}

fn span_violations(languages: &[LanguageSpan], n_rows: usize) -> Vec<ManifestViolation> {
    let mut out = Vec::new();
    if languages.is_empty() {
        out.push(ManifestViolation::NoLanguages);
        return out;
    }
    let mut seen = std::collections::HashSet::new();
    let mut cursor = 0usize;
    for span in languages {
        if !seen.insert(span.code.as_str()) {
            out.push(ManifestViolation::DuplicateCode(span.code.clone()));
        }
        if span.count == 0 {
            out.push(ManifestViolation::EmptySpan {
                code: span.code.clone(),
            });
        }
        if span.start_row > cursor {
            out.push(ManifestViolation::Gap {
                code: span.code.clone(),
                expected: cursor,
                found: span.start_row,
            });
        } else if span.start_row < cursor {
            out.push(ManifestViolation::Overlap {
                code: span.code.clone(),
                start: span.start_row,
                previous_end: cursor,
            });
        }
        cursor = cursor.max(span.start_row.saturating_add(span.count));
    }
    if cursor != n_rows {
        out.push(ManifestViolation::Coverage {
            covered: cursor,
            n_rows,
        });
    }
    out
}

/// Checks every manifest invariant against a dump of `n_rows` rows.
/// An empty result means the manifest is valid.
pub fn validate_manifest(manifest: &Manifest, n_rows: usize) -> Vec<ManifestViolation> {
    let mut out = Vec::new();
    if manifest.dim == 0 {
        out.push(ManifestViolation::ZeroDim);
    }
    out.extend(span_violations(&manifest.languages, n_rows));
    if manifest.pooling.is_sentence_level() {
        if let Some(first) = manifest.languages.first() {
            for span in &manifest.languages[1..] {
                if span.count != first.count {
                    out.push(ManifestViolation::UnequalCounts {
                        code: span.code.clone(),
                        count: span.count,
                        expected: first.count,
                    });
                }
            }
        }
    }
    out
}

/// Row-major f32 embedding matrix with a language label for every row.
///
/// Construction validates shape, finiteness, non-zero row norms and the
/// language spans; a constructed set is immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    data: Vec<f32>,
    labels: Vec<u32>,
    languages: Vec<LanguageSpan>,
}

impl EmbeddingSet {
    pub fn new(
        dim: usize,
        data: Vec<f32>,
        languages: Vec<LanguageSpan>,
    ) -> Result<Self, DumpError> {
        check_rows(dim, &data)?;
        let count = data.len() / dim;
        let violations = span_violations(&languages, count);
        if !violations.is_empty() {
            return Err(DumpError::InvalidManifest(violations));
        }
        let mut labels = vec![0u32; count];
        for (li, span) in languages.iter().enumerate() {
            labels[span.rows()].fill(li as u32);
        }
        Ok(Self {
            dim,
            data,
            labels,
            languages,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.labels.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Language index of every row, indexing into [`Self::languages`].
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn languages(&self) -> &[LanguageSpan] {
        &self.languages
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.languages.iter().map(|l| l.code.as_str())
    }

    pub fn language_index(&self, code: &str) -> Option<usize> {
        self.languages.iter().position(|l| l.code == code)
    }

    pub fn span(&self, code: &str) -> Option<&LanguageSpan> {
        self.languages.iter().find(|l| l.code == code)
    }

    /// Contiguous rows of one language.
    pub fn language_data(&self, span: &LanguageSpan) -> &[f32] {
        &self.data[span.start_row * self.dim..(span.start_row + span.count) * self.dim]
    }

    /// Manifest describing this set with the given provenance.
    pub fn manifest(
        &self,
        model_id: impl Into<String>,
        layer: Layer,
        pooling: Pooling,
    ) -> Manifest {
        Manifest {
            model_id: model_id.into(),
            layer,
            pooling,
            dim: self.dim,
            languages: self.languages.clone(),
        }
    }
}

fn check_rows(dim: usize, data: &[f32]) -> Result<(), DumpError> {
    if dim == 0 {
        return Err(DumpError::ZeroDim);
    }
    if !data.len().is_multiple_of(dim) {
        return Err(DumpError::Shape {
            len: data.len(),
            dim,
        });
    }
    if data.is_empty() {
        return Err(DumpError::Empty);
    }
    for (row, values) in data.chunks_exact(dim).enumerate() {
        if let Some(col) = values.iter().position(|v| !v.is_finite()) {
            return Err(DumpError::NonFinite { row, col });
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(DumpError::ZeroNormRow { row });
        }
    }
    Ok(())
}

/// Sidecar manifest path for a dump.
pub fn manifest_path(dump: &Path) -> PathBuf {
    let mut s = dump.as_os_str().to_owned();
    s.push(MANIFEST_SUFFIX);
    PathBuf::from(s)
}

/// Encodes header and payload.
pub fn encode(dim: usize, data: &[f32]) -> Result<Vec<u8>, DumpError> {
    check_rows(dim, data)?;
    let dim32 = u32::try_from(dim).map_err(|_| DumpError::Shape {
        len: data.len(),
        dim,
    })?;
    let count = (data.len() / dim) as u64;
    let mut out = Vec::with_capacity(HEADER_LEN + data.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&DTYPE_F32.to_le_bytes());
    out.extend_from_slice(&dim32.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Byte order of the (possibly simulated) host doing the decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HostOrder {
    Little,
    /// Reads words in big-endian order and swaps them, which is what a
    /// little-endian decode compiles to on a big-endian machine.
    Big,
}

impl HostOrder {
    #[inline]
    fn u32(self, b: [u8; 4]) -> u32 {
        match self {
            HostOrder::Little => u32::from_le_bytes(b),
            HostOrder::Big => u32::from_be_bytes(b).swap_bytes(),
        }
    }

    #[inline]
    fn u64(self, b: [u8; 8]) -> u64 {
        match self {
            HostOrder::Little => u64::from_le_bytes(b),
            HostOrder::Big => u64::from_be_bytes(b).swap_bytes(),
        }
    }
}

/// Decodes an EMBGEOM1 byte buffer into `(dim, data)`. Row values are
/// validated (finite, non-zero norm).
pub fn decode(bytes: &[u8]) -> Result<(usize, Vec<f32>), DumpError> {
    decode_as(bytes, HostOrder::Little)
}

pub fn decode_as(bytes: &[u8], host: HostOrder) -> Result<(usize, Vec<f32>), DumpError> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 8 && &bytes[..8] != MAGIC {
            return Err(DumpError::BadMagic {
                found: bytes[..8].to_vec(),
            });
        }
        return Err(DumpError::TruncatedHeader { found: bytes.len() });
    }
    if &bytes[..8] != MAGIC {
        return Err(DumpError::BadMagic {
            found: bytes[..8].to_vec(),
        });
    }
    let word = |at: usize| host.u32(bytes[at..at + 4].try_into().unwrap());
    let version = word(8);
    if version != VERSION {
        return Err(DumpError::UnsupportedVersion(version));
    }
    let dtype = word(12);
    if dtype != DTYPE_F32 {
        return Err(DumpError::UnsupportedDtype(dtype));
    }
    let dim = word(16) as usize;
    let count = host.u64(bytes[20..28].try_into().unwrap());
    if dim == 0 {
        return Err(DumpError::ZeroDim);
    }
    if count == 0 {
        return Err(DumpError::Empty);
    }
    let payload = &bytes[HEADER_LEN..];
    let expected = count
        .checked_mul(dim as u64)
        .and_then(|n| n.checked_mul(4))
        .unwrap_or(u64::MAX);
    let found = payload.len() as u64;
    if found < expected {
        return Err(DumpError::TruncatedPayload { expected, found });
    }
    if found > expected {
        return Err(DumpError::TrailingBytes {
            extra: found - expected,
        });
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_bits(host.u32(c.try_into().unwrap())))
        .collect();
    check_rows(dim, &data)?;
    Ok((dim, data))
}

fn io_err(path: &Path, source: std::io::Error) -> DumpError {
    if source.kind() == std::io::ErrorKind::NotFound {
        DumpError::NotFound(path.to_path_buf())
    } else {
        DumpError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Writes raw rows and a manifest, validating both first.
pub fn write_dump(
    path: &Path,
    manifest: &Manifest,
    dim: usize,
    data: &[f32],
) -> Result<(), DumpError> {
    if manifest.dim != dim {
        return Err(DumpError::DimMismatch {
            dump: dim,
            manifest: manifest.dim,
        });
    }
    let bytes = encode(dim, data)?;
    let violations = validate_manifest(manifest, data.len() / dim);
    if !violations.is_empty() {
        return Err(DumpError::InvalidManifest(violations));
    }
    let json = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    fs::write(path, bytes).map_err(|e| io_err(path, e))?;
    let mpath = manifest_path(path);
    fs::write(&mpath, json).map_err(|e| io_err(&mpath, e))
}

/// Writes `set` to `path` and its manifest to the sidecar path.
pub fn write_embeddings(
    set: &EmbeddingSet,
    manifest: &Manifest,
    path: &Path,
) -> Result<(), DumpError> {
    if manifest.languages != set.languages {
        return Err(DumpError::ManifestMismatch(
            "language spans differ from the set".into(),
        ));
    }
    write_dump(path, manifest, set.dim, &set.data)
}

pub fn read_manifest(path: &Path) -> Result<Manifest, DumpError> {
    let text = fs::read(path).map_err(|e| io_err(path, e))?;
    serde_json::from_slice(&text).map_err(|source| DumpError::ManifestParse {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads and validates a dump and its sidecar manifest.
pub fn read_embeddings(path: &Path) -> Result<(EmbeddingSet, Manifest), DumpError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let (dim, data) = decode(&bytes)?;
    let manifest = read_manifest(&manifest_path(path))?;
    if manifest.dim != dim {
        return Err(DumpError::DimMismatch {
            dump: dim,
            manifest: manifest.dim,
        });
    }
    let violations = validate_manifest(&manifest, data.len() / dim);
    if !violations.is_empty() {
        return Err(DumpError::InvalidManifest(violations));
    }
    let set = EmbeddingSet::new(dim, data, manifest.languages.clone())?;
    Ok((set, manifest))
}
