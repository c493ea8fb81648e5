//! On-disk formats: the `KCHM` binary tensor container plus the JSON
//! documents (homography, layout, manifest, report).
//!
//! Tensor container layout, all integers little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "KCHM"
//! 4       4     version (u32) = 1
//! 8       1     dtype: 0 = f32 scores, 1 = u16 label map
//! 9       3     reserved, zero
//! 12      4     C (u32), 1 for label maps
//! 16      4     H (u32)
//! 20      4     W (u32)
//! 24      ...   C*H*W values, channel-major then row-major
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Result};
use crate::heatmap::{ClassMap, HeatmapTensor, DEFAULT_STRIDE};

pub const MAGIC: [u8; 4] = *b"KCHM";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Dtype {
    F32 = 0,
    U16Labels = 1,
}

impl Dtype {
    fn size(self) -> u64 {
        match self {
            Dtype::F32 => 4,
            Dtype::U16Labels => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorHeader {
    pub dtype: Dtype,
    pub classes: u32,
    pub height: u32,
    pub width: u32,
}

impl TensorHeader {
    pub fn payload_len(&self) -> u64 {
        self.classes as u64 * self.height as u64 * self.width as u64 * self.dtype.size()
    }

    fn to_bytes(self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..8].copy_from_slice(&VERSION.to_le_bytes());
        b[8] = self.dtype as u8;
        b[12..16].copy_from_slice(&self.classes.to_le_bytes());
        b[16..20].copy_from_slice(&self.height.to_le_bytes());
        b[20..24].copy_from_slice(&self.width.to_le_bytes());
        b
    }
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

pub fn parse_header(bytes: &[u8]) -> Result<TensorHeader, FormatError> {
    if bytes.len() >= 4 && bytes[0..4] != MAGIC {
        return Err(FormatError::BadMagic(bytes[0..4].try_into().unwrap()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::MalformedHeader("truncated header"));
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let dtype = match bytes[8] {
        0 => Dtype::F32,
        1 => Dtype::U16Labels,
        other => return Err(FormatError::UnsupportedDtype(other)),
    };
    if bytes[9..12] != [0, 0, 0] {
        return Err(FormatError::MalformedHeader("reserved bytes must be zero"));
    }
    let header = TensorHeader {
        dtype,
        classes: u32_at(bytes, 12),
        height: u32_at(bytes, 16),
        width: u32_at(bytes, 20),
    };
    if header.classes == 0 || header.height == 0 || header.width == 0 {
        return Err(FormatError::MalformedHeader("zero dimension"));
    }
    if dtype == Dtype::U16Labels && header.classes != 1 {
        return Err(FormatError::MalformedHeader("label maps must have C = 1"));
    }
    Ok(header)
}

/// A decoded tensor file.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorPayload {
    Scores(HeatmapTensor),
    Labels(ClassMap),
}

impl TensorPayload {
    fn kind(&self) -> &'static str {
        match self {
            TensorPayload::Scores(_) => "score tensor",
            TensorPayload::Labels(_) => "label map",
        }
    }
}

pub fn encode_scores(t: &HeatmapTensor) -> Vec<u8> {
    let header = TensorHeader {
        dtype: Dtype::F32,
        classes: t.classes() as u32,
        height: t.height() as u32,
        width: t.width() as u32,
    };
    let mut out = Vec::with_capacity(HEADER_LEN + t.scores().len() * 4);
    out.extend_from_slice(&header.to_bytes());
    for v in t.scores() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn encode_labels(m: &ClassMap) -> Vec<u8> {
    let header = TensorHeader {
        dtype: Dtype::U16Labels,
        classes: 1,
        height: m.height as u32,
        width: m.width as u32,
    };
    let mut out = Vec::with_capacity(HEADER_LEN + m.labels.len() * 2);
    out.extend_from_slice(&header.to_bytes());
    for v in &m.labels {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes a tensor file. Score tensors come back with the default stride.
pub fn decode_tensor(bytes: &[u8]) -> Result<TensorPayload, FormatError> {
    let header = parse_header(bytes)?;
    let payload = &bytes[HEADER_LEN..];
    let expected = header.payload_len();
    if payload.len() as u64 != expected {
        return Err(FormatError::SizeMismatch {
            expected,
            actual: payload.len() as u64,
        });
    }
    let (c, h, w) = (
        header.classes as usize,
        header.height as usize,
        header.width as usize,
    );
    match header.dtype {
        Dtype::F32 => {
            let mut scores = Vec::with_capacity(c * h * w);
            for (i, chunk) in payload.chunks_exact(4).enumerate() {
                let v = f32::from_le_bytes(chunk.try_into().unwrap());
                if !v.is_finite() {
                    return Err(FormatError::NonFinite(i));
                }
                scores.push(v);
            }
            let t = HeatmapTensor::new(c, h, w, DEFAULT_STRIDE, scores)
                .map_err(|_| FormatError::MalformedHeader("inconsistent dimensions"))?;
            Ok(TensorPayload::Scores(t))
        }
        Dtype::U16Labels => Ok(TensorPayload::Labels(ClassMap {
            height: h,
            width: w,
            labels: payload
                .chunks_exact(2)
                .map(|b| u16::from_le_bytes([b[0], b[1]]))
                .collect(),
        })),
    }
}

pub fn decode_scores(bytes: &[u8]) -> Result<HeatmapTensor, FormatError> {
    match decode_tensor(bytes)? {
        TensorPayload::Scores(t) => Ok(t),
        other => Err(FormatError::WrongKind {
            expected: "score tensor",
            found: other.kind(),
        }),
    }
}

pub fn decode_labels(bytes: &[u8]) -> Result<ClassMap, FormatError> {
    match decode_tensor(bytes)? {
        TensorPayload::Labels(m) => Ok(m),
        other => Err(FormatError::WrongKind {
            expected: "label map",
            found: other.kind(),
        }),
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Loads a heatmap file. Label maps are expanded to one-hot scores over
/// `classes` channels.
pub fn read_heatmaps(path: &Path, classes: usize, stride: usize) -> Result<HeatmapTensor> {
    let bytes = read_bytes(path)?;
    match decode_tensor(&bytes)? {
        TensorPayload::Scores(mut t) => {
            if t.classes() != classes {
                return Err(Error::ClassCountMismatch {
                    expected: classes,
                    got: t.classes(),
                });
            }
            t.stride = stride;
            Ok(t)
        }
        TensorPayload::Labels(m) => HeatmapTensor::one_hot(&m, classes, stride),
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("in-memory JSON serialization");
    out.push(b'\n');
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, &to_json_bytes(value))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub id: String,
    pub heatmaps: PathBuf,
    pub gt_homography: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
}

/// A dataset listing. Relative paths resolve against the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub frames: Vec<ManifestFrame>,
    pub frame_size: [usize; 2],
}

impl Manifest {
    pub fn resolve(base: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }
}

/// Serializes non-finite floats as `null` and reads `null` back as `+inf`.
pub(crate) mod nonfinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }

    pub mod vec {
        use serde::ser::SerializeSeq;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&x.is_finite().then_some(*x))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Ok(Vec::<Option<f64>>::deserialize(d)?
                .into_iter()
                .map(|x| x.unwrap_or(f64::INFINITY))
                .collect())
        }
    }
}
