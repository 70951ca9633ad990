//! Binary model files.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic            4   "LGNN"
//! version          u16 1
//! quant scheme     u8  1 = symmetric int16, one scale per block
//! reserved         u8  0
//! N P H M          4 x u32
//! map kind id      u8
//! param count      u8
//! params           f64 x count
//! input mode       u8
//! input divisors   u32 count, f64 x count
//! reservoir divs   u32 count, f64 x count
//! weight block 1   f64 scale, u32 count = (P+1)H, i16 x count
//! weight block 2   f64 scale, u32 count = (H+1)M, i16 x count
//! seed             u64
//! trained at       u64 Unix seconds
//! schema id        u16 length, UTF-8 bytes
//! crc32            u32 over every preceding byte
//! ```

use std::fs;
use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::chaos::MapKind;
use crate::head::HeadWeights;
use crate::pipeline::{Architecture, Model, ModelMeta};
use crate::reservoir::{InputScaler, MapSpec, ReservoirScaler, ScaleMode};

pub const MAGIC: [u8; 4] = *b"LGNN";
pub const VERSION: u16 = 1;
pub const QUANT_SYMMETRIC_I16: u8 = 1;
const Q_MAX: f64 = 32767.0;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model file version {0}")]
    Version(u16),
    #[error("unsupported quantization scheme {0}")]
    QuantScheme(u8),
    #[error("model file truncated at byte {0}")]
    Truncated(usize),
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("{0} trailing byte(s) after model payload")]
    Trailing(usize),
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error("refusing to save non-finite weight in {0}")]
    NonFinite(&'static str),
    #[error("model file I/O: {0}")]
    Io(#[from] std::io::Error),
}

type Result<T> = std::result::Result<T, ModelFileError>;

/// A quantized weight block, `w ~ q * scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quantized {
    pub scale: f64,
    pub values: Vec<i16>,
}

/// Symmetric quantization with `scale = max|w| / 32767` (1 for an all-zero block).
pub fn quantize(w: &[f64]) -> Option<Quantized> {
    if w.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let max = w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let scale = if max > 0.0 { max / Q_MAX } else { 1.0 };
    let values = w.iter().map(|v| (v / scale).round().clamp(-Q_MAX, Q_MAX) as i16).collect();
    Some(Quantized { scale, values })
}

pub fn dequantize(q: &Quantized) -> Vec<f64> {
    q.values.iter().map(|&v| f64::from(v) * q.scale).collect()
}

/// Bytes taken by the two quantized weight arrays, `((P+1)H + (H+1)M) * 2`.
pub fn weight_payload_len(arch: Architecture) -> usize {
    ((arch.reservoir + 1) * arch.hidden + (arch.hidden + 1) * arch.classes) * 2
}

/// The same model with both weight blocks passed through the quantizer.
pub fn quantized_model(model: &Model) -> Result<Model> {
    let mut m = model.clone();
    m.head.w1 = dequantize(&quantize(&model.head.w1).ok_or(ModelFileError::NonFinite("first weight block"))?);
    m.head.w2 = dequantize(&quantize(&model.head.w2).ok_or(ModelFileError::NonFinite("second weight block"))?);
    Ok(m)
}

fn u32_len(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| ModelFileError::Malformed(format!("{what} too large")))
}

pub fn encode(model: &Model) -> Result<Vec<u8>> {
    model.check().map_err(|e| ModelFileError::Malformed(e.to_string()))?;
    let a = model.arch;
    let mut b = Vec::with_capacity(256 + weight_payload_len(a));
    b.extend_from_slice(&MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    b.push(QUANT_SYMMETRIC_I16);
    b.push(0);
    for d in [a.inputs, a.reservoir, a.hidden, a.classes] {
        b.extend_from_slice(&u32_len(d, "dimension")?.to_le_bytes());
    }
    b.push(model.spec.kind.id());
    let n_params = u8::try_from(model.spec.params.len())
        .map_err(|_| ModelFileError::Malformed("too many map parameters".into()))?;
    b.push(n_params);
    let put_f64s = |b: &mut Vec<u8>, v: &[f64]| v.iter().for_each(|x| b.extend_from_slice(&x.to_le_bytes()));
    put_f64s(&mut b, &model.spec.params);
    b.push(model.input_scaler.mode.id());
    b.extend_from_slice(&u32_len(model.input_scaler.divisors.len(), "input scaler")?.to_le_bytes());
    put_f64s(&mut b, &model.input_scaler.divisors);
    b.extend_from_slice(&u32_len(model.reservoir_scaler.divisors.len(), "reservoir scaler")?.to_le_bytes());
    put_f64s(&mut b, &model.reservoir_scaler.divisors);
    for (what, w) in [("first weight block", &model.head.w1), ("second weight block", &model.head.w2)] {
        let q = quantize(w).ok_or(ModelFileError::NonFinite(what))?;
        b.extend_from_slice(&q.scale.to_le_bytes());
        b.extend_from_slice(&u32_len(q.values.len(), what)?.to_le_bytes());
        q.values.iter().for_each(|v| b.extend_from_slice(&v.to_le_bytes()));
    }
    b.extend_from_slice(&model.meta.seed.to_le_bytes());
    b.extend_from_slice(&model.meta.trained_unix.to_le_bytes());
    let id = model.meta.schema_id.as_bytes();
    let id_len = u16::try_from(id.len()).map_err(|_| ModelFileError::Malformed("schema id too long".into()))?;
    b.extend_from_slice(&id_len.to_le_bytes());
    b.extend_from_slice(id);
    let crc = crc32fast::hash(&b);
    b.extend_from_slice(&crc.to_le_bytes());
    Ok(b)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(ModelFileError::Truncated(self.buf.len()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const K: usize>(&mut self) -> Result<[u8; K]> {
        Ok(self.take(K)?.try_into().expect("slice length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        self.check_room(n, 8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    /// Fails early on counts that cannot fit in the rest of the buffer.
    fn check_room(&self, n: usize, size: usize) -> Result<()> {
        match n.checked_mul(size) {
            Some(bytes) if bytes <= self.buf.len() - self.pos => Ok(()),
            _ => Err(ModelFileError::Truncated(self.buf.len())),
        }
    }

    fn block(&mut self, expected: usize, what: &str) -> Result<Quantized> {
        let scale = self.f64()?;
        let n = self.u32()? as usize;
        if n != expected {
            return Err(ModelFileError::Malformed(format!("{what} has {n} entries, expected {expected}")));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(ModelFileError::Malformed(format!("{what} scale {scale}")));
        }
        self.check_room(n, 2)?;
        let values = (0..n).map(|_| self.array().map(i16::from_le_bytes)).collect::<Result<_>>()?;
        Ok(Quantized { scale, values })
    }
}

pub fn decode(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < 8 {
        return Err(if bytes.len() >= 4 && bytes[..4] != MAGIC {
            ModelFileError::BadMagic
        } else {
            ModelFileError::Truncated(bytes.len())
        });
    }
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.array::<4>()? != MAGIC {
        return Err(ModelFileError::BadMagic);
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(ModelFileError::Version(version));
    }
    let scheme = r.u8()?;
    if scheme != QUANT_SYMMETRIC_I16 {
        return Err(ModelFileError::QuantScheme(scheme));
    }
    if bytes.len() < 12 {
        return Err(ModelFileError::Truncated(bytes.len()));
    }
    let body = &bytes[..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(ModelFileError::Checksum { stored, computed });
    }
    let mut r = Reader { buf: body, pos: r.pos };
    r.u8()?;
    let dims = [r.u32()?, r.u32()?, r.u32()?, r.u32()?].map(|d| d as usize);
    let arch = Architecture::new(dims[0], dims[1], dims[2], dims[3])
        .map_err(|e| ModelFileError::Malformed(e.to_string()))?;
    let kind_id = r.u8()?;
    let kind = MapKind::from_id(kind_id).ok_or_else(|| ModelFileError::Malformed(format!("unknown map kind id {kind_id}")))?;
    let n_params = r.u8()? as usize;
    let params = r.f64s(n_params)?;
    let mode_id = r.u8()?;
    let mode = ScaleMode::from_id(mode_id).ok_or_else(|| ModelFileError::Malformed(format!("unknown scale mode {mode_id}")))?;
    let n_in = r.u32()? as usize;
    let input_divisors = r.f64s(n_in)?;
    let n_res = r.u32()? as usize;
    let reservoir_divisors = r.f64s(n_res)?;
    let q1 = r.block((arch.reservoir + 1) * arch.hidden, "first weight block")?;
    let q2 = r.block((arch.hidden + 1) * arch.classes, "second weight block")?;
    let seed = r.u64()?;
    let trained_unix = r.u64()?;
    let id_len = r.u16()? as usize;
    let schema_id = String::from_utf8(r.take(id_len)?.to_vec())
        .map_err(|_| ModelFileError::Malformed("schema id is not UTF-8".into()))?;
    if r.pos != body.len() {
        return Err(ModelFileError::Trailing(body.len() - r.pos));
    }
    let model = Model {
        arch,
        spec: MapSpec::unchecked(kind, params),
        input_scaler: InputScaler { divisors: input_divisors, mode },
        reservoir_scaler: ReservoirScaler { divisors: reservoir_divisors },
        head: HeadWeights {
            inputs: arch.reservoir + 1,
            hidden: arch.hidden,
            outputs: arch.classes,
            w1: dequantize(&q1),
            w2: dequantize(&q2),
        },
        meta: ModelMeta { schema_id, seed, trained_unix },
    };
    model.check().map_err(|e| ModelFileError::Malformed(e.to_string()))?;
    Ok(model)
}

/// Writes to a temporary sibling and renames, so a failed save leaves no
/// partial file behind.
pub fn save(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(model)?;
    let tmp = path.with_extension("lgnn.tmp");
    let written = fs::File::create(&tmp).and_then(|mut f| {
        f.write_all(&bytes)?;
        f.sync_all()
    });
    if let Err(e) = written.and_then(|()| fs::rename(&tmp, path)) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Model> {
    decode(&fs::read(path)?)
}
