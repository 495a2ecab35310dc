//! Dense tensor files.
//!
//! Layout: a fixed 96-byte header followed by the little-endian row-major
//! payload. The header starts with the 7-byte magic `TSPREP\x01`, then the
//! ASCII text `<dtype> <rank> <dim0> ... <dimN>` (dtype one of `f32`, `f64`,
//! `i64`), padded with spaces to byte 95, and ends with `\n`.

use std::fs;
use std::path::Path;

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 7] = b"TSPREP\x01";
pub const HEADER_LEN: usize = 96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F32,
    F64,
    I64,
}

impl DType {
    pub fn code(self) -> &'static str {
        match self {
            DType::F32 => "f32",
            DType::F64 => "f64",
            DType::I64 => "i64",
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 | DType::I64 => 8,
        }
    }
}

impl std::str::FromStr for DType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(DType::F32),
            "f64" => Ok(DType::F64),
            "i64" => Ok(DType::I64),
            other => Err(Error::Config(format!("unknown dtype {other:?}; expected f32, f64 or i64"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    I64(Vec<i64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTensor {
    pub dims: Vec<usize>,
    pub data: TensorData,
}

impl RawTensor {
    pub fn dtype(&self) -> DType {
        match self.data {
            TensorData::F32(_) => DType::F32,
            TensorData::F64(_) => DType::F64,
            TensorData::I64(_) => DType::I64,
        }
    }

    fn floats(dims: Vec<usize>, values: impl Iterator<Item = f64>, dtype: DType) -> Self {
        let data = match dtype {
            DType::F32 => TensorData::F32(values.map(|v| v as f32).collect()),
            DType::F64 => TensorData::F64(values.collect()),
            DType::I64 => TensorData::I64(values.map(|v| v as i64).collect()),
        };
        RawTensor { dims, data }
    }

    pub fn from_array3(a: &Array3<f64>, dtype: DType) -> Self {
        let (n, s, c) = a.dim();
        RawTensor::floats(vec![n, s, c], a.iter().copied(), dtype)
    }

    pub fn from_array2(a: &Array2<f64>, dtype: DType) -> Self {
        let (n, l) = a.dim();
        RawTensor::floats(vec![n, l], a.iter().copied(), dtype)
    }

    pub fn from_lengths(length: &[usize]) -> Self {
        RawTensor { dims: vec![length.len()], data: TensorData::I64(length.iter().map(|&l| l as i64).collect()) }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match &self.data {
            TensorData::F32(v) => v.iter().map(|&x| f64::from(x)).collect(),
            TensorData::F64(v) => v.clone(),
            TensorData::I64(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }

    pub fn to_array3(&self) -> Result<Array3<f64>> {
        match self.dims[..] {
            [n, s, c] => Array3::from_shape_vec((n, s, c), self.to_f64()).map_err(|e| Error::Shape(e.to_string())),
            _ => Err(Error::Shape(format!("expected rank 3, found dims {:?}", self.dims))),
        }
    }

    pub fn to_array2(&self) -> Result<Array2<f64>> {
        match self.dims[..] {
            [n, l] => Array2::from_shape_vec((n, l), self.to_f64()).map_err(|e| Error::Shape(e.to_string())),
            _ => Err(Error::Shape(format!("expected rank 2, found dims {:?}", self.dims))),
        }
    }

    pub fn to_lengths(&self) -> Result<Vec<usize>> {
        match (&self.data, self.dims.len()) {
            (TensorData::I64(v), 1) => v
                .iter()
                .map(|&l| usize::try_from(l).map_err(|_| Error::Shape(format!("negative length {l}"))))
                .collect(),
            _ => Err(Error::Shape("lengths must be a rank-1 i64 tensor".into())),
        }
    }

    fn payload(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.dims.iter().product::<usize>() * self.dtype().size());
        match &self.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::I64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut text = format!("{} {}", self.dtype().code(), self.dims.len());
        for d in &self.dims {
            text.push_str(&format!(" {d}"));
        }
        let mut out = Vec::with_capacity(HEADER_LEN);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(text.as_bytes());
        assert!(out.len() < HEADER_LEN, "tensor header overflow");
        out.resize(HEADER_LEN - 1, b' ');
        out.push(b'\n');
        out.extend(self.payload());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Shape(format!("invalid tensor file: {msg}"));
        if bytes.len() < HEADER_LEN || &bytes[..MAGIC.len()] != MAGIC {
            return Err(bad("bad magic"));
        }
        if bytes[HEADER_LEN - 1] != b'\n' {
            return Err(bad("header not terminated"));
        }
        let text = std::str::from_utf8(&bytes[MAGIC.len()..HEADER_LEN - 1]).map_err(|_| bad("header is not ASCII"))?;
        let mut tokens = text.split_ascii_whitespace();
        let dtype: DType = tokens.next().ok_or_else(|| bad("missing dtype"))?.parse().map_err(|_| bad("unknown dtype"))?;
        let rank: usize = tokens.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("missing rank"))?;
        let dims = tokens.map(|t| t.parse::<usize>().map_err(|_| bad("bad dimension"))).collect::<Result<Vec<_>>>()?;
        if dims.len() != rank {
            return Err(bad("rank does not match dimension count"));
        }
        let count: usize = dims.iter().product();
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != count * dtype.size() {
            return Err(bad("payload size does not match header"));
        }
        let data = match dtype {
            DType::F32 => TensorData::F32(payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()),
            DType::F64 => TensorData::F64(payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()),
            DType::I64 => TensorData::I64(payload.chunks_exact(8).map(|c| i64::from_le_bytes(c.try_into().unwrap())).collect()),
        };
        Ok(RawTensor { dims, data })
    }

    /// NumPy `.npy` (format 1.0) encoding of the same tensor.
    pub fn encode_npy(&self) -> Vec<u8> {
        let descr = match self.dtype() {
            DType::F32 => "<f4",
            DType::F64 => "<f8",
            DType::I64 => "<i8",
        };
        let shape = match self.dims.len() {
            1 => format!("({},)", self.dims[0]),
            _ => format!("({})", self.dims.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")),
        };
        let mut header = format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': {shape}, }}");
        let unpadded = 10 + header.len() + 1;
        header.push_str(&" ".repeat((64 - unpadded % 64) % 64));
        header.push('\n');
        let mut out = b"\x93NUMPY\x01\x00".to_vec();
        out.extend_from_slice(&(header.len() as u16).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend(self.payload());
        out
    }
}

pub fn write_tensor(path: &Path, t: &RawTensor) -> Result<()> {
    fs::write(path, t.encode())?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<RawTensor> {
    let bytes = fs::read(path)?;
    RawTensor::decode(&bytes).map_err(|e| Error::TensorFile { path: path.to_path_buf(), msg: e.to_string() })
}
