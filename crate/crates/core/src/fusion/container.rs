//! Binary tensor container: an 8-byte magic, a little-endian u64 header
//! length, a JSON header describing each tensor, then raw little-endian
//! row-major data.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use super::FusionError;

pub const MAGIC: &[u8; 8] = b"UTITNSR1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "f32-le")]
    F32Le,
    #[serde(rename = "f64-le")]
    F64Le,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::F32Le => 4,
            Dtype::F64Le => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    /// Byte offset from the start of the data section.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerHeader {
    pub layout: String,
    pub tensors: Vec<TensorInfo>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dtype: Dtype,
    pub data: ArrayD<f64>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, dtype: Dtype, data: ArrayD<f64>) -> Self {
        NamedTensor { name: name.into(), dtype, data }
    }

    pub fn matrix(name: impl Into<String>, dtype: Dtype, m: &Array2<f64>) -> Self {
        NamedTensor::new(name, dtype, m.clone().into_dyn())
    }

    pub fn to_matrix(&self) -> Result<Array2<f64>, FusionError> {
        self.data
            .clone()
            .into_dimensionality()
            .map_err(|_| FusionError::Container(format!("tensor {} is not 2-D", self.name)))
    }
}

/// Serializes tensors to bytes; `f32-le` tensors are rounded to f32.
pub fn encode_tensors(tensors: &[NamedTensor], meta: serde_json::Value) -> Result<Vec<u8>, FusionError> {
    let mut data = Vec::new();
    let mut infos = Vec::with_capacity(tensors.len());
    for t in tensors {
        infos.push(TensorInfo { name: t.name.clone(), dtype: t.dtype, shape: t.data.shape().to_vec(), offset: data.len() });
        // Logical row-major order regardless of the array's memory layout.
        for &v in t.data.iter() {
            match t.dtype {
                Dtype::F32Le => data.extend_from_slice(&(v as f32).to_le_bytes()),
                Dtype::F64Le => data.extend_from_slice(&v.to_le_bytes()),
            }
        }
    }
    let header = serde_json::to_vec(&ContainerHeader { layout: "row-major".into(), tensors: infos, meta })?;
    let mut out = Vec::with_capacity(16 + header.len() + data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&data);
    Ok(out)
}

pub fn decode_tensors(bytes: &[u8]) -> Result<(Vec<NamedTensor>, serde_json::Value), FusionError> {
    let bad = |msg: &str| FusionError::Container(msg.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing container magic"));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let header_end = 16usize.checked_add(header_len).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated header"))?;
    let header: ContainerHeader = serde_json::from_slice(&bytes[16..header_end])?;
    if header.layout != "row-major" {
        return Err(bad("only row-major layout is supported"));
    }
    let data = &bytes[header_end..];
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for info in header.tensors {
        let count: usize = info.shape.iter().product();
        let width = info.dtype.width();
        let end = count.checked_mul(width).and_then(|n| n.checked_add(info.offset));
        let slice = end.and_then(|e| data.get(info.offset..e)).ok_or_else(|| bad("tensor data out of bounds"))?;
        let values: Vec<f64> = match info.dtype {
            Dtype::F32Le => slice.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect(),
            Dtype::F64Le => slice.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect(),
        };
        let array = ArrayD::from_shape_vec(IxDyn(&info.shape), values).map_err(|e| bad(&e.to_string()))?;
        tensors.push(NamedTensor { name: info.name, dtype: info.dtype, data: array });
    }
    Ok((tensors, header.meta))
}

pub fn write_tensors(path: &Path, tensors: &[NamedTensor], meta: serde_json::Value) -> Result<(), FusionError> {
    let bytes = encode_tensors(tensors, meta)?;
    std::fs::File::create(path)?.write_all(&bytes)?;
    Ok(())
}

pub fn read_tensors(path: &Path) -> Result<(Vec<NamedTensor>, serde_json::Value), FusionError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_tensors(&bytes)
}

/// Looks a tensor up by name.
pub fn find_tensor<'a>(tensors: &'a [NamedTensor], name: &str) -> Result<&'a NamedTensor, FusionError> {
    tensors
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| FusionError::Container(format!("tensor {name} not found")))
}
