//! QTB tensor file format.
//!
//! Layout, in order:
//!
//! 1. magic bytes `QTB1`
//! 2. 4-byte little-endian unsigned header length
//! 3. UTF-8 JSON header:
//!    `{"dtype":"f64","shape":[...],"order":"row-major","planes":["q0","q1","q2","q3"]}`
//! 4. four contiguous planes of little-endian 64-bit floats, in the order
//!    listed by the header.
//!
//! Real-valued matrices (attention maps) are stored with the values in plane
//! `q0` and zero imaginary planes.

use crate::error::{Error, Result};
use crate::tensor::QTensor;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"QTB1";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dtype: String,
    shape: Vec<usize>,
    order: String,
    planes: Vec<String>,
}

impl Header {
    fn for_shape(shape: &[usize]) -> Self {
        Header {
            dtype: "f64".to_string(),
            shape: shape.to_vec(),
            order: "row-major".to_string(),
            planes: vec![
                "q0".to_string(),
                "q1".to_string(),
                "q2".to_string(),
                "q3".to_string(),
            ],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dtype != "f64" {
            return Err(Error::Format(format!("unsupported dtype {:?}", self.dtype)));
        }
        if self.order != "row-major" {
            return Err(Error::Format(format!("unsupported order {:?}", self.order)));
        }
        let expected = ["q0", "q1", "q2", "q3"];
        if self.planes.len() != 4 || self.planes.iter().zip(expected).any(|(a, b)| a != b) {
            return Err(Error::Format(format!(
                "unsupported plane list {:?}",
                self.planes
            )));
        }
        Ok(())
    }
}

pub fn write_to(writer: &mut impl Write, tensor: &QTensor) -> Result<()> {
    let header = serde_json::to_vec(&Header::for_shape(tensor.shape()))
        .map_err(|e| Error::Format(e.to_string()))?;
    writer.write_all(MAGIC)?;
    writer.write_all(&(header.len() as u32).to_le_bytes())?;
    writer.write_all(&header)?;
    for plane in 0..4 {
        for &v in tensor.plane(plane) {
            writer.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_from(reader: &mut impl Read) -> Result<QTensor> {
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            magic, MAGIC
        )));
    }
    let mut len_bytes = [0u8; 4];
    reader.read_exact(&mut len_bytes)?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    reader.read_exact(&mut header_bytes)?;
    let header: Header =
        serde_json::from_slice(&header_bytes).map_err(|e| Error::Format(e.to_string()))?;
    header.validate()?;

    let len: usize = header.shape.iter().product();
    let mut planes: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(len));
    let mut buf = vec![0u8; len * 8];
    for plane in planes.iter_mut() {
        reader.read_exact(&mut buf)?;
        plane.extend(
            buf.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap())),
        );
    }
    QTensor::new(header.shape, planes)
}

pub fn write_file(path: impl AsRef<Path>, tensor: &QTensor) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_to(&mut file, tensor)?;
    file.flush()?;
    Ok(())
}

pub fn read_file(path: impl AsRef<Path>) -> Result<QTensor> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    read_from(&mut file)
}
