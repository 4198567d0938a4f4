//! Dense weight tensors and the `SETN` binary container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"SETN" | version: u32 | ndims: u32 | dims: [u32; ndims] | payload: [f32; prod(dims)]
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const SETN_MAGIC: &[u8; 4] = b"SETN";
pub const SETN_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightTensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl WeightTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if dims.is_empty() || expected != data.len() {
            return Err(Error::Shape(format!(
                "tensor dims {:?} need {} values, got {}",
                dims,
                expected,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor payload".into()));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Self {
            dims,
            data: vec![0.0; n],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn write_setn<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(SETN_MAGIC)?;
        out.write_all(&SETN_VERSION.to_le_bytes())?;
        out.write_all(&(self.dims.len() as u32).to_le_bytes())?;
        for &d in &self.dims {
            let d = u32::try_from(d)
                .map_err(|_| Error::TensorFormat(format!("dimension {d} exceeds u32")))?;
            out.write_all(&d.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn to_setn_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_setn(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_setn<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut input, &mut magic, "magic")?;
        if &magic != SETN_MAGIC {
            return Err(Error::TensorFormat(format!("bad magic {magic:?}")));
        }
        let version = read_u32(&mut input, "version")?;
        if version != SETN_VERSION {
            return Err(Error::TensorFormat(format!("unsupported version {version}")));
        }
        let ndims = read_u32(&mut input, "ndims")? as usize;
        if ndims == 0 || ndims > 8 {
            return Err(Error::TensorFormat(format!("implausible ndims {ndims}")));
        }
        let mut dims = Vec::with_capacity(ndims);
        for _ in 0..ndims {
            dims.push(read_u32(&mut input, "dims")? as usize);
        }
        let count: usize = dims.iter().product();
        let mut raw = vec![0u8; count * 4];
        read_exact(&mut input, &mut raw, "payload")?;
        let mut trailing = [0u8; 1];
        if input.read(&mut trailing)? != 0 {
            return Err(Error::TensorFormat("trailing bytes after payload".into()));
        }
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(dims, data)
    }
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::TensorFormat(format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(input: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(input, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}
