//! Binary parameter records.
//!
//! One record stores one network. Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       1     schema tag (currently 1)
//! 1       4     input_dim            (u32)
//! 5       4     hidden layer count   (u32)
//! 9       4*H   hidden dims          (u32 each)
//! ..      4     output_dim           (u32)
//! ..      1     hidden activation    (0 = relu, 1 = tanh)
//! ..      1     output activation    (0 = linear, 1 = tanh_scaled)
//! ..      8     output scale         (f64; 1.0 when linear)
//! ..      8     parameter count      (u64)
//! ..      8*P   parameters           (f64 each, flattening order)
//! ```
//!
//! Records are self-delimiting, so several can be concatenated in one file.

use super::{Activation, MlpArchitecture, MlpParams, OutputActivation};
use crate::error::{Error, Result};
use std::io::{Read, Write};

/// Current record schema version.
pub const SCHEMA_TAG: u8 = 1;

pub fn write_params<W: Write>(writer: &mut W, params: &MlpParams) -> Result<()> {
    let arch = params.architecture();
    writer.write_all(&[SCHEMA_TAG])?;
    writer.write_all(&(arch.input_dim as u32).to_le_bytes())?;
    writer.write_all(&(arch.hidden_dims.len() as u32).to_le_bytes())?;
    for &h in &arch.hidden_dims {
        writer.write_all(&(h as u32).to_le_bytes())?;
    }
    writer.write_all(&(arch.output_dim as u32).to_le_bytes())?;
    writer.write_all(&[match arch.hidden_activation {
        Activation::Relu => 0,
        Activation::Tanh => 1,
    }])?;
    let (out_tag, scale) = match arch.output_activation {
        OutputActivation::Linear => (0u8, 1.0),
        OutputActivation::TanhScaled { scale } => (1u8, scale),
    };
    writer.write_all(&[out_tag])?;
    writer.write_all(&scale.to_le_bytes())?;
    let flat = params.flatten();
    writer.write_all(&(flat.len() as u64).to_le_bytes())?;
    for v in flat {
        writer.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(reader: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(reader: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    reader.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

pub fn read_params<R: Read>(reader: &mut R) -> Result<MlpParams> {
    let mut tag = [0u8; 1];
    reader.read_exact(&mut tag)?;
    if tag[0] != SCHEMA_TAG {
        return Err(Error::Config(format!(
            "unsupported parameter record schema tag {}",
            tag[0]
        )));
    }
    let input_dim = read_u32(reader)? as usize;
    let n_hidden = read_u32(reader)? as usize;
    let mut hidden_dims = Vec::with_capacity(n_hidden);
    for _ in 0..n_hidden {
        hidden_dims.push(read_u32(reader)? as usize);
    }
    let output_dim = read_u32(reader)? as usize;
    let mut acts = [0u8; 2];
    reader.read_exact(&mut acts)?;
    let hidden_activation = match acts[0] {
        0 => Activation::Relu,
        1 => Activation::Tanh,
        other => {
            return Err(Error::Config(format!(
                "unknown hidden activation tag {other}"
            )))
        }
    };
    let scale = read_f64(reader)?;
    let output_activation = match acts[1] {
        0 => OutputActivation::Linear,
        1 => OutputActivation::TanhScaled { scale },
        other => {
            return Err(Error::Config(format!(
                "unknown output activation tag {other}"
            )))
        }
    };
    let arch = MlpArchitecture::new(
        input_dim,
        hidden_dims,
        output_dim,
        hidden_activation,
        output_activation,
    )?;
    let mut count_buf = [0u8; 8];
    reader.read_exact(&mut count_buf)?;
    let count = u64::from_le_bytes(count_buf) as usize;
    if count != arch.param_count() {
        return Err(Error::Shape {
            what: "checkpoint parameter count",
            expected: arch.param_count(),
            got: count,
        });
    }
    let mut flat = Vec::with_capacity(count);
    for _ in 0..count {
        flat.push(read_f64(reader)?);
    }
    MlpParams::unflatten(arch, &flat)
}
