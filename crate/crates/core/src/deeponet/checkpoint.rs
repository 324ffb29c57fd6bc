//! Model checkpoints: a short header, then one parameter container per
//! sub-network (trunk first, then the branch or each stacked branch).
//!
//! ```text
//! "OPDN1"
//! u8 variant (0 = stacked, 1 = unstacked), u8 branch_bias, u8 output_bias
//! u32 p, u32 m, u32 dim(y)
//! f64 b0
//! u32 number of branch containers
//! OPNT1 trunk, OPNT1 branch ...
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::model::{Branch, DeepOnet, DeepOnetConfig, Variant};
use crate::binio::{read_bool, read_exact_ctx, read_f64s, read_u32, read_u8};
use crate::error::{Error, Result};
use crate::nn::{read_params, write_params};

pub const MODEL_MAGIC: &[u8; 5] = b"OPDN1";

pub fn write_model<W: Write>(w: &mut W, model: &DeepOnet) -> Result<()> {
    let cfg = model.config();
    w.write_all(MODEL_MAGIC)?;
    let variant = match cfg.variant {
        Variant::Stacked => 0u8,
        Variant::Unstacked => 1u8,
    };
    w.write_all(&[variant, cfg.branch_bias as u8, cfg.output_bias as u8])?;
    for v in [cfg.p(), cfg.m, cfg.dim_y] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    w.write_all(&model.b0().to_le_bytes())?;
    let nets: Vec<_> = match model.branch() {
        Branch::Stacked(nets) => nets.iter().collect(),
        Branch::Unstacked(net) => vec![net],
    };
    w.write_all(&(nets.len() as u32).to_le_bytes())?;
    write_params(w, model.trunk())?;
    for net in nets {
        write_params(w, net)?;
    }
    Ok(())
}

pub fn read_model<R: Read>(r: &mut R) -> Result<DeepOnet> {
    let mut magic = [0u8; 5];
    read_exact_ctx(r, &mut magic, "model magic")?;
    if &magic != MODEL_MAGIC {
        return Err(Error::Format(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(MODEL_MAGIC),
            String::from_utf8_lossy(&magic)
        )));
    }
    let variant = match read_u8(r, "variant")? {
        0 => Variant::Stacked,
        1 => Variant::Unstacked,
        v => return Err(Error::Format(format!("unknown variant code {v}"))),
    };
    let branch_bias = read_bool(r, "branch bias flag")?;
    let output_bias = read_bool(r, "output bias flag")?;
    let p = read_u32(r, "p")? as usize;
    let m = read_u32(r, "m")? as usize;
    let dim_y = read_u32(r, "dim(y)")? as usize;
    let b0 = read_f64s(r, 1, "b0")?[0];
    let n_nets = read_u32(r, "branch count")? as usize;
    let expected = match variant {
        Variant::Stacked => p,
        Variant::Unstacked => 1,
    };
    if n_nets != expected {
        return Err(Error::Format(format!("{n_nets} branch containers, expected {expected}")));
    }
    let trunk = read_params(r)?;
    let nets = (0..n_nets).map(|_| read_params(r)).collect::<Result<Vec<_>>>()?;
    let bspec = nets[0].spec().clone();
    let config = DeepOnetConfig {
        variant,
        m,
        dim_y,
        trunk_depth: trunk.spec().n_layers(),
        trunk_width: trunk.output_dim(),
        branch_depth: bspec.n_layers(),
        branch_width: if bspec.n_layers() > 1 { bspec.layer_sizes[1] } else { p },
        trunk_activation: trunk.spec().activation,
        branch_activation: bspec.activation,
        branch_bias,
        output_bias,
    };
    let branch = match variant {
        Variant::Stacked => Branch::Stacked(nets),
        Variant::Unstacked => Branch::Unstacked(nets.into_iter().next().expect("one net")),
    };
    DeepOnet::from_parts(config, trunk, branch, b0).map_err(|e| Error::Format(format!("inconsistent checkpoint: {e}")))
}

pub fn save_model(model: &DeepOnet, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DeepOnet> {
    read_model(&mut BufReader::new(File::open(path)?))
}
