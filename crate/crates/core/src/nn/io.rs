//! Binary parameter container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "OPNT1"
//! u8  activation (0 = relu, 1 = tanh)
//! u8  final_activation
//! u8  final_bias
//! u32 number of layer sizes
//! u64 * n  layer sizes
//! per layer: f64 weights (fan_out x fan_in, row-major), f64 biases (fan_out)
//! ```

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use super::{Activation, Dense, MlpParams, MlpSpec};
use crate::binio::{read_exact_ctx, read_u32, read_u64, read_u8, read_f64s, read_bool};
use crate::error::{Error, Result};

pub const PARAMS_MAGIC: &[u8; 5] = b"OPNT1";

// Upper bound on any single layer width accepted from a file.
const MAX_WIDTH: u64 = 1 << 24;

pub fn write_params<W: Write>(w: &mut W, params: &MlpParams) -> Result<()> {
    let spec = params.spec();
    w.write_all(PARAMS_MAGIC)?;
    let act = match spec.activation {
        Activation::Relu => 0u8,
        Activation::Tanh => 1u8,
    };
    w.write_all(&[act, spec.final_activation as u8, spec.final_bias as u8])?;
    w.write_all(&(spec.layer_sizes.len() as u32).to_le_bytes())?;
    for &s in &spec.layer_sizes {
        w.write_all(&(s as u64).to_le_bytes())?;
    }
    for layer in params.layers() {
        for v in layer.weight.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in layer.bias.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_params<R: Read>(r: &mut R) -> Result<MlpParams> {
    let mut magic = [0u8; 5];
    read_exact_ctx(r, &mut magic, "parameter magic")?;
    if &magic != PARAMS_MAGIC {
        return Err(Error::Format(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(PARAMS_MAGIC),
            String::from_utf8_lossy(&magic)
        )));
    }
    let activation = match read_u8(r, "activation")? {
        0 => Activation::Relu,
        1 => Activation::Tanh,
        b => return Err(Error::Format(format!("unknown activation code {b}"))),
    };
    let final_activation = read_bool(r, "final_activation")?;
    let final_bias = read_bool(r, "final_bias")?;
    let n = read_u32(r, "layer count")? as usize;
    if !(2..=1024).contains(&n) {
        return Err(Error::Format(format!("implausible layer-size count {n}")));
    }
    let mut sizes = Vec::with_capacity(n);
    for _ in 0..n {
        let s = read_u64(r, "layer size")?;
        if s == 0 || s > MAX_WIDTH {
            return Err(Error::Format(format!("implausible layer size {s}")));
        }
        sizes.push(s as usize);
    }
    let spec = MlpSpec {
        layer_sizes: sizes.clone(),
        activation,
        final_activation,
        final_bias,
    };
    let mut layers = Vec::with_capacity(n - 1);
    for w in sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let weight = read_f64s(r, fan_in * fan_out, "weights")?;
        let bias = read_f64s(r, fan_out, "biases")?;
        layers.push(Dense {
            weight: Array2::from_shape_vec((fan_out, fan_in), weight).expect("sized above"),
            bias: Array1::from_vec(bias),
        });
    }
    MlpParams::from_layers(spec, layers).map_err(|e| Error::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp_init;

    #[test]
    fn round_trip_is_bit_exact() {
        let spec = MlpSpec::new(vec![4, 7, 3], Activation::Tanh, true)
            .unwrap()
            .with_final_bias(false);
        let mut p = mlp_init(spec, 5).unwrap();
        p.layers_mut()[0].bias[2] = -0.125;
        let mut buf = Vec::new();
        write_params(&mut buf, &p).unwrap();
        assert_eq!(&buf[..5], b"OPNT1");
        let q = read_params(&mut buf.as_slice()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn truncation_and_bad_magic_rejected() {
        let p = mlp_init(MlpSpec::new(vec![2, 3, 1], Activation::Relu, false).unwrap(), 1).unwrap();
        let mut buf = Vec::new();
        write_params(&mut buf, &p).unwrap();
        let cut = &buf[..buf.len() - 3];
        assert!(matches!(read_params(&mut &cut[..]), Err(Error::Format(_))));
        let mut bad = buf.clone();
        bad[4] = b'9';
        assert!(matches!(read_params(&mut bad.as_slice()), Err(Error::Format(_))));
    }
}
