use super::{Activation, Dense, NnError, Params};
use std::io::{Read, Write};

const MAGIC: &[u8; 6] = b"GDPNET";
const VERSION: u16 = 1;

/// Header, layer shapes, then row-major weights and biases as little-endian f64.
pub fn write_params(w: &mut impl Write, params: &Params) -> Result<(), NnError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(params.layers().len() as u32).to_le_bytes())?;
    for l in params.layers() {
        w.write_all(&(l.n_in as u32).to_le_bytes())?;
        w.write_all(&(l.n_out as u32).to_le_bytes())?;
        w.write_all(&[l.activation.code()])?;
    }
    for l in params.layers() {
        for x in l.w.iter().chain(&l.b) {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32, NnError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_params(r: &mut impl Read) -> Result<Params, NnError> {
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NnError::Checkpoint("not a network checkpoint".into()));
    }
    let mut v = [0u8; 2];
    r.read_exact(&mut v)?;
    let version = u16::from_le_bytes(v);
    if version != VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {version}")));
    }
    let n = read_u32(r)? as usize;
    if n == 0 || n > 64 {
        return Err(NnError::Checkpoint(format!("implausible layer count {n}")));
    }
    let mut layers = Vec::with_capacity(n);
    for _ in 0..n {
        let n_in = read_u32(r)? as usize;
        let n_out = read_u32(r)? as usize;
        let mut code = [0u8; 1];
        r.read_exact(&mut code)?;
        let act = Activation::from_code(code[0])
            .ok_or_else(|| NnError::Checkpoint(format!("unknown activation {}", code[0])))?;
        if n_in == 0 || n_out == 0 || n_in * n_out > 1 << 26 {
            return Err(NnError::Checkpoint(format!("implausible layer {n_in}x{n_out}")));
        }
        layers.push(Dense::zeros(n_in, n_out, act));
    }
    for l in &mut layers {
        for x in l.w.iter_mut().chain(l.b.iter_mut()) {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *x = f64::from_le_bytes(b);
        }
    }
    Params::from_layers(layers)
}
