//! Checkpoint file format (see README for the byte-level layout).
//!
//! Single binary file: magic `WSRN`, a format version, the parameter
//! count, then per parameter its name, shape and raw little-endian f32
//! data, in declaration order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::param::ParamStore;
use super::{Shape, Tensor4};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"WSRN";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint(store: &ParamStore<f32>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(store.len() as u32).to_le_bytes()).map_err(io)?;
    for p in store.iter() {
        let name = p.name.as_bytes();
        w.write_all(&(name.len() as u16).to_le_bytes()).map_err(io)?;
        w.write_all(name).map_err(io)?;
        let s = p.value.shape();
        for d in [s.b, s.c, s.h, s.w] {
            w.write_all(&(d as u32).to_le_bytes()).map_err(io)?;
        }
        for &v in p.value.as_slice() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Loads parameter values into a store built with the same declaration
/// order; names and shapes must match exactly.
pub fn load_checkpoint(store: &mut ParamStore<f32>, path: &Path) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let io = |e| Error::io(path, e);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::Load(format!("{}: not a checkpoint file", path.display())));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf).map_err(io)?;
    let version = u32::from_le_bytes(u32buf);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Load(format!(
            "{}: unsupported checkpoint version {version}",
            path.display()
        )));
    }
    r.read_exact(&mut u32buf).map_err(io)?;
    let count = u32::from_le_bytes(u32buf) as usize;
    if count != store.len() {
        return Err(Error::Load(format!(
            "{}: checkpoint has {count} parameters, model expects {}",
            path.display(),
            store.len()
        )));
    }
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let mut u16buf = [0u8; 2];
        r.read_exact(&mut u16buf).map_err(io)?;
        let name_len = u16::from_le_bytes(u16buf) as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name).map_err(io)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Load(format!("{}: invalid parameter name", path.display())))?;
        let mut dims = [0usize; 4];
        for d in &mut dims {
            r.read_exact(&mut u32buf).map_err(io)?;
            *d = u32::from_le_bytes(u32buf) as usize;
        }
        let shape = Shape::new(dims[0], dims[1], dims[2], dims[3]);
        let expected = store.value(id).shape();
        let expected_name = store.iter().nth(id.0).unwrap().name.clone();
        if name != expected_name || shape != expected {
            return Err(Error::Load(format!(
                "{}: parameter '{name}' {shape} does not match model '{expected_name}' {expected}",
                path.display()
            )));
        }
        let mut data = vec![0f32; shape.numel()];
        let mut f32buf = [0u8; 4];
        for v in &mut data {
            r.read_exact(&mut f32buf).map_err(io)?;
            *v = f32::from_le_bytes(f32buf);
        }
        *store.value_mut(id) = Tensor4::from_vec(shape, data)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_store(scale: f32) -> ParamStore<f32> {
        let mut s = ParamStore::new();
        s.register("enc.w", Tensor4::from_fn(Shape::new(2, 3, 3, 3), |b, c, h, w| {
            scale * (b as f32 - c as f32 + h as f32 * 0.1 - w as f32 * 0.2)
        }));
        s.register("enc.b", Tensor4::filled(Shape::new(1, 2, 1, 1), 0.25 * scale));
        s
    }

    #[test]
    fn round_trip_restores_exact_values() {
        let dir = std::env::temp_dir().join("wsrn_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("a.ckpt");
        let src = demo_store(1.0);
        save_checkpoint(&src, &path).unwrap();
        let mut dst = demo_store(-9.0);
        load_checkpoint(&mut dst, &path).unwrap();
        for (a, b) in src.iter().zip(dst.iter()) {
            assert_eq!(a.value, b.value);
        }
    }

    #[test]
    fn wrong_magic_is_a_load_error() {
        let dir = std::env::temp_dir().join("wsrn_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.ckpt");
        std::fs::write(&path, b"nope").unwrap();
        let mut dst = demo_store(1.0);
        assert!(matches!(load_checkpoint(&mut dst, &path), Err(Error::Load(_) | Error::Io { .. })));
    }
}
