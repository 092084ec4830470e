//! Binary checkpoint format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic     8 bytes  "VAECCKPT"
//! version   u16
//! config    d_visual u64, d_audio u64, hidden u64, latent u64, classes u64,
//!           activation u8
//! count     u64
//! tensors   count × (name_len u32, name utf-8, rows u64, cols u64,
//!                    rows·cols f64)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Activation, ModelConfig, ModelParams, CENTERS_NAME, PARAM_NAMES};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"VAECCKPT";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn write_checkpoint<T: Scalar>(params: &ModelParams<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode(params, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<ModelParams<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    decode(&mut BufReader::new(file), path)
}

fn encode<T: Scalar>(params: &ModelParams<T>, w: &mut impl Write) -> std::io::Result<()> {
    let c = &params.config;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    for d in [c.d_visual, c.d_audio, c.hidden, c.latent, c.classes] {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    w.write_all(&[c.activation.code()])?;

    let tensors = params.named_tensors();
    w.write_all(&(tensors.len() as u64).to_le_bytes())?;
    for (name, t) in tensors {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.rows() as u64).to_le_bytes())?;
        w.write_all(&(t.cols() as u64).to_le_bytes())?;
        for &v in t.as_slice() {
            w.write_all(&v.to_f64_lossy().to_le_bytes())?;
        }
    }
    Ok(())
}

fn decode<T: Scalar>(r: &mut impl Read, path: &Path) -> Result<ModelParams<T>> {
    let io = |e| Error::io(path, e);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::format(path, "not a model checkpoint (bad magic)"));
    }
    let version = read_u16(r).map_err(io)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported checkpoint version {version}"),
        ));
    }
    let mut dims = [0usize; 5];
    for d in &mut dims {
        *d = read_u64(r).map_err(io)? as usize;
    }
    let mut act = [0u8; 1];
    r.read_exact(&mut act).map_err(io)?;
    let activation = Activation::from_code(act[0])
        .ok_or_else(|| Error::format(path, format!("unknown activation code {}", act[0])))?;
    let config = ModelConfig {
        d_visual: dims[0],
        d_audio: dims[1],
        hidden: dims[2],
        latent: dims[3],
        classes: dims[4],
        activation,
    };
    config.validate()?;

    let mut params = ModelParams::<T>::zeros(config)?;
    let count = read_u64(r).map_err(io)? as usize;
    let expected = PARAM_NAMES.len() + 1;
    if count != expected {
        return Err(Error::format(
            path,
            format!("expected {expected} tensors, found {count}"),
        ));
    }

    let names = PARAM_NAMES.iter().copied().chain([CENTERS_NAME]);
    let mut slots: Vec<&mut Tensor<T>> = params.trainable_mut();
    let mut loaded = Vec::with_capacity(count);
    for name in names {
        let name_len = read_u32(r).map_err(io)? as usize;
        if name_len > 4096 {
            return Err(Error::format(path, "tensor name too long"));
        }
        let mut buf = vec![0u8; name_len];
        r.read_exact(&mut buf).map_err(io)?;
        let got =
            String::from_utf8(buf).map_err(|_| Error::format(path, "tensor name is not utf-8"))?;
        if got != name {
            return Err(Error::format(
                path,
                format!("expected tensor {name:?}, found {got:?}"),
            ));
        }
        let rows = read_u64(r).map_err(io)? as usize;
        let cols = read_u64(r).map_err(io)? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        let mut bytes = [0u8; 8];
        for _ in 0..rows * cols {
            r.read_exact(&mut bytes).map_err(io)?;
            let v = f64::from_le_bytes(bytes);
            data.push(T::from_f64(v).ok_or_else(|| Error::format(path, "unrepresentable value"))?);
        }
        loaded.push((name, Tensor::from_vec(rows, cols, data)?));
    }

    let (centers_name, centers) = loaded.pop().expect("centers entry");
    debug_assert_eq!(centers_name, CENTERS_NAME);
    for (slot, (name, t)) in slots.iter_mut().zip(loaded) {
        if slot.shape() != t.shape() {
            return Err(Error::format(
                path,
                format!(
                    "tensor {name} has shape {:?}, config implies {:?}",
                    t.shape(),
                    slot.shape()
                ),
            ));
        }
        **slot = t;
    }
    drop(slots);
    if centers.shape() != params.centers.shape() {
        return Err(Error::format(path, "centers shape does not match config"));
    }
    params.centers = centers;
    Ok(params)
}

fn read_u16(r: &mut impl Read) -> std::io::Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Activation;

    fn config() -> ModelConfig {
        ModelConfig {
            d_visual: 5,
            d_audio: 3,
            hidden: 4,
            latent: 2,
            classes: 3,
            activation: Activation::Tanh,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let mut p = ModelParams::<f64>::init(config(), 11).unwrap();
        p.centers[(1, 1)] = -0.1 / 3.0;
        write_checkpoint(&p, &path).unwrap();
        let back: ModelParams<f64> = read_checkpoint(&path).unwrap();
        assert_eq!(back, p);
        let a: Vec<u64> = p
            .enc_visual
            .weight
            .as_slice()
            .iter()
            .map(|v| v.to_bits())
            .collect();
        let b: Vec<u64> = back
            .enc_visual
            .weight
            .as_slice()
            .iter()
            .map(|v| v.to_bits())
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn f32_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m32.ckpt");
        let p = ModelParams::<f32>::init(config(), 3).unwrap();
        write_checkpoint(&p, &path).unwrap();
        assert_eq!(read_checkpoint::<f32>(&path).unwrap(), p);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"NOTACKPT\x01\x00").unwrap();
        assert!(matches!(
            read_checkpoint::<f64>(&path),
            Err(Error::Format { .. })
        ));

        let p = ModelParams::<f64>::init(config(), 1).unwrap();
        write_checkpoint(&p, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(
            read_checkpoint::<f64>(&path),
            Err(Error::Io { .. })
        ));
    }
}
