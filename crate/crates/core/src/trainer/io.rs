//! Versioned binary model files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! b"AFM1"  magic
//! u32      architecture code (0 = linear-softmax, 1 = small-convnet)
//! u32      input height
//! u32      input width
//! u32      classes
//! u32      parameter count N
//! f32 * N  parameters
//! ```

use std::io::{Read, Write};

use super::network::{Architecture, Network};
use super::Classifier;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"AFM1";

pub fn write_model<W: Write>(model: &Classifier, mut out: W) -> Result<()> {
    let net = &model.network;
    let (h, w) = net.input_dims();
    out.write_all(MAGIC)?;
    for v in [net.architecture().code(), h as u32, w as u32, net.classes() as u32] {
        out.write_all(&v.to_le_bytes())?;
    }
    out.write_all(&(net.num_params() as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(net.num_params() * 4);
    for p in net.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| Error::ModelFormat(format!("truncated header: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_model<R: Read>(mut input: R) -> Result<Classifier> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(|e| Error::ModelFormat(format!("missing magic: {e}")))?;
    if &magic != MAGIC {
        return Err(Error::ModelFormat(format!("bad magic {magic:?}")));
    }
    let arch = Architecture::from_code(read_u32(&mut input)?)?;
    let h = read_u32(&mut input)? as usize;
    let w = read_u32(&mut input)? as usize;
    let classes = read_u32(&mut input)? as usize;
    let n = read_u32(&mut input)? as usize;
    let mut raw = vec![0u8; n * 4];
    input.read_exact(&mut raw).map_err(|e| Error::ModelFormat(format!("truncated weights: {e}")))?;
    let params = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    let network = Network::from_parts(arch, h, w, classes, params)?;
    Ok(Classifier { network })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_header() {
        let net = Network::new(Architecture::SmallConvNet, 8, 12, 3, 9).unwrap();
        let model = Classifier { network: net };
        let mut bytes = Vec::new();
        write_model(&model, &mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"AFM1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 8);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 12);
        let back = read_model(bytes.as_slice()).unwrap();
        assert_eq!(back.network, model.network);
    }

    #[test]
    fn rejects_corrupt_files() {
        assert!(read_model(&b"AFM2"[..]).is_err());
        let model = Classifier { network: Network::new(Architecture::LinearSoftmax, 2, 2, 2, 0).unwrap() };
        let mut bytes = Vec::new();
        write_model(&model, &mut bytes).unwrap();
        bytes.truncate(bytes.len() - 2);
        assert!(read_model(bytes.as_slice()).is_err());
    }
}
