//! Binary model format.
//!
//! ```text
//! "GANY"                      magic
//! u32                         format version
//! u32                         channel count t
//! t x (u32 len, utf-8 bytes)  channel names
//! ceil(t/8) bytes             mask bits, bit i set = channel i masked
//! f64                         entropy target (bits)
//! u32, then u32 each          layer sizes
//! f64 each                    parameters, layer by layer, weights row-major then bias
//! 8 bytes                     first 8 bytes of SHA-256 over everything above
//! ```
//! All integers and floats little-endian.

use alloc::string::String;
use alloc::vec::Vec;

use crate::attention::{AttentionModel, MlpParams, MODEL_VERSION};
use crate::digest::sha256;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GANY";

pub fn encode(model: &AttentionModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&model.version.to_le_bytes());
    out.extend_from_slice(&(model.channel_names.len() as u32).to_le_bytes());
    for name in &model.channel_names {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    let mut bits = alloc::vec![0u8; model.masked.len().div_ceil(8)];
    for (i, &m) in model.masked.iter().enumerate() {
        if m {
            bits[i / 8] |= 1 << (i % 8);
        }
    }
    out.extend_from_slice(&bits);
    out.extend_from_slice(&model.entropy_target.to_le_bytes());
    let sizes = model.params.layer_sizes();
    out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for s in sizes {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    for v in model.params.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let sum = sha256(&out);
    out.extend_from_slice(&sum[..8]);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(e) => {
                let s = &self.buf[self.pos..e];
                self.pos = e;
                Ok(s)
            }
            None => Err(Error::MalformedModel("unexpected end of data".into())),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<AttentionModel> {
    if bytes.len() < MAGIC.len() + 8 {
        return Err(Error::ChecksumMismatch);
    }
    let (body, sum) = bytes.split_at(bytes.len() - 8);
    if sha256(body)[..8] != *sum {
        return Err(Error::ChecksumMismatch);
    }
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::MalformedModel("bad magic".into()));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let t = r.u32()? as usize;
    if t > 4096 {
        return Err(Error::MalformedModel("implausible channel count".into()));
    }
    let mut names = Vec::with_capacity(t);
    for _ in 0..t {
        let len = r.u32()? as usize;
        let raw = r.take(len)?;
        names.push(
            String::from_utf8(raw.to_vec()).map_err(|_| Error::MalformedModel("channel name is not utf-8".into()))?,
        );
    }
    let bits = r.take(t.div_ceil(8))?;
    let masked = (0..t).map(|i| bits[i / 8] & (1 << (i % 8)) != 0).collect();
    let entropy_target = r.f64()?;
    let n_sizes = r.u32()? as usize;
    if n_sizes < 2 || n_sizes > 64 {
        return Err(Error::MalformedModel("implausible layer count".into()));
    }
    let mut sizes = Vec::with_capacity(n_sizes);
    for _ in 0..n_sizes {
        sizes.push(r.u32()? as usize);
    }
    let mut params = MlpParams::zeros_like(&sizes);
    let expected = params.num_params();
    if body.len() - r.pos != expected * 8 {
        return Err(Error::MalformedModel("parameter block has the wrong length".into()));
    }
    for v in params.values_mut() {
        *v = r.f64()?;
    }
    let model = AttentionModel {
        params,
        channel_names: names,
        masked,
        entropy_target,
        version,
    };
    model.validate()?;
    Ok(model)
}
