//! Binary checkpoint format.
//!
//! Layout, all integers `u32` little-endian:
//! magic (8 bytes), version, input dim, hidden width, head count, head sizes, critic trunk
//! flag (0 shared, 1 separate), layer count,
//! then `(rows, cols)` per layer, then per layer the weights row-major followed by the bias
//! as little-endian `f32`. Layers are ordered trunk 0, trunk 1, heads, critic trunk 0 and 1
//! when present, value.

use std::fs;
use std::path::Path;

use super::net::{CriticTrunk, PolicyNet};
use super::Real;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PK2DNET\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn to_bytes<T: Real>(net: &PolicyNet<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 4 * net.num_params());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    let put = |v: usize, out: &mut Vec<u8>| out.extend_from_slice(&(v as u32).to_le_bytes());
    put(CHECKPOINT_VERSION as usize, &mut out);
    put(net.input_dim(), &mut out);
    put(net.hidden(), &mut out);
    let heads = net.head_sizes();
    put(heads.len(), &mut out);
    for k in &heads {
        put(*k, &mut out);
    }
    put(usize::from(net.critic_trunk.is_some()), &mut out);
    put(net.layers().count(), &mut out);
    for l in net.layers() {
        put(l.inputs(), &mut out);
        put(l.outputs(), &mut out);
    }
    for v in net.flat() {
        out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<PolicyNet<f32>> {
    let mut reader = Reader { bytes, pos: 0 };
    if reader.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = reader.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let input = reader.u32()? as usize;
    let hidden = reader.u32()? as usize;
    let n_heads = reader.u32()? as usize;
    let heads = (0..n_heads).map(|_| reader.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let critic = match reader.u32()? {
        0 => CriticTrunk::Shared,
        1 => CriticTrunk::Separate,
        other => return Err(Error::Checkpoint(format!("bad critic trunk flag {other}"))),
    };
    let mut net = PolicyNet::<f32>::zeros_with(input, hidden, &heads, critic);
    let n_layers = reader.u32()? as usize;
    if n_layers != net.layers().count() {
        return Err(Error::Checkpoint(format!("expected {} layers, found {n_layers}", net.layers().count())));
    }
    let expected: Vec<(usize, usize)> = net.layers().map(|l| (l.inputs(), l.outputs())).collect();
    for (i, want) in expected.iter().enumerate() {
        let got = (reader.u32()? as usize, reader.u32()? as usize);
        if got != *want {
            return Err(Error::Checkpoint(format!("layer {i} shape {got:?}, expected {want:?}")));
        }
    }
    let values = (0..net.num_params())
        .map(|_| reader.take(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))))
        .collect::<Result<Vec<f32>>>()?;
    if reader.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    net.set_flat(&values);
    Ok(net)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let slice = self.bytes.get(self.pos..end).ok_or_else(|| Error::Checkpoint("truncated".into()))?;
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn write_checkpoint<T: Real>(net: &PolicyNet<T>, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(net))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<PolicyNet<f32>> {
    from_bytes(&fs::read(path)?)
}
