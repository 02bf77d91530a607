//! Binary tensor checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "NARL"            magic
//! u32               format version
//! u32               tensor count
//! per tensor:
//!   u32             name length, then UTF-8 name bytes
//!   u32             rank, then rank x u64 dims
//!   f32 x prod(dims) raw values
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{Network, ParamTensor};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NARL";
pub const FORMAT_VERSION: u32 = 1;

const MAX_RANK: u32 = 8;

pub fn write_tensors<W: Write>(mut w: W, tensors: &[ParamTensor]) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for t in tensors {
        let name = t.name.as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&(t.shape.len() as u32).to_le_bytes())?;
        for &d in &t.shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        let mut payload = Vec::with_capacity(t.values.len() * 4);
        for v in &t.values {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&payload)?;
    }
    w.flush()
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated while reading {what}")))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

pub fn read_tensors<R: Read>(mut r: R) -> Result<Vec<ParamTensor>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("read failed: {e}")))?;
    let mut c = Cursor { buf: &buf, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = c.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = c.u32("tensor count")?;
    let mut tensors = Vec::new();
    for i in 0..count {
        let name_len = c.u32("name length")? as usize;
        let name = std::str::from_utf8(c.take(name_len, "name")?)
            .map_err(|_| Error::Checkpoint(format!("tensor {i}: name is not UTF-8")))?
            .to_string();
        let rank = c.u32("rank")?;
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::Checkpoint(format!("tensor {name}: bad rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank as usize);
        let mut n: usize = 1;
        for _ in 0..rank {
            let d = usize::try_from(c.u64("dim")?)
                .ok()
                .filter(|&d| d > 0)
                .ok_or_else(|| Error::Checkpoint(format!("tensor {name}: bad dimension")))?;
            n = n
                .checked_mul(d)
                .ok_or_else(|| Error::Checkpoint(format!("tensor {name}: shape overflow")))?;
            shape.push(d);
        }
        let bytes_len = n
            .checked_mul(4)
            .ok_or_else(|| Error::Checkpoint(format!("tensor {name}: shape overflow")))?;
        let values = c
            .take(bytes_len, "payload")?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        tensors.push(ParamTensor::from_values(name, shape, values)?);
    }
    if c.pos != buf.len() {
        return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
    }
    Ok(tensors)
}

pub fn save_tensors(path: &Path, tensors: &[ParamTensor]) -> Result<()> {
    let mut bytes = Vec::new();
    write_tensors(&mut bytes, tensors).map_err(|e| Error::io(path, e))?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_tensors(path: &Path) -> Result<Vec<ParamTensor>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_tensors(std::io::BufReader::new(file))
}

pub fn save_checkpoint(net: &Network, path: &Path) -> Result<()> {
    save_tensors(path, &net.to_tensors())
}

pub fn load_checkpoint(path: &Path) -> Result<Network> {
    Network::from_tensors(load_tensors(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Head};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_net(seed: u64) -> Network {
        Network::random(
            &[5, 3, 4],
            Activation::Tanh,
            Head::Softmax,
            0.7,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap()
    }

    #[test]
    fn byte_layout_is_little_endian() {
        let t = ParamTensor::from_values("w", vec![2], vec![1.0, -2.0]).unwrap();
        let mut bytes = Vec::new();
        write_tensors(&mut bytes, &[t]).unwrap();
        let mut expected = b"NARL".to_vec();
        expected.extend([1, 0, 0, 0]); // version
        expected.extend([1, 0, 0, 0]); // count
        expected.extend([1, 0, 0, 0, b'w']);
        expected.extend([1, 0, 0, 0]); // rank
        expected.extend([2, 0, 0, 0, 0, 0, 0, 0]);
        expected.extend([0x00, 0x00, 0x80, 0x3f]); // 1.0f32
        expected.extend([0x00, 0x00, 0x00, 0xc0]); // -2.0f32
        assert_eq!(bytes, expected);
    }

    #[test]
    fn truncated_input_is_a_format_error() {
        let mut bytes = Vec::new();
        write_tensors(&mut bytes, &sample_net(1).to_tensors()).unwrap();
        for cut in [0, 3, 4, 9, 15, bytes.len() / 2, bytes.len() - 1] {
            assert!(
                matches!(read_tensors(&bytes[..cut]), Err(Error::Checkpoint(_))),
                "cut {cut}"
            );
        }
    }

    #[test]
    fn bad_magic_and_version_rejected() {
        let mut bytes = Vec::new();
        write_tensors(&mut bytes, &sample_net(1).to_tensors()).unwrap();
        let mut m = bytes.clone();
        m[0] = b'X';
        assert!(read_tensors(&m[..]).is_err());
        let mut v = bytes;
        v[4] = 9;
        assert!(read_tensors(&v[..]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.narl");
        let net = sample_net(3);
        save_checkpoint(&net, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), net);
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(vals in proptest::collection::vec(any::<f32>(), 1..64)) {
            let n = vals.len();
            let t = ParamTensor::from_values("t", vec![n], vals.clone()).unwrap();
            let mut bytes = Vec::new();
            write_tensors(&mut bytes, &[t]).unwrap();
            let back = read_tensors(&bytes[..]).unwrap();
            let a: Vec<u32> = vals.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back[0].values.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
