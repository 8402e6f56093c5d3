//! Versioned little-endian checkpoint container. The byte layout is documented in the README.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fm::GlobalMatrices;
use crate::linalg::Matrix;
use crate::policy::{PolicyParams, ProjectionLayer};

pub const MAGIC: &[u8; 8] = b"CRSSIMCK";
pub const VERSION: u32 = 1;

/// What a device keeps locally between stages.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientSection {
    pub user_id: usize,
    pub embedding: Vec<f64>,
    pub projection: ProjectionLayer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub stage1_epochs: u64,
    pub stage2_epochs: u64,
    pub matrices: GlobalMatrices,
    pub policy: Option<PolicyParams>,
    pub clients: Vec<ClientSection>,
    /// Resolved run configuration, serialized as JSON.
    pub config_json: String,
}

/// 64-bit FNV-1a over the payload, stored as the trailer.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("{v} does not fit in u32")))?;
        self.0.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, values: &[f64]) {
        for v in values {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("length overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let m = &self.matrices;
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(VERSION as usize)?;
        w.u64(self.stage1_epochs);
        w.u64(self.stage2_epochs);
        w.u32(m.dim())?;
        w.u32(m.num_items())?;
        w.u32(m.num_attributes())?;
        w.f64s(m.items.as_slice());
        w.f64s(m.attributes.as_slice());
        match &self.policy {
            None => w.u8(0),
            Some(p) => {
                w.u8(1);
                w.u32(p.input)?;
                w.u32(p.hidden)?;
                w.u32(p.actions)?;
                w.u8(p.output_relu as u8);
                w.f64s(&p.params);
            }
        }
        w.u32(self.clients.len())?;
        for c in &self.clients {
            w.u32(c.user_id)?;
            w.u32(c.embedding.len())?;
            w.f64s(&c.embedding);
            w.u32(c.projection.dim)?;
            w.f64s(&c.projection.weights);
            w.f64s(&c.projection.bias);
        }
        w.u64(self.config_json.len() as u64);
        w.0.extend_from_slice(self.config_json.as_bytes());
        let sum = fnv1a(&w.0);
        w.u64(sum);
        Ok(w.0)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 4 + 8 {
            return Err(Error::Checkpoint("file too short".into()));
        }
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()? as u32;
        if version > VERSION {
            return Err(Error::Checkpoint(format!(
                "checkpoint version {version} is newer than supported version {VERSION}"
            )));
        }
        if version == 0 {
            return Err(Error::Checkpoint("invalid version 0".into()));
        }
        let (payload, trailer) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(trailer.try_into().expect("8 bytes"));
        if fnv1a(payload) != stored {
            return Err(Error::Checkpoint("checksum mismatch".into()));
        }
        let mut r = Reader { buf: payload, pos: r.pos };

        let stage1_epochs = r.u64()?;
        let stage2_epochs = r.u64()?;
        let dim = r.u32()?;
        let num_items = r.u32()?;
        let num_attributes = r.u32()?;
        let items = Matrix::from_vec(num_items, dim, r.f64s(num_items * dim)?)
            .ok_or_else(|| Error::Checkpoint("item table shape".into()))?;
        let attributes = Matrix::from_vec(num_attributes, dim, r.f64s(num_attributes * dim)?)
            .ok_or_else(|| Error::Checkpoint("attribute table shape".into()))?;
        let matrices = GlobalMatrices::new(items, attributes)?;
        let policy = match r.u8()? {
            0 => None,
            1 => {
                let input = r.u32()?;
                let hidden = r.u32()?;
                let actions = r.u32()?;
                let output_relu = r.u8()? != 0;
                let params = r.f64s(PolicyParams::param_count(input, hidden, actions))?;
                Some(PolicyParams::from_flat(input, hidden, actions, output_relu, params)?)
            }
            t => return Err(Error::Checkpoint(format!("bad policy tag {t}"))),
        };
        let n = r.u32()?;
        let mut clients = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let user_id = r.u32()?;
            let len = r.u32()?;
            let embedding = r.f64s(len)?;
            let pd = r.u32()?;
            let weights = r.f64s(pd * pd)?;
            let bias = r.f64s(pd)?;
            clients.push(ClientSection {
                user_id,
                embedding,
                projection: ProjectionLayer { dim: pd, weights, bias },
            });
        }
        let len = r.u64()? as usize;
        let config_json = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| Error::Checkpoint("config is not UTF-8".into()))?;
        if r.pos != payload.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Self {
            stage1_epochs,
            stage2_epochs,
            matrices,
            policy,
            clients,
            config_json,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?
            .read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let m = GlobalMatrices::new(
            Matrix::from_vec(2, 2, vec![1.0, -2.0, 0.5, f64::MIN_POSITIVE]).unwrap(),
            Matrix::from_vec(1, 2, vec![3.25, -0.0]).unwrap(),
        )
        .unwrap();
        Checkpoint {
            stage1_epochs: 12,
            stage2_epochs: 0,
            matrices: m,
            policy: Some(PolicyParams::zeros(2, 1, 3, true)),
            clients: vec![ClientSection {
                user_id: 4,
                embedding: vec![0.1, 0.2],
                projection: ProjectionLayer::identity(2),
            }],
            config_json: "{\"seed\":1}".into(),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        let back = Checkpoint::from_bytes(&c.to_bytes().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.matrices.items.as_slice()[3].to_bits(), f64::MIN_POSITIVE.to_bits());
    }

    #[test]
    fn newer_version_fails_loudly() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes[8..12].copy_from_slice(&(VERSION + 1).to_le_bytes());
        let err = Checkpoint::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("newer"), "{err}");
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = sample().to_bytes().unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        assert!(Checkpoint::from_bytes(&bytes).is_err());
        assert!(Checkpoint::from_bytes(&bytes[..20]).is_err());
        assert!(Checkpoint::from_bytes(b"NOTACKPT00000000000000").is_err());
    }
}
