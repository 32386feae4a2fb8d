//! Binary checkpoints with a JSON sidecar.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    b"CAQN"
//! version  u32 (= 1)
//! algo     u8  (0 iql, 1 vdn, 2 qmix)
//! agents   u32
//! nets     u32 (agents, plus 4 hypernetworks for qmix)
//! per net: n_sizes u32, sizes u32 * n_sizes, params f64 * count
//! ```

use super::learner::{Algo, HyperParams};
use super::mixer::QmixMixer;
use super::net::{param_count, Mlp};
use super::policy::QPolicy;
use super::MarlError;
use crate::env::ContextMap;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const MAGIC: &[u8; 4] = b"CAQN";
pub const FORMAT_VERSION: u32 = 1;
pub const META_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub algo: Algo,
    pub agents: Vec<Mlp>,
    pub mixer: Option<QmixMixer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub schema_version: u32,
    pub algo: Algo,
    pub env_steps: u64,
    pub train_steps: u64,
    pub seed: u64,
    pub hyper: HyperParams,
    pub contexts: ContextMap,
}

impl Checkpoint {
    pub fn policy(&self) -> QPolicy {
        QPolicy { algo: self.algo, agents: self.agents.clone() }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.algo.tag());
        out.extend_from_slice(&(self.agents.len() as u32).to_le_bytes());
        let nets: Vec<&Mlp> = self
            .agents
            .iter()
            .chain(self.mixer.iter().flat_map(|m| m.nets()))
            .collect();
        out.extend_from_slice(&(nets.len() as u32).to_le_bytes());
        for net in nets {
            out.extend_from_slice(&(net.sizes().len() as u32).to_le_bytes());
            for &s in net.sizes() {
                out.extend_from_slice(&(s as u32).to_le_bytes());
            }
            for p in &net.params {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint, MarlError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(MarlError::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(MarlError::Checkpoint(format!("unsupported version {version}")));
        }
        let tag = r.take(1)?[0];
        let algo = Algo::from_tag(tag).ok_or_else(|| MarlError::Checkpoint(format!("unknown algo tag {tag}")))?;
        let n_agents = r.u32()? as usize;
        let n_nets = r.u32()? as usize;
        let expected = n_agents + if algo == Algo::Qmix { 4 } else { 0 };
        if n_nets != expected {
            return Err(MarlError::Checkpoint(format!("{n_nets} networks, expected {expected}")));
        }
        let mut nets = Vec::with_capacity(n_nets);
        for _ in 0..n_nets {
            let n_sizes = r.u32()? as usize;
            if n_sizes < 2 || n_sizes > 64 {
                return Err(MarlError::Checkpoint(format!("bad layer count {n_sizes}")));
            }
            let sizes: Vec<usize> = (0..n_sizes).map(|_| r.u32().map(|s| s as usize)).collect::<Result<_, _>>()?;
            let count = param_count(&sizes);
            if count * 8 > r.remaining() {
                return Err(MarlError::Checkpoint("truncated parameters".into()));
            }
            let params = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
            nets.push(Mlp::from_params(&sizes, params)?);
        }
        if r.remaining() != 0 {
            return Err(MarlError::Checkpoint(format!("{} trailing bytes", r.remaining())));
        }
        let mixer = if algo == Algo::Qmix {
            let hv = nets.pop().expect("4 mixer nets");
            let hw2 = nets.pop().expect("4 mixer nets");
            let hb1 = nets.pop().expect("4 mixer nets");
            let hw1 = nets.pop().expect("4 mixer nets");
            let embed = hb1.output_dim();
            if hw1.output_dim() != embed * n_agents || hw2.output_dim() != embed || hv.output_dim() != 1 {
                return Err(MarlError::Checkpoint("inconsistent mixer shapes".into()));
            }
            Some(QmixMixer { n_agents, embed, hyper_w1: hw1, hyper_b1: hb1, hyper_w2: hw2, hyper_v: hv })
        } else {
            None
        };
        Ok(Checkpoint { algo, agents: nets, mixer })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], MarlError> {
        if self.pos + n > self.bytes.len() {
            return Err(MarlError::Checkpoint("unexpected end of file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, MarlError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64, MarlError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

/// Sidecar path: the checkpoint path with a `.json` extension.
pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint, meta: &CheckpointMeta) -> Result<(), MarlError> {
    std::fs::write(path, ckpt.to_bytes())?;
    let json = serde_json::to_string_pretty(meta).map_err(|e| MarlError::Checkpoint(e.to_string()))?;
    std::fs::write(meta_path(path), json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(Checkpoint, Option<CheckpointMeta>), MarlError> {
    let ckpt = Checkpoint::from_bytes(&std::fs::read(path)?)?;
    let meta = match std::fs::read_to_string(meta_path(path)) {
        Ok(text) => Some(serde_json::from_str(&text).map_err(|e| MarlError::Checkpoint(e.to_string()))?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e.into()),
    };
    Ok((ckpt, meta))
}
