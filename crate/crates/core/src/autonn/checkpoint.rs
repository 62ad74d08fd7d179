//! Binary checkpoint container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "SCPG"  u32 version
//! u32 meta_len  meta (UTF-8, usually the JSON training config)
//! u32 section_count
//! per section:
//!   u32 name_len  name
//!   u32 param_count
//!   per param: u32 name_len name  u32 ndim  u64 dims[ndim]  f64 data[numel]
//!   u8 has_optimizer
//!   if 1: u64 step  f64 lr beta1 beta2 eps  f64 m[total]  f64 v[total]
//! ```

use super::adam::{AdamConfig, AdamState};
use super::tensor::{ParamSet, Tensor};
use super::NnError;
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"SCPG";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub params: ParamSet,
    pub optimizer: Option<AdamState>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub meta: String,
    pub sections: Vec<Section>,
}

impl Checkpoint {
    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, FORMAT_VERSION);
        put_str(&mut out, &self.meta);
        put_u32(&mut out, self.sections.len() as u32);
        for s in &self.sections {
            put_str(&mut out, &s.name);
            put_u32(&mut out, s.params.len() as u32);
            for (name, t) in s.params.iter() {
                put_str(&mut out, name);
                put_u32(&mut out, t.shape.len() as u32);
                for &d in &t.shape {
                    out.extend_from_slice(&(d as u64).to_le_bytes());
                }
                put_f64s(&mut out, &t.data);
            }
            match &s.optimizer {
                None => out.push(0),
                Some(st) => {
                    out.push(1);
                    out.extend_from_slice(&st.step.to_le_bytes());
                    let c = st.config;
                    put_f64s(&mut out, &[c.lr, c.beta1, c.beta2, c.eps]);
                    put_f64s(&mut out, &st.m);
                    put_f64s(&mut out, &st.v);
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(bad("missing SCPG magic"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported format version {version}")));
        }
        let meta = r.string()?;
        let n_sections = r.u32()?;
        let mut sections = Vec::with_capacity(n_sections as usize);
        for _ in 0..n_sections {
            let name = r.string()?;
            let n_params = r.u32()?;
            let mut entries = Vec::with_capacity(n_params as usize);
            for _ in 0..n_params {
                let pname = r.string()?;
                let ndim = r.u32()? as usize;
                let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
                let numel = shape
                    .iter()
                    .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                    .ok_or_else(|| bad("shape overflow"))?;
                let data = r.f64s(numel)?;
                entries.push((pname, Tensor::new(data, &shape, true).map_err(|e| bad(&e.to_string()))?));
            }
            let params = ParamSet::new(entries).map_err(|e| bad(&e.to_string()))?;
            let optimizer = match r.take(1)?[0] {
                0 => None,
                1 => {
                    let step = r.u64()?;
                    let c = r.f64s(4)?;
                    let total = params.numel();
                    Some(AdamState {
                        config: AdamConfig {
                            lr: c[0],
                            beta1: c[1],
                            beta2: c[2],
                            eps: c[3],
                        },
                        step,
                        m: r.f64s(total)?,
                        v: r.f64s(total)?,
                    })
                }
                other => return Err(bad(&format!("bad optimizer flag {other}"))),
            };
            sections.push(Section {
                name,
                params,
                optimizer,
            });
        }
        if r.pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(Self { meta, sections })
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn bad(msg: &str) -> NnError {
    NnError::BadCheckpoint(msg.to_string())
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

fn put_f64s(out: &mut Vec<u8>, v: &[f64]) {
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| bad("truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, NnError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| bad("invalid UTF-8"))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, NnError> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| bad("length overflow"))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}
