//! On-disk precompute cache.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic "ADHOCEDP" | version u32 | instance sha256 [32]
//! num_goals u32 | cells u32 | epsilon f64
//! edp tables:     count u32, then per table g1 u32, g2 u32, sweeps u64, len u64, len x f64
//! worker wcd:     count u32, then per table g1 u32, g2 u32, len u64, len x f64
//! fetcher wcd:    same as worker wcd
//! ```
//!
//! Tables are written in the order [`ZoneTables`] stores them, so equal
//! caches are equal byte strings.

use std::path::Path;

use sha2::{Digest, Sha256};

use super::BenchError;
use crate::domain::{DomainInstance, UroPolicies};
use crate::edp::{EdpConfig, EdpTable};
use crate::zones::{WcdTable, ZoneError, ZoneTables};

pub const CACHE_MAGIC: &[u8; 8] = b"ADHOCEDP";
pub const CACHE_VERSION: u32 = 1;

/// SHA-256 of the instance's canonical JSON layout.
pub fn instance_digest(instance: &DomainInstance) -> [u8; 32] {
    let json = serde_json::to_vec(instance.layout()).expect("layout serializes");
    Sha256::digest(&json).into()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecomputeCache {
    pub digest: [u8; 32],
    pub epsilon: f64,
    pub tables: ZoneTables,
}

impl PrecomputeCache {
    pub fn build(instance: &DomainInstance, config: &EdpConfig) -> Result<Self, ZoneError> {
        Self::build_with(instance, &UroPolicies::new(instance), config)
    }

    pub fn build_with(
        instance: &DomainInstance,
        policies: &UroPolicies,
        config: &EdpConfig,
    ) -> Result<Self, ZoneError> {
        Ok(PrecomputeCache {
            digest: instance_digest(instance),
            epsilon: config.epsilon,
            tables: ZoneTables::build(instance, policies, config)?,
        })
    }

    pub fn digest_hex(&self) -> String {
        self.digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn matches(&self, instance: &DomainInstance) -> bool {
        self.digest == instance_digest(instance)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let t = &self.tables;
        let mut out = Vec::new();
        out.extend_from_slice(CACHE_MAGIC);
        out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        out.extend_from_slice(&self.digest);
        put_u32(&mut out, t.num_goals());
        put_u32(&mut out, t.cells());
        out.extend_from_slice(&self.epsilon.to_le_bytes());

        put_u32(&mut out, t.edp_tables().len());
        for e in t.edp_tables() {
            put_u32(&mut out, e.g1);
            put_u32(&mut out, e.g2);
            out.extend_from_slice(&(e.sweeps as u64).to_le_bytes());
            put_f64s(&mut out, e.values.iter().copied());
        }
        for wcd in [t.worker_wcd_tables(), t.fetcher_wcd_tables()] {
            put_u32(&mut out, wcd.len());
            for w in wcd {
                put_u32(&mut out, w.g1);
                put_u32(&mut out, w.g2);
                put_f64s(&mut out, w.values.iter().map(|&v| v as f64));
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BenchError> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(8)? != CACHE_MAGIC {
            return Err(BenchError::Cache("not a precompute cache (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != CACHE_VERSION {
            return Err(BenchError::Cache(format!(
                "cache format version {version}, this build reads version {CACHE_VERSION}"
            )));
        }
        let digest: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let num_goals = r.u32()? as usize;
        let cells = r.u32()? as usize;
        let epsilon = r.f64()?;

        let n_edp = r.u32()?;
        let mut edp = Vec::with_capacity(n_edp as usize);
        for _ in 0..n_edp {
            let g1 = r.u32()? as usize;
            let g2 = r.u32()? as usize;
            let sweeps = r.u64()? as usize;
            let values = r.f64s()?;
            edp.push(EdpTable {
                g1,
                g2,
                values,
                epsilon,
                sweeps,
            });
        }
        let mut wcd = [Vec::new(), Vec::new()];
        for side in &mut wcd {
            for _ in 0..r.u32()? {
                let g1 = r.u32()? as usize;
                let g2 = r.u32()? as usize;
                let values = r
                    .f64s()?
                    .into_iter()
                    .map(|v| {
                        if v >= 0.0 && v <= u32::MAX as f64 && v.fract() == 0.0 {
                            Ok(v as u32)
                        } else {
                            Err(BenchError::Cache(format!("bad divergence point {v}")))
                        }
                    })
                    .collect::<Result<_, _>>()?;
                side.push(WcdTable { g1, g2, values });
            }
        }
        if r.at != bytes.len() {
            return Err(BenchError::Cache(format!(
                "{} trailing bytes",
                bytes.len() - r.at
            )));
        }
        let [worker, fetcher] = wcd;
        let tables = ZoneTables::from_parts(num_goals, cells, edp, worker, fetcher)
            .map_err(|e| BenchError::Cache(e.to_string()))?;
        Ok(PrecomputeCache {
            digest,
            epsilon,
            tables,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), BenchError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Reads a cache and checks it was built from `instance`.
    pub fn load(path: &Path, instance: &DomainInstance) -> Result<Self, BenchError> {
        let cache = Self::from_bytes(&std::fs::read(path)?)?;
        if !cache.matches(instance) {
            return Err(BenchError::Cache(format!(
                "{} was built for a different instance",
                path.display()
            )));
        }
        Ok(cache)
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("fits u32").to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, values: impl ExactSizeIterator<Item = f64>) {
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], BenchError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| BenchError::Cache("truncated cache".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, BenchError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, BenchError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, BenchError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self) -> Result<Vec<f64>, BenchError> {
        let len = usize::try_from(self.u64()?).map_err(|_| BenchError::Cache("length".into()))?;
        if len > (self.bytes.len() - self.at) / 8 {
            return Err(BenchError::Cache("truncated cache".into()));
        }
        (0..len).map(|_| self.f64()).collect()
    }
}
