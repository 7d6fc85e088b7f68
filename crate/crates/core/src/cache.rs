//! On-disk cache of traced power matrices.
//!
//! One file per scenario channel hash. Layout (little-endian):
//! 8-byte magic, `u32` version, 64-byte ASCII hex hash, three `u64`
//! dimensions, then the raw IEEE-754 bits of every entry in `[k][l][n]`
//! order, so a reload is bit-identical to what was traced.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::channel::PowerMatrix;
use crate::scenario::ScenarioConfig;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"WDMAPMAT";
const VERSION: u32 = 1;
const HASH_LEN: usize = 64;

fn format_error(reason: impl Into<String>) -> Error {
    Error::Format {
        kind: "power-matrix cache",
        reason: reason.into(),
    }
}

pub fn write_power_matrix(mut w: impl Write, pm: &PowerMatrix, hash: &str) -> std::io::Result<()> {
    assert_eq!(hash.len(), HASH_LEN, "cache key must be a hex SHA-256");
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(hash.as_bytes())?;
    let (k, l, n) = pm.dims();
    for d in [k, l, n] {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in pm.as_slice() {
        w.write_all(&v.to_bits().to_le_bytes())?;
    }
    w.flush()
}

/// Reads a cached matrix, returning it with the hash it was stored under.
pub fn read_power_matrix(mut r: impl Read) -> Result<(PowerMatrix, String)> {
    let mut header = [0u8; 8 + 4 + HASH_LEN + 24];
    r.read_exact(&mut header)
        .map_err(|_| format_error("truncated header"))?;
    if &header[..8] != MAGIC {
        return Err(format_error("bad magic"));
    }
    let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(format_error(format!("unsupported version {version}")));
    }
    let hash = std::str::from_utf8(&header[12..12 + HASH_LEN])
        .map_err(|_| format_error("hash is not ASCII"))?
        .to_string();
    let dim = |i: usize| {
        let at = 12 + HASH_LEN + 8 * i;
        u64::from_le_bytes(header[at..at + 8].try_into().unwrap()) as usize
    };
    let (k, l, n) = (dim(0), dim(1), dim(2));
    let len = k
        .checked_mul(l)
        .and_then(|x| x.checked_mul(n))
        .filter(|x| *x <= 1 << 28)
        .ok_or_else(|| format_error("implausible dimensions"))?;
    let mut body = vec![0u8; len * 8];
    r.read_exact(&mut body)
        .map_err(|_| format_error("truncated body"))?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)
        .map_err(|_| format_error("unreadable trailer"))?;
    if !rest.is_empty() {
        return Err(format_error("trailing bytes"));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    Ok((PowerMatrix::from_vec(k, l, n, data)?, hash))
}

/// Directory of cached matrices keyed by [`ScenarioConfig::channel_hash`].
#[derive(Debug, Clone)]
pub struct PowerCache {
    dir: PathBuf,
}

impl PowerCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.pmat"))
    }

    /// `Ok(None)` when nothing is cached for `hash`.
    pub fn load(&self, hash: &str) -> Result<Option<PowerMatrix>> {
        let path = self.path_for(hash);
        let file = match std::fs::File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(path, e)),
        };
        let (pm, stored) = read_power_matrix(std::io::BufReader::new(file))?;
        if stored != hash {
            return Err(format_error(format!(
                "{} holds hash {stored}, expected {hash}",
                path.display()
            )));
        }
        Ok(Some(pm))
    }

    pub fn store(&self, hash: &str, pm: &PowerMatrix) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.path_for(hash);
        // write then rename so a crash never leaves a half-written entry
        let tmp = path.with_extension("pmat.tmp");
        let file = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        write_power_matrix(std::io::BufWriter::new(file), pm, hash)
            .map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Cached matrix for `cfg`, tracing and storing it on a miss.
    pub fn load_or_compute(&self, cfg: &ScenarioConfig) -> Result<PowerMatrix> {
        let hash = cfg.channel_hash();
        if let Some(pm) = self.load(&hash)? {
            return Ok(pm);
        }
        let pm = cfg.compute_power_matrix()?;
        self.store(&hash, &pm)?;
        Ok(pm)
    }
}

/// Traces `cfg`, going through the cache when a directory is given.
pub fn power_matrix_for(cfg: &ScenarioConfig, cache_dir: Option<&Path>) -> Result<PowerMatrix> {
    match cache_dir {
        Some(dir) => PowerCache::new(dir).load_or_compute(cfg),
        None => cfg.compute_power_matrix(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PowerMatrix {
        let data = (0..2 * 3 * 4)
            .map(|i| (i as f64 + 0.1).sqrt() * 1e-5)
            .collect();
        PowerMatrix::from_vec(2, 3, 4, data).unwrap()
    }

    #[test]
    fn bit_exact_round_trip() {
        let pm = sample();
        let hash = "a".repeat(64);
        let mut buf = Vec::new();
        write_power_matrix(&mut buf, &pm, &hash).unwrap();
        let (back, h) = read_power_matrix(buf.as_slice()).unwrap();
        assert_eq!(h, hash);
        let bits = |p: &PowerMatrix| p.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&pm));
        assert_eq!(back.dims(), pm.dims());
    }

    #[test]
    fn rejects_corruption() {
        let mut buf = Vec::new();
        write_power_matrix(&mut buf, &sample(), &"b".repeat(64)).unwrap();
        assert!(read_power_matrix(&buf[..buf.len() - 3]).is_err());
        let mut bad = buf.clone();
        bad[9] = 7;
        assert!(read_power_matrix(bad.as_slice()).is_err());
        let mut long = buf.clone();
        long.push(1);
        assert!(read_power_matrix(long.as_slice()).is_err());
    }

    #[test]
    fn directory_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cache = PowerCache::new(dir.path().join("nested"));
        let hash = "c".repeat(64);
        assert!(cache.load(&hash).unwrap().is_none());
        cache.store(&hash, &sample()).unwrap();
        assert_eq!(cache.load(&hash).unwrap().unwrap(), sample());
        // an entry renamed under a different key is detected
        let other = "d".repeat(64);
        std::fs::copy(cache.path_for(&hash), cache.path_for(&other)).unwrap();
        assert!(cache.load(&other).is_err());
    }
}
