//! Binary Green-table cache.
//!
//! Little-endian layout: magic `GFFG`, version `u32`, dimension `u32`, mode
//! `u8` (0 = free), tolerance `f64`, then records sorted by displacement, each
//! `d` × `i64` coordinates followed by the `f64` value, until end of file.

use super::FreeGreen;
use crate::{Error, Result};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

pub const CACHE_MAGIC: &[u8; 4] = b"GFFG";
pub const CACHE_VERSION: u32 = 1;
pub const CACHE_ENV: &str = "GFFPERC_CACHE_DIR";
const MODE_FREE: u8 = 0;

pub fn write_cache<W: Write>(green: &FreeGreen, mut w: W) -> Result<()> {
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    w.write_all(&(green.dim() as u32).to_le_bytes())?;
    w.write_all(&[MODE_FREE])?;
    w.write_all(&green.tolerance().to_le_bytes())?;
    for (k, v) in green.entries() {
        for c in k {
            w.write_all(&(c as i64).to_le_bytes())?;
        }
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a cache into a fresh table; rejects files computed at a looser tolerance.
pub fn read_cache<R: Read>(mut r: R, d: usize, tol: f64) -> Result<FreeGreen> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let bad = |m: &str| Error::Config(format!("Green cache: {m}"));
    if buf.len() < 21 || &buf[..4] != CACHE_MAGIC {
        return Err(bad("missing GFFG header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap());
    if u32_at(4) != CACHE_VERSION {
        return Err(bad("unsupported version"));
    }
    if u32_at(8) as usize != d || buf[12] != MODE_FREE {
        return Err(bad("dimension or mode mismatch"));
    }
    let file_tol = f64::from_le_bytes(buf[13..21].try_into().unwrap());
    if file_tol > tol {
        return Err(bad("cached values are less accurate than requested"));
    }
    let rec = 8 * (d + 1);
    let body = &buf[21..];
    if body.len() % rec != 0 {
        return Err(bad("truncated record"));
    }
    let green = FreeGreen::new(d, tol)?;
    green.preload(body.chunks_exact(rec).map(|c| {
        let key = (0..d)
            .map(|j| i64::from_le_bytes(c[8 * j..8 * j + 8].try_into().unwrap()) as u32)
            .collect();
        (key, f64::from_le_bytes(c[8 * d..].try_into().unwrap()))
    }));
    Ok(green)
}

fn cache_path(dir: &Path, d: usize) -> PathBuf {
    dir.join(format!("green_free_d{d}.gffg"))
}

impl FreeGreen {
    /// Loads the table from `$GFFPERC_CACHE_DIR` when a compatible file exists.
    pub fn from_env_cache(d: usize, tol: f64) -> Result<FreeGreen> {
        if let Some(dir) = std::env::var_os(CACHE_ENV) {
            let path = cache_path(Path::new(&dir), d);
            if let Ok(f) = std::fs::File::open(&path) {
                match read_cache(std::io::BufReader::new(f), d, tol) {
                    Ok(g) => return Ok(g),
                    Err(e) => log::warn!("ignoring Green cache {}: {e}", path.display()),
                }
            }
        }
        FreeGreen::new(d, tol)
    }

    /// Writes the table to `$GFFPERC_CACHE_DIR` if the variable is set.
    pub fn persist_env_cache(&self) -> Result<Option<PathBuf>> {
        let Some(dir) = std::env::var_os(CACHE_ENV) else {
            return Ok(None);
        };
        std::fs::create_dir_all(&dir)?;
        let path = cache_path(Path::new(&dir), self.dim());
        let tmp = path.with_extension("tmp");
        write_cache(self, std::io::BufWriter::new(std::fs::File::create(&tmp)?))?;
        std::fs::rename(&tmp, &path)?;
        Ok(Some(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_round_trip_preserves_values() {
        let g = FreeGreen::new(3, 1e-10).unwrap();
        for x in [[0i64, 0, 0], [1, 2, 0], [3, 3, 3]] {
            g.value(&x).unwrap();
        }
        let mut buf = Vec::new();
        write_cache(&g, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"GFFG");
        assert_eq!(buf.len(), 21 + 3 * 32);
        let h = read_cache(&buf[..], 3, 1e-9).unwrap();
        assert_eq!(h.entries(), g.entries());
        assert!(read_cache(&buf[..], 3, 1e-12).is_err());
        assert!(read_cache(&buf[..], 4, 1e-9).is_err());
        assert!(read_cache(&buf[..buf.len() - 3], 3, 1e-9).is_err());
    }
}
