//! Binary cache for [`AlphaTensor`].
//!
//! Layout (little endian): magic `BARALPHA`, format version `u32`, the
//! [`TensorKey`] fields, mode counts and mode lists, the emission then shift
//! payload as `(re, im)` pairs, and a trailing SHA-256 of everything before it.
//! A file whose key differs from the requested one is never reused.

use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use super::alpha::{build_alpha_tensor, AlphaSettings, AlphaTensor, TensorKey};
use super::sphere::EmissionPattern;
use crate::basis::{ModeIndex, TrapSpec};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"BARALPHA";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;
/// Refuse headers that claim more modes than this.
const MAX_MODES: u32 = 1 << 16;

fn fmt_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

pub fn encode(t: &AlphaTensor) -> Vec<u8> {
    let d = t.composite_dim();
    let mut out = Vec::with_capacity(64 + 2 * d * d * 16 + DIGEST_LEN);
    out.extend_from_slice(MAGIC);
    let w = &mut out;
    w.write_u32::<LittleEndian>(FORMAT_VERSION).unwrap();
    let k = &t.key;
    w.write_u32::<LittleEndian>(k.shells_g).unwrap();
    w.write_u32::<LittleEndian>(k.shells_e).unwrap();
    w.write_u32::<LittleEndian>(k.ground_cap).unwrap();
    w.write_u32::<LittleEndian>(k.excited_cap).unwrap();
    w.write_f64::<LittleEndian>(k.eta_sq).unwrap();
    w.write_u32::<LittleEndian>(k.sphere_order).unwrap();
    w.write_u32::<LittleEndian>(k.pv_grid).unwrap();
    w.write_f64::<LittleEndian>(k.kappa_max).unwrap();
    w.write_u8(k.include_imaginary as u8).unwrap();
    w.write_u8(k.pattern.code()).unwrap();
    w.write_u32::<LittleEndian>(t.excited.len() as u32).unwrap();
    w.write_u32::<LittleEndian>(t.ground.len() as u32).unwrap();
    for m in t.excited.iter().chain(&t.ground) {
        for a in m.axes() {
            w.write_u32::<LittleEndian>(a).unwrap();
        }
    }
    for c in t.emission.iter().chain(&t.shift) {
        w.write_f64::<LittleEndian>(c.re).unwrap();
        w.write_f64::<LittleEndian>(c.im).unwrap();
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

/// Header fields only; cheap to read and to compare against a wanted key.
pub fn decode_key(bytes: &[u8]) -> Result<TensorKey> {
    let mut r = Cursor::new(bytes);
    read_header(&mut r).map(|(k, _, _)| k)
}

fn read_header(r: &mut Cursor<&[u8]>) -> Result<(TensorKey, u32, u32)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| fmt_err("truncated magic"))?;
    if &magic != MAGIC {
        return Err(fmt_err("not an alpha tensor cache"));
    }
    let short = |_| fmt_err("truncated header");
    let version = r.read_u32::<LittleEndian>().map_err(short)?;
    if version != FORMAT_VERSION {
        return Err(fmt_err(format!("unsupported cache version {version}")));
    }
    let shells_g = r.read_u32::<LittleEndian>().map_err(short)?;
    let shells_e = r.read_u32::<LittleEndian>().map_err(short)?;
    let ground_cap = r.read_u32::<LittleEndian>().map_err(short)?;
    let excited_cap = r.read_u32::<LittleEndian>().map_err(short)?;
    let eta_sq = r.read_f64::<LittleEndian>().map_err(short)?;
    let sphere_order = r.read_u32::<LittleEndian>().map_err(short)?;
    let pv_grid = r.read_u32::<LittleEndian>().map_err(short)?;
    let kappa_max = r.read_f64::<LittleEndian>().map_err(short)?;
    let include_imaginary = match r.read_u8().map_err(short)? {
        0 => false,
        1 => true,
        b => return Err(fmt_err(format!("bad imaginary flag {b}"))),
    };
    let pattern = EmissionPattern::from_code(r.read_u8().map_err(short)?)
        .ok_or_else(|| fmt_err("unknown emission pattern"))?;
    let ne = r.read_u32::<LittleEndian>().map_err(short)?;
    let ng = r.read_u32::<LittleEndian>().map_err(short)?;
    if ne == 0 || ng == 0 || ne > MAX_MODES || ng > MAX_MODES {
        return Err(fmt_err(format!("implausible mode counts {ne} x {ng}")));
    }
    let key = TensorKey {
        shells_g,
        shells_e,
        ground_cap,
        excited_cap,
        eta_sq,
        sphere_order,
        pv_grid,
        kappa_max,
        include_imaginary,
        pattern,
    };
    Ok((key, ne, ng))
}

pub fn decode(bytes: &[u8]) -> Result<AlphaTensor> {
    if bytes.len() < MAGIC.len() + DIGEST_LEN {
        return Err(fmt_err("file too short"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    let mut r = Cursor::new(body);
    let (key, ne, ng) = read_header(&mut r)?;
    let (ne, ng) = (ne as usize, ng as usize);
    let d = ne * ng;
    let expected = r.position() as usize + 12 * (ne + ng) + 2 * d * d * 16;
    if body.len() != expected {
        return Err(fmt_err(format!("payload length {} does not match header ({expected})", body.len())));
    }
    if Sha256::digest(body).as_slice() != digest {
        return Err(fmt_err("checksum mismatch"));
    }
    let mut read_modes = |n: usize| -> Result<Vec<ModeIndex>> {
        (0..n)
            .map(|_| {
                let mut a = [0u32; 3];
                for v in &mut a {
                    *v = r.read_u32::<LittleEndian>().map_err(|_| fmt_err("truncated modes"))?;
                }
                Ok(ModeIndex::from_axes(a))
            })
            .collect()
    };
    let excited = read_modes(ne)?;
    let ground = read_modes(ng)?;
    let mut read_values = || -> Result<Vec<Complex64>> {
        (0..d * d)
            .map(|_| {
                let re = r.read_f64::<LittleEndian>().map_err(|_| fmt_err("truncated payload"))?;
                let im = r.read_f64::<LittleEndian>().map_err(|_| fmt_err("truncated payload"))?;
                Ok(Complex64::new(re, im))
            })
            .collect()
    };
    let emission = read_values()?;
    let shift = read_values()?;
    Ok(AlphaTensor { key, excited, ground, emission, shift })
}

#[derive(Debug, Clone, PartialEq)]
pub enum CacheStatus {
    Hit,
    Created,
    /// An existing file was unusable; the reason is kept for reports.
    Rebuilt(String),
}

pub fn save(path: &Path, t: &AlphaTensor) -> Result<()> {
    std::fs::write(path, encode(t))?;
    Ok(())
}

/// Load a cached tensor for `spec`/`settings` or build and store a fresh one.
pub fn load_or_build(
    path: &Path,
    spec: &TrapSpec,
    settings: &AlphaSettings,
) -> Result<(AlphaTensor, CacheStatus)> {
    let want = TensorKey::new(spec, settings);
    let status = match std::fs::read(path) {
        Ok(bytes) => match decode(&bytes) {
            Ok(t) if t.key == want => {
                if t.ground == spec.ground_modes()? && t.excited == spec.excited_modes()? {
                    return Ok((t, CacheStatus::Hit));
                }
                CacheStatus::Rebuilt("cache mode list differs from the configured basis".into())
            }
            Ok(t) => CacheStatus::Rebuilt(format!("cache key mismatch: found {:?}", t.key)),
            Err(e) => CacheStatus::Rebuilt(format!("cache unreadable: {e}")),
        },
        Err(_) => CacheStatus::Created,
    };
    if let CacheStatus::Rebuilt(reason) = &status {
        log::warn!("rebuilding alpha tensor: {reason}");
    }
    let t = build_alpha_tensor(spec, settings)?;
    save(path, &t)?;
    Ok((t, status))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (TrapSpec, AlphaSettings) {
        let spec = TrapSpec { shells_g: 3, shells_e: 2, eta_sq: 1.0, ..TrapSpec::default() };
        let settings = AlphaSettings { pv_grid: 40, sphere_order: 6, ..AlphaSettings::default() };
        (spec, settings)
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let (spec, settings) = tiny();
        let t = build_alpha_tensor(&spec, &settings).unwrap();
        let bytes = encode(&t);
        let back = decode(&bytes).unwrap();
        assert_eq!(encode(&back), bytes);
        assert_eq!(back, t);
    }

    #[test]
    fn corruption_is_detected() {
        let (spec, settings) = tiny();
        let mut bytes = encode(&build_alpha_tensor(&spec, &settings).unwrap());
        let n = bytes.len();
        bytes[n / 2] ^= 0x40;
        assert!(decode(&bytes).is_err());
        assert!(decode(&bytes[..10]).is_err());
        assert!(decode(b"garbage").is_err());
    }

    #[test]
    fn key_mismatch_rebuilds() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("alpha.bin");
        let (spec, settings) = tiny();
        let (_, s) = load_or_build(&path, &spec, &settings).unwrap();
        assert_eq!(s, CacheStatus::Created);
        let (_, s) = load_or_build(&path, &spec, &settings).unwrap();
        assert_eq!(s, CacheStatus::Hit);
        let other = TrapSpec { eta_sq: 1.5, ..spec };
        let (t, s) = load_or_build(&path, &other, &settings).unwrap();
        assert!(matches!(s, CacheStatus::Rebuilt(ref r) if r.contains("mismatch")));
        assert_eq!(t.key.eta_sq, 1.5);
        std::fs::write(&path, b"BARALPHA\x07\x00\x00\x00").unwrap();
        let (_, s) = load_or_build(&path, &other, &settings).unwrap();
        assert!(matches!(s, CacheStatus::Rebuilt(_)));
    }
}
