//! Binary formats for parameter sets and expert datasets.
//!
//! Both are little-endian. A parameter file is the magic `RILIRPS1`
//! followed by tensors until end of file, each as
//! `u32 name_len, name, u32 rank, u64 extents[rank], f64 values[..]`.
//! A dataset file is the magic `RILIRDS1`, a header
//! `u32 env_len, env_id, u64 N, T, action_dim, k, H, W`, then per
//! trajectory `T + 1` observations, `T` actions and `T` diagnostic rewards,
//! all as `f64`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rilir_core::diffcore::{ParameterSet, Tensor};
use rilir_core::envsim::{EnvId, ExpertDataset, PixelObservation, Trajectory};

use crate::error::{HarnessError, Result};

pub const PARAMS_MAGIC: &[u8; 8] = b"RILIRPS1";
pub const DATASET_MAGIC: &[u8; 8] = b"RILIRDS1";

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Cursor over a byte slice that reports truncation as a format error.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| HarnessError::format(self.path, "unexpected end of file"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| HarnessError::format(self.path, "size does not fit in memory"))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| HarnessError::format(self.path, "size overflow"))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| HarnessError::format(self.path, "name is not UTF-8"))
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| HarnessError::io(path, e))?;
    Ok(bytes)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::File::create(path).and_then(|mut f| f.write_all(bytes)).map_err(|e| HarnessError::io(path, e))
}

fn check_magic(r: &mut Reader<'_>, magic: &[u8; 8]) -> Result<()> {
    if r.take(8).ok() != Some(&magic[..]) {
        return Err(HarnessError::format(r.path, format!("missing magic {}", String::from_utf8_lossy(magic))));
    }
    Ok(())
}

pub fn encode_params(params: &ParameterSet) -> Vec<u8> {
    let mut out = PARAMS_MAGIC.to_vec();
    for e in params.entries() {
        put_u32(&mut out, e.name.len() as u32);
        out.extend_from_slice(e.name.as_bytes());
        put_u32(&mut out, e.value.rank() as u32);
        for &d in e.value.shape() {
            put_u64(&mut out, d as u64);
        }
        put_f64s(&mut out, e.value.data());
    }
    out
}

pub fn decode_params(bytes: &[u8], path: &Path) -> Result<ParameterSet> {
    let mut r = Reader { bytes, pos: 0, path };
    check_magic(&mut r, PARAMS_MAGIC)?;
    let mut tensors = Vec::new();
    while !r.done() {
        let name = r.string()?;
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let n = n.ok_or_else(|| HarnessError::format(path, "tensor size overflow"))?;
        let data = r.f64s(n)?;
        let t = Tensor::new(shape, data).map_err(|e| HarnessError::format(path, e.to_string()))?;
        tensors.push((name, t));
    }
    Ok(ParameterSet::from_named(tensors))
}

pub fn save_params(params: &ParameterSet, path: &Path) -> Result<()> {
    write_file(path, &encode_params(params))
}

pub fn load_params(path: &Path) -> Result<ParameterSet> {
    decode_params(&read_file(path)?, path)
}

pub fn encode_dataset(ds: &ExpertDataset) -> Vec<u8> {
    let mut out = DATASET_MAGIC.to_vec();
    let id = ds.env_id.as_str();
    put_u32(&mut out, id.len() as u32);
    out.extend_from_slice(id.as_bytes());
    let first = &ds.trajectories()[0].observations()[0];
    for v in [ds.len(), ds.horizon(), ds.action_dim(), first.frames(), first.height(), first.width()] {
        put_u64(&mut out, v as u64);
    }
    for traj in ds.trajectories() {
        for o in traj.observations() {
            put_f64s(&mut out, o.data());
        }
        for a in traj.actions() {
            put_f64s(&mut out, a);
        }
        put_f64s(&mut out, traj.diag_rewards());
    }
    out
}

pub fn decode_dataset(bytes: &[u8], path: &Path) -> Result<ExpertDataset> {
    let mut r = Reader { bytes, pos: 0, path };
    check_magic(&mut r, DATASET_MAGIC)?;
    let env_id: EnvId = r.string()?.parse()?;
    let [n, t, action_dim, k, h, w] = [r.usize()?, r.usize()?, r.usize()?, r.usize()?, r.usize()?, r.usize()?];
    if n == 0 || t == 0 {
        return Err(HarnessError::format(path, "dataset must hold N >= 1 trajectories of T >= 1 steps"));
    }
    let obs_len = k.checked_mul(h).and_then(|x| x.checked_mul(w));
    let obs_len = obs_len.ok_or_else(|| HarnessError::format(path, "observation size overflow"))?;
    let bad = |e: rilir_core::Error| HarnessError::format(path, e.to_string());
    let mut trajectories = Vec::with_capacity(n);
    for _ in 0..n {
        let observations = (0..=t)
            .map(|_| PixelObservation::new(h, w, k, r.f64s(obs_len)?).map_err(bad))
            .collect::<Result<Vec<_>>>()?;
        let actions = (0..t).map(|_| r.f64s(action_dim)).collect::<Result<Vec<_>>>()?;
        let diag = r.f64s(t)?;
        trajectories.push(Trajectory::new(observations, actions, diag).map_err(bad)?);
    }
    if !r.done() {
        return Err(HarnessError::format(path, "trailing bytes after the last trajectory"));
    }
    ExpertDataset::new(env_id, trajectories).map_err(bad)
}

pub fn save_dataset(ds: &ExpertDataset, path: &Path) -> Result<()> {
    write_file(path, &encode_dataset(ds))
}

pub fn load_dataset(path: &Path) -> Result<ExpertDataset> {
    decode_dataset(&read_file(path)?, path)
}
