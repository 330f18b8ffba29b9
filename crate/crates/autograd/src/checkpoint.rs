//! Minimal binary checkpoint container: named arrays plus named counters
//! and scalars. The byte layout is a deterministic function of the snapshot
//! contents, so identical state round-trips to identical files.

use crate::element::Element;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{ArrayD, IxDyn};
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 4] = b"MVWM";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("element width mismatch: file has {file} bytes, expected {expected}")]
    DtypeMismatch { file: usize, expected: usize },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

/// In-memory checkpoint contents.
#[derive(Clone, Debug, Default)]
pub struct Snapshot<E: Element> {
    pub step: u64,
    pub fingerprint: String,
    pub arrays: Vec<(String, ArrayD<E>)>,
    pub scalars: Vec<(String, f64)>,
    pub counters: Vec<(String, u64)>,
}

impl<E: Element> Snapshot<E> {
    pub fn new(step: u64, fingerprint: impl Into<String>) -> Self {
        Snapshot {
            step,
            fingerprint: fingerprint.into(),
            arrays: Vec::new(),
            scalars: Vec::new(),
            counters: Vec::new(),
        }
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalars.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn counter(&self, name: &str) -> Option<u64> {
        self.counters.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> Result<String, CheckpointError> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| CheckpointError::Malformed(e.to_string()))
}

pub fn save<E: Element>(path: &Path, snap: &Snapshot<E>) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u64::<LittleEndian>(snap.step)?;
    write_str(&mut w, &snap.fingerprint)?;
    w.write_u32::<LittleEndian>(E::BYTES as u32)?;

    w.write_u32::<LittleEndian>(snap.arrays.len() as u32)?;
    for (name, arr) in &snap.arrays {
        write_str(&mut w, name)?;
        w.write_u32::<LittleEndian>(arr.ndim() as u32)?;
        for &d in arr.shape() {
            w.write_u64::<LittleEndian>(d as u64)?;
        }
        let mut bytes = Vec::with_capacity(arr.len() * E::BYTES);
        for &x in arr.as_standard_layout().iter() {
            x.write_le(&mut bytes);
        }
        w.write_all(&bytes)?;
    }

    w.write_u32::<LittleEndian>(snap.scalars.len() as u32)?;
    for (name, x) in &snap.scalars {
        write_str(&mut w, name)?;
        w.write_f64::<LittleEndian>(*x)?;
    }

    w.write_u32::<LittleEndian>(snap.counters.len() as u32)?;
    for (name, x) in &snap.counters {
        write_str(&mut w, name)?;
        w.write_u64::<LittleEndian>(*x)?;
    }
    w.flush()
}

pub fn load<E: Element>(path: &Path) -> Result<Snapshot<E>, CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let step = r.read_u64::<LittleEndian>()?;
    let fingerprint = read_str(&mut r)?;
    let width = r.read_u32::<LittleEndian>()? as usize;
    if width != E::BYTES {
        return Err(CheckpointError::DtypeMismatch {
            file: width,
            expected: E::BYTES,
        });
    }

    let mut snap = Snapshot::new(step, fingerprint);
    let n_arrays = r.read_u32::<LittleEndian>()?;
    for _ in 0..n_arrays {
        let name = read_str(&mut r)?;
        let ndim = r.read_u32::<LittleEndian>()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.read_u64::<LittleEndian>()? as usize);
        }
        let n: usize = shape.iter().product();
        let mut bytes = vec![0u8; n * E::BYTES];
        r.read_exact(&mut bytes)?;
        let data: Vec<E> = bytes.chunks_exact(E::BYTES).map(E::read_le).collect();
        let arr = ArrayD::from_shape_vec(IxDyn(&shape), data)
            .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        snap.arrays.push((name, arr));
    }

    let n_scalars = r.read_u32::<LittleEndian>()?;
    for _ in 0..n_scalars {
        let name = read_str(&mut r)?;
        let x = r.read_f64::<LittleEndian>()?;
        snap.scalars.push((name, x));
    }

    let n_counters = r.read_u32::<LittleEndian>()?;
    for _ in 0..n_counters {
        let name = read_str(&mut r)?;
        let x = r.read_u64::<LittleEndian>()?;
        snap.counters.push((name, x));
    }
    Ok(snap)
}
