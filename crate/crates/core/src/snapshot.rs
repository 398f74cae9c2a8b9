//! Binary snapshots of grid solutions.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset  size  field
//! 0       8     magic "CHEMOSN1"
//! 8       4     u32 rank (3 = q(x, v, y), 2 = p(x, v))
//! 12      4     u32 reserved (0)
//! 16      24    u64 n_x, n_v, n_y (n_y = 1 for rank 2)
//! 40      40    f64 length, v_max, y_max, time, eps (eps = 0 for rank 2)
//! 80      ...   f64 values, x slowest, y fastest
//! ```
//!
//! A plain-text `<file>.meta` sidecar repeats the header as `key = value` lines.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{GridDistribution, LimitDistribution};

const MAGIC: &[u8; 8] = b"CHEMOSN1";

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHeader {
    pub rank: u32,
    pub n_x: u64,
    pub n_v: u64,
    pub n_y: u64,
    pub length: f64,
    pub v_max: f64,
    pub y_max: f64,
    pub time: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub values: Vec<f64>,
}

impl SnapshotHeader {
    pub fn of_grid(q: &GridDistribution, eps: f64) -> Self {
        let g = q.grid();
        Self {
            rank: 3,
            n_x: g.n_x() as u64,
            n_v: g.n_v() as u64,
            n_y: g.n_y() as u64,
            length: g.length(),
            v_max: g.v_max(),
            y_max: g.y_max(),
            time: q.time(),
            eps,
        }
    }

    pub fn of_limit(p: &LimitDistribution) -> Self {
        let g = p.grid();
        Self {
            rank: 2,
            n_x: g.n_x() as u64,
            n_v: g.n_v() as u64,
            n_y: 1,
            length: g.length(),
            v_max: g.v_max(),
            y_max: g.y_max(),
            time: p.time(),
            eps: 0.0,
        }
    }

    fn len(&self) -> usize {
        (self.n_x * self.n_v * self.n_y) as usize
    }

    pub fn meta(&self) -> String {
        format!(
            "format = chemotaxis-snapshot-v1\nbyte_order = little-endian\nfloat = f64\nrank = {}\n\
             layout = {}\nn_x = {}\nn_v = {}\nn_y = {}\nlength = {:e}\nv_max = {:e}\ny_max = {:e}\n\
             time = {:e}\neps = {:e}\n",
            self.rank,
            if self.rank == 3 { "x,v,y" } else { "x,v" },
            self.n_x,
            self.n_v,
            self.n_y,
            self.length,
            self.v_max,
            self.y_max,
            self.time,
            self.eps
        )
    }
}

pub fn write_snapshot<W: Write>(mut w: W, header: &SnapshotHeader, values: &[f64]) -> Result<()> {
    if values.len() != header.len() {
        return Err(Error::config("snapshot values do not match the header dimensions"));
    }
    w.write_all(MAGIC)?;
    w.write_all(&header.rank.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    for n in [header.n_x, header.n_v, header.n_y] {
        w.write_all(&n.to_le_bytes())?;
    }
    for f in [header.length, header.v_max, header.y_max, header.time, header.eps] {
        w.write_all(&f.to_le_bytes())?;
    }
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<Snapshot> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::config("not a snapshot file"));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let rank = u32::from_le_bytes(b4);
    r.read_exact(&mut b4)?;
    let mut dims = [0u64; 3];
    for d in dims.iter_mut() {
        r.read_exact(&mut b8)?;
        *d = u64::from_le_bytes(b8);
    }
    let mut floats = [0f64; 5];
    for f in floats.iter_mut() {
        r.read_exact(&mut b8)?;
        *f = f64::from_le_bytes(b8);
    }
    let header = SnapshotHeader {
        rank,
        n_x: dims[0],
        n_v: dims[1],
        n_y: dims[2],
        length: floats[0],
        v_max: floats[1],
        y_max: floats[2],
        time: floats[3],
        eps: floats[4],
    };
    let mut values = Vec::with_capacity(header.len());
    for _ in 0..header.len() {
        r.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    Ok(Snapshot { header, values })
}

fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Writes `path` and its `.meta` sidecar; returns both paths.
pub fn save(path: &Path, header: &SnapshotHeader, values: &[f64]) -> Result<[PathBuf; 2]> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_snapshot(file, header, values)?;
    let meta = meta_path(path);
    std::fs::write(&meta, header.meta())?;
    Ok([path.to_path_buf(), meta])
}

pub fn load(path: &Path) -> Result<Snapshot> {
    read_snapshot(std::io::BufReader::new(std::fs::File::open(path)?))
}
