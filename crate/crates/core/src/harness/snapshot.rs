//! Snapshot files: one line of JSON header, then one little-endian f64 array
//! per component holding physical-space samples in row-major order (x₁
//! slowest). The header records a SHA-256 checksum of the binary payload.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::hex;
use crate::limit::XmhdState;
use crate::plasma::{Basis, State};
use crate::spectral::{Field, Grid};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const XMHD_COMPONENTS: [&str; 6] = ["u1", "u2", "u3", "B*1", "B*2", "B*3"];
pub const VELOCITY_COMPONENTS: [&str; 6] = ["v_e1", "v_e2", "v_e3", "v_i1", "v_i2", "v_i3"];

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    grid: usize,
    basis: String,
    components: Vec<String>,
    params_hash: String,
    time: f64,
    /// Exact bit pattern of `time`.
    time_bits: String,
    byte_order: String,
    layout: String,
    checksum: String,
}

/// Physical samples of a set of named fields at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub grid: usize,
    /// "symmetrized", "original", "xmhd" or "velocities".
    pub basis: String,
    pub components: Vec<String>,
    pub params_hash: String,
    pub time: f64,
    pub data: Vec<Vec<f64>>,
}

fn payload(data: &[Vec<f64>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.iter().map(|d| d.len() * 8).sum());
    for d in data {
        for x in d {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

fn samples_of(grid: &Grid, fields: &[Field]) -> Result<Vec<Vec<f64>>> {
    let refs: Vec<&Field> = fields.iter().collect();
    grid.inverse_many(&refs)
}

impl Snapshot {
    pub fn from_state(grid: &Grid, state: &State, params_hash: &str, time: f64) -> Result<Self> {
        Ok(Snapshot {
            grid: grid.n(),
            basis: state.basis.name().into(),
            components: state.basis.component_names().iter().map(|s| s.to_string()).collect(),
            params_hash: params_hash.into(),
            time,
            data: samples_of(grid, &state.comps)?,
        })
    }

    pub fn from_xmhd(grid: &Grid, x: &XmhdState, params_hash: &str, time: f64) -> Result<Self> {
        let fields: Vec<Field> = x.fields().cloned().collect();
        Ok(Snapshot {
            grid: grid.n(),
            basis: "xmhd".into(),
            components: XMHD_COMPONENTS.iter().map(|s| s.to_string()).collect(),
            params_hash: params_hash.into(),
            time,
            data: samples_of(grid, &fields)?,
        })
    }

    pub fn from_velocities(grid: &Grid, v_e: &[Field], v_i: &[Field], time: f64) -> Result<Self> {
        let fields: Vec<Field> = v_e.iter().chain(v_i).cloned().collect();
        Ok(Snapshot {
            grid: grid.n(),
            basis: "velocities".into(),
            components: VELOCITY_COMPONENTS.iter().map(|s| s.to_string()).collect(),
            params_hash: String::new(),
            time,
            data: samples_of(grid, &fields)?,
        })
    }

    fn fields(&self, grid: &Grid, expect: usize) -> Result<Vec<Field>> {
        if grid.n() != self.grid {
            return Err(Error::GridMismatch { expected: grid.n(), found: self.grid });
        }
        if self.data.len() != expect {
            return Err(Error::Snapshot(format!(
                "basis {} needs {expect} components, found {}",
                self.basis,
                self.data.len()
            )));
        }
        grid.forward_many(&self.data)
    }

    pub fn to_state(&self, grid: &Grid) -> Result<State> {
        let basis = match self.basis.as_str() {
            "symmetrized" => Basis::Symmetrized,
            "original" => Basis::Original,
            b => return Err(Error::Snapshot(format!("basis {b} is not a two-fluid state"))),
        };
        Ok(State { basis, comps: self.fields(grid, 14)? })
    }

    pub fn to_xmhd(&self, grid: &Grid) -> Result<XmhdState> {
        if self.basis != "xmhd" {
            return Err(Error::Snapshot(format!("basis {} is not xmhd", self.basis)));
        }
        let mut f = self.fields(grid, 6)?.into_iter();
        let mut take = || f.next().unwrap();
        Ok(XmhdState { u: [take(), take(), take()], b_star: [take(), take(), take()] })
    }

    /// Raw physical velocities (v_e, v_i), from a "velocities" snapshot or
    /// from the velocity blocks of a two-fluid state.
    pub fn to_velocities(&self, grid: &Grid, params: &crate::PlasmaParams) -> Result<([Field; 3], [Field; 3])> {
        let f = match self.basis.as_str() {
            "velocities" => self.fields(grid, 6)?,
            _ => {
                let mut s = self.to_state(grid)?;
                if s.basis == Basis::Symmetrized {
                    s = s.desymmetrize(params)?;
                }
                s.comps[2..8].to_vec()
            }
        };
        let mut it = f.into_iter();
        let mut take = || it.next().unwrap();
        Ok(([take(), take(), take()], [take(), take(), take()]))
    }
}

pub fn save_snapshot(path: &Path, snap: &Snapshot) -> Result<()> {
    let len = snap.grid * snap.grid * snap.grid;
    if snap.data.len() != snap.components.len() || snap.data.iter().any(|d| d.len() != len) {
        return Err(Error::Snapshot("component arrays do not match the grid".into()));
    }
    let body = payload(&snap.data);
    let header = Header {
        schema_version: SCHEMA_VERSION,
        grid: snap.grid,
        basis: snap.basis.clone(),
        components: snap.components.clone(),
        params_hash: snap.params_hash.clone(),
        time: snap.time,
        time_bits: format!("{:016x}", snap.time.to_bits()),
        byte_order: "little-endian".into(),
        layout: "row-major f64, x1 slowest, one array per component".into(),
        checksum: hex(&Sha256::digest(&body)),
    };
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut f, &header).map_err(|e| Error::Snapshot(e.to_string()))?;
    f.write_all(b"\n")?;
    f.write_all(&body)?;
    f.flush()?;
    Ok(())
}

/// Loads a snapshot; with `expect_grid` set, a different header grid is an error.
pub fn load_snapshot(path: &Path, expect_grid: Option<usize>) -> Result<Snapshot> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: Header = serde_json::from_str(line.trim_end())
        .map_err(|e| Error::Snapshot(format!("{}: bad header: {e}", path.display())))?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(Error::Snapshot(format!(
            "schema version {} not supported (expected {SCHEMA_VERSION})",
            header.schema_version
        )));
    }
    if let Some(n) = expect_grid {
        if n != header.grid {
            return Err(Error::GridMismatch { expected: n, found: header.grid });
        }
    }
    let len = header.grid * header.grid * header.grid;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let want = 8 * len * header.components.len();
    if body.len() != want {
        return Err(Error::Snapshot(format!("truncated payload: {} bytes, expected {want}", body.len())));
    }
    if hex(&Sha256::digest(&body)) != header.checksum {
        return Err(Error::Snapshot("checksum mismatch".into()));
    }
    let data = body
        .chunks_exact(8 * len)
        .map(|c| c.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
        .collect();
    let time = u64::from_str_radix(&header.time_bits, 16)
        .map(f64::from_bits)
        .map_err(|e| Error::Snapshot(format!("bad time stamp: {e}")))?;
    Ok(Snapshot {
        grid: header.grid,
        basis: header.basis,
        components: header.components,
        params_hash: header.params_hash,
        time,
        data,
    })
}
