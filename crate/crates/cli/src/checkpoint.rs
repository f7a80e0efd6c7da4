//! Binary run snapshots.
//!
//! Layout (little endian): magic `XNLWCKPT`, `u32` version, `f64` L, `u64` N,
//! `f64` p, `f64` dt, `f64` t0, `u64` step, `u64` total steps, then the
//! spectral coefficient arrays `cu`, `cut`, `cw`, `cwt` of `N` `f64` each.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use extnlw::wave_dynamics::RunState;

pub const MAGIC: &[u8; 8] = b"XNLWCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub length: f64,
    pub n: usize,
    pub p: f64,
    pub total_steps: usize,
    pub state: RunState,
    pub cw: Vec<f64>,
    pub cwt: Vec<f64>,
}

impl Checkpoint {
    /// Snapshot of a single-field run; the `w` slots hold zeros.
    pub fn single(length: f64, p: f64, total_steps: usize, state: RunState) -> Self {
        let n = state.cu.len();
        Self {
            length,
            n,
            p,
            total_steps,
            state,
            cw: vec![0.0; n],
            cwt: vec![0.0; n],
        }
    }

    pub fn time(&self) -> f64 {
        self.state.t0 + self.state.step as f64 * self.state.dt
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 32 * self.n);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.length.to_le_bytes());
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        out.extend_from_slice(&self.p.to_le_bytes());
        out.extend_from_slice(&self.state.dt.to_le_bytes());
        out.extend_from_slice(&self.state.t0.to_le_bytes());
        out.extend_from_slice(&(self.state.step as u64).to_le_bytes());
        out.extend_from_slice(&(self.total_steps as u64).to_le_bytes());
        for arr in [&self.state.cu, &self.state.cut, &self.cw, &self.cwt] {
            for v in arr.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> io::Result<Self> {
        let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
        let mut magic = [0u8; 8];
        bytes.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let mut w4 = [0u8; 4];
        bytes.read_exact(&mut w4)?;
        let version = u32::from_le_bytes(w4);
        if version != VERSION {
            return Err(bad(&format!("unsupported checkpoint version {version}")));
        }
        let mut w8 = [0u8; 8];
        let mut next = |b: &mut &[u8]| -> io::Result<[u8; 8]> {
            b.read_exact(&mut w8)?;
            Ok(w8)
        };
        let length = f64::from_le_bytes(next(&mut bytes)?);
        let n = u64::from_le_bytes(next(&mut bytes)?) as usize;
        let p = f64::from_le_bytes(next(&mut bytes)?);
        let dt = f64::from_le_bytes(next(&mut bytes)?);
        let t0 = f64::from_le_bytes(next(&mut bytes)?);
        let step = u64::from_le_bytes(next(&mut bytes)?) as usize;
        let total_steps = u64::from_le_bytes(next(&mut bytes)?) as usize;
        if bytes.len() != 32 * n {
            return Err(bad(&format!("expected {} coefficient bytes, found {}", 32 * n, bytes.len())));
        }
        let mut arrays = bytes
            .chunks_exact(8 * n.max(1))
            .take(4)
            .map(|c| c.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect::<Vec<_>>());
        let mut take = || arrays.next().unwrap_or_default();
        let (cu, cut, cw, cwt) = (take(), take(), take(), take());
        Ok(Self {
            length,
            n,
            p,
            total_steps,
            state: RunState { t0, step, dt, cu, cut },
            cw,
            cwt,
        })
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())
    }

    pub fn read(path: &Path) -> io::Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
