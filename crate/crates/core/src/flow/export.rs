use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::Trajectory;

const SNAPSHOT_MAGIC: &[u8; 8] = b"LZFSNAP1";

/// Writes `t,loss,grad_norm,dist_to_init`, one row per recorded sample.
pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["t", "loss", "grad_norm", "dist_to_init"])?;
    let w0 = &traj.initial().w;
    for s in &traj.samples {
        wtr.write_record(&[
            s.t.to_string(),
            s.loss.to_string(),
            s.grad_norm.to_string(),
            w0.distance(&s.w).to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Full-parameter snapshots: the 8-byte tag `LZFSNAP1`, then the sample
/// count and the parameter count as little-endian `u64`, then for every
/// sample its time followed by its `p` parameters, all little-endian `f64`.
pub fn write_snapshots(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let p = traj.initial().w.len();
    out.write_all(SNAPSHOT_MAGIC)?;
    out.write_all(&(traj.samples.len() as u64).to_le_bytes())?;
    out.write_all(&(p as u64).to_le_bytes())?;
    for s in &traj.samples {
        out.write_all(&s.t.to_le_bytes())?;
        for v in s.w.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a file written by [`write_snapshots`] as `(t, w)` pairs.
pub fn read_snapshots(path: &Path) -> Result<Vec<(f64, Vec<f64>)>> {
    let mut input = BufReader::new(File::open(path)?);
    let mut tag = [0u8; 8];
    input.read_exact(&mut tag)?;
    if &tag != SNAPSHOT_MAGIC {
        return Err(Error::invalid(format!(
            "{} is not a snapshot file",
            path.display()
        )));
    }
    let mut word = [0u8; 8];
    let mut next_u64 = |input: &mut BufReader<File>| -> Result<u64> {
        input.read_exact(&mut word)?;
        Ok(u64::from_le_bytes(word))
    };
    let count = next_u64(&mut input)? as usize;
    let p = next_u64(&mut input)? as usize;
    let mut buf = [0u8; 8];
    let mut next_f64 = |input: &mut BufReader<File>| -> Result<f64> {
        input.read_exact(&mut buf)?;
        Ok(f64::from_le_bytes(buf))
    };
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let t = next_f64(&mut input)?;
        let w = (0..p)
            .map(|_| next_f64(&mut input))
            .collect::<Result<Vec<_>>>()?;
        out.push((t, w));
    }
    Ok(out)
}
