//! Dataset container.
//!
//! ```text
//! "OPDS1"
//! u8  problem tag
//! u32 m, u32 dim(y)
//! u64 records, u64 input functions, u64 dropped records
//! f64 domain a, f64 domain b, f64 * m sensor locations
//! u64 length + JSON text {"problem": .., "config": ..}
//! per record: u64 u_id, f64 * m sensors, f64 * dim(y) location, f64 target
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{Dataset, Problem};
use crate::binio::{read_exact_ctx, read_f64s, read_u32, read_u64, read_u8, write_f64s};
use crate::error::{Error, Result};
use crate::spaces::SensorGrid;

pub const DATASET_MAGIC: &[u8; 5] = b"OPDS1";

// Refuse header counts that could not come from a real file.
const MAX_M: u32 = 1 << 20;
const MAX_JSON: u64 = 1 << 26;

pub fn write_dataset<W: Write>(w: &mut W, ds: &Dataset) -> Result<()> {
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&[ds.problem.tag()])?;
    w.write_all(&(ds.m() as u32).to_le_bytes())?;
    w.write_all(&(ds.dim_y() as u32).to_le_bytes())?;
    for c in [ds.len(), ds.u_ids.len(), ds.dropped] {
        w.write_all(&(c as u64).to_le_bytes())?;
    }
    let (a, b) = ds.sensors.domain();
    write_f64s(w, [a, b])?;
    write_f64s(w, ds.sensors.points().iter().copied())?;
    let meta = serde_json::to_vec(&serde_json::json!({"problem": ds.problem, "config": ds.config}))?;
    w.write_all(&(meta.len() as u64).to_le_bytes())?;
    w.write_all(&meta)?;
    for rec in ds.records() {
        w.write_all(&rec.u_id.to_le_bytes())?;
        write_f64s(w, rec.u_sensors.iter().copied())?;
        write_f64s(w, rec.y.iter().copied())?;
        write_f64s(w, [rec.target])?;
    }
    Ok(())
}

pub fn read_dataset<R: Read>(r: &mut R) -> Result<Dataset> {
    let mut magic = [0u8; 5];
    read_exact_ctx(r, &mut magic, "dataset magic")?;
    if &magic != DATASET_MAGIC {
        return Err(Error::Format(format!(
            "expected magic {:?}, found {:?} (unsupported version or not a dataset)",
            String::from_utf8_lossy(DATASET_MAGIC),
            String::from_utf8_lossy(&magic)
        )));
    }
    let tag = read_u8(r, "problem tag")?;
    let m = read_u32(r, "sensor count")?;
    let dim_y = read_u32(r, "location dimension")? as usize;
    if !(2..=MAX_M).contains(&m) || !(1..=2).contains(&dim_y) {
        return Err(Error::Format(format!("implausible header: m={m}, dim(y)={dim_y}")));
    }
    let m = m as usize;
    let n = read_u64(r, "record count")? as usize;
    let n_funcs = read_u64(r, "function count")? as usize;
    let dropped = read_u64(r, "dropped count")? as usize;
    let dom = read_f64s(r, 2, "sensor domain")?;
    let points = read_f64s(r, m, "sensor locations")?;
    let sensors = match SensorGrid::uniform(dom[0], dom[1], m) {
        Ok(g) if g.points() == points.as_slice() => g,
        _ => SensorGrid::new(dom[0], dom[1], points).map_err(|e| Error::Format(format!("bad sensor block: {e}")))?,
    };
    let meta_len = read_u64(r, "metadata length")?;
    if meta_len > MAX_JSON {
        return Err(Error::Format(format!("metadata block of {meta_len} bytes")));
    }
    let mut meta = vec![0u8; meta_len as usize];
    read_exact_ctx(r, &mut meta, "metadata")?;
    let meta: serde_json::Value = serde_json::from_slice(&meta)?;
    let problem: Problem = serde_json::from_value(meta["problem"].clone())?;
    if problem.tag() != tag {
        return Err(Error::Format(format!(
            "header tag {tag} disagrees with metadata problem {}",
            problem.name()
        )));
    }

    let rec_len = 8 + 8 * (m + dim_y + 1);
    let mut buf = vec![0u8; rec_len];
    let mut rows: HashMap<u64, usize> = HashMap::with_capacity(n_funcs);
    let mut u_ids = Vec::with_capacity(n_funcs);
    let mut u_table: Vec<f64> = Vec::with_capacity(n_funcs * m);
    let mut record_u = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n * dim_y);
    let mut targets = Vec::with_capacity(n);
    let f64_at = |buf: &[u8], i: usize| f64::from_le_bytes(buf[8 + 8 * i..16 + 8 * i].try_into().unwrap());
    for i in 0..n {
        read_exact_ctx(r, &mut buf, &format!("record {i} of {n}"))?;
        let id = u64::from_le_bytes(buf[..8].try_into().unwrap());
        let row = match rows.get(&id) {
            Some(&row) => {
                let stored = &u_table[row * m..(row + 1) * m];
                if (0..m).any(|j| stored[j].to_bits() != f64_at(&buf, j).to_bits()) {
                    return Err(Error::Format(format!("record {i}: sensor values differ for u id {id}")));
                }
                row
            }
            None => {
                let row = u_ids.len();
                rows.insert(id, row);
                u_ids.push(id);
                u_table.extend((0..m).map(|j| f64_at(&buf, j)));
                row
            }
        };
        record_u.push(row);
        ys.extend((0..dim_y).map(|j| f64_at(&buf, m + j)));
        targets.push(f64_at(&buf, m + dim_y));
    }
    if u_ids.len() != n_funcs {
        return Err(Error::Format(format!(
            "header promises {n_funcs} input functions, records hold {}",
            u_ids.len()
        )));
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes after the last record".into()));
    }
    let fmt = |e: ndarray::ShapeError| Error::Format(e.to_string());
    Dataset::from_parts(
        problem,
        sensors,
        u_ids,
        Array2::from_shape_vec((n_funcs, m), u_table).map_err(fmt)?,
        record_u,
        Array2::from_shape_vec((n, dim_y), ys).map_err(fmt)?,
        targets,
        meta["config"].clone(),
        dropped,
    )
    .map_err(|e| Error::Format(format!("inconsistent dataset: {e}")))
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(&mut w, ds)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset(&mut BufReader::new(File::open(path)?))
}
