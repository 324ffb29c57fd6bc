use std::collections::HashMap;

use ndarray::{Array2, ArrayView2, Axis};

use crate::dataset::Dataset;
use crate::error::{shape, Result};

/// Records as indices into deduplicated input rows, so each distinct `u`
/// goes through the branch once and each distinct `y` through the trunk once.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    /// Distinct sensor vectors, `n_u x m`.
    pub u: ArrayView2<'a, f64>,
    /// Distinct locations, `n_y x dim(y)`.
    pub y: ArrayView2<'a, f64>,
    pub u_idx: &'a [usize],
    pub y_idx: &'a [usize],
    pub targets: &'a [f64],
}

impl Batch<'_> {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn validate(&self, m: usize, dim_y: usize) -> Result<()> {
        if self.u.ncols() != m || self.y.ncols() != dim_y {
            return Err(shape(format!(
                "batch has m={}, dim(y)={}; model expects m={m}, dim(y)={dim_y}",
                self.u.ncols(),
                self.y.ncols()
            )));
        }
        let n = self.targets.len();
        if self.u_idx.len() != n || self.y_idx.len() != n {
            return Err(shape("index arrays and targets differ in length"));
        }
        if self.u_idx.iter().any(|&i| i >= self.u.nrows()) || self.y_idx.iter().any(|&i| i >= self.y.nrows()) {
            return Err(shape("record index out of range"));
        }
        Ok(())
    }
}

/// Owned storage behind a [`Batch`].
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedData {
    u: Array2<f64>,
    y: Array2<f64>,
    u_idx: Vec<usize>,
    y_idx: Vec<usize>,
    targets: Vec<f64>,
}

fn dedup_rows(rows: ArrayView2<f64>) -> (Array2<f64>, Vec<usize>) {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut keep = Vec::new();
    let idx = rows
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let key: Vec<u64> = r.iter().map(|v| v.to_bits()).collect();
            *seen.entry(key).or_insert_with(|| {
                keep.push(i);
                keep.len() - 1
            })
        })
        .collect();
    (rows.select(Axis(0), &keep), idx)
}

impl IndexedData {
    pub fn new(u: Array2<f64>, y: Array2<f64>, u_idx: Vec<usize>, y_idx: Vec<usize>, targets: Vec<f64>) -> Result<Self> {
        let data = IndexedData {
            u,
            y,
            u_idx,
            y_idx,
            targets,
        };
        data.batch().validate(data.u.ncols(), data.y.ncols())?;
        Ok(data)
    }

    /// One record per row, no sharing.
    pub fn from_rows(u: Array2<f64>, y: Array2<f64>, targets: Vec<f64>) -> Result<Self> {
        let n = targets.len();
        Self::new(u, y, (0..n).collect(), (0..n).collect(), targets)
    }

    pub fn from_dataset(ds: &Dataset) -> Self {
        let (y, y_idx) = dedup_rows(ds.ys());
        IndexedData {
            u: ds.u_table().to_owned(),
            y,
            u_idx: ds.record_u().to_vec(),
            y_idx,
            targets: ds.targets().to_vec(),
        }
    }

    pub fn batch(&self) -> Batch<'_> {
        Batch {
            u: self.u.view(),
            y: self.y.view(),
            u_idx: &self.u_idx,
            y_idx: &self.y_idx,
            targets: &self.targets,
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// The given records with compacted input tables.
    pub fn subset(&self, records: &[usize]) -> IndexedData {
        fn remap(idx: impl Iterator<Item = usize>, width: usize) -> (Vec<usize>, Vec<usize>) {
            let mut slot = vec![usize::MAX; width];
            let mut keep = Vec::new();
            let out = idx
                .map(|i| {
                    if slot[i] == usize::MAX {
                        slot[i] = keep.len();
                        keep.push(i);
                    }
                    slot[i]
                })
                .collect();
            (keep, out)
        }
        let (u_keep, u_idx) = remap(records.iter().map(|&r| self.u_idx[r]), self.u.nrows());
        let (y_keep, y_idx) = remap(records.iter().map(|&r| self.y_idx[r]), self.y.nrows());
        IndexedData {
            u: self.u.select(Axis(0), &u_keep),
            y: self.y.select(Axis(0), &y_keep),
            u_idx,
            y_idx,
            targets: records.iter().map(|&r| self.targets[r]).collect(),
        }
    }

    /// Records as dense `(u, y)` rows, for models that cannot share work.
    pub fn dense_inputs(&self) -> (Array2<f64>, Array2<f64>) {
        (self.u.select(Axis(0), &self.u_idx), self.y.select(Axis(0), &self.y_idx))
    }
}
