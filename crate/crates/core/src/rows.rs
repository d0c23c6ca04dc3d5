//! Serializes matrices as arrays of rows.

use nalgebra::DMatrix;
use serde::Serializer;

pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(m.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()))
}
