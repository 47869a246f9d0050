//! Dense row-major matrices and their JSON representation (an array of rows).

use ndarray::Array2;

use crate::{Error, Result};

pub type Matrix = Array2<f64>;

/// Builds a matrix from row vectors, rejecting ragged input.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let n_rows = rows.len();
    let n_cols = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_cols) {
        return Err(Error::Input(format!(
            "ragged matrix: row {i} has {} entries, expected {n_cols}",
            r.len()
        )));
    }
    let data: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Array2::from_shape_vec((n_rows, n_cols), data).expect("shape checked above"))
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Checks that `m` is row-stochastic: entries in `[-tol, 1 + tol]` and every
/// row sums to one within `tol`.
pub fn check_row_stochastic(m: &Matrix, tol: f64) -> Result<()> {
    for (i, row) in m.rows().into_iter().enumerate() {
        if let Some(v) = row
            .iter()
            .find(|v| !v.is_finite() || **v < -tol || **v > 1.0 + tol)
        {
            return Err(Error::Input(format!(
                "row {i} holds non-probability entry {v}"
            )));
        }
        let sum: f64 = row.sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::Input(format!("row {i} sums to {sum}, not 1")));
        }
    }
    Ok(())
}

/// Serde adapter writing a [`Matrix`] as an array of row arrays.
pub mod rows {
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    use super::Matrix;

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        super::to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        super::from_rows(&rows).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_rows_rejected() {
        assert!(from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn empty_rows_give_empty_matrix() {
        let m = from_rows(&[]).unwrap();
        assert_eq!(m.dim(), (0, 0));
    }

    #[test]
    fn stochastic_check() {
        let good = from_rows(&[vec![0.25, 0.75], vec![1.0, 0.0]]).unwrap();
        assert!(check_row_stochastic(&good, 1e-12).is_ok());
        let bad = from_rows(&[vec![0.5, 0.48]]).unwrap();
        assert!(check_row_stochastic(&bad, 1e-4).is_err());
    }
}
