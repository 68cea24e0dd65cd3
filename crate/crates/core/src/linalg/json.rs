//! Matrices travel as row-major nested arrays of `[re, im]` pairs.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::matrix::{ComplexMatrix, C64};

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.dim())
            .map(|i| self.row(i).iter().map(|z| [z.re, z.im]).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(deserializer)?;
        let n = rows.len();
        if n == 0 {
            return Err(D::Error::custom("matrix must have at least one row"));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(D::Error::custom(format!(
                    "matrix is not square: row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for e in row {
                if !(e[0].is_finite() && e[1].is_finite()) {
                    return Err(D::Error::custom(format!("non-finite entry in row {i}")));
                }
                data.push(C64::new(e[0], e[1]));
            }
        }
        ComplexMatrix::from_vec(n, data).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let m = ComplexMatrix::from_fn(2, |i, j| C64::new(i as f64, 0.5 * j as f64 - 0.1));
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[[0.0,-0.1],[0.0,0.4]],[[1.0,-0.1],[1.0,0.4]]]");
        let back: ComplexMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_ragged() {
        let r: Result<ComplexMatrix, _> = serde_json::from_str("[[[1,0],[0,0]],[[1,0]]]");
        assert!(r.unwrap_err().to_string().contains("not square"));
    }
}
