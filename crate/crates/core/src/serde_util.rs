//! JSON representations of complex scalars, vectors and matrices.
//!
//! A complex number is written as `[re, im]`. On input a bare number is also
//! accepted as a real value. Vectors are lists of numbers, matrices are lists
//! of rows.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::{CMat, CRow, CVec, C64};

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum ComplexRepr {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexRepr> for C64 {
    fn from(r: ComplexRepr) -> Self {
        match r {
            ComplexRepr::Real(x) => C64::new(x, 0.0),
            ComplexRepr::Pair([a, b]) => C64::new(a, b),
        }
    }
}

pub fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn vec_pairs(v: &CVec) -> Vec<[f64; 2]> {
    v.iter().map(|&z| pair(z)).collect()
}

pub fn mat_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| pair(m[(i, j)])).collect())
        .collect()
}

pub fn vec_from(repr: &[ComplexRepr]) -> CVec {
    CVec::from_iterator(repr.len(), repr.iter().map(|&z| C64::from(z)))
}

/// Builds a matrix from rows, rejecting ragged input.
pub fn mat_from(rows: &[Vec<ComplexRepr>]) -> Result<CMat, String> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != nc) {
        return Err(format!("ragged matrix: expected {nc} columns in every row"));
    }
    Ok(CMat::from_fn(nr, nc, |i, j| C64::from(rows[i][j])))
}

pub mod complex {
    use super::*;

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        pair(*z).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        Ok(ComplexRepr::deserialize(d)?.into())
    }
}

pub mod complex_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|&z| pair(z)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        let raw = Vec::<ComplexRepr>::deserialize(d)?;
        Ok(raw.into_iter().map(C64::from).collect())
    }
}

pub mod cvec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &CVec, s: S) -> Result<S::Ok, S::Error> {
        vec_pairs(v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CVec, D::Error> {
        let raw = Vec::<ComplexRepr>::deserialize(d)?;
        Ok(vec_from(&raw))
    }
}

pub mod cvecs {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[CVec], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(vec_pairs).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CVec>, D::Error> {
        let raw = Vec::<Vec<ComplexRepr>>::deserialize(d)?;
        Ok(raw.iter().map(|r| vec_from(r)).collect())
    }
}

pub mod crows {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[CRow], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|r| r.iter().map(|&z| pair(z)).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CRow>, D::Error> {
        let raw = Vec::<Vec<ComplexRepr>>::deserialize(d)?;
        Ok(raw
            .iter()
            .map(|r| CRow::from_iterator(r.len(), r.iter().map(|&z| C64::from(z))))
            .collect())
    }
}

pub mod cmat {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        mat_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        let raw = Vec::<Vec<ComplexRepr>>::deserialize(d)?;
        mat_from(&raw).map_err(serde::de::Error::custom)
    }
}

pub mod cmats {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[CMat], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(mat_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMat>, D::Error> {
        let raw = Vec::<Vec<Vec<ComplexRepr>>>::deserialize(d)?;
        raw.iter()
            .map(|m| mat_from(m).map_err(serde::de::Error::custom))
            .collect()
    }
}
