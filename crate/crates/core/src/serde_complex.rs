//! Serde adapters: complex numbers as `[re, im]`, matrices as lists of rows.

use crate::linalg::{CMat, CVec, RMat, C64};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

fn pair(z: &C64) -> [f64; 2] {
    [z.re, z.im]
}

pub mod cvec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &CVec, s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(pair).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CVec, D::Error> {
        let raw: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(CVec::from_iterator(raw.len(), raw.into_iter().map(|[a, b]| C64::new(a, b))))
    }
}

pub mod cvec_list {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[CVec], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|x| x.iter().map(pair).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CVec>, D::Error> {
        let raw: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|r| CVec::from_iterator(r.len(), r.into_iter().map(|[a, b]| C64::new(a, b))))
            .collect())
    }
}

fn cmat_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| pair(&m[(i, j)])).collect())
        .collect()
}

fn cmat_from_rows<E: serde::de::Error>(rows: Vec<Vec<[f64; 2]>>) -> Result<CMat, E> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nc) {
        return Err(E::custom("ragged matrix rows"));
    }
    Ok(CMat::from_fn(nr, nc, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

pub mod cmat {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        cmat_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        cmat_from_rows(Vec::deserialize(d)?)
    }
}

pub mod cmat_list {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[CMat], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(cmat_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMat>, D::Error> {
        let raw: Vec<Vec<Vec<[f64; 2]>>> = Vec::deserialize(d)?;
        raw.into_iter().map(cmat_from_rows).collect()
    }
}

pub mod rmat {
    use super::*;

    pub fn serialize<S: Serializer>(m: &RMat, s: S) -> Result<S::Ok, S::Error> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<RMat, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let nr = rows.len();
        let nc = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != nc) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(RMat::from_fn(nr, nc, |i, j| rows[i][j]))
    }
}
