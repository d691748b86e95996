//! Small dense complex linear-algebra helpers shared by every module.

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;

pub const J: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `u·uᴴ`
pub fn outer(u: &CVec) -> CMat {
    u * u.adjoint()
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

/// Real part of `Tr(A·B)` without forming the product.
pub fn re_trace_product(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

/// `aᴴ·M·b`
pub fn quad_form(a: &CVec, m: &CMat, b: &CVec) -> C64 {
    (a.adjoint() * m * b)[(0, 0)]
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5, 0.0)
}

pub fn hermitian_error(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues sorted descending.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = hermitian_part(m).symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn min_eigenvalue_hermitian(m: &CMat) -> f64 {
    let (vals, _) = hermitian_eigen(m);
    vals.last().copied().unwrap_or(0.0)
}

pub fn min_eigenvalue_symmetric(m: &RMat) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue_symmetric(m: &RMat) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Principal square root of a Hermitian PSD matrix (negative eigenvalues clipped).
pub fn psd_sqrt(m: &CMat) -> CMat {
    let (vals, vecs) = hermitian_eigen(m);
    let n = m.nrows();
    let mut d = CMat::zeros(n, n);
    for (i, v) in vals.iter().enumerate() {
        d[(i, i)] = c(v.max(0.0).sqrt(), 0.0);
    }
    &vecs * d * vecs.adjoint()
}

/// Hermitian basis used to parametrize an `n×n` Hermitian matrix by `n²` reals:
/// diagonal entries, then real parts of the strict upper triangle, then imaginary parts.
pub fn hermitian_basis(n: usize) -> Vec<CMat> {
    let mut basis = Vec::with_capacity(n * n);
    for i in 0..n {
        let mut e = CMat::zeros(n, n);
        e[(i, i)] = c(1.0, 0.0);
        basis.push(e);
    }
    for (i, j) in upper_pairs(n) {
        let mut e = CMat::zeros(n, n);
        e[(i, j)] = c(1.0, 0.0);
        e[(j, i)] = c(1.0, 0.0);
        basis.push(e);
    }
    for (i, j) in upper_pairs(n) {
        let mut e = CMat::zeros(n, n);
        e[(i, j)] = J;
        e[(j, i)] = -J;
        basis.push(e);
    }
    basis
}

pub fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Coordinates of a Hermitian matrix in [`hermitian_basis`].
pub fn hermitian_coords(m: &CMat) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        out.push(m[(i, i)].re);
    }
    for (i, j) in upper_pairs(n) {
        out.push(0.5 * (m[(i, j)].re + m[(j, i)].re));
    }
    for (i, j) in upper_pairs(n) {
        out.push(0.5 * (m[(i, j)].im - m[(j, i)].im));
    }
    out
}

pub fn hermitian_from_coords(n: usize, coords: &[f64]) -> CMat {
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = c(coords[i], 0.0);
    }
    let pairs = upper_pairs(n);
    let off = n;
    let np = pairs.len();
    for (p, &(i, j)) in pairs.iter().enumerate() {
        let z = c(coords[off + p], coords[off + np + p]);
        m[(i, j)] = z;
        m[(j, i)] = z.conj();
    }
    m
}

/// Real embedding `[[Re, −Im], [Im, Re]]` whose PSD-ness matches the Hermitian matrix.
pub fn real_embedding(m: &CMat) -> RMat {
    let n = m.nrows();
    let mut r = RMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            r[(i, j)] = z.re;
            r[(i + n, j + n)] = z.re;
            r[(i, j + n)] = -z.im;
            r[(i + n, j)] = z.im;
        }
    }
    r
}

pub fn db10(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_linear(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn linear_to_dbm(p: f64) -> f64 {
    10.0 * p.log10()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_coords_roundtrip() {
        let n = 3;
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = c((i * 3 + j) as f64, (j as f64) - (i as f64) * 0.5);
            }
        }
        let h = hermitian_part(&m);
        let back = hermitian_from_coords(n, &hermitian_coords(&h));
        assert!((back - &h).norm() < 1e-14);
        let basis = hermitian_basis(n);
        let coords = hermitian_coords(&h);
        let mut sum = CMat::zeros(n, n);
        for (b, x) in basis.iter().zip(coords) {
            sum += b * c(x, 0.0);
        }
        assert!((sum - h).norm() < 1e-14);
    }

    #[test]
    fn eigen_sorted_descending() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(3.0, 0.0), c(2.0, 0.0)]));
        let (vals, _) = hermitian_eigen(&m);
        assert_eq!(vals.len(), 3);
        assert!((vals[0] - 3.0).abs() < 1e-12 && (vals[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}
