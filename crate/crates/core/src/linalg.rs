//! Dense Hermitian linear algebra on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
pub use num_complex::Complex64 as C64;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Eigendecomposition of a Hermitian matrix with eigenvalues in ascending
/// order; column `k` of `vectors` belongs to `values[k]`.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn eigh(h: &CMat) -> Eigh {
    let n = h.nrows();
    assert_eq!(n, h.ncols(), "eigh needs a square matrix");
    if n == 0 {
        return Eigh { values: vec![], vectors: CMat::zeros(0, 0) };
    }
    let (values, vectors) = if h.iter().all(|z| z.im == 0.0) {
        let re = DMatrix::from_fn(n, n, |i, j| 0.5 * (h[(i, j)].re + h[(j, i)].re));
        let eig = SymmetricEigen::new(re);
        let v = eig.eigenvectors.map(|x| C64::new(x, 0.0));
        (eig.eigenvalues.iter().copied().collect::<Vec<_>>(), v)
    } else {
        let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (h[(i, j)] + h[(j, i)].conj()));
        let eig = SymmetricEigen::new(sym);
        (eig.eigenvalues.iter().copied().collect::<Vec<_>>(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted_values = order.iter().map(|&k| values[k]).collect();
    let sorted_vectors = CMat::from_fn(n, n, |i, j| vectors[(i, order[j])]);
    Eigh { values: sorted_values, vectors: sorted_vectors }
}

/// exp(-i h t) for Hermitian `h`.
pub fn expm_hermitian(h: &CMat, t: f64) -> CMat {
    let eig = eigh(h);
    let n = h.nrows();
    let phases: Vec<C64> = eig.values.iter().map(|&e| C64::from_polar(1.0, -e * t)).collect();
    let mut scaled = eig.vectors.clone();
    for j in 0..n {
        let p = phases[j];
        for i in 0..n {
            scaled[(i, j)] *= p;
        }
    }
    &scaled * eig.vectors.adjoint()
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// max |m - m†|
pub fn hermiticity_defect(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}
