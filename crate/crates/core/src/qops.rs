//! Tensor-product Hilbert spaces of truncated bosonic modes.
//!
//! Basis ordering is row-major with mode 0 as the slowest-varying index, so
//! for layout `[2, 2, 5]` the state `(1, 1, 0)` sits at row `1*10 + 1*5 + 0`.
//! Device layouts list qubits first, then couplers.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};
use crate::linalg::{self, real, CMat, ZERO};

/// Truncation dimension of a single mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModeDim(usize);

impl ModeDim {
    pub fn new(levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidDevice(format!("mode truncation must be >= 2, got {levels}")));
        }
        Ok(ModeDim(levels))
    }

    pub fn levels(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpaceLayout {
    dims: Vec<ModeDim>,
    total_dim: usize,
}

impl SpaceLayout {
    pub fn new(dims: Vec<ModeDim>) -> Self {
        let total_dim = dims.iter().map(|d| d.levels()).product();
        SpaceLayout { dims, total_dim }
    }

    pub fn from_levels(levels: &[usize]) -> Result<Self> {
        Ok(Self::new(levels.iter().map(|&l| ModeDim::new(l)).collect::<Result<_>>()?))
    }

    pub fn dims(&self) -> &[ModeDim] {
        &self.dims
    }

    pub fn levels(&self) -> Vec<usize> {
        self.dims.iter().map(|d| d.levels()).collect()
    }

    pub fn modes(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.dims.len() {
            return Err(Error::ModeIndex { index: mode, modes: self.dims.len() });
        }
        Ok(())
    }

    /// Row index of a product basis state.
    pub fn basis_index(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.dims.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} occupations, got {}",
                self.dims.len(),
                occupations.len()
            )));
        }
        let mut index = 0;
        for (mode, (&n, dim)) in occupations.iter().zip(&self.dims).enumerate() {
            if n >= dim.levels() {
                return Err(Error::Occupation { mode, occupation: n, levels: dim.levels() });
            }
            index = index * dim.levels() + n;
        }
        Ok(index)
    }

    /// Inverse of [`basis_index`](Self::basis_index).
    pub fn basis_occupations(&self, index: usize) -> Result<Vec<usize>> {
        if index >= self.total_dim {
            return Err(Error::BasisIndex { index, dim: self.total_dim });
        }
        let mut occ = vec![0; self.dims.len()];
        let mut rest = index;
        for (slot, dim) in occ.iter_mut().zip(&self.dims).rev() {
            *slot = rest % dim.levels();
            rest /= dim.levels();
        }
        Ok(occ)
    }

    /// All occupation tuples in basis order.
    pub fn states(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.total_dim).map(move |i| self.basis_occupations(i).expect("index in range"))
    }

    fn embed(&self, mode: usize, local: &CMat) -> CMat {
        // stride of `mode` in the flat index
        let inner: usize = self.dims[mode + 1..].iter().map(|d| d.levels()).product();
        let levels = self.dims[mode].levels();
        let n = self.total_dim;
        let mut out = CMat::zeros(n, n);
        for row in 0..n {
            let k = (row / inner) % levels;
            let base = row - k * inner;
            for l in 0..levels {
                let v = local[(k, l)];
                if v != ZERO {
                    out[(row, base + l * inner)] = v;
                }
            }
        }
        out
    }
}

/// A dense operator on the full product space.
#[derive(Clone, Debug, PartialEq)]
pub struct Op {
    pub matrix: CMat,
    pub hermitian: bool,
}

impl Op {
    pub fn new(matrix: CMat) -> Self {
        assert!(matrix.is_square(), "operators are square");
        Op { matrix, hermitian: false }
    }

    pub fn hermitian(matrix: CMat) -> Self {
        assert!(matrix.is_square(), "operators are square");
        Op { matrix, hermitian: true }
    }

    pub fn zeros(dim: usize) -> Self {
        Op::hermitian(CMat::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Op::hermitian(CMat::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dagger(&self) -> Op {
        Op { matrix: self.matrix.adjoint(), hermitian: self.hermitian }
    }

    pub fn scale(&self, factor: f64) -> Op {
        Op { matrix: &self.matrix * real(factor), hermitian: self.hermitian }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(&self.matrix)
    }

    pub fn trace(&self) -> num_complex::Complex64 {
        self.matrix.trace()
    }
}

impl Add for &Op {
    type Output = Op;
    fn add(self, rhs: &Op) -> Op {
        Op { matrix: &self.matrix + &rhs.matrix, hermitian: self.hermitian && rhs.hermitian }
    }
}

impl Sub for &Op {
    type Output = Op;
    fn sub(self, rhs: &Op) -> Op {
        Op { matrix: &self.matrix - &rhs.matrix, hermitian: self.hermitian && rhs.hermitian }
    }
}

impl Mul for &Op {
    type Output = Op;
    fn mul(self, rhs: &Op) -> Op {
        Op::new(&self.matrix * &rhs.matrix)
    }
}

/// Truncated lowering matrix, a|n> = sqrt(n)|n-1>.
pub fn lowering(levels: usize) -> CMat {
    CMat::from_fn(levels, levels, |i, j| if j == i + 1 { real((j as f64).sqrt()) } else { ZERO })
}

pub fn annihilation(layout: &SpaceLayout, mode: usize) -> Result<Op> {
    layout.check_mode(mode)?;
    let a = lowering(layout.dims[mode].levels());
    Ok(Op::new(layout.embed(mode, &a)))
}

pub fn creation(layout: &SpaceLayout, mode: usize) -> Result<Op> {
    Ok(annihilation(layout, mode)?.dagger())
}

pub fn number(layout: &SpaceLayout, mode: usize) -> Result<Op> {
    layout.check_mode(mode)?;
    let levels = layout.dims[mode].levels();
    let n = CMat::from_fn(levels, levels, |i, j| if i == j { real(i as f64) } else { ZERO });
    Ok(Op::hermitian(layout.embed(mode, &n)))
}

/// Sum of all mode number operators.
pub fn total_number(layout: &SpaceLayout) -> Op {
    let diag = layout.states().map(|occ| real(occ.iter().sum::<usize>() as f64));
    Op::hermitian(CMat::from_diagonal(&nalgebra::DVector::from_iterator(layout.total_dim(), diag)))
}
