//! Small linear-algebra vocabulary shared by every module: coordinate
//! vectors, matrices, bilinear maps and central finite differences.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{GeomError, Result};

/// Model-space coordinates.
pub type Coords = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Determinant magnitude below which a matrix is treated as singular.
pub const SINGULAR_DET: f64 = 1e-12;

/// A bilinear map `E × E → E` on `E = R^n`.
///
/// Entry `(k, i, j)` is the coefficient of `a_i b_j` in component `k` of
/// `B(a, b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bilinear {
    dim: usize,
    data: Vec<f64>,
}

impl Bilinear {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim * dim] }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * dim * dim);
        for k in 0..dim {
            for i in 0..dim {
                for j in 0..dim {
                    data.push(f(k, i, j));
                }
            }
        }
        Self { dim, data }
    }

    /// Builds the map from its values on basis pairs, `cols(i, j) = B(e_i, e_j)`.
    pub fn from_basis(dim: usize, mut cols: impl FnMut(usize, usize) -> Coords) -> Self {
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                let c = cols(i, j);
                for k in 0..dim {
                    out.set(k, i, j, c[k]);
                }
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, k: usize, i: usize, j: usize, value: f64) {
        self.data[(k * self.dim + i) * self.dim + j] = value;
    }

    pub fn apply(&self, a: &Coords, b: &Coords) -> Coords {
        let n = self.dim;
        let mut out = Coords::zeros(n);
        for k in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                let ai = a[i];
                if ai == 0.0 {
                    continue;
                }
                let row = &self.data[(k * n + i) * n..(k * n + i + 1) * n];
                for j in 0..n {
                    acc += row[j] * ai * b[j];
                }
            }
            out[k] = acc;
        }
        out
    }

    /// The linear map `b ↦ B(a, b)`.
    pub fn with_first(&self, a: &Coords) -> Matrix {
        let n = self.dim;
        Matrix::from_fn(n, n, |k, j| (0..n).map(|i| self.get(k, i, j) * a[i]).sum())
    }

    /// The linear map `a ↦ B(a, b)`.
    pub fn with_second(&self, b: &Coords) -> Matrix {
        let n = self.dim;
        Matrix::from_fn(n, n, |k, i| (0..n).map(|j| self.get(k, i, j) * b[j]).sum())
    }

    /// `(a, b) ↦ B(b, a)`.
    pub fn swapped(&self) -> Self {
        Self::from_fn(self.dim, |k, i, j| self.get(k, j, i))
    }

    /// Symmetric part `(B(a, b) + B(b, a)) / 2`.
    pub fn symmetrized(&self) -> Self {
        Self::from_fn(self.dim, |k, i, j| 0.5 * (self.get(k, i, j) + self.get(k, j, i)))
    }

    /// `(a, b) ↦ m · B(a, b)`.
    pub fn pushed(&self, m: &Matrix) -> Self {
        let n = self.dim;
        Self::from_fn(n, |k, i, j| (0..n).map(|l| m[(k, l)] * self.get(l, i, j)).sum())
    }

    /// `(a, b) ↦ B(p a, q b)`.
    pub fn pulled(&self, p: &Matrix, q: &Matrix) -> Self {
        let n = self.dim;
        Self::from_basis(n, |i, j| self.apply(&p.column(i).into_owned(), &q.column(j).into_owned()))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Contracts a family `D[i] = ∂_i B` against a direction `z`.
    pub fn contract(family: &[Bilinear], z: &Coords) -> Bilinear {
        let n = z.len();
        let mut out = Bilinear::zeros(n);
        for (i, d) in family.iter().enumerate() {
            if z[i] != 0.0 {
                out = out + d.clone() * z[i];
            }
        }
        out
    }
}

impl Add for Bilinear {
    type Output = Bilinear;
    fn add(mut self, rhs: Bilinear) -> Bilinear {
        for (a, b) in self.data.iter_mut().zip(rhs.data) {
            *a += b;
        }
        self
    }
}

impl Sub for Bilinear {
    type Output = Bilinear;
    fn sub(mut self, rhs: Bilinear) -> Bilinear {
        for (a, b) in self.data.iter_mut().zip(rhs.data) {
            *a -= b;
        }
        self
    }
}

impl Mul<f64> for Bilinear {
    type Output = Bilinear;
    fn mul(mut self, rhs: f64) -> Bilinear {
        self.data.iter_mut().for_each(|a| *a *= rhs);
        self
    }
}

/// Step for first-derivative central differences, `ε^{1/3} · max(1, ‖x‖)`.
pub fn first_step(x: &Coords) -> f64 {
    f64::EPSILON.cbrt() * x.norm().max(1.0)
}

/// Step for second-derivative central differences, `ε^{1/4} · max(1, ‖x‖)`.
pub fn second_step(x: &Coords) -> f64 {
    f64::EPSILON.powf(0.25) * x.norm().max(1.0)
}

/// Central-difference Jacobian of `f` at `x`.
pub fn fd_jacobian(
    x: &Coords,
    h: f64,
    mut f: impl FnMut(&Coords) -> Result<Coords>,
) -> Result<Matrix> {
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    for i in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        cols.push((f(&xp)? - f(&xm)?) / (2.0 * h));
    }
    let rows = cols.first().map_or(0, |c| c.len());
    Ok(Matrix::from_fn(rows, n, |r, c| cols[c][r]))
}

/// Second derivative of a map `R^n → R^n` by nested central differences.
pub fn fd_hessian(
    x: &Coords,
    h: f64,
    mut f: impl FnMut(&Coords) -> Result<Coords>,
) -> Result<Bilinear> {
    let n = x.len();
    let mut out = Bilinear::zeros(n);
    let f0 = f(x)?;
    for i in 0..n {
        for j in i..n {
            let col = if i == j {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                (f(&xp)? - &f0 * 2.0 + f(&xm)?) / (h * h)
            } else {
                let shifted = |si: f64, sj: f64| {
                    let mut y = x.clone();
                    y[i] += si * h;
                    y[j] += sj * h;
                    y
                };
                (f(&shifted(1.0, 1.0))? - f(&shifted(1.0, -1.0))? - f(&shifted(-1.0, 1.0))?
                    + f(&shifted(-1.0, -1.0))?)
                    / (4.0 * h * h)
            };
            if col.len() != n {
                return Err(GeomError::DimensionMismatch { expected: n, got: col.len() });
            }
            for k in 0..n {
                out.set(k, i, j, col[k]);
                out.set(k, j, i, col[k]);
            }
        }
    }
    Ok(out)
}

/// Second derivative from a Jacobian procedure, differentiating each
/// column once more and symmetrizing.
pub fn fd_hessian_from_jacobian(
    x: &Coords,
    h: f64,
    mut jac: impl FnMut(&Coords) -> Result<Matrix>,
) -> Result<Bilinear> {
    let n = x.len();
    let mut slices = Vec::with_capacity(n);
    for i in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        slices.push((jac(&xp)? - jac(&xm)?) / (2.0 * h));
    }
    // slices[i][(k, j)] = ∂_i ∂_j f_k
    Ok(Bilinear::from_fn(n, |k, i, j| 0.5 * (slices[i][(k, j)] + slices[j][(k, i)])))
}

/// Inverse with the determinant guard used for frames and group elements.
pub fn guarded_inverse(m: &Matrix) -> Option<Matrix> {
    if m.determinant().abs() <= SINGULAR_DET {
        return None;
    }
    m.clone().try_inverse()
}
