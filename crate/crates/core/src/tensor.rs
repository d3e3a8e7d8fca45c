//! Dense small-tensor algebra in dimension `D ∈ {2, 3}`.
//!
//! Index conventions follow the usual continuum-mechanics layout: for a
//! matrix field `A(x)` the gradient is `(∇A)_{ijk} = ∂_k A_ij`, i.e. the
//! differentiation index is always the last one.
//!
//! Contractions:
//!
//! * `A : B = A_ij B_ij`
//! * `B ⋮ C = B_ijk C_ijk`
//! * `(C : A)_ij = C_ijkl A_kl`
//! * `(B : A)_i = B_ijk A_jk`
//! * `C^t_ijkl = C_jikl` (partial transpose in the first two slots)

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

/// Runtime spatial dimension, used where the dimension comes from input data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn new(d: usize) -> Option<Dim> {
        match d {
            2 => Some(Dim::Two),
            3 => Some(Dim::Three),
            _ => None,
        }
    }

    pub fn get(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }
}

pub type Vector<const D: usize> = [f64; D];

/// Second-order tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat<const D: usize>(pub [[f64; D]; D]);

/// Third-order tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ten3<const D: usize>(pub [[[f64; D]; D]; D]);

/// Fourth-order tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ten4<const D: usize>(pub [[[[f64; D]; D]; D]; D]);

macro_rules! impl_linear_ops {
    ($ty:ident, $($idx:ident),+) => {
        impl<const D: usize> $ty<D> {
            /// Applies `f` entrywise.
            pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
                let mut out = *self;
                out.for_each_mut(|x| *x = f(*x));
                out
            }

            /// Entrywise combination of two tensors of the same order.
            pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
                let mut out = *self;
                out.zip_mut(other, |a, b| *a = f(*a, b));
                out
            }

            pub fn is_finite(&self) -> bool {
                let mut ok = true;
                self.for_each(|x| ok &= x.is_finite());
                ok
            }

            /// Squared Frobenius norm, i.e. the full self-contraction.
            pub fn norm_sq(&self) -> f64 {
                let mut s = 0.0;
                self.for_each(|x| s += x * x);
                s
            }

            pub fn norm(&self) -> f64 {
                self.norm_sq().sqrt()
            }

            /// Largest absolute entry.
            pub fn max_abs(&self) -> f64 {
                let mut m: f64 = 0.0;
                self.for_each(|x| m = m.max(x.abs()));
                m
            }

            /// Full contraction over all indices.
            pub fn contract(&self, other: &Self) -> f64 {
                let mut s = 0.0;
                let mut tmp = *self;
                tmp.zip_mut(other, |a, b| s += *a * b);
                s
            }
        }

        impl<const D: usize> Add for $ty<D> {
            type Output = Self;
            fn add(self, rhs: Self) -> Self {
                self.zip_with(&rhs, |a, b| a + b)
            }
        }

        impl<const D: usize> Sub for $ty<D> {
            type Output = Self;
            fn sub(self, rhs: Self) -> Self {
                self.zip_with(&rhs, |a, b| a - b)
            }
        }

        impl<const D: usize> AddAssign for $ty<D> {
            fn add_assign(&mut self, rhs: Self) {
                self.zip_mut(&rhs, |a, b| *a += b);
            }
        }

        impl<const D: usize> SubAssign for $ty<D> {
            fn sub_assign(&mut self, rhs: Self) {
                self.zip_mut(&rhs, |a, b| *a -= b);
            }
        }

        impl<const D: usize> Neg for $ty<D> {
            type Output = Self;
            fn neg(self) -> Self {
                self.map(|x| -x)
            }
        }

        impl<const D: usize> Mul<f64> for $ty<D> {
            type Output = Self;
            fn mul(self, rhs: f64) -> Self {
                self.map(|x| x * rhs)
            }
        }

        impl<const D: usize> Mul<$ty<D>> for f64 {
            type Output = $ty<D>;
            fn mul(self, rhs: $ty<D>) -> $ty<D> {
                rhs.map(|x| x * self)
            }
        }

        impl<const D: usize> Index<($(impl_linear_ops!(@usize $idx)),+)> for $ty<D> {
            type Output = f64;
            fn index(&self, ($($idx),+): ($(impl_linear_ops!(@usize $idx)),+)) -> &f64 {
                &self.0$([$idx])+
            }
        }

        impl<const D: usize> IndexMut<($(impl_linear_ops!(@usize $idx)),+)> for $ty<D> {
            fn index_mut(&mut self, ($($idx),+): ($(impl_linear_ops!(@usize $idx)),+)) -> &mut f64 {
                &mut self.0$([$idx])+
            }
        }
    };
    (@usize $idx:ident) => { usize };
}

impl_linear_ops!(Mat, i, j);
impl_linear_ops!(Ten3, i, j, k);
impl_linear_ops!(Ten4, i, j, k, l);

impl<const D: usize> Mat<D> {
    pub fn zeros() -> Self {
        Mat([[0.0; D]; D])
    }

    pub fn identity() -> Self {
        Self::from_fn(|i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros();
        for i in 0..D {
            for j in 0..D {
                m.0[i][j] = f(i, j);
            }
        }
        m
    }

    pub fn diag(d: [f64; D]) -> Self {
        Self::from_fn(|i, j| if i == j { d[i] } else { 0.0 })
    }

    /// Matrix unit `E_ij` (one in slot `(i, j)`, zero elsewhere).
    pub fn unit(i: usize, j: usize) -> Self {
        let mut m = Self::zeros();
        m.0[i][j] = 1.0;
        m
    }

    /// Rank-one tensor `a ⊗ b`.
    pub fn outer(a: &Vector<D>, b: &Vector<D>) -> Self {
        Self::from_fn(|i, j| a[i] * b[j])
    }

    fn for_each(&self, mut f: impl FnMut(f64)) {
        self.0.iter().flatten().for_each(|&x| f(x));
    }

    fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        self.0.iter_mut().flatten().for_each(&mut f);
    }

    fn zip_mut(&mut self, other: &Self, mut f: impl FnMut(&mut f64, f64)) {
        for (a, b) in self.0.iter_mut().flatten().zip(other.0.iter().flatten()) {
            f(a, *b);
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(|i, j| self.0[j][i])
    }

    pub fn trace(&self) -> f64 {
        (0..D).map(|i| self.0[i][i]).sum()
    }

    /// `A : B`.
    pub fn ddot(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..D {
            for j in 0..D {
                s += self.0[i][j] * other.0[i][j];
            }
        }
        s
    }

    pub fn sym(&self) -> Self {
        Self::from_fn(|i, j| 0.5 * (self.0[i][j] + self.0[j][i]))
    }

    pub fn mul_vec(&self, v: &Vector<D>) -> Vector<D> {
        let mut out = [0.0; D];
        for i in 0..D {
            for j in 0..D {
                out[i] += self.0[i][j] * v[j];
            }
        }
        out
    }

    pub fn det(&self) -> f64 {
        let a = &self.0;
        match D {
            2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
            3 => {
                a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                    - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                    + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
            }
            _ => unreachable!("dimension {D} is not supported"),
        }
    }

    /// Cofactor matrix, `Cof A = det(A) A⁻ᵀ` for invertible `A`.
    ///
    /// This is also the derivative of `det` at `A`.
    pub fn cofactor(&self) -> Self {
        let a = &self.0;
        match D {
            2 => Self::from_fn(|i, j| {
                let s = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                s * a[1 - i][1 - j]
            }),
            3 => Self::from_fn(|i, j| {
                let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
                let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
                a[i1][j1] * a[i2][j2] - a[i1][j2] * a[i2][j1]
            }),
            _ => unreachable!("dimension {D} is not supported"),
        }
    }

    /// Singular tolerance used by [`Mat::inverse`]: `1e-14·max(1, |A|)`.
    pub fn singular_tolerance(&self) -> f64 {
        1e-14 * self.norm().max(1.0)
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        if !(det.abs() > self.singular_tolerance()) {
            return Err(Error::SingularMatrix { det });
        }
        Ok(self.cofactor().transpose() * (1.0 / det))
    }

    /// `A⁻ᵀ`.
    pub fn inverse_transpose(&self) -> Result<Self> {
        Ok(self.inverse()?.transpose())
    }

    /// Left action on the first slot of a third-order tensor: `(A B)_ijk = A_im B_mjk`.
    pub fn mul_ten3(&self, b: &Ten3<D>) -> Ten3<D> {
        Ten3::from_fn(|i, j, k| (0..D).map(|m| self.0[i][m] * b.0[m][j][k]).sum())
    }
}

impl<const D: usize> Mul for Mat<D> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..D {
            for k in 0..D {
                let a = self.0[i][k];
                for j in 0..D {
                    out.0[i][j] += a * rhs.0[k][j];
                }
            }
        }
        out
    }
}

/// `A : B`.
pub fn contract22<const D: usize>(a: &Mat<D>, b: &Mat<D>) -> f64 {
    a.ddot(b)
}

/// `B ⋮ C`.
pub fn contract33<const D: usize>(b: &Ten3<D>, c: &Ten3<D>) -> f64 {
    b.contract(c)
}

/// `(C : A)_ij = C_ijkl A_kl`.
pub fn contract42<const D: usize>(c: &Ten4<D>, a: &Mat<D>) -> Mat<D> {
    c.ddot_mat(a)
}

/// `(B : A)_i = B_ijk A_jk`.
pub fn contract32<const D: usize>(b: &Ten3<D>, a: &Mat<D>) -> Vector<D> {
    b.ddot_mat(a)
}

/// Partial transpose `C^t_ijkl = C_jikl`.
pub fn apply4t<const D: usize>(c: &Ten4<D>) -> Ten4<D> {
    c.partial_transpose()
}

pub fn det<const D: usize>(a: &Mat<D>) -> f64 {
    a.det()
}

pub fn cofactor<const D: usize>(a: &Mat<D>) -> Mat<D> {
    a.cofactor()
}

pub fn inverse<const D: usize>(a: &Mat<D>) -> Result<Mat<D>> {
    a.inverse()
}

pub fn sym<const D: usize>(a: &Mat<D>) -> Mat<D> {
    a.sym()
}

/// Directional derivative of the inverse, `D(A⁻¹):H = −A⁻¹ H A⁻¹`.
pub fn dinv_dir<const D: usize>(a: &Mat<D>, h: &Mat<D>) -> Result<Mat<D>> {
    let inv = a.inverse()?;
    Ok(-(inv * *h * inv))
}

/// Directional derivative of the transposed inverse, `D(A⁻ᵀ):H = −A⁻ᵀ Hᵀ A⁻ᵀ`.
pub fn dinv_t_dir<const D: usize>(a: &Mat<D>, h: &Mat<D>) -> Result<Mat<D>> {
    let inv_t = a.inverse_transpose()?;
    Ok(-(inv_t * h.transpose() * inv_t))
}

/// Full derivative of the inverse as a fourth-order tensor,
/// `D(A⁻¹)_ijkl = −(A⁻¹)_ik (A⁻¹)_lj`, so that `D(A⁻¹) : H = −A⁻¹ H A⁻¹`.
pub fn dinv<const D: usize>(a: &Mat<D>) -> Result<Ten4<D>> {
    let inv = a.inverse()?;
    Ok(Ten4::from_fn(|i, j, k, l| -inv.0[i][k] * inv.0[l][j]))
}

impl<const D: usize> Ten3<D> {
    pub fn zeros() -> Self {
        Ten3([[[0.0; D]; D]; D])
    }

    pub fn from_fn(f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros();
        for i in 0..D {
            for j in 0..D {
                for k in 0..D {
                    t.0[i][j][k] = f(i, j, k);
                }
            }
        }
        t
    }

    /// Assembles a tensor from the matrices obtained by fixing the last index.
    pub fn from_slices(slices: &[Mat<D>; D]) -> Self {
        Self::from_fn(|i, j, k| slices[k].0[i][j])
    }

    /// Matrix `B_{··k}` obtained by fixing the last index.
    pub fn slice(&self, k: usize) -> Mat<D> {
        Mat::from_fn(|i, j| self.0[i][j][k])
    }

    fn for_each(&self, mut f: impl FnMut(f64)) {
        self.0.iter().flatten().flatten().for_each(|&x| f(x));
    }

    fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        self.0.iter_mut().flatten().flatten().for_each(&mut f);
    }

    fn zip_mut(&mut self, other: &Self, mut f: impl FnMut(&mut f64, f64)) {
        for (a, b) in self
            .0
            .iter_mut()
            .flatten()
            .flatten()
            .zip(other.0.iter().flatten().flatten())
        {
            f(a, *b);
        }
    }

    /// `B ⋮ C`.
    pub fn tdot(&self, other: &Self) -> f64 {
        self.contract(other)
    }

    /// `(B : A)_i = B_ijk A_jk`.
    pub fn ddot_mat(&self, a: &Mat<D>) -> Vector<D> {
        let mut out = [0.0; D];
        for i in 0..D {
            for j in 0..D {
                for k in 0..D {
                    out[i] += self.0[i][j][k] * a.0[j][k];
                }
            }
        }
        out
    }

    /// Right action on the second slot: `(B A)_ijk = B_imk A_mj`.
    ///
    /// This is the gradient rule `∇(A Â) = ∇A·Â` for constant `Â`, with the
    /// differentiation index kept last.
    pub fn mul_mat_mid(&self, a: &Mat<D>) -> Self {
        Self::from_fn(|i, j, k| (0..D).map(|m| self.0[i][m][k] * a.0[m][j]).sum())
    }

    /// Right action on the last slot, `(B A)_ijk = B_ijm A_mk`.
    pub fn mul_mat_last(&self, a: &Mat<D>) -> Self {
        Self::from_fn(|i, j, k| (0..D).map(|m| self.0[i][j][m] * a.0[m][k]).sum())
    }

    /// Row-wise curl of a matrix field from its gradient, two-dimensional case:
    /// `curl A = (∂₁A₁₂ − ∂₂A₁₁, ∂₁A₂₂ − ∂₂A₂₁)`.
    ///
    /// In three dimensions the row-wise curl is returned as a matrix whose
    /// rows are the curls of the rows of `A`; see [`Ten3::curl_rows`].
    pub fn curl_2d(&self) -> [f64; 2] {
        assert_eq!(D, 2, "curl_2d requires D = 2");
        let g = &self.0;
        [g[0][1][0] - g[0][0][1], g[1][1][0] - g[1][0][1]]
    }

    /// Row-wise curl in three dimensions: `(curl A)_{i·} = curl(A_{i·})`.
    pub fn curl_rows(&self) -> Mat<D> {
        assert_eq!(D, 3, "curl_rows requires D = 3");
        let g = &self.0;
        Mat::from_fn(|i, c| {
            let (a, b) = ((c + 1) % 3, (c + 2) % 3);
            // (curl v)_c = ∂_a v_b − ∂_b v_a
            g[i][b][a] - g[i][a][b]
        })
    }
}

/// Gradient of a matrix product, `∇(A Â)_ijk = ∂_kA_im Â_mj + A_im ∂_kÂ_mj`.
pub fn grad_product<const D: usize>(
    a: &Mat<D>,
    grad_a: &Ten3<D>,
    b: &Mat<D>,
    grad_b: &Ten3<D>,
) -> Ten3<D> {
    grad_a.mul_mat_mid(b) + a.mul_ten3(grad_b)
}

/// Gradient of the inverse field, `∂_k(A⁻¹) = −A⁻¹ ∂_kA A⁻¹`.
pub fn grad_inverse<const D: usize>(inv: &Mat<D>, grad_a: &Ten3<D>) -> Ten3<D> {
    let slices: [Mat<D>; D] = std::array::from_fn(|k| -(*inv * grad_a.slice(k) * *inv));
    Ten3::from_slices(&slices)
}

impl<const D: usize> Ten4<D> {
    pub fn zeros() -> Self {
        Ten4([[[[0.0; D]; D]; D]; D])
    }

    pub fn from_fn(f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros();
        for i in 0..D {
            for j in 0..D {
                for k in 0..D {
                    for l in 0..D {
                        t.0[i][j][k][l] = f(i, j, k, l);
                    }
                }
            }
        }
        t
    }

    /// Identity on matrices, `I_ijkl = δ_ik δ_jl`.
    pub fn identity() -> Self {
        Self::from_fn(|i, j, k, l| if i == k && j == l { 1.0 } else { 0.0 })
    }

    fn for_each(&self, mut f: impl FnMut(f64)) {
        self.0
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .for_each(|&x| f(x));
    }

    fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        self.0
            .iter_mut()
            .flatten()
            .flatten()
            .flatten()
            .for_each(&mut f);
    }

    fn zip_mut(&mut self, other: &Self, mut f: impl FnMut(&mut f64, f64)) {
        for (a, b) in self
            .0
            .iter_mut()
            .flatten()
            .flatten()
            .flatten()
            .zip(other.0.iter().flatten().flatten().flatten())
        {
            f(a, *b);
        }
    }

    /// `(C : A)_ij = C_ijkl A_kl`.
    pub fn ddot_mat(&self, a: &Mat<D>) -> Mat<D> {
        Mat::from_fn(|i, j| {
            let mut s = 0.0;
            for k in 0..D {
                for l in 0..D {
                    s += self.0[i][j][k][l] * a.0[k][l];
                }
            }
            s
        })
    }

    /// `(A : C)_kl = A_ij C_ijkl`.
    pub fn mat_ddot(&self, a: &Mat<D>) -> Mat<D> {
        Mat::from_fn(|k, l| {
            let mut s = 0.0;
            for i in 0..D {
                for j in 0..D {
                    s += a.0[i][j] * self.0[i][j][k][l];
                }
            }
            s
        })
    }

    /// `C^t_ijkl = C_jikl`.
    pub fn partial_transpose(&self) -> Self {
        Self::from_fn(|i, j, k, l| self.0[j][i][k][l])
    }

    /// `C :: Ĉ`.
    pub fn qdot(&self, other: &Self) -> f64 {
        self.contract(other)
    }
}
