//! Dense linear algebra on chains of qudits.
//!
//! Basis states of an `n`-site chain with local dimension `d` are indexed
//! with site 0 as the most significant digit, so an operator acting on a
//! contiguous block of sites factors as `1_left ⊗ op ⊗ 1_right`. Routines
//! here take 0-based site offsets; the public interval API elsewhere is
//! 1-based and inclusive.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use faer::linalg::matmul::matmul;
use faer::traits::{ComplexField, Conjugate};
use faer::{Accum, Mat, MatMut, MatRef, Par, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use faer::c64;

use crate::error::{Error, Result};

/// Amplitude type: `f64` for real-symmetric problems, `c64` otherwise.
pub trait Scalar:
    ComplexField<Real = f64>
    + Copy
    + Send
    + Sync
    + Debug
    + Default
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    const IS_COMPLEX: bool;
    fn from_re(x: f64) -> Self;
    /// Drops the imaginary part for real scalars.
    fn from_c64(z: c64) -> Self;
    fn to_c64(self) -> c64;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn conj(self) -> Self;
    fn abs2(self) -> f64;
    fn scale(self, x: f64) -> Self;

    fn zero() -> Self {
        Self::from_re(0.0)
    }
    fn one() -> Self {
        Self::from_re(1.0)
    }
    fn abs(self) -> f64 {
        self.abs2().sqrt()
    }
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;
    fn from_re(x: f64) -> Self {
        x
    }
    fn from_c64(z: c64) -> Self {
        z.re
    }
    fn to_c64(self) -> c64 {
        c64::new(self, 0.0)
    }
    fn re(self) -> f64 {
        self
    }
    fn im(self) -> f64 {
        0.0
    }
    fn conj(self) -> Self {
        self
    }
    fn abs2(self) -> f64 {
        self * self
    }
    fn scale(self, x: f64) -> Self {
        self * x
    }
}

impl Scalar for c64 {
    const IS_COMPLEX: bool = true;
    fn from_re(x: f64) -> Self {
        c64::new(x, 0.0)
    }
    fn from_c64(z: c64) -> Self {
        z
    }
    fn to_c64(self) -> c64 {
        self
    }
    fn re(self) -> f64 {
        self.re
    }
    fn im(self) -> f64 {
        self.im
    }
    fn conj(self) -> Self {
        c64::new(self.re, -self.im)
    }
    fn abs2(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
    fn scale(self, x: f64) -> Self {
        c64::new(self.re * x, self.im * x)
    }
}

pub fn pow_dim(d: usize, n: usize) -> usize {
    d.pow(n as u32)
}

/// Number of sites `k` with `d^k == dim`, if any.
pub fn sites_of(dim: usize, d: usize) -> Option<usize> {
    let mut k = 0;
    let mut p = 1;
    while p < dim {
        p *= d;
        k += 1;
    }
    (p == dim).then_some(k)
}

pub fn to_complex<T: Scalar>(a: MatRef<'_, T>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].to_c64())
}

pub fn from_complex<T: Scalar>(a: MatRef<'_, c64>) -> Mat<T> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| T::from_c64(a[(i, j)]))
}

pub fn adjoint<T: Scalar>(a: MatRef<'_, T>) -> Mat<T> {
    Mat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)].conj())
}

pub fn hermitian_part<T: Scalar>(a: MatRef<'_, T>) -> Mat<T> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| {
        (a[(i, j)] + a[(j, i)].conj()).scale(0.5)
    })
}

pub fn scaled<T: Scalar>(a: MatRef<'_, T>, s: f64) -> Mat<T> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].scale(s))
}

pub fn add_identity<T: Scalar>(a: &mut Mat<T>, s: f64) {
    for i in 0..a.nrows().min(a.ncols()) {
        a[(i, i)] += T::from_re(s);
    }
}

pub fn trace<T: Scalar>(a: MatRef<'_, T>) -> T {
    let mut t = T::zero();
    for i in 0..a.nrows().min(a.ncols()) {
        t += a[(i, i)];
    }
    t
}

/// Largest entry-wise modulus of `a - b`.
pub fn max_abs_diff<T: Scalar>(a: MatRef<'_, T>, b: MatRef<'_, T>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    m
}

pub fn hermiticity_defect<T: Scalar>(a: MatRef<'_, T>) -> f64 {
    if a.nrows() != a.ncols() {
        return f64::INFINITY;
    }
    let diff = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - a[(j, i)].conj());
    op_norm(diff.as_ref())
}

/// faer's AVX-512 kernels return with the upper vector state dirty, and
/// every SSE instruction after that (libm `exp` and `ln` included) pays a
/// transition penalty until `vzeroupper`. Each faer call below ends here.
#[inline]
fn clear_upper_state() {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx") {
        // SAFETY: the CPU supports AVX, checked just above.
        unsafe { std::arch::x86_64::_mm256_zeroupper() }
    }
}

fn gemm<T: Scalar, L: Conjugate<Canonical = T>, R: Conjugate<Canonical = T>>(
    dst: MatMut<'_, T>,
    accum: Accum,
    lhs: MatRef<'_, L>,
    rhs: MatRef<'_, R>,
) {
    matmul(dst, accum, lhs, rhs, T::one(), Par::Seq);
    clear_upper_state();
}

pub fn matmul_into<T: Scalar>(dst: MatMut<'_, T>, lhs: MatRef<'_, T>, rhs: MatRef<'_, T>) {
    gemm(dst, Accum::Replace, lhs, rhs);
}

/// `a† b` without materializing the adjoint.
pub fn adj_mul<T: Scalar>(a: MatRef<'_, T>, b: MatRef<'_, T>) -> Mat<T> {
    let mut out = Mat::zeros(a.ncols(), b.ncols());
    gemm(out.as_mut(), Accum::Replace, a.adjoint(), b);
    out
}

/// `a b†`. Large right factors are transposed into a copy first, which is
/// about twice as fast as the strided kernel.
pub fn mul_adj<T: Scalar>(a: MatRef<'_, T>, b: MatRef<'_, T>) -> Mat<T> {
    let mut out = Mat::zeros(a.nrows(), b.nrows());
    if b.nrows() >= 256 {
        let bt = b.adjoint().to_owned();
        gemm(out.as_mut(), Accum::Replace, a, bt.as_ref());
    } else {
        gemm(out.as_mut(), Accum::Replace, a, b.adjoint());
    }
    out
}

pub fn mul<T: Scalar>(a: MatRef<'_, T>, b: MatRef<'_, T>) -> Mat<T> {
    let mut out = Mat::zeros(a.nrows(), b.ncols());
    matmul_into(out.as_mut(), a, b);
    out
}

pub fn matvec<T: Scalar>(a: MatRef<'_, T>, x: &[T]) -> Vec<T> {
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![T::zero(); a.nrows()];
    let xs = MatRef::from_column_major_slice(x, x.len(), 1);
    let ys = MatMut::from_column_major_slice_mut(&mut y, a.nrows(), 1);
    gemm(ys, Accum::Replace, a, xs);
    y
}

pub fn adj_matvec<T: Scalar>(a: MatRef<'_, T>, x: &[T]) -> Vec<T> {
    assert_eq!(a.nrows(), x.len());
    let mut y = vec![T::zero(); a.ncols()];
    let xs = MatRef::from_column_major_slice(x, x.len(), 1);
    let ys = MatMut::from_column_major_slice_mut(&mut y, a.ncols(), 1);
    gemm(ys, Accum::Replace, a.adjoint(), xs);
    y
}

/// `⟨x, y⟩` antilinear in the first slot.
pub fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    let mut s = T::zero();
    for (a, b) in x.iter().zip(y) {
        s += a.conj() * *b;
    }
    s
}

pub fn norm<T: Scalar>(x: &[T]) -> f64 {
    x.iter().map(|v| v.abs2()).sum::<f64>().sqrt()
}

pub fn normalize<T: Scalar>(x: &mut [T]) -> f64 {
    let n = norm(x);
    if n > 0.0 {
        for v in x.iter_mut() {
            *v = v.scale(1.0 / n);
        }
    }
    n
}

pub fn outer<T: Scalar>(x: &[T], y: &[T]) -> Mat<T> {
    Mat::from_fn(x.len(), y.len(), |i, j| x[i] * y[j].conj())
}

pub fn expectation<T: Scalar>(a: MatRef<'_, T>, psi: &[T]) -> T {
    dot(psi, &matvec(a, psi))
}

pub fn kron<T: Scalar>(a: MatRef<'_, T>, b: MatRef<'_, T>) -> Mat<T> {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// `a (bl ⊗ br)` without forming the Kronecker product.
pub fn mul_kron<T: Scalar>(a: MatRef<'_, T>, bl: MatRef<'_, T>, br: MatRef<'_, T>) -> Mat<T> {
    let (p, pp, r, rr) = (bl.nrows(), bl.ncols(), br.nrows(), br.ncols());
    assert_eq!(a.ncols(), p * r);
    let m = a.nrows();
    // u[(k2·m + i, α)] = Σ_β a[i, α·r + β] br[β, k2]
    let mut u = Mat::<T>::zeros(m * rr, p);
    for alpha in 0..p {
        let t = mul(a.subcols(alpha * r, r), br);
        for k2 in 0..rr {
            for i in 0..m {
                u[(k2 * m + i, alpha)] = t[(i, k2)];
            }
        }
    }
    let w = mul(u.as_ref(), bl);
    Mat::from_fn(m, pp * rr, |i, c| w[((c % rr) * m + i, c / rr)])
}

/// Applies `op` (acting on `k` consecutive sites starting at `first`) to the
/// state `x` of a chain with local dimension `d`, writing or adding into `y`.
pub fn apply_local<T: Scalar>(
    op: MatRef<'_, T>,
    first: usize,
    d: usize,
    x: &[T],
    y: &mut [T],
    accumulate: bool,
) {
    let dm = op.nrows();
    assert_eq!(dm, op.ncols());
    assert_eq!(x.len(), y.len());
    let dl = pow_dim(d, first);
    let dr = x.len() / (dl * dm);
    assert_eq!(dl * dm * dr, x.len(), "operator does not fit the chain");
    if !accumulate {
        y.fill(T::zero());
    }
    if dm <= 16 {
        let mut w = [T::zero(); 256];
        for a in 0..dm {
            for m in 0..dm {
                w[a * dm + m] = op[(a, m)];
            }
        }
        let mut v = [T::zero(); 16];
        for l in 0..dl {
            let base = l * dm * dr;
            for r in 0..dr {
                for (m, vm) in v.iter_mut().enumerate().take(dm) {
                    *vm = x[base + m * dr + r];
                }
                for a in 0..dm {
                    let row = &w[a * dm..(a + 1) * dm];
                    let mut s = T::zero();
                    for m in 0..dm {
                        s += row[m] * v[m];
                    }
                    y[base + a * dr + r] += s;
                }
            }
        }
    } else {
        for l in 0..dl {
            let base = l * dm * dr;
            let xs = MatRef::from_column_major_slice(&x[base..base + dm * dr], dr, dm);
            let ys = MatMut::from_column_major_slice_mut(&mut y[base..base + dm * dr], dr, dm);
            gemm(ys, Accum::Add, xs, op.transpose());
        }
    }
}

/// Column-wise [`apply_local`]: returns `(1 ⊗ op ⊗ 1) x`.
pub fn apply_local_mat<T: Scalar>(op: MatRef<'_, T>, first: usize, d: usize, x: &Mat<T>) -> Mat<T> {
    let mut out = Mat::<T>::zeros(x.nrows(), x.ncols());
    for c in 0..x.ncols() {
        let src = x.col_as_slice(c);
        apply_local(op, first, d, src, out.col_as_slice_mut(c), false);
    }
    out
}

/// Dense `1 ⊗ op ⊗ 1` on an `n`-site chain.
pub fn embed<T: Scalar>(op: MatRef<'_, T>, first: usize, n: usize, d: usize) -> Mat<T> {
    let dim = pow_dim(d, n);
    let dm = op.nrows();
    let dl = pow_dim(d, first);
    let dr = dim / (dl * dm);
    assert_eq!(dl * dm * dr, dim);
    let mut out = Mat::<T>::zeros(dim, dim);
    for l in 0..dl {
        for mc in 0..dm {
            for r in 0..dr {
                let col = (l * dm + mc) * dr + r;
                for mr in 0..dm {
                    let v = op[(mr, mc)];
                    if v != T::zero() {
                        out[((l * dm + mr) * dr + r, col)] = v;
                    }
                }
            }
        }
    }
    out
}

/// `tr_complement(a)` keeping sites `first..first+len`.
pub fn partial_trace<T: Scalar>(a: MatRef<'_, T>, first: usize, len: usize, d: usize) -> Mat<T> {
    let dim = a.nrows();
    let dm = pow_dim(d, len);
    let dl = pow_dim(d, first);
    let dr = dim / (dl * dm);
    assert_eq!(dl * dm * dr, dim);
    let mut out = Mat::<T>::zeros(dm, dm);
    for mc in 0..dm {
        for l in 0..dl {
            for r in 0..dr {
                let col = (l * dm + mc) * dr + r;
                for mr in 0..dm {
                    out[(mr, mc)] += a[((l * dm + mr) * dr + r, col)];
                }
            }
        }
    }
    out
}

/// Normalized partial trace: the block of `E[a]` acting on `first..first+len`.
pub fn conditional_block<T: Scalar>(a: MatRef<'_, T>, first: usize, len: usize, d: usize) -> Mat<T> {
    let comp = a.nrows() / pow_dim(d, len);
    scaled(partial_trace(a, first, len, d).as_ref(), 1.0 / comp as f64)
}

/// `conditional_block(x y†)` without forming the product; costs
/// `d^len` times a matrix-vector sweep instead of a full product.
pub fn conditional_block_product<T: Scalar>(x: MatRef<'_, T>, y: MatRef<'_, T>, first: usize, len: usize, d: usize) -> Mat<T> {
    let dim = x.nrows();
    assert_eq!((y.nrows(), y.ncols()), (dim, x.ncols()));
    let k = x.ncols();
    let dm = pow_dim(d, len);
    let dl = pow_dim(d, first);
    let dr = dim / (dl * dm);
    assert_eq!(dl * dm * dr, dim);
    let mut out = Mat::<T>::zeros(dm, dm);
    // Row (l, m, r) of x becomes entry (m, r·k + col) of a dm × dr·k slab.
    let slab = |a: MatRef<'_, T>, l: usize| Mat::from_fn(dm, dr * k, |m, c| a[((l * dm + m) * dr + c / k, c % k)]);
    for l in 0..dl {
        let (xs, ys) = (slab(x, l), slab(y, l));
        gemm(out.as_mut(), Accum::Add, xs.as_ref(), ys.adjoint());
    }
    scaled(out.as_ref(), 1.0 / (dl * dr) as f64)
}

/// Conditional expectation onto operators supported on `first..first+len`,
/// embedded back into the full space.
pub fn conditional_expectation<T: Scalar>(
    a: MatRef<'_, T>,
    first: usize,
    len: usize,
    n: usize,
    d: usize,
) -> Mat<T> {
    embed(conditional_block(a, first, len, d).as_ref(), first, n, d)
}

/// Reshapes a state into the `d^len × d^(n-len)` matrix whose rows index
/// sites `first..first+len`.
pub fn state_matrix<T: Scalar>(psi: &[T], first: usize, len: usize, d: usize) -> Mat<T> {
    let dm = pow_dim(d, len);
    let dl = pow_dim(d, first);
    let dr = psi.len() / (dl * dm);
    assert_eq!(dl * dm * dr, psi.len());
    Mat::from_fn(dm, dl * dr, |m, c| {
        let (l, r) = (c / dr, c % dr);
        psi[(l * dm + m) * dr + r]
    })
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen<T: Scalar>(a: MatRef<'_, T>) -> Result<(Vec<f64>, Mat<T>)> {
    let evd = a.self_adjoint_eigen(Side::Lower);
    clear_upper_state();
    let evd = evd.map_err(|_| Error::EigenFailure)?;
    let s = evd.S();
    let vals = (0..a.nrows()).map(|i| s[i].re()).collect();
    Ok((vals, evd.U().to_owned()))
}

pub fn hermitian_eigenvalues<T: Scalar>(a: MatRef<'_, T>) -> Result<Vec<f64>> {
    let vals = a.self_adjoint_eigenvalues(Side::Lower);
    clear_upper_state();
    vals.map_err(|_| Error::EigenFailure)
}

pub fn singular_values<T: Scalar>(a: MatRef<'_, T>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let vals = a.singular_values();
    clear_upper_state();
    vals.expect("svd did not converge")
}

/// Thin SVD `a = U diag(s) V†` with `s` descending.
pub fn thin_svd<T: Scalar>(a: MatRef<'_, T>) -> Result<(Mat<T>, Vec<f64>, Mat<T>)> {
    let svd = a.thin_svd();
    clear_upper_state();
    let svd = svd.map_err(|_| Error::EigenFailure)?;
    let s = svd.S();
    let k = a.nrows().min(a.ncols());
    let vals = (0..k).map(|i| s[i].re()).collect();
    Ok((svd.U().to_owned(), vals, svd.V().to_owned()))
}

/// Spectral norm by dense SVD.
pub fn op_norm<T: Scalar>(a: MatRef<'_, T>) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// `‖a‖₁`: largest absolute column sum.
pub fn norm_one<T: Scalar>(a: MatRef<'_, T>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest eigenvalue of a Hermitian positive semidefinite operator given
/// only through its action, by Lanczos with full reorthogonalization.
pub fn lanczos_max_eig<T: Scalar>(dim: usize, mut apply: impl FnMut(&[T]) -> Vec<T>) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q: Vec<T> = (0..dim)
        .map(|_| {
            let re = rng.random::<f64>() - 0.5;
            let im = if T::IS_COMPLEX { rng.random::<f64>() - 0.5 } else { 0.0 };
            T::from_c64(c64::new(re, im))
        })
        .collect();
    normalize(&mut q);
    let max_iter = dim.min(400);
    let mut basis: Vec<Vec<T>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut theta = 0.0;
    for it in 0..max_iter {
        let mut w = apply(&q);
        let a = dot(&q, &w).re();
        alpha.push(a);
        basis.push(q.clone());
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= c * *vi;
                }
            }
        }
        let b = norm(&w);
        let (vals, vecs) = tridiagonal_eigen(&alpha, &beta);
        let k = vals.len() - 1;
        theta = vals[k];
        let resid = b * vecs[(k, k)].abs();
        if b <= 1e-14 * theta.abs().max(1e-300) || (it >= 2 && resid <= 1e-11 * theta.abs().max(1e-300)) {
            break;
        }
        beta.push(b);
        q = w.into_iter().map(|v| v.scale(1.0 / b)).collect();
    }
    theta
}

/// `‖A‖` for an operator given by its action and the action of its adjoint.
pub fn operator_norm_by<T: Scalar>(
    dim: usize,
    mut apply: impl FnMut(&[T]) -> Vec<T>,
    mut apply_adj: impl FnMut(&[T]) -> Vec<T>,
) -> f64 {
    lanczos_max_eig::<T>(dim, |x| apply_adj(&apply(x))).max(0.0).sqrt()
}

/// Eigen-decomposition of the symmetric tridiagonal matrix with diagonal
/// `alpha` and off-diagonal `beta`.
pub fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, Mat<f64>) {
    let k = alpha.len();
    let t = Mat::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j || j + 1 == i {
            beta[i.min(j)]
        } else {
            0.0
        }
    });
    hermitian_eigen(t.as_ref()).expect("tridiagonal eigensolve")
}

/// Lowest `m` eigenpairs of a Hermitian operator given by its action.
/// Residuals `‖Hv − Ev‖` are driven below `tol`.
pub fn lanczos_lowest<T: Scalar>(
    dim: usize,
    m: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
    mut apply: impl FnMut(&[T]) -> Vec<T>,
) -> Result<(Vec<f64>, Vec<Vec<T>>)> {
    let m = m.min(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<T> = (0..dim)
        .map(|_| {
            let re = rng.random::<f64>() - 0.5;
            let im = if T::IS_COMPLEX { rng.random::<f64>() - 0.5 } else { 0.0 };
            T::from_c64(c64::new(re, im))
        })
        .collect();
    normalize(&mut q);
    let cap = max_iter.min(dim);
    let mut basis: Vec<Vec<T>> = Vec::new();
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    loop {
        let mut w = apply(&q);
        alpha.push(dot(&q, &w).re());
        basis.push(q.clone());
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= c * *vi;
                }
            }
        }
        let b = norm(&w);
        let k = alpha.len();
        let (vals, vecs) = tridiagonal_eigen(&alpha, &beta);
        let converged = k >= m && (0..m).all(|i| (b * vecs[(k - 1, i)].abs()) <= tol);
        let exhausted = b <= 1e-13 || k == cap;
        if converged || exhausted {
            if k < m {
                return Err(Error::NoConvergence(k));
            }
            let mut out_vecs = Vec::with_capacity(m);
            for i in 0..m {
                let mut v = vec![T::zero(); dim];
                for (j, bj) in basis.iter().enumerate() {
                    let c = vecs[(j, i)];
                    for (vi, bi) in v.iter_mut().zip(bj) {
                        *vi += bi.scale(c);
                    }
                }
                normalize(&mut v);
                out_vecs.push(v);
            }
            let vals_m = vals[..m].to_vec();
            let ok = (0..m).all(|i| {
                let hv = apply(&out_vecs[i]);
                let r: f64 = hv
                    .iter()
                    .zip(&out_vecs[i])
                    .map(|(h, v)| (*h - v.scale(vals_m[i])).abs2())
                    .sum::<f64>()
                    .sqrt();
                r <= tol
            });
            if !ok {
                return Err(Error::NoConvergence(k));
            }
            return Ok((vals_m, out_vecs));
        }
        beta.push(b);
        q = w.into_iter().map(|v| v.scale(1.0 / b)).collect();
    }
}

/// Matrix exponential `exp(a)` by scaling and squaring of a Taylor series.
pub fn expm(a: MatRef<'_, c64>) -> Mat<c64> {
    let n = a.nrows();
    let nrm = norm_one(a);
    let s = if nrm > 0.5 { (nrm / 0.5).log2().ceil() as i32 } else { 0 };
    let a = scaled(a, 0.5f64.powi(s));
    let mut result = Mat::<c64>::identity(n, n);
    let mut term = Mat::<c64>::identity(n, n);
    for k in 1..40 {
        term = scaled(mul(term.as_ref(), a.as_ref()).as_ref(), 1.0 / k as f64);
        result += &term;
        if norm_one(term.as_ref()) < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        result = mul(result.as_ref(), result.as_ref());
    }
    result
}

/// Random Hermitian matrix with entries of unit scale.
pub fn random_hermitian<T: Scalar>(dim: usize, rng: &mut impl Rng) -> Mat<T> {
    let g = Mat::from_fn(dim, dim, |_, _| {
        let re = rng.random::<f64>() * 2.0 - 1.0;
        let im = if T::IS_COMPLEX { rng.random::<f64>() * 2.0 - 1.0 } else { 0.0 };
        T::from_c64(c64::new(re, im))
    });
    hermitian_part(g.as_ref())
}

/// Least-squares line `y ≈ slope·x + intercept` with its `R²`; `None`
/// with fewer than two distinct abscissae.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Some((slope, my - slope * mx, r2))
}
