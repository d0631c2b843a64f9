//! Scalar abstraction for the numerical kernels.
//!
//! All walk algorithms are generic over a [`Scalar`] floating-point type.
//! The trait carries the two dense kernels everything else is built from:
//! a symmetric eigendecomposition and a symmetric rank-k update (Gram
//! matrix). The generic default is a cyclic Jacobi sweep, good for any
//! float type; `f64` overrides both with LAPACK/BLAS calls since the walks
//! spend nearly all their time in these kernels.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar usable by the walk algorithms.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + Sum + fmt::Debug + fmt::Display + fmt::LowerExp + Send + Sync + 'static
{
    /// Eigendecomposition of a dense symmetric `n x n` matrix in row-major
    /// order. Returns eigenvalues in ascending order and the matching
    /// eigenvectors, vector `j` stored contiguously at `j*n..(j+1)*n`.
    fn sym_eigh(n: usize, a: &[Self]) -> (Vec<Self>, Vec<Self>) {
        jacobi_eigh(n, a)
    }

    /// The `k` largest eigenpairs, eigenvalues in descending order,
    /// eigenvector `j` at `j*n..(j+1)*n`.
    fn sym_eigh_topk(n: usize, a: &[Self], k: usize) -> (Vec<Self>, Vec<Self>) {
        let k = k.min(n);
        let (vals, vecs) = Self::sym_eigh(n, a);
        let mut top_vals = Vec::with_capacity(k);
        let mut top_vecs = Vec::with_capacity(k * n);
        for j in (n - k..n).rev() {
            top_vals.push(vals[j]);
            top_vecs.extend_from_slice(&vecs[j * n..(j + 1) * n]);
        }
        (top_vals, top_vecs)
    }

    /// Gram matrix `R R^T` (size `r x r`, row-major, full symmetric) of an
    /// `r x n` row-major matrix.
    fn gram(r: usize, n: usize, rows: &[Self]) -> Vec<Self> {
        debug_assert_eq!(rows.len(), r * n);
        let mut g = vec![Self::zero(); r * r];
        for i in 0..r {
            for j in 0..=i {
                let mut s = Self::zero();
                let (a, b) = (&rows[i * n..(i + 1) * n], &rows[j * n..(j + 1) * n]);
                for t in 0..n {
                    s += a[t] * b[t];
                }
                g[i * r + j] = s;
                g[j * r + i] = s;
            }
        }
        g
    }

    /// Outer Gram matrix `R^T R` (size `n x n`, row-major, full symmetric)
    /// of an `r x n` row-major matrix.
    fn outer_gram(r: usize, n: usize, rows: &[Self]) -> Vec<Self> {
        debug_assert_eq!(rows.len(), r * n);
        let mut m = vec![Self::zero(); n * n];
        for i in 0..r {
            let row = &rows[i * n..(i + 1) * n];
            for a in 0..n {
                let ra = row[a];
                if ra == Self::zero() {
                    continue;
                }
                for b in a..n {
                    m[a * n + b] += ra * row[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                m[a * n + b] = m[b * n + a];
            }
        }
        m
    }
}

impl Scalar for f32 {}

impl Scalar for f64 {
    fn sym_eigh(n: usize, a: &[Self]) -> (Vec<f64>, Vec<f64>) {
        lapack::dsyevd(n, a)
    }

    fn sym_eigh_topk(n: usize, a: &[Self], k: usize) -> (Vec<f64>, Vec<f64>) {
        let k = k.min(n);
        if k == 0 || n == 0 {
            return (Vec::new(), Vec::new());
        }
        lapack::dsyevr_topk(n, a, k)
    }

    fn gram(r: usize, n: usize, rows: &[Self]) -> Vec<f64> {
        lapack::dsyrk_gram(r, n, rows)
    }

    fn outer_gram(r: usize, n: usize, rows: &[Self]) -> Vec<f64> {
        lapack::dsyrk_outer(r, n, rows)
    }
}

/// Cyclic Jacobi eigendecomposition; the generic fallback kernel.
///
/// Returns eigenvalues ascending with eigenvector `j` at `j*n`.
pub fn jacobi_eigh<T: Scalar>(n: usize, a: &[T]) -> (Vec<T>, Vec<T>) {
    assert_eq!(a.len(), n * n, "matrix size mismatch");
    let mut m = a.to_vec();
    // v holds the accumulated rotations; row j will end up as eigenvector j.
    let mut v = vec![T::zero(); n * n];
    for j in 0..n {
        v[j * n + j] = T::one();
    }
    let eps = T::epsilon();
    let half = T::from_f64(0.5).unwrap();
    for _sweep in 0..64 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p * n + q] * m[p * n + q];
            }
        }
        let norm: T = m.iter().map(|x| *x * *x).sum();
        if off <= eps * eps * norm || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = half * (aqq - app) / apq;
                let t = if theta >= T::zero() {
                    T::one() / (theta + (T::one() + theta * theta).sqrt())
                } else {
                    -T::one() / (-theta + (T::one() + theta * theta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = m[i * n + p];
                    let aiq = m[i * n + q];
                    m[i * n + p] = c * aip - s * aiq;
                    m[i * n + q] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = m[p * n + i];
                    let aqi = m[q * n + i];
                    m[p * n + i] = c * api - s * aqi;
                    m[q * n + i] = s * api + c * aqi;
                }
                for i in 0..n {
                    let vpi = v[p * n + i];
                    let vqi = v[q * n + i];
                    v[p * n + i] = c * vpi - s * vqi;
                    v[q * n + i] = s * vpi + c * vqi;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[i * n + i]
            .partial_cmp(&m[j * n + j])
            .expect("non-finite eigenvalue")
    });
    let mut vals = Vec::with_capacity(n);
    let mut vecs = vec![T::zero(); n * n];
    for (dst, &src) in order.iter().enumerate() {
        vals.push(m[src * n + src]);
        vecs[dst * n..(dst + 1) * n].copy_from_slice(&v[src * n..(src + 1) * n]);
    }
    (vals, vecs)
}

mod lapack {
    //! Thin wrappers over the system LAPACK/BLAS symbols used by the `f64`
    //! kernel overrides. Row-major symmetric input is passed directly: a
    //! symmetric matrix is its own transpose, so the column-major view is
    //! identical.

    use std::os::raw::c_char;

    extern "C" {
        fn dsyevd_(
            jobz: *const c_char,
            uplo: *const c_char,
            n: *const i32,
            a: *mut f64,
            lda: *const i32,
            w: *mut f64,
            work: *mut f64,
            lwork: *const i32,
            iwork: *mut i32,
            liwork: *const i32,
            info: *mut i32,
        );
        fn dsyevr_(
            jobz: *const c_char,
            range: *const c_char,
            uplo: *const c_char,
            n: *const i32,
            a: *mut f64,
            lda: *const i32,
            vl: *const f64,
            vu: *const f64,
            il: *const i32,
            iu: *const i32,
            abstol: *const f64,
            m: *mut i32,
            w: *mut f64,
            z: *mut f64,
            ldz: *const i32,
            isuppz: *mut i32,
            work: *mut f64,
            lwork: *const i32,
            iwork: *mut i32,
            liwork: *const i32,
            info: *mut i32,
        );
        fn dsyrk_(
            uplo: *const c_char,
            trans: *const c_char,
            n: *const i32,
            k: *const i32,
            alpha: *const f64,
            a: *const f64,
            lda: *const i32,
            beta: *const f64,
            c: *mut f64,
            ldc: *const i32,
        );
    }

    const JOB_V: c_char = b'V' as c_char;
    const UPLO_U: c_char = b'U' as c_char;
    const RANGE_I: c_char = b'I' as c_char;
    const TRANS_N: c_char = b'N' as c_char;
    const TRANS_T: c_char = b'T' as c_char;

    /// Full symmetric eigendecomposition. Eigenvalues ascending; eigenvector
    /// `j` contiguous at `j*n` (LAPACK stores eigenvectors as columns of a
    /// column-major array, which is exactly this layout).
    pub fn dsyevd(n: usize, a: &[f64]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(a.len(), n * n, "matrix size mismatch");
        if n == 0 {
            return (Vec::new(), Vec::new());
        }
        let ni = n as i32;
        let mut m = a.to_vec();
        let mut w = vec![0.0; n];
        let lwork = (1 + 6 * n + 2 * n * n) as i32;
        let liwork = (3 + 5 * n) as i32;
        let mut work = vec![0.0; lwork as usize];
        let mut iwork = vec![0i32; liwork as usize];
        let mut info = 0i32;
        unsafe {
            dsyevd_(
                &JOB_V, &UPLO_U, &ni, m.as_mut_ptr(), &ni, w.as_mut_ptr(),
                work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(), &liwork, &mut info,
            );
        }
        assert_eq!(info, 0, "dsyevd failed with info={info}");
        (w, m)
    }

    /// The `k` largest eigenpairs via dsyevr; eigenvalues descending.
    pub fn dsyevr_topk(n: usize, a: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(a.len(), n * n, "matrix size mismatch");
        assert!(k >= 1 && k <= n);
        let ni = n as i32;
        let mut m = a.to_vec();
        let il = (n - k + 1) as i32;
        let iu = n as i32;
        let abstol = 0.0;
        let mut found = 0i32;
        let mut w = vec![0.0; n];
        let mut z = vec![0.0; n * k];
        let mut isuppz = vec![0i32; 2 * k.max(1)];
        let lwork = (40 * n).max(26 * n) as i32;
        let liwork = (20 * n).max(10 * n) as i32;
        let mut work = vec![0.0; lwork as usize];
        let mut iwork = vec![0i32; liwork as usize];
        let mut info = 0i32;
        unsafe {
            dsyevr_(
                &JOB_V, &RANGE_I, &UPLO_U, &ni, m.as_mut_ptr(), &ni,
                &0.0, &0.0, &il, &iu, &abstol, &mut found,
                w.as_mut_ptr(), z.as_mut_ptr(), &ni, isuppz.as_mut_ptr(),
                work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(), &liwork, &mut info,
            );
        }
        assert_eq!(info, 0, "dsyevr failed with info={info}");
        assert_eq!(found as usize, k, "dsyevr found fewer eigenpairs than requested");
        // dsyevr returns ascending; flip to descending.
        let mut vals = Vec::with_capacity(k);
        let mut vecs = Vec::with_capacity(k * n);
        for j in (0..k).rev() {
            vals.push(w[j]);
            vecs.extend_from_slice(&z[j * n..(j + 1) * n]);
        }
        (vals, vecs)
    }

    /// `R R^T` for row-major `r x n` input: the column-major view of the
    /// buffer is `R^T` (`n x r`), so this is syrk with trans='T'.
    pub fn dsyrk_gram(r: usize, n: usize, rows: &[f64]) -> Vec<f64> {
        assert_eq!(rows.len(), r * n, "matrix size mismatch");
        if r == 0 {
            return Vec::new();
        }
        let mut c = vec![0.0; r * r];
        let (ri, ni) = (r as i32, n as i32);
        unsafe {
            dsyrk_(
                &UPLO_U, &TRANS_T, &ri, &ni, &1.0,
                rows.as_ptr(), &ni.max(1), &0.0, c.as_mut_ptr(), &ri,
            );
        }
        mirror_upper_colmajor(r, &mut c);
        c
    }

    /// `R^T R` for row-major `r x n` input: syrk with trans='N' on the
    /// column-major `n x r` view.
    pub fn dsyrk_outer(r: usize, n: usize, rows: &[f64]) -> Vec<f64> {
        assert_eq!(rows.len(), r * n, "matrix size mismatch");
        if n == 0 {
            return Vec::new();
        }
        let mut c = vec![0.0; n * n];
        let (ri, ni) = (r as i32, n as i32);
        unsafe {
            dsyrk_(
                &UPLO_U, &TRANS_N, &ni, &ri.max(0), &1.0,
                rows.as_ptr(), &ni, &0.0, c.as_mut_ptr(), &ni,
            );
        }
        mirror_upper_colmajor(n, &mut c);
        c
    }

    /// Fill the lower triangle from the upper one (column-major upper =
    /// row-major lower; the result is symmetric either way).
    fn mirror_upper_colmajor(n: usize, c: &mut [f64]) {
        for j in 0..n {
            for i in 0..j {
                c[j + i * n] = c[i + j * n];
            }
        }
    }
}
