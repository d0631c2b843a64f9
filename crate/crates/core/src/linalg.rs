//! Dense symmetric linear algebra shared by all walks: eigendecomposition,
//! orthonormal nullspace bases, and a deterministic choice of a unit vector
//! inside an intersection of linearly constrained subspaces.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative singular-value cutoff used for rank decisions.
pub const RANK_CUTOFF: f64 = 1e-8;

/// Residual-norm threshold below which a candidate vector counts as lying
/// inside the span it was orthogonalized against.
const RESIDUAL_TOL: f64 = 1e-6;

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix<T> {
    dim: usize,
    entries: Vec<T>,
}

impl<T: Scalar> SymmetricMatrix<T> {
    /// Builds a symmetric matrix from a row-major square array, averaging
    /// mismatched off-diagonal pairs so `entries[i][j] == entries[j][i]`
    /// holds exactly.
    pub fn new(dim: usize, mut entries: Vec<T>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let half = T::from_f64(0.5).unwrap();
        for i in 0..dim {
            for j in (i + 1)..dim {
                let avg = (entries[i * dim + j] + entries[j * dim + i]) * half;
                entries[i * dim + j] = avg;
                entries[j * dim + i] = avg;
            }
        }
        Ok(SymmetricMatrix { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.dim + j]
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> T {
        self.entries.iter().map(|x| *x * *x).sum::<T>().sqrt()
    }
}

/// Eigendecomposition with eigenvalues sorted descending and orthonormal
/// eigenvectors in matching order.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition<T> {
    dim: usize,
    /// Sorted descending.
    eigenvalues: Vec<T>,
    /// Eigenvector `j` at `j*dim..(j+1)*dim`, sign-normalized so its first
    /// nonzero coordinate is positive.
    eigenvectors: Vec<T>,
}

impl<T: Scalar> EigenDecomposition<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn eigenvector(&self, j: usize) -> &[T] {
        &self.eigenvectors[j * self.dim..(j + 1) * self.dim]
    }

    /// Rebuilds the matrix as `sum_j mu_j u_j u_j^T`.
    pub fn reconstruct(&self) -> SymmetricMatrix<T> {
        let n = self.dim;
        let mut entries = vec![T::zero(); n * n];
        for j in 0..self.eigenvalues.len() {
            let mu = self.eigenvalues[j];
            let u = self.eigenvector(j);
            for a in 0..n {
                let s = mu * u[a];
                for b in 0..n {
                    entries[a * n + b] += s * u[b];
                }
            }
        }
        SymmetricMatrix { dim: n, entries }
    }
}

/// Orthonormal basis of a linear subspace of an ambient space.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis<T> {
    ambient_dim: usize,
    /// Basis vector `j` at `j*ambient_dim..(j+1)*ambient_dim`.
    basis: Vec<T>,
}

impl<T: Scalar> SubspaceBasis<T> {
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        if self.ambient_dim == 0 {
            0
        } else {
            self.basis.len() / self.ambient_dim
        }
    }

    pub fn vector(&self, j: usize) -> &[T] {
        &self.basis[j * self.ambient_dim..(j + 1) * self.ambient_dim]
    }
}

/// Eigendecomposition of a dense symmetric matrix. Eigenvalues come out
/// sorted descending with orthonormal, sign-normalized eigenvectors.
pub fn eigh<T: Scalar>(a: &SymmetricMatrix<T>) -> Result<EigenDecomposition<T>> {
    let n = a.dim;
    let (vals, vecs) = T::sym_eigh(n, &a.entries);
    // Kernel returns ascending order; flip to descending.
    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = vec![T::zero(); n * n];
    for (dst, src) in (0..n).rev().enumerate() {
        eigenvalues.push(vals[src]);
        let out = &mut eigenvectors[dst * n..(dst + 1) * n];
        out.copy_from_slice(&vecs[src * n..(src + 1) * n]);
        sign_normalize(out);
    }
    Ok(EigenDecomposition { dim: n, eigenvalues, eigenvectors })
}

/// Flips the sign of `v` if its first nonzero coordinate is negative.
pub(crate) fn sign_normalize<T: Scalar>(v: &mut [T]) {
    for &x in v.iter() {
        if x != T::zero() {
            if x < T::zero() {
                for y in v.iter_mut() {
                    *y = -*y;
                }
            }
            return;
        }
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut s = T::zero();
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub(crate) fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Orthonormal basis of the row space of a constraint-row list, together
/// with the numerical rank.
///
/// The rank comes from the eigenvalues of the small `r x r` Gram matrix
/// `R R^T`: the singular values of `R` are their square roots and values
/// below `RANK_CUTOFF` times the largest are treated as zero. The basis
/// vectors are `R^T u / sigma` for the kept eigenpairs (descending), with a
/// final Gram-Schmidt polish pass for numerical orthonormality.
pub(crate) struct RowSpace<T> {
    pub ambient: usize,
    pub rank: usize,
    /// Basis vector `j` at `j*ambient..(j+1)*ambient`.
    pub basis: Vec<T>,
}

pub(crate) fn row_space<T: Scalar>(rows: &[T], r: usize, ambient: usize) -> RowSpace<T> {
    if r == 0 || ambient == 0 {
        return RowSpace { ambient, rank: 0, basis: Vec::new() };
    }
    let gram = T::gram(r, ambient, rows);
    let (mu, u) = T::sym_eigh(r, &gram);
    let sigma_max = mu[r - 1].max(T::zero()).sqrt();
    let cutoff = T::from_f64(RANK_CUTOFF).unwrap() * sigma_max;
    let mut basis = Vec::new();
    let mut rank = 0;
    if sigma_max > T::zero() {
        for j in (0..r).rev() {
            let sigma = mu[j].max(T::zero()).sqrt();
            if sigma <= cutoff {
                break;
            }
            let uj = &u[j * r..(j + 1) * r];
            let mut q = vec![T::zero(); ambient];
            for i in 0..r {
                let c = uj[i] / sigma;
                if c == T::zero() {
                    continue;
                }
                let row = &rows[i * ambient..(i + 1) * ambient];
                for t in 0..ambient {
                    q[t] += c * row[t];
                }
            }
            // Polish: orthogonalize against the vectors accepted so far and
            // renormalize, so downstream projections can rely on the basis
            // being orthonormal to machine precision.
            for prev in 0..rank {
                let p = &basis[prev * ambient..(prev + 1) * ambient];
                let c = dot(&q, p);
                for t in 0..ambient {
                    q[t] = q[t] - c * p[t];
                }
            }
            let nrm = norm2(&q);
            if nrm <= cutoff.max(T::from_f64(RANK_CUTOFF).unwrap()) {
                continue;
            }
            for t in 0..ambient {
                q[t] = q[t] / nrm;
            }
            basis.extend_from_slice(&q);
            rank += 1;
        }
    }
    RowSpace { ambient, rank, basis }
}

/// `row_space` after scaling every nonzero row to unit norm. Constraint
/// rows are scale-invariant, and without this a row of tiny norm (such as a
/// weighted gradient over near-zero entries) falls below the relative rank
/// cutoff set by the largest row and silently loses its orthogonality.
pub(crate) fn row_space_normalized<T: Scalar>(
    rows: &[T],
    r: usize,
    ambient: usize,
) -> RowSpace<T> {
    let mut scaled = Vec::with_capacity(r * ambient);
    let mut kept = 0usize;
    for i in 0..r {
        let row = &rows[i * ambient..(i + 1) * ambient];
        let nrm = norm2(row);
        if nrm == T::zero() {
            continue;
        }
        scaled.extend(row.iter().map(|&v| v / nrm));
        kept += 1;
    }
    row_space(&scaled, kept, ambient)
}

/// Orthogonalizes `v` in place against a list of orthonormal vectors stored
/// flat, repeating the sweep while it keeps shrinking the norm materially
/// (classical "twice is enough" with an adaptive extra pass). Returns the
/// final norm.
fn orthogonalize_adaptive<T: Scalar>(v: &mut [T], spans: &[&[T]], ambient: usize) -> T {
    let half = T::from_f64(0.5).unwrap();
    let mut prev = norm2(v);
    for _pass in 0..4 {
        for flat in spans {
            let count = flat.len() / ambient.max(1);
            for j in 0..count {
                let b = &flat[j * ambient..(j + 1) * ambient];
                let c = dot(v, b);
                if c == T::zero() {
                    continue;
                }
                for t in 0..ambient {
                    v[t] = v[t] - c * b[t];
                }
            }
        }
        let nrm = norm2(v);
        if nrm > half * prev || nrm == T::zero() {
            return nrm;
        }
        prev = nrm;
    }
    norm2(v)
}

/// Scans standard basis vectors in index order and accepts those with a
/// significant component outside `row_space` and the already-accepted set,
/// stopping after `want` acceptances. Accepted vectors are normalized and
/// sign-normalized. This is the single code path behind both the full
/// nullspace basis and the walks' first-direction fast path, so the two
/// agree bitwise.
pub(crate) fn extend_nullspace<T: Scalar>(rs: &RowSpace<T>, want: usize) -> Vec<T> {
    let n = rs.ambient;
    let tol = T::from_f64(RESIDUAL_TOL).unwrap();
    let mut accepted: Vec<T> = Vec::new();
    let mut count = 0usize;
    for j in 0..n {
        if count == want {
            break;
        }
        let mut v = vec![T::zero(); n];
        v[j] = T::one();
        let nrm = orthogonalize_adaptive(&mut v, &[&rs.basis, &accepted], n);
        if nrm <= tol {
            continue;
        }
        for t in 0..n {
            v[t] = v[t] / nrm;
        }
        sign_normalize(&mut v);
        accepted.extend_from_slice(&v);
        count += 1;
    }
    accepted
}

/// Projects `probe` onto the orthogonal complement of `row_space` and
/// normalizes. Returns an empty vector when the probe lies in the row space
/// (residual norm at most `RESIDUAL_TOL` times the probe norm). Unlike the
/// standard-basis scan this keeps the probe's signs, so a balanced probe
/// yields a direction without coordinate bias.
pub(crate) fn project_to_nullspace<T: Scalar>(rs: &RowSpace<T>, probe: &[T]) -> Vec<T> {
    let n = rs.ambient;
    let tol = T::from_f64(RESIDUAL_TOL).unwrap() * norm2(probe);
    let mut v = probe.to_vec();
    let nrm = orthogonalize_adaptive(&mut v, &[&rs.basis], n);
    if nrm <= tol {
        return Vec::new();
    }
    for t in 0..n {
        v[t] = v[t] / nrm;
    }
    v
}

/// Orthonormal basis of `{x : <r,x> = 0 for all constraint rows r}`.
///
/// An empty row list yields the full space. Rank is decided with a relative
/// singular-value cutoff of `RANK_CUTOFF` times the largest singular value.
pub fn nullspace_intersection<T: Scalar>(
    constraint_rows: &[Vec<T>],
    ambient_dim: usize,
) -> Result<SubspaceBasis<T>> {
    let r = constraint_rows.len();
    let mut flat = Vec::with_capacity(r * ambient_dim);
    for row in constraint_rows {
        if row.len() != ambient_dim {
            return Err(Error::InvalidInput(format!(
                "constraint row has length {}, expected {ambient_dim}",
                row.len()
            )));
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("constraint row has non-finite entries".into()));
        }
        flat.extend_from_slice(row);
    }
    let rs = row_space(&flat, r, ambient_dim);
    let want = ambient_dim - rs.rank;
    let basis = extend_nullspace(&rs, want);
    Ok(SubspaceBasis { ambient_dim, basis })
}

/// Deterministic unit vector inside a subspace: the first basis vector,
/// sign-normalized so its first nonzero coordinate is positive.
pub fn pick_unit_vector<T: Scalar>(u: &SubspaceBasis<T>) -> Result<Vec<T>> {
    if u.dim() == 0 {
        return Err(Error::SubspaceExhausted);
    }
    let mut v = u.vector(0).to_vec();
    sign_normalize(&mut v);
    Ok(v)
}
