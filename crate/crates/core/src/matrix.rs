//! Deterministic balancing of block-diagonal symmetric matrix families.
//!
//! Given symmetric q-block-diagonal matrices `A_1, ..., A_n` with operator
//! norm at most 1, the walk finds signs (first a partial assignment, then a
//! full one over phases) keeping the operator norm of the signed sum at
//! `O(sqrt(n log(2qm/n)))`. The potential is `Tr[exp(eps sum (x_i - x0_i)
//! A_i)]`, which decomposes over blocks; the walk direction is restricted so
//! the potential grows by at most `(1 + 16 eps^2 delta^2)` per step.
//!
//! The trace exponential controls only the top of the spectrum, so the walk
//! internally runs on the doubled family `{A_i} U {-A_i}` (the blocks of
//! both signs inside one potential), which bounds both spectral tails.

use crate::error::{Error, Result};
use crate::linalg::{self, SymmetricMatrix};
use crate::partial;
use crate::scalar::Scalar;
use crate::setcol::SetSystem;
use crate::trace::{WalkRecord, WalkTrace};

/// Relative tolerance on the unit operator-norm bound of input matrices.
const OP_NORM_TOL: f64 = 1e-9;
/// Relative slack on the per-iteration potential growth factor.
const GROWTH_SLACK: f64 = 1e-8;
/// Relative slack on the hard quadratic-error bound `16 Tr[W]`.
const QUAD_SLACK: f64 = 1e-9;
/// Quadratic-error level (as a multiple of `Tr[W]`) above which cached
/// subspace rows are refreshed; half of the hard bound 16.
const QUAD_REFRESH: f64 = 8.0;
/// Below this size the dimension count behind the walk is void and an
/// exhaustive corner search takes over.
const MIN_WALK_DIM: usize = 16;
const SNAP_TOL: f64 = 1e-9;
const STEP_COMPONENT_TOL: f64 = 1e-12;

/// A family of `n` symmetric q-block-diagonal matrices of ambient dimension
/// `m`, each of operator norm at most 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrixFamily<T> {
    n: usize,
    m: usize,
    q: usize,
    /// Block `(i, k)` at `(i * m/q + k) * q^2`, row-major.
    blocks: Vec<T>,
}

impl<T: Scalar> BlockMatrixFamily<T> {
    /// Builds a family from nested blocks: `blocks[i][k]` is the row-major
    /// q x q block `k` of matrix `i`. Off-diagonal pairs are averaged so
    /// each block is exactly symmetric.
    pub fn new(n: usize, m: usize, q: usize, blocks: Vec<Vec<Vec<T>>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("a family needs at least one matrix".into()));
        }
        if q == 0 || m == 0 || m % q != 0 {
            return Err(Error::InvalidInput(format!(
                "block size {q} must divide the ambient dimension {m}"
            )));
        }
        let kcount = m / q;
        if blocks.len() != n {
            return Err(Error::InvalidInput(format!(
                "expected {n} matrices, got {}",
                blocks.len()
            )));
        }
        let mut flat = Vec::with_capacity(n * kcount * q * q);
        for (i, mat) in blocks.iter().enumerate() {
            if mat.len() != kcount {
                return Err(Error::InvalidInput(format!(
                    "matrix {i} has {} blocks, expected {kcount}",
                    mat.len()
                )));
            }
            for (k, b) in mat.iter().enumerate() {
                if b.len() != q * q {
                    return Err(Error::InvalidInput(format!(
                        "block ({i},{k}) has {} entries, expected {}",
                        b.len(),
                        q * q
                    )));
                }
                if b.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "block ({i},{k}) has non-finite entries"
                    )));
                }
                let start = flat.len();
                flat.extend_from_slice(b);
                let half = T::from_f64(0.5).unwrap();
                for r in 0..q {
                    for c in (r + 1)..q {
                        let avg = (flat[start + r * q + c] + flat[start + c * q + r]) * half;
                        flat[start + r * q + c] = avg;
                        flat[start + c * q + r] = avg;
                    }
                }
            }
        }
        let fam = BlockMatrixFamily { n, m, q, blocks: flat };
        let tol = T::one() + T::from_f64(OP_NORM_TOL).unwrap();
        for i in 0..n {
            let norm = fam.matrix_op_norm(i);
            if norm > tol {
                return Err(Error::InvalidInput(format!(
                    "matrix {i} has operator norm {norm} > 1"
                )));
            }
        }
        Ok(fam)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Number of blocks per matrix, `m / q`.
    pub fn block_count(&self) -> usize {
        self.m / self.q
    }

    /// Row-major block `k` of matrix `i`.
    pub fn block(&self, i: usize, k: usize) -> &[T] {
        let qq = self.q * self.q;
        let off = (i * self.block_count() + k) * qq;
        &self.blocks[off..off + qq]
    }

    fn matrix_op_norm(&self, i: usize) -> T {
        let q = self.q;
        let mut worst = T::zero();
        for k in 0..self.block_count() {
            let (vals, _) = T::sym_eigh(q, self.block(i, k));
            for &mu in &vals {
                worst = worst.max(mu.abs());
            }
        }
        worst
    }

    /// The same family with every matrix negated and appended blockwise:
    /// ambient dimension doubles, the potential then bounds both spectral
    /// tails of the signed sum.
    fn doubled(&self) -> BlockMatrixFamily<T> {
        let kcount = self.block_count();
        let qq = self.q * self.q;
        let mut blocks = Vec::with_capacity(2 * self.blocks.len());
        for i in 0..self.n {
            let row = &self.blocks[i * kcount * qq..(i + 1) * kcount * qq];
            blocks.extend_from_slice(row);
            blocks.extend(row.iter().map(|&x| -x));
        }
        BlockMatrixFamily { n: self.n, m: 2 * self.m, q: self.q, blocks }
    }

    /// Sub-family of the matrices at `indices`, in order.
    fn subfamily(&self, indices: &[usize]) -> BlockMatrixFamily<T> {
        let kcount = self.block_count();
        let qq = self.q * self.q;
        let mut blocks = Vec::with_capacity(indices.len() * kcount * qq);
        for &i in indices {
            blocks.extend_from_slice(&self.blocks[i * kcount * qq..(i + 1) * kcount * qq]);
        }
        BlockMatrixFamily { n: indices.len(), m: self.m, q: self.q, blocks }
    }
}

/// Matrix exponential of a symmetric matrix, through its eigendecomposition.
pub fn sym_exp<T: Scalar>(b: &SymmetricMatrix<T>) -> Result<SymmetricMatrix<T>> {
    let n = b.dim();
    let dec = linalg::eigh(b)?;
    let mut entries = vec![T::zero(); n * n];
    for j in 0..n {
        let e = dec.eigenvalues()[j].exp();
        let u = dec.eigenvector(j);
        for a in 0..n {
            let s = e * u[a];
            for c in 0..n {
                entries[a * n + c] += s * u[c];
            }
        }
    }
    SymmetricMatrix::new(n, entries)
}

/// Walk state for matrix balancing: the point, its starting value, and the
/// potential scale and step size.
#[derive(Debug, Clone)]
pub struct MatrixWalkState<T> {
    pub t: usize,
    pub x: Vec<T>,
    pub x0: Vec<T>,
    pub epsilon: T,
    pub delta: T,
}

/// The blockwise weight matrix `W = exp(eps sum_i (x_i - x0_i) A_i)`
/// together with its square root and per-block traces.
#[derive(Debug, Clone)]
pub struct BlockWeights<T> {
    q: usize,
    /// Block `k` of `W` at `k * q^2`, row-major.
    entries: Vec<T>,
    /// Block `k` of `W^{1/2}` at `k * q^2`, row-major.
    sqrt_entries: Vec<T>,
    /// Per-block potentials `Phi_k = Tr[W_k]`.
    block_traces: Vec<T>,
}

impl<T: Scalar> BlockWeights<T> {
    pub fn block_count(&self) -> usize {
        self.block_traces.len()
    }

    pub fn block(&self, k: usize) -> &[T] {
        let qq = self.q * self.q;
        &self.entries[k * qq..(k + 1) * qq]
    }

    pub fn sqrt_block(&self, k: usize) -> &[T] {
        let qq = self.q * self.q;
        &self.sqrt_entries[k * qq..(k + 1) * qq]
    }

    pub fn block_traces(&self) -> &[T] {
        &self.block_traces
    }

    /// Total potential `Phi = Tr[W]`.
    pub fn trace(&self) -> T {
        self.block_traces.iter().cloned().sum()
    }

    /// Frobenius inner product `W . (sum_i c_i A_i)` expanded over blocks.
    pub fn dot_combination(&self, fam: &BlockMatrixFamily<T>, coeffs: &[T]) -> T {
        let q = self.q;
        let mut total = T::zero();
        for k in 0..self.block_count() {
            let w = self.block(k);
            for (i, &c) in coeffs.iter().enumerate() {
                if c == T::zero() {
                    continue;
                }
                let b = fam.block(i, k);
                let mut dot = T::zero();
                for e in 0..q * q {
                    dot += w[e] * b[e];
                }
                total += c * dot;
            }
        }
        total
    }
}

/// Builds the blockwise weight matrix of the state: each block of
/// `eps sum_i (x_i - x0_i) A_i` is eigendecomposed and exponentiated.
pub fn weight_matrix<T: Scalar>(
    state: &MatrixWalkState<T>,
    fam: &BlockMatrixFamily<T>,
) -> Result<BlockWeights<T>> {
    if state.x.len() != fam.n || state.x0.len() != fam.n {
        return Err(Error::InvalidInput(format!(
            "state has {} coordinates, family has {} matrices",
            state.x.len(),
            fam.n
        )));
    }
    let diff: Vec<T> = (0..fam.n).map(|i| state.x[i] - state.x0[i]).collect();
    Ok(block_weights(fam, &diff, state.epsilon))
}

fn block_weights<T: Scalar>(fam: &BlockMatrixFamily<T>, diff: &[T], eps: T) -> BlockWeights<T> {
    let q = fam.q;
    let qq = q * q;
    let kcount = fam.block_count();
    let half = T::from_f64(0.5).unwrap();
    let mut entries = vec![T::zero(); kcount * qq];
    let mut sqrt_entries = vec![T::zero(); kcount * qq];
    let mut block_traces = Vec::with_capacity(kcount);
    let mut s = vec![T::zero(); qq];
    for k in 0..kcount {
        for v in s.iter_mut() {
            *v = T::zero();
        }
        for (i, &d) in diff.iter().enumerate() {
            if d == T::zero() {
                continue;
            }
            let c = eps * d;
            let b = fam.block(i, k);
            for e in 0..qq {
                s[e] += c * b[e];
            }
        }
        let (vals, vecs) = T::sym_eigh(q, &s);
        let w = &mut entries[k * qq..(k + 1) * qq];
        let ws = &mut sqrt_entries[k * qq..(k + 1) * qq];
        let mut tr = T::zero();
        for j in 0..q {
            let e = vals[j].exp();
            let eh = (vals[j] * half).exp();
            tr += e;
            let u = &vecs[j * q..(j + 1) * q];
            for a in 0..q {
                let se = e * u[a];
                let sh = eh * u[a];
                for c in 0..q {
                    w[a * q + c] += se * u[c];
                    ws[a * q + c] += sh * u[c];
                }
            }
        }
        block_traces.push(tr);
    }
    BlockWeights { q, entries, sqrt_entries, block_traces }
}

/// Constraint rows whose orthogonal complement bounds the quadratic error:
/// with `M_{ij} = W . (A_i A_j)`, the rows are the eigenvectors of `M` with
/// eigenvalue at least `k Tr[W]` (at most `n/k` of them by Markov), so any
/// unit `y` orthogonal to them has `W . (sum y_i A_i)^2 <= k Tr[W]`.
pub fn quadratic_error_subspace<T: Scalar>(
    w: &BlockWeights<T>,
    fam: &BlockMatrixFamily<T>,
    k: f64,
) -> Result<Vec<Vec<T>>> {
    if w.block_count() != fam.block_count() || w.q != fam.q {
        return Err(Error::InvalidInput(
            "weight matrix does not match the family's block structure".into(),
        ));
    }
    if k < 2.0 {
        return Err(Error::InvalidInput(format!("parameter k = {k} must be at least 2")));
    }
    let all: Vec<usize> = (0..fam.n).collect();
    let (rows, count) = quadratic_rows(w, fam, &all, k);
    let n = fam.n;
    Ok((0..count).map(|j| rows[j * n..(j + 1) * n].to_vec()).collect())
}

/// The eigenvector rows of `M` restricted to the matrices at `indices`.
/// `M` equals the Gram matrix of the vectors `G_i = vec(W^{1/2} A_i)`, since
/// `<G_i, G_j> = Tr[A_i W A_j] = W . (A_i A_j)` by cyclicity (both sides are
/// symmetric in `i, j` and share the quadratic form `W . (sum y_i A_i)^2`).
fn quadratic_rows<T: Scalar>(
    w: &BlockWeights<T>,
    fam: &BlockMatrixFamily<T>,
    indices: &[usize],
    k: f64,
) -> (Vec<T>, usize) {
    let q = fam.q;
    let qq = q * q;
    let kcount = fam.block_count();
    let a = indices.len();
    let ambient = kcount * qq;
    let mut g = vec![T::zero(); a * ambient];
    for (slot, &i) in indices.iter().enumerate() {
        let out = &mut g[slot * ambient..(slot + 1) * ambient];
        for kb in 0..kcount {
            let ws = w.sqrt_block(kb);
            let b = fam.block(i, kb);
            let dst = &mut out[kb * qq..(kb + 1) * qq];
            for r in 0..q {
                for c in 0..q {
                    let mut s = T::zero();
                    for e in 0..q {
                        s += ws[r * q + e] * b[e * q + c];
                    }
                    dst[r * q + c] = s;
                }
            }
        }
    }
    let m = T::gram(a, ambient, &g);
    let (vals, vecs) = T::sym_eigh(a, &m);
    let bound = T::from_f64(k).unwrap() * w.trace();
    let mut rows = Vec::new();
    let mut count = 0;
    for j in (0..a).rev() {
        if vals[j] < bound {
            break;
        }
        rows.extend_from_slice(&vecs[j * a..(j + 1) * a]);
        count += 1;
    }
    (rows, count)
}

/// Diagnostics of one matrix-balancing walk.
#[derive(Debug, Clone)]
pub struct MatrixPhaseReport {
    /// Number of matrices the walk ran on.
    pub active_before: usize,
    /// Potential scale used by the walk.
    pub epsilon: f64,
    pub trace: WalkTrace,
}

/// Potential scale for a walk on `n` matrices: `sqrt(max(1, ln(2 q m / n)) / n)`
/// with `m` the ambient dimension of the doubled (two-sided) family.
pub fn epsilon_for<T: Scalar>(n: usize, doubled_m: usize, q: usize) -> T {
    let nn = n as f64;
    let arg = (2.0 * q as f64 * doubled_m as f64 / nn).ln().max(1.0);
    T::from_f64((arg / nn).sqrt()).unwrap()
}

/// Partial coloring: moves `x0` to a point with at least half its
/// coordinates in `{-1, 1}` while the signed sum of the moved family keeps a
/// small operator norm.
pub fn run_partial<T: Scalar>(
    fam: &BlockMatrixFamily<T>,
    x0: &[T],
) -> Result<(Vec<T>, MatrixPhaseReport)> {
    let n = fam.n;
    if x0.len() != n {
        return Err(Error::InvalidInput(format!(
            "starting point has {} coordinates, family has {n} matrices",
            x0.len()
        )));
    }
    if x0.iter().any(|c| !c.is_finite() || c.abs() > T::one()) {
        return Err(Error::InvalidInput("starting point must lie in [-1,1]^n".into()));
    }
    let dfam = fam.doubled();
    let eps: T = epsilon_for(n, dfam.m, fam.q);
    let delta = T::one() / T::from_usize(n).unwrap().sqrt();
    if n < MIN_WALK_DIM {
        let x = exhaustive_fallback(fam, x0);
        let mut trace = WalkTrace::new(delta.to_f64().unwrap());
        trace.records.push(WalkRecord {
            phi: 2.0 * fam.m as f64,
            log_phi: (2.0 * fam.m as f64).ln(),
            alpha: 0.0,
            active: 0,
            dim_u: 0,
        });
        return Ok((
            x,
            MatrixPhaseReport {
                active_before: n,
                epsilon: eps.to_f64().unwrap(),
                trace,
            },
        ));
    }
    if eps.to_f64().unwrap() > 1.0 {
        return Err(Error::ParameterFailure {
            iteration: 0,
            message: format!(
                "potential scale {} exceeds 1; the quadratic expansion of the \
                 matrix exponential is invalid (ambient dimension too large \
                 for n = {n})",
                eps
            ),
        });
    }
    let (x, trace) = matrix_walk(&dfam, x0, eps, delta)?;
    Ok((
        x,
        MatrixPhaseReport { active_before: n, epsilon: eps.to_f64().unwrap(), trace },
    ))
}

struct QuadCache<T> {
    /// Rows restricted to the active slots, flat.
    rows: Vec<T>,
    count: usize,
    active_len: usize,
}

fn matrix_walk<T: Scalar>(
    dfam: &BlockMatrixFamily<T>,
    x0: &[T],
    eps: T,
    delta: T,
) -> Result<(Vec<T>, WalkTrace)> {
    let n = dfam.n;
    let q = dfam.q;
    let kcount = dfam.block_count();
    let frozen_target = n - n / 2;
    let snap = T::from_f64(SNAP_TOL).unwrap();
    let comp_tol = T::from_f64(STEP_COMPONENT_TOL).unwrap();
    let t_cap = {
        let b = T::from_f64(2.0).unwrap() * T::from_usize(n).unwrap() / (delta * delta);
        b.to_f64().unwrap().ceil() as usize
    };
    // Blocks pinned by the top-weight constraint; q(q+1)/2 rows each.
    let pinned_blocks = n / (16 * q * q);
    let growth = (T::one() + T::from_f64(16.0).unwrap() * eps * eps * delta * delta)
        * (T::one() + T::from_f64(GROWTH_SLACK).unwrap());

    let mut x = x0.to_vec();
    let mut t = 0usize;
    let mut trace = WalkTrace::new(delta.to_f64().unwrap());
    let mut cache: Option<QuadCache<T>> = None;
    let mut prev_phi: Option<T> = None;
    let mut wall_hits = 0usize;

    loop {
        let active: Vec<usize> = (0..n).filter(|&j| x[j].abs() < T::one()).collect();
        let a = active.len();
        if n - a >= frozen_target {
            break;
        }
        if t > t_cap {
            return Err(Error::Invariant(format!(
                "iteration bound 2n/delta^2 = {t_cap} exceeded"
            )));
        }
        let diff: Vec<T> = (0..n).map(|i| x[i] - x0[i]).collect();
        let w = block_weights(dfam, &diff, eps);
        let phi = w.trace();
        if let Some(prev) = prev_phi {
            if phi > prev * growth {
                return Err(Error::Invariant(format!(
                    "potential grew from {prev} to {phi} at iteration {t}, \
                     beyond the factor {growth}"
                )));
            }
        }
        prev_phi = Some(phi);
        let tr_w = phi;
        let hard = T::from_f64(16.0).unwrap() * tr_w * (T::one() + T::from_f64(QUAD_SLACK).unwrap());
        let refresh_at = T::from_f64(QUAD_REFRESH).unwrap() * tr_w;

        // Base constraint rows over the active slots: the current point, the
        // blockwise zero constraints of the top-potential blocks, and the
        // gradient row W . A_i.
        let mut base: Vec<T> = Vec::new();
        let mut base_count = 0usize;
        for &j in &active {
            base.push(x[j]);
        }
        base_count += 1;
        let mut order: Vec<usize> = (0..kcount).collect();
        order.sort_by(|&p, &r| {
            w.block_traces[r].partial_cmp(&w.block_traces[p]).unwrap().then(p.cmp(&r))
        });
        for &k in order.iter().take(pinned_blocks) {
            for r in 0..q {
                for c in r..q {
                    for &i in &active {
                        base.push(dfam.block(i, k)[r * q + c]);
                    }
                    base_count += 1;
                }
            }
        }
        for &i in &active {
            let mut g = T::zero();
            for k in 0..kcount {
                let wb = w.block(k);
                let b = dfam.block(i, k);
                for e in 0..q * q {
                    g += wb[e] * b[e];
                }
            }
            base.push(g);
        }
        base_count += 1;

        let mut z: Vec<T> = Vec::new();
        let mut dim_u = 0usize;
        for attempt in 0..2 {
            let stale = match &cache {
                Some(c) => c.active_len != a,
                None => true,
            };
            if stale || attempt == 1 {
                let (rows, count) = quadratic_rows(&w, dfam, &active, 16.0);
                cache = Some(QuadCache { rows, count, active_len: a });
            }
            let c = cache.as_ref().unwrap();
            let mut rows = base.clone();
            rows.extend_from_slice(&c.rows);
            let row_count = base_count + c.count;
            let rs = linalg::row_space_normalized(&rows, row_count, a);
            dim_u = a - rs.rank;
            if dim_u == 0 {
                push_record(&mut trace, phi, 0.0, a, 0);
                return Err(Error::Stuck { iteration: t, trace: Box::new(trace) });
            }
            let probe: Vec<T> = active
                .iter()
                .map(|&j| T::from_f64(partial::probe_sign(t, j)).unwrap())
                .collect();
            z = linalg::project_to_nullspace(&rs, &probe);
            if z.is_empty() {
                z = linalg::extend_nullspace(&rs, 1);
            }
            if z.is_empty() {
                push_record(&mut trace, phi, 0.0, a, 0);
                return Err(Error::Stuck { iteration: t, trace: Box::new(trace) });
            }
            let quad = quadratic_form(&w, dfam, &active, &z);
            if quad <= refresh_at.min(hard) {
                break;
            }
            if attempt == 1 {
                if quad <= hard {
                    break;
                }
                return Err(Error::Invariant(format!(
                    "direction violates the quadratic-error bound even with \
                     fresh eigenvectors: {quad} > {hard} at iteration {t}"
                )));
            }
        }

        let mut alpha = T::one();
        for (slot, &j) in active.iter().enumerate() {
            if z[slot].abs() <= comp_tol {
                continue;
            }
            let wall = if z[slot] > T::zero() { T::one() } else { -T::one() };
            let ratio = (wall - x[j]) / (delta * z[slot]);
            if ratio <= T::zero() {
                return Err(Error::Invariant(format!(
                    "coordinate {j} is already on a wall in the step direction"
                )));
            }
            alpha = alpha.min(ratio);
        }

        push_record(&mut trace, phi, alpha.to_f64().unwrap(), a, dim_u);

        let mut froze = false;
        for (slot, &j) in active.iter().enumerate() {
            let mut v = x[j] + delta * alpha * z[slot];
            if (v - T::one()).abs() <= snap {
                v = T::one();
            } else if (v + T::one()).abs() <= snap {
                v = -T::one();
            }
            x[j] = v;
            if v.abs() >= T::one() {
                froze = true;
            }
        }
        t += 1;
        if froze {
            wall_hits += 1;
            if wall_hits > n {
                return Err(Error::Invariant(format!("more than n = {n} wall-hit iterations")));
            }
            cache = None;
        }
    }
    let diff: Vec<T> = (0..n).map(|i| x[i] - x0[i]).collect();
    let final_phi = block_weights(dfam, &diff, eps).trace();
    push_record(&mut trace, final_phi, 0.0, (0..n).filter(|&j| x[j].abs() < T::one()).count(), 0);
    Ok((x, trace))
}

fn push_record<T: Scalar>(trace: &mut WalkTrace, phi: T, alpha: f64, active: usize, dim_u: usize) {
    let phi = phi.to_f64().unwrap();
    trace.records.push(WalkRecord { phi, log_phi: phi.ln(), alpha, active, dim_u });
}

/// `W . (sum_slot z_slot A_{active[slot]})^2`, expanded blockwise.
fn quadratic_form<T: Scalar>(
    w: &BlockWeights<T>,
    fam: &BlockMatrixFamily<T>,
    active: &[usize],
    z: &[T],
) -> T {
    let q = fam.q;
    let qq = q * q;
    let mut total = T::zero();
    let mut y = vec![T::zero(); qq];
    for k in 0..fam.block_count() {
        for v in y.iter_mut() {
            *v = T::zero();
        }
        for (slot, &i) in active.iter().enumerate() {
            let c = z[slot];
            if c == T::zero() {
                continue;
            }
            let b = fam.block(i, k);
            for e in 0..qq {
                y[e] += c * b[e];
            }
        }
        let wb = w.block(k);
        // Tr[W Y Y] = sum_{r,c} (W Y)_{rc} Y_{cr}.
        for r in 0..q {
            for c in 0..q {
                let mut wy = T::zero();
                for e in 0..q {
                    wy += wb[r * q + e] * y[e * q + c];
                }
                total += wy * y[c * q + r];
            }
        }
    }
    total
}

/// Exhaustive corner search minimizing the operator norm of the moved sum;
/// the fallback for families too small for the walk's dimension count.
fn exhaustive_fallback<T: Scalar>(fam: &BlockMatrixFamily<T>, x0: &[T]) -> Vec<T> {
    let n = fam.n;
    let free: Vec<usize> = (0..n).filter(|&j| x0[j].abs() < T::one()).collect();
    let mut x = x0.to_vec();
    let mut best: Option<(T, Vec<T>)> = None;
    let mut coeffs = vec![T::zero(); n];
    for mask in 0u64..(1u64 << free.len()) {
        for (bit, &j) in free.iter().enumerate() {
            x[j] = if mask >> bit & 1 == 0 { T::one() } else { -T::one() };
        }
        for j in 0..n {
            coeffs[j] = x[j] - x0[j];
        }
        let norm = operator_norm(fam, &coeffs);
        match &best {
            Some((cur, _)) if *cur <= norm => {}
            _ => best = Some((norm, x.clone())),
        }
    }
    best.expect("at least one corner exists").1
}

/// Operator norm of `sum_i coeffs_i A_i`: the largest absolute eigenvalue
/// over the blocks.
pub fn operator_norm<T: Scalar>(fam: &BlockMatrixFamily<T>, coeffs: &[T]) -> T {
    let q = fam.q;
    let qq = q * q;
    let mut worst = T::zero();
    let mut s = vec![T::zero(); qq];
    for k in 0..fam.block_count() {
        for v in s.iter_mut() {
            *v = T::zero();
        }
        for (i, &c) in coeffs.iter().enumerate() {
            if c == T::zero() {
                continue;
            }
            let b = fam.block(i, k);
            for e in 0..qq {
                s[e] += c * b[e];
            }
        }
        let (vals, _) = T::sym_eigh(q, &s);
        for &mu in &vals {
            worst = worst.max(mu.abs());
        }
    }
    worst
}

/// Full +-1 balancing by phases: each phase runs the partial walk on the
/// still-fractional coordinates, so their count at least halves per phase
/// and the phase norms form a subgeometric sum.
pub fn run_full<T: Scalar>(
    fam: &BlockMatrixFamily<T>,
) -> Result<(Vec<i8>, Vec<MatrixPhaseReport>)> {
    let n = fam.n;
    let mut x = vec![T::zero(); n];
    let mut phases = Vec::new();
    loop {
        let active: Vec<usize> = (0..n).filter(|&j| x[j].abs() < T::one()).collect();
        if active.is_empty() {
            break;
        }
        let sub = fam.subfamily(&active);
        let start: Vec<T> = active.iter().map(|&j| x[j]).collect();
        let (xp, report) = run_partial(&sub, &start)?;
        let frozen = xp.iter().filter(|c| c.abs() >= T::one()).count();
        if 2 * frozen < active.len() {
            return Err(Error::Invariant(format!(
                "phase froze only {frozen} of {} coordinates",
                active.len()
            )));
        }
        for (slot, &j) in active.iter().enumerate() {
            x[j] = xp[slot];
        }
        phases.push(report);
    }
    let chi = x
        .iter()
        .map(|&c| if c >= T::one() { 1i8 } else { -1i8 })
        .collect();
    Ok((chi, phases))
}

/// The q = 1 diagonal encoding of a set system: one matrix per element,
/// whose diagonal is that element's incidence over the sets. The operator
/// norm of a signed sum equals the set discrepancy of the same signs.
pub fn diagonal_encoding<T: Scalar>(sys: &SetSystem) -> Result<BlockMatrixFamily<T>> {
    let n = sys.n();
    let m = sys.m();
    let mut blocks = vec![vec![vec![T::zero(); 1]; m]; n];
    for (k, set) in sys.sets().iter().enumerate() {
        for &e in set {
            blocks[e - 1][k][0] = T::one();
        }
    }
    BlockMatrixFamily::new(n, m, 1, blocks)
}
