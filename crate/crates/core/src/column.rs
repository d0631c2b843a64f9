//! Sign selection for matrices with bounded column norms.
//!
//! Given a real matrix whose columns have unit Euclidean norm, the walk
//! finds `x` in `{-1,1}^n` with `||Ax||_inf = O(sqrt(log n))`. Rows are
//! first stacked two-sided and split by entry magnitude: light rows (all
//! entries small) are controlled by an exponential potential mixing the
//! signed row sum with the row's remaining effective length, while heavy
//! rows (all entries large) are pinned to zero until so little of their
//! mass is uncolored that any completion stays bounded.

use crate::error::{Error, Result};
use crate::linalg;
use crate::partial;
use crate::scalar::Scalar;
use crate::trace::{HeavyExit, WalkRecord, WalkTrace};

/// Relative tolerance on the unit column-norm bound.
const COL_NORM_TOL: f64 = 1e-9;
/// Relative slack on the potential monotonicity assertion.
const MONOTONE_SLACK: f64 = 1e-8;
/// Relative slack on the hard quadratic subspace bounds.
const QUAD_SLACK: f64 = 1e-9;
/// Quadratic level (as a multiple of the hard bound's right side) above
/// which cached subspace rows are refreshed; half of the hard factor 16.
const QUAD_REFRESH: f64 = 8.0;
/// Tolerance on the pinned heavy-row sums `<A_i, x> = 0`.
const HEAVY_ZERO_TOL: f64 = 1e-6;
const SNAP_TOL: f64 = 1e-9;
const STEP_COMPONENT_TOL: f64 = 1e-12;

/// Dense matrix whose columns have Euclidean norm at most 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnInstance<T> {
    m: usize,
    n: usize,
    /// Row-major, `m x n`.
    rows: Vec<T>,
}

impl<T: Scalar> ColumnInstance<T> {
    pub fn new(m: usize, n: usize, rows: Vec<Vec<T>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("the matrix needs at least one column".into()));
        }
        if rows.len() != m {
            return Err(Error::InvalidInput(format!(
                "expected {m} rows, got {}",
                rows.len()
            )));
        }
        let mut flat = Vec::with_capacity(m * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!("row {i} has non-finite entries")));
            }
            flat.extend_from_slice(row);
        }
        let tol = T::one() + T::from_f64(COL_NORM_TOL).unwrap();
        for j in 0..n {
            let norm = (0..m).map(|i| flat[i * n + j] * flat[i * n + j]).sum::<T>().sqrt();
            if norm > tol {
                return Err(Error::InvalidInput(format!(
                    "column {j} has norm {norm} > 1"
                )));
            }
        }
        Ok(ColumnInstance { m, n, rows: flat })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.rows[i * self.n..(i + 1) * self.n]
    }
}

/// Walk parameters. `alpha` scales the signed-sum term of the potential,
/// `beta` the effective-length term, `delta` is the step size and `c` the
/// large constant governing the light/heavy split, the length cap of the
/// potential, and the stopping size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BDGParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub c: f64,
}

impl BDGParams {
    /// Defaults for an n-column instance: `alpha = sqrt(max(1, ln n))`,
    /// `beta = 600 alpha^2`, `delta = 1/2`, `C = 48`.
    ///
    /// `beta >= 576 alpha^2` makes the signed-sum quadratic error at most a
    /// quarter of the effective-length decrease, and `C >= 48` does the
    /// same for the cross term; `C^2 >= beta / max(1, ln n)` keeps the
    /// light-row entry bound below `1/(C sqrt(beta))`. With light entries
    /// that small every second-order term is far inside its budget for any
    /// step size up to 1, so `delta = 1/2` keeps the iteration count at
    /// `O(n)`; the walk still asserts monotonicity each iteration and
    /// reports a parameter failure if the budget is ever violated.
    pub fn defaults_for(n: usize) -> BDGParams {
        let alpha = (n as f64).ln().max(1.0).sqrt();
        BDGParams { alpha, beta: 600.0 * alpha * alpha, delta: 0.5, c: 48.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0 && self.delta > 0.0 && self.c > 0.0) {
            return Err(Error::InvalidInput("parameters must be positive".into()));
        }
        if self.beta < self.c * self.alpha * self.alpha {
            return Err(Error::InvalidInput(format!(
                "beta = {} must be at least C alpha^2 = {}",
                self.beta,
                self.c * self.alpha * self.alpha
            )));
        }
        if self.delta > 1.0 {
            return Err(Error::InvalidInput("step size must be at most 1".into()));
        }
        Ok(())
    }

    /// Entry threshold separating light from heavy rows,
    /// `1/(C^2 sqrt(max(1, ln n)))`.
    pub fn light_threshold(&self, n: usize) -> f64 {
        1.0 / (self.c * self.c * (n as f64).ln().max(1.0).sqrt())
    }

    /// Entry scale of the cross-term subspace, `gamma = 1/(C sqrt(beta))`.
    pub fn gamma(&self) -> f64 {
        1.0 / (self.c * self.beta.sqrt())
    }
}

/// Indices of the light and heavy rows of a preprocessed instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowClassification {
    pub light: Vec<usize>,
    pub heavy: Vec<usize>,
}

/// A stacked, split matrix ready for the walk: every surviving original row
/// contributes up to four rows (both signs, each split into its small and
/// large entries).
#[derive(Debug, Clone)]
pub struct Preprocessed<T> {
    n: usize,
    row_count: usize,
    /// Row-major, `row_count x n`.
    rows: Vec<T>,
    pub classification: RowClassification,
}

impl<T: Scalar> Preprocessed<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.rows[i * self.n..(i + 1) * self.n]
    }
}

/// Drops rows with `||A_i||^2 <= 1/n` (any signing moves them by at most
/// 1), stacks both signs scaled by `1/sqrt(2)` so a one-sided bound covers
/// `|<A_i, x>|`, and splits each stacked row into a light row (entries of
/// magnitude at most the light threshold) and a heavy row (the rest).
pub fn preprocess<T: Scalar>(
    inst: &ColumnInstance<T>,
    params: &BDGParams,
) -> Result<Preprocessed<T>> {
    params.validate()?;
    let n = inst.n;
    let threshold = T::from_f64(params.light_threshold(n)).unwrap();
    let drop_below = T::one() / T::from_usize(n).unwrap();
    let inv_sqrt2 = T::from_f64(0.5f64.sqrt()).unwrap();
    let mut rows: Vec<T> = Vec::new();
    let mut light = Vec::new();
    let mut heavy = Vec::new();
    let push = |part: Vec<T>, is_light: bool, light: &mut Vec<usize>, heavy: &mut Vec<usize>, rows: &mut Vec<T>| {
        if part.iter().all(|&v| v == T::zero()) {
            return;
        }
        let idx = rows.len() / n;
        rows.extend_from_slice(&part);
        if is_light {
            light.push(idx);
        } else {
            heavy.push(idx);
        }
    };
    for i in 0..inst.m {
        let row = inst.row(i);
        let norm2: T = row.iter().map(|&v| v * v).sum();
        if norm2 <= drop_below {
            continue;
        }
        for sign in [T::one(), -T::one()] {
            let scale = sign * inv_sqrt2;
            let mut light_part = vec![T::zero(); n];
            let mut heavy_part = vec![T::zero(); n];
            for j in 0..n {
                let v = scale * row[j];
                if v.abs() <= threshold {
                    light_part[j] = v;
                } else {
                    heavy_part[j] = v;
                }
            }
            push(light_part, true, &mut light, &mut heavy, &mut rows);
            push(heavy_part, false, &mut light, &mut heavy, &mut rows);
        }
    }
    let row_count = rows.len() / n;
    // Splitting partitions entries and stacking halves the squared norms,
    // so column norms stay at most 1; verified all the same.
    let tol = T::one() + T::from_f64(COL_NORM_TOL).unwrap();
    for j in 0..n {
        let norm = (0..row_count).map(|i| rows[i * n + j] * rows[i * n + j]).sum::<T>().sqrt();
        if norm > tol {
            return Err(Error::Invariant(format!(
                "column {j} has norm {norm} > 1 after preprocessing"
            )));
        }
    }
    Ok(Preprocessed { n, row_count, rows, classification: RowClassification { light, heavy } })
}

/// Effective length `L(i, x) = sum_j (1 - x_j^2) A_ij^2`: the squared row
/// mass still uncolored.
pub fn effective_length<T: Scalar>(row: &[T], x: &[T]) -> T {
    let mut s = T::zero();
    for j in 0..row.len() {
        s += (T::one() - x[j] * x[j]) * row[j] * row[j];
    }
    s
}

fn log_weight<T: Scalar>(row: &[T], x: &[T], params: &BDGParams) -> T {
    let alpha = T::from_f64(params.alpha).unwrap();
    let beta = T::from_f64(params.beta).unwrap();
    let cap = T::from_f64(params.c).unwrap();
    let dot: T = row.iter().zip(x).map(|(&a, &v)| a * v).sum();
    alpha * dot + beta * effective_length(row, x).min(cap)
}

/// Potential `sum over light rows of exp(alpha <A_i,x> + beta min(C, L))`,
/// evaluated through a log-sum-exp overflow guard.
pub fn potential<T: Scalar>(x: &[T], params: &BDGParams, pre: &Preprocessed<T>) -> Result<T> {
    Ok(log_potential(x, params, pre)?.exp())
}

/// Natural log of the potential; negative infinity when no light rows.
pub fn log_potential<T: Scalar>(
    x: &[T],
    params: &BDGParams,
    pre: &Preprocessed<T>,
) -> Result<T> {
    params.validate()?;
    if x.len() != pre.n {
        return Err(Error::InvalidInput(format!(
            "point has {} coordinates, instance has {}",
            x.len(),
            pre.n
        )));
    }
    let lws: Vec<T> = pre
        .classification
        .light
        .iter()
        .map(|&i| log_weight(pre.row(i), x, params))
        .collect();
    Ok(log_sum_exp(&lws))
}

fn log_sum_exp<T: Scalar>(v: &[T]) -> T {
    let max = v.iter().cloned().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    let s: T = v.iter().map(|&l| (l - max).exp()).sum();
    max + s.ln()
}

/// Constraint rows bounding a weighted quadratic form: for any unit `y`
/// orthogonal to them, `sum_i w_i <B_i, y>^2 <= k sum_i w_i sum_j y_j^2
/// A_ij^2`, with at most `ambient/k` rows. Requires `|B_ij| <= |A_ij|`.
///
/// The rows come from the eigenvectors of `L = sum_i w_i B_i B_i^T` after
/// rescaling each nonzero column of the weighted `A` to unit norm (which
/// turns the right side into `k I`); eigenvectors with eigenvalue above `k`
/// are mapped back through the scaling. Zero columns of `A` pass through
/// unconstrained.
pub fn scaled_quadratic_subspace<T: Scalar>(
    a_rows: &[Vec<T>],
    b_rows: &[Vec<T>],
    w: &[T],
    k: f64,
) -> Result<Vec<Vec<T>>> {
    if a_rows.len() != b_rows.len() || a_rows.len() != w.len() {
        return Err(Error::InvalidInput(
            "matrices and weights must have matching row counts".into(),
        ));
    }
    if w.iter().any(|&v| v < T::zero()) {
        return Err(Error::InvalidInput("weights must be nonnegative".into()));
    }
    let ambient = a_rows.first().map(|r| r.len()).unwrap_or(0);
    for (a, b) in a_rows.iter().zip(b_rows) {
        if a.len() != ambient || b.len() != ambient {
            return Err(Error::InvalidInput("rows must have equal lengths".into()));
        }
        for j in 0..ambient {
            if b[j].abs() > a[j].abs() * (T::one() + T::from_f64(1e-12).unwrap()) {
                return Err(Error::InvalidInput(format!(
                    "|B| exceeds |A| at column {j}"
                )));
            }
        }
    }
    let flat_a: Vec<T> = a_rows.iter().flatten().cloned().collect();
    let flat_b: Vec<T> = b_rows.iter().flatten().cloned().collect();
    let (rows, count) = quadratic_rows(&flat_a, &flat_b, w, ambient, k);
    Ok((0..count).map(|j| rows[j * ambient..(j + 1) * ambient].to_vec()).collect())
}

fn quadratic_rows<T: Scalar>(
    a: &[T],
    b: &[T],
    w: &[T],
    ambient: usize,
    k: f64,
) -> (Vec<T>, usize) {
    let r = w.len();
    if r == 0 || ambient == 0 {
        return (Vec::new(), 0);
    }
    // Column scales of the weighted A; zero columns stay unconstrained.
    let mut scale = vec![T::zero(); ambient];
    for i in 0..r {
        for j in 0..ambient {
            let v = a[i * ambient + j];
            scale[j] += w[i] * v * v;
        }
    }
    for s in scale.iter_mut() {
        *s = s.sqrt();
    }
    // Scaled rows sqrt(w_i) B_ij / scale_j; their Gram transpose is L.
    let mut scaled = vec![T::zero(); r * ambient];
    for i in 0..r {
        let sw = w[i].sqrt();
        for j in 0..ambient {
            if scale[j] > T::zero() {
                scaled[i * ambient + j] = sw * b[i * ambient + j] / scale[j];
            }
        }
    }
    let l = T::outer_gram(r, ambient, &scaled);
    let (vals, vecs) = T::sym_eigh(ambient, &l);
    let bound = T::from_f64(k).unwrap();
    let mut rows = Vec::new();
    let mut count = 0;
    for j in (0..ambient).rev() {
        if vals[j] <= bound {
            break;
        }
        // Map back: a constraint <u, D y> = 0 in scaled coordinates is the
        // row D u in the original ones.
        let u = &vecs[j * ambient..(j + 1) * ambient];
        rows.extend((0..ambient).map(|t| u[t] * scale[t]));
        count += 1;
    }
    (rows, count)
}

struct QuadCache<T> {
    /// U5 then U6 rows, restricted to the active slots, flat.
    rows: Vec<T>,
    count: usize,
    stamp: (usize, usize),
}

/// Runs the walk and rounds the at most `C` leftover fractional
/// coordinates to their sign (zero rounds to +1).
pub fn run<T: Scalar>(
    inst: &ColumnInstance<T>,
    params: &BDGParams,
) -> Result<(Vec<i8>, WalkTrace)> {
    let pre = preprocess(inst, params)?;
    let n = inst.n;
    let delta = T::from_f64(params.delta).unwrap();
    let cap = T::from_f64(params.c).unwrap();
    let gamma = T::from_f64(params.gamma()).unwrap();
    let snap = T::from_f64(SNAP_TOL).unwrap();
    let comp_tol = T::from_f64(STEP_COMPONENT_TOL).unwrap();
    let stop_at = params.c.floor() as usize;
    let t_cap = (2.0 * n as f64 / (params.delta * params.delta)).ceil() as usize;
    let hard_k = T::from_f64(16.0).unwrap() * (T::one() + T::from_f64(QUAD_SLACK).unwrap());
    let refresh_k = T::from_f64(QUAD_REFRESH).unwrap();
    let light = &pre.classification.light;
    let heavy = &pre.classification.heavy;

    let mut x = vec![T::zero(); n];
    let mut t = 0usize;
    let mut trace = WalkTrace::new(params.delta);
    let mut cache: Option<QuadCache<T>> = None;
    let mut prev_log_phi: Option<T> = None;
    // Heavy rows currently pinned (uncolored squared mass at least C).
    let mut heavy_pinned: Vec<bool> = heavy
        .iter()
        .map(|&i| {
            let row = pre.row(i);
            row.iter().map(|&v| v * v).sum::<T>() >= cap
        })
        .collect();
    let mut wall_hits = 0usize;

    loop {
        let active: Vec<usize> = (0..n).filter(|&j| x[j].abs() < T::one()).collect();
        let a = active.len();
        if a <= stop_at {
            break;
        }
        if t > t_cap {
            return Err(Error::Invariant(format!(
                "iteration bound 2n/delta^2 = {t_cap} exceeded"
            )));
        }

        // Light rows still carrying potential weight below the length cap.
        let mut in_play: Vec<usize> = Vec::new();
        let mut capped: Vec<usize> = Vec::new();
        for &i in light {
            if effective_length(pre.row(i), &x) < cap {
                in_play.push(i);
            } else {
                capped.push(i);
            }
        }
        let lws: Vec<T> = light.iter().map(|&i| log_weight(pre.row(i), &x, params)).collect();
        let log_phi = log_sum_exp(&lws);
        if let (Some(prev), true) = (prev_log_phi, log_phi.is_finite()) {
            let allowed = prev + T::from_f64(MONOTONE_SLACK.ln_1p()).unwrap();
            if log_phi > allowed {
                return Err(Error::ParameterFailure {
                    iteration: t,
                    message: format!(
                        "potential increased from exp({prev}) to exp({log_phi}); \
                         the parameter budget does not hold on this instance"
                    ),
                });
            }
        }
        prev_log_phi = Some(log_phi);

        // Normalized weights of the in-play light rows.
        let max_lw = in_play
            .iter()
            .map(|&i| log_weight(pre.row(i), &x, params))
            .fold(T::neg_infinity(), T::max);
        let w: Vec<T> = in_play
            .iter()
            .map(|&i| (log_weight(pre.row(i), &x, params) - max_lw).exp())
            .collect();

        // Rows restricted to the active slots: the current point, every
        // pinned row (heavy rows with large uncolored mass and light rows
        // at the length cap), the weighted row sum, and the weighted
        // gradient of the effective lengths.
        let restrict = |full: &[T], out: &mut Vec<T>| {
            for &j in &active {
                out.push(full[j]);
            }
        };
        let mut rows: Vec<T> = Vec::new();
        let mut row_count = 0usize;
        restrict(&x, &mut rows);
        row_count += 1;
        for (slot, &i) in heavy.iter().enumerate() {
            if heavy_pinned[slot] {
                restrict(pre.row(i), &mut rows);
                row_count += 1;
            }
        }
        for &i in &capped {
            restrict(pre.row(i), &mut rows);
            row_count += 1;
        }
        if !in_play.is_empty() {
            let mut sum_row = vec![T::zero(); a];
            let mut grad_row = vec![T::zero(); a];
            for (idx, &i) in in_play.iter().enumerate() {
                let row = pre.row(i);
                for (slot, &j) in active.iter().enumerate() {
                    sum_row[slot] += w[idx] * row[j];
                    grad_row[slot] += w[idx] * row[j] * row[j] * x[j];
                }
            }
            rows.extend_from_slice(&sum_row);
            rows.extend_from_slice(&grad_row);
            row_count += 2;
        }
        let base_len = rows.len();
        let base_count = row_count;

        let mut z: Vec<T> = Vec::new();
        let mut dim_u = 0usize;
        for attempt in 0..2 {
            let use_quad = !in_play.is_empty();
            if use_quad {
                let stale = match &cache {
                    Some(c) => c.stamp != (a, in_play.len()),
                    None => true,
                };
                if stale || attempt == 1 {
                    cache = Some(refresh_quadratic(&pre, &in_play, &w, &active, &x, gamma));
                }
            }
            rows.truncate(base_len);
            row_count = base_count;
            if let Some(c) = cache.as_ref().filter(|_| use_quad) {
                rows.extend_from_slice(&c.rows);
                row_count += c.count;
            }
            let rs = linalg::row_space_normalized(&rows, row_count, a);
            dim_u = a - rs.rank;
            if dim_u == 0 {
                push_record(&mut trace, log_phi, 0.0, a, 0);
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
                push_record(&mut trace, log_phi, 0.0, a, 0);
                return Err(Error::Stuck { iteration: t, trace: Box::new(trace) });
            }
            if !use_quad {
                break;
            }
            // Exact quadratic checks for the chosen direction: the signed
            // sums and the cross terms against the diagonal right side.
            let mut q5 = T::zero();
            let mut q6 = T::zero();
            let mut rhs = T::zero();
            for (idx, &i) in in_play.iter().enumerate() {
                let row = pre.row(i);
                let mut d5 = T::zero();
                let mut d6 = T::zero();
                let mut diag = T::zero();
                for (slot, &j) in active.iter().enumerate() {
                    d5 += row[j] * z[slot];
                    d6 += row[j] * row[j] * x[j] * z[slot] / gamma;
                    diag += z[slot] * z[slot] * row[j] * row[j];
                }
                q5 += w[idx] * d5 * d5;
                q6 += w[idx] * d6 * d6;
                rhs += w[idx] * diag;
            }
            if q5.max(q6) <= (refresh_k * rhs).min(hard_k * rhs) {
                break;
            }
            if attempt == 1 {
                if q5.max(q6) <= hard_k * rhs {
                    break;
                }
                return Err(Error::Invariant(format!(
                    "direction violates the quadratic bounds even with fresh \
                     eigenvectors: {} > {} at iteration {t}",
                    q5.max(q6),
                    hard_k * rhs
                )));
            }
        }

        let mut alpha_step = T::one();
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
            alpha_step = alpha_step.min(ratio);
        }

        push_record(&mut trace, log_phi, alpha_step.to_f64().unwrap(), a, dim_u);

        let mut froze = false;
        for (slot, &j) in active.iter().enumerate() {
            let mut v = x[j] + delta * alpha_step * z[slot];
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
            // Heavy rows whose uncolored squared mass dropped below C stop
            // being pinned; record the release with its support size. The
            // pinned sum must still be zero at that moment.
            let now_active: Vec<usize> = (0..n).filter(|&j| x[j].abs() < T::one()).collect();
            for (slot, &i) in heavy.iter().enumerate() {
                if !heavy_pinned[slot] {
                    continue;
                }
                let row = pre.row(i);
                let mass: T = now_active.iter().map(|&j| row[j] * row[j]).sum();
                if mass < cap {
                    heavy_pinned[slot] = false;
                    let dot: T = row.iter().zip(&x).map(|(&v, &c)| v * c).sum();
                    let norm: T = row.iter().map(|&v| v * v).sum::<T>().sqrt();
                    if dot.abs() > T::from_f64(HEAVY_ZERO_TOL).unwrap() * norm.max(T::one()) {
                        return Err(Error::Invariant(format!(
                            "heavy row {i} has signed sum {dot} while pinned"
                        )));
                    }
                    let support =
                        now_active.iter().filter(|&&j| row[j] != T::zero()).count();
                    trace.heavy_exits.push(HeavyExit {
                        row: i,
                        iteration: t,
                        active_support: support,
                    });
                }
            }
        }
    }

    let final_lws: Vec<T> =
        light.iter().map(|&i| log_weight(pre.row(i), &x, params)).collect();
    push_record(
        &mut trace,
        log_sum_exp(&final_lws),
        0.0,
        (0..n).filter(|&j| x[j].abs() < T::one()).count(),
        0,
    );

    let chi = x
        .iter()
        .map(|&v| if v >= T::one() { 1i8 } else if v <= -T::one() { -1 } else if v >= T::zero() { 1 } else { -1 })
        .collect();
    Ok((chi, trace))
}

fn push_record<T: Scalar>(
    trace: &mut WalkTrace,
    log_phi: T,
    alpha: f64,
    active: usize,
    dim_u: usize,
) {
    let log_phi = log_phi.to_f64().unwrap();
    trace.records.push(WalkRecord { phi: log_phi.exp(), log_phi, alpha, active, dim_u });
}

fn refresh_quadratic<T: Scalar>(
    pre: &Preprocessed<T>,
    in_play: &[usize],
    w: &[T],
    active: &[usize],
    x: &[T],
    gamma: T,
) -> QuadCache<T> {
    let a = active.len();
    let r = in_play.len();
    let mut flat_a = vec![T::zero(); r * a];
    let mut flat_b5 = vec![T::zero(); r * a];
    let mut flat_b6 = vec![T::zero(); r * a];
    for (idx, &i) in in_play.iter().enumerate() {
        let row = pre.row(i);
        for (slot, &j) in active.iter().enumerate() {
            let v = row[j];
            flat_a[idx * a + slot] = v;
            flat_b5[idx * a + slot] = v;
            flat_b6[idx * a + slot] = v * v * x[j] / gamma;
        }
    }
    let (rows5, count5) = quadratic_rows(&flat_a, &flat_b5, w, a, 16.0);
    let (rows6, count6) = quadratic_rows(&flat_a, &flat_b6, w, a, 16.0);
    let mut rows = rows5;
    rows.extend_from_slice(&rows6);
    QuadCache { rows, count: count5 + count6, stamp: (a, r) }
}

/// `||Ax||_inf` of the original instance under a sign vector.
pub fn infinity_norm<T: Scalar>(inst: &ColumnInstance<T>, chi: &[i8]) -> Result<T> {
    if chi.len() != inst.n {
        return Err(Error::InvalidInput(format!(
            "coloring has length {}, instance has {} columns",
            chi.len(),
            inst.n
        )));
    }
    if let Some(j) = chi.iter().position(|&c| c != 1 && c != -1) {
        return Err(Error::InvalidInput(format!(
            "coloring entry {j} is {}, expected +1 or -1",
            chi[j]
        )));
    }
    let mut worst = T::zero();
    for i in 0..inst.m {
        let row = inst.row(i);
        let mut s = T::zero();
        for j in 0..inst.n {
            s += row[j] * T::from_i8(chi[j]).unwrap();
        }
        worst = worst.max(s.abs());
    }
    Ok(worst)
}
