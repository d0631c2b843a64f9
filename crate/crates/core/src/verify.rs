//! Independent verification of walk outputs and brute-force oracles.
//!
//! The verifiers recompute every guarantee from the run artifacts (instance,
//! point, trace) without touching the walk internals, and never throw: each
//! produces a [`Report`] with one pass/fail entry per check plus the worst
//! margin observed. The margin is the distance left to the bound, so a
//! negative margin always means a failed check. The oracles enumerate all
//! sign vectors on desk-scale instances and serve as ground truth for the
//! approximation algorithms' outputs.

use crate::column::{BDGParams, ColumnInstance};
use crate::error::{Error, Result};
use crate::matrix::{BlockMatrixFamily, MatrixPhaseReport};
use crate::partial::Instance;
use crate::scalar::Scalar;
use crate::setcol::{Coloring, SetSystem};
use crate::trace::WalkTrace;

pub use crate::matrix::operator_norm;

/// Absolute tolerance on recomputed inner-product bounds.
const SLACK: f64 = 1e-6;
/// Tolerance under which a coordinate counts as frozen at +-1.
const FROZEN_TOL: f64 = 1e-9;
/// Relative slack allowed on potential monotonicity.
const MONOTONE_SLACK: f64 = 1e-9;
/// Relative slack allowed on the matrix-walk growth factor.
const GROWTH_SLACK: f64 = 1e-8;
/// Relative slack on the final-potential bound of the matrix walk.
const FINAL_POTENTIAL_SLACK: f64 = 1e-6;

/// One verified property: its name, verdict, and worst margin (distance
/// left to the bound; negative iff the check failed).
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
}

impl Check {
    /// A check that passes iff `margin >= -tolerance`.
    fn bounded(name: &str, margin: f64, tolerance: f64) -> Check {
        Check { name: name.into(), pass: margin >= -tolerance, margin }
    }
}

/// Outcome of one verification run.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
    pub summary: String,
}

impl Report {
    fn new(checks: Vec<Check>) -> Report {
        let failed = checks.iter().filter(|c| !c.pass).count();
        let summary = if failed == 0 {
            format!("PASS ({} checks)", checks.len())
        } else {
            let names: Vec<&str> =
                checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
            format!("FAIL ({failed} of {}): {}", checks.len(), names.join(", "))
        };
        Report { checks, summary }
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// JSON form: `{"checks":[{"name":..,"pass":..,"margin":..},...],"summary":..}`.
    pub fn to_json(&self) -> String {
        let checks: Vec<String> = self
            .checks
            .iter()
            .map(|c| {
                format!(
                    "{{\"name\":{},\"pass\":{},\"margin\":{:.16e}}}",
                    serde_json::to_string(&c.name).unwrap(),
                    c.pass,
                    c.margin
                )
            })
            .collect();
        format!(
            "{{\"checks\":[{}],\"summary\":{}}}\n",
            checks.join(","),
            serde_json::to_string(&self.summary).unwrap()
        )
    }
}

/// Smallest per-record margin of `dim U >= frac * size(record)` over all
/// non-terminal records.
fn dimension_margin(trace: &WalkTrace, frac: f64, size: impl Fn(usize) -> f64) -> f64 {
    let steps = trace.records.len().saturating_sub(1);
    trace.records[..steps]
        .iter()
        .map(|r| r.dim_u as f64 - frac * size(r.active))
        .fold(f64::INFINITY, f64::min)
}

/// Verifies a partial-coloring run: the point is inside the cube with at
/// least half its coordinates at +-1, every constraint moved by at most 11
/// times its slack, the potential never increased, the update subspace kept
/// dimension `n/8`, and the walk took at most `2n/delta^2` iterations.
pub fn verify_partial<T: Scalar>(inst: &Instance<T>, x: &[T], trace: &WalkTrace) -> Report {
    let n = inst.n();
    let mut checks = Vec::new();

    if x.len() != n {
        checks.push(Check::bounded("point-length", -1.0, 0.0));
        return Report::new(checks);
    }
    let max_abs = x.iter().fold(0.0f64, |w, v| w.max(v.abs().to_f64().unwrap()));
    checks.push(Check::bounded("box-membership", 1.0 - max_abs, FROZEN_TOL));

    let frozen = x
        .iter()
        .filter(|v| (v.abs() - T::one()).abs().to_f64().unwrap() <= FROZEN_TOL)
        .count();
    checks.push(Check::bounded(
        "half-integral-count",
        frozen as f64 - 0.5 * n as f64,
        0.0,
    ));

    let mut worst = f64::INFINITY;
    for i in 0..inst.m() {
        let v = inst.vector(i);
        let moved: T = (0..n).map(|j| v[j] * (x[j] - inst.start()[j])).sum();
        let bound = T::from_f64(11.0).unwrap() * inst.lambdas()[i];
        worst = worst.min((bound - moved).to_f64().unwrap());
    }
    checks.push(Check::bounded("constraint-slack", worst, SLACK));

    checks.push(Check::bounded(
        "potential-monotone",
        MONOTONE_SLACK - trace.worst_growth(),
        0.0,
    ));

    checks.push(Check::bounded(
        "subspace-dimension",
        dimension_margin(trace, 1.0 / 8.0, |_| n as f64),
        0.0,
    ));

    let delta = trace.delta;
    let bound = 2.0 * n as f64 / (delta * delta);
    checks.push(Check::bounded("iteration-bound", bound - trace.iterations() as f64, 0.0));

    Report::new(checks)
}

/// Verifies a full matrix-balancing run from its phase reports: the signs
/// are well formed, every phase's potential respected the growth factor
/// `(1 + 16 eps^2 delta^2)` per step and the resulting end-to-end bound,
/// and the update subspace kept a quarter of the phase dimension.
pub fn verify_matrix<T: Scalar>(
    fam: &BlockMatrixFamily<T>,
    chi: &[i8],
    phases: &[MatrixPhaseReport],
) -> Report {
    let mut checks = Vec::new();
    let signs_ok = chi.len() == fam.n() && chi.iter().all(|&c| c == 1 || c == -1);
    checks.push(Check::bounded("sign-vector", if signs_ok { 0.0 } else { -1.0 }, 0.0));

    let mut growth_margin = f64::INFINITY;
    let mut final_margin = f64::INFINITY;
    let mut dim_margin = f64::INFINITY;
    for phase in phases {
        let delta = phase.trace.delta;
        let eps = phase.epsilon;
        let factor = (1.0 + 16.0 * eps * eps * delta * delta) * (1.0 + GROWTH_SLACK);
        growth_margin = growth_margin.min(factor - 1.0 - phase.trace.worst_growth());

        // Phi starts at the doubled ambient dimension 2m and can grow by at
        // most the factor above for at most 2 a / delta^2 steps.
        if let Some(last) = phase.trace.records.last() {
            let cap = 2.0 * fam.m() as f64
                * (32.0 * eps * eps * phase.active_before as f64).exp()
                * (1.0 + FINAL_POTENTIAL_SLACK);
            final_margin = final_margin.min(cap - last.phi);
        }

        let a = phase.active_before as f64;
        dim_margin = dim_margin.min(dimension_margin(&phase.trace, 1.0, |_| a / 4.0));
    }
    checks.push(Check::bounded("growth-factor", growth_margin, 0.0));
    checks.push(Check::bounded("final-potential", final_margin, 0.0));
    checks.push(Check::bounded("subspace-dimension", dim_margin, 0.0));
    Report::new(checks)
}

/// Verifies a column-balancing run: the signs are well formed, the
/// potential never increased, the update subspace kept half the active
/// columns, every heavy row exited with support at most `C^5 ln n`, and the
/// walk took at most `2n/delta^2` iterations.
pub fn verify_column<T: Scalar>(
    inst: &ColumnInstance<T>,
    params: &BDGParams,
    chi: &[i8],
    trace: &WalkTrace,
) -> Report {
    let n = inst.n();
    let mut checks = Vec::new();
    let signs_ok = chi.len() == n && chi.iter().all(|&c| c == 1 || c == -1);
    checks.push(Check::bounded("sign-vector", if signs_ok { 0.0 } else { -1.0 }, 0.0));

    checks.push(Check::bounded(
        "potential-monotone",
        GROWTH_SLACK - trace.worst_growth(),
        0.0,
    ));

    checks.push(Check::bounded(
        "subspace-dimension",
        dimension_margin(trace, 0.5, |a| a as f64),
        0.0,
    ));

    let support_cap = params.c.powi(5) * (n as f64).ln().max(1.0);
    let exit_margin = trace
        .heavy_exits
        .iter()
        .map(|e| support_cap - e.active_support as f64)
        .fold(support_cap, f64::min);
    checks.push(Check::bounded("heavy-exit-support", exit_margin, 0.0));

    let bound = 2.0 * n as f64 / (trace.delta * trace.delta);
    checks.push(Check::bounded("iteration-bound", bound - trace.iterations() as f64, 0.0));

    Report::new(checks)
}

/// Cap on `discrepancy / sqrt(n)` accepted for a full set coloring.
pub const SPENCER_RATIO_BOUND: f64 = 30.0;
/// Cap on `opnorm / sqrt(n ln(2qm/n))` accepted for a matrix balancing.
pub const MATRIX_RATIO_BOUND: f64 = 30.0;
/// Cap on `||Ax||_inf / sqrt(ln n)` accepted for a column balancing.
pub const COLUMN_RATIO_BOUND: f64 = 40.0;

/// Verifies a full set-coloring run: the coloring covers the ground set,
/// its discrepancy is within the `O(sqrt(n))` acceptance cap, and (when
/// phase traces are given) each phase kept its potential monotone, its
/// subspace dimension at an eighth of the phase size, and its iteration
/// count within `2n/delta^2`.
pub fn verify_spencer(
    sys: &SetSystem,
    coloring: &Coloring,
    traces: Option<&[WalkTrace]>,
) -> Report {
    let mut checks = Vec::new();
    if coloring.len() != sys.n() {
        checks.push(Check::bounded("sign-vector", -1.0, 0.0));
        return Report::new(checks);
    }
    checks.push(Check::bounded("sign-vector", 0.0, 0.0));

    let disc = crate::setcol::discrepancy(sys, coloring).expect("length already checked");
    let ratio = disc as f64 / (sys.n() as f64).sqrt();
    checks.push(Check::bounded("discrepancy-ratio", SPENCER_RATIO_BOUND - ratio, 0.0));

    if let Some(traces) = traces {
        let mut monotone = f64::INFINITY;
        let mut dim = f64::INFINITY;
        let mut iter = f64::INFINITY;
        for trace in traces {
            let phase_n = trace.records.first().map_or(0, |r| r.active) as f64;
            monotone = monotone.min(MONOTONE_SLACK - trace.worst_growth());
            dim = dim.min(dimension_margin(trace, 1.0 / 8.0, |_| phase_n));
            let bound = 2.0 * phase_n / (trace.delta * trace.delta);
            iter = iter.min(bound - trace.iterations() as f64);
        }
        checks.push(Check::bounded("potential-monotone", monotone, 0.0));
        checks.push(Check::bounded("subspace-dimension", dim, 0.0));
        checks.push(Check::bounded("iteration-bound", iter, 0.0));
    }
    Report::new(checks)
}

/// Verifies a full matrix-balancing run from the coloring and optional
/// phase traces: the recomputed operator norm is within the acceptance cap,
/// plus all [`verify_matrix`] checks when traces are given (phase size and
/// potential scale are reconstructed from each trace's first record).
pub fn verify_matrix_run<T: Scalar>(
    fam: &BlockMatrixFamily<T>,
    chi: &[i8],
    traces: Option<&[WalkTrace]>,
) -> Report {
    let mut checks = Vec::new();
    let signs_ok = chi.len() == fam.n() && chi.iter().all(|&c| c == 1 || c == -1);
    if !signs_ok {
        checks.push(Check::bounded("sign-vector", -1.0, 0.0));
        return Report::new(checks);
    }
    let coeffs: Vec<T> = chi.iter().map(|&c| T::from_i8(c).unwrap()).collect();
    let norm = operator_norm(fam, &coeffs).to_f64().unwrap();
    let n = fam.n() as f64;
    let arg = (2.0 * fam.q() as f64 * fam.m() as f64 / n).ln().max(1.0);
    let ratio = norm / (n * arg).sqrt();
    checks.push(Check::bounded("operator-norm-ratio", MATRIX_RATIO_BOUND - ratio, 0.0));

    if let Some(traces) = traces {
        let phases: Vec<MatrixPhaseReport> = traces
            .iter()
            .map(|trace| {
                let active_before = trace.records.first().map_or(0, |r| r.active);
                let epsilon: f64 = if active_before > 0 {
                    crate::matrix::epsilon_for(active_before, 2 * fam.m(), fam.q())
                } else {
                    0.0
                };
                MatrixPhaseReport { active_before, epsilon, trace: trace.clone() }
            })
            .collect();
        checks.extend(verify_matrix(fam, chi, &phases).checks);
    } else {
        checks.push(Check::bounded("sign-vector", 0.0, 0.0));
    }
    Report::new(checks)
}

/// Verifies a full column-balancing run: the recomputed infinity norm is
/// within the acceptance cap, plus all [`verify_column`] checks when the
/// trace is given.
pub fn verify_column_run<T: Scalar>(
    inst: &ColumnInstance<T>,
    params: &BDGParams,
    chi: &[i8],
    trace: Option<&WalkTrace>,
) -> Report {
    let mut checks = Vec::new();
    let signs_ok = chi.len() == inst.n() && chi.iter().all(|&c| c == 1 || c == -1);
    if !signs_ok {
        checks.push(Check::bounded("sign-vector", -1.0, 0.0));
        return Report::new(checks);
    }
    let norm = crate::column::infinity_norm(inst, chi)
        .expect("length already checked")
        .to_f64()
        .unwrap();
    let ratio = norm / (inst.n() as f64).ln().max(1.0).sqrt();
    checks.push(Check::bounded("infinity-norm-ratio", COLUMN_RATIO_BOUND - ratio, 0.0));

    if let Some(trace) = trace {
        checks.extend(verify_column(inst, params, chi, trace).checks);
    } else {
        checks.push(Check::bounded("sign-vector", 0.0, 0.0));
    }
    Report::new(checks)
}

/// Largest ground-set size the set-system oracle will enumerate.
pub const ORACLE_SET_LIMIT: usize = 24;
/// Largest family size the operator-norm oracle will enumerate.
pub const ORACLE_MATRIX_LIMIT: usize = 20;

/// Exact minimum discrepancy over all 2^n colorings, with a witness.
/// Enumerates only colorings with the first element at +1, since a coloring
/// and its negation have equal discrepancy.
pub fn brute_force_min_discrepancy(sys: &SetSystem) -> Result<(u64, Coloring)> {
    let n = sys.n();
    if n > ORACLE_SET_LIMIT {
        return Err(Error::InvalidInput(format!(
            "oracle refuses n = {n} > {ORACLE_SET_LIMIT} (2^n enumeration)"
        )));
    }
    let masks: Vec<(u32, i64)> = sys
        .sets()
        .iter()
        .map(|s| {
            let mask = s.iter().fold(0u32, |m, &e| m | 1 << (e - 1));
            (mask, s.len() as i64)
        })
        .collect();
    let mut best = i64::MAX;
    let mut witness = 0u32;
    // Bit j clear means element j+1 is colored +1; bit 0 stays clear.
    for x in 0..1u32 << (n - 1) {
        let x = x << 1;
        let mut disc = 0i64;
        for &(mask, size) in &masks {
            let sum = size - 2 * (x & mask).count_ones() as i64;
            disc = disc.max(sum.abs());
            if disc >= best {
                break;
            }
        }
        if disc < best {
            best = disc;
            witness = x;
        }
    }
    let chi = (0..n).map(|j| if witness >> j & 1 == 1 { -1 } else { 1 }).collect();
    Ok((best as u64, Coloring::new(chi)?))
}

/// Exact minimum of the operator norm of the signed sum over all 2^n sign
/// vectors, with a witness. Enumerates only the half space with the first
/// sign at +1 since negation preserves the norm.
pub fn brute_force_min_opnorm<T: Scalar>(fam: &BlockMatrixFamily<T>) -> Result<(T, Vec<i8>)> {
    let n = fam.n();
    if n > ORACLE_MATRIX_LIMIT {
        return Err(Error::InvalidInput(format!(
            "oracle refuses n = {n} > {ORACLE_MATRIX_LIMIT} (2^n enumeration)"
        )));
    }
    let mut best = T::infinity();
    let mut witness = vec![1i8; n];
    let mut coeffs = vec![T::zero(); n];
    for x in 0..1u32 << (n - 1) {
        for j in 0..n {
            coeffs[j] = if x >> j & 1 == 1 { -T::one() } else { T::one() };
        }
        let norm = operator_norm(fam, &coeffs);
        if norm < best {
            best = norm;
            for j in 0..n {
                witness[j] = if x >> j & 1 == 1 { -1 } else { 1 };
            }
        }
    }
    Ok((best, witness))
}
