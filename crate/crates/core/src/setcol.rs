//! Full +-1 coloring of a set system by phased partial coloring.
//!
//! Each phase restricts to the still-uncolored elements, builds the
//! normalized incidence vector of every set on those elements, and runs the
//! partial-coloring walk with a uniform slack parameter chosen so the
//! feasibility hypothesis holds with equality. At least half the elements
//! freeze per phase, so there are at most `log2(n)` phases and the total
//! discrepancy is dominated by the first phase.

use crate::error::{Error, Result};
use crate::partial::{self, Instance};
use crate::scalar::Scalar;
use crate::trace::WalkTrace;

/// A set system over the ground set `{1, ..., n}` (indices are 1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetSystem {
    n: usize,
    sets: Vec<Vec<usize>>,
}

impl SetSystem {
    pub fn new(n: usize, sets: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("ground set must be nonempty".into()));
        }
        if sets.is_empty() {
            return Err(Error::InvalidInput("a set system needs at least one set".into()));
        }
        let mut seen = vec![usize::MAX; n + 1];
        for (i, set) in sets.iter().enumerate() {
            for &e in set {
                if e == 0 || e > n {
                    return Err(Error::InvalidInput(format!(
                        "set {i} contains element {e}, outside 1..={n}"
                    )));
                }
                if seen[e] == i {
                    return Err(Error::InvalidInput(format!(
                        "set {i} contains element {e} twice"
                    )));
                }
                seen[e] = i;
            }
        }
        Ok(SetSystem { n, sets })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.sets.len()
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }
}

/// A full +-1 coloring of a ground set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    chi: Vec<i8>,
}

impl Coloring {
    pub fn new(chi: Vec<i8>) -> Result<Self> {
        if chi.iter().any(|&c| c != 1 && c != -1) {
            return Err(Error::InvalidInput("coloring entries must be -1 or +1".into()));
        }
        Ok(Coloring { chi })
    }

    pub fn chi(&self) -> &[i8] {
        &self.chi
    }

    pub fn len(&self) -> usize {
        self.chi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chi.is_empty()
    }
}

/// `max_i |sum_{j in S_i} chi_j|`, in exact integer arithmetic.
pub fn discrepancy(sys: &SetSystem, coloring: &Coloring) -> Result<u64> {
    if coloring.len() != sys.n {
        return Err(Error::InvalidInput(format!(
            "coloring has length {}, set system has ground size {}",
            coloring.len(),
            sys.n
        )));
    }
    let mut worst: i64 = 0;
    for set in &sys.sets {
        let sum: i64 = set.iter().map(|&e| coloring.chi[e - 1] as i64).sum();
        worst = worst.max(sum.abs());
    }
    Ok(worst as u64)
}

/// Diagnostics of one coloring phase.
#[derive(Debug, Clone)]
pub struct PhaseReport {
    /// Number of uncolored elements at the start of the phase.
    pub active_before: usize,
    /// Uniform slack parameter of the phase (0 when all constraints were
    /// dropped as trivially satisfiable).
    pub lambda: f64,
    /// Trace of the phase's partial-coloring walk.
    pub trace: WalkTrace,
}

/// Uniform slack parameter of a phase: with both signs of each of the `m`
/// incidence vectors as constraints, `lambda = 4 sqrt(ln(64 m / a))` makes
/// the feasibility hypothesis `2m exp(-lambda^2/16) <= a/32` hold with
/// equality.
pub fn phase_lambda(m: usize, a: usize) -> f64 {
    4.0 * (64.0 * m as f64 / a as f64).ln().sqrt()
}

/// Colors the set system by phased partial coloring.
pub fn color<T: Scalar>(sys: &SetSystem) -> Result<(Coloring, Vec<PhaseReport>)> {
    color_scaled::<T>(sys, 1.0)
}

/// Like [`color`] but with every phase's slack parameter multiplied by
/// `lambda_scale`. Scales below 1 tighten the discrepancy target and may
/// make phases infeasible; scales above 1 trade discrepancy for safety
/// margin.
pub fn color_scaled<T: Scalar>(
    sys: &SetSystem,
    lambda_scale: f64,
) -> Result<(Coloring, Vec<PhaseReport>)> {
    if !(lambda_scale > 0.0 && lambda_scale.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "lambda scale {lambda_scale} must be positive and finite"
        )));
    }
    let n = sys.n;
    let m = sys.m();
    let mut x = vec![T::zero(); n];
    let mut phases = Vec::new();
    loop {
        let active: Vec<usize> = (0..n).filter(|&j| x[j].abs() < T::one()).collect();
        let a = active.len();
        if a == 0 {
            break;
        }
        let mut slot_of = vec![usize::MAX; n];
        for (slot, &j) in active.iter().enumerate() {
            slot_of[j] = slot;
        }
        let lambda = lambda_scale * phase_lambda(m, a);
        // Constraints with lambda > 2 sqrt(a) are satisfied by any x in the
        // cube and are dropped, same as the preprocessing rule.
        let keep = lambda <= 2.0 * (a as f64).sqrt();
        let mut vectors: Vec<Vec<T>> = Vec::new();
        if keep {
            let scale = T::one() / T::from_usize(a).unwrap().sqrt();
            let mut incidence: Vec<Vec<T>> = Vec::new();
            for set in &sys.sets {
                let mut v = vec![T::zero(); a];
                let mut hits = 0usize;
                for &e in set {
                    let slot = slot_of[e - 1];
                    if slot != usize::MAX {
                        v[slot] = scale;
                        hits += 1;
                    }
                }
                if hits > 0 {
                    incidence.push(v);
                }
            }
            // Both signs: the walk bounds <v, x - x0> from above only, and
            // set discrepancy needs both tails.
            for v in &incidence {
                vectors.push(v.clone());
            }
            for v in &incidence {
                vectors.push(v.iter().map(|&c| -c).collect());
            }
        }
        let lambdas = vec![T::from_f64(lambda).unwrap(); vectors.len()];
        let start: Vec<T> = active.iter().map(|&j| x[j]).collect();
        let inst = Instance::with_subunit_vectors(a, vectors, lambdas, start)?;
        inst.verify_hypothesis()?;
        let (xp, trace) = partial::run(&inst)?;
        let frozen = xp.iter().filter(|c| c.abs() >= T::one()).count();
        if 2 * frozen < a {
            return Err(Error::Invariant(format!(
                "phase froze only {frozen} of {a} elements"
            )));
        }
        for (slot, &j) in active.iter().enumerate() {
            x[j] = xp[slot];
        }
        phases.push(PhaseReport {
            active_before: a,
            lambda: if keep { lambda } else { 0.0 },
            trace,
        });
    }
    let chi = x
        .iter()
        .map(|&c| if c >= T::one() { 1i8 } else { -1i8 })
        .collect();
    Ok((Coloring { chi }, phases))
}
