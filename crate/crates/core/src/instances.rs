//! Deterministic instance generators and file formats.
//!
//! Every generator is a pure function of a [`GeneratorSpec`], drawing from a
//! single documented stream cipher PRNG (see [`Prng`]) so that instances are
//! reproducible bit for bit from `(family, parameters, seed)` alone, in any
//! implementation that follows the same conventions. The module also owns
//! the on-disk formats: JSON for set systems, colorings, block families,
//! column instances, walk traces and generator specs, plus a dense CSV form
//! for column instances. Floating-point values are written with 17
//! significant digits so every `f64` round-trips exactly.

use serde::{Deserialize, Serialize};

use crate::column::ColumnInstance;
use crate::error::{Error, Result};
use crate::matrix::BlockMatrixFamily;
use crate::scalar::Scalar;
use crate::setcol::{Coloring, SetSystem};
use crate::trace::WalkTrace;

/// Deterministic random stream shared by all generators.
///
/// The stream is ChaCha with 8 rounds, keyed by a 32-byte key whose first 8
/// bytes are the 64-bit seed in little-endian order and whose remaining 24
/// bytes are zero, with an all-zero nonce and the block counter starting at
/// 0\. The raw output is consumed as 32-bit words in little-endian byte
/// order; [`Prng::next_u64`] takes two consecutive words, low word first.
/// Derived draws are defined on top of this stream:
///
/// * a uniform float in `[0, 1)` is `(next_u64() >> 11) * 2^-53`,
/// * an integer below `b` is drawn by masking `next_u64()` to the width of
///   `b - 1` and rejecting values `>= b`,
/// * a permutation is a Fisher-Yates shuffle of `(0, 1, ..., len-1)` using
///   those bounded draws, swapping position `i` with a position in `i..len`
///   for `i = 0, 1, ...` in order.
pub struct Prng(rand_chacha::ChaCha8Rng);

impl Prng {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        Prng(<rand_chacha::ChaCha8Rng as rand_core::SeedableRng>::from_seed(key))
    }

    /// Next 64 raw bits of the stream.
    pub fn next_u64(&mut self) -> u64 {
        rand_core::RngCore::next_u64(&mut self.0)
    }

    /// Uniform draw from `[0, 1)` with 53 random bits.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw from `[-1, 1)`.
    pub fn symmetric(&mut self) -> f64 {
        2.0 * self.unit() - 1.0
    }

    /// Uniform integer in `0..bound`, by masked rejection.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let mask = u64::MAX >> (bound - 1).leading_zeros().min(63);
        loop {
            let v = self.next_u64() & mask;
            if v < bound {
                return v;
            }
        }
    }

    /// Uniform random permutation of `0..len` by Fisher-Yates.
    pub fn permutation(&mut self, len: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..len).collect();
        for i in 0..len.saturating_sub(1) {
            let j = i + self.below((len - i) as u64) as usize;
            p.swap(i, j);
        }
        p
    }

    /// `k` distinct values from `0..len`, in ascending order, by a partial
    /// Fisher-Yates shuffle.
    pub fn distinct(&mut self, k: usize, len: usize) -> Vec<usize> {
        assert!(k <= len);
        let mut p: Vec<usize> = (0..len).collect();
        for i in 0..k {
            let j = i + self.below((len - i) as u64) as usize;
            p.swap(i, j);
        }
        let mut out = p[..k].to_vec();
        out.sort_unstable();
        out
    }
}

/// Instance families the generator knows how to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// Set system where each element joins each set with probability 1/2.
    #[serde(rename = "randomSetSystem")]
    RandomSetSystem,
    /// Set system where every set has exactly `k` distinct elements.
    #[serde(rename = "kUniformSetSystem")]
    KUniformSetSystem,
    /// All prefix intervals of `k` permutations of the ground set; the first
    /// permutation is the identity, the rest are uniform.
    #[serde(rename = "permutationPrefixSystem")]
    PermutationPrefixSystem,
    /// Dense matrix with uniform entries and columns normalized to unit
    /// norm when they exceed it.
    #[serde(rename = "randomUnitColumns")]
    RandomUnitColumns,
    /// Symmetric q-block-diagonal matrices with uniform entries, each
    /// rescaled to operator norm exactly 1 (unless all-zero).
    #[serde(rename = "randomBlockFamily")]
    RandomBlockFamily,
    /// Incidence matrix of a system where every element lies in exactly `t`
    /// sets, with rows scaled by `1/sqrt(t)` so columns have unit norm.
    #[serde(rename = "beckFialaSystem")]
    BeckFialaSystem,
}

/// A generator request: the family, its size and shape parameters, and the
/// seed. `k`, `q` and `t` are only consulted by the families that use them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub n: usize,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    pub seed: u64,
}

/// A generated instance, one of the three problem inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum Generated<T> {
    Sets(SetSystem),
    Columns(ColumnInstance<T>),
    Blocks(BlockMatrixFamily<T>),
}

impl GeneratorSpec {
    fn param(&self, value: Option<usize>, name: &str) -> Result<usize> {
        match value {
            Some(v) if v > 0 => Ok(v),
            Some(_) => Err(Error::InvalidInput(format!("{name} must be positive"))),
            None => Err(Error::InvalidInput(format!(
                "family {:?} requires parameter {name}",
                self.family
            ))),
        }
    }

    /// Checks the shape parameters against the family's requirements.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::InvalidInput("n and m must be positive".into()));
        }
        match self.family {
            Family::RandomSetSystem | Family::RandomUnitColumns => Ok(()),
            Family::KUniformSetSystem => {
                let k = self.param(self.k, "k")?;
                if k > self.n {
                    return Err(Error::InvalidInput(format!(
                        "k = {k} exceeds the ground set size {}",
                        self.n
                    )));
                }
                Ok(())
            }
            Family::PermutationPrefixSystem => {
                let k = self.param(self.k, "k")?;
                if self.m != k * self.n {
                    return Err(Error::InvalidInput(format!(
                        "a prefix system of {k} permutations over {} elements has {} sets, not {}",
                        self.n,
                        k * self.n,
                        self.m
                    )));
                }
                Ok(())
            }
            Family::RandomBlockFamily => {
                let q = self.param(self.q, "q")?;
                if self.m % q != 0 {
                    return Err(Error::InvalidInput(format!(
                        "block size q = {q} must divide m = {}",
                        self.m
                    )));
                }
                Ok(())
            }
            Family::BeckFialaSystem => {
                let t = self.param(self.t, "t")?;
                if t > self.m {
                    return Err(Error::InvalidInput(format!(
                        "t = {t} exceeds the number of sets {}",
                        self.m
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Builds the instance described by `spec`, deterministically in the seed.
pub fn generate<T: Scalar>(spec: &GeneratorSpec) -> Result<Generated<T>> {
    spec.validate()?;
    let mut rng = Prng::new(spec.seed);
    let (n, m) = (spec.n, spec.m);
    match spec.family {
        Family::RandomSetSystem => {
            let mut sets = Vec::with_capacity(m);
            for _ in 0..m {
                sets.push((1..=n).filter(|_| rng.next_u64() & 1 == 1).collect());
            }
            Ok(Generated::Sets(SetSystem::new(n, sets)?))
        }
        Family::KUniformSetSystem => {
            let k = spec.k.unwrap();
            let mut sets = Vec::with_capacity(m);
            for _ in 0..m {
                sets.push(rng.distinct(k, n).into_iter().map(|e| e + 1).collect());
            }
            Ok(Generated::Sets(SetSystem::new(n, sets)?))
        }
        Family::PermutationPrefixSystem => {
            let k = spec.k.unwrap();
            let mut sets = Vec::with_capacity(m);
            for p in 0..k {
                let perm = if p == 0 { (0..n).collect() } else { rng.permutation(n) };
                for len in 1..=n {
                    let mut prefix: Vec<usize> = perm[..len].iter().map(|&e| e + 1).collect();
                    prefix.sort_unstable();
                    sets.push(prefix);
                }
            }
            Ok(Generated::Sets(SetSystem::new(n, sets)?))
        }
        Family::RandomUnitColumns => {
            let mut rows = vec![vec![0.0f64; n]; m];
            for row in rows.iter_mut() {
                for v in row.iter_mut() {
                    *v = rng.symmetric();
                }
            }
            for j in 0..n {
                let norm: f64 = rows.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
                if norm > 1.0 {
                    for row in rows.iter_mut() {
                        row[j] /= norm;
                    }
                }
            }
            let rows = rows
                .into_iter()
                .map(|r| r.into_iter().map(|v| T::from_f64(v).unwrap()).collect())
                .collect();
            Ok(Generated::Columns(ColumnInstance::new(m, n, rows)?))
        }
        Family::RandomBlockFamily => {
            let q = spec.q.unwrap();
            let mut blocks = Vec::with_capacity(n);
            for _ in 0..n {
                let mut mat = Vec::with_capacity(m / q);
                for _ in 0..m / q {
                    let mut b = vec![0.0f64; q * q];
                    for r in 0..q {
                        for c in r..q {
                            let v = rng.symmetric();
                            b[r * q + c] = v;
                            b[c * q + r] = v;
                        }
                    }
                    mat.push(b);
                }
                // Rescale to operator norm exactly 1: first by the Frobenius
                // norm (an upper bound, keeping eigensolves well scaled),
                // then by the exact blockwise operator norm.
                let frob: f64 =
                    mat.iter().flat_map(|b| b.iter().map(|v| v * v)).sum::<f64>().sqrt();
                if frob > 0.0 {
                    for b in mat.iter_mut() {
                        for v in b.iter_mut() {
                            *v /= frob;
                        }
                    }
                    let norm = mat
                        .iter()
                        .map(|b| {
                            let (vals, _) = f64::sym_eigh(q, b);
                            vals.iter().fold(0.0f64, |w, &mu| w.max(mu.abs()))
                        })
                        .fold(0.0f64, f64::max);
                    for b in mat.iter_mut() {
                        for v in b.iter_mut() {
                            *v /= norm;
                        }
                    }
                }
                blocks.push(
                    mat.into_iter()
                        .map(|b| b.into_iter().map(|v| T::from_f64(v).unwrap()).collect())
                        .collect(),
                );
            }
            Ok(Generated::Blocks(BlockMatrixFamily::new(n, m, q, blocks)?))
        }
        Family::BeckFialaSystem => {
            let t = spec.t.unwrap();
            let entry = T::from_f64(1.0 / (t as f64).sqrt()).unwrap();
            let mut rows = vec![vec![T::zero(); n]; m];
            for j in 0..n {
                for i in rng.distinct(t, m) {
                    rows[i][j] = entry;
                }
            }
            Ok(Generated::Columns(ColumnInstance::new(m, n, rows)?))
        }
    }
}

/// Formats a float with 17 significant digits, enough to round-trip any
/// `f64` exactly.
fn fmt_float<T: Scalar>(v: T) -> String {
    format!("{:.16e}", v)
}

fn parse<'a, D: Deserialize<'a>>(text: &'a str) -> Result<D> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

#[derive(Deserialize)]
struct SetSystemFile {
    n: usize,
    sets: Vec<Vec<usize>>,
}

/// Serializes a set system as `{"n": ..., "sets": [[...], ...]}` with
/// 1-based element indices.
pub fn write_set_system(sys: &SetSystem) -> String {
    let sets: Vec<String> = sys
        .sets()
        .iter()
        .map(|s| {
            let inner: Vec<String> = s.iter().map(|e| e.to_string()).collect();
            format!("[{}]", inner.join(","))
        })
        .collect();
    format!("{{\"n\":{},\"sets\":[{}]}}\n", sys.n(), sets.join(","))
}

pub fn read_set_system(text: &str) -> Result<SetSystem> {
    let file: SetSystemFile = parse(text)?;
    SetSystem::new(file.n, file.sets)
}

#[derive(Deserialize)]
struct ColoringFile {
    chi: Vec<i8>,
}

/// Serializes a coloring as `{"chi": [1,-1,...]}`.
pub fn write_coloring(coloring: &Coloring) -> String {
    let chi: Vec<String> = coloring.chi().iter().map(|c| c.to_string()).collect();
    format!("{{\"chi\":[{}]}}\n", chi.join(","))
}

pub fn read_coloring(text: &str) -> Result<Coloring> {
    let file: ColoringFile = parse(text)?;
    Coloring::new(file.chi)
}

#[derive(Deserialize)]
struct BlockFamilyFile {
    n: usize,
    m: usize,
    q: usize,
    blocks: Vec<Vec<Vec<f64>>>,
}

/// Serializes a block family as `{"n":..,"m":..,"q":..,"blocks":[...]}`,
/// where `blocks[i][k]` is the row-major `q x q` block `k` of matrix `i`.
pub fn write_block_family<T: Scalar>(fam: &BlockMatrixFamily<T>) -> String {
    let mut matrices = Vec::with_capacity(fam.n());
    for i in 0..fam.n() {
        let mut blocks = Vec::with_capacity(fam.block_count());
        for k in 0..fam.block_count() {
            let entries: Vec<String> = fam.block(i, k).iter().map(|&v| fmt_float(v)).collect();
            blocks.push(format!("[{}]", entries.join(",")));
        }
        matrices.push(format!("[{}]", blocks.join(",")));
    }
    format!(
        "{{\"n\":{},\"m\":{},\"q\":{},\"blocks\":[{}]}}\n",
        fam.n(),
        fam.m(),
        fam.q(),
        matrices.join(",")
    )
}

pub fn read_block_family<T: Scalar>(text: &str) -> Result<BlockMatrixFamily<T>> {
    let file: BlockFamilyFile = parse(text)?;
    let blocks = file
        .blocks
        .into_iter()
        .map(|mat| {
            mat.into_iter()
                .map(|b| b.into_iter().map(|v| T::from_f64(v).unwrap()).collect())
                .collect()
        })
        .collect();
    BlockMatrixFamily::new(file.n, file.m, file.q, blocks)
}

#[derive(Deserialize)]
struct ColumnFile {
    m: usize,
    n: usize,
    rows: Vec<Vec<f64>>,
}

/// Serializes a column instance as `{"m":..,"n":..,"rows":[[...],...]}`.
pub fn write_columns_json<T: Scalar>(inst: &ColumnInstance<T>) -> String {
    let rows: Vec<String> = (0..inst.m())
        .map(|i| {
            let entries: Vec<String> = inst.row(i).iter().map(|&v| fmt_float(v)).collect();
            format!("[{}]", entries.join(","))
        })
        .collect();
    format!("{{\"m\":{},\"n\":{},\"rows\":[{}]}}\n", inst.m(), inst.n(), rows.join(","))
}

pub fn read_columns_json<T: Scalar>(text: &str) -> Result<ColumnInstance<T>> {
    let file: ColumnFile = parse(text)?;
    let rows = file
        .rows
        .into_iter()
        .map(|r| r.into_iter().map(|v| T::from_f64(v).unwrap()).collect())
        .collect();
    ColumnInstance::new(file.m, file.n, rows)
}

/// Serializes a column instance as dense CSV: `m` lines of `n`
/// comma-separated reals.
pub fn write_columns_csv<T: Scalar>(inst: &ColumnInstance<T>) -> String {
    let mut out = String::new();
    for i in 0..inst.m() {
        let entries: Vec<String> = inst.row(i).iter().map(|&v| fmt_float(v)).collect();
        out.push_str(&entries.join(","));
        out.push('\n');
    }
    out
}

pub fn read_columns_csv<T: Scalar>(text: &str) -> Result<ColumnInstance<T>> {
    let mut rows: Vec<Vec<T>> = Vec::new();
    let mut width = None;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col, field) in line.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Parse(format!(
                    "line {}, field {}: {:?} is not a number",
                    lineno + 1,
                    col + 1,
                    field.trim()
                ))
            })?;
            row.push(T::from_f64(v).unwrap());
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse(format!(
                    "line {}: {} fields, expected {}",
                    lineno + 1,
                    row.len(),
                    w
                )));
            }
            _ => {}
        }
        rows.push(row);
    }
    let n = width.ok_or_else(|| Error::Parse("empty CSV".into()))?;
    ColumnInstance::new(rows.len(), n, rows)
}

/// Serializes a walk trace via its serde representation (non-finite floats
/// become JSON nulls and read back as minus infinity; see
/// [`crate::trace::WalkRecord`]).
pub fn write_trace(trace: &WalkTrace) -> String {
    let mut s = serde_json::to_string(trace).expect("trace serialization cannot fail");
    s.push('\n');
    s
}

pub fn read_trace(text: &str) -> Result<WalkTrace> {
    parse(text)
}

/// Serializes the traces of a multi-phase run as a JSON array, one trace
/// per phase in order.
pub fn write_traces(traces: &[WalkTrace]) -> String {
    let mut s = serde_json::to_string(traces).expect("trace serialization cannot fail");
    s.push('\n');
    s
}

pub fn read_traces(text: &str) -> Result<Vec<WalkTrace>> {
    parse(text)
}

/// Serializes a generator spec via its serde representation.
pub fn write_generator_spec(spec: &GeneratorSpec) -> String {
    let mut s = serde_json::to_string(spec).expect("spec serialization cannot fail");
    s.push('\n');
    s
}

pub fn read_generator_spec(text: &str) -> Result<GeneratorSpec> {
    let spec: GeneratorSpec = parse(text)?;
    spec.validate()?;
    Ok(spec)
}

/// Serializes a generated instance in its family's native format (column
/// instances as JSON).
pub fn write_instance<T: Scalar>(inst: &Generated<T>) -> String {
    match inst {
        Generated::Sets(sys) => write_set_system(sys),
        Generated::Columns(cols) => write_columns_json(cols),
        Generated::Blocks(fam) => write_block_family(fam),
    }
}
