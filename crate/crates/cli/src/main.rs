//! Command-line front end: generate instances, run the three solvers,
//! verify outputs, and sweep sizes into a benchmark CSV.
//!
//! Exit codes: 0 success, 2 bad input (malformed files, inconsistent
//! parameters, algorithm/instance mismatch), 3 solver failure (stuck walk
//! or miscalibrated parameters), 4 failed verification.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use discrepancy::column::{self, BDGParams};
use discrepancy::error::Error;
use discrepancy::instances::{self, Family, Generated, GeneratorSpec};
use discrepancy::trace::WalkTrace;
use discrepancy::{matrix, setcol, verify, Real};

#[derive(Parser)]
#[command(name = "discrepancy-cli", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    /// Full set-system coloring by phased partial coloring.
    Spencer,
    /// Block-diagonal matrix balancing.
    Matrix,
    /// Bounded-column-norm sign selection.
    Bdg,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic instance from a spec (inline JSON or a path).
    Generate {
        /// Generator spec: inline JSON (starts with '{') or a file path.
        #[arg(long)]
        spec: String,
        /// Output instance file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a solver on an instance file.
    Solve {
        #[arg(long)]
        algo: Algo,
        /// Input instance file (format determined by the algorithm).
        #[arg(long = "in")]
        input: PathBuf,
        /// Output coloring file, JSON {"chi":[...]}.
        #[arg(long)]
        out: PathBuf,
        /// Optional trace output: a JSON array with one walk trace per phase.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Parameter overrides, inline JSON with keys among
        /// {"C","alpha_scale","beta_scale","delta_scale","lambda_scale"}.
        #[arg(long)]
        params: Option<String>,
        /// Shortcut for the "C" params key (column balancing only).
        #[arg(long = "bdg-C")]
        bdg_c: Option<f64>,
        /// Shortcut for the "alpha_scale" params key (column balancing only).
        #[arg(long = "bdg-scale")]
        bdg_scale: Option<f64>,
    },
    /// Re-check a solver's output independently of the solver.
    Verify {
        #[arg(long)]
        algo: Algo,
        #[arg(long = "in")]
        input: PathBuf,
        /// Coloring file produced by solve.
        #[arg(long)]
        coloring: PathBuf,
        /// Trace file produced by solve; trace-replay checks are skipped
        /// with a warning when absent.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Parameter overrides matching the ones given to solve.
        #[arg(long)]
        params: Option<String>,
        #[arg(long = "bdg-C")]
        bdg_c: Option<f64>,
        #[arg(long = "bdg-scale")]
        bdg_scale: Option<f64>,
    },
    /// Sweep square instances over sizes and seeds into a CSV.
    Bench {
        #[arg(long)]
        algo: Algo,
        /// Comma-separated list of sizes; each runs with n = m = size.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Number of seeds per size, used as seeds 0..k.
        #[arg(long)]
        seeds: u64,
        /// Block size for matrix instances.
        #[arg(long, default_value_t = 1)]
        q: usize,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parameter overrides shared by the solvers; each algorithm consumes the
/// keys it understands and rejects the rest.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Params {
    #[serde(rename = "C")]
    c: Option<f64>,
    alpha_scale: Option<f64>,
    beta_scale: Option<f64>,
    delta_scale: Option<f64>,
    lambda_scale: Option<f64>,
}

impl Params {
    fn parse(text: Option<&str>) -> Result<Params, Error> {
        match text {
            None => Ok(Params::default()),
            Some(t) => serde_json::from_str(t)
                .map_err(|e| Error::InvalidInput(format!("bad --params: {e}"))),
        }
    }

    fn reject(&self, algo: &str, fields: &[(&str, bool)]) -> Result<(), Error> {
        for (name, set) in fields {
            if *set {
                return Err(Error::InvalidInput(format!(
                    "parameter {name} does not apply to --algo {algo}"
                )));
            }
        }
        Ok(())
    }

    /// Column-balancing parameters: defaults for `n` with `C` replaced and
    /// the scale factors applied multiplicatively.
    fn bdg(&self, n: usize) -> BDGParams {
        let mut p = BDGParams::defaults_for(n);
        if let Some(c) = self.c {
            p.c = c;
        }
        p.alpha *= self.alpha_scale.unwrap_or(1.0);
        p.beta *= self.beta_scale.unwrap_or(1.0);
        p.delta *= self.delta_scale.unwrap_or(1.0);
        p
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_) | Error::Parse(_) | Error::Io(_) => 2,
        _ => 3,
    }
}

fn read_file(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, content: &str) -> Result<(), Error> {
    std::fs::write(path, content)
        .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))
}

/// Reads a column instance, sniffing JSON (leading '{') versus dense CSV.
fn read_columns(text: &str) -> Result<discrepancy::ColumnInstance, Error> {
    if text.trim_start().starts_with('{') {
        instances::read_columns_json(text)
    } else {
        instances::read_columns_csv(text)
    }
}

fn cmd_generate(spec: &str, out: &Path) -> Result<(), Error> {
    let text = if spec.trim_start().starts_with('{') {
        spec.to_string()
    } else {
        read_file(Path::new(spec))?
    };
    let spec = instances::read_generator_spec(&text)?;
    let inst = instances::generate::<Real>(&spec)?;
    write_file(out, &instances::write_instance(&inst))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn merged_params(
    params: Option<&str>,
    bdg_c: Option<f64>,
    bdg_scale: Option<f64>,
) -> Result<Params, Error> {
    let mut p = Params::parse(params)?;
    if bdg_c.is_some() {
        p.c = bdg_c;
    }
    if bdg_scale.is_some() {
        p.alpha_scale = bdg_scale;
    }
    Ok(p)
}

fn write_outputs(
    out: &Path,
    chi: &[i8],
    trace_path: Option<&Path>,
    traces: &[WalkTrace],
) -> Result<(), Error> {
    let coloring = setcol::Coloring::new(chi.to_vec())?;
    write_file(out, &instances::write_coloring(&coloring))?;
    if let Some(path) = trace_path {
        write_file(path, &instances::write_traces(traces))?;
    }
    Ok(())
}

fn cmd_solve(
    algo: Algo,
    input: &Path,
    out: &Path,
    trace: Option<&Path>,
    params: Params,
) -> Result<(), Error> {
    let text = read_file(input)?;
    match algo {
        Algo::Spencer => {
            params.reject(
                "spencer",
                &[
                    ("C", params.c.is_some()),
                    ("alpha_scale", params.alpha_scale.is_some()),
                    ("beta_scale", params.beta_scale.is_some()),
                    ("delta_scale", params.delta_scale.is_some()),
                ],
            )?;
            let sys = instances::read_set_system(&text)?;
            let scale = params.lambda_scale.unwrap_or(1.0);
            let (coloring, phases) = setcol::color_scaled::<Real>(&sys, scale)?;
            let disc = setcol::discrepancy(&sys, &coloring)?;
            let traces: Vec<WalkTrace> = phases.into_iter().map(|p| p.trace).collect();
            write_outputs(out, coloring.chi(), trace, &traces)?;
            println!(
                "discrepancy={disc} ratio={:.6}",
                disc as f64 / (sys.n() as f64).sqrt()
            );
        }
        Algo::Matrix => {
            params.reject(
                "matrix",
                &[
                    ("C", params.c.is_some()),
                    ("alpha_scale", params.alpha_scale.is_some()),
                    ("beta_scale", params.beta_scale.is_some()),
                    ("delta_scale", params.delta_scale.is_some()),
                    ("lambda_scale", params.lambda_scale.is_some()),
                ],
            )?;
            let fam = instances::read_block_family::<Real>(&text)?;
            let (chi, phases) = matrix::run_full(&fam)?;
            let coeffs: Vec<Real> = chi.iter().map(|&c| c as Real).collect();
            let norm = matrix::operator_norm(&fam, &coeffs);
            let traces: Vec<WalkTrace> = phases.into_iter().map(|p| p.trace).collect();
            write_outputs(out, &chi, trace, &traces)?;
            let arg = (2.0 * fam.q() as f64 * fam.m() as f64 / fam.n() as f64).ln().max(1.0);
            println!(
                "opnorm={norm:.6} ratio={:.6}",
                norm / (fam.n() as f64 * arg).sqrt()
            );
        }
        Algo::Bdg => {
            params.reject("bdg", &[("lambda_scale", params.lambda_scale.is_some())])?;
            let inst = read_columns(&text)?;
            let bdg = params.bdg(inst.n());
            let (chi, walk_trace) = column::run(&inst, &bdg)?;
            let norm = column::infinity_norm(&inst, &chi)?;
            write_outputs(out, &chi, trace, &[walk_trace])?;
            println!(
                "infnorm={norm:.6} ratio={:.6}",
                norm / (inst.n() as f64).ln().max(1.0).sqrt()
            );
        }
    }
    Ok(())
}

fn cmd_verify(
    algo: Algo,
    input: &Path,
    coloring: &Path,
    trace: Option<&Path>,
    params: Params,
) -> Result<bool, Error> {
    let text = read_file(input)?;
    let coloring = instances::read_coloring(&read_file(coloring)?)?;
    let traces = match trace {
        Some(path) => Some(instances::read_traces(&read_file(path)?)?),
        None => {
            eprintln!("warning: no trace given, skipping trace-replay checks");
            None
        }
    };
    let report = match algo {
        Algo::Spencer => {
            let sys = instances::read_set_system(&text)?;
            verify::verify_spencer(&sys, &coloring, traces.as_deref())
        }
        Algo::Matrix => {
            let fam = instances::read_block_family::<Real>(&text)?;
            verify::verify_matrix_run(&fam, coloring.chi(), traces.as_deref())
        }
        Algo::Bdg => {
            let inst = read_columns(&text)?;
            let bdg = params.bdg(inst.n());
            let single = traces.as_ref().and_then(|t| t.first());
            verify::verify_column_run(&inst, &bdg, coloring.chi(), single)
        }
    };
    for check in &report.checks {
        println!(
            "{} {} margin={:.6e}",
            if check.pass { "pass" } else { "FAIL" },
            check.name,
            check.margin
        );
    }
    println!("{}", report.summary);
    Ok(report.pass())
}

fn cmd_bench(
    algo: Algo,
    sizes: &[usize],
    seeds: u64,
    q: usize,
    out: &Path,
) -> Result<(), Error> {
    struct Row {
        n: usize,
        seed: u64,
        metric: f64,
        ratio: f64,
        iterations: usize,
        wall_ms: u128,
    }
    let (name, family) = match algo {
        Algo::Spencer => ("spencer", Family::RandomSetSystem),
        Algo::Matrix => ("matrix", Family::RandomBlockFamily),
        Algo::Bdg => ("bdg", Family::RandomUnitColumns),
    };
    let mut rows = Vec::new();
    for &n in sizes {
        for seed in 0..seeds {
            let spec = GeneratorSpec {
                family,
                n,
                m: n,
                k: None,
                q: (algo == Algo::Matrix).then_some(q),
                t: None,
                seed,
            };
            let start = Instant::now();
            let solved: Result<(f64, f64, usize), Error> = (|| {
                match instances::generate::<Real>(&spec)? {
                    Generated::Sets(sys) => {
                        let (coloring, phases) = setcol::color::<Real>(&sys)?;
                        let disc = setcol::discrepancy(&sys, &coloring)? as f64;
                        let denom = (n as f64 * (2.0 * n as f64 / n as f64).ln()).sqrt();
                        let iters = phases.iter().map(|p| p.trace.iterations()).sum();
                        Ok((disc, disc / denom, iters))
                    }
                    Generated::Blocks(fam) => {
                        let (chi, phases) = matrix::run_full(&fam)?;
                        let coeffs: Vec<Real> = chi.iter().map(|&c| c as Real).collect();
                        let norm = matrix::operator_norm(&fam, &coeffs);
                        let denom =
                            (n as f64 * (2.0 * q as f64 * n as f64 / n as f64).ln()).sqrt();
                        let iters = phases.iter().map(|p| p.trace.iterations()).sum();
                        Ok((norm, norm / denom, iters))
                    }
                    Generated::Columns(inst) => {
                        let bdg = BDGParams::defaults_for(n);
                        let (chi, walk_trace) = column::run(&inst, &bdg)?;
                        let norm = column::infinity_norm(&inst, &chi)?;
                        let denom = (n as f64).ln().sqrt();
                        Ok((norm, norm / denom, walk_trace.iterations()))
                    }
                }
            })();
            let wall_ms = start.elapsed().as_millis();
            let (metric, ratio, iterations) = match solved {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("warning: {name} n={n} seed={seed} failed: {e}");
                    (f64::NAN, f64::NAN, 0)
                }
            };
            rows.push(Row { n, seed, metric, ratio, iterations, wall_ms });
        }
    }
    rows.sort_by_key(|r| (r.n, r.seed));
    let mut csv = String::from("algo,n,m,q,seed,metric,bound_ratio,iterations,wall_ms\n");
    let q_col = if algo == Algo::Matrix { q } else { 1 };
    for r in rows {
        writeln!(
            csv,
            "{name},{},{},{q_col},{},{},{},{},{}",
            r.n, r.n, r.seed, r.metric, r.ratio, r.iterations, r.wall_ms
        )
        .unwrap();
    }
    write_file(out, &csv)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate { spec, out } => cmd_generate(&spec, &out).map(|()| true),
        Command::Solve { algo, input, out, trace, params, bdg_c, bdg_scale } => {
            merged_params(params.as_deref(), bdg_c, bdg_scale)
                .and_then(|p| cmd_solve(algo, &input, &out, trace.as_deref(), p))
                .map(|()| true)
        }
        Command::Verify { algo, input, coloring, trace, params, bdg_c, bdg_scale } => {
            merged_params(params.as_deref(), bdg_c, bdg_scale)
                .and_then(|p| cmd_verify(algo, &input, &coloring, trace.as_deref(), p))
        }
        Command::Bench { algo, sizes, seeds, q, out } => {
            cmd_bench(algo, &sizes, seeds, q, &out).map(|()| true)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
