//! Command-line front end for `heisgeo`.
//!
//! [`run`] parses an argument vector and returns the exit code together with
//! the text destined for stdout and stderr, so the binary is a thin wrapper
//! and the whole surface is testable in-process.

pub mod io;
pub mod rational;
pub mod sequence;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use heisgeo::geodesics::{cut_time, distance, quotient_distance, GeodesicArc};
use heisgeo::metric::canonicalize;
use heisgeo::moduli::{
    check_precompactness, enumerate_valid_lattices, geometry_constants, lattice_rank_bound,
};
use heisgeo::{
    DistanceOptions, Error, GroupElement, Mode, Momentum, PrecompactnessReport, VolumeKind,
};
use serde::Serialize;
use serde_json::json;

use crate::io::{
    matrix_rows, parse_json, parse_list, read_text, reals, to_json, InputError, MetricInput, Real,
};
use crate::sequence::{analyze_sequence, report_csv, SequenceSpec};

#[derive(Debug, Parser)]
#[command(
    name = "heisgeo",
    version,
    about = "Geometry of left-invariant metrics on Heisenberg groups"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct InputArg {
    /// Metric JSON file (`-` for stdin).
    #[arg(long)]
    input: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Canonical representative and reducing transformations.
    Canonicalize(InputArg),
    /// Spectral invariants d, δ, |det Ã|, |ρ|.
    Invariants(InputArg),
    /// Ricci tensor in the canonical orthonormal frame.
    Ricci(InputArg),
    /// Volume coefficient and total measure of the quotient.
    Volume {
        #[command(flatten)]
        input: InputArg,
        #[arg(long)]
        kind: VolumeKind,
        /// Tilt vector for `--kind tilted` (2n comma-separated values).
        #[arg(long, allow_hyphen_values = true)]
        t: Option<String>,
    },
    /// Endpoint of the normal geodesic with the given frame momentum.
    Geodesic {
        #[command(flatten)]
        input: InputArg,
        #[arg(long, allow_hyphen_values = true)]
        momentum: String,
        #[arg(long, allow_hyphen_values = true)]
        time: f64,
        /// Also emit this many equally spaced samples.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Distance from the identity to a point given in exponential coordinates.
    Distance {
        #[command(flatten)]
        input: InputArg,
        #[arg(long, allow_hyphen_values = true)]
        target: String,
        /// Distance in the compact quotient instead of the group.
        #[arg(long)]
        quotient: bool,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Precompactness conditions (A-1)–(A-4).
    Check {
        #[command(flatten)]
        input: InputArg,
        #[arg(long = "D")]
        diameter: f64,
        #[arg(long = "V")]
        volume: f64,
        #[arg(long = "K")]
        ricci: Option<f64>,
        #[arg(long)]
        mode: Mode,
    },
    /// Upper bound on r_n for quotients of bounded diameter and volume.
    LatticeBound {
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long = "D")]
        diameter: f64,
        #[arg(long = "V")]
        volume: f64,
        /// List every admissible lattice below the bound.
        #[arg(long)]
        list: bool,
    },
    /// Classify a metric sequence as collapsing or converging.
    Sequence {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long = "volume-floor")]
        volume_floor: f64,
        #[arg(long, default_value_t = 5)]
        window: usize,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
        #[arg(long)]
        csv: bool,
    },
}

/// Exit code and captured output of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

enum Failure {
    Geometry(Error),
    Input(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Geometry(e)
    }
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::Input(e.0)
    }
}

impl Failure {
    fn kind(&self) -> &'static str {
        match self {
            Failure::Geometry(e) => match e {
                Error::InvalidLattice(_) => "invalid_lattice",
                Error::Domain(_) => "domain",
                Error::InvalidMetric(_) => "invalid_metric",
                Error::NotBracketGenerating(_) => "not_bracket_generating",
                Error::UnsupportedSubRiemannian => "unsupported_subriemannian",
                Error::SolverFailure { .. } => "solver_failure",
            },
            Failure::Input(_) => "input",
            Failure::Usage(_) => "usage",
        }
    }

    fn code(&self) -> i32 {
        match self {
            Failure::Geometry(Error::SolverFailure { .. }) => 2,
            _ => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Geometry(e) => e.to_string(),
            Failure::Input(m) | Failure::Usage(m) => m.clone(),
        }
    }
}

/// Runs one invocation; `argv[0]` is the program name.
pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return Outcome {
                    code: 0,
                    stdout: e.render().to_string(),
                    stderr: String::new(),
                };
            }
            return failure(Failure::Usage(
                e.render().to_string().trim_end().to_string(),
            ));
        }
    };
    match execute(cli.command) {
        Ok(stdout) => Outcome {
            code: 0,
            stdout,
            stderr: String::new(),
        },
        Err(f) => failure(f),
    }
}

/// The outcome reported for a geometry error.
pub fn error_outcome(e: Error) -> Outcome {
    failure(Failure::Geometry(e))
}

fn failure(f: Failure) -> Outcome {
    let body = json!({ "error": { "kind": f.kind(), "message": f.message() } });
    Outcome {
        code: f.code(),
        stdout: String::new(),
        stderr: to_json(&body),
    }
}

fn load(input: &InputArg) -> Result<MetricInput, Failure> {
    Ok(parse_json(&read_text(&input.input)?)?)
}

#[derive(Serialize)]
struct CanonicalOut {
    n: usize,
    block_matrix: Vec<Vec<Real>>,
    atilde: Vec<Vec<Real>>,
    rho: Real,
    d: Vec<Real>,
    corank: usize,
    p: Vec<Vec<Real>>,
    r: Vec<Vec<Real>>,
    inner: Vec<Real>,
}

#[derive(Serialize)]
struct InvariantsOut {
    d: Vec<Real>,
    delta: Real,
    absdet: Real,
    absrho: Real,
    corank: usize,
}

#[derive(Serialize)]
struct BoundOut {
    value: Real,
    bound: Real,
    pass: bool,
}

#[derive(Serialize)]
struct TwoSidedOut {
    value: Real,
    lower: Real,
    upper: Real,
    pass: bool,
}

#[derive(Serialize)]
struct ConstantsOut {
    c1: Real,
    c2: Real,
    c3: Real,
    c_minus: Option<Real>,
    c_plus: Real,
}

#[derive(Serialize)]
struct CheckOut {
    mode: &'static str,
    constants: ConstantsOut,
    a1: BoundOut,
    a2: BoundOut,
    a3: BoundOut,
    #[serde(skip_serializing_if = "Option::is_none")]
    a4: Option<TwoSidedOut>,
    #[serde(rename = "a4'", skip_serializing_if = "Option::is_none")]
    a4prime: Option<BoundOut>,
    all_pass: bool,
}

fn bound_out(b: &heisgeo::moduli::Bound) -> BoundOut {
    BoundOut {
        value: Real(b.value),
        bound: Real(b.bound),
        pass: b.pass,
    }
}

fn check_out(r: &PrecompactnessReport, k: &heisgeo::moduli::GeometryConstants) -> CheckOut {
    CheckOut {
        mode: r.mode.as_str(),
        constants: ConstantsOut {
            c1: Real(k.c1),
            c2: Real(k.c2),
            c3: Real(k.c3),
            c_minus: k.c_minus.map(Real),
            c_plus: Real(k.c_plus),
        },
        a1: bound_out(&r.a1),
        a2: bound_out(&r.a2),
        a3: bound_out(&r.a3),
        a4: r.a4.map(|a| TwoSidedOut {
            value: Real(a.value),
            lower: Real(a.lower),
            upper: Real(a.upper),
            pass: a.pass,
        }),
        a4prime: r.a4prime.as_ref().map(bound_out),
        all_pass: r.all_pass(),
    }
}

fn execute(command: Command) -> Result<String, Failure> {
    match command {
        Command::Canonicalize(input) => {
            let m = load(&input)?.metric()?;
            let c = canonicalize(&m)?;
            Ok(to_json(&CanonicalOut {
                n: c.n,
                block_matrix: matrix_rows(&c.block_matrix()),
                atilde: matrix_rows(&c.atilde),
                rho: Real(c.rho),
                d: reals(&c.d),
                corank: m.corank(),
                p: matrix_rows(&c.p),
                r: matrix_rows(&c.r),
                inner: reals(&c.inner.to_vec()),
            }))
        }
        Command::Invariants(input) => {
            let m = load(&input)?.metric()?;
            let c = canonicalize(&m)?;
            Ok(to_json(&InvariantsOut {
                d: reals(&c.d),
                delta: Real(c.delta()),
                absdet: Real(c.abs_det()),
                absrho: Real(c.rho.abs()),
                corank: m.corank(),
            }))
        }
        Command::Ricci(input) => {
            let m = load(&input)?.metric()?;
            let ric = heisgeo::metric::ricci_matrix(&m)?;
            let diag: Vec<f64> = (0..ric.nrows()).map(|i| ric[(i, i)]).collect();
            let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
            let max = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(to_json(&json!({
                "frame": "canonical-orthonormal",
                "matrix": matrix_rows(&ric),
                "eigenvalues": reals(&diag),
                "min": Real(min),
                "max": Real(max),
            })))
        }
        Command::Volume { input, kind, t } => {
            let inp = load(&input)?;
            let m = inp.metric()?;
            let spec = inp.lattice_spec()?;
            let c = canonicalize(&m)?;
            if t.is_some() && kind != VolumeKind::Tilted {
                return Err(Failure::Usage(
                    "--t is only meaningful with --kind tilted".into(),
                ));
            }
            let coeff = match kind {
                VolumeKind::Riemannian => c.riemannian_volume(),
                VolumeKind::Popp => c.popp_volume(),
                VolumeKind::Minimal => c.minimal_popp_volume(),
                VolumeKind::Tilted => {
                    let t = match t {
                        Some(s) => parse_list(&s)?,
                        None => vec![0.0; 2 * c.n],
                    };
                    c.tilted_popp_volume(&t)?
                }
            };
            Ok(to_json(&json!({
                "kind": kind.as_str(),
                "coefficient": Real(coeff.value),
                "covolume": Real(spec.covolume()),
                "total": Real(heisgeo::metric::total_measure(&spec, &coeff)),
            })))
        }
        Command::Geodesic {
            input,
            momentum,
            time,
            steps,
        } => {
            let m = load(&input)?.metric()?;
            let c = canonicalize(&m)?;
            let p = Momentum::from_slice(&parse_list(&momentum)?)?;
            if p.n() != c.n {
                return Err(
                    Error::Domain("momentum dimension does not match the metric".into()).into(),
                );
            }
            let cut = cut_time(&c, &p);
            let speed = p.speed_squared(&c).sqrt();
            let arc = GeodesicArc::new(c, p, time)?;
            let mut out = json!({
                "time": Real(time),
                "speed": Real(speed),
                "cut_time": Real(cut),
                "minimizing": time <= cut,
                "endpoint": reals(&arc.endpoint().coords()),
            });
            if let Some(steps) = steps {
                let samples: Vec<_> = arc
                    .sample(steps)
                    .into_iter()
                    .map(|(t, g)| json!({ "t": Real(t), "point": reals(&g.coords()) }))
                    .collect();
                out["samples"] = serde_json::Value::Array(samples);
            }
            Ok(to_json(&out))
        }
        Command::Distance {
            input,
            target,
            quotient,
            grid,
        } => {
            let inp = load(&input)?;
            let m = inp.metric()?;
            let c = canonicalize(&m)?;
            let g = GroupElement::from_slice(&parse_list(&target)?)?;
            let mut opts = DistanceOptions::from_env();
            if let Some(grid) = grid {
                opts = opts.with_grid_size(grid);
            }
            if quotient {
                let spec = inp.lattice_spec()?;
                let d = quotient_distance(&c, &spec, &g, &opts)?;
                Ok(to_json(&json!({ "quotient": true, "distance": Real(d) })))
            } else {
                let r = distance(&c, &g, &opts)?;
                Ok(to_json(&json!({
                    "quotient": false,
                    "distance": Real(r.distance),
                    "minimizer": reals(&r.minimizer.to_vec()),
                    "residual": Real(r.residual),
                })))
            }
        }
        Command::Check {
            input,
            diameter,
            volume,
            ricci,
            mode,
        } => {
            let inp = load(&input)?;
            let m = inp.metric()?;
            let spec = inp.lattice_spec()?;
            let k = geometry_constants(&spec, diameter, volume, ricci, mode)?;
            let report = check_precompactness(&m, &spec, &k)?;
            Ok(to_json(&check_out(&report, &k)))
        }
        Command::LatticeBound {
            n,
            diameter,
            volume,
            list,
        } => {
            let bound = lattice_rank_bound(n, diameter, volume)?;
            let lattices = enumerate_valid_lattices(n, bound)?;
            let mut out = json!({
                "n": n,
                "bound": Real(bound),
                "max_rn": bound.floor() as u64,
                "count": lattices.len(),
            });
            if list {
                let all: Vec<_> = lattices.iter().map(|l| l.r().to_vec()).collect();
                out["lattices"] = json!(all);
            }
            Ok(to_json(&out))
        }
        Command::Sequence {
            spec,
            volume_floor,
            window,
            tolerance,
            csv,
        } => {
            let s: SequenceSpec = parse_json(&read_text(&spec)?)?;
            let report = analyze_sequence(&s, volume_floor, window, tolerance)?;
            Ok(if csv {
                report_csv(&report)
            } else {
                to_json(&report)
            })
        }
    }
}
