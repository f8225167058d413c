//! Classification of metric sequences on a fixed quotient `Γ_r \ H_n` as
//! collapsing or converging.
//!
//! A finite run can only witness the asymptotic behaviour, so the verdict is
//! a heuristic built from three observations:
//!
//! * the minimal-Popp total measure against a floor `V`,
//! * boundedness of a closed-form diameter upper bound (flat-torus covering
//!   radius plus fiber length), judged by comparing the trailing window with
//!   the earlier terms,
//! * existence of a limit: exact for parametric families (the `k → ∞` limit
//!   of each rational entry), a Cauchy test on fingerprints over the trailing
//!   window for explicit families.

use heisgeo::metric::{canonicalize, minimal_popp_coeff, total_measure, CanonicalMetric};
use heisgeo::moduli::{
    check_precompactness, diameter_upper_bound, fiber_length, geometry_constants, Fingerprint,
    Mode, PrecompactnessReport,
};
use heisgeo::{Error, LatticeSpec, MetricMatrix, Result};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{matrix_from_rows, reals, Real};
use crate::rational::{Limit, RationalFunction};

/// Relative growth of the diameter bound tolerated in the trailing window.
pub const DIAMETER_GROWTH_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Family {
    /// `A_k = diag(f_1(k), …, f_{2n+1}(k))` for integer `k` in `k_range`.
    #[serde(rename = "diagonal-parametric")]
    DiagonalParametric {
        entries: Vec<String>,
        k_range: [i64; 2],
    },
    #[serde(rename = "explicit")]
    Explicit { matrices: Vec<Vec<Vec<f64>>> },
}

/// Constants for the per-row precompactness checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    #[serde(rename = "D")]
    pub diameter: f64,
    #[serde(rename = "V")]
    pub volume: f64,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub ricci: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    pub n: usize,
    pub lattice: Vec<u64>,
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionFlags {
    pub a1: bool,
    pub a2: bool,
    pub a3: bool,
    pub a4: bool,
    pub all: bool,
}

impl From<&PrecompactnessReport> for ConditionFlags {
    fn from(r: &PrecompactnessReport) -> Self {
        let a4 =
            r.a4.map(|a| a.pass)
                .or(r.a4prime.map(|a| a.pass))
                .unwrap_or(true);
        Self {
            a1: r.a1.pass,
            a2: r.a2.pass,
            a3: r.a3.pass,
            a4,
            all: r.all_pass(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceRow {
    pub k: i64,
    pub d: Vec<Real>,
    pub delta: Real,
    pub absdet: Real,
    pub absrho: Real,
    pub riemannian_total: Real,
    pub popp_total: Real,
    pub minimal_popp_total: Real,
    pub fiber_length: Real,
    pub diameter_bound: Real,
    pub ricci_min: Option<Real>,
    pub ricci_max: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub riemannian_check: Option<ConditionFlags>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subriemannian_check: Option<ConditionFlags>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "non-collapsed (limit corank-0)")]
    NonCollapsedRiemannian,
    #[serde(rename = "non-collapsed (limit corank-1)")]
    NonCollapsedSubRiemannian,
    #[serde(rename = "collapsed")]
    Collapsed,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitFingerprint {
    pub d: Vec<Real>,
    pub absdet: Real,
    pub absrho: Real,
}

impl From<&Fingerprint> for LimitFingerprint {
    fn from(f: &Fingerprint) -> Self {
        Self {
            d: reals(&f.d),
            absdet: Real(f.absdet),
            absrho: Real(f.absrho),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitInfo {
    /// `"analytic"` for parametric families, `"cauchy"` for explicit ones.
    pub method: &'static str,
    pub corank: usize,
    pub fingerprint: LimitFingerprint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceReport {
    pub n: usize,
    pub lattice: Vec<u64>,
    pub volume_floor: Real,
    pub window: usize,
    pub tolerance: Real,
    pub rows: Vec<SequenceRow>,
    pub diameter_bounded: bool,
    pub volume_floor_held: bool,
    pub limit: Option<LimitInfo>,
    pub verdict: Verdict,
}

fn member_error(k: i64, e: Error) -> Error {
    let wrap = |m: String| format!("family member k = {k}: {m}");
    match e {
        Error::InvalidLattice(m) => Error::InvalidLattice(wrap(m)),
        Error::Domain(m) => Error::Domain(wrap(m)),
        Error::InvalidMetric(m) => Error::InvalidMetric(wrap(m)),
        Error::NotBracketGenerating(m) => Error::NotBracketGenerating(wrap(m)),
        other => other,
    }
}

fn members(spec: &SequenceSpec) -> Result<Vec<(i64, MetricMatrix)>> {
    let dim = 2 * spec.n + 1;
    match &spec.family {
        Family::DiagonalParametric { entries, k_range } => {
            if entries.len() != dim {
                return Err(Error::InvalidMetric(format!(
                    "expected {dim} diagonal entries, got {}",
                    entries.len()
                )));
            }
            let fs: Vec<RationalFunction> = entries
                .iter()
                .map(|e| RationalFunction::parse(e))
                .collect::<Result<_>>()?;
            let [lo, hi] = *k_range;
            if lo > hi {
                return Err(Error::Domain(format!("empty k range [{lo}, {hi}]")));
            }
            (lo..=hi)
                .map(|k| {
                    let diag: Vec<f64> = fs
                        .iter()
                        .map(|f| f.eval(k as f64))
                        .collect::<Result<_>>()
                        .map_err(|e| member_error(k, e))?;
                    let m = MetricMatrix::diagonal(&diag).map_err(|e| member_error(k, e))?;
                    Ok((k, m))
                })
                .collect()
        }
        Family::Explicit { matrices } => {
            if matrices.is_empty() {
                return Err(Error::Domain("explicit family is empty".into()));
            }
            matrices
                .iter()
                .enumerate()
                .map(|(i, rows)| {
                    let k = i as i64 + 1;
                    let m = matrix_from_rows(spec.n, rows)
                        .and_then(MetricMatrix::new)
                        .map_err(|e| member_error(k, e))?;
                    Ok((k, m))
                })
                .collect()
        }
    }
}

struct Evaluated {
    row: SequenceRow,
    fingerprint: Fingerprint,
    minimal_total: f64,
    diameter: f64,
}

fn evaluate(
    k: i64,
    m: &MetricMatrix,
    spec: &LatticeSpec,
    check: Option<&CheckSpec>,
) -> Result<Evaluated> {
    let c: CanonicalMetric = canonicalize(m)?;
    let covolume = spec.covolume();
    let minimal_total = total_measure(spec, &minimal_popp_coeff(m)?);
    let diameter = diameter_upper_bound(&c, spec);
    let (ricci_min, ricci_max) = if c.is_riemannian() {
        let ric = c.ricci();
        let diag: Vec<f64> = (0..ric.nrows()).map(|i| ric[(i, i)]).collect();
        (
            Some(Real(diag.iter().copied().fold(f64::INFINITY, f64::min))),
            Some(Real(diag.iter().copied().fold(f64::NEG_INFINITY, f64::max))),
        )
    } else {
        (None, None)
    };
    let (riemannian_check, subriemannian_check) = match check {
        None => (None, None),
        Some(cs) => {
            let riem = match cs.ricci {
                Some(kk) => {
                    let consts = geometry_constants(
                        spec,
                        cs.diameter,
                        cs.volume,
                        Some(kk),
                        Mode::Riemannian,
                    )?;
                    Some(ConditionFlags::from(&check_precompactness(
                        m, spec, &consts,
                    )?))
                }
                None => None,
            };
            let consts =
                geometry_constants(spec, cs.diameter, cs.volume, None, Mode::SubRiemannian)?;
            let sub = ConditionFlags::from(&check_precompactness(m, spec, &consts)?);
            (riem, Some(sub))
        }
    };
    let fingerprint = Fingerprint::of(&c);
    let row = SequenceRow {
        k,
        d: reals(&c.d),
        delta: Real(c.delta()),
        absdet: Real(c.abs_det()),
        absrho: Real(c.rho.abs()),
        riemannian_total: Real(covolume * c.riemannian_volume().value),
        popp_total: Real(covolume * c.popp_volume().value),
        minimal_popp_total: Real(minimal_total),
        fiber_length: Real(fiber_length(&c)),
        diameter_bound: Real(diameter),
        ricci_min,
        ricci_max,
        riemannian_check,
        subriemannian_check,
    };
    Ok(Evaluated {
        row,
        fingerprint,
        minimal_total,
        diameter,
    })
}

fn analytic_limit(spec: &SequenceSpec) -> Result<Option<LimitInfo>> {
    let Family::DiagonalParametric { entries, .. } = &spec.family else {
        return Ok(None);
    };
    let mut diag = Vec::with_capacity(entries.len());
    for e in entries {
        match RationalFunction::parse(e)?.limit() {
            Limit::Finite(v) => diag.push(v),
            Limit::Infinite => return Ok(None),
        }
    }
    let Ok(m) = MetricMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(diag))) else {
        return Ok(None);
    };
    let c = canonicalize(&m)?;
    Ok(Some(LimitInfo {
        method: "analytic",
        corank: m.corank(),
        fingerprint: LimitFingerprint::from(&Fingerprint::of(&c)),
    }))
}

fn cauchy_limit(evaluated: &[Evaluated], window: usize, tolerance: f64) -> Option<LimitInfo> {
    if window < 2 || evaluated.len() < window {
        return None;
    }
    let tail = &evaluated[evaluated.len() - window..];
    for a in tail {
        for b in tail {
            if !a.fingerprint.approx_eq(&b.fingerprint, tolerance) {
                return None;
            }
        }
    }
    let w = window as f64;
    let n = tail[0].fingerprint.d.len();
    let d: Vec<f64> = (0..n)
        .map(|i| tail.iter().map(|e| e.fingerprint.d[i]).sum::<f64>() / w)
        .collect();
    let absdet = tail.iter().map(|e| e.fingerprint.absdet).sum::<f64>() / w;
    let absrho = tail.iter().map(|e| e.fingerprint.absrho).sum::<f64>() / w;
    let scale = d
        .last()
        .copied()
        .unwrap_or(1.0)
        .max(absdet.powf(1.0 / n as f64));
    let corank = usize::from(absrho <= tolerance * scale);
    Some(LimitInfo {
        method: "cauchy",
        corank,
        fingerprint: LimitFingerprint::from(&Fingerprint { d, absdet, absrho }),
    })
}

fn diameter_bounded(evaluated: &[Evaluated], window: usize) -> bool {
    let values: Vec<f64> = evaluated.iter().map(|e| e.diameter).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return false;
    }
    if values.len() <= window {
        return true;
    }
    let split = values.len() - window;
    let head = values[..split].iter().copied().fold(0.0, f64::max);
    let tail = values[split..].iter().copied().fold(0.0, f64::max);
    tail <= head * (1.0 + DIAMETER_GROWTH_TOLERANCE)
}

/// Evaluates every member of the family and classifies the sequence.
pub fn analyze_sequence(
    spec: &SequenceSpec,
    volume_floor: f64,
    window: usize,
    tolerance: f64,
) -> Result<SequenceReport> {
    if !(volume_floor > 0.0 && volume_floor.is_finite()) {
        return Err(Error::Domain("the volume floor must be positive".into()));
    }
    if window == 0 || !(tolerance > 0.0) {
        return Err(Error::Domain(
            "window and tolerance must be positive".into(),
        ));
    }
    if spec.lattice.len() != spec.n {
        return Err(Error::InvalidLattice(format!(
            "lattice has {} entries, expected n = {}",
            spec.lattice.len(),
            spec.n
        )));
    }
    let lattice = LatticeSpec::new(spec.lattice.clone())?;
    let members = members(spec)?;
    let evaluated: Vec<Evaluated> = members
        .par_iter()
        .map(|(k, m)| {
            evaluate(*k, m, &lattice, spec.check.as_ref()).map_err(|e| member_error(*k, e))
        })
        .collect::<Result<_>>()?;

    let limit = match &spec.family {
        Family::DiagonalParametric { .. } => analytic_limit(spec)?,
        Family::Explicit { .. } => cauchy_limit(&evaluated, window, tolerance),
    };
    let bounded = diameter_bounded(&evaluated, window);
    let floor_held = evaluated.iter().all(|e| e.minimal_total >= volume_floor);
    let final_total = evaluated.last().expect("nonempty family").minimal_total;

    let verdict = if final_total < volume_floor && bounded {
        Verdict::Collapsed
    } else if let (Some(l), true) = (&limit, floor_held) {
        if l.corank == 0 {
            Verdict::NonCollapsedRiemannian
        } else {
            Verdict::NonCollapsedSubRiemannian
        }
    } else {
        Verdict::Inconclusive
    };

    Ok(SequenceReport {
        n: spec.n,
        lattice: spec.lattice.clone(),
        volume_floor: Real(volume_floor),
        window,
        tolerance: Real(tolerance),
        rows: evaluated.into_iter().map(|e| e.row).collect(),
        diameter_bounded: bounded,
        volume_floor_held: floor_held,
        limit,
        verdict,
    })
}

pub const CSV_HEADER: [&str; 12] = [
    "k",
    "d",
    "delta",
    "absdet",
    "absrho",
    "riemannian_total",
    "popp_total",
    "minimal_popp_total",
    "fiber_length",
    "diameter_bound",
    "ricci_min",
    "ricci_max",
];

/// The rows of a report as CSV; `d` is `;`-separated inside its cell.
pub fn report_csv(report: &SequenceReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    let fmt = |r: &Real| r.0.to_string();
    let opt = |r: &Option<Real>| r.as_ref().map(fmt).unwrap_or_default();
    for row in &report.rows {
        let d: Vec<String> = row.d.iter().map(fmt).collect();
        w.write_record([
            row.k.to_string(),
            d.join(";"),
            fmt(&row.delta),
            fmt(&row.absdet),
            fmt(&row.absrho),
            fmt(&row.riemannian_total),
            fmt(&row.popp_total),
            fmt(&row.minimal_popp_total),
            fmt(&row.fiber_length),
            fmt(&row.diameter_bound),
            opt(&row.ricci_min),
            opt(&row.ricci_max),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
