use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{OrthoFunction, OrthoSystem};
use crate::knotseq::{count_points_between, Grid, Span};
use crate::quadrature;
use crate::stats::linear_fit;

/// Fewer distinct distances than this leave the decay rate undetermined.
pub const MIN_DISTINCT_D: usize = 6;

pub const Q_LADDER: [f64; 10] = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exponent {
    One,
    Two,
    Infinity,
}

impl Exponent {
    pub const ALL: [Exponent; 3] = [Exponent::One, Exponent::Two, Exponent::Infinity];

    /// `1 - 1/p`.
    fn dual_power(self) -> f64 {
        match self {
            Exponent::One => 0.0,
            Exponent::Two => 0.5,
            Exponent::Infinity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    Coefficient,
    LeftTail(Exponent),
    RightTail(Exponent),
}

/// A quantity that the decay bounds control by `C q^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecaySample {
    pub kind: BoundKind,
    pub d: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub n: usize,
    /// Decay base fitted to this function alone, when its grid is large enough to determine
    /// one.
    pub fitted_q: Option<f64>,
    /// `(q, C(q))` over the ladder: the smallest constant covering every sample.
    pub ladder: Vec<(f64, f64)>,
    /// Least-squares slope of `ln |w_j|` against `d_n(τ_j)`, when determined.
    pub log_slope: Option<f64>,
    /// `(d_n(τ_j), |w_j| / |w_{j0}|)` for every coefficient.
    pub profile: Vec<(usize, f64)>,
    /// `min_p ‖f_n‖_{L^p(J_n)} / ‖f_n‖_p` over `p ∈ {1, 2, ∞}`.
    pub concentration: f64,
    /// `|w_{j0}| / b_{j0,j0}`.
    pub j0_ratio: f64,
    pub samples: Vec<DecaySample>,
}

struct SpanNorms {
    edges: Vec<f64>,
    l1: Vec<f64>,
    l2: Vec<f64>,
    sup: Vec<f64>,
}

fn span_norms(f: &OrthoFunction) -> SpanNorms {
    let deg = f.basis().order() - 1;
    let mut out = SpanNorms { edges: vec![0.0], l1: vec![], l2: vec![], sup: vec![] };
    for (s, a, b) in f.basis().spans() {
        let g = |x: f64| f.eval_in_span(s, x);
        out.l1.push(quadrature::integrate_abs(g, a, b, deg));
        out.l2.push(quadrature::integrate(|x| g(x).powi(2), a, b, deg + 1));
        out.sup.push(quadrature::sup_abs(g, a, b, deg));
        out.edges.push(b);
    }
    out
}

fn combine(norms: &SpanNorms, range: std::ops::Range<usize>, p: Exponent) -> f64 {
    match p {
        Exponent::One => norms.l1[range].iter().sum(),
        Exponent::Two => norms.l2[range].iter().sum::<f64>().sqrt(),
        Exponent::Infinity => norms.sup[range].iter().copied().fold(0.0, f64::max),
    }
}

fn fit_envelope(samples: &[DecaySample]) -> Option<f64> {
    let mut env: std::collections::BTreeMap<usize, f64> = Default::default();
    for s in samples.iter().filter(|s| s.kind == BoundKind::Coefficient && s.value > 0.0) {
        let e = env.entry(s.d).or_insert(f64::NEG_INFINITY);
        *e = e.max(s.value.ln());
    }
    if env.len() < MIN_DISTINCT_D {
        return None;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = env.into_iter().map(|(d, v)| (d as f64, v)).unzip();
    Some(linear_fit(&xs, &ys).slope.exp())
}

fn ladder_constants(samples: &[DecaySample]) -> Vec<(f64, f64)> {
    Q_LADDER
        .iter()
        .map(|&q| {
            let c = samples
                .iter()
                .map(|s| s.value / q.powi(s.d as i32))
                .fold(0.0, f64::max);
            (q, c)
        })
        .collect()
}

fn select_q(fitted: Option<f64>, ladder: &[(f64, f64)]) -> (Option<f64>, f64) {
    let pick = match fitted {
        None => Some(0),
        Some(q) => ladder.iter().position(|&(l, _)| l >= q),
    };
    match pick {
        Some(i) => (Some(ladder[i].0), ladder[i].1),
        None => (None, f64::INFINITY),
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (b.0 - a.1).max(a.0 - b.1).max(0.0)
}

/// Measures the exponential decay of `f_n` away from its characteristic interval.
pub fn decay_report(f: &OrthoFunction) -> DecayReport {
    let basis = f.basis();
    let k = basis.order();
    let grid = Grid::from_tau(k, f.n, basis.knots().to_vec()).expect("basis knots form a grid");
    let t = basis.knots();
    let j = f.j_interval();
    let jspan = (j.lo, j.hi);
    let jlen = j.len();
    let mut samples = Vec::new();
    let mut log_pts = (Vec::new(), Vec::new());
    for (idx, &w) in f.w.iter().enumerate() {
        let supp = (t[idx], t[idx + k]);
        if supp.1 <= supp.0 || w == 0.0 {
            continue;
        }
        let d = count_points_between(&grid, Span::Point(t[idx]), j.as_span()).expect("inside [0, 1]");
        let denom = jlen + dist(supp, jspan) + (supp.1 - supp.0);
        samples.push(DecaySample { kind: BoundKind::Coefficient, d, value: w.abs() * denom });
        log_pts.0.push(d as f64);
        log_pts.1.push(w.abs().ln());
    }

    let norms = span_norms(f);
    let spans = norms.l1.len();
    for (e, &x) in norms.edges.iter().enumerate() {
        let (kind_range, side): (std::ops::Range<usize>, fn(Exponent) -> BoundKind) = if x > 0.0 && x < j.lo {
            (0..e, BoundKind::LeftTail)
        } else if x < 1.0 && x > j.hi {
            (e..spans, BoundKind::RightTail)
        } else {
            continue;
        };
        let d = count_points_between(&grid, Span::Point(x), j.as_span()).expect("inside [0, 1]");
        let gap = jlen + dist((x, x), jspan);
        for p in Exponent::ALL {
            let norm = combine(&norms, kind_range.clone(), p);
            let value = norm * gap.powf(p.dual_power()) / jlen.sqrt();
            samples.push(DecaySample { kind: side(p), d, value });
        }
    }

    let on_j: Vec<usize> = (0..spans)
        .filter(|&s| norms.edges[s] >= j.lo && norms.edges[s + 1] <= j.hi)
        .collect();
    let concentration = Exponent::ALL
        .iter()
        .map(|&p| {
            let inner = match p {
                Exponent::One => on_j.iter().map(|&s| norms.l1[s]).sum(),
                Exponent::Two => on_j.iter().map(|&s| norms.l2[s]).sum::<f64>().sqrt(),
                Exponent::Infinity => on_j.iter().map(|&s| norms.sup[s]).fold(0.0, f64::max),
            };
            inner / combine(&norms, 0..spans, p)
        })
        .fold(f64::INFINITY, f64::min);

    let ladder = ladder_constants(&samples);
    let fitted_q = fit_envelope(&samples);
    let peak = f.w[f.j0()].abs();
    let profile = log_pts.0.iter().zip(&log_pts.1).map(|(&d, &l)| (d as usize, l.exp() / peak)).collect();
    let distinct_d = {
        let mut d = log_pts.0.clone();
        d.sort_by(f64::total_cmp);
        d.dedup();
        d.len()
    };
    let log_slope = (distinct_d >= MIN_DISTINCT_D).then(|| linear_fit(&log_pts.0, &log_pts.1).slope);
    DecayReport {
        n: f.n,
        fitted_q,
        ladder,
        log_slope,
        profile,
        concentration,
        j0_ratio: f.w[f.j0()].abs() / f.b_j0,
        samples,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDecayReport {
    /// Decay base fitted to the pooled samples of all functions.
    pub fitted_q: Option<f64>,
    /// Smallest ladder value at or above `fitted_q`; `None` if the fit exceeds the ladder.
    pub q: Option<f64>,
    /// Smallest constant covering every sample of every function at `q`.
    pub constant: f64,
    pub ladder: Vec<(f64, f64)>,
    /// Pooled slope of `ln(|w_j| / |w_{j0}|)` against `d_n(τ_j)`.
    pub log_slope: f64,
    pub min_concentration: f64,
    pub min_j0_ratio: f64,
    pub reports: Vec<DecayReport>,
}

/// Pools the samples of every `f_n` and fits one decay base for the whole system.
pub fn system_decay(system: &OrthoSystem) -> SystemDecayReport {
    let reports: Vec<DecayReport> = system.functions().par_iter().map(decay_report).collect();
    let pooled: Vec<DecaySample> = reports.iter().flat_map(|r| r.samples.iter().copied()).collect();
    let ladder = ladder_constants(&pooled);
    let fitted_q = fit_envelope(&pooled);
    let (q, constant) = select_q(fitted_q, &ladder);
    let (xs, ys): (Vec<f64>, Vec<f64>) = reports
        .iter()
        .flat_map(|r| r.profile.iter().map(|&(d, v)| (d as f64, v.ln())))
        .unzip();
    SystemDecayReport {
        fitted_q,
        q,
        constant,
        ladder,
        log_slope: linear_fit(&xs, &ys).slope,
        min_concentration: reports.iter().map(|r| r.concentration).fold(f64::INFINITY, f64::min),
        min_j0_ratio: reports.iter().map(|r| r.j0_ratio).fold(f64::INFINITY, f64::min),
        reports,
    }
}
