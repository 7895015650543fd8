//! Expansions against an orthonormal spline system and the functionals built on them:
//! square and maximal functions, Hardy-Littlewood maxima, random sign flips and a
//! constructive atomic decomposition.

mod atomic;
mod piecewise;

pub use atomic::{atom_corpus, atomic_decompose, Atom, AtomCheck, AtomKind, AtomicDecomposition, WeightedAtom};
pub use piecewise::PiecewisePoly;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::banded::BandedCholesky;
use crate::bspline::{gram, BSplineBasis, Spline};
use crate::error::{Error, Result};
use crate::orthosys::OrthoSystem;
use crate::quadrature;

/// Every member of a system written in the B-spline basis of the finest grid `T_N`, so that
/// member values, partial sums and sign-flipped sums are cheap to evaluate.
#[derive(Debug, Clone)]
pub struct Synthesis {
    basis: BSplineBasis,
    chol: BandedCholesky,
    coeffs: Vec<Vec<f64>>,
    order: usize,
}

impl Synthesis {
    pub fn new(system: &OrthoSystem) -> Result<Self> {
        let basis = BSplineBasis::new(&system.finest_grid());
        let chol = gram(&basis).factor()?;
        let k = basis.order();
        let rule = quadrature::rule(k);
        let coeffs = (0..system.len())
            .into_par_iter()
            .map(|m| {
                let mut rhs = vec![0.0; basis.dim()];
                let mut buf = [0.0; 32];
                for (s, a, b) in basis.spans() {
                    for (x, w) in rule.on(a, b) {
                        let fx = system.eval_member(m, x);
                        basis.eval_in_span(s, x, &mut buf);
                        for r in 0..k {
                            rhs[s + 1 - k + r] += w * fx * buf[r];
                        }
                    }
                }
                chol.solve(&rhs)
            })
            .collect();
        Ok(Synthesis { basis, chol, coeffs, order: system.order() })
    }

    pub fn basis(&self) -> &BSplineBasis {
        &self.basis
    }

    /// Number of members.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// B-spline coefficients of member `m` on the finest grid.
    pub fn member_coeffs(&self, m: usize) -> &[f64] {
        &self.coeffs[m]
    }

    /// `f_m(x)` for every member, written into `out`.
    pub fn member_values(&self, x: f64, out: &mut Vec<f64>) {
        let mut buf = [0.0; 32];
        let first = self.basis.eval_nonzero(x, &mut buf);
        self.fill(first, &buf, out);
    }

    fn member_values_in_span(&self, s: usize, x: f64, out: &mut Vec<f64>) {
        let mut buf = [0.0; 32];
        self.basis.eval_in_span(s, x, &mut buf);
        self.fill(s + 1 - self.order, &buf, out);
    }

    fn fill(&self, first: usize, buf: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.coeffs.iter().map(|c| {
            c[first..first + self.order].iter().zip(buf).map(|(a, b)| a * b).sum::<f64>()
        }));
    }

    /// Finest-grid spans `(s, a, b)`.
    pub fn spans(&self) -> Vec<(usize, f64, f64)> {
        self.basis.spans().collect()
    }

    /// B-spline coefficients of `Σ_m weights[m] f_m`.
    pub fn combine(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.basis.dim()];
        for (c, &w) in self.coeffs.iter().zip(weights) {
            if w != 0.0 {
                out.iter_mut().zip(c).for_each(|(o, v)| *o += w * v);
            }
        }
        out
    }

    /// Moments `⟨f, N_i⟩` against the finest B-splines, exact for piecewise polynomials.
    pub fn moments(&self, f: &PiecewisePoly) -> Vec<f64> {
        let mut pts: Vec<f64> = self.basis.knots().to_vec();
        pts.extend_from_slice(f.breaks());
        pts.retain(|x| (0.0..=1.0).contains(x));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let k = self.order;
        let m = quadrature::points_for_degree(f.degree() + k - 1);
        let rule = quadrature::rule(m);
        let mut mom = vec![0.0; self.basis.dim()];
        let mut buf = [0.0; 32];
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let s = self.basis.span(0.5 * (a + b));
            for (x, wt) in rule.on(a, b) {
                let fx = f.eval(x);
                if fx == 0.0 {
                    continue;
                }
                self.basis.eval_in_span(s, x, &mut buf);
                for r in 0..k {
                    mom[s + 1 - k + r] += wt * fx * buf[r];
                }
            }
        }
        mom
    }

    #[allow(dead_code)]
    pub(crate) fn cholesky(&self) -> &BandedCholesky {
        &self.chol
    }
}

/// Coefficients `a_n` against the members of a system, in member order
/// `f_{-k+2}, ..., f_N`.
#[derive(Debug, Clone)]
pub struct Expansion<'a> {
    synth: &'a Synthesis,
    coeffs: Vec<f64>,
    source: Option<PiecewisePoly>,
}

impl<'a> Expansion<'a> {
    pub fn new(synth: &'a Synthesis, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != synth.len() {
            return Err(Error::Contract(format!(
                "{} coefficients for {} members",
                coeffs.len(),
                synth.len()
            )));
        }
        Ok(Expansion { synth, coeffs, source: None })
    }

    pub fn synthesis(&self) -> &'a Synthesis {
        self.synth
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// The function this expansion was computed from, if any.
    pub fn source(&self) -> Option<&PiecewisePoly> {
        self.source.as_ref()
    }

    /// `Σ a_n f_n` as a spline on the finest grid.
    pub fn sum(&self) -> Spline {
        Spline::new(self.synth.basis.clone(), self.synth.combine(&self.coeffs)).expect("dimensions agree")
    }

    /// The partial sum `Σ_{m < upto} a_m f_m` (member positions).
    pub fn partial_sum(&self, upto: usize) -> Spline {
        let mut w = self.coeffs.clone();
        let cut = upto.min(w.len());
        w[cut..].iter_mut().for_each(|v| *v = 0.0);
        Spline::new(self.synth.basis.clone(), self.synth.combine(&w)).expect("dimensions agree")
    }

    fn square_at(&self, vals: &[f64]) -> f64 {
        vals.iter().zip(&self.coeffs).map(|(v, a)| (a * v).powi(2)).sum::<f64>().sqrt()
    }

    pub(crate) fn maximal_at(&self, vals: &[f64]) -> f64 {
        let mut acc = 0.0;
        let mut best: f64 = 0.0;
        for (v, a) in vals.iter().zip(&self.coeffs) {
            acc += a * v;
            best = best.max(acc.abs());
        }
        best
    }

    fn largest_term_at(&self, vals: &[f64]) -> f64 {
        vals.iter().zip(&self.coeffs).map(|(v, a)| (a * v).abs()).fold(0.0, f64::max)
    }

    /// Integral of a pointwise functional of the member values by 8-point Gauss rules on
    /// each finest span, halving spans until the total changes by less than `tol`.
    fn integrate_sampled<F: Fn(&[f64]) -> f64 + Sync>(&self, g: F, tol: f64) -> f64 {
        let spans = self.synth.spans();
        let rule = quadrature::rule(8);
        let eval = |pieces: usize| -> f64 {
            spans
                .par_iter()
                .map(|&(s, a, b)| {
                    let mut vals = Vec::with_capacity(self.synth.len());
                    let h = (b - a) / pieces as f64;
                    let mut total = 0.0;
                    for p in 0..pieces {
                        let lo = a + h * p as f64;
                        for (x, w) in rule.on(lo, lo + h) {
                            self.synth.member_values_in_span(s, x, &mut vals);
                            total += w * g(&vals);
                        }
                    }
                    total
                })
                .collect::<Vec<f64>>()
                .iter()
                .sum()
        };
        let mut pieces = 1;
        let mut prev = eval(pieces);
        for _ in 0..6 {
            pieces *= 2;
            let next = eval(pieces);
            if (next - prev).abs() <= tol * next.abs().max(f64::MIN_POSITIVE) {
                return next;
            }
            prev = next;
        }
        prev
    }
}

/// Computes `a_n = ⟨f, f_n⟩` for every member.
pub fn expand<'a>(f: &PiecewisePoly, synth: &'a Synthesis) -> Expansion<'a> {
    let mom = synth.moments(f);
    let coeffs = synth
        .coeffs
        .par_iter()
        .map(|c| c.iter().zip(&mom).map(|(a, b)| a * b).sum())
        .collect();
    Expansion { synth, coeffs, source: Some(f.clone()) }
}

/// `P(x) = (Σ a_n² f_n(x)²)^{1/2}`.
pub fn square_function(e: &Expansion, x: f64) -> f64 {
    let mut vals = Vec::new();
    e.synth.member_values(x, &mut vals);
    e.square_at(&vals)
}

/// `‖P‖_1` to relative tolerance `tol`.
pub fn sq_norm1(e: &Expansion, tol: f64) -> f64 {
    e.integrate_sampled(|v| e.square_at(v), tol)
}

/// `S(x) = max_m |Σ_{n <= m} a_n f_n(x)|`.
pub fn maximal_function(e: &Expansion, x: f64) -> f64 {
    let mut vals = Vec::new();
    e.synth.member_values(x, &mut vals);
    e.maximal_at(&vals)
}

/// `‖S‖_1`, sampled at Gauss points with refinement until the relative change is below `tol`.
pub fn max_norm1(e: &Expansion, tol: f64) -> f64 {
    e.integrate_sampled(|v| e.maximal_at(v), tol)
}

/// `∫ sup_n |a_n f_n|`.
pub fn largest_term_norm1(e: &Expansion, tol: f64) -> f64 {
    e.integrate_sampled(|v| e.largest_term_at(v), tol)
}

/// `‖Σ a_n f_n‖_1`.
pub fn sum_norm1(e: &Expansion) -> f64 {
    e.sum().lp_norm(1.0)
}

/// Hardy-Littlewood maximal function over intervals with endpoints in the breakpoints of
/// `f` (each piece of positive degree split into `refine` parts), `0`, `1` and `x`.
pub fn hl_maximal(f: &PiecewisePoly, x: f64, refine: usize) -> f64 {
    let mut pts = vec![0.0, 1.0, x];
    for (i, w) in f.breaks().windows(2).enumerate() {
        let parts = if f.pieces()[i].len() > 1 { refine.max(1) } else { 1 };
        let h = (w[1] - w[0]) / parts as f64;
        pts.extend((0..=parts).map(|p| w[0] + h * p as f64));
    }
    pts.retain(|p| (0.0..=1.0).contains(p));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut prefix = vec![0.0];
    for w in pts.windows(2) {
        let last = *prefix.last().expect("nonempty");
        prefix.push(last + f.abs_integral(w[0], w[1]));
    }
    let ix = pts.partition_point(|&p| p < x);
    let mut best: f64 = 0.0;
    for a in 0..=ix.min(pts.len() - 1) {
        for b in ix.max(a + 1)..pts.len() {
            if pts[a] <= x && x <= pts[b] {
                best = best.max((prefix[b] - prefix[a]) / (pts[b] - pts[a]));
            }
        }
    }
    best
}

/// `‖Σ ε_m t_m‖_1` for the given sign pattern, terms given as B-spline coefficients.
fn signed_norm1(basis: &BSplineBasis, terms: &[Vec<f64>], signs: &[bool]) -> f64 {
    let mut c = vec![0.0; basis.dim()];
    for (t, &s) in terms.iter().zip(signs) {
        let e = if s { 1.0 } else { -1.0 };
        c.iter_mut().zip(t).for_each(|(o, v)| *o += e * v);
    }
    Spline::new(basis.clone(), c).expect("dimensions agree").lp_norm(1.0)
}

/// Running maximum of `‖Σ ε_m t_m‖_1` over seeded random sign vectors.
pub fn sign_flip_trace(basis: &BSplineBasis, terms: &[Vec<f64>], trials: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signs: Vec<Vec<bool>> = (0..trials).map(|_| (0..terms.len()).map(|_| rng.gen()).collect()).collect();
    let values: Vec<f64> = signs.par_iter().map(|s| signed_norm1(basis, terms, s)).collect();
    values
        .iter()
        .scan(0.0f64, |m, &v| {
            *m = m.max(v);
            Some(*m)
        })
        .collect()
}

/// Monte Carlo estimate of `sup_ε ‖Σ ε_n a_n f_n‖_1`.
pub fn sign_flip_supremum(e: &Expansion, trials: usize, seed: u64) -> f64 {
    let terms: Vec<Vec<f64>> = e
        .coeffs
        .iter()
        .enumerate()
        .filter(|(_, &a)| a != 0.0)
        .map(|(m, &a)| e.synth.coeffs[m].iter().map(|c| a * c).collect())
        .collect();
    sign_flip_trace(&e.synth.basis, &terms, trials.max(1), seed)
        .last()
        .copied()
        .unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceParams {
    pub trials: usize,
    pub seed: u64,
    pub tol_quad: f64,
    pub levels: usize,
    pub c_threshold: f64,
}

impl Default for EquivalenceParams {
    fn default() -> Self {
        EquivalenceParams { trials: 200, seed: 0, tol_quad: 1e-6, levels: 40, c_threshold: 0.4 }
    }
}

/// The four `H^1`-type quantities of one function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    /// `Σ |η|` of the constructive atomic decomposition.
    pub atomic: f64,
    pub maximal: f64,
    pub square: f64,
    pub sign_flip: f64,
}

impl EquivalenceReport {
    pub fn norms(&self) -> BTreeMap<&'static str, f64> {
        BTreeMap::from([
            ("atomic", self.atomic),
            ("maximal", self.maximal),
            ("square", self.square),
            ("sign_flip", self.sign_flip),
        ])
    }

    /// All six ratios `a/b` with `a` before `b` in the order atomic, maximal, square, sign_flip.
    pub fn ratios(&self) -> BTreeMap<String, f64> {
        let v = [
            ("atomic", self.atomic),
            ("maximal", self.maximal),
            ("square", self.square),
            ("sign_flip", self.sign_flip),
        ];
        let mut out = BTreeMap::new();
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                out.insert(format!("{}/{}", v[i].0, v[j].0), v[i].1 / v[j].1);
            }
        }
        out
    }
}

pub fn equivalence_report(f: &PiecewisePoly, synth: &Synthesis, params: EquivalenceParams) -> Result<EquivalenceReport> {
    let e = expand(f, synth);
    let dec = atomic_decompose(&e, params.levels, params.c_threshold)?;
    Ok(EquivalenceReport {
        atomic: dec.weight_sum(),
        maximal: dec.s_norm1,
        square: sq_norm1(&e, params.tol_quad),
        sign_flip: sign_flip_supremum(&e, params.trials, params.seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hl_of_half_indicator() {
        let f = PiecewisePoly::piecewise_constant(vec![0.0, 0.5, 1.0], vec![1.0, 0.0]).unwrap();
        assert!((hl_maximal(&f, 0.75, 4) - 2.0 / 3.0).abs() < 1e-15);
        assert!((hl_maximal(&f, 0.25, 4) - 1.0).abs() < 1e-15);
        let c = PiecewisePoly::constant(-2.5);
        assert!((hl_maximal(&c, 0.3, 4) - 2.5).abs() < 1e-15);
    }
}
