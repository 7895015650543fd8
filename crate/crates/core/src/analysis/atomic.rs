use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{max_norm1, Expansion, PiecewisePoly};
use crate::error::{Error, Result};
use crate::quadrature;

const CELLS_PER_SPAN: usize = 8;
const SUP_TOL: f64 = 1e-12;
const MEAN_TOL: f64 = 1e-10;
const NEGLIGIBLE: f64 = 1e-8;
const LOWEST_LEVEL: i32 = -200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AtomKind {
    ConstantOne,
    MeanZero,
}

/// A function supported on `Γ = [lo, hi]` with `‖a‖_∞ ≤ |Γ|^{-1}` and, unless it is the
/// constant one, zero mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub kind: AtomKind,
    pub lo: f64,
    pub hi: f64,
    pub profile: PiecewisePoly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomCheck {
    pub support_ok: bool,
    /// `‖a‖_∞ · |Γ|`, at most one for a valid atom.
    pub sup_ratio: f64,
    /// `∫ a`, relative to `‖a‖_1`.
    pub mean: f64,
}

impl AtomCheck {
    pub fn passes(&self, kind: AtomKind) -> bool {
        self.support_ok
            && self.sup_ratio <= 1.0 + SUP_TOL
            && (kind == AtomKind::ConstantOne || self.mean.abs() <= MEAN_TOL)
    }
}

impl Atom {
    pub fn one() -> Self {
        Atom { kind: AtomKind::ConstantOne, lo: 0.0, hi: 1.0, profile: PiecewisePoly::constant(1.0) }
    }

    pub fn mean_zero(profile: PiecewisePoly) -> Result<Self> {
        let (lo, hi) = profile.support();
        let atom = Atom { kind: AtomKind::MeanZero, lo, hi, profile };
        if !atom.check().passes(AtomKind::MeanZero) {
            return Err(Error::Contract(format!("profile on [{lo}, {hi}] is not an atom")));
        }
        Ok(atom)
    }

    /// `(1_{[c-h, c]} - 1_{[c, c+h]}) / (2h)`.
    pub fn dipole(center: f64, half_width: f64) -> Result<Self> {
        let (lo, hi) = (center - half_width, center + half_width);
        if lo < 0.0 || hi > 1.0 || !(half_width > 0.0) {
            return Err(Error::Placement { lo, hi });
        }
        let v = 1.0 / (2.0 * half_width);
        Atom::mean_zero(PiecewisePoly::piecewise_constant(vec![lo, center, hi], vec![v, -v])?)
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.len() <= 0.0
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.profile.eval(x)
    }

    pub fn check(&self) -> AtomCheck {
        let (lo, hi) = self.profile.support();
        let l1 = self.profile.abs_integral(lo, hi);
        AtomCheck {
            support_ok: lo >= self.lo && hi <= self.hi && self.lo >= 0.0 && self.hi <= 1.0,
            sup_ratio: self.profile.sup_abs() * self.len(),
            mean: if l1 > 0.0 { self.profile.integral(lo, hi) / l1 } else { 0.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedAtom {
    pub eta: f64,
    pub level: i32,
    pub atom: Atom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicDecomposition {
    /// `∫ f`, the weight of the constant atom.
    pub eta0: f64,
    pub atoms: Vec<WeightedAtom>,
    /// Power of two scaling every level: `η = C 2^r |Γ|`.
    pub c: f64,
    pub r_min: i32,
    pub r_max: i32,
    /// The level cap was reached before `E_r` became empty.
    pub truncated: bool,
    pub s_norm1: f64,
    /// `‖f_N - η_0 - Σ η φ‖_1` where `f_N = Σ a_n f_n` is the decomposed function.
    pub reconstruction_error: f64,
    /// `‖f - f_N‖_1` when the expansion was computed from a function `f`.
    pub projection_error: Option<f64>,
}

impl AtomicDecomposition {
    /// `Σ |η|`, constant atom included.
    pub fn weight_sum(&self) -> f64 {
        self.eta0.abs() + self.atoms.iter().map(|a| a.eta.abs()).sum::<f64>()
    }

    pub fn all_atoms_valid(&self) -> bool {
        self.atoms.iter().all(|a| a.atom.check().passes(a.atom.kind))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eta0 + self.atoms.iter().map(|a| a.eta * a.atom.eval(x)).sum::<f64>()
    }
}

/// Components of `[M 1_E > c]` over intervals inside `[0, 1]`, for `E` a sorted disjoint
/// union of closed intervals.
pub(crate) fn maximal_superlevel(e: &[(f64, f64)], c: f64) -> Vec<(f64, f64)> {
    let mut raw = Vec::new();
    for i in 0..e.len() {
        let mut mass = 0.0;
        for j in i..e.len() {
            mass += e[j].1 - e[j].0;
            let (a, b) = (e[i].0, e[j].1);
            if mass > c * (b - a) {
                raw.push(((b - mass / c).max(0.0), (a + mass / c).min(1.0)));
            }
        }
    }
    merge(raw)
}

fn merge(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (lo, hi) in v {
        match out.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

/// Clips each component of `inner` to the component of `outer` containing its midpoint.
fn nest(inner: Vec<(f64, f64)>, outer: &[(f64, f64)]) -> Vec<(f64, f64)> {
    inner
        .into_iter()
        .filter_map(|(lo, hi)| {
            let mid = 0.5 * (lo + hi);
            outer
                .iter()
                .find(|o| o.0 <= mid && mid <= o.1)
                .map(|o| (lo.max(o.0), hi.min(o.1)))
                .filter(|(a, b)| b > a)
        })
        .collect()
}

/// `g_{r+1} - avg_Γ f` on `Γ`, where `g_{r+1}` averages `f` over each component of
/// `inner` and equals `f` elsewhere.
fn level_difference(f: &PiecewisePoly, gamma: (f64, f64), inner: &[(f64, f64)]) -> Result<PiecewisePoly> {
    let avg = f.integral(gamma.0, gamma.1) / (gamma.1 - gamma.0);
    let inside: Vec<(f64, f64)> = inner.iter().copied().filter(|c| c.0 >= gamma.0 && c.1 <= gamma.1).collect();
    let mut breaks: Vec<f64> = f.breaks().iter().copied().filter(|&b| b > gamma.0 && b < gamma.1).collect();
    breaks.extend(inside.iter().flat_map(|c| [c.0, c.1]));
    breaks.extend([gamma.0, gamma.1]);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut pieces = Vec::with_capacity(breaks.len() - 1);
    for w in breaks.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        match inside.iter().find(|c| c.0 <= mid && mid <= c.1) {
            Some(c) => pieces.push(vec![f.integral(c.0, c.1) / (c.1 - c.0) - avg]),
            None => {
                let local = PiecewisePoly::from_fn(vec![w[0], w[1]], f.degree(), |x| f.eval_clamped(x, mid) - avg)?;
                pieces.push(local.pieces()[0].clone());
            }
        }
    }
    let delta = PiecewisePoly::new(breaks, pieces)?;
    let drift = delta.integral(gamma.0, gamma.1) / (gamma.1 - gamma.0);
    Ok(delta.shifted(-drift))
}

/// Superlevel set `[S > t]` as the union of cells whose midpoint exceeds `t`.
fn superlevel(cells: &[(f64, f64, f64)], t: f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for &(a, b, s) in cells {
        if s > t * (1.0 + 1e-12) {
            match out.last_mut() {
                Some(last) if last.1 == a => last.1 = b,
                _ => out.push((a, b)),
            }
        }
    }
    out
}

fn covers_unit(b: &[(f64, f64)]) -> bool {
    b.len() == 1 && b[0].0 <= 0.0 && b[0].1 >= 1.0
}

/// Calderon-Zygmund style decomposition of `f_N = Σ a_n f_n` into atoms, driven by the
/// superlevel sets of its maximal function.
pub fn atomic_decompose(e: &Expansion, levels: usize, c_threshold: f64) -> Result<AtomicDecomposition> {
    if !(c_threshold > 0.0 && c_threshold <= 0.5) {
        return Err(Error::Contract(format!("c_threshold {c_threshold} outside (0, 1/2]")));
    }
    let f = &PiecewisePoly::from_spline(&e.sum());
    let projection_error = e.source().map(|src| l1_distance(src, f));
    let synth = e.synthesis();
    let mut cells = Vec::new();
    let mut vals = Vec::new();
    for (_, a, b) in synth.spans() {
        let h = (b - a) / CELLS_PER_SPAN as f64;
        for p in 0..CELLS_PER_SPAN {
            let lo = a + h * p as f64;
            let hi = if p + 1 == CELLS_PER_SPAN { b } else { lo + h };
            synth.member_values(0.5 * (lo + hi), &mut vals);
            cells.push((lo, hi, e.maximal_at(&vals)));
        }
    }
    let eta0 = f.integral(0.0, 1.0);
    let s_norm1 = max_norm1(e, 1e-4);
    let b_of = |r: i32| maximal_superlevel(&superlevel(&cells, 2f64.powi(r)), c_threshold);

    let mut r_min = 0;
    while !covers_unit(&b_of(r_min)) {
        if r_min <= LOWEST_LEVEL || cells.iter().all(|c| c.2 == 0.0) {
            break;
        }
        r_min -= 1;
    }
    let cap = levels as i32;
    let mut diffs: Vec<(i32, (f64, f64), PiecewisePoly)> = Vec::new();
    let mut current = if covers_unit(&b_of(r_min)) { vec![(0.0, 1.0)] } else { vec![] };
    let mut r = r_min;
    let mut truncated = false;
    while !current.is_empty() {
        if r >= cap {
            truncated = true;
            break;
        }
        let next = nest(b_of(r + 1), &current);
        let level: Vec<_> = current
            .par_iter()
            .map(|&gamma| level_difference(f, gamma, &next).map(|d| (r, gamma, d)))
            .collect::<Result<_>>()?;
        diffs.extend(level);
        current = next;
        r += 1;
    }
    let scale = f.abs_integral(0.0, 1.0).max(f64::MIN_POSITIVE);
    let diffs: Vec<_> = diffs
        .into_iter()
        .map(|(r, g, d)| {
            let sup = d.sup_abs();
            (r, g, d, sup)
        })
        .filter(|t| t.3 * (t.1 .1 - t.1 .0) > NEGLIGIBLE * scale)
        .collect();
    let needed = diffs.iter().map(|(r, _, _, sup)| sup / 2f64.powi(*r)).fold(0.0, f64::max);
    let c = if needed > 0.0 { 2f64.powi(needed.log2().ceil() as i32) } else { 1.0 };
    let c = if diffs.iter().all(|(r, g, _, sup)| sup / (c * 2f64.powi(*r) * (g.1 - g.0)) <= 1.0 / (g.1 - g.0)) {
        c
    } else {
        2.0 * c
    };
    let atoms: Vec<WeightedAtom> = diffs
        .into_iter()
        .map(|(r, g, d, _)| {
            let eta = c * 2f64.powi(r) * (g.1 - g.0);
            WeightedAtom {
                eta,
                level: r,
                atom: Atom { kind: AtomKind::MeanZero, lo: g.0, hi: g.1, profile: d.scaled(1.0 / eta) },
            }
        })
        .collect();
    let mut dec = AtomicDecomposition {
        eta0,
        atoms,
        c,
        r_min,
        r_max: r - 1,
        truncated,
        s_norm1,
        reconstruction_error: 0.0,
        projection_error,
    };
    dec.reconstruction_error = reconstruction_error(f, &dec);
    Ok(dec)
}

fn l1_distance(f: &PiecewisePoly, g: &PiecewisePoly) -> f64 {
    let mut pts: Vec<f64> = vec![0.0, 1.0];
    pts.extend(f.breaks().iter().chain(g.breaks()).copied());
    pts.retain(|x| (0.0..=1.0).contains(x));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let deg = f.degree().max(g.degree());
    pts.par_windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            quadrature::integrate_abs(|x| f.eval_clamped(x, mid) - g.eval_clamped(x, mid), w[0], w[1], deg)
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

fn reconstruction_error(f: &PiecewisePoly, dec: &AtomicDecomposition) -> f64 {
    let mut pts: Vec<f64> = vec![0.0, 1.0];
    pts.extend(f.breaks().iter().copied());
    for a in &dec.atoms {
        pts.extend(a.atom.profile.breaks().iter().copied());
    }
    pts.retain(|x| (0.0..=1.0).contains(x));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let deg = f.degree().max(dec.atoms.iter().map(|a| a.atom.profile.degree()).max().unwrap_or(0));
    pts.par_windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let live: Vec<&WeightedAtom> =
                dec.atoms.iter().filter(|a| a.atom.lo <= mid && mid <= a.atom.hi).collect();
            quadrature::integrate_abs(
                |x| {
                    f.eval_clamped(x, mid)
                        - dec.eta0
                        - live.iter().map(|a| a.eta * a.atom.profile.eval_clamped(x, mid)).sum::<f64>()
                },
                w[0],
                w[1],
                deg,
            )
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// Seeded corpus of mean-zero atoms on dyadic intervals of level 2 to 5, each with a random
/// piecewise-constant profile on 2, 4 or 8 equal cells, scaled so that `‖a‖_∞ = |Γ|^{-1}`.
pub fn atom_corpus(count: usize, seed: u64) -> Vec<Atom> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let level = rng.gen_range(2..=5);
            let m = 1u32 << level;
            let pos = rng.gen_range(0..m);
            let (lo, hi) = (pos as f64 / m as f64, (pos + 1) as f64 / m as f64);
            let cells = 1usize << rng.gen_range(1..=3);
            let mut v: Vec<f64> = (0..cells).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mean = v.iter().sum::<f64>() / cells as f64;
            v.iter_mut().for_each(|x| *x -= mean);
            let sup = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let scale = 1.0 / ((hi - lo) * sup);
            v.iter_mut().for_each(|x| *x *= scale);
            let breaks = (0..=cells).map(|i| lo + (hi - lo) * i as f64 / cells as f64).collect();
            Atom { kind: AtomKind::MeanZero, lo, hi, profile: PiecewisePoly::piecewise_constant(breaks, v).expect("valid breaks") }
        })
        .collect()
}
