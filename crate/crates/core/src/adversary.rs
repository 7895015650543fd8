//! Knot sequences that are `k`-regular but not `(k-1)`-regular, built so that a single
//! dipole atom has an expansion whose largest-term function grows with the number of
//! refinement stages.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{expand, largest_term_norm1, sq_norm1, Atom, Synthesis};
use crate::error::{Error, Result};
use crate::knotseq::{regularity_parameter, KnotSequence};
use crate::orthosys::build_system;
use crate::stats::linear_fit;

/// Depth of the dyadic skeleton the construction starts from.
pub const BASE_LEVEL: u32 = 3;
const BASE_GAP: f64 = 1.0 / (1u32 << BASE_LEVEL) as f64;
const SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversarialConfig {
    pub k: usize,
    /// Target bound for the `k`-regularity parameter.
    pub gamma: f64,
    /// Number of stages.
    pub ell: usize,
    pub a: f64,
    /// Length of the cluster `Λ_0`.
    pub delta: f64,
    pub seed: u64,
}

impl Default for AdversarialConfig {
    fn default() -> Self {
        AdversarialConfig { k: 2, gamma: 4.0, ell: 4, a: 2.0, delta: 1e-4, seed: 0 }
    }
}

impl AdversarialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidOrder { got: self.k, min: 2 });
        }
        let bad = |what: &str| Err(Error::Contract(format!("adversarial config: {what}")));
        if !(self.gamma > 1.0) {
            return bad("gamma must exceed 1");
        }
        if self.ell < 1 {
            return bad("at least one stage is required");
        }
        if !(self.a >= 2.0) {
            return bad("A must be at least 2");
        }
        if !(self.delta > 0.0 && self.delta < BASE_GAP) {
            return bad("delta must lie in (0, 1/8)");
        }
        Ok(())
    }

    /// Largest number of stages whose intervals stay at least `A δ` long.
    pub fn max_feasible_ell(&self) -> usize {
        let room = (BASE_GAP - self.delta) / (self.a * self.delta);
        if room < 1.0 {
            0
        } else {
            room.log2().floor() as usize
        }
    }
}

/// Largest `δ` for which `ell` stages are feasible with the given `A`.
pub fn max_feasible_delta(ell: usize, a: f64) -> f64 {
    BASE_GAP / (a * 2f64.powi(ell as i32) + 1.0)
}

/// One refinement stage: the point inserted at grid `T_n` sits at `tau[i]`, splitting the
/// previous left interval into `left = L_j` and `right = R_j`; `lambda` is the
/// `(k-1)`-interval ending where `left` starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub n: usize,
    pub i: usize,
    pub lambda: (f64, f64),
    pub left: (f64, f64),
    pub right: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialSequence {
    pub seq: KnotSequence,
    pub stages: Vec<Stage>,
}

fn dyadic_skeleton() -> Vec<f64> {
    let mut pts = Vec::new();
    for level in 1..=BASE_LEVEL {
        let m = 1u32 << level;
        pts.extend((1..m).step_by(2).map(|j| j as f64 / m as f64));
    }
    pts
}

/// Reads the stage at grid `T_n` off the raw knots.
pub fn stage_at(seq: &KnotSequence, n: usize) -> Result<Stage> {
    let grid = seq.grid(n)?;
    let k = seq.order();
    let t = seq.point(n)?;
    let tau = grid.tau();
    let i = grid.last_index_of(t).expect("new point lies in its grid");
    if i < k + 1 || i + 1 >= tau.len() {
        return Err(Error::Contract(format!("point {t} of T_{n} has no full stage neighborhood")));
    }
    Ok(Stage {
        n,
        i,
        lambda: (tau[i - k], tau[i - 1]),
        left: (tau[i - 1], tau[i]),
        right: (tau[i], tau[i + 1]),
    })
}

pub fn generate(cfg: &AdversarialConfig) -> Result<AdversarialSequence> {
    cfg.validate()?;
    let max_ell = cfg.max_feasible_ell();
    if cfg.ell > max_ell {
        return Err(Error::Infeasible {
            reason: format!("intervals shrink below A*delta = {} after {max_ell} stages", cfg.a * cfg.delta),
            max_ell,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let m = 1u32 << BASE_LEVEL;
    let c = rng.gen_range(2..=m - 2) as f64 / m as f64;
    let mut points = dyadic_skeleton();
    let top = c + cfg.delta;
    points.extend((1..cfg.k).map(|j| c + cfg.delta * j as f64 / (cfg.k - 1) as f64));
    let mut left_len = c + BASE_GAP - top;
    let mut stage_points = Vec::with_capacity(cfg.ell);
    for _ in 0..cfg.ell {
        left_len *= 0.5;
        let p = top + left_len;
        points.push(2.0 * c - p);
        points.push(p);
        stage_points.push(points.len() + 1);
    }
    let seq = KnotSequence::new(cfg.k, points)?;
    let gamma = regularity_parameter(&seq, cfg.k, seq.max_n())?.gamma;
    if gamma > cfg.gamma {
        return Err(Error::Infeasible {
            reason: format!("k-regularity parameter {gamma} exceeds target {}", cfg.gamma),
            max_ell,
        });
    }
    let stages = stage_points.into_iter().map(|n| stage_at(&seq, n)).collect::<Result<_>>()?;
    Ok(AdversarialSequence { seq, stages })
}

/// Same size as the adversarial sequence with the same dyadic skeleton, refined by
/// repeatedly bisecting the leftmost longest gap.
pub fn control_sequence(adv: &AdversarialSequence) -> Result<KnotSequence> {
    let mut points = dyadic_skeleton();
    let mut sorted: Vec<f64> = [0.0, 1.0].into_iter().chain(points.iter().copied()).collect();
    sorted.sort_by(f64::total_cmp);
    while points.len() < adv.seq.points().len() {
        let (idx, _) = sorted
            .windows(2)
            .enumerate()
            .fold((0, 0.0), |best, (i, w)| if w[1] - w[0] > best.1 { (i, w[1] - w[0]) } else { best });
        let mid = 0.5 * (sorted[idx] + sorted[idx + 1]);
        sorted.insert(idx + 1, mid);
        points.push(mid);
    }
    KnotSequence::new(adv.seq.order(), points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub passed: bool,
    /// First offending stage pair `(i, j)` or, for single-stage items, `(j, j)`.
    pub witness: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    /// Items one to six, in order.
    pub items: [PropertyCheck; 6],
}

impl LemmaReport {
    pub fn all_passed(&self) -> bool {
        self.items.iter().all(|c| c.passed)
    }
}

fn check_pairs(n: usize, bad: impl Fn(usize, usize) -> bool) -> PropertyCheck {
    let witness = (0..n).flat_map(|j| (0..j).map(move |i| (i, j))).find(|&(i, j)| bad(i, j));
    PropertyCheck { passed: witness.is_none(), witness }
}

fn check_each(n: usize, bad: impl Fn(usize) -> bool) -> PropertyCheck {
    let witness = (0..n).find(|&j| bad(j)).map(|j| (j, j));
    PropertyCheck { passed: witness.is_none(), witness }
}

/// Re-derives every stage from the knots alone and checks the six interval properties.
pub fn verify_lemma_properties(adv: &AdversarialSequence, gamma: f64, a: f64) -> Result<LemmaReport> {
    if adv.stages.is_empty() {
        return Err(Error::Contract("no stages to verify".into()));
    }
    let k = adv.seq.order();
    let st: Vec<Stage> = adv.stages.iter().map(|s| stage_at(&adv.seq, s.n)).collect::<Result<_>>()?;
    let before: Vec<f64> = st
        .iter()
        .map(|s| {
            let tau = adv.seq.grid(s.n).expect("stage grid exists").tau().to_vec();
            tau[s.i - k] - tau[s.i - k - 1]
        })
        .collect();
    let len = |iv: (f64, f64)| iv.1 - iv.0;
    let le = |x: f64, y: f64| x <= y * (1.0 + SLACK);
    let n = st.len();
    Ok(LemmaReport {
        items: [
            check_pairs(n, |i, j| st[i].right.0 < st[j].right.1 && st[j].right.0 < st[i].right.1),
            check_pairs(n, |i, j| st[i].lambda != st[j].lambda),
            check_each(n, |j| {
                let l = len(st[j].left);
                !(le(before[j], (2.0 * gamma - 1.0) * l) && le(l / (2.0 * gamma), before[j]))
            }),
            check_each(n, |j| !le(len(st[j].right), (2.0 * gamma - 1.0) * len(st[j].left))),
            check_each(n, |j| !le(len(st[j].left), 2.0 * (gamma + 1.0) * k as f64 * len(st[j].right))),
            check_each(n, |j| !le(a * len(st[j].lambda), len(st[j].left).min(len(st[j].right)))),
        ],
    })
}

/// The dipole atom centred at the right end of `Λ_0` with half-width `2|Λ_0|`.
pub fn adversarial_atom(adv: &AdversarialSequence) -> Result<Atom> {
    let first = adv.stages.first().ok_or_else(|| Error::Contract("no stages".into()))?;
    let width = first.lambda.1 - first.lambda.0;
    if !(width > 0.0) {
        return Err(Error::Contract("the cluster has zero length".into()));
    }
    Atom::dipole(first.lambda.1, 2.0 * width)
}

/// One row of the growth table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub ell: usize,
    /// `∫ sup_n |a_n(φ) f_n|`.
    pub g: f64,
    /// `Σ_j ∫_{R_j} |a_{n_j}(φ) f_{n_j}|`.
    pub stage_sum: f64,
    /// `min_j |a_{n_j}(φ)| |L_j|^{1/2}`.
    pub min_coeff_product: f64,
}

/// The same atom expanded against the bisection control sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlRow {
    pub ell: usize,
    pub n: usize,
    /// `‖P φ‖_1`.
    pub square_norm1: f64,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub config: AdversarialConfig,
    pub rows: Vec<GrowthRow>,
    pub control: Vec<ControlRow>,
    pub slope: f64,
    pub r2: f64,
    /// `max / min` of the control square-function norms.
    pub control_band: f64,
}

fn growth_row(adv: &AdversarialSequence, atom: &Atom, tol: f64) -> Result<GrowthRow> {
    let sys = build_system(&adv.seq, adv.seq.max_n())?;
    let synth = Synthesis::new(&sys)?;
    let e = expand(&atom.profile, &synth);
    let k = adv.seq.order();
    let mut stage_sum = 0.0;
    let mut min_prod = f64::INFINITY;
    for s in &adv.stages {
        let a = e.coeffs()[s.n + k - 2];
        let f = sys.function(s.n).expect("stage function exists");
        stage_sum += a.abs() * f.abs_integral(s.right.0, s.right.1);
        min_prod = min_prod.min(a.abs() * (s.left.1 - s.left.0).sqrt());
    }
    Ok(GrowthRow {
        ell: adv.stages.len(),
        g: largest_term_norm1(&e, tol),
        stage_sum,
        min_coeff_product: min_prod,
    })
}

fn control_row(adv: &AdversarialSequence, atom: &Atom, tol: f64) -> Result<ControlRow> {
    let seq = control_sequence(adv)?;
    let sys = build_system(&seq, seq.max_n())?;
    let synth = Synthesis::new(&sys)?;
    let e = expand(&atom.profile, &synth);
    Ok(ControlRow {
        ell: adv.stages.len(),
        n: seq.max_n(),
        square_norm1: sq_norm1(&e, tol),
        g: largest_term_norm1(&e, tol),
    })
}

/// Runs the construction for every `ell` in the ladder with the base configuration's `δ`,
/// `A`, `γ` and seed, so that every run uses the same atom.
pub fn divergence_experiment(ladder: &[usize], base: &AdversarialConfig, tol: f64) -> Result<DivergenceReport> {
    if ladder.is_empty() {
        return Err(Error::Contract("empty ladder".into()));
    }
    let advs: Vec<AdversarialSequence> = ladder
        .iter()
        .map(|&ell| generate(&AdversarialConfig { ell, ..*base }))
        .collect::<Result<_>>()?;
    let atom = adversarial_atom(&advs[0])?;
    let rows: Vec<GrowthRow> = advs.par_iter().map(|a| growth_row(a, &atom, tol)).collect::<Result<_>>()?;
    let control: Vec<ControlRow> = advs.par_iter().map(|a| control_row(a, &atom, tol)).collect::<Result<_>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.ell as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.stage_sum).collect();
    let fit = linear_fit(&xs, &ys);
    let (lo, hi) = control
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), c| (lo.min(c.square_norm1), hi.max(c.square_norm1)));
    Ok(DivergenceReport {
        config: *base,
        rows,
        control,
        slope: fit.slope,
        r2: fit.r2,
        control_band: hi / lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_stage_passes() {
        let cfg = AdversarialConfig { ell: 1, delta: 1e-4, ..Default::default() };
        let adv = generate(&cfg).unwrap();
        assert_eq!(adv.stages.len(), 1);
        assert!(verify_lemma_properties(&adv, cfg.gamma, cfg.a).unwrap().all_passed());
    }

    #[test]
    fn too_many_stages_are_infeasible() {
        let cfg = AdversarialConfig { ell: 20, delta: 0.1, ..Default::default() };
        match generate(&cfg) {
            Err(Error::Infeasible { max_ell, .. }) => assert_eq!(max_ell, 0),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn atom_is_centred_on_cluster() {
        let cfg = AdversarialConfig { ell: 3, delta: 1e-4, ..Default::default() };
        let adv = generate(&cfg).unwrap();
        let atom = adversarial_atom(&adv).unwrap();
        let tau = adv.stages[0].lambda.1;
        assert!((atom.lo - (tau - 2e-4)).abs() < 1e-15 && (atom.hi - (tau + 2e-4)).abs() < 1e-15);
        assert!((atom.eval(tau - 1e-4) - 2500.0).abs() < 1e-6);
    }
}
