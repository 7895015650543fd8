//! Admissible knot sequences, their grids, and regularity diagnostics.
//!
//! Indices are 0-based throughout: `grid.tau()[i]` is the knot the literature writes as
//! `τ_{n,i+1}`, and the interval `D^{(ℓ)}_{n,i}` of this crate is `[tau[i], tau[i + ℓ]]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKnots", into = "RawKnots")]
pub struct KnotSequence {
    order: usize,
    points: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawKnots {
    k: usize,
    points: Vec<f64>,
}

impl TryFrom<RawKnots> for KnotSequence {
    type Error = Error;
    fn try_from(raw: RawKnots) -> Result<Self> {
        KnotSequence::new(raw.k, raw.points)
    }
}

impl From<KnotSequence> for RawKnots {
    fn from(seq: KnotSequence) -> Self {
        RawKnots { k: seq.order, points: seq.points }
    }
}

impl KnotSequence {
    /// `points[0]` is `t_2`, the first point inserted after the endpoints.
    pub fn new(order: usize, points: Vec<f64>) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidOrder { got: order, min: 2 });
        }
        for (index, &value) in points.iter().enumerate() {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::PointOutOfRange { index, value });
            }
        }
        let mut sorted = points.clone();
        sorted.sort_by(f64::total_cmp);
        for run in sorted.chunk_by(|a, b| a == b) {
            if run.len() > order {
                return Err(Error::Multiplicity { value: run[0], count: run.len(), k: order });
            }
        }
        Ok(KnotSequence { order, points })
    }

    /// Dyadic midpoints `1/2, 1/4, 3/4, 1/8, ...`, the first `count` of them.
    pub fn dyadic(order: usize, count: usize) -> Result<Self> {
        let mut points = Vec::with_capacity(count);
        let mut level = 1u32;
        while points.len() < count {
            let denom = 2f64.powi(level as i32);
            let mut num = 1u64;
            while (num as f64) < denom && points.len() < count {
                points.push(num as f64 / denom);
                num += 2;
            }
            level += 1;
        }
        KnotSequence::new(order, points)
    }

    /// The points `j/(m+1)`, `j = 1..=m`, inserted left to right.
    pub fn uniform(order: usize, m: usize) -> Result<Self> {
        let h = 1.0 / (m + 1) as f64;
        KnotSequence::new(order, (1..=m).map(|j| j as f64 * h).collect())
    }

    /// Uniform random points; with probability `repeat` a point repeats an earlier one
    /// whose multiplicity is still below the order.
    pub fn random<R: Rng>(order: usize, count: usize, repeat: f64, rng: &mut R) -> Result<Self> {
        let mut points: Vec<f64> = Vec::with_capacity(count);
        while points.len() < count {
            if !points.is_empty() && rng.gen::<f64>() < repeat {
                let p = points[rng.gen_range(0..points.len())];
                if points.iter().filter(|&&q| q == p).count() < order {
                    points.push(p);
                    continue;
                }
            }
            let p: f64 = rng.gen();
            if p > 0.0 {
                points.push(p);
            }
        }
        KnotSequence::new(order, points)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Largest `n` for which `T_n` is defined.
    pub fn max_n(&self) -> usize {
        self.points.len() + 1
    }

    /// The point `t_n` inserted when passing from `T_{n-1}` to `T_n`.
    pub fn point(&self, n: usize) -> Result<f64> {
        self.check_n(n)?;
        Ok(self.points[n - 2])
    }

    fn check_n(&self, n: usize) -> Result<()> {
        if n < 2 || n > self.max_n() {
            return Err(Error::GridIndex { n, min: 2, max: self.max_n() });
        }
        Ok(())
    }

    pub fn grid(&self, n: usize) -> Result<Grid> {
        self.check_n(n)?;
        Ok(self.grid_unchecked(n))
    }

    /// `T_n` for `1 <= n <= max_n`; `T_1` has no interior knots.
    pub(crate) fn grid_unchecked(&self, n: usize) -> Grid {
        let mut interior = self.points[..n.saturating_sub(1)].to_vec();
        interior.sort_by(f64::total_cmp);
        Grid::from_interior(self.order, n, &interior)
    }

    /// All grids `T_2, ..., T_{n_max}`, built incrementally.
    pub fn grids(&self, n_max: usize) -> Result<Vec<Grid>> {
        self.check_n(n_max)?;
        let mut interior: Vec<f64> = Vec::with_capacity(n_max);
        let mut out = Vec::with_capacity(n_max - 1);
        for n in 2..=n_max {
            let t = self.points[n - 2];
            let pos = interior.partition_point(|&x| x <= t);
            interior.insert(pos, t);
            out.push(Grid::from_interior(self.order, n, &interior));
        }
        Ok(out)
    }
}

pub fn make_grid(seq: &KnotSequence, n: usize) -> Result<Grid> {
    seq.grid(n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    order: usize,
    n: usize,
    tau: Vec<f64>,
}

impl Grid {
    pub(crate) fn from_interior(order: usize, n: usize, interior: &[f64]) -> Self {
        let mut tau = Vec::with_capacity(interior.len() + 2 * order);
        tau.extend(std::iter::repeat_n(0.0, order));
        tau.extend_from_slice(interior);
        tau.extend(std::iter::repeat_n(1.0, order));
        Grid { order, n, tau }
    }

    /// Grid from a full knot vector with `k`-fold endpoints.
    pub fn from_tau(order: usize, n: usize, tau: Vec<f64>) -> Result<Self> {
        if tau.len() != n + 2 * order - 1 {
            return Err(Error::Contract(format!("{} knots do not form T_{n} of order {order}", tau.len())));
        }
        if tau[..order].iter().any(|&t| t != 0.0) || tau[tau.len() - order..].iter().any(|&t| t != 1.0) {
            return Err(Error::Contract("endpoints must have multiplicity k".into()));
        }
        if tau.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Contract("knots must be nondecreasing".into()));
        }
        Ok(Grid { order, n, tau })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// Dimension of the spline space `S_n`, i.e. `n + k - 1`.
    pub fn dim(&self) -> usize {
        self.tau.len() - self.order
    }

    /// Valid range of `i` for `D^{(ℓ)}_{n,i}`.
    pub fn interval_range(&self, ell: usize) -> std::ops::RangeInclusive<usize> {
        (self.order - ell)..=(self.tau.len() - self.order - 1)
    }

    pub fn interval(&self, i: usize, ell: usize) -> Result<GridInterval> {
        if ell == 0 || ell > self.order {
            return Err(Error::EllOutOfRange { ell, k: self.order });
        }
        if !self.interval_range(ell).contains(&i) {
            return Err(Error::IndexOutOfRange { index: i, dim: self.tau.len() });
        }
        Ok(GridInterval { n: self.n, i, ell, lo: self.tau[i], hi: self.tau[i + ell] })
    }

    /// Position in `tau` of `t`, taking the last of equal knots.
    pub fn last_index_of(&self, t: f64) -> Option<usize> {
        let p = self.tau.partition_point(|&x| x <= t);
        (p > 0 && self.tau[p - 1] == t).then(|| p - 1)
    }

    pub fn multiplicity(&self, x: f64) -> usize {
        self.tau.partition_point(|&t| t <= x) - self.tau.partition_point(|&t| t < x)
    }

    /// Number of knots (with multiplicity) in `[a, b]`, endpoints included as asked.
    pub fn count_in(&self, a: f64, b: f64, include_a: bool, include_b: bool) -> usize {
        let lo = if include_a {
            self.tau.partition_point(|&t| t < a)
        } else {
            self.tau.partition_point(|&t| t <= a)
        };
        let hi = if include_b {
            self.tau.partition_point(|&t| t <= b)
        } else {
            self.tau.partition_point(|&t| t < b)
        };
        hi.saturating_sub(lo)
    }

    /// Distinct knot values, including 0 and 1.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.tau.clone();
        b.dedup();
        b
    }

    /// Worst neighbouring ratio of `D^{(ℓ)}` lengths in this grid, with its witness `i`.
    pub fn neighbor_ratio(&self, ell: usize) -> (f64, Option<usize>) {
        let range = self.interval_range(ell);
        let mut worst = 1.0;
        let mut witness = None;
        for i in *range.start()..*range.end() {
            let r = pair_ratio(self.len_of(i, ell), self.len_of(i + 1, ell));
            if r > worst {
                worst = r;
                witness = Some(i);
            }
        }
        (worst, witness)
    }

    fn len_of(&self, i: usize, ell: usize) -> f64 {
        self.tau[i + ell] - self.tau[i]
    }
}

fn pair_ratio(a: f64, b: f64) -> f64 {
    match (a > 0.0, b > 0.0) {
        (false, false) => 1.0,
        (true, true) => (a / b).max(b / a),
        _ => f64::INFINITY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridInterval {
    pub n: usize,
    pub i: usize,
    pub ell: usize,
    pub lo: f64,
    pub hi: f64,
}

impl GridInterval {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, other: &GridInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn as_span(&self) -> Span {
        Span::Interval(self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub ell: usize,
    pub gamma: f64,
    /// Grid index `n` and interval index `i` of the worst pair `(D_i, D_{i+1})`.
    pub witness: Option<(usize, usize)>,
}

/// Smallest `γ` making the sequence `ℓ`-regular over `T_2, ..., T_{n_max}`.
pub fn regularity_parameter(seq: &KnotSequence, ell: usize, n_max: usize) -> Result<RegularityReport> {
    let k = seq.order();
    if ell == 0 || ell > k {
        return Err(Error::EllOutOfRange { ell, k });
    }
    seq.check_n(n_max)?;
    let mut report = RegularityReport { ell, gamma: 1.0, witness: None };
    let mut tau = seq.grid_unchecked(1).tau;
    for n in 2..=n_max {
        let t = seq.points[n - 2];
        let p = tau.partition_point(|&x| x <= t);
        tau.insert(p, t);
        let first = k - ell;
        let last = tau.len() - k - 2;
        let (lo, hi) = if n == 2 {
            (first, last)
        } else {
            (p.saturating_sub(ell + 1).max(first), p.min(last))
        };
        for i in lo..=hi {
            let r = pair_ratio(tau[i + ell] - tau[i], tau[i + 1 + ell] - tau[i + 1]);
            if r > report.gamma {
                report.gamma = r;
                report.witness = Some((n, i));
            }
        }
    }
    Ok(report)
}

/// Checks `|V_{w+2ℓ-1}| <= γ^ℓ/(1+γ^ℓ) |V_w|` on every window of `2ℓ` consecutive members.
pub fn nested_decay_check(chain: &[GridInterval], gamma: f64, ell: usize) -> Result<bool> {
    if ell == 0 {
        return Err(Error::Contract("ell must be positive".into()));
    }
    if chain.len() < 2 * ell {
        return Err(Error::Contract(format!(
            "chain of length {} is shorter than 2ell = {}",
            chain.len(),
            2 * ell
        )));
    }
    for (m, pair) in chain.windows(2).enumerate() {
        if !pair[0].contains(&pair[1]) {
            return Err(Error::Contract(format!("chain member {} is not inside member {m}", m + 1)));
        }
    }
    let g = gamma.powi(ell as i32);
    let factor = if g.is_finite() { g / (1.0 + g) } else { 1.0 };
    Ok(chain
        .windows(2 * ell)
        .all(|w| w[0].len() > w[2 * ell - 1].len() && w[2 * ell - 1].len() <= factor * w[0].len() * (1.0 + 1e-12)))
}

/// Samples a chain `D^{(ℓ)}_{n_1,i_1} ⊋ D^{(ℓ)}_{n_2,i_2} ⊋ ...` with `n_1 < n_2 < ...` from
/// precomputed grids (`grids[m]` is `T_{m+2}`). Returns `None` if the walk gets stuck.
pub fn random_chain<R: Rng>(grids: &[Grid], ell: usize, len: usize, rng: &mut R) -> Option<Vec<GridInterval>> {
    let last = grids.len();
    let start = rng.gen_range(0..last.max(4) / 4).min(last - 1);
    let g = &grids[start];
    let range = g.interval_range(ell);
    let i = rng.gen_range(range);
    let mut chain = vec![g.interval(i, ell).ok()?];
    let mut idx = start;
    let mut candidates = Vec::new();
    while chain.len() < len {
        let cur = *chain.last().expect("chain is nonempty");
        candidates.clear();
        while candidates.is_empty() {
            idx += 1;
            if idx >= last {
                return None;
            }
            let g = &grids[idx];
            let tau = g.tau();
            let range = g.interval_range(ell);
            let from = tau.partition_point(|&x| x < cur.lo).max(*range.start());
            for i in from..=*range.end() {
                if tau[i] > cur.hi {
                    break;
                }
                let (lo, hi) = (tau[i], tau[i + ell]);
                if lo >= cur.lo && hi <= cur.hi && (lo, hi) != (cur.lo, cur.hi) {
                    candidates.push(i);
                }
            }
        }
        let i = candidates[rng.gen_range(0..candidates.len())];
        chain.push(grids[idx].interval(i, ell).ok()?);
    }
    Some(chain)
}

/// A point or a closed interval inside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Span {
    Point(f64),
    Interval(f64, f64),
}

impl Span {
    fn bounds(&self) -> (f64, f64) {
        match *self {
            Span::Point(x) => (x, x),
            Span::Interval(a, b) => (a, b),
        }
    }
}

/// Number of grid knots, with multiplicity, between two sets.
///
/// Endpoints of interval sides are counted and a point side is not. Sets that intersect
/// give 0, except that intervals sharing only an endpoint give that endpoint's multiplicity.
pub fn count_points_between(grid: &Grid, a: Span, b: Span) -> Result<usize> {
    for s in [a, b] {
        let (lo, hi) = s.bounds();
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(Error::Contract(format!("span {s:?} is not inside [0, 1]")));
        }
    }
    let (left, right) = if a.bounds().0 <= b.bounds().0 { (a, b) } else { (b, a) };
    let (_, l_hi) = left.bounds();
    let (r_lo, _) = right.bounds();
    if l_hi > r_lo {
        return Ok(0);
    }
    let both_intervals = matches!((left, right), (Span::Interval(..), Span::Interval(..)));
    if l_hi == r_lo {
        return Ok(if both_intervals { grid.multiplicity(l_hi) } else { 0 });
    }
    let include_l = matches!(left, Span::Interval(..));
    let include_r = matches!(right, Span::Interval(..));
    Ok(grid.count_in(l_hi, r_lo, include_l, include_r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_examples() {
        let s = KnotSequence::new(2, vec![0.5]).unwrap();
        assert_eq!(s.grid(2).unwrap().tau(), &[0.0, 0.0, 0.5, 1.0, 1.0]);
        let s = KnotSequence::new(3, vec![0.5, 0.5]).unwrap();
        assert_eq!(s.grid(3).unwrap().tau(), &[0.0, 0.0, 0.0, 0.5, 0.5, 1.0, 1.0, 1.0]);
        let s = KnotSequence::new(2, vec![0.5, 0.25, 0.75]).unwrap();
        assert_eq!(s.grid(4).unwrap().tau(), &[0.0, 0.0, 0.25, 0.5, 0.75, 1.0, 1.0]);
        assert!(matches!(s.grid(1), Err(Error::GridIndex { n: 1, .. })));
    }

    #[test]
    fn rejects_inadmissible() {
        assert!(matches!(
            KnotSequence::new(2, vec![0.5, 0.5, 0.5]),
            Err(Error::Multiplicity { count: 3, .. })
        ));
        assert!(matches!(KnotSequence::new(2, vec![1.0]), Err(Error::PointOutOfRange { index: 0, .. })));
        assert!(matches!(KnotSequence::new(1, vec![]), Err(Error::InvalidOrder { .. })));
    }

    #[test]
    fn counting_examples() {
        let s = KnotSequence::new(2, vec![0.5, 0.25, 0.75]).unwrap();
        let g = s.grid(4).unwrap();
        let c = count_points_between(&g, Span::Point(0.1), Span::Interval(0.75, 1.0)).unwrap();
        assert_eq!(c, 3);
        let c = count_points_between(&g, Span::Interval(0.25, 0.5), Span::Interval(0.5, 0.75)).unwrap();
        assert_eq!(c, 1);
        let c = count_points_between(&g, Span::Interval(0.25, 0.5), Span::Interval(0.25, 0.5)).unwrap();
        assert_eq!(c, 0);
        let c = count_points_between(&g, Span::Point(0.3), Span::Point(0.3)).unwrap();
        assert_eq!(c, 0);
    }

    #[test]
    fn tiny_gap_ratio() {
        let eps = 1e-6;
        let s = KnotSequence::new(2, vec![0.5, 0.5 + eps]).unwrap();
        let r = regularity_parameter(&s, 1, 3).unwrap();
        let expected = (0.5 - eps) / eps;
        assert!((r.gamma - expected).abs() / expected < 1e-5, "{}", r.gamma);
        assert_eq!(r.witness.map(|w| w.0), Some(3));
    }

    #[test]
    fn repeated_knots_give_infinite_ratio() {
        let s = KnotSequence::new(2, vec![0.5, 0.5]).unwrap();
        assert_eq!(regularity_parameter(&s, 1, 3).unwrap().gamma, f64::INFINITY);
        assert!(regularity_parameter(&s, 2, 3).unwrap().gamma.is_finite());
        assert!(matches!(regularity_parameter(&s, 3, 3), Err(Error::EllOutOfRange { .. })));
    }

    #[test]
    fn halving_chain() {
        let s = KnotSequence::dyadic(2, 7).unwrap();
        let g2 = s.grid(2).unwrap();
        let g4 = s.grid(4).unwrap();
        let chain = [g2.interval(1, 1).unwrap(), g4.interval(1, 1).unwrap()];
        assert_eq!((chain[0].lo, chain[0].hi), (0.0, 0.5));
        assert_eq!((chain[1].lo, chain[1].hi), (0.0, 0.25));
        assert!(nested_decay_check(&chain, 1.0, 1).unwrap());
        let flat = [chain[0], chain[0]];
        assert!(!nested_decay_check(&flat, 2.0, 1).unwrap());
        let bad = [chain[1], chain[0]];
        assert!(matches!(nested_decay_check(&bad, 2.0, 1), Err(Error::Contract(_))));
    }
}
