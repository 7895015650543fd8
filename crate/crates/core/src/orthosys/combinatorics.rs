use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::OrthoSystem;
use crate::knotseq::{count_points_between, GridInterval};
use crate::quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinatoricsParams {
    /// Random intervals `V` for the off-support sum.
    pub v_samples: usize,
    /// Random intervals `Δ = D^{(k-1)}_{m,i}` for the packet sums.
    pub delta_samples: usize,
    pub seed: u64,
}

impl Default for CombinatoricsParams {
    fn default() -> Self {
        CombinatoricsParams { v_samples: 100, delta_samples: 200, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinatoricsReport {
    /// `max #{n : J_n ⊆ [x,y], |J_n| >= |[x,y]|/2}` over all knot pairs of the finest grid.
    pub max_n0: usize,
    /// `max_V |V|^{-1} Σ_{J_n ⊂ V} |J_n|^{1/2} ∫_{V^c} |f_n|`.
    pub max_v_ratio: f64,
    /// `max_Δ |Δ|^{-1} Σ_{n ∈ N(Δ)} |J_n|`.
    pub max_n_delta: f64,
    /// Largest number of members of any `N(Δ)`.
    pub max_n_delta_count: usize,
    /// `max_{Δ,ℓ} (ℓ+1)^{-2} Σ_{n ∈ M(Δ,ℓ)} |J_n| / (dist(J_n, Δ) + |Δ|)`.
    pub max_m_delta: f64,
}

fn inside(j: &GridInterval, a: f64, b: f64) -> bool {
    a <= j.lo && j.hi <= b
}

/// Counting diagnostics for the characteristic intervals of a system.
pub fn char_combinatorics(system: &OrthoSystem, params: CombinatoricsParams) -> CombinatoricsReport {
    let seq = system.seq();
    let k = seq.order();
    let n_max = system.n_max();
    let js: Vec<GridInterval> = system.functions().iter().map(|f| f.j_interval()).collect();
    let breaks = system.finest_grid().breakpoints();

    let max_n0 = (0..breaks.len())
        .into_par_iter()
        .map(|a| {
            let x = breaks[a];
            let mut best = 0;
            for &y in &breaks[a + 1..] {
                let half = 0.5 * (y - x);
                let c = js.iter().filter(|j| inside(j, x, y) && j.len() >= half).count();
                best = best.max(c);
            }
            best
        })
        .max()
        .unwrap_or(0);

    let prefixes: Vec<Vec<(f64, f64)>> = system
        .functions()
        .par_iter()
        .map(|f| {
            let mut acc = 0.0;
            let mut out = vec![(0.0, 0.0)];
            for (s, a, b) in f.basis().spans() {
                acc += quadrature::integrate_abs(|x| f.eval_in_span(s, x), a, b, k - 1);
                out.push((b, acc));
            }
            out
        })
        .collect();
    let abs_upto = |m: usize, x: f64| -> f64 {
        let pre = &prefixes[m];
        let p = pre.partition_point(|e| e.0 <= x).max(1) - 1;
        pre[p].1 + system.functions()[m].abs_integral(pre[p].0, x)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let vs: Vec<(f64, f64)> = (0..params.v_samples)
        .map(|_| {
            let (a, b): (f64, f64) = (rng.gen(), rng.gen());
            (a.min(b), a.max(b))
        })
        .filter(|(a, b)| b > a)
        .collect();
    let max_v_ratio = vs
        .par_iter()
        .map(|&(a, b)| {
            let sum: f64 = js
                .iter()
                .enumerate()
                .filter(|(_, j)| inside(j, a, b))
                .map(|(m, j)| {
                    let total = prefixes[m].last().expect("nonempty").1;
                    let outside = total - (abs_upto(m, b) - abs_upto(m, a));
                    j.len().sqrt() * outside.max(0.0)
                })
                .sum();
            sum / (b - a)
        })
        .reduce(|| 0.0, f64::max);

    let grids = seq.grids(n_max).expect("n_max is valid");
    let deltas: Vec<GridInterval> = (0..params.delta_samples)
        .filter_map(|_| {
            let g = &grids[rng.gen_range(0..grids.len())];
            let i = rng.gen_range(g.interval_range(k - 1));
            g.interval(i, k - 1).ok().filter(|d| d.len() > 0.0)
        })
        .collect();
    let delta_stats: Vec<(f64, usize, f64)> = deltas
        .par_iter()
        .map(|delta| {
            let mut n_sum = 0.0;
            let mut n_count = 0;
            let mut m_sums: std::collections::BTreeMap<usize, f64> = Default::default();
            for (m, j) in js.iter().enumerate() {
                let g = &grids[m];
                let card = g.count_in(delta.lo, delta.hi, true, true);
                if card == k && inside(j, delta.lo, delta.hi) {
                    n_sum += j.len();
                    n_count += 1;
                }
                let overlap = j.hi.min(delta.hi) - j.lo.max(delta.lo);
                if card >= k && overlap <= 0.0 {
                    let ell = count_points_between(g, delta.as_span(), j.as_span()).expect("inside [0, 1]");
                    let dist = (j.lo - delta.hi).max(delta.lo - j.hi).max(0.0);
                    *m_sums.entry(ell).or_default() += j.len() / (dist + delta.len());
                }
            }
            let m_max = m_sums
                .into_iter()
                .map(|(ell, s)| s / ((ell + 1) as f64).powi(2))
                .fold(0.0, f64::max);
            (n_sum / delta.len(), n_count, m_max)
        })
        .collect();

    CombinatoricsReport {
        max_n0,
        max_v_ratio,
        max_n_delta: delta_stats.iter().map(|s| s.0).fold(0.0, f64::max),
        max_n_delta_count: delta_stats.iter().map(|s| s.1).max().unwrap_or(0),
        max_m_delta: delta_stats.iter().map(|s| s.2).fold(0.0, f64::max),
    }
}
