//! Orthonormal spline systems: one new function per inserted knot, orthogonal to the
//! previous spline space, preceded by orthonormal polynomials.

mod combinatorics;
mod decay;

pub use combinatorics::{char_combinatorics, CombinatoricsParams, CombinatoricsReport};
pub use decay::{decay_report, system_decay, BoundKind, DecayReport, DecaySample, SystemDecayReport, Q_LADDER};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bspline::{dual_rows_with, gram, BSplineBasis, GramMatrix, Spline};
use crate::error::{Error, Result};
use crate::knotseq::{Grid, GridInterval, KnotSequence};
use crate::quadrature;

const TIE_TOL: f64 = 1e-12;

/// `√(2d+1) P_d(2x-1)`, the degree-`d` orthonormal shifted Legendre polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LegendrePoly {
    pub degree: usize,
}

impl LegendrePoly {
    pub fn eval(&self, x: f64) -> f64 {
        let t = 2.0 * x - 1.0;
        let (mut p0, mut p1) = (1.0, t);
        let p = match self.degree {
            0 => 1.0,
            1 => t,
            d => {
                for m in 1..d {
                    let m = m as f64;
                    let p2 = ((2.0 * m + 1.0) * t * p1 - m * p0) / (m + 1.0);
                    p0 = p1;
                    p1 = p2;
                }
                p1
            }
        };
        (2.0 * self.degree as f64 + 1.0).sqrt() * p
    }

    /// Coefficients of `1, x, x², ...`.
    pub fn monomial_coeffs(&self) -> Vec<f64> {
        let d = self.degree;
        let scale = (2.0 * d as f64 + 1.0).sqrt();
        (0..=d)
            .map(|i| {
                let sign = if (d + i).is_multiple_of(2) { 1.0 } else { -1.0 };
                sign * binomial(d, i) * binomial(d + i, i) * scale
            })
            .collect()
    }
}

fn binomial(n: usize, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// The `k` orthonormal polynomials of degrees `0, ..., k-1`, i.e. `f_{-k+2}, ..., f_1`.
pub fn initial_polynomials(k: usize) -> Vec<LegendrePoly> {
    (0..k).map(|degree| LegendrePoly { degree }).collect()
}

/// Coefficients `α_j`, `i0 - k <= j <= i0`, of the knot-removal functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaVector {
    pub i0: usize,
    pub first: usize,
    pub values: Vec<f64>,
}

impl AlphaVector {
    pub fn get(&self, j: usize) -> f64 {
        if j < self.first || j >= self.first + self.values.len() {
            0.0
        } else {
            self.values[j - self.first]
        }
    }

    pub fn indices(&self) -> std::ops::Range<usize> {
        self.first..self.first + self.values.len()
    }
}

pub fn alpha_coefficients(grid: &Grid, i0: usize) -> Result<AlphaVector> {
    let k = grid.order();
    let tau = grid.tau();
    if i0 < k || i0 + k >= tau.len() {
        return Err(Error::IndexOutOfRange { index: i0, dim: tau.len() });
    }
    let t0 = tau[i0];
    let mut values = Vec::with_capacity(k + 1);
    for j in i0 - k..=i0 {
        let mut v = if (j + k - i0).is_multiple_of(2) { 1.0 } else { -1.0 };
        for l in i0 + 1 - k..i0 {
            let denom = tau[l + k] - tau[l];
            if denom <= 0.0 {
                return Err(Error::Contract(format!("zero-length knot window at index {l}")));
            }
            if l < j {
                v *= (t0 - tau[l]) / denom;
            } else if l > j {
                v *= (tau[l + k] - t0) / denom;
            }
        }
        values.push(v);
    }
    Ok(AlphaVector { i0, first: i0 - k, values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicSelection {
    pub lambda0: Vec<usize>,
    pub lambda1: Vec<usize>,
    pub j0: usize,
    /// Characteristic interval `J_n = [tau[m], tau[m+1]]`.
    pub interval: GridInterval,
}

/// Selection of `Λ⁰`, `Λ¹`, `j⁰` and the characteristic interval, with the default factor 2.
pub fn characteristic_interval(grid: &Grid, alpha: &AlphaVector) -> CharacteristicSelection {
    characteristic_interval_with(grid, alpha, 2.0)
}

/// As [`characteristic_interval`] with `Λ⁰ = {j : |[τ_j, τ_{j+k}]| <= factor · min}`.
pub fn characteristic_interval_with(grid: &Grid, alpha: &AlphaVector, factor: f64) -> CharacteristicSelection {
    let k = grid.order();
    let tau = grid.tau();
    let len = |j: usize| tau[j + k] - tau[j];
    let min = alpha.indices().map(len).fold(f64::INFINITY, f64::min);
    let lambda0: Vec<usize> = alpha.indices().filter(|&j| len(j) <= factor * min).collect();
    let amax = lambda0.iter().map(|&j| alpha.get(j).abs()).fold(0.0, f64::max);
    let lambda1: Vec<usize> = lambda0
        .iter()
        .copied()
        .filter(|&j| alpha.get(j).abs() >= amax * (1.0 - TIE_TOL))
        .collect();
    let j0 = lambda1[0];
    let lmax = (j0..j0 + k).map(|m| tau[m + 1] - tau[m]).fold(0.0, f64::max);
    let m = (j0..j0 + k)
        .find(|&m| tau[m + 1] - tau[m] >= lmax * (1.0 - TIE_TOL))
        .expect("window has a longest span");
    let interval = GridInterval { n: grid.n(), i: m, ell: 1, lo: tau[m], hi: tau[m + 1] };
    CharacteristicSelection { lambda0, lambda1, j0, interval }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthoOptions {
    pub lambda_factor: f64,
}

impl Default for OrthoOptions {
    fn default() -> Self {
        OrthoOptions { lambda_factor: 2.0 }
    }
}

/// The normalized function `f_n = g / ‖g‖_2`, `g = Σ w_j N_{n,j}`.
#[derive(Debug, Clone)]
pub struct OrthoFunction {
    pub n: usize,
    pub i0: usize,
    /// Coefficients of the unnormalized `g`, signed so that `w[j0] > 0`.
    pub w: Vec<f64>,
    pub norm2: f64,
    pub alpha: AlphaVector,
    pub selection: CharacteristicSelection,
    /// Diagonal entry `b_{j0,j0}` of the inverse Gram matrix.
    pub b_j0: f64,
    /// `max_ℓ (Σ_j |α_j b_jℓ| - |Σ_j α_j b_jℓ|)`, relative to the largest `Σ_j |α_j b_jℓ|`.
    pub sign_coherence_defect: f64,
    basis: BSplineBasis,
}

impl OrthoFunction {
    pub fn basis(&self) -> &BSplineBasis {
        &self.basis
    }

    pub fn j0(&self) -> usize {
        self.selection.j0
    }

    pub fn j_interval(&self) -> GridInterval {
        self.selection.interval
    }

    /// Coefficients of `f_n` itself.
    pub fn coeffs(&self) -> Vec<f64> {
        self.w.iter().map(|w| w / self.norm2).collect()
    }

    pub fn spline(&self) -> Spline {
        Spline::new(self.basis.clone(), self.coeffs()).expect("dimensions agree")
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut buf = [0.0; 32];
        let first = self.basis.eval_nonzero(x, &mut buf);
        let k = self.basis.order();
        (0..k).map(|r| buf[r] * self.w[first + r]).sum::<f64>() / self.norm2
    }

    /// Evaluation inside knot span `s` of its own grid.
    pub fn eval_in_span(&self, s: usize, x: f64) -> f64 {
        let mut buf = [0.0; 32];
        self.basis.eval_in_span(s, x, &mut buf);
        let k = self.basis.order();
        let first = s + 1 - k;
        (0..k).map(|r| buf[r] * self.w[first + r]).sum::<f64>() / self.norm2
    }

    /// `∫_a^b |f_n|`.
    pub fn abs_integral(&self, a: f64, b: f64) -> f64 {
        let deg = self.basis.order() - 1;
        self.basis
            .spans()
            .filter(|&(_, lo, hi)| hi > a && lo < b)
            .map(|(s, lo, hi)| quadrature::integrate_abs(|x| self.eval_in_span(s, x), lo.max(a), hi.min(b), deg))
            .sum()
    }

    /// `max_i |⟨f_n, N_{n-1,i}⟩| / ‖N_{n-1,i}‖_2`, which vanishes for an exact construction.
    pub fn orthogonality_defect(&self, seq: &KnotSequence) -> f64 {
        let coarse = BSplineBasis::new(&seq.grid_unchecked(self.n - 1));
        let k = coarse.order();
        let mut inner = vec![0.0; coarse.dim()];
        let mut norms = vec![0.0; coarse.dim()];
        let rule = quadrature::rule(k);
        let mut buf = [0.0; 32];
        for (s, a, b) in self.basis.spans() {
            for (x, w) in rule.on(a, b) {
                let fx = self.eval_in_span(s, x);
                let first = coarse.eval_nonzero(x, &mut buf);
                for r in 0..k {
                    inner[first + r] += w * fx * buf[r];
                    norms[first + r] += w * buf[r] * buf[r];
                }
            }
        }
        inner.iter().zip(&norms).map(|(i, n)| i.abs() / n.sqrt()).fold(0.0, f64::max)
    }
}

/// Builds `f_n` for `n >= 2`.
pub fn orthonormal_function(seq: &KnotSequence, n: usize) -> Result<OrthoFunction> {
    orthonormal_function_with(seq, n, OrthoOptions::default())
}

pub fn orthonormal_function_with(seq: &KnotSequence, n: usize, opts: OrthoOptions) -> Result<OrthoFunction> {
    let grid = seq.grid(n)?;
    let t = seq.point(n)?;
    let i0 = grid.last_index_of(t).expect("inserted point is a knot");
    let alpha = alpha_coefficients(&grid, i0)?;
    let selection = characteristic_interval_with(&grid, &alpha, opts.lambda_factor);
    let basis = BSplineBasis::new(&grid);
    let g = gram(&basis);
    let chol = g.factor()?;
    let rows: Vec<usize> = alpha.indices().collect();
    let dual = dual_rows_with(&chol, &rows)?;
    let dim = basis.dim();
    let mut w = vec![0.0; dim];
    let mut abs = vec![0.0; dim];
    for (&j, row) in dual.rows.iter().zip(&dual.values) {
        let a = alpha.get(j);
        for l in 0..dim {
            w[l] += a * row[l];
            abs[l] += (a * row[l]).abs();
        }
    }
    let scale = abs.iter().fold(0.0f64, |m, v| m.max(*v));
    let sign_coherence_defect = w
        .iter()
        .zip(&abs)
        .map(|(w, a)| (a - w.abs()) / scale)
        .fold(0.0, f64::max);
    let j0 = selection.j0;
    let b_j0 = dual.row(j0).expect("j0 lies in the alpha range")[j0];
    if w[j0] < 0.0 {
        w.iter_mut().for_each(|v| *v = -*v);
    }
    let norm2 = quad_form(&g, &w).sqrt();
    Ok(OrthoFunction { n, i0, w, norm2, alpha, selection, b_j0, sign_coherence_defect, basis })
}

/// Rebuilds `f_n` from stored coefficients, recomputing everything that the knots
/// determine. The sign-coherence defect is unknown for stored data and is set to NaN.
pub fn function_from_coefficients(seq: &KnotSequence, n: usize, w: Vec<f64>, norm2: f64) -> Result<OrthoFunction> {
    let grid = seq.grid(n)?;
    let i0 = grid.last_index_of(seq.point(n)?).expect("inserted point is a knot");
    let alpha = alpha_coefficients(&grid, i0)?;
    let selection = characteristic_interval(&grid, &alpha);
    let basis = BSplineBasis::new(&grid);
    if w.len() != basis.dim() {
        return Err(Error::Contract(format!("{} coefficients for f_{n}, expected {}", w.len(), basis.dim())));
    }
    let chol = gram(&basis).factor()?;
    let b_j0 = chol.inverse_column(selection.j0)[selection.j0];
    Ok(OrthoFunction {
        n,
        i0,
        w,
        norm2,
        alpha,
        selection,
        b_j0,
        sign_coherence_defect: f64::NAN,
        basis,
    })
}

/// `sqrt(wᵀ G w)` on the grid of `f`.
pub fn coefficient_norm(f: &OrthoFunction) -> f64 {
    quad_form(&gram(&f.basis), &f.w).sqrt()
}

fn quad_form(g: &GramMatrix, w: &[f64]) -> f64 {
    g.banded().mul_vec(w).iter().zip(w).map(|(a, b)| a * b).sum()
}

#[derive(Debug, Clone)]
pub enum Member {
    Polynomial(LegendrePoly),
    Spline(OrthoFunction),
}

impl Member {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Member::Polynomial(p) => p.eval(x),
            Member::Spline(f) => f.eval(x),
        }
    }
}

/// The finite prefix `f_{-k+2}, ..., f_N`.
#[derive(Debug, Clone)]
pub struct OrthoSystem {
    seq: KnotSequence,
    n_max: usize,
    polynomials: Vec<LegendrePoly>,
    functions: Vec<OrthoFunction>,
}

pub fn build_system(seq: &KnotSequence, n_max: usize) -> Result<OrthoSystem> {
    build_system_with(seq, n_max, OrthoOptions::default())
}

pub fn build_system_with(seq: &KnotSequence, n_max: usize, opts: OrthoOptions) -> Result<OrthoSystem> {
    if n_max < 2 || n_max > seq.max_n() {
        return Err(Error::GridIndex { n: n_max, min: 2, max: seq.max_n() });
    }
    let functions = (2..=n_max)
        .into_par_iter()
        .map(|n| orthonormal_function_with(seq, n, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(OrthoSystem {
        seq: seq.clone(),
        n_max,
        polynomials: initial_polynomials(seq.order()),
        functions,
    })
}

impl OrthoSystem {
    pub fn from_parts(seq: KnotSequence, functions: Vec<OrthoFunction>) -> Result<Self> {
        let n_max = functions.len() + 1;
        for (m, f) in functions.iter().enumerate() {
            if f.n != m + 2 {
                return Err(Error::Contract(format!("function {m} has index {} instead of {}", f.n, m + 2)));
            }
        }
        if n_max < 2 {
            return Err(Error::GridIndex { n: n_max, min: 2, max: seq.max_n() });
        }
        Ok(OrthoSystem { polynomials: initial_polynomials(seq.order()), seq, n_max, functions })
    }

    pub fn seq(&self) -> &KnotSequence {
        &self.seq
    }

    pub fn order(&self) -> usize {
        self.seq.order()
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn len(&self) -> usize {
        self.polynomials.len() + self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn polynomials(&self) -> &[LegendrePoly] {
        &self.polynomials
    }

    pub fn functions(&self) -> &[OrthoFunction] {
        &self.functions
    }

    /// `f_n` for `n >= 2`.
    pub fn function(&self, n: usize) -> Option<&OrthoFunction> {
        n.checked_sub(2).and_then(|m| self.functions.get(m))
    }

    /// Member at position `m`, where position 0 is `f_{-k+2} ≡ 1`.
    pub fn member(&self, m: usize) -> Member {
        let p = self.polynomials.len();
        if m < p {
            Member::Polynomial(self.polynomials[m])
        } else {
            Member::Spline(self.functions[m - p].clone())
        }
    }

    /// Paper-style index `n` of the member at position `m`.
    pub fn index_of(&self, m: usize) -> i64 {
        m as i64 - self.order() as i64 + 2
    }

    pub fn eval_member(&self, m: usize, x: f64) -> f64 {
        let p = self.polynomials.len();
        if m < p {
            self.polynomials[m].eval(x)
        } else {
            self.functions[m - p].eval(x)
        }
    }

    pub fn finest_grid(&self) -> Grid {
        self.seq.grid_unchecked(self.n_max)
    }

    /// Gauss nodes and weights, `k` per span of the finest grid, exact for products of members.
    pub fn quadrature_nodes(&self) -> Vec<(f64, f64)> {
        let basis = BSplineBasis::new(&self.finest_grid());
        let rule = quadrature::rule(self.order());
        basis.spans().flat_map(|(_, a, b)| rule.on(a, b).collect::<Vec<_>>()).collect()
    }

    /// Values of every member at the given points, one row per member.
    pub fn sample_members(&self, xs: &[f64]) -> Vec<Vec<f64>> {
        (0..self.len())
            .into_par_iter()
            .map(|m| xs.iter().map(|&x| self.eval_member(m, x)).collect())
            .collect()
    }

    /// Matrix of inner products `⟨f_m, f_m'⟩`, computed by quadrature independent of the
    /// construction.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        let nodes = self.quadrature_nodes();
        let xs: Vec<f64> = nodes.iter().map(|p| p.0).collect();
        let vals = self.sample_members(&xs);
        let len = self.len();
        (0..len)
            .into_par_iter()
            .map(|a| {
                (0..len)
                    .map(|b| {
                        vals[a]
                            .iter()
                            .zip(&vals[b])
                            .zip(&nodes)
                            .map(|((u, v), (_, w))| u * v * w)
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }

    /// `max |⟨f_m, f_m'⟩ - δ_mm'|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.gram();
        let mut worst: f64 = 0.0;
        for (a, row) in g.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                let e = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((v - e).abs());
            }
        }
        worst
    }
}
