// Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use splineortho::knotseq::KnotSequence;
use splineortho::orthosys::OrthoFunction;
use twofloat::TwoFloat;

/// Piecewise polynomial in double-double precision, written on each piece `[c, d]` in powers
/// of `x - c`.
#[derive(Clone)]
pub struct DdPiecewise {
    pub coeffs: Vec<Vec<TwoFloat>>,
}

pub struct DdSpace {
    pub breaks: Vec<f64>,
    pub order: usize,
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn dd_pow(x: TwoFloat, e: usize) -> TwoFloat {
    (0..e).fold(TwoFloat::from(1.0), |acc, _| acc * x)
}

impl DdSpace {
    pub fn new(order: usize, points: &[f64]) -> Self {
        let mut breaks: Vec<f64> = points.iter().copied().chain([0.0, 1.0]).collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        DdSpace { breaks, order }
    }

    fn pieces(&self) -> usize {
        self.breaks.len() - 1
    }

    /// `((x - c) + shift)^p` expanded in powers of `x - c`.
    fn shifted_power(&self, shift: TwoFloat, p: usize) -> Vec<TwoFloat> {
        let mut out = vec![TwoFloat::from(0.0); self.order];
        for (i, slot) in out.iter_mut().enumerate().take(p + 1) {
            *slot = dd_pow(shift, p - i) * binom(p, i);
        }
        out
    }

    pub fn monomial(&self, j: usize) -> DdPiecewise {
        let coeffs = (0..self.pieces()).map(|q| self.shifted_power(TwoFloat::from(self.breaks[q]), j)).collect();
        DdPiecewise { coeffs }
    }

    /// `(x - t)_+^p`, with `(x - t)_+^0` the indicator of `x >= t`.
    pub fn truncated_power(&self, t: f64, p: usize) -> DdPiecewise {
        let coeffs = (0..self.pieces())
            .map(|q| {
                let c = self.breaks[q];
                if c >= t {
                    self.shifted_power(TwoFloat::from(c) - TwoFloat::from(t), p)
                } else {
                    vec![TwoFloat::from(0.0); self.order]
                }
            })
            .collect();
        DdPiecewise { coeffs }
    }

    pub fn inner(&self, f: &DdPiecewise, g: &DdPiecewise) -> TwoFloat {
        let mut total = TwoFloat::from(0.0);
        for q in 0..self.pieces() {
            let h = TwoFloat::from(self.breaks[q + 1]) - TwoFloat::from(self.breaks[q]);
            for (i, &a) in f.coeffs[q].iter().enumerate() {
                if a == TwoFloat::from(0.0) {
                    continue;
                }
                for (j, &b) in g.coeffs[q].iter().enumerate() {
                    let e = i + j + 1;
                    total += a * b * dd_pow(h, e) / e as f64;
                }
            }
        }
        total
    }

    fn axpy(&self, y: &mut DdPiecewise, a: TwoFloat, x: &DdPiecewise) {
        for (py, px) in y.coeffs.iter_mut().zip(&x.coeffs) {
            for (cy, &cx) in py.iter_mut().zip(px) {
                *cy += a * cx;
            }
        }
    }

    /// Value at `x`, taken from the piece containing `probe`.
    pub fn eval(&self, f: &DdPiecewise, x: f64, probe: f64) -> f64 {
        let q = (self.breaks.partition_point(|&b| b <= probe).max(1) - 1).min(self.pieces() - 1);
        let u = TwoFloat::from(x) - TwoFloat::from(self.breaks[q]);
        let mut acc = TwoFloat::from(0.0);
        for &c in f.coeffs[q].iter().rev() {
            acc = acc * u + c;
        }
        acc.hi()
    }
}

/// Orthonormalizes `1, x, ..., x^{k-1}` and then one truncated power per inserted point, in
/// insertion order, by twice-repeated modified Gram-Schmidt in double-double arithmetic.
/// Entry `m` is the `m`-th member of the system.
pub fn gram_schmidt_oracle(seq: &KnotSequence, n_max: usize) -> (DdSpace, Vec<DdPiecewise>) {
    let k = seq.order();
    let points = &seq.points()[..n_max - 1];
    let space = DdSpace::new(k, points);
    let mut basis: Vec<DdPiecewise> = Vec::new();
    let mut raw: Vec<DdPiecewise> = (0..k).map(|j| space.monomial(j)).collect();
    for (idx, &t) in points.iter().enumerate() {
        let mult = points[..=idx].iter().filter(|&&p| p == t).count();
        raw.push(space.truncated_power(t, k - mult));
    }
    for mut v in raw {
        for _ in 0..2 {
            for q in &basis {
                let c = space.inner(&v, q);
                space.axpy(&mut v, -c, q);
            }
        }
        let norm = space.inner(&v, &v).sqrt();
        for piece in &mut v.coeffs {
            for c in piece.iter_mut() {
                *c /= norm;
            }
        }
        basis.push(v);
    }
    (space, basis)
}

/// Sample points strictly inside each knot span of `f`'s grid, `order + 1` per span.
fn span_samples(f: &OrthoFunction) -> Vec<(usize, f64)> {
    let basis = f.basis();
    let k = basis.order();
    basis
        .spans()
        .flat_map(|(s, a, b)| (0..=k).map(move |i| (s, a + (b - a) * (i as f64 + 0.5) / (k + 1) as f64)))
        .collect()
}

/// B-spline coefficients, on the grid of `f`, of the oracle member `g`, by least squares on
/// interior samples of every span.
pub fn oracle_coefficients(f: &OrthoFunction, space: &DdSpace, g: &DdPiecewise) -> Vec<f64> {
    let basis = f.basis();
    let k = basis.order();
    let samples = span_samples(f);
    let mut a = DMatrix::<f64>::zeros(samples.len(), basis.dim());
    let mut rhs = DVector::<f64>::zeros(samples.len());
    let mut vals = vec![0.0; k];
    for (row, &(s, x)) in samples.iter().enumerate() {
        basis.eval_in_span(s, x, &mut vals);
        for (i, v) in vals.iter().enumerate() {
            a[(row, s + 1 - k + i)] = *v;
        }
        rhs[row] = space.eval(g, x, x);
    }
    let svd = a.svd(true, true);
    svd.solve(&rhs, 1e-14).expect("least squares").iter().copied().collect()
}

/// `max_j |c_j - s o_j| / max_j |o_j|` with the sign `s = ±1` that fits best; infinite if
/// anything is not finite.
pub fn relative_coefficient_diff(c: &[f64], o: &[f64]) -> f64 {
    if c.len() != o.len() || c.iter().chain(o).any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    let scale = o.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = |s: f64| c.iter().zip(o).fold(0.0f64, |m, (a, b)| m.max((a - s * b).abs())) / scale;
    diff(1.0).min(diff(-1.0))
}
