//! B-spline bases on a grid: evaluation, derivatives, Gram matrices and dual rows.

use serde::{Deserialize, Serialize};

use crate::banded::{BandedCholesky, BandedSym};
use crate::error::{Error, Result};
use crate::knotseq::Grid;
use crate::quadrature;

/// Normalized B-splines of a given order on a knot vector. Function `i` is supported on
/// `[knots[i], knots[i + order]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BSplineBasis {
    knots: Vec<f64>,
    order: usize,
    n: usize,
}

impl BSplineBasis {
    pub fn new(grid: &Grid) -> Self {
        BSplineBasis { knots: grid.tau().to_vec(), order: grid.order(), n: grid.n() }
    }

    /// Basis of a different order on the same knot vector.
    pub fn with_order(&self, order: usize) -> Result<Self> {
        if order == 0 || order >= self.knots.len() {
            return Err(Error::InvalidOrder { got: order, min: 1 });
        }
        Ok(BSplineBasis { knots: self.knots.clone(), order, n: self.n })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Grid index `n` of the underlying grid.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.knots.len() - self.order
    }

    pub fn support(&self, i: usize) -> (f64, f64) {
        (self.knots[i], self.knots[i + self.order])
    }

    /// Index `s` of the knot span `[knots[s], knots[s+1])` holding `x`; at the right end the
    /// last nonempty span is used.
    pub fn span(&self, x: f64) -> usize {
        let last = *self.knots.last().expect("knot vector is nonempty");
        let x = x.clamp(self.knots[0], last);
        if x >= last {
            self.knots.partition_point(|&t| t < last) - 1
        } else {
            self.knots.partition_point(|&t| t <= x) - 1
        }
    }

    /// Values of the `order` B-splines that may be nonzero at `x`, written to `out`;
    /// returns the index of the first one.
    pub fn eval_nonzero(&self, x: f64, out: &mut [f64]) -> usize {
        let k = self.order;
        let s = self.span(x);
        self.eval_in_span(s, x, out);
        s + 1 - k
    }

    /// Same as [`eval_nonzero`](Self::eval_nonzero) with the span fixed by the caller, so that
    /// values at a span's right end are taken from the left.
    pub fn eval_in_span(&self, s: usize, x: f64, out: &mut [f64]) {
        let k = self.order;
        let t = &self.knots;
        let mut left = [0.0; 32];
        let mut right = [0.0; 32];
        out[0] = 1.0;
        for j in 1..k {
            left[j] = x - t[s + 1 - j];
            right[j] = t[s + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom != 0.0 { out[r] / denom } else { 0.0 };
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
    }

    pub fn evaluate(&self, i: usize, x: f64) -> Result<f64> {
        if i >= self.dim() {
            return Err(Error::IndexOutOfRange { index: i, dim: self.dim() });
        }
        let mut buf = [0.0; 32];
        let first = self.eval_nonzero(x, &mut buf);
        Ok(if (first..first + self.order).contains(&i) { buf[i - first] } else { 0.0 })
    }

    /// Nonempty knot spans `(s, a, b)`.
    pub fn spans(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.knots
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] > w[0])
            .map(|(s, w)| (s, w[0], w[1]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spline {
    basis: BSplineBasis,
    coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineDump {
    pub k: usize,
    pub n: usize,
    pub coeffs: Vec<f64>,
}

impl Spline {
    pub fn new(basis: BSplineBasis, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.dim() {
            return Err(Error::Contract(format!(
                "{} coefficients for a basis of dimension {}",
                coeffs.len(),
                basis.dim()
            )));
        }
        Ok(Spline { basis, coeffs })
    }

    pub fn basis(&self) -> &BSplineBasis {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut buf = [0.0; 32];
        let first = self.basis.eval_nonzero(x, &mut buf);
        (0..self.basis.order).map(|r| buf[r] * self.coeffs[first + r]).sum()
    }

    fn eval_in_span(&self, s: usize, x: f64) -> f64 {
        let mut buf = [0.0; 32];
        self.basis.eval_in_span(s, x, &mut buf);
        let first = s + 1 - self.basis.order;
        (0..self.basis.order).map(|r| buf[r] * self.coeffs[first + r]).sum()
    }

    pub fn derivative(&self) -> Result<Spline> {
        let k = self.basis.order;
        if k < 2 {
            return Err(Error::InvalidOrder { got: k, min: 2 });
        }
        let t = &self.basis.knots;
        let d = self.coeffs.len();
        let coeffs = (0..=d)
            .map(|j| {
                if j == 0 || j == d {
                    return 0.0;
                }
                let len = t[j + k - 1] - t[j];
                if len > 0.0 {
                    (k - 1) as f64 * (self.coeffs[j] - self.coeffs[j - 1]) / len
                } else {
                    0.0
                }
            })
            .collect();
        Spline::new(self.basis.with_order(k - 1)?, coeffs)
    }

    /// `‖s‖_{L^p(a,b)}` for `p >= 1`; `p = f64::INFINITY` gives the sup norm.
    pub fn lp_norm_on(&self, a: f64, b: f64, p: f64) -> f64 {
        let deg = self.basis.order - 1;
        let mut acc = 0.0;
        for (s, lo, hi) in self.basis.spans() {
            let (lo, hi) = (lo.max(a), hi.min(b));
            if hi <= lo {
                continue;
            }
            let f = |x: f64| self.eval_in_span(s, x);
            if p.is_infinite() {
                acc = f64::max(acc, quadrature::sup_abs(f, lo, hi, deg));
            } else {
                acc += quadrature::integrate_abs_pow(f, lo, hi, deg, p);
            }
        }
        if p.is_infinite() {
            acc
        } else {
            acc.powf(1.0 / p)
        }
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        self.lp_norm_on(0.0, 1.0, p)
    }

    pub fn dump(&self) -> SplineDump {
        SplineDump { k: self.basis.order, n: self.basis.n, coeffs: self.coeffs.clone() }
    }
}

#[derive(Debug, Clone)]
pub struct GramMatrix {
    matrix: BandedSym,
}

impl GramMatrix {
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn banded(&self) -> &BandedSym {
        &self.matrix
    }

    pub fn factor(&self) -> Result<BandedCholesky> {
        self.matrix.cholesky()
    }
}

impl From<BandedSym> for GramMatrix {
    fn from(matrix: BandedSym) -> Self {
        GramMatrix { matrix }
    }
}

/// Gram matrix `⟨N_i, N_j⟩` by `k`-point Gauss-Legendre on each knot span.
pub fn gram(basis: &BSplineBasis) -> GramMatrix {
    let k = basis.order;
    let mut m = BandedSym::zeros(basis.dim(), k - 1);
    let rule = quadrature::rule(k);
    let mut buf = [0.0; 32];
    for (s, a, b) in basis.spans() {
        let first = s + 1 - k;
        for (x, w) in rule.on(a, b) {
            basis.eval_in_span(s, x, &mut buf);
            for r in 0..k {
                for c in r..k {
                    m.add(first + r, first + c, w * buf[r] * buf[c]);
                }
            }
        }
    }
    GramMatrix { matrix: m }
}

/// Rows `b_{j·}` of an inverse Gram matrix.
#[derive(Debug, Clone)]
pub struct GramInverseRows {
    pub rows: Vec<usize>,
    pub values: Vec<Vec<f64>>,
}

impl GramInverseRows {
    pub fn row(&self, j: usize) -> Option<&[f64]> {
        self.rows.iter().position(|&r| r == j).map(|p| self.values[p].as_slice())
    }

    /// Largest violation of `(-1)^{i+j} b_ij >= 0`, relative to the largest entry of its row.
    pub fn checkerboard_slack(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (&j, row) in self.rows.iter().zip(&self.values) {
            let scale = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (i, &b) in row.iter().enumerate() {
                let signed = if (i + j) % 2 == 0 { b } else { -b };
                if signed < 0.0 {
                    worst = worst.max(-signed / scale);
                }
            }
        }
        worst
    }

    /// Largest relative shortfall of `b_jj >= 1/c_jj`; nonpositive when the bound holds.
    pub fn diagonal_bound_defect(&self, g: &GramMatrix) -> f64 {
        self.rows
            .iter()
            .zip(&self.values)
            .map(|(&j, row)| 1.0 - row[j] * g.entry(j, j))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max |G b_{j·} - e_j|` over the stored rows.
    pub fn residual(&self, g: &GramMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for (&j, row) in self.rows.iter().zip(&self.values) {
            for (i, v) in g.matrix.mul_vec(row).into_iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - e).abs());
            }
        }
        worst
    }
}

pub fn dual_rows(g: &GramMatrix, rows: &[usize]) -> Result<GramInverseRows> {
    let chol = g.factor()?;
    dual_rows_with(&chol, rows)
}

pub fn dual_rows_with(chol: &BandedCholesky, rows: &[usize]) -> Result<GramInverseRows> {
    let mut values = Vec::with_capacity(rows.len());
    for &j in rows {
        if j >= chol.dim() {
            return Err(Error::IndexOutOfRange { index: j, dim: chol.dim() });
        }
        values.push(chol.inverse_column(j));
    }
    Ok(GramInverseRows { rows: rows.to_vec(), values })
}

/// Ratios `(r1, r2)` comparing a spline's `L^p` norm with its coefficients.
///
/// `r1 = max_j |a_j| |J_j|^{1/p} / ‖s‖_{L^p(J_j)}` with `J_j` a longest knot span inside the
/// support of `N_j`; `r2 = ‖s‖_p / ‖(a_j |supp N_j|^{1/p})‖_{ℓ^p}`.
pub fn stability_report(s: &Spline, p: f64) -> (f64, f64) {
    if s.coeffs.iter().all(|&a| a == 0.0) {
        return (1.0, 1.0);
    }
    let basis = &s.basis;
    let k = basis.order;
    let t = &basis.knots;
    let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
    let mut r1: f64 = 0.0;
    let mut seq_norm = 0.0;
    for (j, &a) in s.coeffs.iter().enumerate() {
        let supp = t[j + k] - t[j];
        if a == 0.0 || supp <= 0.0 {
            continue;
        }
        let mut best = j;
        for m in j..j + k {
            if t[m + 1] - t[m] > t[best + 1] - t[best] {
                best = m;
            }
        }
        let (lo, hi) = (t[best], t[best + 1]);
        let local = s.lp_norm_on(lo, hi, p);
        r1 = r1.max(a.abs() * (hi - lo).powf(inv_p) / local);
        let term = a.abs() * supp.powf(inv_p);
        if p.is_infinite() {
            seq_norm = f64::max(seq_norm, term);
        } else {
            seq_norm += term.powf(p);
        }
    }
    if !p.is_infinite() {
        seq_norm = f64::powf(seq_norm, 1.0 / p);
    }
    (r1, s.lp_norm(p) / seq_norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knotseq::KnotSequence;

    fn uniform_basis(k: usize, m: usize) -> BSplineBasis {
        let seq = KnotSequence::uniform(k, m).unwrap();
        BSplineBasis::new(&seq.grid(m + 1).unwrap())
    }

    #[test]
    fn order_one_is_indicator() {
        let b = uniform_basis(2, 3).with_order(1).unwrap();
        // knots 0,0,.25,.5,.75,1,1: order-1 functions are indicators of spans
        assert_eq!(b.evaluate(1, 0.1).unwrap(), 1.0);
        assert_eq!(b.evaluate(2, 0.25).unwrap(), 1.0);
        assert_eq!(b.evaluate(1, 0.25).unwrap(), 0.0);
        assert_eq!(b.evaluate(4, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn hat_peaks_at_middle_knot() {
        let b = uniform_basis(2, 4);
        for i in 1..b.dim() - 1 {
            assert!((b.evaluate(i, b.knots()[i + 1]).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!(matches!(b.evaluate(b.dim(), 0.5), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn hat_derivative_slopes() {
        let b = uniform_basis(2, 4);
        let h = 0.2;
        let mut c = vec![0.0; b.dim()];
        c[2] = 1.0;
        let d = Spline::new(b, c).unwrap().derivative().unwrap();
        assert!((d.eval(0.3) - 1.0 / h).abs() < 1e-12);
        assert!((d.eval(0.5) + 1.0 / h).abs() < 1e-12);
        assert_eq!(d.eval(0.9), 0.0);
    }

    #[test]
    fn constant_has_zero_derivative() {
        let b = uniform_basis(4, 5);
        let s = Spline::new(b.clone(), vec![1.0; b.dim()]).unwrap();
        let d = s.derivative().unwrap();
        assert!(d.coeffs().iter().all(|&c| c == 0.0));
        let one = Spline::new(b.with_order(1).unwrap(), vec![1.0; b.knots().len() - 1]).unwrap();
        assert!(one.derivative().is_err());
    }

    #[test]
    fn gram_of_uniform_hats() {
        let m = 9;
        let h = 1.0 / (m + 1) as f64;
        let g = gram(&uniform_basis(2, m));
        for i in 1..g.dim() - 1 {
            assert!((g.entry(i, i) - 2.0 * h / 3.0).abs() < 1e-12);
            assert!((g.entry(i, i + 1) - h / 6.0).abs() < 1e-12);
            assert_eq!(g.entry(i, i + 2), 0.0);
        }
    }

    #[test]
    fn scalar_dual_row() {
        let mut m = BandedSym::zeros(1, 0);
        m.add(0, 0, 0.25);
        let rows = dual_rows(&GramMatrix::from(m), &[0]).unwrap();
        assert_eq!(rows.values[0], vec![4.0]);
    }

    #[test]
    fn stability_conventions() {
        let b = uniform_basis(3, 6);
        let zero = Spline::new(b.clone(), vec![0.0; b.dim()]).unwrap();
        assert_eq!(stability_report(&zero, 2.0), (1.0, 1.0));
        let one = Spline::new(b.clone(), vec![1.0; b.dim()]).unwrap();
        assert!((stability_report(&one, f64::INFINITY).1 - 1.0).abs() < 1e-12);
        for j in 0..b.dim() {
            let mut c = vec![0.0; b.dim()];
            c[j] = 1.0;
            let s = Spline::new(b.clone(), c).unwrap();
            assert!((stability_report(&s, 1.0).1 - 1.0 / 3.0).abs() < 1e-12);
        }
    }
}
