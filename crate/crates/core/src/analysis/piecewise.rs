use serde::{Deserialize, Serialize};

use crate::bspline::Spline;
use crate::error::{Error, Result};
use crate::quadrature;

/// Piecewise polynomial on `[breaks[0], breaks[m]]`, zero outside. Piece `i` is stored as
/// monomial coefficients in the local variable `u = (x - breaks[i]) / (breaks[i+1] - breaks[i])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePoly {
    breaks: Vec<f64>,
    pieces: Vec<Vec<f64>>,
}

fn horner(c: &[f64], u: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * u + a)
}

fn antiderivative_at(c: &[f64], u: f64) -> f64 {
    c.iter()
        .enumerate()
        .rev()
        .fold(0.0, |acc, (i, &a)| acc * u + a / (i + 1) as f64)
        * u
}

/// Monomial coefficients on `[0, 1]` of the polynomial through `f` at `degree + 1`
/// Chebyshev points.
fn fit_local<F: FnMut(f64) -> f64>(mut f: F, degree: usize) -> Vec<f64> {
    let m = degree + 1;
    let us: Vec<f64> = (0..m)
        .map(|i| 0.5 - 0.5 * ((2 * i + 1) as f64 * std::f64::consts::PI / (2 * m) as f64).cos())
        .collect();
    let mut a: Vec<Vec<f64>> = us
        .iter()
        .map(|&u| {
            let mut row: Vec<f64> = (0..m).map(|p| u.powi(p as i32)).collect();
            row.push(f(u));
            row
        })
        .collect();
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .expect("nonempty range");
        a.swap(col, piv);
        for r in 0..m {
            if r != col {
                let factor = a[r][col] / a[col][col];
                for c in col..=m {
                    a[r][c] -= factor * a[col][c];
                }
            }
        }
    }
    (0..m).map(|i| a[i][m] / a[i][i]).collect()
}

impl PiecewisePoly {
    pub fn new(breaks: Vec<f64>, pieces: Vec<Vec<f64>>) -> Result<Self> {
        if breaks.len() < 2 || pieces.len() + 1 != breaks.len() {
            return Err(Error::Contract(format!(
                "{} breakpoints for {} pieces",
                breaks.len(),
                pieces.len()
            )));
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Contract("breakpoints must increase strictly".into()));
        }
        if pieces.iter().any(|p| p.is_empty()) {
            return Err(Error::Contract("empty polynomial piece".into()));
        }
        Ok(PiecewisePoly { breaks, pieces })
    }

    pub fn constant(c: f64) -> Self {
        PiecewisePoly { breaks: vec![0.0, 1.0], pieces: vec![vec![c]] }
    }

    pub fn piecewise_constant(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        PiecewisePoly::new(breaks, values.into_iter().map(|v| vec![v]).collect())
    }

    /// Interpolates `f` by polynomials of the given degree on each piece; exact when `f` is
    /// such a piecewise polynomial.
    pub fn from_fn<F: Fn(f64) -> f64>(breaks: Vec<f64>, degree: usize, f: F) -> Result<Self> {
        let pieces = breaks
            .windows(2)
            .map(|w| {
                let (a, h) = (w[0], w[1] - w[0]);
                fit_local(|u| f(a + h * u), degree)
            })
            .collect();
        PiecewisePoly::new(breaks, pieces)
    }

    pub fn from_spline(s: &Spline) -> Self {
        let basis = s.basis();
        let deg = basis.order() - 1;
        let mut breaks = vec![];
        let mut pieces = vec![];
        let k = basis.order();
        for (span, a, b) in basis.spans() {
            if breaks.is_empty() {
                breaks.push(a);
            }
            breaks.push(b);
            let mut buf = [0.0; 32];
            let first = span + 1 - k;
            pieces.push(fit_local(
                |u| {
                    basis.eval_in_span(span, a + (b - a) * u, &mut buf);
                    (0..k).map(|r| buf[r] * s.coeffs()[first + r]).sum()
                },
                deg,
            ));
        }
        PiecewisePoly { breaks, pieces }
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn pieces(&self) -> &[Vec<f64>] {
        &self.pieces
    }

    pub fn support(&self) -> (f64, f64) {
        (self.breaks[0], *self.breaks.last().expect("at least two breaks"))
    }

    pub fn degree(&self) -> usize {
        self.pieces.iter().map(|p| p.len() - 1).max().unwrap_or(0)
    }

    fn piece_index(&self, x: f64) -> Option<usize> {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return None;
        }
        Some((self.breaks.partition_point(|&b| b <= x).max(1) - 1).min(self.pieces.len() - 1))
    }

    /// Right-continuous evaluation; the last piece is closed at the right end.
    pub fn eval(&self, x: f64) -> f64 {
        match self.piece_index(x) {
            None => 0.0,
            Some(i) => self.eval_piece(i, x),
        }
    }

    /// Evaluates at `x` with the piece that contains `probe`, so that values at a
    /// breakpoint can be taken from either side.
    pub fn eval_clamped(&self, x: f64, probe: f64) -> f64 {
        match self.piece_index(probe) {
            None => 0.0,
            Some(i) => self.eval_piece(i, x),
        }
    }

    pub fn eval_piece(&self, i: usize, x: f64) -> f64 {
        let (a, b) = (self.breaks[i], self.breaks[i + 1]);
        horner(&self.pieces[i], (x - a) / (b - a))
    }

    /// `∫_a^b f`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let mut total = 0.0;
        for (i, c) in self.pieces.iter().enumerate() {
            let (lo, hi) = (self.breaks[i], self.breaks[i + 1]);
            let (x0, x1) = (lo.max(a), hi.min(b));
            if x1 > x0 {
                let h = hi - lo;
                total += h * (antiderivative_at(c, (x1 - lo) / h) - antiderivative_at(c, (x0 - lo) / h));
            }
        }
        total
    }

    /// `∫_a^b |f|`.
    pub fn abs_integral(&self, a: f64, b: f64) -> f64 {
        let mut total = 0.0;
        for (i, c) in self.pieces.iter().enumerate() {
            let (lo, hi) = (self.breaks[i], self.breaks[i + 1]);
            let (x0, x1) = (lo.max(a), hi.min(b));
            if x1 > x0 {
                total += quadrature::integrate_abs(|x| self.eval_piece(i, x), x0, x1, c.len() - 1);
            }
        }
        total
    }

    pub fn sup_abs(&self) -> f64 {
        self.pieces
            .iter()
            .enumerate()
            .map(|(i, c)| quadrature::sup_abs(|x| self.eval_piece(i, x), self.breaks[i], self.breaks[i + 1], c.len() - 1))
            .fold(0.0, f64::max)
    }

    /// Adds `c` on the support.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.pieces.iter_mut().for_each(|p| p[0] += c);
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        PiecewisePoly {
            breaks: self.breaks.clone(),
            pieces: self.pieces.iter().map(|p| p.iter().map(|c| c * s).collect()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_reproduces_cubic() {
        let f = |x: f64| 2.0 - x + 3.0 * x * x - 0.5 * x.powi(3);
        let p = PiecewisePoly::from_fn(vec![0.0, 0.3, 1.0], 3, f).unwrap();
        for &x in &[0.0, 0.1, 0.3, 0.65, 1.0] {
            assert!((p.eval(x) - f(x)).abs() < 1e-13);
        }
        let exact = 2.0 - 0.5 + 1.0 - 0.125;
        assert!((p.integral(0.0, 1.0) - exact).abs() < 1e-13);
    }

    #[test]
    fn zero_outside_support() {
        let p = PiecewisePoly::piecewise_constant(vec![0.2, 0.4, 0.6], vec![1.0, -1.0]).unwrap();
        assert_eq!(p.eval(0.1), 0.0);
        assert_eq!(p.eval(0.4), -1.0);
        assert_eq!(p.eval(0.6), -1.0);
        assert!(p.integral(0.0, 1.0).abs() < 1e-15);
        assert!((p.abs_integral(0.0, 1.0) - 0.4).abs() < 1e-15);
        assert!((p.abs_integral(0.3, 0.5) - 0.2).abs() < 1e-15);
    }
}
