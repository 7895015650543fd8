//! Gauss-Legendre rules and root-aware integration of piecewise polynomials.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

const MAX_CACHED: usize = 64;

/// Gauss-Legendre rule mapped to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    fn build(m: usize) -> Self {
        let gl = GaussLegendre::new(NonZeroUsize::new(m).expect("rule size is positive"));
        let mut pairs: Vec<(f64, f64)> = gl
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Rule {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// Nodes and weights of the rule on `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = b - a;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (a + h * x, h * w))
    }
}

/// The `m`-point rule, exact for polynomials of degree `2m - 1`.
pub fn rule(m: usize) -> &'static Rule {
    static CACHE: [OnceLock<Rule>; MAX_CACHED] = [const { OnceLock::new() }; MAX_CACHED];
    assert!((1..=MAX_CACHED).contains(&m), "rule size {m} unsupported");
    CACHE[m - 1].get_or_init(|| Rule::build(m))
}

/// Points needed to integrate a polynomial of the given degree exactly.
pub fn points_for_degree(degree: usize) -> usize {
    degree / 2 + 1
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, m: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    rule(m).on(a, b).map(|(x, w)| w * f(x)).sum()
}

fn bisect_root<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, mut flo: f64) -> f64 {
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sign changes of a polynomial of at most the given degree on `[a, b]`, located by
/// sampling and bisection.
pub fn sign_changes<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, degree: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    if degree == 0 || b <= a {
        return roots;
    }
    let samples = 8 * (degree + 1);
    let h = (b - a) / samples as f64;
    let mut x0 = a;
    let mut f0 = f(a);
    for s in 1..=samples {
        let x1 = if s == samples { b } else { a + h * s as f64 };
        let f1 = f(x1);
        if f1 == 0.0 && s < samples {
            roots.push(x1);
        } else if f0 != 0.0 && f1 != 0.0 && (f0 > 0.0) != (f1 > 0.0) {
            roots.push(bisect_root(f, x0, x1, f0));
        }
        x0 = x1;
        f0 = f1;
    }
    roots
}

/// `∫_a^b |f|` for a polynomial `f` of the given degree on `[a, b]`.
pub fn integrate_abs<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, degree: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let m = points_for_degree(degree);
    let mut total = 0.0;
    let mut lo = a;
    for r in sign_changes(&f, a, b, degree).into_iter().chain(std::iter::once(b)) {
        total += integrate(&f, lo, r, m).abs();
        lo = r;
    }
    total
}

/// `∫_a^b |f|^p` for a polynomial `f` of the given degree; exact for integer `p`.
pub fn integrate_abs_pow<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, degree: usize, p: f64) -> f64 {
    if p == 1.0 {
        return integrate_abs(f, a, b, degree);
    }
    if b <= a {
        return 0.0;
    }
    let m = if p.fract() == 0.0 && p <= 16.0 {
        points_for_degree(degree * p as usize)
    } else {
        16
    };
    let mut total = 0.0;
    let mut lo = a;
    for r in sign_changes(&f, a, b, degree).into_iter().chain(std::iter::once(b)) {
        total += integrate(|x| f(x).abs().powf(p), lo, r, m);
        lo = r;
    }
    total
}

/// `max |f|` on `[a, b]` for a polynomial of the given degree.
pub fn sup_abs<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, degree: usize) -> f64 {
    let mut best = f(a).abs().max(f(b).abs());
    if degree <= 1 || b <= a {
        return best;
    }
    let samples = 16 * degree;
    let h = (b - a) / samples as f64;
    let mut arg = 0;
    for s in 1..samples {
        let v = f(a + h * s as f64).abs();
        if v > best {
            best = v;
            arg = s;
        }
    }
    if arg > 0 {
        let (mut lo, mut hi) = (a + h * (arg - 1) as f64, a + h * (arg + 1) as f64);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let m1 = hi - g * (hi - lo);
            let m2 = lo + g * (hi - lo);
            if f(m1).abs() >= f(m2).abs() {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        best = best.max(f(0.5 * (lo + hi)).abs());
    }
    best
}
