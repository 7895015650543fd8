mod common;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splineortho::banded::BandedSym;
use splineortho::knotseq::KnotSequence;
use splineortho::orthosys::build_system;

use common::{gram_schmidt_oracle, oracle_coefficients, relative_coefficient_diff};

fn worst_oracle_diff(seq: &KnotSequence, n_max: usize) -> f64 {
    let sys = build_system(seq, n_max).unwrap();
    let (space, oracle) = gram_schmidt_oracle(seq, n_max);
    let k = seq.order();
    sys.functions()
        .iter()
        .map(|f| {
            let o = oracle_coefficients(f, &space, &oracle[f.n + k - 2]);
            relative_coefficient_diff(&f.coeffs(), &o)
        })
        .fold(0.0, f64::max)
}

#[test]
fn franklin_matches_double_double_gram_schmidt() {
    let seq = KnotSequence::dyadic(2, 63).unwrap();
    assert!(worst_oracle_diff(&seq, 64) < 1e-7);
}

#[test]
fn quadratic_random_knots_with_repeats_match_oracle() {
    let seq = KnotSequence::random(3, 40, 0.3, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    assert!(worst_oracle_diff(&seq, 41) < 1e-7);
}

#[test]
fn oracle_detects_a_perturbed_member() {
    let seq = KnotSequence::dyadic(2, 15).unwrap();
    let sys = build_system(&seq, 16).unwrap();
    let (space, oracle) = gram_schmidt_oracle(&seq, 16);
    let f = sys.function(9).unwrap();
    let o = oracle_coefficients(f, &space, &oracle[9]);
    let mut c = f.coeffs();
    c[3] += 1e-4;
    assert!(relative_coefficient_diff(&c, &o) > 1e-6);
}

fn random_banded_spd(rng: &mut ChaCha8Rng, dim: usize, bw: usize) -> BandedSym {
    let mut m = BandedSym::zeros(dim, bw);
    for i in 0..dim {
        for j in i + 1..(i + bw + 1).min(dim) {
            m.add(i, j, rng.gen_range(-1.0..1.0));
        }
    }
    // Diagonal dominance makes the matrix positive definite.
    for i in 0..dim {
        let off: f64 = (0..dim).filter(|&j| j != i).map(|j| m.get(i, j).abs()).sum();
        m.add(i, i, off + rng.gen_range(0.01..1.0));
    }
    m
}

#[test]
fn banded_cholesky_agrees_with_dense_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for trial in 0..1000 {
        let bw = 1 + trial % 4;
        let m = random_banded_spd(&mut rng, 20, bw);
        let dense = DMatrix::from_fn(20, 20, |i, j| m.get(i, j));
        let inv = dense.clone().try_inverse().expect("invertible");
        let chol = m.cholesky().unwrap();
        for j in 0..20 {
            let col = chol.inverse_column(j);
            for (i, v) in col.iter().enumerate() {
                worst = worst.max((v - inv[(i, j)]).abs() / (1.0 + inv[(i, j)].abs()));
            }
        }
        let x: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = m.mul_vec(&x);
        let dense_y = &dense * nalgebra::DVector::from_vec(x.clone());
        for (a, b) in y.iter().zip(dense_y.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let back = chol.solve(&y);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-9);
        }
    }
    assert!(worst < 1e-10, "worst relative difference {worst:e}");
}

#[test]
fn indefinite_band_is_rejected() {
    let mut m = BandedSym::zeros(3, 1);
    m.add(0, 0, 1.0);
    m.add(1, 1, 1.0);
    m.add(2, 2, 1.0);
    m.add(0, 1, 2.0);
    assert!(m.cholesky().is_err());
}

#[test]
fn gauss_legendre_integrates_polynomials_exactly() {
    use splineortho::quadrature::{integrate, points_for_degree};
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for deg in 0..12usize {
        let c: Vec<f64> = (0..=deg).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (a, b): (f64, f64) = (-0.3, 0.8);
        let exact: f64 = c.iter().enumerate().map(|(i, ci)| ci * (b.powi(i as i32 + 1) - a.powi(i as i32 + 1)) / (i + 1) as f64).sum();
        let got = integrate(|x| c.iter().rev().fold(0.0, |acc, ci| acc * x + ci), a, b, points_for_degree(deg));
        assert!((got - exact).abs() < 1e-13, "degree {deg}: {got} vs {exact}");
    }
}

