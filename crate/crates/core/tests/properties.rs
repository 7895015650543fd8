use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use splineortho::analysis::{
    atomic_decompose, expand, max_norm1, sign_flip_trace, sum_norm1, Atom, Expansion, PiecewisePoly, Synthesis,
};
use splineortho::bspline::{dual_rows, gram, BSplineBasis, Spline};
use splineortho::io::{parse_knots, knots_to_text, SystemDump};
use splineortho::knotseq::{make_grid, regularity_parameter, KnotSequence};
use splineortho::orthosys::build_system;

fn random_seq(k: usize, count: usize, repeat: f64, seed: u64) -> KnotSequence {
    KnotSequence::random(k, count, repeat, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn consecutive_grids_differ_by_the_new_point(k in 2usize..=4, seed in any::<u64>(), n in 3usize..40) {
        let seq = random_seq(k, 40, 0.3, seed);
        let prev = make_grid(&seq, n - 1).unwrap();
        let next = make_grid(&seq, n).unwrap();
        prop_assert_eq!(next.tau().len(), prev.tau().len() + 1);
        let mut merged = prev.tau().to_vec();
        merged.push(seq.point(n).unwrap());
        merged.sort_by(f64::total_cmp);
        prop_assert_eq!(merged, next.tau().to_vec());
    }

    #[test]
    fn regularity_grows_with_the_number_of_grids(k in 2usize..=4, seed in any::<u64>(), n in 3usize..30) {
        let seq = random_seq(k, 30, 0.0, seed);
        for ell in 1..=k {
            let a = regularity_parameter(&seq, ell, n).unwrap().gamma;
            let b = regularity_parameter(&seq, ell, n + 1).unwrap().gamma;
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn regularity_is_mirror_symmetric(k in 2usize..=3, seed in any::<u64>()) {
        let seq = random_seq(k, 25, 0.0, seed);
        let mirrored = KnotSequence::new(k, seq.points().iter().map(|p| 1.0 - p).collect()).unwrap();
        for ell in 1..=k {
            let a = regularity_parameter(&seq, ell, 26).unwrap().gamma;
            let b = regularity_parameter(&mirrored, ell, 26).unwrap().gamma;
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{} vs {}", a, b);
        }
    }

    #[test]
    fn bsplines_form_a_partition_of_unity(k in 2usize..=5, seed in any::<u64>(), x in 0.0f64..=1.0) {
        let seq = random_seq(k, 30, 0.3, seed);
        let basis = BSplineBasis::new(&seq.grid(31).unwrap());
        let mut vals = vec![0.0; k];
        basis.eval_nonzero(x, &mut vals);
        prop_assert!((vals.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(vals.iter().all(|&v| v >= -1e-15));
    }

    #[test]
    fn gram_inverse_is_a_checkerboard(k in 2usize..=4, seed in any::<u64>()) {
        let seq = random_seq(k, 30, 0.2, seed);
        let basis = BSplineBasis::new(&seq.grid(31).unwrap());
        let g = gram(&basis);
        let rows: Vec<usize> = (0..basis.dim()).collect();
        let inv = dual_rows(&g, &rows).unwrap();
        prop_assert!(inv.residual(&g) < 1e-10 * inv.values.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs())));
        prop_assert!(inv.checkerboard_slack() <= 1e-12);
        prop_assert!(inv.diagonal_bound_defect(&g) <= 1e-12);
    }

    #[test]
    fn systems_are_orthonormal_with_pinned_signs(k in 2usize..=4, seed in any::<u64>()) {
        let seq = random_seq(k, 40, 0.2, seed);
        let sys = build_system(&seq, 41).unwrap();
        prop_assert!(sys.orthonormality_defect() < 1e-9);
        for f in sys.functions() {
            prop_assert!(f.w[f.j0()] > 0.0);
            prop_assert!(f.sign_coherence_defect < 1e-12);
            let tau = make_grid(&seq, f.n).unwrap().tau().to_vec();
            let j = f.j_interval();
            prop_assert!(tau[f.j0()] <= j.lo && j.hi <= tau[f.j0() + k]);
            prop_assert!(j.hi > j.lo);
        }
    }

    #[test]
    fn knot_files_round_trip(k in 2usize..=4, seed in any::<u64>()) {
        let seq = random_seq(k, 20, 0.4, seed);
        prop_assert_eq!(parse_knots(&knots_to_text(&seq)).unwrap(), seq.clone());
        let json = serde_json::to_string(&seq).unwrap();
        prop_assert_eq!(parse_knots(&json).unwrap(), seq);
    }

    #[test]
    fn system_dumps_round_trip(k in 2usize..=3, seed in any::<u64>()) {
        let seq = random_seq(k, 20, 0.2, seed);
        let sys = build_system(&seq, 21).unwrap();
        let dump = SystemDump::from_system(&sys);
        let text = serde_json::to_string(&dump).unwrap();
        let back: SystemDump = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &dump);
        let rebuilt = back.to_system().unwrap();
        prop_assert!(rebuilt.orthonormality_defect() < 1e-9);
        prop_assert_eq!(SystemDump::from_system(&rebuilt), dump);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn parseval_for_splines_in_the_space(k in 2usize..=3, seed in any::<u64>()) {
        let seq = random_seq(k, 30, 0.0, seed);
        let sys = build_system(&seq, 31).unwrap();
        let synth = Synthesis::new(&sys).unwrap();
        let basis = synth.basis().clone();
        let coeffs: Vec<f64> = (0..basis.dim()).map(|i| ((i * 7 + seed as usize % 13) as f64).sin()).collect();
        let s = Spline::new(basis, coeffs).unwrap();
        let e = expand(&PiecewisePoly::from_spline(&s), &synth);
        let energy: f64 = e.coeffs().iter().map(|a| a * a).sum();
        let norm2 = s.lp_norm(2.0).powi(2);
        prop_assert!((energy - norm2).abs() < 1e-8 * norm2.max(1.0), "{} vs {}", energy, norm2);
        let x = 0.123 + (seed % 700) as f64 / 1000.0;
        prop_assert!((e.sum().eval(x) - s.eval(x)).abs() < 1e-8 * (1.0 + s.eval(x).abs()));
    }

    #[test]
    fn maximal_function_dominates_the_sum(center in 0.1f64..0.9, width in 0.005f64..0.09, k in 2usize..=3) {
        let sys = build_system(&KnotSequence::dyadic(k, 63).unwrap(), 64).unwrap();
        let synth = Synthesis::new(&sys).unwrap();
        let atom = Atom::dipole(center, width).unwrap();
        let e = expand(&atom.profile, &synth);
        prop_assert!(max_norm1(&e, 1e-6) >= sum_norm1(&e) * (1.0 - 1e-6));
    }

    #[test]
    fn atomic_decomposition_reconstructs_with_valid_atoms(center in 0.1f64..0.9, width in 0.005f64..0.09) {
        let sys = build_system(&KnotSequence::dyadic(2, 63).unwrap(), 64).unwrap();
        let synth = Synthesis::new(&sys).unwrap();
        let atom = Atom::dipole(center, width).unwrap();
        let e = expand(&atom.profile, &synth);
        let dec = atomic_decompose(&e, 40, 0.4).unwrap();
        prop_assert!(!dec.truncated);
        prop_assert!(dec.reconstruction_error < 1e-6);
        prop_assert!(dec.all_atoms_valid());
        for a in &dec.atoms {
            prop_assert!(a.eta > 0.0);
            prop_assert!(a.atom.check().passes(a.atom.kind));
        }
    }

    #[test]
    fn sign_flip_trace_is_a_running_maximum(seed in any::<u64>(), trials in 1usize..60) {
        let sys = build_system(&KnotSequence::dyadic(2, 31).unwrap(), 32).unwrap();
        let synth = Synthesis::new(&sys).unwrap();
        let e: Expansion = expand(&Atom::dipole(0.4, 0.05).unwrap().profile, &synth);
        let terms: Vec<Vec<f64>> = (0..synth.len())
            .map(|m| synth.member_coeffs(m).iter().map(|c| c * e.coeffs()[m]).collect())
            .collect();
        let trace = sign_flip_trace(synth.basis(), &terms, trials, seed);
        prop_assert_eq!(trace.len(), trials);
        prop_assert!(trace.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn higher_order_regularity_is_controlled_by_the_square_of_lower_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for k in 2..=4 {
        for _ in 0..10 {
            let seq = KnotSequence::random(k, 40, 0.0, &mut rng).unwrap();
            let lower = regularity_parameter(&seq, k - 1, 41).unwrap().gamma;
            let upper = regularity_parameter(&seq, k, 41).unwrap().gamma;
            assert!(upper <= lower * lower * (1.0 + 1e-12), "k={k}: {upper} > {lower}^2");
        }
    }
}
