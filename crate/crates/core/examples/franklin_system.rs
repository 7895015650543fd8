// The piecewise linear (Franklin) system on dyadic knots and a cubic system on random knots:
// orthonormality, characteristic intervals and geometric decay of the coefficients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use splineortho::knotseq::KnotSequence;
use splineortho::orthosys::{build_system, system_decay};

pub fn run() -> splineortho::Result<()> {
    let seq = KnotSequence::dyadic(2, 63)?;
    let sys = build_system(&seq, 64)?;
    println!("Franklin system, N=64: orthonormality defect {:.2e}", sys.orthonormality_defect());
    for n in [2, 3, 5, 17, 40] {
        let f = sys.function(n).expect("n in range");
        let j = f.j_interval();
        println!("  f_{n:<3} new point {:.4}, J_n = [{:.4}, {:.4}], ||f_n||_1 = {:.4}", seq.point(n)?, j.lo, j.hi, f.abs_integral(0.0, 1.0));
    }
    let decay = system_decay(&sys);
    println!("  decay: q = {:?}, C = {:.3}, log slope {:.3}", decay.q, decay.constant, decay.log_slope);

    let seq = KnotSequence::random(4, 99, 0.1, &mut ChaCha8Rng::seed_from_u64(3))?;
    let sys = build_system(&seq, 100)?;
    let decay = system_decay(&sys);
    println!(
        "cubic system on random knots, N=100: defect {:.2e}, q = {:?}, C = {:.3}",
        sys.orthonormality_defect(),
        decay.q,
        decay.constant
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().expect("franklin system example");
}
