// Regularity parameters of a few knot sequences, and the effect of clustering points.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use splineortho::knotseq::{regularity_parameter, KnotSequence};

pub fn run() -> splineortho::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sequences = [
        ("dyadic", KnotSequence::dyadic(3, 63)?),
        ("uniform", KnotSequence::uniform(3, 8)?),
        ("random", KnotSequence::random(3, 63, 0.2, &mut rng)?),
    ];
    for (name, seq) in &sequences {
        print!("{name:>8}:");
        for ell in 1..=seq.order() {
            let r = regularity_parameter(seq, ell, seq.max_n())?;
            print!("  gamma(ell={ell}) = {:<10.4}", r.gamma);
        }
        println!();
    }

    // Triple points keep higher spans regular while the single-span ratio blows up.
    let mut points = KnotSequence::dyadic(3, 7)?.points().to_vec();
    points.extend([0.3, 0.3, 0.3]);
    let seq = KnotSequence::new(3, points)?;
    for ell in 1..=3 {
        let r = regularity_parameter(&seq, ell, seq.max_n())?;
        println!("repeated knot, ell={ell}: gamma = {:.4}, worst pair at {:?}", r.gamma, r.witness);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().expect("knot regularity example");
}
