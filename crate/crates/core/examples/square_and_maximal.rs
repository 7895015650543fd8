// Square function, maximal function and random sign changes of an atom's expansion.

use splineortho::analysis::{
    expand, largest_term_norm1, max_norm1, sign_flip_supremum, sq_norm1, Atom, Synthesis,
};
use splineortho::knotseq::KnotSequence;
use splineortho::orthosys::build_system;

pub fn run() -> splineortho::Result<()> {
    let sys = build_system(&KnotSequence::dyadic(2, 127)?, 128)?;
    let synth = Synthesis::new(&sys)?;
    for (center, half) in [(0.5, 0.25), (0.3, 1.0 / 64.0), (0.71, 0.01)] {
        let atom = Atom::dipole(center, half)?;
        let e = expand(&atom.profile, &synth);
        let p = sq_norm1(&e, 1e-6);
        let s = max_norm1(&e, 1e-6);
        let l = largest_term_norm1(&e, 1e-6);
        let eps = sign_flip_supremum(&e, 200, 1);
        println!(
            "dipole at {center:.3} width {:.4}: ||P||_1 = {p:.4}  ||S||_1 = {s:.4}  ||max term||_1 = {l:.4}  sup_eps = {eps:.4}",
            2.0 * half
        );
    }
    let e = expand(&Atom::dipole(0.5, 0.125)?.profile, &synth);
    print!("{}", splineortho::io::square_maximal_csv(&e, 1.0 / 16.0)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().expect("square and maximal example");
}
