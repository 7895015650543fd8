// Atomic decomposition of expansions driven by the maximal function's superlevel sets.

use splineortho::analysis::{atom_corpus, atomic_decompose, equivalence_report, EquivalenceParams, Synthesis};
use splineortho::knotseq::KnotSequence;
use splineortho::orthosys::build_system;

pub fn run() -> splineortho::Result<()> {
    let sys = build_system(&KnotSequence::dyadic(2, 127)?, 128)?;
    let synth = Synthesis::new(&sys)?;
    let params = EquivalenceParams::default();
    for atom in atom_corpus(4, 11) {
        let e = splineortho::analysis::expand(&atom.profile, &synth);
        let dec = atomic_decompose(&e, params.levels, params.c_threshold)?;
        println!(
            "atom on [{:.4}, {:.4}]: {} atoms, levels {}..={}, C = {}, sum|eta| = {:.4}, ||S||_1 = {:.4}, error {:.1e}, valid {}",
            atom.lo,
            atom.hi,
            dec.atoms.len(),
            dec.r_min,
            dec.r_max,
            dec.c,
            dec.weight_sum(),
            dec.s_norm1,
            dec.reconstruction_error,
            dec.all_atoms_valid()
        );
        let report = equivalence_report(&atom.profile, &synth, params)?;
        for (name, r) in report.ratios() {
            print!("  {name} {r:.3}");
        }
        println!();
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().expect("atomic decomposition example");
}
