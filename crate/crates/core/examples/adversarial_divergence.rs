// Clustered knot insertions that are (k-1)-regular but not k-regular, and the growth of the
// square function on a fixed atom as the number of stages increases.

use splineortho::adversary::{divergence_experiment, generate, max_feasible_delta, verify_lemma_properties, AdversarialConfig};
use splineortho::knotseq::regularity_parameter;

pub fn run() -> splineortho::Result<()> {
    let ladder = [1, 2, 4, 8];
    let cfg = AdversarialConfig { k: 2, ell: 8, delta: max_feasible_delta(8, 2.0) / 4.0, ..Default::default() };
    let adv = generate(&cfg)?;
    let report = verify_lemma_properties(&adv, cfg.gamma, cfg.a)?;
    println!("{} stages, lemma properties hold: {}", adv.stages.len(), report.all_passed());
    for ell in 1..=cfg.k {
        let r = regularity_parameter(&adv.seq, ell, adv.seq.max_n())?;
        println!("  gamma(ell={ell}) = {:.3}", r.gamma);
    }

    let rep = divergence_experiment(&ladder, &cfg, 1e-6)?;
    print!("{}", splineortho::io::growth_csv(&rep.rows)?);
    println!("slope {:.4}, R^2 {:.4}", rep.slope, rep.r2);
    for c in &rep.control {
        println!("control ell={}: ||P phi||_1 = {:.3e}", c.ell, c.square_norm1);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().expect("adversarial divergence example");
}
