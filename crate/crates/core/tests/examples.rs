mod knot_regularity {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/knot_regularity.rs"));
}

#[test]
fn knot_regularity_runs() {
    knot_regularity::run().expect("knot_regularity example should run");
}

mod bspline_gram {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/bspline_gram.rs"));
}

#[test]
fn bspline_gram_runs() {
    bspline_gram::run().expect("bspline_gram example should run");
}

mod franklin_system {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/franklin_system.rs"));
}

#[test]
fn franklin_system_runs() {
    franklin_system::run().expect("franklin_system example should run");
}

mod square_and_maximal {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/square_and_maximal.rs"));
}

#[test]
fn square_and_maximal_runs() {
    square_and_maximal::run().expect("square_and_maximal example should run");
}

mod atomic_decomposition {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/atomic_decomposition.rs"));
}

#[test]
fn atomic_decomposition_runs() {
    atomic_decomposition::run().expect("atomic_decomposition example should run");
}

mod adversarial_divergence {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/adversarial_divergence.rs"));
}

#[test]
fn adversarial_divergence_runs() {
    adversarial_divergence::run().expect("adversarial_divergence example should run");
}
