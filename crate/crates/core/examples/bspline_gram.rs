// B-spline evaluation, the banded Gram matrix and rows of its inverse.

use splineortho::bspline::{dual_rows, gram, BSplineBasis, Spline};
use splineortho::knotseq::KnotSequence;

pub fn run() -> splineortho::Result<()> {
    let seq = KnotSequence::uniform(2, 7)?;
    let grid = seq.grid(seq.max_n())?;
    let basis = BSplineBasis::new(&grid);
    let g = gram(&basis);
    let h = 1.0 / 8.0;
    println!("k=2, h=1/8: G[3][3] = {:.6} (2h/3 = {:.6}), G[3][4] = {:.6} (h/6 = {:.6})",
        g.entry(3, 3), 2.0 * h / 3.0, g.entry(3, 4), h / 6.0);

    let seq = KnotSequence::dyadic(4, 30)?;
    let basis = BSplineBasis::new(&seq.grid(seq.max_n())?);
    let mut vals = vec![0.0; basis.order()];
    let worst = (0..=1000)
        .map(|i| {
            basis.eval_nonzero(i as f64 / 1000.0, &mut vals);
            (vals.iter().sum::<f64>() - 1.0).abs()
        })
        .fold(0.0, f64::max);
    println!("k=4: dimension {}, partition of unity defect {worst:.2e}", basis.dim());

    let g = gram(&basis);
    let rows: Vec<usize> = (0..basis.dim()).collect();
    let inv = dual_rows(&g, &rows)?;
    println!(
        "inverse rows: checkerboard slack {:.2e}, diagonal bound defect {:.2e}, residual {:.2e}",
        inv.checkerboard_slack(),
        inv.diagonal_bound_defect(&g),
        inv.residual(&g)
    );

    let s = Spline::new(basis.clone(), (0..basis.dim()).map(|i| (i as f64).sin()).collect())?;
    let ds = s.derivative()?;
    let x = 0.37;
    let fd = (s.eval(x + 1e-6) - s.eval(x - 1e-6)) / 2e-6;
    println!("s'(0.37) = {:.8}, central difference {:.8}, ||s||_1 = {:.6}", ds.eval(x), fd, s.lp_norm(1.0));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().expect("bspline gram example");
}
