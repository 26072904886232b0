use polybubble::bubble::{residual_ladder, Bubble};
use polybubble::lattice::{Lattice, Selection};
use polybubble::quadrature::constants_table;
use polybubble::reduced::{scaling_ladder, SolverOptions};
use polybubble::ProblemConfig;

#[test]
fn heights_and_residual_follow_the_scaling_laws() {
    let cfg = ProblemConfig::example();
    let consts = constants_table(&cfg).unwrap();
    let lat = Lattice::generate(1, &Selection::FullBox { radius: 5 }, 7, 1, 1.0).unwrap();
    let ls = [8.0, 16.0, 32.0, 64.0];
    let t = std::time::Instant::now();
    let rep = scaling_ladder(&cfg, &lat, &consts, &ls, &SolverOptions::default()).unwrap();
    eprintln!("ladder {:?} slope {} dev {}", t.elapsed(), rep.fitted_slope, rep.relative_deviation);
    for r in &rep.rows {
        eprintln!("L={} res={:e} mu=[{:e},{:e}] off={:e} mirror={:e}", r.l, r.residual, r.min_mu, r.max_mu, r.max_offset, r.mirror_asymmetry);
    }
    assert!(rep.relative_deviation < 0.01);
    let rungs: Vec<(f64, Vec<Bubble>)> = rep
        .rows
        .iter()
        .map(|r| {
            let b = r.centers.iter().zip(&r.mu).map(|(c, &mu)| Bubble { center: c.clone(), mu }).collect();
            (r.l, b)
        })
        .collect();
    let t = std::time::Instant::now();
    let res = residual_ladder(&cfg, &rungs, 80, 3).unwrap();
    eprintln!("residual {:?} {:#?}", t.elapsed(), res);
    assert!(res.strictly_decreasing);
    assert!(res.relative_deviation < 0.25);
}
