//! Shared fixtures for the benchmarks.

use polybubble::lattice::interaction_matrix;
use polybubble::quadrature::constants_table;
use polybubble::reduced::scaling_ladder;
use polybubble::{Bubble, BubbleField, Cutoff, HeightSystem, Lattice, ProblemConfig, Selection, SolverOptions};

/// The example problem on the box `{-5..5}`.
pub fn example_system() -> HeightSystem {
    let cfg = ProblemConfig::example();
    let consts = constants_table(&cfg).expect("example constants");
    let lat = Lattice::generate(cfg.k, &Selection::FullBox { radius: 5 }, cfg.n, cfg.m, 1.0).expect("lattice");
    let d = interaction_matrix(&lat, cfg.n, cfg.m).expect("interaction matrix");
    HeightSystem::new(d, cfg.kappa(), consts.b).expect("height system")
}

/// Bubble field of the example problem at `L = l`.
pub fn example_field(l: f64) -> BubbleField {
    let cfg = ProblemConfig::example();
    let consts = constants_table(&cfg).expect("example constants");
    let lat = Lattice::generate(cfg.k, &Selection::FullBox { radius: 5 }, cfg.n, cfg.m, 1.0).expect("lattice");
    let rep = scaling_ladder(&cfg, &lat, &consts, &[l, 2.0 * l], &SolverOptions::default()).expect("ladder");
    let row = &rep.rows[0];
    let bubbles = row
        .centers
        .iter()
        .zip(&row.mu)
        .map(|(c, &mu)| Bubble { center: c.clone(), mu })
        .collect();
    BubbleField::new(bubbles, &cfg, Cutoff::Cubic).expect("field")
}
