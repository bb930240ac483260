use voronoi_area::distributions::{GammaParams, ScaleVector};
use voronoi_area::fit::{solve, FitProblem, SolverConfig};

fn main() {
    let y1 = vec![0.1, 0.15, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0];
    let y2 = vec![0.05, 0.075, 0.1, 0.15, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0];
    for (k, y, m) in [(4, y1.clone(), 1.75), (5, y2, 1.5), (5, y1, 1.5)] {
        let p = FitProblem::new(
            GammaParams::default(),
            ScaleVector::dyadic(k).unwrap(),
            y,
            m,
            None,
        )
        .unwrap();
        let r = solve(&p, &SolverConfig::default()).unwrap();
        println!("{r:?}");
    }
}
