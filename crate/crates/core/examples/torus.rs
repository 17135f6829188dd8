//! Desk-scale run on the torus product system; prints the leading solutions.

use koopman_core::dynamics::{generate, SystemSpec};
use koopman_core::pipeline::{analyze, AnalysisConfig};

fn main() -> koopman_core::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8000);
    let q: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(400);
    let t0 = std::time::Instant::now();
    let traj = generate(&SystemSpec::<f64>::fayad_torus_product(), 0, 0.01, n, 0.0)?;
    println!("generate: {:?}", t0.elapsed());
    let a = analyze(&traj, &AnalysisConfig::new(q))?;
    println!("{:?}", a.timings);
    println!("epsilon {:.4}  markov residual {:.2e}", a.epsilon, a.markov_residual);
    for (j, l) in a.spectrum.lambdas.iter().take(11).enumerate() {
        println!("lambda_{j} = {l:.6}");
    }
    println!("skew {:.4}", a.generator.skew_residual());
    for j in 0..10 {
        let g = a.generator.gammas[j];
        println!("{j}: gamma = {:+.5} {:+.5}i  E = {:.4}", g.re, g.im, a.generator.energies[j]);
    }
    Ok(())
}
