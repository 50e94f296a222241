//! Pointwise empirical bands over replicate estimates.
//!
//! Fits the Kaplan-Meier estimator on 100 replicate datasets, evaluates every
//! curve on a shared grid, and reports the 90% pointwise band together with
//! its coverage of the true marginal survival function.
//!
//! Run with: cargo run --release --example empirical_bands

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scene::evaluation::empirical_band;
use scene::io::write_band;
use scene::simulation::{simulate, true_survival, SimulationSpec};
use scene::survival::{km_estimate, SurvivalCurve};

fn main() -> scene::Result<()> {
    let tau = 5.0;
    let grid: Vec<f64> = (1..=25).map(|i| i as f64 * tau * 0.9 / 25.0).collect();

    let curves: Vec<SurvivalCurve> = (0..100)
        .map(|seed| {
            let data = simulate(&SimulationSpec::ph(400, 5, tau, 1000 + seed))?;
            let km = km_estimate(&data)?;
            SurvivalCurve::new(grid.clone(), grid.iter().map(|&t| km.eval(t)).collect())
        })
        .collect::<scene::Result<_>>()?;

    let band = empirical_band(&curves, 0.90)?;

    // marginal truth E_x[S(t|x)] by Monte Carlo
    let spec = SimulationSpec::ph(1, 5, tau, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws: Vec<[f64; 2]> = (0..100_000)
        .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
        .collect();
    let marginal = |t: f64| -> f64 {
        draws.iter().map(|x| true_survival(t, x, &spec)).sum::<f64>() / draws.len() as f64
    };

    println!("t      lower   mean    upper   truth   inside");
    let mut covered = 0;
    for (j, &t) in band.grid.iter().enumerate() {
        let truth = marginal(t);
        let inside = band.lower[j] <= truth && truth <= band.upper[j];
        covered += usize::from(inside);
        if j % 5 == 0 {
            println!(
                "{:<6.2} {:.4}  {:.4}  {:.4}  {:.4}  {}",
                t, band.lower[j], band.mean[j], band.upper[j], truth, inside
            );
        }
    }
    println!(
        "\nband covers the marginal truth at {} of {} grid points",
        covered,
        band.grid.len()
    );

    let out = std::env::temp_dir().join("scene-example-band.csv");
    write_band(&band, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
