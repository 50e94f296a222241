//! The empirical loss evaluated at the true conditional law shrinks like 1/N.
//!
//! Plugging the closed-form survival function into the full-batch weighted
//! self-consistency loss (constant weight) leaves only sampling noise, so the
//! loss decays at the parametric rate as the dataset grows, while a
//! mismatched law stalls at its bias floor.
//!
//! Run with: cargo run --release --example loss_at_truth

use scene::loss::streaming_residuals;
use scene::simulation::{simulate, true_survival, SimulationSpec};
use scene::survival::DenomGuard;

fn main() -> scene::Result<()> {
    let sizes = [500usize, 1000, 2000, 4000];
    let seeds = 10u64;
    println!("N       loss at truth    loss at mismatched law");
    let mut points = Vec::new();
    for &n in &sizes {
        let mut at_truth = 0.0;
        let mut mismatched = 0.0;
        for seed in 0..seeds {
            let spec = SimulationSpec::ph(n, 5, 5.0, 30_000 + seed);
            let data = simulate(&spec)?;
            let times: Vec<f64> = data.records().iter().map(|r| r.time).collect();
            let phi = vec![1.0; data.len()];
            let truth = streaming_residuals(
                data.records(),
                &times,
                &phi,
                |t, x| true_survival(t, x, &spec),
                DenomGuard::FloorAt(1e-12),
            )?;
            at_truth += truth.c_tilde;
            // wrong law: ignores covariates and decays far too fast
            let wrong = streaming_residuals(
                data.records(),
                &times,
                &phi,
                |t, _| (-t).exp(),
                DenomGuard::FloorAt(1e-12),
            )?;
            mismatched += wrong.c_tilde;
        }
        at_truth /= seeds as f64;
        mismatched /= seeds as f64;
        println!("{:<7} {:<16.3e} {:.3e}", n, at_truth, mismatched);
        points.push(((n as f64).ln(), at_truth.ln()));
    }

    // least-squares slope on the log-log points
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<f64>();
    println!("\nlog-log slope of the loss at truth: {:.2} (parametric rate is -1)", slope);
    Ok(())
}
