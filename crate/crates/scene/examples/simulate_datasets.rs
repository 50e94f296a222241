//! The two synthetic data-generating processes and their censoring behavior.
//!
//! Draws proportional-hazards and proportional-odds datasets, compares the
//! realized censoring rates against the closed-form expectation
//! E_x[ E_C S(C|x) ], and writes one dataset plus its metadata sidecar.
//!
//! Run with: cargo run --release --example simulate_datasets

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scene::io::{write_dataset, write_sidecar, SimulationSidecar};
use scene::simulation::{risk_exponent, simulate, SimModel, SimulationSpec};

fn expected_censoring(spec: &SimulationSpec) -> f64 {
    // censoring probability given x has a closed form for both laws; average
    // it over the covariate distribution by Monte Carlo
    let mut rng = ChaCha8Rng::seed_from_u64(b'q' as u64);
    let m = 200_000;
    let mut acc = 0.0;
    for _ in 0..m {
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let f = risk_exponent(&x, spec.r).unwrap();
        acc += match spec.model {
            SimModel::Ph => {
                let h = (spec.lambda_param * f.exp()).exp();
                (1.0 - (-h * spec.tau).exp()) / (h * spec.tau)
            }
            SimModel::Po => {
                let a = f.exp();
                (1.0 + spec.tau * a).ln() / (spec.tau * a)
            }
        };
    }
    acc / m as f64
}

fn main() -> scene::Result<()> {
    for spec in [
        SimulationSpec::ph(4000, 5, 5.0, 7),
        SimulationSpec::ph(4000, 5, 19.0, 7),
        SimulationSpec::po(4000, 5, 5.0, 7),
        SimulationSpec::po(4000, 5, 35.0, 7),
    ] {
        let data = simulate(&spec)?;
        println!(
            "{:?} tau={:>4}: realized censoring {:.2}%, closed-form expectation {:.2}%",
            spec.model,
            spec.tau,
            100.0 * data.censoring_rate(),
            100.0 * expected_censoring(&spec)
        );
    }

    let spec = SimulationSpec::ph(500, 5, 19.0, 11);
    let data = simulate(&spec)?;
    let out = std::env::temp_dir().join("scene-example-ph.csv");
    write_dataset(&data, &out)?;
    let sidecar_path = out.with_extension("csv.meta.json");
    write_sidecar(&SimulationSidecar::new(&spec, &data), &sidecar_path)?;
    println!("\nwrote {} and {}", out.display(), sidecar_path.display());
    Ok(())
}
