//! Concordance of the learned risk score, with cross-validation machinery.
//!
//! Two measurements on the same simulated cohort:
//! 1. k-fold concordance of the closed-form risk ranking (the ceiling any
//!    estimator can reach on this data, limited by the overlap of the
//!    conditional laws);
//! 2. held-out concordance of a trained generator's risk score (negative mean
//!    generated time), which should recover a good share of that ceiling.
//!
//! The training leg takes a minute or two.
//!
//! Run with: cargo run --release --example cross_validation

use scene::evaluation::kfold_with;
use scene::generator::risk_score;
use scene::simulation::{simulate, true_quantile, SimulationSpec};
use scene::survival::{concordance_index, RiskScores};
use scene::trainer::{train, TrainConfig};

fn main() -> scene::Result<()> {
    let spec = SimulationSpec::ph(1300, 5, 50.0, 42);
    let data = simulate(&spec)?;
    println!(
        "{} records, {:.1}% censored",
        data.len(),
        100.0 * data.censoring_rate()
    );

    // ceiling: rank held-out records by the true conditional median
    let oracle = kfold_with(&data, 5, 7, 1, |_, test, _| {
        test.records()
            .iter()
            .map(|r| true_quantile(0.5, &r.covariates, &spec).map(|m| -m))
            .collect()
    })?;
    println!(
        "closed-form ranking, 5-fold: mean C = {:.4} (sd {:.4})",
        oracle.mean, oracle.sd
    );

    // learned ranking on one train/test split
    let train_idx: Vec<usize> = (0..1000).collect();
    let test_idx: Vec<usize> = (1000..1300).collect();
    let train_set = data.subset(&train_idx)?;
    let test_set = data.subset(&test_idx)?;

    let mut cfg = TrainConfig::low_dim();
    cfg.gen_hidden = vec![128, 128, 128];
    cfg.phi_hidden = vec![128, 128];
    cfg.epochs = 8;
    cfg.time_points = Some(20);
    cfg.k = 200;
    cfg.temperature = 0.5;
    cfg.gen_opt.learning_rate = 1e-3;
    cfg.seed = 3;
    cfg.jobs = std::thread::available_parallelism().map_or(1, |n| n.get());

    let started = std::time::Instant::now();
    let model = train(&train_set, &cfg)?;
    println!("trained in {:.1?}", started.elapsed());

    let scores: Vec<f64> = test_set
        .records()
        .iter()
        .map(|r| risk_score(&model.generator, &r.covariates, 1000, 5))
        .collect::<scene::Result<_>>()?;
    let c = concordance_index(&test_set, &RiskScores::new(scores)?)?;
    println!("learned ranking, held-out 300 records: C = {:.4}", c);
    Ok(())
}
