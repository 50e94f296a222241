//! Quantile-quantile comparison of generated survival times against the truth.
//!
//! After a short training run, the generator's sample quantiles at a fixed
//! covariate point are paired with the closed-form quantiles of the simulated
//! law; an accurate generator puts the pairs on the diagonal.
//!
//! Run with: cargo run --release --example qq_check

use scene::evaluation::qq_series;
use scene::generator::sample_times;
use scene::io::write_qq;
use scene::simulation::{simulate, SimulationSpec, TruthOracle};
use scene::trainer::{train, TrainConfig};

fn main() -> scene::Result<()> {
    let spec = SimulationSpec::ph(800, 5, 19.0, 8);
    let data = simulate(&spec)?;

    let mut cfg = TrainConfig::low_dim();
    cfg.gen_hidden = vec![64, 64, 64];
    cfg.phi_hidden = vec![64, 64];
    cfg.epochs = 6;
    cfg.k = 200;
    cfg.time_points = Some(20);
    cfg.temperature = 0.5;
    cfg.gen_opt.learning_rate = 1e-3;
    cfg.seed = 2;
    cfg.jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let model = train(&data, &cfg)?;

    let truth = TruthOracle::new(spec)?;
    let x = vec![0.5; 5];
    let batch = sample_times(&model.generator, &x, 10_000, 77)?;
    let qq = qq_series(&truth, &x, &batch, 100)?;

    println!("level   true quantile   generated quantile");
    for (i, &q) in qq.levels.iter().enumerate() {
        if (i + 1) % 10 == 0 {
            println!(
                "{:>5.2} {:>15.3} {:>20.3}",
                q, qq.true_quantiles[i], qq.generated_quantiles[i]
            );
        }
    }
    let r = pearson(&qq.true_quantiles, &qq.generated_quantiles);
    println!("\nPearson correlation of the quantile pairs: {:.4}", r);

    let out = std::env::temp_dir().join("scene-example-qq.csv");
    write_qq(&qq, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va.sqrt() * vb.sqrt())
}
