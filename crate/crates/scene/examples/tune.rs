// scratch experiment runner, not part of the deliverable
use scene::simulation::{simulate, SimulationSpec};
use scene::trainer::{train, variable_importance, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let hid: usize = args.first().map_or(64, |s| s.parse().unwrap());
    let k: usize = args.get(1).map_or(200, |s| s.parse().unwrap());
    let lr: f64 = args.get(2).map_or(1e-3, |s| s.parse().unwrap());
    let max_epochs: usize = args.get(3).map_or(26, |s| s.parse().unwrap());
    let seed: u64 = args.get(4).map_or(0, |s| s.parse().unwrap());

    let p = 30;
    let spec = SimulationSpec::ph(2000, p, 19.0, 60_000 + seed);
    let data = simulate(&spec).unwrap();

    for epochs in [38usize, 42, 46, 50] {
        if epochs > max_epochs { break; }
        let mut cfg = TrainConfig::high_dim();
        cfg.gen_hidden = vec![hid, hid, hid];
        cfg.phi_hidden = vec![64, 64];
        cfg.epochs = epochs;
        cfg.vs_epochs = 0;
        cfg.variable_selection = false;
        cfg.vs_auto_trigger = false;
        cfg.batch_size = 5;
        cfg.time_points = Some(20);
        cfg.k = k;
        cfg.temperature = 0.5;
        cfg.gen_opt.learning_rate = lr;
        cfg.seed = seed;
        cfg.jobs = 2;
        let t0 = std::time::Instant::now();
        let model = train(&data, &cfg).unwrap();
        let iv = variable_importance(&model.generator);
        let p_u = model.generator.p_u();
        let aux_mean = iv.threshold;
        let s1 = iv.gamma[p_u];
        let s2 = iv.gamma[p_u + 1];
        let mut noise: Vec<f64> = (2..p).map(|j| iv.gamma[p_u + j]).collect();
        noise.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let below = noise.iter().filter(|&&g| g <= aux_mean).count();
        println!(
            "epochs {:>2}: aux_mean {:.3} | x1 {:.3} x2 {:.3} | noise med {:.3} max {:.3} | {}/28 below ({:.0?})",
            epochs,
            aux_mean,
            s1,
            s2,
            noise[14],
            noise[27],
            below,
            t0.elapsed()
        );
    }
}
