//! Built-in invariant suite behind the `selfcheck` CLI command: quick
//! re-derivations of the core identities on fresh fuzz data, so a build can be
//! sanity-checked on any machine without the full test harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::generator::{sample_times, smoothed_survival, GeneratorModel};
use crate::nn::{Activation, Mlp, OutputActivation};
use crate::oracle::solve_self_consistent;
use crate::survival::{km_estimate, km_residual, Dataset, DenomGuard, Record};
use crate::trainer::variable_importance;

fn fuzz_dataset(rng: &mut ChaCha8Rng, n: usize, censor_frac: f64) -> Dataset {
    Dataset::new(
        (0..n)
            .map(|_| Record {
                time: rng.gen_range(0.01..10.0),
                event: rng.r#gen::<f64>() >= censor_frac,
                covariates: vec![rng.gen_range(-1.0..1.0)],
            })
            .collect(),
    )
    .expect("fuzz data is valid")
}

fn km_self_consistency(rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    for case in 0..40 {
        let data = fuzz_dataset(rng, 5 + case % 60, 0.1 + 0.7 * (case % 7) as f64 / 7.0);
        let curve = km_estimate(&data).map_err(|e| e.to_string())?;
        for r in data.records() {
            let res = km_residual(&curve, &data, r.time, DenomGuard::ErrorBelow(1e-12))
                .map_err(|e| e.to_string())?;
            if res.abs() >= 1e-10 {
                return Err(format!("residual {:e} at t={}", res, r.time));
            }
        }
    }
    Ok(())
}

fn oracle_matches_km(rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    for case in 0..20 {
        let data = fuzz_dataset(rng, 4 + case * 7, 0.5);
        let sol = solve_self_consistent(&data, 1e-12, 20_000).map_err(|e| e.to_string())?;
        let km = km_estimate(&data).map_err(|e| e.to_string())?;
        for (t, v) in sol.grid.iter().zip(&sol.values) {
            if (v - km.eval(*t)).abs() >= 1e-8 {
                return Err(format!("oracle {} vs km {} at t={}", v, km.eval(*t), t));
            }
        }
    }
    Ok(())
}

fn backward_finite_difference(rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    for case in 0..10u64 {
        let dims = [2 + (case as usize % 3), 4, 1];
        let hidden = if case % 2 == 0 { Activation::Tanh } else { Activation::Relu };
        let mlp = Mlp::init(&dims, hidden, OutputActivation::Sigmoid, 7000 + case)
            .map_err(|e| e.to_string())?;
        let input: Vec<f64> = (0..dims[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, cache) = mlp.forward(&input).map_err(|e| e.to_string())?;
        let (grads, _) = mlp.backward(&cache, 1.0).map_err(|e| e.to_string())?;
        let h = 1e-5;
        for l in 0..mlp.num_layers() {
            for i in 0..mlp.weights()[l].len() {
                let mut plus = mlp.clone();
                plus.set_weight_for_check(l, i, mlp.weights()[l][i] + h);
                let mut minus = mlp.clone();
                minus.set_weight_for_check(l, i, mlp.weights()[l][i] - h);
                let up = plus.forward(&input).map_err(|e| e.to_string())?.0;
                let down = minus.forward(&input).map_err(|e| e.to_string())?.0;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.weights[l][i];
                let diff = (analytic - numeric).abs();
                if diff > 1e-8 && diff / analytic.abs().max(numeric.abs()).max(1e-3) > 1e-5 {
                    return Err(format!(
                        "net {} layer {} weight {}: analytic {} vs numeric {}",
                        case, l, i, analytic, numeric
                    ));
                }
            }
        }
    }
    Ok(())
}

fn smoothed_gradient_finite_difference(rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    for case in 0..3u64 {
        let net = Mlp::init(&[5, 4, 1], Activation::Tanh, OutputActivation::Exp, 8100 + case)
            .map_err(|e| e.to_string())?;
        let model = GeneratorModel::new(net, 3).map_err(|e| e.to_string())?;
        let aux: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (t, temp) = (1.0, 0.3);
        let (_, grads) = smoothed_survival(&model, &x, &aux, t, temp).map_err(|e| e.to_string())?;
        let h = 1e-5;
        for l in 0..model.net().num_layers() {
            for i in 0..model.net().weights()[l].len() {
                let mut plus = model.clone();
                plus.bump_weight_for_check(l, i, h);
                let mut minus = model.clone();
                minus.bump_weight_for_check(l, i, -h);
                let vp = smoothed_survival(&plus, &x, &aux, t, temp)
                    .map_err(|e| e.to_string())?
                    .0;
                let vm = smoothed_survival(&minus, &x, &aux, t, temp)
                    .map_err(|e| e.to_string())?
                    .0;
                let numeric = (vp - vm) / (2.0 * h);
                let analytic = grads.weights[l][i];
                let diff = (analytic - numeric).abs();
                if diff > 1e-8 && diff / analytic.abs().max(numeric.abs()).max(1e-3) > 1e-4 {
                    return Err(format!(
                        "case {} layer {} weight {}: analytic {} vs numeric {}",
                        case, l, i, analytic, numeric
                    ));
                }
            }
        }
    }
    Ok(())
}

fn importance_path_product(rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    for _ in 0..5 {
        let dims = vec![4usize, 3, 2, 1];
        let w1: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w2: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w3: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let biases = vec![vec![0.0; 3], vec![0.0; 2], vec![0.0; 1]];
        let net = Mlp::from_parts(
            dims,
            Activation::Relu,
            OutputActivation::Exp,
            vec![w1.clone(), w2.clone(), w3.clone()],
            biases,
        )
        .map_err(|e| e.to_string())?;
        let gen = GeneratorModel::new(net, 2).map_err(|e| e.to_string())?;
        let iv = variable_importance(&gen);
        for j in 0..4 {
            let mut brute = 0.0;
            for i1 in 0..3 {
                for i2 in 0..2 {
                    brute += w3[i2].abs() * w2[i2 * 3 + i1].abs() * w1[i1 * 4 + j].abs();
                }
            }
            if (iv.gamma[j] - brute).abs() > 1e-12 {
                return Err(format!("input {}: {} vs {}", j, iv.gamma[j], brute));
            }
        }
    }
    Ok(())
}

fn determinism(_rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    let net = Mlp::init(&[6, 5, 1], Activation::Relu, OutputActivation::Exp, 42)
        .map_err(|e| e.to_string())?;
    let model = GeneratorModel::new(net, 4).map_err(|e| e.to_string())?;
    let a = sample_times(&model, &[0.1, -0.2], 64, 7).map_err(|e| e.to_string())?;
    let b = sample_times(&model, &[0.1, -0.2], 64, 7).map_err(|e| e.to_string())?;
    if a.times != b.times {
        return Err("same seed produced different samples".into());
    }
    Ok(())
}

impl Mlp {
    fn set_weight_for_check(&mut self, layer: usize, idx: usize, value: f64) {
        self.weights_mut()[layer][idx] = value;
    }
}

impl GeneratorModel {
    fn bump_weight_for_check(&mut self, layer: usize, idx: usize, delta: f64) {
        self.net_mut().weights_mut()[layer][idx] += delta;
    }
}

/// Runs every check, printing one line per check. Returns true when all pass.
pub fn run_selfcheck(out: &mut dyn std::io::Write) -> bool {
    type Check = fn(&mut ChaCha8Rng) -> std::result::Result<(), String>;
    let checks: &[(&str, Check)] = &[
        ("km-self-consistency", km_self_consistency),
        ("oracle-matches-km", oracle_matches_km),
        ("backward-finite-difference", backward_finite_difference),
        ("smoothed-gradient-finite-difference", smoothed_gradient_finite_difference),
        ("importance-path-product", importance_path_product),
        ("determinism", determinism),
    ];
    let mut all_ok = true;
    for (name, check) in checks {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
        match check(&mut rng) {
            Ok(()) => {
                let _ = writeln!(out, "ok   {}", name);
            }
            Err(msg) => {
                all_ok = false;
                let _ = writeln!(out, "FAIL {}: {}", name, msg);
            }
        }
    }
    all_ok
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selfcheck_passes_on_this_build() {
        let mut buf = Vec::new();
        assert!(run_selfcheck(&mut buf));
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.lines().all(|l| l.starts_with("ok   ")));
    }
}
