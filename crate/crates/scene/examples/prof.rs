// scratch profiling harness, not part of the deliverable
use scene::loss::{generator_grad, phi_grad};
use scene::generator::GeneratorModel;
use scene::nn::{Activation, Mlp, OutputActivation};
use scene::simulation::{simulate, SimulationSpec};
use scene::survival::Dataset;

fn main() {
    let data = simulate(&SimulationSpec::ph(2000, 5, 19.0, 7)).unwrap();
    let idx: Vec<usize> = (0..5).collect();
    let batch: Dataset = data.subset(&idx).unwrap();
    let times: Vec<f64> = data.records()[10..15].iter().map(|r| r.time).collect();

    let gen_net = Mlp::init(&[10, 256, 256, 256, 1], Activation::Relu, OutputActivation::Exp, 1).unwrap();
    let gen = GeneratorModel::new(gen_net, 5).unwrap();
    let phi = Mlp::init(&[5, 256, 256, 256, 1], Activation::Relu, OutputActivation::Sigmoid, 2).unwrap();

    let t0 = std::time::Instant::now();
    let reps = 10;
    for r in 0..reps {
        let g = generator_grad(&gen, &phi, &batch, &times, 400, 0.5, r).unwrap();
        std::hint::black_box(g);
    }
    println!("omega step: {:.1} ms", t0.elapsed().as_secs_f64() * 1000.0 / reps as f64);
    let t1 = std::time::Instant::now();
    for r in 0..reps {
        let g = phi_grad(&gen, &phi, &batch, &times, 400, r).unwrap();
        std::hint::black_box(g);
    }
    println!("zeta step: {:.1} ms", t1.elapsed().as_secs_f64() * 1000.0 / reps as f64);
}
