use stepsel::bench::{run_scenario2, NonlinearTruth, ScenarioConfig};
use stepsel::net::Activation;

fn main() {
    for truth in [NonlinearTruth::Hump, NonlinearTruth::Wiggle] {
        for (hidden, lr, epochs, batch, l2, bins) in [
            (vec![16usize, 16], 0.005, 300, 256, 0.0, 20),
            (vec![16, 16], 0.005, 300, 256, 1e-4, 20),
            (vec![8, 8], 0.005, 300, 256, 0.0, 20),
            (vec![16], 0.005, 300, 256, 0.0, 20),
            (vec![16, 16], 0.003, 500, 512, 1e-4, 20),
        ] {
            let mut cfg = ScenarioConfig::defaults_for(2).unwrap();
            cfg.truth = truth;
            cfg.n_repetitions = 2;
            cfg.arch.activation = Activation::Tanh;
            cfg.arch.hidden = hidden.clone();
            cfg.arch.l2 = l2;
            cfg.train.learning_rate = lr;
            cfg.train.epochs = epochs;
            cfg.train.batch_strata = batch;
            cfg.ale_bins = bins;
            let o = run_scenario2(&cfg, None).unwrap();
            println!("{:?} h={hidden:?} lr={lr} ep={epochs} b={batch} l2={l2} bins={bins}: dnn {:.4} spline {:.4} ratio {:.2}",
                truth, o.dnn_mse, o.spline_mse, o.dnn_mse / o.spline_mse);
        }
    }
}
