use dqpope_core::env::*;
use dqpope_core::metrics::*;
use dqpope_core::ope::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let env = make_cartpole_env();
    let target = Policy::Mixture { base: Box::new(Policy::HeuristicCartPole), base_fraction: 0.5 };
    let mut r = ChaCha8Rng::seed_from_u64(99);
    let oracle = mc_return_distribution(&env, &target, 1000, &mut r).unwrap();

    for base in [10_000u64, 20_000] {
        for n in [1000usize, 4000, 16000] {
            let mut w1s = Vec::new();
            for seed in 0..5u64 {
                let mut r = ChaCha8Rng::seed_from_u64(base + seed);
                let data = collect_dataset(&env, &target, n, &mut r).unwrap();
                let epochs = (6000 * 64usize).div_ceil(n);
                let cfg = TrainConfig { learning_rate: 0.001, epochs_per_iteration: epochs, m_target_samples: 2, m_quantile_levels: 4, ..TrainConfig::cartpole() };
                let tr = dqpope_train(&data, &target, 2, &cfg, &mut r).unwrap();
                let est = mixture_return_samples(&tr.model, &env, &target, 2000, &mut r).unwrap();
                w1s.push(w1_empirical(&est, &oracle));
            }
            let m = w1s.iter().sum::<f64>() / 5.0;
            println!("base {base} N {n}: {w1s:.2?} mean {m:.3}");
        }
        for rate in [1.0f64, 0.8, 0.6, 0.4] {
            let behavior = Policy::Mixture { base: Box::new(target.clone()), base_fraction: rate };
            let mut w1s = Vec::new();
            for seed in 0..5u64 {
                let mut r = ChaCha8Rng::seed_from_u64(base + 100 + seed);
                let data = collect_dataset(&env, &behavior, 4000, &mut r).unwrap();
                let cfg = TrainConfig { learning_rate: 0.001, epochs_per_iteration: 96, m_target_samples: 2, m_quantile_levels: 4, ..TrainConfig::cartpole() };
                let tr = dqpope_train(&data, &target, 2, &cfg, &mut r).unwrap();
                let est = mixture_return_samples(&tr.model, &env, &target, 2000, &mut r).unwrap();
                w1s.push(w1_empirical(&est, &oracle));
            }
            let m = w1s.iter().sum::<f64>() / 5.0;
            println!("base {base} mix {rate}: mean {m:.3}");
        }
    }
}
