use dqpope_core::metrics::midpoint_levels;
use dqpope_core::net::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn curve_std(net: &QuantileNet) -> f64 {
    let g: Vec<f64> = midpoint_levels(99).into_iter().map(|t| net.forward(&[0.0], 0, t).unwrap()).collect();
    let m = g.iter().sum::<f64>() / 99.0;
    (g.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 99.0).sqrt()
}

fn main() {
    for scale_hidden in [1.0f64, 1.6, 2.0, 2.449] {
        for scale_out in [1.0f64, 2.449] {
            let mut stds = Vec::new();
            let mut means = Vec::new();
            for seed in 0..40u64 {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                let mut net = QuantileNet::new(1, 1, &[12, 12], EmbeddingMode::ConcatScalar, None, &mut r).unwrap();
                // rescale: layer 0,1 by scale_hidden; layer 2 by scale_out
                let n_layers = net.layers.len();
                for (i, l) in net.layers.iter_mut().enumerate() {
                    let s = if i + 1 == n_layers { scale_out } else { scale_hidden };
                    l.w.iter_mut().for_each(|w| *w *= s);
                }
                stds.push(curve_std(&net));
                let m0 = net.forward(&[0.0], 0, 0.5).unwrap();
                means.push(m0);
            }
            let avg = stds.iter().sum::<f64>() / stds.len() as f64;
            let mean_abs = means.iter().map(|m| m.abs()).sum::<f64>() / means.len() as f64;
            println!("hidden x{scale_hidden:.3} out x{scale_out:.3}: init curve std avg {avg:.4}, |f(0.5)| avg {mean_abs:.4}");
        }
    }
}
