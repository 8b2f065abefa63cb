//! Quantile-net parameter save/load: a JSON document with an architecture
//! header and a flat parameter array.

use std::path::Path;

use anyhow::{bail, Context, Result};
use dqpope_core::net::{EmbeddingMode, Linear, QuantileNet};
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    embedding: String,
    cosine_order: Option<usize>,
    state_dim: usize,
    action_count: usize,
    output_clip: Option<f64>,
    /// Full width chain including input and output.
    layer_widths: Vec<usize>,
    params: Vec<f64>,
}

fn flatten(net: &QuantileNet) -> Vec<f64> {
    let mut params = Vec::new();
    for layer in &net.layers {
        params.extend_from_slice(&layer.w);
        params.extend_from_slice(&layer.b);
    }
    if let Some(e) = &net.embed {
        params.extend_from_slice(&e.w);
        params.extend_from_slice(&e.b);
    }
    params
}

pub fn save_model(net: &QuantileNet, path: &Path) -> Result<()> {
    let (embedding, cosine_order) = match net.mode {
        EmbeddingMode::ConcatScalar => ("concat-scalar".to_string(), None),
        EmbeddingMode::Cosine { order } => ("cosine".to_string(), Some(order)),
    };
    let mut layer_widths = vec![net.layers[0].in_dim];
    layer_widths.extend(net.layers.iter().map(|l| l.out_dim));
    let file = ModelFile {
        embedding,
        cosine_order,
        state_dim: net.state_dim,
        action_count: net.action_count,
        output_clip: net.output_clip,
        layer_widths,
        params: flatten(net),
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let json = serde_json::to_string(&file)?;
    std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<QuantileNet> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let file: ModelFile = serde_json::from_str(&text)?;
    let mode = match (file.embedding.as_str(), file.cosine_order) {
        ("concat-scalar", _) => EmbeddingMode::ConcatScalar,
        ("cosine", Some(order)) => EmbeddingMode::Cosine { order },
        (other, _) => bail!("unknown embedding mode {other:?}"),
    };
    if file.layer_widths.len() < 2 {
        bail!("layer_widths must chain at least two sizes");
    }
    let mut layers = Vec::new();
    let mut cursor = 0usize;
    let take = |params: &[f64], cursor: &mut usize, n: usize| -> Result<Vec<f64>> {
        if *cursor + n > params.len() {
            bail!("parameter array too short");
        }
        let out = params[*cursor..*cursor + n].to_vec();
        *cursor += n;
        Ok(out)
    };
    for pair in file.layer_widths.windows(2) {
        let (in_dim, out_dim) = (pair[0], pair[1]);
        let w = take(&file.params, &mut cursor, in_dim * out_dim)?;
        let b = take(&file.params, &mut cursor, out_dim)?;
        layers.push(Linear {
            w,
            b,
            in_dim,
            out_dim,
        });
    }
    let embed = match mode {
        EmbeddingMode::ConcatScalar => None,
        EmbeddingMode::Cosine { order } => {
            let out_dim = file.layer_widths[1];
            let w = take(&file.params, &mut cursor, order * out_dim)?;
            let b = take(&file.params, &mut cursor, out_dim)?;
            Some(Linear {
                w,
                b,
                in_dim: order,
                out_dim,
            })
        }
    };
    if cursor != file.params.len() {
        bail!(
            "parameter array has {} leftover values",
            file.params.len() - cursor
        );
    }
    Ok(QuantileNet {
        mode,
        state_dim: file.state_dim,
        action_count: file.action_count,
        output_clip: file.output_clip,
        layers,
        embed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn save_load_round_trips_both_modes() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (i, mode) in [
            EmbeddingMode::ConcatScalar,
            EmbeddingMode::Cosine { order: 16 },
        ]
        .into_iter()
        .enumerate()
        {
            let net = QuantileNet::new(3, 2, &[8, 8], mode, Some(5.0), &mut rng).unwrap();
            let path = dir.path().join(format!("model{i}.json"));
            save_model(&net, &path).unwrap();
            let loaded = load_model(&path).unwrap();
            assert_eq!(net, loaded);
            let y0 = net.forward(&[0.1, 0.2, 0.3], 1, 0.4).unwrap();
            let y1 = loaded.forward(&[0.1, 0.2, 0.3], 1, 0.4).unwrap();
            assert_eq!(y0.to_bits(), y1.to_bits());
        }
    }
}
