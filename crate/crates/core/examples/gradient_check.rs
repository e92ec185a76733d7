// Compares analytic CNN gradients with central differences on a tiny model.

use textshift::cnn::{backward, cross_entropy_loss, CnnConfig, CnnModel};
use textshift::corpus::LabelSet;
use textshift::embeddings::{init_embeddings, Vocabulary};

fn loss(model: &CnnModel, ids: &[usize], mask: &[f64], label: usize) -> f64 {
    let cache = model.forward_ids(ids, Some(mask)).unwrap();
    cross_entropy_loss(&cache.probabilities, label)
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let config = CnnConfig {
        embed_dim: 3,
        filter_widths: vec![2, 3],
        filters_per_width: 2,
        seed: 4,
        ..CnnConfig::default()
    };
    let vocab = Vocabulary::from_tokens(["a", "b", "c", "d"].map(String::from));
    let emb = init_embeddings(&vocab, None, 3, 0.5, 1)?;
    let mut model = CnnModel::new(config, LabelSet::new(["x", "y", "z"])?, vocab, emb)?;
    for (i, w) in model.dense.iter_mut().enumerate() {
        *w = ((i * 7 % 11) as f64 - 5.0) * 0.1;
    }

    let ids = [2, 3, 4, 5, 2];
    let mask = [1.0, 0.0, 1.0, 1.0];
    let label = 1;
    let grads = backward(&model, &model.forward_ids(&ids, Some(&mask))?, label)?;

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..model.dense.len() {
        let orig = model.dense[i];
        model.dense[i] = orig + h;
        let up = loss(&model, &ids, &mask, label);
        model.dense[i] = orig - h;
        let down = loss(&model, &ids, &mask, label);
        model.dense[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let rel = (numeric - grads.dense[i]).abs() / numeric.abs().max(grads.dense[i].abs()).max(1e-7);
        worst = worst.max(rel);
    }
    for j in 0..model.banks[1].weights.len() {
        let orig = model.banks[1].weights[j];
        model.banks[1].weights[j] = orig + h;
        let up = loss(&model, &ids, &mask, label);
        model.banks[1].weights[j] = orig - h;
        let down = loss(&model, &ids, &mask, label);
        model.banks[1].weights[j] = orig;
        let numeric = (up - down) / (2.0 * h);
        let analytic = grads.filter_weights[1][j];
        let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-7);
        worst = worst.max(rel);
    }
    println!("max relative error over dense and width-3 filters: {worst:.2e}");
    assert!(worst < 1e-4);
    Ok(())
}

fn main() {
    run_example().unwrap();
}
