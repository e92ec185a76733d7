// One forward pass through an untrained sentence CNN, in test and train mode.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use textshift::cnn::{extract_features, CnnConfig, CnnModel, Mode};
use textshift::corpus::{synth_generate, SynthConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let corpora = synth_generate(&SynthConfig {
        docs_per_class_source: 10,
        ..SynthConfig::default()
    })?;
    let config = CnnConfig {
        embed_dim: 16,
        filters_per_width: 8,
        ..CnnConfig::default()
    };
    let mut model = CnnModel::from_corpus(config, &corpora.source, None)?;
    let doc = &corpora.source.documents[0];

    let probs = model.predict(&doc.tokens)?;
    println!("test-mode probabilities: {probs:.4?}");
    let z = extract_features(&model, &doc.tokens)?;
    println!("pooled features: {} (widths {:?})", z.len(), model.config.filter_widths);

    model.mode = Mode::Train;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mask = model.sample_mask(&mut rng);
    let (_, cache) = model.forward(&doc.tokens, Some(&mask))?;
    let kept = mask.iter().filter(|&&m| m == 1.0).count();
    println!("train mode kept {kept}/{} features, logits {:.4?}", mask.len(), cache.logits);
    Ok(())
}

fn main() {
    run_example().unwrap();
}
