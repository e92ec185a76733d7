// Trains the hashed n-gram baseline on synthetic source data and scores it
// on both domains.

use textshift::corpus::{split, synth_generate, SynthConfig};
use textshift::fasttext::{extract_ngrams, ft_train, FastTextConfig, FastTextModel};
use textshift::training::evaluate;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let corpora = synth_generate(&SynthConfig {
        docs_per_class_source: 60,
        docs_per_class_target: 20,
        seed: 5,
        ..SynthConfig::default()
    })?;
    let (train, _, test) = split(&corpora.source, (300, 0, 60), 1)?;

    let config = FastTextConfig {
        buckets: 1 << 16,
        ..FastTextConfig::default()
    };
    let tokens = &train.documents[0].tokens[..3];
    println!("n-gram buckets of {tokens:?}: {:?}", extract_ngrams(tokens, config.n_max, config.buckets));

    let mut model = FastTextModel::from_corpus(config, &train)?;
    ft_train(&mut model, &train, 20, 0.25)?;
    println!("source test accuracy {:.3}", evaluate(&model, &test)?.accuracy);
    println!("target accuracy      {:.3}", evaluate(&model, &corpora.target)?.accuracy);
    Ok(())
}

fn main() {
    run_example().unwrap();
}
