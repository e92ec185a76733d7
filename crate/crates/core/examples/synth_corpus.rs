// Generates a small source/target corpus pair and writes both as jsonl.

use textshift::corpus::{load_corpus, synth_generate, tokenize, CorpusFormat, SynthConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let config = SynthConfig {
        num_classes: 4,
        docs_per_class_source: 20,
        docs_per_class_target: 5,
        seed: 11,
        ..SynthConfig::default()
    };
    let corpora = synth_generate(&config)?;
    println!(
        "source: {} docs, {} tokens; target: {} docs",
        corpora.source.len(),
        corpora.source.num_tokens(),
        corpora.target.len()
    );
    for (c, words) in corpora.class_keywords.iter().enumerate() {
        println!("  {:<28} {}", corpora.source.label_set.name(c), words[..4].join(" "));
    }

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("source.jsonl");
    corpora.source.save_jsonl(&path)?;
    let back = load_corpus(&path, CorpusFormat::Jsonl, &corpora.source.label_set)?;
    assert_eq!(back, corpora.source);

    // Raw text goes through the same tokenizer.
    println!("{:?}", tokenize("Senior Accountant, NYC -- full-time!", 100));
    Ok(())
}

fn main() {
    run_example().unwrap();
}
