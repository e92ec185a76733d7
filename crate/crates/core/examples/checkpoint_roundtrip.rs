use textshift::cnn::{CnnConfig, CnnModel};
use textshift::corpus::{synth_generate, SynthConfig};
use textshift::training::checkpoint::{self, load_cnn, load_fasttext};
use textshift::training::{load_model, save_model, Checkpoint};
use textshift::{Error, Model};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let corpora = synth_generate(&SynthConfig {
        docs_per_class_source: 5,
        ..SynthConfig::default()
    })?;
    let config = CnnConfig {
        embed_dim: 8,
        filters_per_width: 3,
        ..CnnConfig::default()
    };
    let model = CnnModel::from_corpus(config, &corpora.source, None)?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.ckpt");
    save_model(&Checkpoint::new(Model::Cnn(model.clone())), &path)?;
    println!("wrote {} bytes", std::fs::metadata(&path)?.len());

    let loaded = load_cnn(&path)?;
    for doc in corpora.target.documents.iter().take(5) {
        assert_eq!(model.predict(&doc.tokens)?, loaded.predict(&doc.tokens)?);
    }
    println!("predictions identical after reload");

    match load_fasttext(&path) {
        Err(Error::BadModelKind { expected, found }) => println!("asked for {expected}, file holds {found}"),
        other => panic!("unexpected {other:?}"),
    }

    let mut bytes = std::fs::read(&path)?;
    let mid = bytes.len() / 2;
    bytes[mid] ^= 1;
    assert!(matches!(checkpoint::decode(&bytes), Err(Error::ChecksumMismatch)));
    println!("flipped bit detected");
    assert!(load_model(dir.path().join("missing.ckpt")).is_err());
    Ok(())
}

fn main() {
    run_example().unwrap();
}
