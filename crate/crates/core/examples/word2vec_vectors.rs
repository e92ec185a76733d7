// Writes a word2vec binary table, reads it back, and seeds an embedding
// matrix with it.

use textshift::embeddings::{init_embeddings, read_word2vec_binary, write_word2vec_binary, Vocabulary, PAD};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let words: Vec<String> = ["nurse", "ledger", "python"].map(String::from).to_vec();
    let dim = 4;
    let values: Vec<f32> = (0..words.len() * dim).map(|i| i as f32 * 0.125 - 0.5).collect();

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("vectors.bin");
    write_word2vec_binary(&words, dim, &values, &path)?;
    let table = read_word2vec_binary(&path)?;
    assert_eq!(table.words, words);
    assert_eq!(table.values, values);
    println!("{} words x {} dims, {} bytes", table.words.len(), table.dim, std::fs::metadata(&path)?.len());

    let vocab = Vocabulary::from_tokens(["ledger", "audit"].map(String::from));
    let emb = init_embeddings(&vocab, Some(&table), dim, 0.25, 3)?;
    let ledger = vocab.get("ledger").unwrap();
    println!("ledger  {:?}", emb.row(ledger));
    println!("audit   {:?} (random, not in the table)", emb.row(vocab.get("audit").unwrap()));
    assert!(emb.row(PAD).iter().all(|&v| v == 0.0));
    Ok(())
}

fn main() {
    run_example().unwrap();
}
