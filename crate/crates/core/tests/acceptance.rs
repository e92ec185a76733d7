// End-to-end acceptance checks, one PASS/FAIL line each. Runs without the test harness.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use textshift::analysis::{
    compare_domains, conditional_probabilities, joint_probabilities, tsne, Direction, TsneConfig,
};
use textshift::cnn::{backward, cross_entropy_loss, CnnConfig, CnnModel};
use textshift::corpus::{split, synth_generate, Corpus, Document, DomainTag, LabelSet, SynthConfig};
use textshift::embeddings::{init_embeddings, read_word2vec_binary, write_word2vec_binary, Vocabulary, PAD};
use textshift::fasttext::{FastTextConfig, FastTextModel};
use textshift::training::checkpoint::{decode, encode};
use textshift::training::{batch_gradient, evaluate, train, Checkpoint, OptimizerConfig, OptimizerState, TrainConfig};
use textshift::{Error, Model};

fn report(id: u32, name: &str, ok: bool, detail: impl std::fmt::Display) -> bool {
    println!("[{id}] {} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn within(elapsed: Duration, secs: u64) -> bool {
    elapsed <= Duration::from_secs(secs)
}

fn words(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i}")).collect()
}

fn labels(c: usize) -> LabelSet {
    LabelSet::new((0..c).map(|i| format!("c{i}"))).unwrap()
}

/// Tiny CNN with every parameter group randomized.
fn random_cnn(rng: &mut ChaCha8Rng, dropout: f64) -> CnnModel {
    let k = rng.random_range(1..=4);
    let mut widths: Vec<usize> = (1..=4).filter(|_| rng.random_bool(0.5)).collect();
    if widths.is_empty() {
        widths.push(rng.random_range(1..=4));
    }
    let per_width = rng.random_range(1..=3);
    let classes = rng.random_range(2..=4);
    let vocab = Vocabulary::from_tokens(words(rng.random_range(2..=6)));
    let embeddings = init_embeddings(&vocab, None, k, 0.8, rng.random()).unwrap();
    let config = CnnConfig {
        embed_dim: k,
        filter_widths: widths,
        filters_per_width: per_width,
        dropout,
        seed: rng.random(),
        ..CnnConfig::default()
    };
    let mut m = CnnModel::new(config, labels(classes), vocab, embeddings).unwrap();
    for bank in &mut m.banks {
        bank.weights.iter_mut().for_each(|w| *w = rng.random_range(-1.0..1.0));
        bank.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    }
    for w in m.dense.iter_mut().chain(m.dense_bias.iter_mut()) {
        *w = rng.random_range(-1.0..1.0);
    }
    m
}

/// Token ids excluding PAD, of length 1..=7 (short ones get padded).
fn random_ids(rng: &mut ChaCha8Rng, m: &CnnModel) -> Vec<usize> {
    let len = rng.random_range(1..=7);
    (0..len).map(|_| rng.random_range(1..m.vocab.len())).collect()
}

fn train_loss(m: &CnnModel, ids: &[usize], mask: &[f64], label: usize) -> (f64, Vec<usize>) {
    let cache = m.forward_ids(ids, Some(mask)).unwrap();
    (cross_entropy_loss(&cache.probabilities, label), cache.argmax)
}

fn c1_gradient_check() -> bool {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let mut skipped = 0usize;
    for _ in 0..100 {
        let m = random_cnn(&mut rng, 0.5);
        let ids = random_ids(&mut rng, &m);
        let mask: Vec<f64> = (0..m.num_features())
            .map(|_| if rng.random_bool(0.6) { 1.0 } else { 0.0 })
            .collect();
        let label = rng.random_range(0..m.num_classes());
        let cache = m.forward_ids(&ids, Some(&mask)).unwrap();
        let g = backward(&m, &cache, label).unwrap();

        let mut check = |analytic: f64, perturb: &dyn Fn(&mut CnnModel, f64)| {
            let mut a = m.clone();
            perturb(&mut a, h);
            let mut b = m.clone();
            perturb(&mut b, -h);
            let (la, arg_a) = train_loss(&a, &ids, &mask, label);
            let (lb, arg_b) = train_loss(&b, &ids, &mask, label);
            // A pooling winner flipping inside the stencil is a kink, not a
            // gradient error.
            if arg_a != cache.argmax || arg_b != cache.argmax {
                skipped += 1;
                return;
            }
            let num = (la - lb) / (2.0 * h);
            let denom = analytic.abs().max(num.abs()).max(1e-6);
            worst = worst.max((analytic - num).abs() / denom);
            checked += 1;
        };

        for i in 0..m.dense.len() {
            check(g.dense[i], &|mm, d| mm.dense[i] += d);
        }
        for c in 0..m.dense_bias.len() {
            check(g.dense_bias[c], &|mm, d| mm.dense_bias[c] += d);
        }
        for bi in 0..m.banks.len() {
            for i in 0..m.banks[bi].weights.len() {
                check(g.filter_weights[bi][i], &|mm, d| mm.banks[bi].weights[i] += d);
            }
            for j in 0..m.banks[bi].bias.len() {
                check(g.filter_bias[bi][j], &|mm, d| mm.banks[bi].bias[j] += d);
            }
        }
        let k = m.embeddings.dim;
        for row in (0..m.vocab.len()).filter(|&r| r != PAD) {
            for q in 0..k {
                let analytic = g.embeddings.get(&row).map_or(0.0, |v| v[q]);
                check(analytic, &|mm, d| mm.embeddings.row_mut(row)[q] += d);
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = worst <= 1e-4 && within(elapsed, 60) && skipped * 100 < checked;
    report(
        1,
        "gradient check",
        ok,
        format!("max rel err {worst:.3e} over {checked} params ({skipped} kinks skipped) in {elapsed:.2?}"),
    )
}

fn cnn_oracle(m: &CnnModel, ids: &[usize]) -> Vec<f64> {
    let k = m.embeddings.dim;
    let n = ids.len().max(m.max_width());
    let x: Vec<Vec<f64>> = (0..n)
        .map(|i| if i < ids.len() { m.embeddings.row(ids[i]).to_vec() } else { vec![0.0; k] })
        .collect();
    let mut z = Vec::new();
    for bank in &m.banks {
        let h = bank.width;
        for j in 0..bank.bias.len() {
            let mut best = f64::NEG_INFINITY;
            for i in 0..=n - h {
                let mut s = bank.bias[j];
                for r in 0..h {
                    for q in 0..k {
                        s += bank.weights[j * h * k + r * k + q] * x[i + r][q];
                    }
                }
                best = best.max(s.tanh());
            }
            z.push(best);
        }
    }
    let f = z.len();
    let p = 1.0 - m.config.dropout;
    (0..m.num_classes())
        .map(|c| {
            let mut s = m.dense_bias[c];
            for j in 0..f {
                s += p * m.dense[c * f + j] * z[j];
            }
            s
        })
        .collect()
}

fn fnv(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn fasttext_oracle(m: &FastTextModel, tokens: &[String]) -> Vec<f64> {
    let d = m.config.dim;
    let mut rows: Vec<&[f64]> = Vec::new();
    for t in tokens {
        let i = m.vocab.get(t).unwrap_or(1);
        rows.push(&m.word_table[i * d..(i + 1) * d]);
    }
    for n in 2..=m.config.n_max {
        for w in tokens.windows(n) {
            let b = (fnv(w.join("\u{1f}").as_bytes()) % m.config.buckets as u64) as usize;
            rows.push(&m.ngram_table[b * d..(b + 1) * d]);
        }
    }
    let hidden: Vec<f64> = (0..d)
        .map(|q| rows.iter().map(|r| r[q]).sum::<f64>() / rows.len() as f64)
        .collect();
    (0..m.num_classes())
        .map(|c| m.output_bias[c] + (0..d).map(|q| m.output[c * d + q] * hidden[q]).sum::<f64>())
        .collect()
}

fn c2_forward_oracles() -> bool {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_cnn = 0.0f64;
    for _ in 0..100 {
        let dropout = rng.random_range(0.0..0.8);
        let m = random_cnn(&mut rng, dropout);
        let ids = random_ids(&mut rng, &m);
        let got = m.forward_ids(&ids, None).unwrap().logits;
        for (a, b) in got.iter().zip(cnn_oracle(&m, &ids)) {
            worst_cnn = worst_cnn.max((a - b).abs());
        }
    }

    let mut worst_ft = 0.0f64;
    for _ in 0..100 {
        let config = FastTextConfig {
            dim: rng.random_range(1..=8),
            n_max: rng.random_range(1..=4),
            buckets: rng.random_range(1..=64),
            seed: rng.random(),
            ..FastTextConfig::default()
        };
        let vocab = Vocabulary::from_tokens(words(rng.random_range(1..=8)));
        let mut m = FastTextModel::new(config, labels(rng.random_range(2..=5)), vocab).unwrap();
        for w in m.output.iter_mut().chain(m.output_bias.iter_mut()) {
            *w = rng.random_range(-1.0..1.0);
        }
        // v0..v9 covers both known and unseen words.
        let tokens: Vec<String> = (0..rng.random_range(1..=10))
            .map(|_| format!("v{}", rng.random_range(0..10)))
            .collect();
        let got = m.predict(&tokens).unwrap();
        let logits = m.logits(&m.hidden(&m.bag(&tokens)).unwrap());
        let expected = fasttext_oracle(&m, &tokens);
        for (a, b) in logits.iter().zip(&expected) {
            worst_ft = worst_ft.max((a - b).abs());
        }
        assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let elapsed = start.elapsed();
    let ok = worst_cnn <= 1e-10 && worst_ft <= 1e-10 && within(elapsed, 10);
    report(
        2,
        "forward oracles",
        ok,
        format!("cnn max |diff| {worst_cnn:.2e}, baseline max |diff| {worst_ft:.2e} in {elapsed:.2?}"),
    )
}

fn c3_dropout_scaling() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let samples = 10_000;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let dropout = rng.random_range(0.1..0.7);
        let m = random_cnn(&mut rng, dropout);
        let ids = random_ids(&mut rng, &m);
        let test = m.forward_ids(&ids, None).unwrap().logits;
        let c = test.len();
        let mut sum = vec![0.0; c];
        let mut sum_sq = vec![0.0; c];
        for _ in 0..samples {
            let mask = m.sample_mask(&mut rng);
            let logits = m.forward_ids(&ids, Some(&mask)).unwrap().logits;
            for j in 0..c {
                sum[j] += logits[j];
                sum_sq[j] += logits[j] * logits[j];
            }
        }
        let n = samples as f64;
        for j in 0..c {
            let mean = sum[j] / n;
            let var = ((sum_sq[j] - n * mean * mean) / (n - 1.0)).max(0.0);
            let se = (var / n).sqrt();
            let z = (mean - test[j]).abs() / se.max(1e-15);
            worst = worst.max(z);
        }
    }
    report(3, "dropout test-time scaling", worst <= 3.0, format!("max deviation {worst:.3} standard errors"))
}

fn small_synth(seed: u64, per_class: usize) -> Corpus {
    synth_generate(&SynthConfig {
        seed,
        docs_per_class_source: per_class,
        docs_per_class_target: 5,
        ..SynthConfig::default()
    })
    .unwrap()
    .source
}

fn c4_norm_cap() -> bool {
    let corpus = small_synth(4, 40);
    let config = CnnConfig {
        embed_dim: 16,
        filters_per_width: 8,
        seed: 4,
        ..CnnConfig::default()
    };
    let mut model = CnnModel::from_corpus(config, &corpus, None).unwrap();
    let data: Vec<(Vec<usize>, usize)> = corpus
        .documents
        .iter()
        .map(|d| (model.token_ids(&d.tokens), d.label))
        .collect();
    // A large plain step drives rows past the cap quickly.
    let mut optimizer = OptimizerState::new(OptimizerConfig::Sgd { lr: 50.0 }, &mut model);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cap = 10.0 + 1e-9;
    let mut worst = 0.0f64;
    let mut capped_steps = 0;
    for _ in 0..100 {
        let batch: Vec<usize> = (0..10).map(|_| rng.random_range(0..data.len())).collect();
        let masks: Vec<Vec<f64>> = batch.iter().map(|_| model.sample_mask(&mut rng)).collect();
        let (grads, _) = batch_gradient(&model, &data, &batch, &masks, true).unwrap();
        optimizer.step(&mut model, &grads).unwrap();
        let f = model.num_features();
        if model.dense.chunks(f).any(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt() > cap) {
            capped_steps += 1;
        }
        model.apply_constraints();
        for row in model.dense.chunks(f) {
            worst = worst.max(row.iter().map(|x| x * x).sum::<f64>().sqrt());
        }
    }
    report(
        4,
        "dense row norm cap",
        worst <= cap && capped_steps > 0,
        format!("max post-step row norm {worst:.12} over 100 steps, cap binding on {capped_steps}"),
    )
}

fn c5_synthetic_domain_gap() -> bool {
    let start = Instant::now();
    let corpora = synth_generate(&SynthConfig {
        seed: 1,
        num_classes: 6,
        docs_per_class_source: 300,
        docs_per_class_target: 60,
        keyword_rate: 0.3,
        ..SynthConfig::default()
    })
    .unwrap();
    let (tr, val, te) = split(&corpora.source, (1200, 300, 300), 1).unwrap();
    let target = &corpora.target;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let (cnn, ft) = pool.install(|| {
        let tc = TrainConfig {
            max_epochs: 6,
            patience: 2,
            seed: 1,
            ..TrainConfig::default()
        };
        let cnn_config = CnnConfig {
            seed: 1,
            ..CnnConfig::default()
        };
        let cnn = train(Model::Cnn(CnnModel::from_corpus(cnn_config, &tr, None).unwrap()), &tr, &val, &tc).unwrap();
        let ft_config = FastTextConfig {
            seed: 1,
            ..FastTextConfig::default()
        };
        let ft_tc = TrainConfig { max_epochs: 20, patience: 5, ..tc };
        let ft = train(Model::FastText(FastTextModel::from_corpus(ft_config, &tr).unwrap()), &tr, &val, &ft_tc).unwrap();
        (cnn.model, ft.model)
    });
    let acc = |m: &Model, c: &Corpus| evaluate(m, c).unwrap().accuracy;
    let (cnn_src, cnn_tgt) = (acc(&cnn, &te), acc(&cnn, target));
    let (ft_src, ft_tgt) = (acc(&ft, &te), acc(&ft, target));
    let elapsed = start.elapsed();
    let floor = 3.0 / 6.0;
    let ok = cnn_src >= 0.95
        && cnn_tgt >= 0.70
        && ft_src >= 0.90
        && cnn_tgt >= floor
        && ft_tgt >= floor
        && cnn_src > cnn_tgt
        && ft_src > ft_tgt
        && within(elapsed, 300);
    report(
        5,
        "synthetic domain adaptation",
        ok,
        format!(
            "cnn source {cnn_src:.4} target {cnn_tgt:.4}; baseline source {ft_src:.4} target {ft_tgt:.4}; {elapsed:.1?}"
        ),
    )
}

fn doc_corpus(docs: &[&str]) -> Corpus {
    let documents = docs
        .iter()
        .enumerate()
        .map(|(i, text)| Document {
            id: i.to_string(),
            label: 0,
            tokens: text.split_whitespace().map(str::to_string).collect(),
            domain: DomainTag::Source,
        })
        .collect();
    Corpus::new(labels(1), documents).unwrap()
}

fn c6_domain_comparison() -> bool {
    let synth = small_synth(6, 50);
    let same = compare_domains(&synth, &synth, 5).unwrap();
    let identical = !same.shared.is_empty()
        && same.shared.iter().all(|t| t.ratio_ab == 1.0 && t.ratio_ba == 1.0)
        && (same.pearson - 1.0).abs() <= 1e-12;

    let hand = compare_domains(&doc_corpus(&["a a b"]), &doc_corpus(&["a b b b"]), 1).unwrap();
    let [a, b] = [&hand.shared[0], &hand.shared[1]];
    let exact = a.word == "a"
        && b.word == "b"
        && a.f_a == 2.0 / 3.0
        && a.f_b == 1.0 / 4.0
        && b.f_a == 1.0 / 3.0
        && b.f_b == 3.0 / 4.0
        && a.ratio_ab == 8.0 / 3.0
        && b.ratio_ab == 4.0 / 9.0
        && hand.pearson == -1.0;

    let corpora = synth_generate(&SynthConfig::default()).unwrap();
    let cmp = compare_domains(&corpora.source, &corpora.target, 5).unwrap();
    let mut tables_ok = true;
    for dir in [Direction::AOverB, Direction::BOverA] {
        let csv = String::from_utf8(cmp.table_csv(dir, 15).unwrap()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        tables_ok &= lines[0] == "rank,word,f_a,f_b,ratio" && lines.len() == 16;
        tables_ok &= lines[1..].iter().enumerate().all(|(i, l)| l.starts_with(&format!("{},", i + 1)));
    }
    tables_ok &= cmp.summary_line().starts_with("pearson=");
    report(
        6,
        "domain comparison",
        identical && exact && tables_ok,
        format!(
            "identical rho {:.15}, hand example rho {}, two 15-row tables {}",
            same.pearson, hand.pearson, tables_ok
        ),
    )
}

fn c7_tsne_clusters() -> bool {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let dim = 10;
    let mut x = Vec::new();
    let mut label = Vec::new();
    for c in 0..3 {
        for _ in 0..50 {
            x.push(
                (0..dim)
                    .map(|q| normal.sample(&mut rng) + if q == c { 10.0 } else { 0.0 })
                    .collect::<Vec<f64>>(),
            );
            label.push(c);
        }
    }
    let n = x.len();
    let cond = conditional_probabilities(&x, 30.0).unwrap();
    let joint = joint_probabilities(&x, 30.0).unwrap();
    let mut p_err = (joint.iter().sum::<f64>() - 1.0).abs();
    for i in 0..n {
        p_err = p_err.max((cond[i * n..(i + 1) * n].iter().sum::<f64>() - 1.0).abs());
        p_err = p_err.max(joint[i * n + i].abs());
        for j in 0..n {
            p_err = p_err.max((joint[i * n + j] - joint[j * n + i]).abs());
        }
    }

    let out = tsne(&x, &TsneConfig::default()).unwrap();
    let mut agree = 0;
    for i in 0..n {
        let nearest = (0..n)
            .filter(|&j| j != i)
            .min_by(|&a, &b| {
                let d = |j: usize| (out.y[i][0] - out.y[j][0]).powi(2) + (out.y[i][1] - out.y[j][1]).powi(2);
                d(a).total_cmp(&d(b))
            })
            .unwrap();
        agree += usize::from(label[nearest] == label[i]);
    }
    let nn = agree as f64 / n as f64;
    let elapsed = start.elapsed();
    let ok = nn >= 0.95 && out.final_kl() < out.initial_kl() && p_err <= 1e-8 && within(elapsed, 30);
    report(
        7,
        "t-SNE projection",
        ok,
        format!(
            "1-NN agreement {nn:.3}, KL {:.4} -> {:.4}, P invariant err {p_err:.1e}, {elapsed:.2?}",
            out.initial_kl(),
            out.final_kl()
        ),
    )
}

fn flipped_bytes_all_fail(bytes: &[u8]) -> bool {
    (6..bytes.len()).all(|i| {
        let mut bad = bytes.to_vec();
        bad[i] ^= 0x5a;
        matches!(decode(&bad), Err(Error::ChecksumMismatch))
    })
}

fn c8_formats() -> bool {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let normal = Normal::new(0.0f32, 1.0).unwrap();
    let vocab: Vec<String> = (0..1000).map(|i| format!("word{i}")).collect();
    let values: Vec<f32> = (0..1000 * 50).map(|_| normal.sample(&mut rng)).collect();
    let path = dir.path().join("vectors.bin");
    let start = Instant::now();
    write_word2vec_binary(&vocab, 50, &values, &path).unwrap();
    let back = read_word2vec_binary(&path).unwrap();
    let w2v_time = start.elapsed();
    let w2v_ok = back.words == vocab
        && back.dim == 50
        && back.values.iter().zip(&values).all(|(a, b)| a.to_bits() == b.to_bits())
        && w2v_time < Duration::from_secs(1);

    let cnn = random_cnn(&mut rng, 0.5);
    let mut ft = FastTextModel::new(
        FastTextConfig {
            buckets: 97,
            ..FastTextConfig::default()
        },
        labels(3),
        Vocabulary::from_tokens(words(6)),
    )
    .unwrap();
    ft.output.iter_mut().for_each(|w| *w = rng.random_range(-1.0..1.0));

    let probes: Vec<Vec<String>> = (0..20)
        .map(|_| (0..rng.random_range(1..8)).map(|_| format!("v{}", rng.random_range(0..9))).collect())
        .collect();
    let mut same_outputs = true;
    let mut corrupt_detected = true;
    for model in [Model::Cnn(cnn), Model::FastText(ft)] {
        let bytes = encode(&Checkpoint::new(model.clone())).unwrap();
        let saved = dir.path().join("model.ckpt");
        textshift::training::save_model(&Checkpoint::new(model.clone()), &saved).unwrap();
        let loaded = textshift::training::load_model(&saved).unwrap().model;
        same_outputs &= std::fs::read(&saved).unwrap() == bytes;
        for p in &probes {
            let a = textshift::Classifier::predict(&model, p).unwrap();
            let b = textshift::Classifier::predict(&loaded, p).unwrap();
            same_outputs &= a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits());
        }
        corrupt_detected &= flipped_bytes_all_fail(&bytes);
    }
    report(
        8,
        "file formats",
        w2v_ok && same_outputs && corrupt_detected,
        format!(
            "word2vec 1000x50 bit-exact {w2v_ok} in {w2v_time:.2?}; checkpoint outputs identical {same_outputs}; every flipped byte rejected {corrupt_detected}"
        ),
    )
}

fn run_bin(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_textshift")).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn train_twice(dir: &Path, kind: &str, seed: &str) -> bool {
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let (src, tgt, lab, cfg) = (dir.join("src.jsonl"), dir.join("tgt.jsonl"), dir.join("labels.txt"), dir.join("run.json"));
    let mut outputs = Vec::new();
    for round in 0..2 {
        let out = dir.join(format!("{kind}-{round}.ckpt"));
        run_bin(&[
            "train", "--model", kind, "--train", &s(&src), "--val", &s(&tgt), "--labels", &s(&lab), "--out", &s(&out),
            "--config", &s(&cfg), "--deterministic", "--seed", seed, "--epochs", "3",
        ]);
        outputs.push(std::fs::read(out).unwrap());
    }
    outputs[0] == outputs[1]
}

fn c9_deterministic_training() -> bool {
    let dir = tempfile::tempdir().unwrap();
    let s = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    run_bin(&[
        "synth", "--seed", "9", "--src-per-class", "30", "--tgt-per-class", "10", "--out-src", &s("src.jsonl"),
        "--out-tgt", &s("tgt.jsonl"), "--out-labels", &s("labels.txt"),
    ]);
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"cnn": {"embed_dim": 24, "filters_per_width": 6}, "train": {"batch_size": 16}}"#,
    )
    .unwrap();
    let cnn = train_twice(dir.path(), "cnn", "17");
    let ft = train_twice(dir.path(), "fasttext", "17");
    report(9, "deterministic training", cnn && ft, format!("cnn identical {cnn}, baseline identical {ft}"))
}

fn main() {
    let checks: [fn() -> bool; 9] = [
        c1_gradient_check,
        c2_forward_oracles,
        c3_dropout_scaling,
        c4_norm_cap,
        c5_synthetic_domain_gap,
        c6_domain_comparison,
        c7_tsne_clusters,
        c8_formats,
        c9_deterministic_training,
    ];
    let failed = checks
        .iter()
        .filter(|check| !std::panic::catch_unwind(**check).unwrap_or(false))
        .count();
    println!("acceptance: {} of {} passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
