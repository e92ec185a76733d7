//! Corpus frequency statistics and latent-space projection.

mod tsne;

use std::collections::BTreeMap;
use std::path::Path;

pub use tsne::{conditional_probabilities, joint_probabilities, kl_divergence, tsne, TsneConfig, TsneOutput};

use crate::cnn::{extract_features, CnnModel};
use crate::corpus::{Corpus, DomainTag};
use crate::error::{Error, Result};

/// Raw token counts of a corpus; frequencies are counts over the total.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyProfile {
    pub counts: BTreeMap<String, u64>,
    pub total_tokens: u64,
}

impl FrequencyProfile {
    pub fn count(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn frequency(&self, token: &str) -> f64 {
        self.count(token) as f64 / self.total_tokens as f64
    }

    pub fn frequencies(&self) -> impl Iterator<Item = (&str, f64)> {
        let total = self.total_tokens as f64;
        self.counts.iter().map(move |(t, &c)| (t.as_str(), c as f64 / total))
    }
}

pub fn frequency_profile(corpus: &Corpus) -> Result<FrequencyProfile> {
    let mut counts = BTreeMap::new();
    let mut total_tokens = 0u64;
    for doc in &corpus.documents {
        for t in &doc.tokens {
            *counts.entry(t.clone()).or_insert(0) += 1;
            total_tokens += 1;
        }
    }
    if total_tokens == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(FrequencyProfile { counts, total_tokens })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharedToken {
    pub word: String,
    pub f_a: f64,
    pub f_b: f64,
    /// f_a / f_b.
    pub ratio_ab: f64,
    /// f_b / f_a.
    pub ratio_ba: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainComparison {
    /// Tokens frequent enough in both corpora, in lexicographic order.
    pub shared: Vec<SharedToken>,
    pub pearson: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    AOverB,
    BOverA,
}

impl DomainComparison {
    /// The `k` tokens with the largest ratio in the given direction; ties by word.
    pub fn top(&self, direction: Direction, k: usize) -> Vec<&SharedToken> {
        let key = |s: &SharedToken| match direction {
            Direction::AOverB => s.ratio_ab,
            Direction::BOverA => s.ratio_ba,
        };
        let mut all: Vec<&SharedToken> = self.shared.iter().collect();
        all.sort_by(|x, y| key(y).total_cmp(&key(x)).then_with(|| x.word.cmp(&y.word)));
        all.truncate(k);
        all
    }

    /// `rank,word,f_a,f_b,ratio` for the top `k` tokens in one direction.
    pub fn table_csv(&self, direction: Direction, k: usize) -> Result<Vec<u8>> {
        let rows = self.top(direction, k).into_iter().enumerate().map(|(i, s)| {
            let ratio = match direction {
                Direction::AOverB => s.ratio_ab,
                Direction::BOverA => s.ratio_ba,
            };
            vec![
                (i + 1).to_string(),
                s.word.clone(),
                sig12(s.f_a),
                sig12(s.f_b),
                format!("{ratio:.4}"),
            ]
        });
        crate::io::csv_bytes(&["rank", "word", "f_a", "f_b", "ratio"], rows)
    }

    pub fn summary_line(&self) -> String {
        format!("pearson={:.6} shared_tokens={}", self.pearson, self.shared.len())
    }
}

/// Compares two corpora over the tokens seen at least `min_count` times in each.
pub fn compare_domains(a: &Corpus, b: &Corpus, min_count: u64) -> Result<DomainComparison> {
    let pa = frequency_profile(a)?;
    let pb = frequency_profile(b)?;
    let (ta, tb) = (pa.total_tokens, pb.total_tokens);
    let shared: Vec<SharedToken> = pa
        .counts
        .iter()
        .filter_map(|(word, &ca)| {
            let cb = pb.count(word);
            (ca >= min_count.max(1) && cb >= min_count.max(1)).then(|| SharedToken {
                word: word.clone(),
                f_a: ca as f64 / ta as f64,
                f_b: cb as f64 / tb as f64,
                // Integer cross products keep the ratio a single rounding away
                // from the exact rational.
                ratio_ab: (ca as f64 * tb as f64) / (cb as f64 * ta as f64),
                ratio_ba: (cb as f64 * ta as f64) / (ca as f64 * tb as f64),
            })
        })
        .collect();
    if shared.is_empty() {
        return Err(Error::NoSharedTokens);
    }
    let xs: Vec<f64> = shared.iter().map(|s| s.f_a).collect();
    let ys: Vec<f64> = shared.iter().map(|s| s.f_b).collect();
    let pearson = pearson(&xs, &ys)?;
    Ok(DomainComparison { shared, pearson })
}

/// Product-moment correlation, clamped to [-1, 1].
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::ShapeMismatch(format!("pearson: {} vs {} values", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateInput(format!("pearson needs at least 2 pairs, got {}", xs.len())));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput("constant series".into()));
    }
    if xs.len() == 2 {
        // Two distinct points always lie on a line.
        return Ok(sxy.signum());
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pooled first-layer features of every document, one row each.
pub fn corpus_features(model: &CnnModel, corpus: &Corpus) -> Result<Vec<Vec<f64>>> {
    use rayon::prelude::*;
    corpus
        .documents
        .par_iter()
        .map(|d| extract_features(model, &d.tokens))
        .collect()
}

/// Identity and class channels of one projected point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMeta {
    pub id: String,
    pub label: String,
    pub domain: DomainTag,
}

impl PointMeta {
    pub fn from_corpus(corpus: &Corpus) -> Vec<PointMeta> {
        corpus
            .documents
            .iter()
            .map(|d| PointMeta {
                id: d.id.clone(),
                label: corpus.label_set.name(d.label).to_string(),
                domain: d.domain,
            })
            .collect()
    }
}

pub fn projection_csv(y: &[[f64; 2]], meta: &[PointMeta]) -> Result<Vec<u8>> {
    if y.len() != meta.len() {
        return Err(Error::ShapeMismatch(format!("{} points but {} labels", y.len(), meta.len())));
    }
    let rows = y.iter().zip(meta).map(|(p, m)| {
        vec![
            m.id.clone(),
            sig12(p[0]),
            sig12(p[1]),
            m.label.clone(),
            m.domain.as_str().to_string(),
        ]
    });
    crate::io::csv_bytes(&["id", "x", "y", "label_name", "domain_tag"], rows)
}

pub fn export_projection(y: &[[f64; 2]], meta: &[PointMeta], path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), &projection_csv(y, meta)?)
}

/// Twelve significant digits, fixed notation where reasonable.
pub fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let mag = x.abs().log10().floor() as i32;
    if (-5..=15).contains(&mag) {
        let decimals = (11 - mag).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.11e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, LabelSet};
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn corpus_of(docs: &[&str]) -> Corpus {
        let labels = LabelSet::new(["x"]).unwrap();
        let documents = docs
            .iter()
            .enumerate()
            .map(|(i, d)| Document {
                id: i.to_string(),
                label: 0,
                tokens: d.split_whitespace().map(String::from).collect(),
                domain: DomainTag::Source,
            })
            .collect();
        Corpus::new(labels, documents).unwrap()
    }

    #[test]
    fn profile_counts() {
        let p = frequency_profile(&corpus_of(&["a a b"])).unwrap();
        assert_eq!(p.frequency("a"), 2.0 / 3.0);
        assert_eq!(p.frequency("b"), 1.0 / 3.0);
        assert!((p.frequencies().map(|(_, f)| f).sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn profile_of_tokenless_corpus() {
        assert!(matches!(frequency_profile(&corpus_of(&[""])), Err(Error::EmptyCorpus)));
    }

    proptest! {
        #[test]
        fn profile_matches_hash_count(docs in prop::collection::vec(prop::collection::vec(0u8..12, 1..15), 1..10)) {
            let texts: Vec<String> = docs
                .iter()
                .map(|d| d.iter().map(|t| format!("t{t}")).collect::<Vec<_>>().join(" "))
                .collect();
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let p = frequency_profile(&corpus_of(&refs)).unwrap();
            let mut oracle: HashMap<String, u64> = HashMap::new();
            for t in texts.iter().flat_map(|s| s.split(' ')) {
                *oracle.entry(t.to_string()).or_default() += 1;
            }
            let total: u64 = oracle.values().sum();
            prop_assert_eq!(p.total_tokens, total);
            prop_assert_eq!(p.counts.len(), oracle.len());
            for (t, c) in oracle {
                prop_assert_eq!(p.count(&t), c);
            }
            let sum: f64 = p.frequencies().map(|(_, f)| f).sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_corpora() {
        let c = corpus_of(&["a a b c", "c d a b b e"]);
        let cmp = compare_domains(&c, &c, 1).unwrap();
        assert!(cmp.shared.iter().all(|s| s.ratio_ab == 1.0 && s.ratio_ba == 1.0));
        assert!((cmp.pearson - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn two_token_example() {
        let a = corpus_of(&["a a b"]);
        let b = corpus_of(&["a b b b"]);
        let cmp = compare_domains(&a, &b, 1).unwrap();
        let (ta, tb) = (&cmp.shared[0], &cmp.shared[1]);
        assert_eq!((ta.word.as_str(), tb.word.as_str()), ("a", "b"));
        assert_eq!((ta.f_a, ta.f_b), (2.0 / 3.0, 1.0 / 4.0));
        assert_eq!((tb.f_a, tb.f_b), (1.0 / 3.0, 3.0 / 4.0));
        assert_eq!(ta.ratio_ab, 8.0 / 3.0);
        assert_eq!(tb.ratio_ab, 4.0 / 9.0);
        assert!((cmp.pearson + 1.0).abs() <= 1e-12);
    }

    #[test]
    fn ratios_are_reciprocal_and_sorted() {
        let a = corpus_of(&["a a a b b c c c c d e e f f f", "a c e g g g"]);
        let b = corpus_of(&["a b b b c d d e e e e f g", "g g b"]);
        let cmp = compare_domains(&a, &b, 1).unwrap();
        for s in &cmp.shared {
            assert!((s.ratio_ab * s.ratio_ba - 1.0).abs() <= 1e-12);
        }
        let top = cmp.top(Direction::AOverB, 3);
        assert_eq!(top.len(), 3);
        assert!(top.windows(2).all(|w| w[0].ratio_ab >= w[1].ratio_ab));
        let bottom = cmp.top(Direction::BOverA, 100);
        assert_eq!(bottom.len(), cmp.shared.len());
        let max_ba = cmp.shared.iter().map(|s| s.ratio_ba).fold(0.0, f64::max);
        assert_eq!(bottom[0].ratio_ba, max_ba);
    }

    #[test]
    fn min_count_filters() {
        let a = corpus_of(&["a a b"]);
        let b = corpus_of(&["a a b b"]);
        let cmp = compare_domains(&a, &b, 2);
        assert!(matches!(cmp, Err(Error::NoSharedTokens) | Err(Error::DegenerateInput(_))));
        assert!(matches!(compare_domains(&a, &corpus_of(&["z z z"]), 1), Err(Error::NoSharedTokens)));
    }

    #[test]
    fn table_shape() {
        let c = corpus_of(&["a a b c d", "b c d e e e"]);
        let cmp = compare_domains(&c, &corpus_of(&["a b c c d e e e"]), 1).unwrap();
        let text = String::from_utf8(cmp.table_csv(Direction::AOverB, 3).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "rank,word,f_a,f_b,ratio");
        assert!(lines[1].starts_with("1,"));
        assert!(cmp.summary_line().starts_with("pearson="));
    }

    #[test]
    fn pearson_oracles() {
        let x = [1.0, 2.5, -3.0, 4.0, 0.25];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(pearson(&x, &[1.0; 5]), Err(Error::DegenerateInput(_))));
        assert!(matches!(pearson(&[1.0], &[2.0]), Err(Error::DegenerateInput(_))));
    }

    proptest! {
        #[test]
        fn pearson_matches_direct_formula(pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40)) {
            let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            // Single-pass formula.
            let n = xs.len() as f64;
            let (sx, sy): (f64, f64) = (xs.iter().sum(), ys.iter().sum());
            let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| a * b).sum();
            let sxx: f64 = xs.iter().map(|a| a * a).sum();
            let syy: f64 = ys.iter().map(|b| b * b).sum();
            let oracle = (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt());
            prop_assert!((pearson(&xs, &ys).unwrap() - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_csv_round_trip() {
        let y = [[1.234567890123456, -98765.4321], [0.0, 3.3e-7], [1e20, -2.5]];
        let meta: Vec<PointMeta> = (0..3)
            .map(|i| PointMeta {
                id: format!("d{i}"),
                label: "a,b".into(),
                domain: if i == 0 { DomainTag::Source } else { DomainTag::Target },
            })
            .collect();
        let bytes = projection_csv(&y, &meta).unwrap();
        let mut reader = csv::Reader::from_reader(bytes.as_slice());
        let headers = reader.headers().unwrap().clone();
        assert_eq!(headers.iter().collect::<Vec<_>>(), ["id", "x", "y", "label_name", "domain_tag"]);
        let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 3);
        for (row, p) in rows.iter().zip(&y) {
            for (field, v) in [(&row[1], p[0]), (&row[2], p[1])] {
                let back: f64 = field.parse().unwrap();
                assert!((back - v).abs() <= 1e-9 * v.abs().max(1.0), "{field} vs {v}");
            }
            assert_eq!(&row[3], "a,b");
        }
        assert_eq!(&rows[1][4], "target");
    }

    #[test]
    fn empty_projection_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        export_projection(&[], &[], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "id,x,y,label_name,domain_tag\n");
        assert!(matches!(projection_csv(&[[0.0, 0.0]], &[]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn sig12_digits() {
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(1.5), "1.5");
        assert_eq!(sig12(-123.456789012345), "-123.456789012");
        assert_eq!(sig12(1e20), "1.00000000000e20");
    }
}
