use chartforge::semantics::{
    extract_keywords, load_embeddings, load_embeddings_with_dim, related_terms, EmbeddingTable, Keyword,
    KeywordProvider, RarityKeywords, SemanticsError, CORPUS_DIM,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn synthetic(seed: u64, words: usize, dim: usize) -> (EmbeddingTable, Vec<(String, Vec<f64>, u64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = EmbeddingTable::new(dim);
    let mut raw = Vec::new();
    for i in 0..words {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = rng.random_range(1..50u64);
        table.insert(&format!("w{i}"), v.clone(), f).unwrap();
        raw.push((format!("w{i}"), v, f));
    }
    (table, raw)
}

/// Cosine top-3k then a stable frequency sort, computed from raw vectors.
fn oracle(raw: &[(String, Vec<f64>, u64)], q: usize, k: usize) -> Vec<String> {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut cands: Vec<(usize, f64)> = (0..raw.len())
        .filter(|&i| i != q)
        .map(|i| {
            let dot: f64 = raw[q].1.iter().zip(&raw[i].1).map(|(a, b)| a * b).sum();
            (i, dot / (norm(&raw[q].1) * norm(&raw[i].1)))
        })
        .collect();
    cands.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    cands.truncate(3 * k);
    cands.sort_by(|a, b| raw[b.0].2.cmp(&raw[a.0].2).then(b.1.partial_cmp(&a.1).unwrap()));
    cands.into_iter().take(k).map(|(i, _)| raw[i].0.clone()).collect()
}

#[test]
fn related_terms_match_brute_force_on_100_words() {
    let (table, raw) = synthetic(7, 100, 16);
    for q in 0..100 {
        for k in [1, 3, 5, 10] {
            let got: Vec<String> = related_terms(&raw[q].0, &table, k)
                .unwrap()
                .into_iter()
                .map(|t| t.term)
                .collect();
            assert_eq!(got, oracle(&raw, q, k), "query {q} k {k}");
        }
    }
}

#[test]
fn related_terms_report_rank_and_frequency() {
    let (table, raw) = synthetic(8, 30, 8);
    let out = related_terms("w0", &table, 4).unwrap();
    assert_eq!(out.iter().map(|t| t.rank).collect::<Vec<_>>(), [1, 2, 3, 4]);
    assert!(out.windows(2).all(|w| w[0].frequency >= w[1].frequency));
    assert!(out.iter().all(|t| t.term != "w0"));
    for t in &out {
        let i: usize = t.term[1..].parse().unwrap();
        assert_eq!(t.frequency, raw[i].2);
    }
}

#[test]
fn unknown_word_is_reported() {
    let (table, _) = synthetic(9, 5, 4);
    assert_eq!(
        related_terms("zebra", &table, 3).unwrap_err(),
        SemanticsError::UnknownWord("zebra".into())
    );
}

fn corpus_line(word: &str, dim: usize, freq: u64) -> String {
    let comps: Vec<String> = (0..dim).map(|i| format!("{}", (i as f64 * 0.37).cos())).collect();
    format!("{word} {} {freq}\n", comps.join(" "))
}

#[test]
fn corpus_files_must_be_300_wide() {
    let good = [corpus_line("desert", CORPUS_DIM, 10), corpus_line("sand", CORPUS_DIM, 20)].concat();
    assert_eq!(load_embeddings(good.as_bytes()).unwrap().dim(), 300);
    let narrow = corpus_line("desert", 50, 10);
    assert!(matches!(
        load_embeddings(narrow.as_bytes()),
        Err(SemanticsError::DimensionMismatch { expected: 300, found: 50, line: 1 })
    ));
    let with_header = format!("2 300\n{good}");
    assert_eq!(load_embeddings(with_header.as_bytes()).unwrap().len(), 2);
    assert!(matches!(
        load_embeddings_with_dim(b"word 0.1 0.2 many\n", None),
        Err(SemanticsError::MalformedLine { line: 1, .. })
    ));
}

#[test]
fn title_keywords_drop_stopwords() {
    let kws = extract_keywords("The Area of the Desert in 2020", &RarityKeywords::default()).unwrap();
    let terms: Vec<&str> = kws.terms().collect();
    assert_eq!(terms, ["area", "desert"]);
    assert!(extract_keywords("   ", &RarityKeywords::default()).unwrap().is_empty());
}

struct Noisy;

impl KeywordProvider for Noisy {
    fn score_terms(&self, _: &str) -> Result<Vec<Keyword>, SemanticsError> {
        Ok(vec![
            Keyword { term: "sun".into(), score: 0.2 },
            Keyword { term: "sea".into(), score: 7.0 },
            Keyword { term: " sun ".into(), score: 0.9 },
            Keyword { term: "sky".into(), score: f64::NAN },
        ])
    }
}

#[test]
fn provider_output_is_normalised() {
    let kws = extract_keywords("anything", &Noisy).unwrap();
    let pairs: Vec<(&str, f64)> = kws.keywords.iter().map(|k| (k.term.as_str(), k.score)).collect();
    assert_eq!(pairs, [("sea", 1.0), ("sun", 0.9), ("sky", 0.0)]);
}
