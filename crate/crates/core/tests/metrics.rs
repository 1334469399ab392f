use proptest::prelude::*;

use neurocap::decoder::{DecoderConfig, DecoderModel};
use neurocap::embedding::HashBagEmbedder;
use neurocap::metrics::meteor::{align, greedy_align};
use neurocap::metrics::{evaluate, meteor, meteor_tokens, perplexity, sentence_similarity, EvalItem};
use neurocap::nn::seeded_rng;
use neurocap::vocab::Vocabulary;

/// Brute force over every one-to-one pairing of equal tokens: returns the
/// maximum match count and the fewest chunks among maximum pairings.
fn oracle_alignment(reference: &[&str], hypothesis: &[&str]) -> (usize, usize) {
    fn chunks(pairs: &[(usize, usize)]) -> usize {
        let mut c = 0;
        for (i, p) in pairs.iter().enumerate() {
            if i == 0 || !(p.0 == pairs[i - 1].0 + 1 && p.1 == pairs[i - 1].1 + 1) {
                c += 1;
            }
        }
        c
    }
    fn go(
        h: usize,
        reference: &[&str],
        hypothesis: &[&str],
        used: &mut Vec<bool>,
        pairs: &mut Vec<(usize, usize)>,
        best: &mut (usize, usize),
    ) {
        if h == hypothesis.len() {
            let cand = (pairs.len(), chunks(pairs));
            if cand.0 > best.0 || (cand.0 == best.0 && cand.1 < best.1) {
                *best = cand;
            }
            return;
        }
        go(h + 1, reference, hypothesis, used, pairs, best);
        for r in 0..reference.len() {
            if !used[r] && reference[r] == hypothesis[h] {
                used[r] = true;
                pairs.push((h, r));
                go(h + 1, reference, hypothesis, used, pairs, best);
                pairs.pop();
                used[r] = false;
            }
        }
    }
    let mut best = (0, 0);
    go(0, reference, hypothesis, &mut vec![false; reference.len()], &mut Vec::new(), &mut best);
    best
}

fn oracle_meteor(reference: &[&str], hypothesis: &[&str]) -> f64 {
    let (m, ch) = oracle_alignment(reference, hypothesis);
    if m == 0 {
        return 0.0;
    }
    let (m, ch) = (m as f64, ch as f64);
    let p = m / hypothesis.len() as f64;
    let r = m / reference.len() as f64;
    10.0 * p * r / (r + 9.0 * p) * (1.0 - 0.5 * (ch / m).powi(3))
}

const ALPHABET: [&str; 5] = ["a", "b", "c", "d", "e"];

fn all_sentences(max_len: usize) -> Vec<Vec<&'static str>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for w in ALPHABET {
                let mut t: Vec<&str> = s.clone();
                t.push(w);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

#[test]
fn identical_hypothesis_scores_highest_exhaustively() {
    let sentences = all_sentences(4);
    assert_eq!(sentences.len(), 781);
    for reference in sentences.iter().filter(|s| !s.is_empty()) {
        let own = meteor_tokens(reference, reference);
        for hyp in &sentences {
            let score = meteor_tokens(reference, hyp);
            assert!(
                own >= score,
                "meteor({reference:?}, {hyp:?}) = {score} exceeds self score {own}"
            );
        }
    }
}

#[test]
fn matches_brute_force_on_short_sentences() {
    let sentences = all_sentences(3);
    for reference in &sentences {
        for hyp in &sentences {
            let want = oracle_meteor(reference, hyp);
            let got = meteor_tokens(reference, hyp);
            assert!((got - want).abs() < 1e-12, "{reference:?} / {hyp:?}: {got} vs {want}");
        }
    }
}

#[test]
fn identical_sentence_scores() {
    for m in 1..=12usize {
        let words: Vec<String> = (0..m).map(|i| format!("w{i}")).collect();
        let s = words.join(" ");
        let want = 1.0 - 0.5 / (m as f64).powi(3);
        assert!((meteor(&s, &s) - want).abs() < 1e-12);
    }
    assert_eq!(meteor("a red cat", "blue dog runs"), 0.0);
    assert_eq!(meteor("", "anything"), 0.0);
    assert_eq!(meteor("anything", ""), 0.0);
}

#[test]
fn greedy_fallback_on_long_sentences() {
    let long: Vec<String> = (0..30).map(|i| format!("t{}", i % 7)).collect();
    let r: Vec<&str> = long.iter().map(String::as_str).collect();
    let h: Vec<&str> = r.iter().rev().cloned().collect();
    assert_eq!(align(&r, &h), greedy_align(&r, &h));
    let s = meteor_tokens(&r, &h);
    assert!((0.0..=1.0).contains(&s));
}

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "dog", "cat", "runs", "on", "the", "grass", "red"]).prop_map(String::from)
}

fn sentence() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(word(), 0..9)
}

proptest! {
    #[test]
    fn agrees_with_oracle(r in sentence(), h in sentence()) {
        let rr: Vec<&str> = r.iter().map(String::as_str).collect();
        let hh: Vec<&str> = h.iter().map(String::as_str).collect();
        let got = meteor_tokens(&rr, &hh);
        prop_assert!((got - oracle_meteor(&rr, &hh)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&got));
    }

    #[test]
    fn case_and_punctuation_invariant(r in sentence(), h in sentence()) {
        let plain = meteor(&r.join(" "), &h.join(" "));
        let noisy_ref: Vec<String> = r.iter().map(|w| format!("{}.", w.to_uppercase())).collect();
        let noisy_hyp: Vec<String> = h.iter().map(|w| format!("\"{w},\"")).collect();
        prop_assert_eq!(plain, meteor(&noisy_ref.join(" "), &noisy_hyp.join(" ")));
    }

    #[test]
    fn sentence_similarity_symmetric(r in sentence(), h in sentence()) {
        let e = HashBagEmbedder::new(32, 3).unwrap();
        let (r, h) = (r.join(" "), h.join(" "));
        if !r.is_empty() && !h.is_empty() {
            let ab = sentence_similarity(&e, &r, &h).unwrap();
            let ba = sentence_similarity(&e, &h, &r).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&ab));
        }
    }

    #[test]
    fn perplexity_at_least_one(seed in 0u64..200, captions in prop::collection::vec(sentence(), 1..4)) {
        let vocab = Vocabulary::build(&["a dog runs on the grass", "the red cat"], 1).unwrap();
        let cfg = DecoderConfig { embed_dim: 3, hidden: 4, ..DecoderConfig::default() };
        let model = DecoderModel::init(2, vocab, &cfg, &mut seeded_rng(seed)).unwrap();
        let pairs: Vec<(Vec<f64>, String)> = captions.iter().map(|c| (vec![0.4, -0.7], c.join(" "))).collect();
        prop_assert!(perplexity(&model, &pairs).unwrap() >= 1.0);
    }

    #[test]
    fn uniform_model_perplexity_is_vocab_size(seed in 0u64..50, captions in prop::collection::vec(sentence(), 1..4)) {
        let vocab = Vocabulary::build(&["a dog runs on the grass", "the red cat"], 1).unwrap();
        let v = vocab.len() as f64;
        let cfg = DecoderConfig { embed_dim: 3, hidden: 4, ..DecoderConfig::default() };
        let mut model = DecoderModel::init(2, vocab, &cfg, &mut seeded_rng(seed)).unwrap();
        model.output.weight.data_mut().fill(0.0);
        model.output.bias.fill(0.0);
        let pairs: Vec<(Vec<f64>, String)> = captions.iter().map(|c| (vec![1.0, 2.0], c.join(" "))).collect();
        prop_assert!((perplexity(&model, &pairs).unwrap() - v).abs() < 1e-9);
    }
}

#[test]
fn oracle_model_perplexity_is_one() {
    // the output bias alone makes "<end>" certain, and "" encodes to <start> <end>
    let vocab = Vocabulary::build(&["x"], 1).unwrap();
    let cfg = DecoderConfig { embed_dim: 2, hidden: 2, ..DecoderConfig::default() };
    let mut model = DecoderModel::init(2, vocab, &cfg, &mut seeded_rng(0)).unwrap();
    model.output.weight.data_mut().fill(0.0);
    model.output.bias.fill(-1e3);
    model.output.bias[2] = 1e3;
    let p = perplexity(&model, &[(vec![0.1, 0.2], ""), (vec![-1.0, 3.0], "")]).unwrap();
    assert!((p - 1.0).abs() < 1e-12);
}

#[test]
fn evaluation_report_tsv() {
    let vocab = Vocabulary::build(&["a dog runs", "the cat sat"], 1).unwrap();
    let cfg = DecoderConfig { embed_dim: 3, hidden: 4, ..DecoderConfig::default() };
    let model = DecoderModel::init(2, vocab, &cfg, &mut seeded_rng(4)).unwrap();
    let e = HashBagEmbedder::new(32, 9).unwrap();
    let cond = [0.5, -0.5];
    let items = [
        EvalItem { stimulus_id: "s1", references: vec!["a dog runs", "the cat sat"], prediction: "the cat sat", condition: &cond },
        EvalItem { stimulus_id: "s2", references: vec!["a dog runs"], prediction: "", condition: &cond },
    ];
    let report = evaluate(&model, &e, &items, "abc").unwrap();
    assert_eq!(report.records[0].reference, "the cat sat");
    assert!((report.records[0].meteor - (1.0 - 0.5 / 27.0)).abs() < 1e-12);
    assert!((report.records[0].sentence - 1.0).abs() < 1e-12);
    assert_eq!((report.records[1].meteor, report.records[1].sentence), (0.0, 0.0));
    assert!(report.perplexity >= 1.0);

    let tsv = report.to_tsv();
    let rows: Vec<&str> = tsv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "stimulus_id\treference\tprediction\tmeteor\tsentence");
    assert_eq!(rows.len(), 3);
    assert!(rows[1..].iter().all(|r| r.split('\t').count() == 5));
    assert!(tsv.starts_with("# fingerprint\tabc\n"));
    let summary = |key: &str| -> f64 {
        tsv.lines()
            .find_map(|l| l.strip_prefix(&format!("# {key}\t")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert_eq!(summary("mean_meteor"), report.mean_meteor);
    assert_eq!(summary("perplexity"), report.perplexity);
    assert!(evaluate(&model, &e, &[], "x").is_err());
}
