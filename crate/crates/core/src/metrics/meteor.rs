//! Exact-match unigram METEOR.
//!
//! Matches are a maximum one-to-one pairing of identical tokens. Among all
//! maximum pairings the one with the fewest chunks is used, where a chunk is
//! a run of matches contiguous and identically ordered in both sentences.
//!
//! `P = m/|hyp|`, `R = m/|ref|`, `Fmean = 10PR/(R + 9P)`,
//! `penalty = 0.5·(chunks/m)³`, `score = Fmean·(1 − penalty)`.

use std::collections::HashMap;

use crate::vocab::tokenize;

/// Longest sentence (in tokens) aligned by exhaustive search.
pub const EXHAUSTIVE_LIMIT: usize = 20;

/// Memo-table size above which the search falls back to the greedy aligner.
const SEARCH_BUDGET: usize = 200_000;

const GAMMA: f64 = 0.5;
const BETA: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    pub matches: usize,
    pub chunks: usize,
}

pub fn meteor(reference: &str, hypothesis: &str) -> f64 {
    let r = tokenize(reference);
    let h = tokenize(hypothesis);
    meteor_tokens(&r, &h)
}

pub fn meteor_tokens<S: AsRef<str>>(reference: &[S], hypothesis: &[S]) -> f64 {
    let reference: Vec<&str> = reference.iter().map(AsRef::as_ref).collect();
    let hypothesis: Vec<&str> = hypothesis.iter().map(AsRef::as_ref).collect();
    let a = align(&reference, &hypothesis);
    score_from(a, reference.len(), hypothesis.len())
}

pub fn score_from(a: Alignment, ref_len: usize, hyp_len: usize) -> f64 {
    if a.matches == 0 || ref_len == 0 || hyp_len == 0 {
        return 0.0;
    }
    let m = a.matches as f64;
    let p = m / hyp_len as f64;
    let r = m / ref_len as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = GAMMA * (a.chunks as f64 / m).powi(BETA);
    fmean * (1.0 - penalty)
}

/// Maximum matching with minimum chunks; exhaustive up to
/// [`EXHAUSTIVE_LIMIT`] tokens, greedy above.
pub fn align(reference: &[&str], hypothesis: &[&str]) -> Alignment {
    if reference.len() <= EXHAUSTIVE_LIMIT && hypothesis.len() <= EXHAUSTIVE_LIMIT {
        if let Some(a) = ExhaustiveAligner::new(reference, hypothesis).run() {
            return a;
        }
    }
    greedy_align(reference, hypothesis)
}

/// Left-to-right: each hypothesis token takes the reference occurrence that
/// extends the current chunk when possible, else the leftmost free one.
pub fn greedy_align(reference: &[&str], hypothesis: &[&str]) -> Alignment {
    let mut used = vec![false; reference.len()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut prev: Option<(usize, usize)> = None;
    for (hi, w) in hypothesis.iter().enumerate() {
        let continuing = prev
            .filter(|&(ph, pr)| ph + 1 == hi && pr + 1 < reference.len())
            .map(|(_, pr)| pr + 1)
            .filter(|&r| !used[r] && reference[r] == *w);
        let choice = continuing.or_else(|| (0..reference.len()).find(|&r| !used[r] && reference[r] == *w));
        if let Some(r) = choice {
            used[r] = true;
            pairs.push((hi, r));
            prev = Some((hi, r));
        }
    }
    Alignment {
        matches: pairs.len(),
        chunks: count_chunks(&pairs),
    }
}

/// Chunks in a list of `(hyp, ref)` pairs sorted by hypothesis position.
pub fn count_chunks(pairs: &[(usize, usize)]) -> usize {
    if pairs.is_empty() {
        return 0;
    }
    1 + pairs
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
}

/// Dynamic programme over hypothesis positions with state
/// (position, used reference mask, reference index matched at the previous
/// hypothesis position). Values are `(matches, chunks)` compared
/// lexicographically as (more matches, fewer chunks).
struct ExhaustiveAligner<'a> {
    reference: &'a [&'a str],
    hypothesis: &'a [&'a str],
    memo: HashMap<(usize, u32, u8), (usize, usize)>,
    exhausted: bool,
}

const NONE: u8 = u8::MAX;

impl<'a> ExhaustiveAligner<'a> {
    fn new(reference: &'a [&'a str], hypothesis: &'a [&'a str]) -> Self {
        Self {
            reference,
            hypothesis,
            memo: HashMap::new(),
            exhausted: false,
        }
    }

    fn run(mut self) -> Option<Alignment> {
        let (matches, chunks) = self.best(0, 0, NONE);
        (!self.exhausted).then_some(Alignment { matches, chunks })
    }

    fn better(a: (usize, usize), b: (usize, usize)) -> bool {
        a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
    }

    fn best(&mut self, pos: usize, used: u32, prev: u8) -> (usize, usize) {
        if pos == self.hypothesis.len() || self.exhausted {
            return (0, 0);
        }
        let key = (pos, used, prev);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        if self.memo.len() >= SEARCH_BUDGET {
            self.exhausted = true;
            return (0, 0);
        }
        // leave this hypothesis token unmatched
        let mut best = self.best(pos + 1, used, NONE);
        let word = self.hypothesis[pos];
        for r in 0..self.reference.len() {
            if used & (1 << r) != 0 || self.reference[r] != word {
                continue;
            }
            let continues = prev != NONE && prev as usize + 1 == r;
            let (m, c) = self.best(pos + 1, used | (1 << r), r as u8);
            let cand = (m + 1, c + usize::from(!continues));
            if Self::better(cand, best) {
                best = cand;
            }
        }
        self.memo.insert(key, best);
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_scores() {
        assert!((meteor("cat", "cat") - 0.5).abs() < 1e-12);
        assert!((meteor("the cat sat", "the cat sat") - (1.0 - 0.5 / 27.0)).abs() < 1e-12);
        assert_eq!(meteor("the cat sat", "a dog ran"), 0.0);
        assert_eq!(meteor("", "cat"), 0.0);
        assert_eq!(meteor("cat", ""), 0.0);
    }

    #[test]
    fn two_chunks() {
        // hypothesis "sat the cat": matches 3, chunks 2 ("sat" | "the cat")
        let a = align(&["the", "cat", "sat"], &["sat", "the", "cat"]);
        assert_eq!(a, Alignment { matches: 3, chunks: 2 });
        let expected = 1.0 - 0.5 * (2.0f64 / 3.0).powi(3);
        assert!((meteor("the cat sat", "sat the cat") - expected).abs() < 1e-12);
    }

    #[test]
    fn repeated_words_choose_fewest_chunks() {
        // greedy left-most would pair hyp "a" with ref 0 and split the chunk
        let r = ["a", "x", "a", "b"];
        let h = ["a", "b"];
        assert_eq!(align(&r, &h), Alignment { matches: 2, chunks: 1 });
    }

    #[test]
    fn case_and_punctuation_invariant() {
        assert_eq!(meteor("The cat, sat.", "the CAT sat"), meteor("the cat sat", "the cat sat"));
    }

    #[test]
    fn long_sentences_use_greedy_path() {
        let r: Vec<String> = (0..30).map(|i| format!("w{i}")).collect();
        let text = r.join(" ");
        assert!((meteor(&text, &text) - (1.0 - 0.5 / 27000.0)).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_agrees_with_greedy_on_match_count() {
        let r = ["a", "b", "a", "c", "b", "a"];
        let h = ["b", "a", "a", "c", "a", "d"];
        let ex = align(&r, &h);
        let gr = greedy_align(&r, &h);
        assert_eq!(ex.matches, gr.matches);
        assert!(ex.chunks <= gr.chunks);
    }
}
