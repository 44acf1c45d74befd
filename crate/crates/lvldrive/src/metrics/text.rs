//! Corpus text metrics: BLEU-4, ROUGE-L, and CIDEr.
//!
//! Tokenization is shared by all three: lowercase, split on whitespace, with
//! each punctuation character becoming its own token.

use std::collections::HashMap;

pub fn tokenize(s: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for ch in s.to_lowercase().chars() {
        if ch.is_alphanumeric() {
            cur.push(ch);
        } else {
            if !cur.is_empty() {
                tokens.push(std::mem::take(&mut cur));
            }
            if !ch.is_whitespace() {
                tokens.push(ch.to_string());
            }
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut map = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *map.entry(w).or_insert(0) += 1;
        }
    }
    map
}

/// Corpus-level BLEU-4: geometric mean of modified n-gram precisions for
/// n = 1..4 with brevity penalty. No smoothing; a zero precision at any
/// order zeroes the score.
pub fn bleu4(candidates: &[String], references: &[Vec<String>]) -> f64 {
    assert_eq!(candidates.len(), references.len());
    if candidates.is_empty() {
        return 0.0;
    }
    let mut match_count = [0usize; 4];
    let mut total_count = [0usize; 4];
    let mut cand_len = 0usize;
    let mut ref_len = 0usize;

    for (cand, refs) in candidates.iter().zip(references) {
        let ct = tokenize(cand);
        let rts: Vec<Vec<String>> = refs.iter().map(|r| tokenize(r)).collect();
        cand_len += ct.len();
        // Closest reference length, shorter wins ties.
        let closest = rts
            .iter()
            .map(|r| r.len())
            .min_by_key(|&l| ((l as i64 - ct.len() as i64).abs(), l))
            .unwrap_or(0);
        ref_len += closest;
        for n in 1..=4 {
            let cc = ngram_counts(&ct, n);
            let mut max_ref: HashMap<&[String], usize> = HashMap::new();
            for rt in &rts {
                for (g, c) in ngram_counts(rt, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            for (g, c) in &cc {
                total_count[n - 1] += c;
                if let Some(rc) = max_ref.get(g) {
                    match_count[n - 1] += c.min(rc);
                }
            }
        }
    }

    let mut log_sum = 0.0;
    for n in 0..4 {
        if total_count[n] == 0 || match_count[n] == 0 {
            return 0.0;
        }
        log_sum += (match_count[n] as f64 / total_count[n] as f64).ln();
    }
    let bp = if cand_len > ref_len || cand_len == 0 {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    bp * (log_sum / 4.0).exp()
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

const ROUGE_BETA: f64 = 1.2;

/// ROUGE-L: LCS-based F-measure (beta = 1.2) per pair, best reference per
/// candidate, averaged over the corpus.
pub fn rouge_l(candidates: &[String], references: &[Vec<String>]) -> f64 {
    assert_eq!(candidates.len(), references.len());
    if candidates.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for (cand, refs) in candidates.iter().zip(references) {
        let ct = tokenize(cand);
        let mut best = 0.0_f64;
        for r in refs {
            let rt = tokenize(r);
            if ct.is_empty() || rt.is_empty() {
                continue;
            }
            let l = lcs_len(&ct, &rt) as f64;
            if l == 0.0 {
                continue;
            }
            let p = l / ct.len() as f64;
            let rec = l / rt.len() as f64;
            let b2 = ROUGE_BETA * ROUGE_BETA;
            let f = (1.0 + b2) * p * rec / (rec + b2 * p);
            best = best.max(f);
        }
        total += best;
    }
    total / candidates.len() as f64
}

/// Plain CIDEr (not CIDEr-D): mean over n = 1..4 of 10x the average cosine
/// similarity between TF-IDF n-gram vectors of the candidate and each
/// reference. IDF comes from the reference corpus; document frequencies
/// below 1 are clamped to 1.
pub fn cider(candidates: &[String], references: &[Vec<String>]) -> f64 {
    assert_eq!(candidates.len(), references.len());
    let n_docs = references.len();
    if n_docs == 0 {
        return 0.0;
    }
    if n_docs < 2 {
        log::warn!("cider: single-document corpus, IDF is degenerate");
    }

    let cand_tokens: Vec<Vec<String>> = candidates.iter().map(|c| tokenize(c)).collect();
    let ref_tokens: Vec<Vec<Vec<String>>> = references
        .iter()
        .map(|rs| rs.iter().map(|r| tokenize(r)).collect())
        .collect();

    let mut score = 0.0;
    for n in 1..=4 {
        // Document frequency: number of reference sets containing the n-gram.
        let mut df: HashMap<Vec<String>, usize> = HashMap::new();
        for rs in &ref_tokens {
            let mut seen: HashMap<&[String], ()> = HashMap::new();
            for rt in rs {
                for g in ngram_counts(rt, n).keys() {
                    seen.entry(g).or_insert(());
                }
            }
            for g in seen.keys() {
                *df.entry(g.to_vec()).or_insert(0) += 1;
            }
        }
        let idf = |g: &[String]| -> f64 {
            let d = df.get(g).copied().unwrap_or(0).max(1) as f64;
            (n_docs as f64 / d).ln()
        };

        fn tfidf<'a>(
            tokens: &'a [String],
            n: usize,
            idf: &impl Fn(&[String]) -> f64,
        ) -> HashMap<&'a [String], f64> {
            let counts = ngram_counts(tokens, n);
            let total: usize = counts.values().sum();
            let mut v = HashMap::new();
            if total == 0 {
                return v;
            }
            for (g, c) in counts {
                v.insert(g, (c as f64 / total as f64) * idf(g));
            }
            v
        }

        let mut sim_sum = 0.0;
        for (ct, rs) in cand_tokens.iter().zip(&ref_tokens) {
            let cv = tfidf(ct, n, &idf);
            let cnorm: f64 = cv.values().map(|x| x * x).sum::<f64>().sqrt();
            let mut per_ref = 0.0;
            for rt in rs {
                let rv = tfidf(rt, n, &idf);
                let rnorm: f64 = rv.values().map(|x| x * x).sum::<f64>().sqrt();
                if cnorm == 0.0 || rnorm == 0.0 {
                    continue;
                }
                let dot: f64 = cv
                    .iter()
                    .filter_map(|(g, x)| rv.get(g).map(|y| x * y))
                    .sum();
                per_ref += dot / (cnorm * rnorm);
            }
            if !rs.is_empty() {
                sim_sum += 10.0 * per_ref / rs.len() as f64;
            }
        }
        score += sim_sum / n_docs as f64;
    }
    score / 4.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(c: &[&str], r: &[&str]) -> (Vec<String>, Vec<Vec<String>>) {
        (
            c.iter().map(|s| s.to_string()).collect(),
            r.iter().map(|s| vec![s.to_string()]).collect(),
        )
    }

    #[test]
    fn tokenize_splits_punctuation() {
        assert_eq!(
            tokenize("The cat, sat."),
            vec!["the", "cat", ",", "sat", "."]
        );
    }

    #[test]
    fn bleu_identical_is_one() {
        let (c, r) = single(&["the cat sat on the mat today"], &["the cat sat on the mat today"]);
        assert!((bleu4(&c, &r) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bleu_no_shared_fourgram_is_zero() {
        let (c, r) = single(&["a b c d e"], &["a b x d e"]);
        assert_eq!(bleu4(&c, &r), 0.0);
    }

    #[test]
    fn bleu_hand_computed_fixture() {
        // candidate: "the cat sat on the mat quietly" (7 tokens)
        // reference: "the cat sat on the mat today"   (7 tokens)
        // p1 = 6/7 (all unigrams match except "quietly"; "the" clipped at 2)
        // p2 = 5/6 ("mat quietly" missing)
        // p3 = 4/5 ("the mat quietly" missing)
        // p4 = 3/4 ("on the mat quietly" missing)
        // BP = 1 (equal lengths)
        // BLEU = (6/7 * 5/6 * 4/5 * 3/4)^(1/4) = (3/7)^(1/4)
        let (c, r) = single(&["the cat sat on the mat quietly"], &["the cat sat on the mat today"]);
        let expected = (3.0_f64 / 7.0).powf(0.25);
        assert!((bleu4(&c, &r) - expected).abs() < 1e-12);
    }

    #[test]
    fn rouge_identical_and_disjoint() {
        let (c, r) = single(&["alpha beta gamma"], &["alpha beta gamma"]);
        assert!((rouge_l(&c, &r) - 1.0).abs() < 1e-12);
        let (c, r) = single(&["alpha beta"], &["gamma delta"]);
        assert_eq!(rouge_l(&c, &r), 0.0);
    }

    #[test]
    fn rouge_hand_computed_fixture() {
        // LCS("a b c d", "a c d e") = "a c d" = 3
        // P = 3/4, R = 3/4, beta = 1.2:
        // F = (1 + 1.44) * P * R / (R + 1.44 * P) = 2.44*0.5625/1.83 = 0.75
        let (c, r) = single(&["a b c d"], &["a c d e"]);
        assert!((rouge_l(&c, &r) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn cider_no_overlap_is_zero() {
        let (c, r) = single(&["aa bb cc dd", "ee ff gg hh"], &["xx yy zz ww", "qq rr ss tt"]);
        assert_eq!(cider(&c, &r), 0.0);
    }

    #[test]
    fn cider_duplication_invariance() {
        // Candidate n-grams absent from every reference get the clamped
        // idf ln(N), which depends on corpus size. Invariance under corpus
        // duplication therefore only holds when every candidate n-gram
        // appears in the references, as here (candidate == reference).
        let (c1, r1) = single(&["a b c d", "x y z w"], &["a b c d", "x y z w"]);
        let (c2, r2) = single(
            &["a b c d", "x y z w", "a b c d", "x y z w"],
            &["a b c d", "x y z w", "a b c d", "x y z w"],
        );
        let s1 = cider(&c1, &r1);
        let s2 = cider(&c2, &r2);
        assert!((s1 - s2).abs() < 1e-12, "{s1} vs {s2}");
        // Disjoint self-matching documents score the full 10 per n-gram order.
        assert!((s1 - 10.0).abs() < 1e-12, "s1={s1}");
    }
}
