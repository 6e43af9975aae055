use super::EvalError;

/// Lowercased whitespace tokens with ASCII punctuation removed.
/// Tokens that were pure punctuation are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| {
            t.chars()
                .filter(|c| !c.is_ascii_punctuation())
                .collect::<String>()
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F-measure over [`tokenize`] tokens; 0 when either side is empty.
pub fn rouge_l(pred: &str, reference: &str) -> f64 {
    let (p, r) = (tokenize(pred), tokenize(reference));
    if p.is_empty() || r.is_empty() {
        return 0.0;
    }
    let l = lcs_len(&p, &r);
    if l == 0 {
        return 0.0;
    }
    let precision = l as f64 / p.len() as f64;
    let recall = l as f64 / r.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Text to vector.
pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>, EvalError>;
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(EvalError::Embedder(format!(
            "embedding lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 || !(na.is_finite() && nb.is_finite()) {
        return Err(EvalError::Embedder("zero or non-finite embedding".into()));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine similarity of the two texts' embeddings.
pub fn css(pred: &str, reference: &str, embedder: &dyn Embedder) -> Result<f64, EvalError> {
    cosine(&embedder.embed(pred)?, &embedder.embed(reference)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;

    struct Table(HashMap<&'static str, Vec<f64>>);

    impl Embedder for Table {
        fn embed(&self, text: &str) -> Result<Vec<f64>, EvalError> {
            self.0
                .get(text)
                .cloned()
                .ok_or_else(|| EvalError::Embedder(format!("no vector for {text}")))
        }
    }

    #[test]
    fn tokenizer() {
        assert_eq!(
            tokenize("The dog's  PAW, (left)."),
            vec!["the", "dogs", "paw", "left"]
        );
        assert!(tokenize(" ... ").is_empty());
    }

    #[test]
    fn rouge_examples() {
        assert_eq!(rouge_l("the cat sat", "the cat sat"), 1.0);
        assert!((rouge_l("the cat sat", "the dog sat") - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(rouge_l("", "the cat"), 0.0);
        assert_eq!(rouge_l("a b", "c d"), 0.0);
        assert_eq!(rouge_l("The Cat sat.", "the cat SAT"), 1.0);
    }

    #[test]
    fn css_examples() {
        let t = Table(HashMap::from([
            ("a", vec![3.0, 4.0, 0.0]),
            ("b", vec![4.0, 3.0, 0.0]),
            ("c", vec![0.0, 0.0, 2.0]),
            ("z", vec![0.0, 0.0, 0.0]),
        ]));
        assert_eq!(css("a", "a", &t).unwrap(), 1.0);
        assert_eq!(css("a", "c", &t).unwrap(), 0.0);
        assert!((css("a", "b", &t).unwrap() - 0.96).abs() < 1e-15);
        assert!(css("a", "z", &t).is_err());
        assert!(css("a", "missing", &t).is_err());
    }

    fn naive_lcs(a: &[String], b: &[String]) -> usize {
        if a.is_empty() || b.is_empty() {
            return 0;
        }
        if a[0] == b[0] {
            1 + naive_lcs(&a[1..], &b[1..])
        } else {
            naive_lcs(&a[1..], b).max(naive_lcs(a, &b[1..]))
        }
    }

    proptest! {
        #[test]
        fn rouge_symmetric_and_bounded(a in "[abc ]{0,12}", b in "[abc ]{0,12}") {
            let f = rouge_l(&a, &b);
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!((f - rouge_l(&b, &a)).abs() < 1e-15);
        }

        #[test]
        fn lcs_matches_recursion(a in prop::collection::vec("[xyz]", 0..8), b in prop::collection::vec("[xyz]", 0..8)) {
            prop_assert_eq!(lcs_len(&a, &b), naive_lcs(&a, &b));
        }
    }
}
