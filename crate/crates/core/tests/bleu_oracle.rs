//! Sentence BLEU checked against a brute-force reimplementation written
//! directly from the modified n-gram precision definition.

use defgraph::metrics::{bleu, tokenize};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[path = "support/oracle.rs"]
mod oracle;

use oracle::oracle_bleu;

#[test]
fn frozen_values() {
    // Frozen from the oracle above (and cross-checked with an independent script).
    let cases = [
        ("more minerals are absorbed by roots", "more minerals are absorbed", 50.813274815461476),
        ("more minerals are absorbed", "more minerals are absorbed by roots", 60.653065971263345),
        (
            "less conversion into sugars [OR] less oxygen produced",
            "less conversion into sugars",
            34.5720784641941,
        ),
        ("the rain the rain the rain", "the rain falls", 0.0),
        ("sugar and oxygen being produced", "MORE sugar and oxygen being produced", 81.87307530779819),
    ];
    for (cand, reference, expected) in cases {
        let c = tokenize(cand);
        let r = tokenize(reference);
        let got = bleu(&c, &r);
        assert!((got - expected).abs() < 1e-9, "{cand:?} vs {reference:?}: {got} != {expected}");
        let c: Vec<&str> = c.iter().map(String::as_str).collect();
        let r: Vec<&str> = r.iter().map(String::as_str).collect();
        assert!((oracle_bleu(&c, &r) - expected).abs() < 1e-9);
    }
}

#[test]
fn random_cases_agree_with_oracle() {
    let vocab = ["a", "b", "c", "d", "e", "more", "less", "rain"];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut nonzero = 0;
    for _ in 0..500 {
        let sample = |rng: &mut ChaCha8Rng| -> Vec<&str> {
            let len = rng.gen_range(0..9);
            // Narrow vocab on some draws so higher-order matches happen.
            let width = rng.gen_range(2..=vocab.len());
            (0..len).map(|_| vocab[rng.gen_range(0..width)]).collect()
        };
        let cand = sample(&mut rng);
        let reference = sample(&mut rng);
        let got = bleu(&cand, &reference);
        let expected = oracle_bleu(&cand, &reference);
        assert!((got - expected).abs() < 1e-6, "{cand:?} vs {reference:?}: {got} vs {expected}");
        if expected > 0.0 {
            nonzero += 1;
        }
    }
    assert!(nonzero > 50, "too few informative cases: {nonzero}");
}
