//! Brute-force sentence BLEU written directly from the modified n-gram
//! precision definition.

/// Counts occurrences by linear scan, takes the product of precisions as
/// exact integer ratios, and only then applies the root and brevity penalty.
pub fn oracle_bleu(candidate: &[&str], reference: &[&str]) -> f64 {
    let order = candidate.len().min(reference.len()).min(4);
    if order == 0 {
        return 0.0;
    }
    let mut numerator: u128 = 1;
    let mut denominator: u128 = 1;
    for n in 1..=order {
        let cand: Vec<&[&str]> = (0..=candidate.len() - n).map(|i| &candidate[i..i + n]).collect();
        let refs: Vec<&[&str]> = (0..=reference.len() - n).map(|i| &reference[i..i + n]).collect();
        let mut matched = 0u128;
        let mut seen: Vec<&[&str]> = Vec::new();
        for gram in &cand {
            if seen.contains(gram) {
                continue;
            }
            seen.push(gram);
            let in_cand = cand.iter().filter(|g| *g == gram).count() as u128;
            let in_ref = refs.iter().filter(|g| *g == gram).count() as u128;
            matched += in_cand.min(in_ref);
        }
        if matched == 0 {
            return 0.0;
        }
        numerator *= matched;
        denominator *= cand.len() as u128;
    }
    let geo = (numerator as f64 / denominator as f64).powf(1.0 / order as f64);
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    100.0 * bp * geo
}
