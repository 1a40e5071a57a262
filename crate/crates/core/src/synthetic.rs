//! Deterministic synthetic corpora for fixtures, tests and smoke runs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::evalstats::PoolCandidate;
use crate::graph::{complete_graph, enumerate_structure_classes, prune_to_strengthening_chain, InfluenceGraph};
use crate::template::{DecodedInput, DefeasibleQuery, Source, UpdateEffect, WiqaExample};

const NOUNS: &[&str] = &[
    "rain", "sunlight", "minerals", "roots", "seeds", "oxygen", "sugar", "water", "soil", "wind", "heat", "ice",
    "clouds", "leaves", "bees", "pollen", "nutrients", "fish", "algae", "sediment", "lava", "rock", "snow",
    "carbon", "energy", "waves", "salt", "insects", "fungi", "bacteria",
];

const VERBS: &[&str] = &[
    "absorbed", "produced", "released", "stored", "carried", "formed", "eroded", "melted", "grown", "spread",
    "collected", "filtered", "warmed", "cooled", "moved",
];

const PEOPLE: &[&str] = &["Rob", "Ana", "Kim", "Lee", "Sam", "Maya", "Omar", "Ivy", "Noah", "Zoe"];

const ACTIVITIES: &[&str] = &[
    "went for a hike", "cooked dinner", "visited the zoo", "took a train", "painted a fence",
    "read a novel", "fixed a bike", "planted tomatoes", "watched a play", "baked bread",
];

const UPDATES: &[&str] = &[
    "often has hallucinations", "forgot their glasses", "was very tired", "had a fever",
    "was with friends", "got new shoes", "lost their keys", "was in a hurry", "had a map",
    "saw a warning sign",
];

const OUTCOMES: &[&str] = &[
    "saw an elephant", "enjoyed the day", "got lost", "was late", "felt proud", "made a mess",
    "met a neighbour", "took photos", "stayed home", "won a prize",
];

fn pick<'a, R: Rng>(rng: &mut R, items: &'a [&'a str]) -> &'a str {
    items.choose(rng).expect("non-empty vocabulary")
}

fn phrase<R: Rng>(rng: &mut R, direction: &str) -> String {
    format!("{direction} {} {}", pick(rng, NOUNS), pick(rng, VERBS))
}

fn sentence<R: Rng>(rng: &mut R) -> String {
    let noun = pick(rng, NOUNS);
    let mut s = format!("{} is {} by the {}.", noun, pick(rng, VERBS), pick(rng, NOUNS));
    s[..1].make_ascii_uppercase();
    s
}

fn random_class<R: Rng>(rng: &mut R) -> [crate::graph::Polarity; 9] {
    let classes = enumerate_structure_classes();
    classes[rng.gen_range(0..classes.len())]
        .polarities()
        .expect("canonical classes are complete")
}

/// A complete graph with the given situation/hypothesis labels and random
/// natural-language labels everywhere else.
pub fn graph_with<R: Rng>(rng: &mut R, situation: &str, more: &str, less: &str) -> InfluenceGraph {
    let c_plus = phrase(rng, "less");
    let c_minus = phrase(rng, "more");
    let s_minus = phrase(rng, "less");
    let m_plus = phrase(rng, "more");
    let m_minus = phrase(rng, "less");
    complete_graph(
        [&c_plus, &c_minus, situation, &s_minus, &m_plus, &m_minus, more, less],
        &random_class(rng),
    )
    .expect("synthetic labels are valid")
}

pub fn wiqa_examples(n: usize, seed: u64) -> Vec<WiqaExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let sentences = rng.gen_range(2..=4);
            let passage = (0..sentences).map(|_| sentence(&mut rng)).collect::<Vec<_>>().join(" ");
            let situation = phrase(&mut rng, "more");
            let outcome = format!("{} being {}", pick(&mut rng, NOUNS), pick(&mut rng, VERBS));
            let graph = graph_with(&mut rng, &situation, &format!("MORE {outcome}"), &format!("LESS {outcome}"));
            WiqaExample {
                id: format!("wiqa-{seed}-{i:04}"),
                passage,
                graph,
            }
        })
        .collect()
}

pub fn defeasible_queries(n: usize, seed: u64, source: Source) -> Vec<DefeasibleQuery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let person = pick(&mut rng, PEOPLE);
            DefeasibleQuery {
                id: format!("{source}-{seed}-{i:05}"),
                premise: format!("{person} {}", pick(&mut rng, ACTIVITIES)),
                hypothesis: format!("{person} {}", pick(&mut rng, OUTCOMES)),
                update: format!("{person} {}", pick(&mut rng, UPDATES)),
                gold_label: if rng.gen_bool(0.5) {
                    UpdateEffect::Intensifies
                } else {
                    UpdateEffect::Attenuates
                },
                source,
            }
        })
        .collect()
}

/// Reference graph for a decoded query: the situation and hypothesis nodes
/// match the query verbatim, everything else is random.
pub fn reference_for(decoded: &DecodedInput, seed: u64) -> InfluenceGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    graph_with(&mut rng, &decoded.situation, &decoded.more, &decoded.less)
}

/// Pool candidates whose chains are pruned from synthetic graphs.
pub fn pool_candidates(n: usize, seed: u64) -> Vec<PoolCandidate> {
    let sources = [Source::Snli, Source::Social, Source::Atomic];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    defeasible_queries(n, seed, Source::Atomic)
        .into_iter()
        .enumerate()
        .map(|(i, mut query)| {
            query.source = sources[i % sources.len()];
            query.id = format!("pool-{seed}-{i:05}");
            let graph = graph_with(
                &mut rng,
                &query.update,
                &format!("MORE {}", query.hypothesis),
                &format!("LESS {}", query.hypothesis),
            );
            let chain = prune_to_strengthening_chain(&graph, Some(&query.hypothesis))
                .expect("synthetic graphs are complete");
            PoolCandidate { query, chain }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::validate_schema;

    #[test]
    fn synthetic_graphs_are_valid_and_deterministic() {
        let a = wiqa_examples(20, 3);
        assert_eq!(a, wiqa_examples(20, 3));
        assert!(a.iter().all(|ex| validate_schema(&ex.graph).valid));
        assert_ne!(a, wiqa_examples(20, 4));
    }

    #[test]
    fn pool_candidates_have_unique_ids() {
        let pool = pool_candidates(50, 1);
        let ids: std::collections::BTreeSet<_> = pool.iter().map(|c| c.query.id.clone()).collect();
        assert_eq!(ids.len(), 50);
    }
}
