//! Randomized invariants of corpus I/O, thresholding and scoring.

use std::path::Path;

use proptest::prelude::*;

use darter::corpus::{parse_corpus, write_corpus, AnnotatedSentence, AnnotationMode, Entity, LabelSchema, Relation};
use darter::decoder::{threshold_predictions, EntityCells, EntitySpan, PredictionSet, RelationHead};
use darter::eval::{error_taxonomy, score_corpus, score_entities, score_relations};
use darter::{MatchMode, Tensor};

fn schema() -> LabelSchema {
    LabelSchema::load(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synthetic/schema.json")).unwrap()
}

fn sentence() -> impl Strategy<Value = AnnotatedSentence> {
    (1usize..7).prop_flat_map(|t| {
        let entity = (0..t, 0..t, 0usize..3).prop_map(|(a, b, label)| Entity {
            start: a.min(b),
            end: a.max(b),
            label,
        });
        (
            prop::collection::vec("[a-z]{1,4}", t),
            prop::collection::vec(entity, 0..4),
            prop::collection::vec((0usize..4, 0usize..4, 0usize..2), 0..4),
        )
            .prop_map(|(tokens, entities, rels)| {
                let n = entities.len();
                let relations = if n == 0 {
                    Vec::new()
                } else {
                    rels.into_iter()
                        .map(|(s, o, label)| Relation {
                            subject: s % n,
                            object: o % n,
                            label,
                        })
                        .collect()
                };
                AnnotatedSentence {
                    tokens,
                    entities,
                    relations,
                    mode: AnnotationMode::FullSpan,
                }
            })
    })
}

/// A gold sentence together with a prediction set over the same length.
fn scored_sentence() -> impl Strategy<Value = (AnnotatedSentence, PredictionSet)> {
    sentence().prop_flat_map(|s| {
        let t = s.len();
        let ents = prop::collection::btree_set(
            (0..t, 0..t, 0usize..3).prop_map(|(a, b, label)| EntitySpan {
                start: a.min(b),
                end: a.max(b),
                label,
            }),
            0..4,
        );
        let rels = prop::collection::btree_set(
            (0..t, 0..t, 0usize..2).prop_map(|(subject, object, label)| RelationHead { subject, object, label }),
            0..4,
        );
        // Mix random guesses with part of the gold set so matches occur.
        let gold = s.gold_set();
        (Just(s), ents, rels, any::<u8>()).prop_map(move |(s, mut entities, mut relations, mask)| {
            for (n, e) in gold.entities.iter().enumerate() {
                if mask & (1 << (n % 8)) != 0 {
                    entities.insert(*e);
                }
            }
            for (n, r) in gold.relations.iter().enumerate() {
                if mask & (1 << ((n + 4) % 8)) != 0 {
                    relations.insert(*r);
                }
            }
            (s, PredictionSet { entities, relations })
        })
    })
}

fn counts(p: &darter::Prf1) -> (usize, usize, usize) {
    (p.tp, p.fp, p.fn_)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn corpus_round_trips(corpus in prop::collection::vec(sentence(), 0..6)) {
        let schema = schema();
        let mut buf = Vec::new();
        write_corpus(&mut buf, &corpus, &schema).unwrap();
        let back = parse_corpus(buf.as_slice(), "<memory>", &schema).unwrap();
        prop_assert_eq!(back, corpus);
    }

    #[test]
    fn raising_the_threshold_only_removes_predictions(
        t in 1usize..5,
        seed in prop::collection::vec(0.0f64..1.0, 5 * 5 * 5),
        lo in 0.05f64..0.5,
        gap in 0.0f64..0.45,
    ) {
        let ent = Tensor::new(vec![t, t, 3], seed[..t * t * 3].to_vec()).unwrap();
        let rel = Tensor::new(vec![t, t, 2], seed[t * t * 3..t * t * 5].to_vec()).unwrap();
        let a = threshold_predictions(&ent, &rel, lo, EntityCells::UpperTriangle).unwrap();
        let b = threshold_predictions(&ent, &rel, lo + gap, EntityCells::UpperTriangle).unwrap();
        prop_assert!(b.entities.is_subset(&a.entities));
        prop_assert!(b.relations.is_subset(&a.relations));
    }

    #[test]
    fn micro_counts_add_over_the_oot_it_split(items in prop::collection::vec(scored_sentence(), 0..8)) {
        let (gold, preds): (Vec<_>, Vec<_>) = items.into_iter().unzip();
        let (ner, re) = score_corpus(&gold, &preds, MatchMode::Exact).unwrap();
        let part = |it: bool| {
            let (g, p): (Vec<_>, Vec<_>) = gold
                .iter()
                .cloned()
                .zip(preds.iter().cloned())
                .filter(|(s, _)| s.is_in_triple() == it)
                .unzip();
            score_corpus(&g, &p, MatchMode::Exact).unwrap()
        };
        let (oot, it) = (part(false), part(true));
        let add = |a: (usize, usize, usize), b: (usize, usize, usize)| (a.0 + b.0, a.1 + b.1, a.2 + b.2);
        prop_assert_eq!(counts(&ner), add(counts(&oot.0), counts(&it.0)));
        prop_assert_eq!(counts(&re), add(counts(&oot.1), counts(&it.1)));
    }

    #[test]
    fn scores_ignore_sentence_order(items in prop::collection::vec(scored_sentence(), 1..8), rot in 0usize..8) {
        let (gold, preds): (Vec<_>, Vec<_>) = items.iter().cloned().unzip();
        let mut shuffled = items;
        shuffled.reverse();
        let k = rot % shuffled.len();
        shuffled.rotate_left(k);
        let (g2, p2): (Vec<_>, Vec<_>) = shuffled.into_iter().unzip();
        let a = score_corpus(&gold, &preds, MatchMode::Exact).unwrap();
        let b = score_corpus(&g2, &p2, MatchMode::Exact).unwrap();
        prop_assert_eq!(counts(&a.0), counts(&b.0));
        prop_assert_eq!(counts(&a.1), counts(&b.1));
    }

    #[test]
    fn gold_predictions_have_no_errors(s in sentence()) {
        let gold = s.gold_set();
        let ner = score_entities(&gold, &gold, MatchMode::Exact);
        let re = score_relations(&gold, &gold);
        prop_assert_eq!((ner.fp, ner.fn_, re.fp, re.fn_), (0, 0, 0, 0));
        let tax = error_taxonomy(&gold, &s, MatchMode::Exact);
        prop_assert_eq!((tax.en, tax.et_np, tax.son, tax.sor_np), (0, 0, 0, 0));
    }

    #[test]
    fn taxonomy_agrees_with_micro_counts((s, pred) in scored_sentence()) {
        let gold = s.gold_set();
        let ner = score_entities(&pred, &gold, MatchMode::Exact);
        let re = score_relations(&pred, &gold);
        let tax = error_taxonomy(&pred, &s, MatchMode::Exact);
        prop_assert_eq!(tax.et, ner.tp);
        prop_assert_eq!(tax.sor, re.tp);
        prop_assert!(tax.en <= ner.fp);
        prop_assert!(tax.et_np <= ner.fn_);
        prop_assert!(tax.son <= re.fp);
        prop_assert!(tax.sor_np <= re.fn_);
        prop_assert!(tax.etsor <= tax.sor);
        prop_assert!(tax.etson <= tax.son);
    }
}
