//! Scoring predictions against gold annotations.
//!
//! Predictions and gold are compared as sets, so duplicate predictions
//! count once. Relations are compared on anchor positions (span start for
//! full-span corpora, tail for tail-only corpora) and label; the match mode
//! only changes how entities are compared.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedSentence, LabelSchema};
use crate::decoder::PredictionSet;
use crate::error::{Error, Result};

/// Counts with derived precision, recall and F1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf1 {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Prf1 {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf1 {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }

    /// Sums counts and recomputes the ratios.
    pub fn merge(&self, other: &Prf1) -> Prf1 {
        Prf1::from_counts(self.tp + other.tp, self.fp + other.fp, self.fn_ + other.fn_)
    }

    /// True when no prediction or gold item was seen.
    pub fn is_unseen(&self) -> bool {
        self.tp + self.fp + self.fn_ == 0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchMode {
    /// Start, end and type must agree.
    #[default]
    #[serde(rename = "exact")]
    Exact,
    /// Only the end position and type are compared.
    #[serde(rename = "tail")]
    TailOnly,
}

impl std::str::FromStr for MatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(MatchMode::Exact),
            "tail" | "tail_only" | "partial" => Ok(MatchMode::TailOnly),
            other => Err(Error::Config(format!("unknown match mode `{other}` (expected exact or tail)"))),
        }
    }
}

impl std::fmt::Display for MatchMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MatchMode::Exact => "exact",
            MatchMode::TailOnly => "tail",
        })
    }
}

/// `(start, end)` under the match mode; the start is dropped in tail mode.
type Span = (Option<usize>, usize);

fn span(start: usize, end: usize, mode: MatchMode) -> Span {
    match mode {
        MatchMode::Exact => (Some(start), end),
        MatchMode::TailOnly => (None, end),
    }
}

fn entity_keys(set: &PredictionSet, mode: MatchMode) -> BTreeSet<(Span, usize)> {
    set.entities.iter().map(|e| (span(e.start, e.end, mode), e.label)).collect()
}

fn count<T: Ord>(pred: &BTreeSet<T>, gold: &BTreeSet<T>) -> Prf1 {
    let tp = pred.intersection(gold).count();
    Prf1::from_counts(tp, pred.len() - tp, gold.len() - tp)
}

pub fn score_entities(pred: &PredictionSet, gold: &PredictionSet, mode: MatchMode) -> Prf1 {
    count(&entity_keys(pred, mode), &entity_keys(gold, mode))
}

pub fn score_relations(pred: &PredictionSet, gold: &PredictionSet) -> Prf1 {
    count(&pred.relations, &gold.relations)
}

/// Entity counts per type index.
pub fn score_entities_by_type(pred: &PredictionSet, gold: &PredictionSet, mode: MatchMode, types: usize) -> Vec<Prf1> {
    let (p, g) = (entity_keys(pred, mode), entity_keys(gold, mode));
    (0..types)
        .map(|k| {
            let pk = p.iter().filter(|e| e.1 == k).copied().collect();
            let gk = g.iter().filter(|e| e.1 == k).copied().collect();
            count(&pk, &gk)
        })
        .collect()
}

/// Relation counts per type index.
pub fn score_relations_by_type(pred: &PredictionSet, gold: &PredictionSet, types: usize) -> Vec<Prf1> {
    (0..types)
        .map(|l| {
            let pl = pred.relations.iter().filter(|r| r.label == l).copied().collect();
            let gl = gold.relations.iter().filter(|r| r.label == l).copied().collect();
            count(&pl, &gl)
        })
        .collect()
}

/// Unweighted mean of per-class F1.
pub fn macro_f1<'a>(per_class: impl IntoIterator<Item = &'a Prf1>) -> Result<f64> {
    let f1s: Vec<f64> = per_class.into_iter().map(|p| p.f1).collect();
    if f1s.is_empty() {
        return Err(Error::contract("macro F1 needs at least one class"));
    }
    Ok(f1s.iter().sum::<f64>() / f1s.len() as f64)
}

/// Prediction outcome tallies.
///
/// * `et`: predicted entity with correct span and type.
/// * `en`: predicted entity with a gold span but the wrong type.
/// * `et_np`: gold entity whose span was not predicted with any type.
/// * `sor`: predicted relation with correct anchors and type.
/// * `son`: predicted relation with gold anchors but the wrong type.
/// * `sor_np`: gold relation whose anchor pair was not predicted at all.
/// * `etsor`: `sor` relation whose two gold entities are both `et`.
/// * `etson`: `son` relation whose two gold entities are both `et`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorTaxonomyCounts {
    #[serde(rename = "ET")]
    pub et: usize,
    #[serde(rename = "EN")]
    pub en: usize,
    #[serde(rename = "ET_NP")]
    pub et_np: usize,
    #[serde(rename = "SOR")]
    pub sor: usize,
    #[serde(rename = "SON")]
    pub son: usize,
    #[serde(rename = "SOR_NP")]
    pub sor_np: usize,
    #[serde(rename = "ETSOR")]
    pub etsor: usize,
    #[serde(rename = "ETSON")]
    pub etson: usize,
}

impl ErrorTaxonomyCounts {
    pub fn merge(&self, o: &Self) -> Self {
        ErrorTaxonomyCounts {
            et: self.et + o.et,
            en: self.en + o.en,
            et_np: self.et_np + o.et_np,
            sor: self.sor + o.sor,
            son: self.son + o.son,
            sor_np: self.sor_np + o.sor_np,
            etsor: self.etsor + o.etsor,
            etson: self.etson + o.etson,
        }
    }
}

pub fn error_taxonomy(pred: &PredictionSet, gold: &AnnotatedSentence, mode: MatchMode) -> ErrorTaxonomyCounts {
    let gold_set = gold.gold_set();
    let pred_keys = entity_keys(pred, mode);
    let gold_keys = entity_keys(&gold_set, mode);
    let pred_spans: BTreeSet<Span> = pred_keys.iter().map(|k| k.0).collect();
    let gold_spans: BTreeSet<Span> = gold_keys.iter().map(|k| k.0).collect();

    let mut c = ErrorTaxonomyCounts::default();
    for k in &pred_keys {
        if gold_keys.contains(k) {
            c.et += 1;
        } else if gold_spans.contains(&k.0) {
            c.en += 1;
        }
    }
    c.et_np = gold_spans.iter().filter(|s| !pred_spans.contains(s)).count();

    let pred_pairs: BTreeSet<(usize, usize)> = pred.relations.iter().map(|r| (r.subject, r.object)).collect();
    let gold_pairs: BTreeSet<(usize, usize)> = gold_set.relations.iter().map(|r| (r.subject, r.object)).collect();
    c.sor_np = gold_pairs.iter().filter(|p| !pred_pairs.contains(p)).count();

    // Gold triples whose two entities were both predicted correctly, by anchor pair.
    let entity_ok = |n: usize| {
        let e = &gold.entities[n];
        pred_keys.contains(&(span(e.start, e.end, mode), e.label))
    };
    let good_triples: BTreeSet<(usize, usize, usize)> = gold
        .relations
        .iter()
        .filter(|r| entity_ok(r.subject) && entity_ok(r.object))
        .map(|r| {
            (
                gold.anchor(&gold.entities[r.subject]),
                gold.anchor(&gold.entities[r.object]),
                r.label,
            )
        })
        .collect();

    for r in &pred.relations {
        if gold_set.relations.contains(r) {
            c.sor += 1;
            if good_triples.contains(&(r.subject, r.object, r.label)) {
                c.etsor += 1;
            }
        } else if gold_pairs.contains(&(r.subject, r.object)) {
            c.son += 1;
            if good_triples.iter().any(|t| (t.0, t.1) == (r.subject, r.object)) {
                c.etson += 1;
            }
        }
    }
    c
}

/// Micro entity and relation scores over a corpus.
pub fn score_corpus(corpus: &[AnnotatedSentence], predictions: &[PredictionSet], mode: MatchMode) -> Result<(Prf1, Prf1)> {
    check_aligned(corpus, predictions)?;
    let mut ner = Prf1::default();
    let mut re = Prf1::default();
    for (s, p) in corpus.iter().zip(predictions) {
        let gold = s.gold_set();
        ner = ner.merge(&score_entities(p, &gold, mode));
        re = re.merge(&score_relations(p, &gold));
    }
    Ok((ner, re))
}

fn check_aligned(corpus: &[AnnotatedSentence], predictions: &[PredictionSet]) -> Result<()> {
    if corpus.len() != predictions.len() {
        return Err(Error::contract(format!(
            "{} sentences but {} prediction sets",
            corpus.len(),
            predictions.len()
        )));
    }
    Ok(())
}

/// Scores of one subset of the corpus.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub sentences: usize,
    /// True when the subset has no sentences.
    pub empty: bool,
    pub ner: Prf1,
    pub re: Prf1,
    /// Mean F1 over entity types seen in this subset, if any.
    pub ner_macro_f1: Option<f64>,
    pub re_macro_f1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub match_mode: MatchMode,
    pub sentences: usize,
    pub overall: Section,
    /// Sentences without relations.
    pub oot: Section,
    /// Sentences with at least one relation.
    pub it: Section,
    pub entity_types: IndexMap<String, Prf1>,
    pub relation_types: IndexMap<String, Prf1>,
    pub error_taxonomy: ErrorTaxonomyCounts,
}

struct Tally {
    sentences: usize,
    ner: Vec<Prf1>,
    re: Vec<Prf1>,
}

impl Tally {
    fn new(u: usize, v: usize) -> Self {
        Tally {
            sentences: 0,
            ner: vec![Prf1::default(); u],
            re: vec![Prf1::default(); v],
        }
    }

    fn add(&mut self, ner: &[Prf1], re: &[Prf1]) {
        self.sentences += 1;
        for (a, b) in self.ner.iter_mut().zip(ner) {
            *a = a.merge(b);
        }
        for (a, b) in self.re.iter_mut().zip(re) {
            *a = a.merge(b);
        }
    }

    fn section(&self) -> Section {
        let total = |v: &[Prf1]| v.iter().fold(Prf1::default(), |a, b| a.merge(b));
        let seen = |v: &[Prf1]| {
            let seen: Vec<&Prf1> = v.iter().filter(|p| !p.is_unseen()).collect();
            macro_f1(seen).ok()
        };
        Section {
            sentences: self.sentences,
            empty: self.sentences == 0,
            ner: total(&self.ner),
            re: total(&self.re),
            ner_macro_f1: seen(&self.ner),
            re_macro_f1: seen(&self.re),
        }
    }
}

/// Full report: overall, out-of-triple and in-triple scores, per-type scores
/// and the outcome taxonomy.
pub fn report(
    corpus: &[AnnotatedSentence],
    predictions: &[PredictionSet],
    schema: &LabelSchema,
    mode: MatchMode,
) -> Result<EvalReport> {
    check_aligned(corpus, predictions)?;
    let (u, v) = (schema.num_entity_types(), schema.num_relation_types());
    let mut overall = Tally::new(u, v);
    let mut oot = Tally::new(u, v);
    let mut it = Tally::new(u, v);
    let mut taxonomy = ErrorTaxonomyCounts::default();
    for (s, p) in corpus.iter().zip(predictions) {
        let gold = s.gold_set();
        let ner = score_entities_by_type(p, &gold, mode, u);
        let re = score_relations_by_type(p, &gold, v);
        overall.add(&ner, &re);
        if s.is_in_triple() {
            it.add(&ner, &re);
        } else {
            oot.add(&ner, &re);
        }
        taxonomy = taxonomy.merge(&error_taxonomy(p, s, mode));
    }
    Ok(EvalReport {
        match_mode: mode,
        sentences: corpus.len(),
        overall: overall.section(),
        oot: oot.section(),
        it: it.section(),
        entity_types: schema.entity_types.iter().cloned().zip(overall.ner.iter().copied()).collect(),
        relation_types: schema.relation_types.iter().cloned().zip(overall.re.iter().copied()).collect(),
        error_taxonomy: taxonomy,
    })
}

impl EvalReport {
    /// Plain-text table of the report.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let row = |s: &mut String, name: &str, p: &Prf1| {
            let _ = writeln!(
                s,
                "  {name:<16} P={:.4} R={:.4} F1={:.4} (tp={} fp={} fn={})",
                p.precision, p.recall, p.f1, p.tp, p.fp, p.fn_
            );
        };
        let _ = writeln!(s, "match: {}  sentences: {}", self.match_mode, self.sentences);
        for (name, sec) in [("overall", &self.overall), ("oot", &self.oot), ("it", &self.it)] {
            if sec.empty {
                let _ = writeln!(s, "{name}: (empty)");
                continue;
            }
            let _ = writeln!(s, "{name}: {} sentences", sec.sentences);
            row(&mut s, "ner", &sec.ner);
            row(&mut s, "re", &sec.re);
            if let Some(m) = sec.ner_macro_f1 {
                let _ = writeln!(s, "  ner macro F1     {m:.4}");
            }
            if let Some(m) = sec.re_macro_f1 {
                let _ = writeln!(s, "  re macro F1      {m:.4}");
            }
        }
        let _ = writeln!(s, "entity types:");
        for (k, p) in &self.entity_types {
            row(&mut s, k, p);
        }
        let _ = writeln!(s, "relation types:");
        for (k, p) in &self.relation_types {
            row(&mut s, k, p);
        }
        let t = &self.error_taxonomy;
        let _ = writeln!(
            s,
            "taxonomy: ET={} EN={} ET_NP={} SOR={} SON={} SOR_NP={} ETSOR={} ETSON={}",
            t.et, t.en, t.et_np, t.sor, t.son, t.sor_np, t.etsor, t.etson
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_corpus, AnnotationMode};
    use crate::decoder::{EntitySpan, RelationHead};

    fn ent(start: usize, end: usize, label: usize) -> EntitySpan {
        EntitySpan { start, end, label }
    }

    fn rel(subject: usize, object: usize, label: usize) -> RelationHead {
        RelationHead { subject, object, label }
    }

    fn set(e: &[EntitySpan], r: &[RelationHead]) -> PredictionSet {
        PredictionSet {
            entities: e.iter().copied().collect(),
            relations: r.iter().copied().collect(),
        }
    }

    fn schema() -> LabelSchema {
        LabelSchema::new(vec!["A".into(), "B".into()], vec!["r".into(), "q".into()], AnnotationMode::FullSpan).unwrap()
    }

    #[test]
    fn prf1_arithmetic() {
        let p = Prf1::from_counts(2, 1, 1);
        assert_eq!((p.precision, p.recall), (2.0 / 3.0, 2.0 / 3.0));
        assert!((p.f1 - 2.0 / 3.0).abs() < 1e-15);
        let z = Prf1::from_counts(0, 0, 0);
        assert_eq!((z.precision, z.recall, z.f1), (0.0, 0.0, 0.0));
        assert_eq!(Prf1::from_counts(0, 3, 2).f1, 0.0);
    }

    #[test]
    fn identical_sets_score_one() {
        let g = set(&[ent(0, 1, 0), ent(3, 3, 1)], &[rel(0, 3, 0)]);
        assert_eq!(score_entities(&g, &g, MatchMode::Exact).f1, 1.0);
        assert_eq!(score_relations(&g, &g).f1, 1.0);
    }

    #[test]
    fn two_tp_one_fp_one_fn() {
        let gold = set(&[ent(0, 0, 0), ent(1, 1, 0), ent(2, 2, 0)], &[]);
        let pred = set(&[ent(0, 0, 0), ent(1, 1, 0), ent(3, 3, 0)], &[]);
        let p = score_entities(&pred, &gold, MatchMode::Exact);
        assert_eq!((p.tp, p.fp, p.fn_), (2, 1, 1));
    }

    #[test]
    fn tail_mode_ignores_start() {
        let gold = set(&[ent(1, 3, 0)], &[]);
        let pred = set(&[ent(3, 3, 0)], &[]);
        assert_eq!(score_entities(&pred, &gold, MatchMode::TailOnly).tp, 1);
        assert_eq!(score_entities(&pred, &gold, MatchMode::Exact).tp, 0);
    }

    #[test]
    fn direction_matters_for_relations() {
        let gold = set(&[], &[rel(0, 2, 0)]);
        let pred = set(&[], &[rel(2, 0, 0)]);
        let p = score_relations(&pred, &gold);
        assert_eq!((p.tp, p.fp, p.fn_), (0, 1, 1));
        let empty = PredictionSet::default();
        assert!(score_relations(&empty, &empty).is_unseen());
    }

    #[test]
    fn three_gold_two_correct() {
        let gold = set(&[], &[rel(0, 1, 0), rel(1, 2, 0), rel(2, 3, 1)]);
        let pred = set(&[], &[rel(0, 1, 0), rel(2, 3, 1)]);
        let p = score_relations(&pred, &gold);
        assert_eq!(p.precision, 1.0);
        assert_eq!(p.recall, 2.0 / 3.0);
    }

    #[test]
    fn macro_examples() {
        let a = Prf1::from_counts(1, 0, 0);
        let b = Prf1::from_counts(0, 1, 1);
        assert_eq!(macro_f1([&a]).unwrap(), 1.0);
        assert_eq!(macro_f1([&a, &b]).unwrap(), 0.5);
        assert!(macro_f1(std::iter::empty()).is_err());
    }

    fn sentence(json: &str) -> AnnotatedSentence {
        parse_corpus(json.as_bytes(), "mem", &schema()).unwrap().remove(0)
    }

    #[test]
    fn taxonomy_perfect_and_wrong_type() {
        let s = sentence(
            r#"{"tokens":["a","b","c"],"entities":[{"start":0,"end":0,"type":"A"},{"start":2,"end":2,"type":"B"}],"relations":[{"subject":0,"object":1,"type":"r"}]}"#,
        );
        let t = error_taxonomy(&s.gold_set(), &s, MatchMode::Exact);
        assert_eq!(
            t,
            ErrorTaxonomyCounts {
                et: 2,
                sor: 1,
                etsor: 1,
                ..Default::default()
            }
        );
        let pred = set(&[ent(0, 0, 1), ent(2, 2, 1)], &[rel(0, 2, 1)]);
        let t = error_taxonomy(&pred, &s, MatchMode::Exact);
        assert_eq!((t.et, t.en, t.et_np), (1, 1, 0));
        assert_eq!((t.sor, t.son, t.sor_np, t.etsor, t.etson), (0, 1, 0, 0, 0));
    }

    #[test]
    fn report_sections_and_mismatch() {
        let s = sentence(r#"{"tokens":["a","b"],"entities":[{"start":0,"end":1,"type":"A"}],"relations":[]}"#);
        let preds = vec![s.gold_set()];
        let r = report(std::slice::from_ref(&s), &preds, &schema(), MatchMode::Exact).unwrap();
        assert!(r.it.empty);
        assert_eq!(r.oot.ner.f1, 1.0);
        assert_eq!(r.overall.ner_macro_f1, Some(1.0));
        assert_eq!(r.overall.re_macro_f1, None);
        assert!(report(&[s], &[], &schema(), MatchMode::Exact).is_err());

        let empty = report(&[], &[], &schema(), MatchMode::TailOnly).unwrap();
        assert!(empty.overall.empty && empty.oot.empty && empty.it.empty);
        let json = serde_json::to_value(&empty).unwrap();
        assert_eq!(json["match_mode"], "tail");
        assert_eq!(json["overall"]["ner"]["fn"], 0);
        assert!(empty.render_text().contains("overall: (empty)"));
    }

    #[test]
    fn match_mode_parses() {
        assert_eq!("tail".parse::<MatchMode>().unwrap(), MatchMode::TailOnly);
        assert_eq!("EXACT".parse::<MatchMode>().unwrap(), MatchMode::Exact);
        assert!("fuzzy".parse::<MatchMode>().is_err());
    }
}
