//! Annotated sentences, label schemas and the JSON-lines corpus format.
//!
//! One sentence per line:
//!
//! ```json
//! {"tokens": ["Alice", "works", "for", "Acme"],
//!  "entities": [{"start": 0, "end": 0, "type": "PER"}, {"start": 3, "end": 3, "type": "ORG"}],
//!  "relations": [{"subject": 0, "object": 1, "type": "works_for"}]}
//! ```
//!
//! Spans are zero-based and end-inclusive; relation `subject`/`object` index
//! into the line's `entities`. `entities` and `relations` may be omitted.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decoder::{EntityCells, EntitySpan, PredictionSet, RelationHead};
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

/// Whether entities carry full spans or only their tail position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationMode {
    #[default]
    FullSpan,
    TailOnly,
}

impl AnnotationMode {
    pub fn entity_cells(self) -> EntityCells {
        match self {
            AnnotationMode::FullSpan => EntityCells::UpperTriangle,
            AnnotationMode::TailOnly => EntityCells::Diagonal,
        }
    }
}

/// Ordered entity and relation type names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSchema {
    pub entity_types: Vec<String>,
    pub relation_types: Vec<String>,
    #[serde(default)]
    pub annotation: AnnotationMode,
}

impl LabelSchema {
    pub fn new(
        entity_types: Vec<String>,
        relation_types: Vec<String>,
        annotation: AnnotationMode,
    ) -> Result<Self> {
        let schema = LabelSchema {
            entity_types,
            relation_types,
            annotation,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        for (kind, names) in [("entity_types", &self.entity_types), ("relation_types", &self.relation_types)] {
            if names.is_empty() {
                return Err(Error::Config(format!("schema `{kind}` is empty")));
            }
            let mut seen = HashSet::new();
            if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
                return Err(Error::Config(format!("schema `{kind}` repeats `{dup}`")));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: LabelSchema = serde_json::from_str(&text).map_err(|source| Error::Json {
            context: format!("schema {}", path.display()),
            source,
        })?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("schema serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn num_entity_types(&self) -> usize {
        self.entity_types.len()
    }

    pub fn num_relation_types(&self) -> usize {
        self.relation_types.len()
    }

    pub fn entity_index(&self, name: &str) -> Option<usize> {
        self.entity_types.iter().position(|n| n == name)
    }

    pub fn relation_index(&self, name: &str) -> Option<usize> {
        self.relation_types.iter().position(|n| n == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Entity {
    pub start: usize,
    pub end: usize,
    pub label: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Relation {
    /// Index into the sentence's entities.
    pub subject: usize,
    pub object: usize,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotatedSentence {
    pub tokens: Vec<String>,
    pub entities: Vec<Entity>,
    pub relations: Vec<Relation>,
    pub mode: AnnotationMode,
}

impl AnnotatedSentence {
    pub fn unlabeled(tokens: Vec<String>, mode: AnnotationMode) -> Self {
        AnnotatedSentence {
            tokens,
            entities: Vec::new(),
            relations: Vec::new(),
            mode,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// In-triple: at least one relation.
    pub fn is_in_triple(&self) -> bool {
        !self.relations.is_empty()
    }

    /// Token position standing for an entity in the relation table: its
    /// first token for full spans, its tail otherwise.
    pub fn anchor(&self, e: &Entity) -> usize {
        match self.mode {
            AnnotationMode::FullSpan => e.start,
            AnnotationMode::TailOnly => e.end,
        }
    }

    /// Checks indices against the schema; `(field, message)` on failure.
    pub fn check(&self, schema: &LabelSchema) -> std::result::Result<(), (String, String)> {
        if self.tokens.is_empty() {
            return Err(("tokens".into(), "sentence has no tokens".into()));
        }
        let t = self.tokens.len();
        for (n, e) in self.entities.iter().enumerate() {
            if e.end < e.start {
                return Err((format!("entities[{n}].end"), format!("end {} < start {}", e.end, e.start)));
            }
            if e.end >= t {
                return Err((format!("entities[{n}].end"), format!("end {} ≥ sentence length {t}", e.end)));
            }
            if e.label >= schema.num_entity_types() {
                return Err((format!("entities[{n}].type"), format!("label index {} out of range", e.label)));
            }
            if self.mode == AnnotationMode::TailOnly && e.start != e.end {
                return Err((
                    format!("entities[{n}]"),
                    "tail-only annotation requires start == end".into(),
                ));
            }
        }
        for (n, r) in self.relations.iter().enumerate() {
            for (field, idx) in [("subject", r.subject), ("object", r.object)] {
                if idx >= self.entities.len() {
                    return Err((
                        format!("relations[{n}].{field}"),
                        format!("entity index {idx} out of range ({} entities)", self.entities.len()),
                    ));
                }
            }
            if r.label >= schema.num_relation_types() {
                return Err((format!("relations[{n}].type"), format!("label index {} out of range", r.label)));
            }
        }
        Ok(())
    }

    /// Annotations as a deduplicated set in table coordinates.
    pub fn gold_set(&self) -> PredictionSet {
        PredictionSet {
            entities: self
                .entities
                .iter()
                .map(|e| EntitySpan {
                    start: e.start,
                    end: e.end,
                    label: e.label,
                })
                .collect(),
            relations: self
                .relations
                .iter()
                .map(|r| RelationHead {
                    subject: self.anchor(&self.entities[r.subject]),
                    object: self.anchor(&self.entities[r.object]),
                    label: r.label,
                })
                .collect(),
        }
    }

    /// Binary entity `[t, t, u]` and relation `[t, t, v]` tables.
    pub fn to_gold_tables(&self, schema: &LabelSchema) -> (Tensor, Tensor) {
        let t = self.tokens.len();
        let (u, v) = (schema.num_entity_types(), schema.num_relation_types());
        let mut ent = Tensor::zeros(&[t, t, u]);
        let mut rel = Tensor::zeros(&[t, t, v]);
        let gold = self.gold_set();
        for e in &gold.entities {
            ent.set(&[e.start, e.end, e.label], 1.0);
        }
        for r in &gold.relations {
            rel.set(&[r.subject, r.object, r.label], 1.0);
        }
        (ent, rel)
    }

    /// Builds a sentence in corpus form from a prediction set. Relations
    /// are attached to the first predicted entity anchored at each position;
    /// relations without an entity at either position are dropped.
    pub fn from_predictions(tokens: Vec<String>, preds: &PredictionSet, mode: AnnotationMode) -> Self {
        let mut s = AnnotatedSentence::unlabeled(tokens, mode);
        s.entities = preds
            .entities
            .iter()
            .map(|e| Entity {
                start: e.start,
                end: e.end,
                label: e.label,
            })
            .collect();
        let mut by_anchor: HashMap<usize, usize> = HashMap::new();
        for (n, e) in s.entities.iter().enumerate() {
            by_anchor.entry(s.anchor(e)).or_insert(n);
        }
        s.relations = preds
            .relations
            .iter()
            .filter_map(|r| {
                Some(Relation {
                    subject: *by_anchor.get(&r.subject)?,
                    object: *by_anchor.get(&r.object)?,
                    label: r.label,
                })
            })
            .collect();
        s
    }
}

#[derive(Serialize, Deserialize)]
struct RawEntity {
    start: usize,
    end: usize,
    #[serde(rename = "type")]
    label: String,
}

#[derive(Serialize, Deserialize)]
struct RawRelation {
    subject: usize,
    object: usize,
    #[serde(rename = "type")]
    label: String,
}

#[derive(Serialize, Deserialize)]
struct RawSentence {
    tokens: Vec<String>,
    #[serde(default)]
    entities: Vec<RawEntity>,
    #[serde(default)]
    relations: Vec<RawRelation>,
}

fn validation(source: &str, line: usize, field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Validation {
        path: source.to_string(),
        line,
        field: field.into(),
        message: message.into(),
    }
}

fn parse_line(text: &str, source: &str, line: usize, schema: &LabelSchema) -> Result<AnnotatedSentence> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| validation(source, line, "<line>", format!("malformed JSON: {e}")))?;
    if !value.is_object() || value.get("tokens").is_none() {
        return Err(validation(
            source,
            line,
            "tokens",
            "expected an object with a `tokens` array (tokenized input required)",
        ));
    }
    let raw: RawSentence =
        serde_json::from_value(value).map_err(|e| validation(source, line, "<line>", e.to_string()))?;
    let mut entities = Vec::with_capacity(raw.entities.len());
    for (n, e) in raw.entities.iter().enumerate() {
        let label = schema
            .entity_index(&e.label)
            .ok_or_else(|| validation(source, line, format!("entities[{n}].type"), format!("unknown entity type `{}`", e.label)))?;
        entities.push(Entity {
            start: e.start,
            end: e.end,
            label,
        });
    }
    let mut relations = Vec::with_capacity(raw.relations.len());
    for (n, r) in raw.relations.iter().enumerate() {
        let label = schema.relation_index(&r.label).ok_or_else(|| {
            validation(source, line, format!("relations[{n}].type"), format!("unknown relation type `{}`", r.label))
        })?;
        relations.push(Relation {
            subject: r.subject,
            object: r.object,
            label,
        });
    }
    let sentence = AnnotatedSentence {
        tokens: raw.tokens,
        entities,
        relations,
        mode: schema.annotation,
    };
    sentence
        .check(schema)
        .map_err(|(field, msg)| validation(source, line, field, msg))?;
    Ok(sentence)
}

/// Parses a JSON-lines corpus; blank lines are skipped.
pub fn parse_corpus(reader: impl Read, source: &str, schema: &LabelSchema) -> Result<Vec<AnnotatedSentence>> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_line(&line, source, n + 1, schema)?);
    }
    Ok(out)
}

pub fn load_corpus(path: impl AsRef<Path>, schema: &LabelSchema) -> Result<Vec<AnnotatedSentence>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(file, &path.display().to_string(), schema)
}

/// One JSON line for a sentence.
pub fn sentence_to_json(sentence: &AnnotatedSentence, schema: &LabelSchema) -> String {
    let raw = RawSentence {
        tokens: sentence.tokens.clone(),
        entities: sentence
            .entities
            .iter()
            .map(|e| RawEntity {
                start: e.start,
                end: e.end,
                label: schema.entity_types[e.label].clone(),
            })
            .collect(),
        relations: sentence
            .relations
            .iter()
            .map(|r| RawRelation {
                subject: r.subject,
                object: r.object,
                label: schema.relation_types[r.label].clone(),
            })
            .collect(),
    };
    serde_json::to_string(&raw).expect("sentence serializes")
}

pub fn write_corpus(mut w: impl Write, corpus: &[AnnotatedSentence], schema: &LabelSchema) -> std::io::Result<()> {
    for s in corpus {
        writeln!(w, "{}", sentence_to_json(s, schema))?;
    }
    Ok(())
}

pub fn save_corpus(path: impl AsRef<Path>, corpus: &[AnnotatedSentence], schema: &LabelSchema) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_corpus(&mut buf, corpus, schema).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Splits into out-of-triple (no relations) and in-triple sentences.
pub fn split_oot_it(corpus: &[AnnotatedSentence]) -> (Vec<&AnnotatedSentence>, Vec<&AnnotatedSentence>) {
    corpus.iter().partition(|s| !s.is_in_triple())
}

/// Token ids for the trainable embedding table. Id 0 is the unknown token.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

pub const UNKNOWN_TOKEN: &str = "<unk>";

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    /// Collects tokens in first-seen order.
    pub fn build<'a>(sentences: impl IntoIterator<Item = &'a AnnotatedSentence>) -> Self {
        let mut tokens = vec![UNKNOWN_TOKEN.to_string()];
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut ordered = Vec::new();
        for s in sentences {
            for t in &s.tokens {
                if t != UNKNOWN_TOKEN && seen.insert(t.as_str()) {
                    ordered.push(t.clone());
                }
            }
        }
        tokens.extend(ordered);
        Vocabulary::from(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Looks up one embedding row per token: `[t × d_p]`.
pub fn embed(g: &mut Graph, tokens: &[String], vocab: &Vocabulary, table: Var) -> Result<Var> {
    if tokens.is_empty() {
        return Err(Error::contract("cannot embed an empty sentence"));
    }
    g.gather_rows(table, &vocab.ids(tokens))
}
