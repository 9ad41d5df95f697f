//! Immutable temporal knowledge-graph store.
//!
//! Ingests quadruple datasets (tab-separated integer lines), normalizes
//! timestamps, materializes inverse facts for the training window, and builds
//! the two indices the walker queries at every step:
//!
//! * `out_index` — per-entity outgoing edges `(relation, object, time)`,
//!   time-descending, for temporal actions;
//! * `rel_subject_index` — per-relation `(object, time)` pairs, time-descending,
//!   for semantic actions.
//!
//! Validation and test facts never enter the indices; they are kept aside for
//! the evaluator's filter so inference only ever sees historical facts.

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};
use crate::types::{Action, EntityId, Quadruple, RelationId, TimeStep};

const BUNDLE_MAGIC: &[u8; 4] = b"TKGB";
const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    fn idx(self) -> usize {
        match self {
            Split::Train => 0,
            Split::Valid => 1,
            Split::Test => 2,
        }
    }
}

/// Raw fact counts per split, before inverse augmentation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SplitCounts {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

/// Declared dataset statistics, checked against what was actually ingested.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entity_count: Option<u64>,
    pub relation_count: Option<u64>,
    pub timestamp_count: Option<u64>,
    pub train: Option<u64>,
    pub valid: Option<u64>,
    pub test: Option<u64>,
    pub granularity: Option<u64>,
}

impl Manifest {
    /// Parses a flat `key=value` manifest. Unknown keys are rejected.
    pub fn parse(reader: impl BufRead, source_name: &str) -> Result<Self> {
        let mut m = Manifest::default();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                source_name: source_name.to_string(),
                line: lineno + 1,
                msg: format!("expected key=value, got {line:?}"),
            })?;
            let value: u64 = value.trim().parse().map_err(|_| Error::Parse {
                source_name: source_name.to_string(),
                line: lineno + 1,
                msg: format!("value for {key:?} is not a non-negative integer"),
            })?;
            let slot = match key.trim() {
                "entity_count" => &mut m.entity_count,
                "relation_count" => &mut m.relation_count,
                "timestamp_count" => &mut m.timestamp_count,
                "train" => &mut m.train,
                "valid" => &mut m.valid,
                "test" => &mut m.test,
                "granularity" => &mut m.granularity,
                other => {
                    return Err(Error::Parse {
                        source_name: source_name.to_string(),
                        line: lineno + 1,
                        msg: format!("unknown manifest key {other:?}"),
                    })
                }
            };
            *slot = Some(value);
        }
        Ok(m)
    }
}

/// Parses a `name\tid` map file into an id-indexed name table.
pub fn parse_id_map(reader: impl BufRead, source_name: &str) -> Result<Vec<String>> {
    let mut pairs = Vec::new();
    let mut max_id = 0u64;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let (name, id) = match (cols.next(), cols.next()) {
            (Some(name), Some(id)) => (name, id),
            _ => {
                return Err(Error::Parse {
                    source_name: source_name.to_string(),
                    line: lineno + 1,
                    msg: "expected `name\\tid`".to_string(),
                })
            }
        };
        let id: u64 = id.trim().parse().map_err(|_| Error::Parse {
            source_name: source_name.to_string(),
            line: lineno + 1,
            msg: format!("id column {id:?} is not an integer"),
        })?;
        max_id = max_id.max(id);
        pairs.push((id, name.to_string()));
    }
    let mut names = vec![String::new(); if pairs.is_empty() { 0 } else { max_id as usize + 1 }];
    for (id, name) in pairs {
        names[id as usize] = name;
    }
    Ok(names)
}

#[derive(Debug, Clone, Copy)]
struct RawFact {
    subject: u64,
    relation: u64,
    object: u64,
    time: u64,
}

/// Accumulates splits, then builds the immutable [`TemporalKG`].
pub struct KgBuilder {
    granularity: u64,
    splits: [Vec<RawFact>; 3],
    manifest: Option<Manifest>,
    entity_names: Option<Vec<String>>,
    relation_names: Option<Vec<String>>,
}

impl KgBuilder {
    pub fn new(granularity_divisor: u64) -> Result<Self> {
        if granularity_divisor == 0 {
            return Err(Error::Config("granularity divisor must be >= 1".into()));
        }
        Ok(Self {
            granularity: granularity_divisor,
            splits: [Vec::new(), Vec::new(), Vec::new()],
            manifest: None,
            entity_names: None,
            relation_names: None,
        })
    }

    pub fn manifest(mut self, manifest: Manifest) -> Self {
        self.manifest = Some(manifest);
        self
    }

    pub fn entity_names(mut self, names: Vec<String>) -> Self {
        self.entity_names = Some(names);
        self
    }

    pub fn relation_names(mut self, names: Vec<String>) -> Self {
        self.relation_names = Some(names);
        self
    }

    /// Ingests one split from `subject\trelation\tobject\ttime` lines.
    /// A fifth column, when present, is ignored. Returns the fact count read.
    pub fn add_split(&mut self, split: Split, reader: impl BufRead, source_name: &str) -> Result<usize> {
        let mut count = 0usize;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 && cols.len() != 5 {
                return Err(Error::Parse {
                    source_name: source_name.to_string(),
                    line: lineno + 1,
                    msg: format!("expected 4 (or 5) tab-separated columns, got {}", cols.len()),
                });
            }
            let mut parsed = [0u64; 4];
            for (i, col) in cols.iter().take(4).enumerate() {
                parsed[i] = col.trim().parse().map_err(|_| Error::Parse {
                    source_name: source_name.to_string(),
                    line: lineno + 1,
                    msg: format!("column {} ({:?}) is not a non-negative integer", i + 1, col),
                })?;
            }
            self.splits[split.idx()].push(RawFact {
                subject: parsed[0],
                relation: parsed[1],
                object: parsed[2],
                time: parsed[3],
            });
            count += 1;
        }
        Ok(count)
    }

    pub fn build(self) -> Result<TemporalKG> {
        if self.splits[Split::Train.idx()].is_empty() {
            return Err(Error::EmptyTrainSplit);
        }

        // Vocabulary sizes: declared (manifest / id map) or max-id + 1.
        let declared_entities = self
            .manifest
            .as_ref()
            .and_then(|m| m.entity_count)
            .or(self.entity_names.as_ref().map(|n| n.len() as u64));
        let declared_relations = self
            .manifest
            .as_ref()
            .and_then(|m| m.relation_count)
            .or(self.relation_names.as_ref().map(|n| n.len() as u64));

        let mut max_entity = 0u64;
        let mut max_relation = 0u64;
        for split in &self.splits {
            for f in split {
                max_entity = max_entity.max(f.subject).max(f.object);
                max_relation = max_relation.max(f.relation);
            }
        }
        if let Some(n) = declared_entities {
            for split in &self.splits {
                for f in split {
                    for id in [f.subject, f.object] {
                        if id >= n {
                            return Err(Error::IdOutOfBounds { kind: "entity", id, declared: n });
                        }
                    }
                }
            }
        }
        if let Some(n) = declared_relations {
            for split in &self.splits {
                for f in split {
                    if f.relation >= n {
                        return Err(Error::IdOutOfBounds { kind: "relation", id: f.relation, declared: n });
                    }
                }
            }
        }
        let entity_count = declared_entities.unwrap_or(max_entity + 1) as usize;
        let base_relation_count = declared_relations.unwrap_or(max_relation + 1) as usize;

        // Normalize times: integer-divide by granularity, then re-base to 0.
        let time_floor = self
            .splits
            .iter()
            .flatten()
            .map(|f| f.time / self.granularity)
            .min()
            .expect("train split is non-empty");
        let normalize = |f: &RawFact| Quadruple {
            subject: f.subject as EntityId,
            relation: f.relation as RelationId,
            object: f.object as EntityId,
            time: (f.time / self.granularity - time_floor) as TimeStep,
        };

        let counts = SplitCounts {
            train: self.splits[0].len(),
            valid: self.splits[1].len(),
            test: self.splits[2].len(),
        };

        let mut train_facts: Vec<Quadruple> = Vec::with_capacity(counts.train * 2);
        for f in &self.splits[0] {
            let q = normalize(f);
            train_facts.push(q);
            train_facts.push(Quadruple::new(
                q.object,
                q.relation + base_relation_count as RelationId,
                q.subject,
                q.time,
            ));
        }
        train_facts.sort_unstable_by_key(|q| (q.time, q.subject, q.relation, q.object));

        let mut valid_facts: Vec<Quadruple> = self.splits[1].iter().map(normalize).collect();
        let mut test_facts: Vec<Quadruple> = self.splits[2].iter().map(normalize).collect();
        valid_facts.sort_unstable_by_key(|q| (q.time, q.subject, q.relation, q.object));
        test_facts.sort_unstable_by_key(|q| (q.time, q.subject, q.relation, q.object));

        if let Some(m) = &self.manifest {
            let mut distinct_times: Vec<TimeStep> = train_facts
                .iter()
                .chain(&valid_facts)
                .chain(&test_facts)
                .map(|q| q.time)
                .collect();
            distinct_times.sort_unstable();
            distinct_times.dedup();
            let checks: [(&'static str, Option<u64>, u64); 6] = [
                ("entity_count", m.entity_count, entity_count as u64),
                ("relation_count", m.relation_count, base_relation_count as u64),
                ("timestamp_count", m.timestamp_count, distinct_times.len() as u64),
                ("train", m.train, counts.train as u64),
                ("valid", m.valid, counts.valid as u64),
                ("test", m.test, counts.test as u64),
            ];
            for (key, declared, actual) in checks {
                if let Some(declared) = declared {
                    if declared != actual {
                        return Err(Error::ManifestMismatch { key, declared, actual });
                    }
                }
            }
        }

        Ok(TemporalKG::assemble(
            entity_count,
            base_relation_count,
            train_facts,
            valid_facts,
            test_facts,
            counts,
            self.entity_names,
            self.relation_names,
            self.granularity,
        ))
    }
}

/// Immutable indexed store. Build once, share freely across readers.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalKG {
    entity_count: usize,
    base_relation_count: usize,
    /// Training-window facts including materialized inverses, time-ascending.
    facts: Vec<Quadruple>,
    valid_facts: Vec<Quadruple>,
    test_facts: Vec<Quadruple>,
    /// Per-entity outgoing edges, time-descending, ties (relation, entity) ascending.
    out_index: Vec<Vec<(RelationId, EntityId, TimeStep)>>,
    /// Per-relation (object, time) pairs, time-descending, ties by object ascending.
    rel_subject_index: Vec<Vec<(EntityId, TimeStep)>>,
    train_entities: Vec<bool>,
    max_train_time: TimeStep,
    counts: SplitCounts,
    entity_names: Option<Vec<String>>,
    relation_names: Option<Vec<String>>,
    granularity: u64,
}

impl TemporalKG {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        entity_count: usize,
        base_relation_count: usize,
        facts: Vec<Quadruple>,
        valid_facts: Vec<Quadruple>,
        test_facts: Vec<Quadruple>,
        counts: SplitCounts,
        entity_names: Option<Vec<String>>,
        relation_names: Option<Vec<String>>,
        granularity: u64,
    ) -> Self {
        let augmented = 2 * base_relation_count + 1;
        let mut out_index: Vec<Vec<(RelationId, EntityId, TimeStep)>> = vec![Vec::new(); entity_count];
        let mut rel_subject_index: Vec<Vec<(EntityId, TimeStep)>> = vec![Vec::new(); augmented];
        let mut train_entities = vec![false; entity_count];
        let mut max_train_time = 0;

        for q in &facts {
            out_index[q.subject as usize].push((q.relation, q.object, q.time));
            rel_subject_index[q.relation as usize].push((q.object, q.time));
            train_entities[q.subject as usize] = true;
            train_entities[q.object as usize] = true;
            max_train_time = max_train_time.max(q.time);
        }
        for edges in &mut out_index {
            edges.sort_unstable_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
            edges.dedup();
        }
        for pairs in &mut rel_subject_index {
            pairs.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            pairs.dedup();
        }

        Self {
            entity_count,
            base_relation_count,
            facts,
            valid_facts,
            test_facts,
            out_index,
            rel_subject_index,
            train_entities,
            max_train_time,
            counts,
            entity_names,
            relation_names,
            granularity,
        }
    }

    pub fn entity_count(&self) -> usize {
        self.entity_count
    }

    pub fn base_relation_count(&self) -> usize {
        self.base_relation_count
    }

    /// Base relations, their inverses, and the self-loop relation.
    pub fn augmented_relation_count(&self) -> usize {
        2 * self.base_relation_count + 1
    }

    pub fn self_loop_relation(&self) -> RelationId {
        (2 * self.base_relation_count) as RelationId
    }

    /// Inverse of a relation id; the self-loop relation is its own inverse.
    pub fn invert_relation(&self, r: RelationId) -> RelationId {
        let base = self.base_relation_count as RelationId;
        if r < base {
            r + base
        } else if r < 2 * base {
            r - base
        } else {
            r
        }
    }

    /// Training-window facts including materialized inverses, time-ascending.
    pub fn facts(&self) -> &[Quadruple] {
        &self.facts
    }

    pub fn valid_facts(&self) -> &[Quadruple] {
        &self.valid_facts
    }

    pub fn test_facts(&self) -> &[Quadruple] {
        &self.test_facts
    }

    pub fn counts(&self) -> SplitCounts {
        self.counts
    }

    pub fn max_train_time(&self) -> TimeStep {
        self.max_train_time
    }

    pub fn is_seen(&self, entity: EntityId) -> bool {
        self.train_entities.get(entity as usize).copied().unwrap_or(false)
    }

    pub fn entity_name(&self, id: EntityId) -> Option<&str> {
        self.entity_names
            .as_ref()
            .and_then(|n| n.get(id as usize))
            .map(String::as_str)
            .filter(|s| !s.is_empty())
    }

    pub fn relation_name(&self, id: RelationId) -> Option<&str> {
        self.relation_names
            .as_ref()
            .and_then(|n| n.get(id as usize))
            .map(String::as_str)
            .filter(|s| !s.is_empty())
    }

    /// The `n` latest outgoing edges of `entity` strictly before `time_upper`.
    ///
    /// Unknown entities (including unseen query subjects) simply have no
    /// history, so they get an empty list.
    pub fn temporal_actions(&self, entity: EntityId, time_upper: TimeStep, n: usize) -> Vec<Action> {
        let Some(edges) = self.out_index.get(entity as usize) else {
            return Vec::new();
        };
        let start = edges.partition_point(|e| e.2 >= time_upper);
        edges[start..]
            .iter()
            .take(n)
            .map(|&(relation, entity, time)| Action { relation, entity, time })
            .collect()
    }

    /// The `n` latest `(object, time)` destinations of `relation` strictly
    /// before `time_upper`, as actions labelled with that relation.
    pub fn semantic_actions(&self, relation: RelationId, time_upper: TimeStep, n: usize) -> Vec<Action> {
        let Some(pairs) = self.rel_subject_index.get(relation as usize) else {
            return Vec::new();
        };
        let start = pairs.partition_point(|p| p.1 >= time_upper);
        pairs[start..]
            .iter()
            .take(n)
            .map(|&(entity, time)| Action { relation, entity, time })
            .collect()
    }

    /// Serializes the normalized splits; indices are rebuilt on load, so two
    /// saves of the same logical store are byte-identical.
    pub fn save_bundle(&self, mut w: impl Write) -> Result<()> {
        w.write_all(BUNDLE_MAGIC)?;
        w.write_all(&BUNDLE_VERSION.to_le_bytes())?;
        w.write_all(&self.granularity.to_le_bytes())?;
        w.write_all(&(self.entity_count as u64).to_le_bytes())?;
        w.write_all(&(self.base_relation_count as u64).to_le_bytes())?;

        let write_names = |w: &mut dyn Write, names: &Option<Vec<String>>| -> Result<()> {
            match names {
                None => w.write_all(&0u64.to_le_bytes())?,
                Some(names) => {
                    w.write_all(&(names.len() as u64 + 1).to_le_bytes())?;
                    for name in names {
                        let bytes = name.as_bytes();
                        w.write_all(&(bytes.len() as u64).to_le_bytes())?;
                        w.write_all(bytes)?;
                    }
                }
            }
            Ok(())
        };
        write_names(&mut w, &self.entity_names)?;
        write_names(&mut w, &self.relation_names)?;

        let write_facts = |w: &mut dyn Write, facts: &[Quadruple]| -> Result<()> {
            w.write_all(&(facts.len() as u64).to_le_bytes())?;
            for q in facts {
                w.write_all(&q.subject.to_le_bytes())?;
                w.write_all(&q.relation.to_le_bytes())?;
                w.write_all(&q.object.to_le_bytes())?;
                w.write_all(&q.time.to_le_bytes())?;
            }
            Ok(())
        };
        write_facts(&mut w, &self.facts)?;
        write_facts(&mut w, &self.valid_facts)?;
        write_facts(&mut w, &self.test_facts)?;

        for v in [self.counts.train, self.counts.valid, self.counts.test] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load_bundle(mut r: impl Read) -> Result<Self> {
        let bad = |msg: &str| Error::Checkpoint(format!("store bundle: {msg}"));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != BUNDLE_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = read_u32(&mut r)?;
        if version != BUNDLE_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let granularity = read_u64(&mut r)?;
        let entity_count = read_u64(&mut r)? as usize;
        let base_relation_count = read_u64(&mut r)? as usize;

        let mut read_names = |r: &mut dyn Read| -> Result<Option<Vec<String>>> {
            let tag = read_u64(r)?;
            if tag == 0 {
                return Ok(None);
            }
            let count = (tag - 1) as usize;
            let mut names = Vec::with_capacity(count);
            for _ in 0..count {
                let len = read_u64(r)? as usize;
                let mut buf = vec![0u8; len];
                r.read_exact(&mut buf)?;
                names.push(String::from_utf8(buf).map_err(|_| bad("non-utf8 name"))?);
            }
            Ok(Some(names))
        };
        let entity_names = read_names(&mut r)?;
        let relation_names = read_names(&mut r)?;

        let mut read_facts = |r: &mut dyn Read| -> Result<Vec<Quadruple>> {
            let count = read_u64(r)? as usize;
            let mut facts = Vec::with_capacity(count);
            for _ in 0..count {
                facts.push(Quadruple {
                    subject: read_u32(r)?,
                    relation: read_u32(r)?,
                    object: read_u32(r)?,
                    time: read_u32(r)?,
                });
            }
            Ok(facts)
        };
        let facts = read_facts(&mut r)?;
        let valid_facts = read_facts(&mut r)?;
        let test_facts = read_facts(&mut r)?;
        let counts = SplitCounts {
            train: read_u64(&mut r)? as usize,
            valid: read_u64(&mut r)? as usize,
            test: read_u64(&mut r)? as usize,
        };

        Ok(Self::assemble(
            entity_count,
            base_relation_count,
            facts,
            valid_facts,
            test_facts,
            counts,
            entity_names,
            relation_names,
            granularity,
        ))
    }

    /// Table-2-style statistics of the test split with respect to training.
    pub fn unseen_test_stats(&self) -> UnseenStats {
        let mut unseen = HashMap::new();
        let mut stats = UnseenStats::default();
        for q in &self.test_facts {
            let su = !self.is_seen(q.subject);
            let ou = !self.is_seen(q.object);
            if su {
                unseen.insert(q.subject, ());
            }
            if ou {
                unseen.insert(q.object, ());
            }
            if su {
                stats.quads_unseen_subject += 1;
            }
            if ou {
                stats.quads_unseen_object += 1;
            }
            if su && ou {
                stats.quads_unseen_both += 1;
            }
            if su || ou {
                stats.quads_unseen_any += 1;
            }
        }
        stats.unseen_entities = unseen.len();
        stats
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UnseenStats {
    pub unseen_entities: usize,
    pub quads_unseen_any: usize,
    pub quads_unseen_subject: usize,
    pub quads_unseen_object: usize,
    pub quads_unseen_both: usize,
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn toy_store() -> TemporalKG {
        // 3 facts, 1 declared base relation would be too small: the spec toy
        // declares 2 base relations so inverse ids land at +2.
        let mut b = KgBuilder::new(1).unwrap();
        b.add_split(Split::Train, Cursor::new("0\t0\t1\t0\n1\t1\t2\t1\n2\t0\t0\t2\n"), "toy")
            .unwrap();
        b.manifest(Manifest { relation_count: Some(2), ..Default::default() })
            .build()
            .unwrap()
    }

    #[test]
    fn inverse_augmentation_matches_hand_enumeration() {
        let store = toy_store();
        assert_eq!(store.base_relation_count(), 2);
        assert_eq!(store.augmented_relation_count(), 5);
        assert_eq!(store.self_loop_relation(), 4);
        assert_eq!(store.facts().len(), 6);

        // Hand-enumerated: facts (0,0,1,0),(1,1,2,1),(2,0,0,2) plus inverses
        // (1,2,0,0),(2,3,1,1),(0,2,2,2), sorted time-ascending.
        let expected = vec![
            Quadruple::new(0, 0, 1, 0),
            Quadruple::new(1, 2, 0, 0),
            Quadruple::new(1, 1, 2, 1),
            Quadruple::new(2, 3, 1, 1),
            Quadruple::new(0, 2, 2, 2),
            Quadruple::new(2, 0, 0, 2),
        ];
        assert_eq!(store.facts(), expected.as_slice());

        // Entity 1's outgoing edges: inverse of (0,0,1,0) -> (r2, 0, t0) and
        // the original (1,1,2,1) -> (r1, 2, t1); time-descending.
        let actions = store.temporal_actions(1, 10, 10);
        assert_eq!(
            actions,
            vec![
                Action { relation: 1, entity: 2, time: 1 },
                Action { relation: 2, entity: 0, time: 0 },
            ]
        );
    }

    #[test]
    fn inverse_closure_returns_to_subject() {
        let store = toy_store();
        for q in store.facts().iter().filter(|q| q.relation < 2) {
            let back = store.temporal_actions(q.object, q.time + 1, 100);
            let inv = Action {
                relation: store.invert_relation(q.relation),
                entity: q.subject,
                time: q.time,
            };
            assert!(back.contains(&inv), "missing inverse edge for {q:?}");
        }
    }

    #[test]
    fn temporal_actions_respect_causality_and_budget() {
        // 7 outgoing facts from entity 0 across times 0..7, N=5.
        let mut b = KgBuilder::new(1).unwrap();
        let lines: String = (0..7).map(|t| format!("0\t0\t{}\t{}\n", t % 3 + 1, t)).collect();
        b.add_split(Split::Train, Cursor::new(lines), "toy").unwrap();
        let store = b.build().unwrap();

        let got = store.temporal_actions(0, 100, 5);
        // Full-sort oracle: every edge, time-descending, truncated to 5.
        let mut all: Vec<Action> = (0..7)
            .map(|t| Action { relation: 0, entity: t % 3 + 1, time: t })
            .collect();
        all.sort_by(|a, b| b.time.cmp(&a.time).then(a.relation.cmp(&b.relation)).then(a.entity.cmp(&b.entity)));
        all.truncate(5);
        assert_eq!(got, all);

        // Strict causality at every bound.
        for upper in 0..8 {
            for a in store.temporal_actions(0, upper, 10) {
                assert!(a.time < upper);
            }
        }
    }

    #[test]
    fn semantic_actions_dedup_and_truncate() {
        // Relation 0 occurs 12 times; duplicates of (object, time) collapse.
        let mut b = KgBuilder::new(1).unwrap();
        let mut lines = String::new();
        for i in 0..12 {
            // subjects vary, objects cycle over 4 values, times cycle over 6
            lines.push_str(&format!("{}\t0\t{}\t{}\n", i + 10, i % 4, i % 6));
        }
        b.add_split(Split::Train, Cursor::new(lines), "toy").unwrap();
        let store = b.build().unwrap();

        let got = store.semantic_actions(0, 100, 4);
        // Brute-force oracle over the raw facts.
        let mut pairs: Vec<(EntityId, TimeStep)> =
            (0..12u32).map(|i| (i % 4, i % 6)).collect();
        pairs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        pairs.dedup();
        let expect: Vec<Action> = pairs
            .into_iter()
            .take(4)
            .map(|(entity, time)| Action { relation: 0, entity, time })
            .collect();
        assert_eq!(got, expect);

        assert!(store.semantic_actions(1, 100, 4).is_empty(), "relation 1 has no history");
    }

    #[test]
    fn is_seen_tracks_training_facts_only() {
        let mut b = KgBuilder::new(1).unwrap();
        b.add_split(Split::Train, Cursor::new("0\t0\t1\t0\n"), "train").unwrap();
        b.add_split(Split::Test, Cursor::new("9\t0\t1\t5\n"), "test").unwrap();
        let store = b.build().unwrap();
        // Scan oracle over train facts.
        for e in 0..store.entity_count() as EntityId {
            let in_train = store
                .facts()
                .iter()
                .any(|q| q.subject == e || q.object == e);
            assert_eq!(store.is_seen(e), in_train, "entity {e}");
        }
        assert!(!store.is_seen(9));
        assert_eq!(store.unseen_test_stats().unseen_entities, 1);
    }

    #[test]
    fn empty_train_split_is_an_error() {
        let b = KgBuilder::new(1).unwrap();
        assert!(matches!(b.build(), Err(Error::EmptyTrainSplit)));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let mut b = KgBuilder::new(1).unwrap();
        let err = b
            .add_split(Split::Train, Cursor::new("0\t0\t1\t0\n0\t0\tx\t1\n"), "bad.txt")
            .unwrap_err();
        match err {
            Error::Parse { source_name, line, .. } => {
                assert_eq!(source_name, "bad.txt");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn declared_vocabulary_is_enforced() {
        let mut b = KgBuilder::new(1).unwrap();
        b.add_split(Split::Train, Cursor::new("0\t0\t7\t0\n"), "toy").unwrap();
        let err = b
            .manifest(Manifest { entity_count: Some(4), ..Default::default() })
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::IdOutOfBounds { kind: "entity", id: 7, declared: 4 }));
    }

    #[test]
    fn times_are_divided_and_rebased() {
        let mut b = KgBuilder::new(24).unwrap();
        // Hours 48, 72, 120 -> days 2, 3, 5 -> re-based 0, 1, 3.
        b.add_split(
            Split::Train,
            Cursor::new("0\t0\t1\t48\n1\t0\t2\t72\n2\t0\t0\t120\n"),
            "toy",
        )
        .unwrap();
        let store = b.build().unwrap();
        let mut times: Vec<TimeStep> = store.facts().iter().map(|q| q.time).collect();
        times.sort_unstable();
        times.dedup();
        assert_eq!(times, vec![0, 1, 3]);
        assert_eq!(store.max_train_time(), 3);
    }

    #[test]
    fn manifest_mismatch_is_an_error() {
        let mut b = KgBuilder::new(1).unwrap();
        b.add_split(Split::Train, Cursor::new("0\t0\t1\t0\n"), "toy").unwrap();
        let err = b
            .manifest(Manifest { train: Some(5), ..Default::default() })
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::ManifestMismatch { key: "train", declared: 5, actual: 1 }));
    }

    #[test]
    fn bundle_round_trip_is_byte_identical() {
        let store = toy_store();
        let mut bytes = Vec::new();
        store.save_bundle(&mut bytes).unwrap();
        let reloaded = TemporalKG::load_bundle(Cursor::new(&bytes)).unwrap();
        assert_eq!(reloaded, store);
        let mut bytes2 = Vec::new();
        reloaded.save_bundle(&mut bytes2).unwrap();
        assert_eq!(bytes, bytes2);
    }

    #[test]
    fn truncation_is_a_prefix_of_larger_budgets() {
        let store = toy_store();
        for e in 0..3 {
            for n in 1..5 {
                let small = store.temporal_actions(e, 10, n);
                let large = store.temporal_actions(e, 10, n + 1);
                assert_eq!(small.as_slice(), &large[..small.len().min(large.len())]);
            }
        }
    }
}
