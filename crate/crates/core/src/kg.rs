//! Vocabulary interning, triple storage, and snapshot bookkeeping for
//! growing knowledge graphs.
//!
//! A growing KG is an ordered sequence of snapshots. Each snapshot owns the
//! facts that are new relative to its predecessor (its delta set, split into
//! train/valid/test), while entity and relation vocabularies are cumulative
//! and monotone: a handle assigned in snapshot `i` denotes the same item in
//! every later snapshot. Handles are dense integers assigned in first-seen
//! order, which keeps embedding tables append-only across snapshots.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version tag written into `meta.json`.
pub const DATASET_FORMAT_VERSION: u32 = 1;

/// Dense handle for an entity, assigned in first-seen order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

/// Dense handle for a relation, assigned in first-seen order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A (subject, relation, object) triple over interned handles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fact {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
}

impl Fact {
    pub fn new(subject: EntityId, relation: RelationId, object: EntityId) -> Self {
        Fact {
            subject,
            relation,
            object,
        }
    }
}

/// Bidirectional handle <-> name maps for entities and relations.
///
/// Interning is append-only: a name is assigned the next dense handle the
/// first time it is seen and keeps it forever.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    entity_names: Vec<String>,
    relation_names: Vec<String>,
    entity_index: HashMap<String, EntityId>,
    relation_index: HashMap<String, RelationId>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern_entity(&mut self, name: &str) -> EntityId {
        if let Some(&id) = self.entity_index.get(name) {
            return id;
        }
        let id = EntityId(self.entity_names.len() as u32);
        self.entity_names.push(name.to_owned());
        self.entity_index.insert(name.to_owned(), id);
        id
    }

    pub fn intern_relation(&mut self, name: &str) -> RelationId {
        if let Some(&id) = self.relation_index.get(name) {
            return id;
        }
        let id = RelationId(self.relation_names.len() as u32);
        self.relation_names.push(name.to_owned());
        self.relation_index.insert(name.to_owned(), id);
        id
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entity_index.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_index.get(name).copied()
    }

    pub fn entity_name(&self, id: EntityId) -> Option<&str> {
        self.entity_names.get(id.index()).map(String::as_str)
    }

    pub fn relation_name(&self, id: RelationId) -> Option<&str> {
        self.relation_names.get(id.index()).map(String::as_str)
    }

    pub fn num_entities(&self) -> usize {
        self.entity_names.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relation_names.len()
    }
}

/// One stage of a growing KG: the delta facts split into train/valid/test,
/// plus the cumulative vocabulary sizes at this stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    /// 1-based position in the snapshot sequence.
    pub index: usize,
    pub train: Vec<Fact>,
    pub valid: Vec<Fact>,
    pub test: Vec<Fact>,
    /// Cumulative entity count after this snapshot's growth step.
    pub num_entities: usize,
    /// Cumulative relation count after this snapshot's growth step.
    pub num_relations: usize,
}

impl Snapshot {
    /// Number of facts new to this snapshot (train + valid + test).
    pub fn delta_size(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }

    /// All facts of the delta set, across splits.
    pub fn iter_all(&self) -> impl Iterator<Item = &Fact> {
        self.train
            .iter()
            .chain(self.valid.iter())
            .chain(self.test.iter())
    }
}

/// Construction parameters echoed into `meta.json` so a dataset directory is
/// self-describing and reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuilderMeta {
    pub variant: String,
    pub seed: u64,
    pub num_snapshots: usize,
    pub split_ratio: [u64; 3],
    pub seed_facts: usize,
    pub hybrid_stop_numerator: u64,
    pub closure_on_quota: bool,
    /// Name of the seedable generator used, e.g. "chacha12".
    pub rng: String,
    /// Distinct facts in the source triple file.
    pub source_facts: usize,
    /// Duplicate source lines dropped at load time.
    pub duplicates_dropped: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DatasetMeta {
    format_version: u32,
    snapshot_count: usize,
    num_entities: Vec<usize>,
    num_relations: Vec<usize>,
    #[serde(default)]
    builder: Option<BuilderMeta>,
}

/// An ordered snapshot sequence with monotone cumulative vocabularies.
///
/// Immutable after construction; safe to share across evaluation workers.
#[derive(Debug, Clone)]
pub struct GrowthDataset {
    snapshots: Vec<Snapshot>,
    vocab: Vocabulary,
    builder: Option<BuilderMeta>,
}

impl GrowthDataset {
    /// Assembles a dataset and checks every structural invariant.
    pub fn new(
        snapshots: Vec<Snapshot>,
        vocab: Vocabulary,
        builder: Option<BuilderMeta>,
    ) -> Result<Self> {
        let ds = GrowthDataset {
            snapshots,
            vocab,
            builder,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn num_snapshots(&self) -> usize {
        self.snapshots.len()
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn builder_meta(&self) -> Option<&BuilderMeta> {
        self.builder.as_ref()
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    /// Snapshot accessor by 1-based index.
    pub fn snapshot(&self, i: usize) -> Result<&Snapshot> {
        if i == 0 || i > self.snapshots.len() {
            return Err(Error::OutOfRange(format!(
                "snapshot {i} of {}",
                self.snapshots.len()
            )));
        }
        Ok(&self.snapshots[i - 1])
    }

    /// Delta fact count plus cumulative vocabulary sizes for snapshot `i`.
    pub fn delta_stats(&self, i: usize) -> Result<(usize, usize, usize)> {
        let snap = self.snapshot(i)?;
        Ok((snap.delta_size(), snap.num_entities, snap.num_relations))
    }

    /// Training facts of snapshots `1..=i` concatenated, for re-training.
    pub fn train_through(&self, i: usize) -> Result<Vec<Fact>> {
        self.snapshot(i)?;
        Ok(self.snapshots[..i]
            .iter()
            .flat_map(|s| s.train.iter().copied())
            .collect())
    }

    /// All known-true facts of snapshots `1..=i` across every split.
    pub fn known_through(&self, i: usize) -> Result<Vec<Fact>> {
        self.snapshot(i)?;
        Ok(self.snapshots[..i]
            .iter()
            .flat_map(|s| s.iter_all().copied())
            .collect())
    }

    fn validate(&self) -> Result<()> {
        if self.snapshots.is_empty() {
            return Err(Error::InvalidDataset("no snapshots".into()));
        }
        let mut seen = HashSet::new();
        let mut prev_e = 0usize;
        let mut prev_r = 0usize;
        for (pos, snap) in self.snapshots.iter().enumerate() {
            if snap.index != pos + 1 {
                return Err(Error::InvalidDataset(format!(
                    "snapshot at position {} has index {}, expected {}",
                    pos,
                    snap.index,
                    pos + 1
                )));
            }
            if snap.num_entities < prev_e || snap.num_relations < prev_r {
                return Err(Error::InvalidDataset(format!(
                    "vocabulary shrank at snapshot {}",
                    snap.index
                )));
            }
            for fact in snap.iter_all() {
                if fact.subject.index() >= snap.num_entities
                    || fact.object.index() >= snap.num_entities
                    || fact.relation.index() >= snap.num_relations
                {
                    return Err(Error::InvalidDataset(format!(
                        "fact ({}, {}, {}) references handles beyond snapshot {} vocabulary",
                        fact.subject, fact.relation, fact.object, snap.index
                    )));
                }
                if !seen.insert(*fact) {
                    return Err(Error::InvalidDataset(format!(
                        "fact ({}, {}, {}) appears in more than one split or snapshot",
                        fact.subject, fact.relation, fact.object
                    )));
                }
            }
            prev_e = snap.num_entities;
            prev_r = snap.num_relations;
        }
        let last = self.snapshots.last().unwrap();
        if last.num_entities > self.vocab.num_entities()
            || last.num_relations > self.vocab.num_relations()
        {
            return Err(Error::InvalidDataset(
                "cumulative counts exceed vocabulary size".into(),
            ));
        }
        Ok(())
    }

    /// Writes the on-disk layout:
    ///
    /// ```text
    /// <dir>/meta.json
    /// <dir>/entities.tsv            handle \t name
    /// <dir>/relations.tsv           handle \t name
    /// <dir>/snapshot<i>/train.tsv   subject \t relation \t object (handles)
    /// <dir>/snapshot<i>/valid.tsv
    /// <dir>/snapshot<i>/test.tsv
    /// ```
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = DatasetMeta {
            format_version: DATASET_FORMAT_VERSION,
            snapshot_count: self.snapshots.len(),
            num_entities: self.snapshots.iter().map(|s| s.num_entities).collect(),
            num_relations: self.snapshots.iter().map(|s| s.num_relations).collect(),
            builder: self.builder.clone(),
        };
        let meta_path = dir.join("meta.json");
        let meta_json =
            serde_json::to_string_pretty(&meta).map_err(|e| Error::Checkpoint(e.to_string()))?;
        fs::write(&meta_path, meta_json + "\n").map_err(|e| Error::io(&meta_path, e))?;

        write_name_table(&dir.join("entities.tsv"), &self.vocab.entity_names)?;
        write_name_table(&dir.join("relations.tsv"), &self.vocab.relation_names)?;

        for snap in &self.snapshots {
            let snap_dir = dir.join(format!("snapshot{}", snap.index));
            fs::create_dir_all(&snap_dir).map_err(|e| Error::io(&snap_dir, e))?;
            write_fact_table(&snap_dir.join("train.tsv"), &snap.train)?;
            write_fact_table(&snap_dir.join("valid.tsv"), &snap.valid)?;
            write_fact_table(&snap_dir.join("test.tsv"), &snap.test)?;
        }
        Ok(())
    }

    /// Reads a dataset directory written by [`GrowthDataset::save`] and
    /// re-validates every invariant.
    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("meta.json");
        let meta_raw = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: DatasetMeta = serde_json::from_str(&meta_raw).map_err(|e| Error::Parse {
            path: meta_path.clone(),
            line: 0,
            msg: e.to_string(),
        })?;
        if meta.format_version != DATASET_FORMAT_VERSION {
            return Err(Error::InvalidDataset(format!(
                "unsupported dataset format_version {}",
                meta.format_version
            )));
        }

        let mut vocab = Vocabulary::new();
        for name in read_name_table(&dir.join("entities.tsv"))? {
            vocab.intern_entity(&name);
        }
        for name in read_name_table(&dir.join("relations.tsv"))? {
            vocab.intern_relation(&name);
        }

        let mut snapshots = Vec::with_capacity(meta.snapshot_count);
        for i in 1..=meta.snapshot_count {
            let snap_dir = dir.join(format!("snapshot{i}"));
            snapshots.push(Snapshot {
                index: i,
                train: read_fact_table(&snap_dir.join("train.tsv"))?,
                valid: read_fact_table(&snap_dir.join("valid.tsv"))?,
                test: read_fact_table(&snap_dir.join("test.tsv"))?,
                num_entities: meta.num_entities.get(i - 1).copied().ok_or_else(|| {
                    Error::InvalidDataset("meta.json num_entities too short".into())
                })?,
                num_relations: meta.num_relations.get(i - 1).copied().ok_or_else(|| {
                    Error::InvalidDataset("meta.json num_relations too short".into())
                })?,
            });
        }
        GrowthDataset::new(snapshots, vocab, meta.builder)
    }
}

/// Parses a UTF-8 triple file with one tab-separated
/// `subject \t relation \t object` per non-empty line, interning names into
/// `vocab` in first-seen order.
///
/// Duplicate triples are dropped (the fact set is a set); the drop count is
/// reported through a warning.
pub fn load_triples(path: &Path, vocab: &mut Vocabulary) -> Result<Vec<Fact>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut facts = Vec::new();
    let mut seen = HashSet::new();
    let mut duplicates = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (s, r, o) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(s), Some(r), Some(o), None) => (s, r, o),
            _ => {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: lineno + 1,
                    msg: "expected exactly 3 tab-separated fields".into(),
                })
            }
        };
        let fact = Fact {
            subject: vocab.intern_entity(s),
            relation: vocab.intern_relation(r),
            object: vocab.intern_entity(o),
        };
        if seen.insert(fact) {
            facts.push(fact);
        } else {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        log::warn!("{}: dropped {duplicates} duplicate triples", path.display());
    }
    Ok(facts)
}

fn write_name_table(path: &Path, names: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for (i, name) in names.iter().enumerate() {
        if name.contains('\t') || name.contains('\n') {
            return Err(Error::InvalidDataset(format!(
                "name {name:?} contains a tab or newline and cannot be serialized"
            )));
        }
        writeln!(w, "{i}\t{name}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_name_table(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut names = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let (handle, name) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: path.to_owned(),
            line: lineno + 1,
            msg: "expected handle \\t name".into(),
        })?;
        let handle: usize = handle.parse().map_err(|_| Error::Parse {
            path: path.to_owned(),
            line: lineno + 1,
            msg: format!("invalid handle {handle:?}"),
        })?;
        if handle != names.len() {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: lineno + 1,
                msg: format!("handle {handle} out of order, expected {}", names.len()),
            });
        }
        names.push(name.to_owned());
    }
    Ok(names)
}

fn write_fact_table(path: &Path, facts: &[Fact]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for f in facts {
        writeln!(w, "{}\t{}\t{}", f.subject, f.relation, f.object)
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_fact_table(path: &Path) -> Result<Vec<Fact>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut facts = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let parse = |s: &str| -> Result<u32> {
            s.parse().map_err(|_| Error::Parse {
                path: path.to_owned(),
                line: lineno + 1,
                msg: format!("invalid handle {s:?}"),
            })
        };
        let mut fields = line.split('\t');
        match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(s), Some(r), Some(o), None) => facts.push(Fact {
                subject: EntityId(parse(s)?),
                relation: RelationId(parse(r)?),
                object: EntityId(parse(o)?),
            }),
            _ => {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: lineno + 1,
                    msg: "expected exactly 3 tab-separated handles".into(),
                })
            }
        }
    }
    Ok(facts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;
    use std::path::PathBuf;

    fn tmpfile(contents: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("triples.tsv");
        let mut f = File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        (dir, path)
    }

    #[test]
    fn interning_is_first_seen_order() {
        let (_d, path) = tmpfile("a\tr\tb\nb\tr\tc\n");
        let mut vocab = Vocabulary::new();
        let facts = load_triples(&path, &mut vocab).unwrap();
        assert_eq!(
            facts,
            vec![
                Fact::new(EntityId(0), RelationId(0), EntityId(1)),
                Fact::new(EntityId(1), RelationId(0), EntityId(2)),
            ]
        );
        assert_eq!(vocab.num_entities(), 3);
        assert_eq!(vocab.num_relations(), 1);
        assert_eq!(vocab.entity_name(EntityId(0)), Some("a"));
    }

    #[test]
    fn empty_file_loads_nothing() {
        let (_d, path) = tmpfile("");
        let mut vocab = Vocabulary::new();
        let facts = load_triples(&path, &mut vocab).unwrap();
        assert!(facts.is_empty());
        assert_eq!(vocab.num_entities(), 0);
        assert_eq!(vocab.num_relations(), 0);
    }

    #[test]
    fn short_line_is_a_parse_error_with_line_number() {
        let (_d, path) = tmpfile("a\tr\n");
        let mut vocab = Vocabulary::new();
        match load_triples(&path, &mut vocab) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn long_line_is_a_parse_error() {
        let (_d, path) = tmpfile("a\tr\tb\na\tr\tb\tc\n");
        let mut vocab = Vocabulary::new();
        match load_triples(&path, &mut vocab) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_triples_are_dropped() {
        let (_d, path) = tmpfile("a\tr\tb\na\tr\tb\nb\tr\ta\n");
        let mut vocab = Vocabulary::new();
        let facts = load_triples(&path, &mut vocab).unwrap();
        assert_eq!(facts.len(), 2);
    }

    #[test]
    fn self_loops_are_permitted() {
        let (_d, path) = tmpfile("a\tr\ta\n");
        let mut vocab = Vocabulary::new();
        let facts = load_triples(&path, &mut vocab).unwrap();
        assert_eq!(facts[0].subject, facts[0].object);
    }

    fn two_snapshot_dataset() -> GrowthDataset {
        let mut vocab = Vocabulary::new();
        for name in ["a", "b", "c", "d"] {
            vocab.intern_entity(name);
        }
        vocab.intern_relation("r");
        let f = |s: u32, o: u32| Fact::new(EntityId(s), RelationId(0), EntityId(o));
        let snapshots = vec![
            Snapshot {
                index: 1,
                train: vec![f(0, 1), f(1, 2)],
                valid: vec![f(0, 2)],
                test: vec![f(2, 0)],
                num_entities: 3,
                num_relations: 1,
            },
            Snapshot {
                index: 2,
                train: vec![f(2, 3)],
                valid: vec![],
                test: vec![f(3, 0)],
                num_entities: 4,
                num_relations: 1,
            },
        ];
        GrowthDataset::new(snapshots, vocab, None).unwrap()
    }

    #[test]
    fn delta_stats_reports_delta_and_cumulative_sizes() {
        let ds = two_snapshot_dataset();
        assert_eq!(ds.delta_stats(1).unwrap(), (4, 3, 1));
        assert_eq!(ds.delta_stats(2).unwrap(), (2, 4, 1));
        assert!(matches!(ds.delta_stats(0), Err(Error::OutOfRange(_))));
        assert!(matches!(ds.delta_stats(3), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn empty_delta_keeps_cumulative_sizes() {
        let mut ds = two_snapshot_dataset();
        ds.snapshots.push(Snapshot {
            index: 3,
            train: vec![],
            valid: vec![],
            test: vec![],
            num_entities: 4,
            num_relations: 1,
        });
        ds.validate().unwrap();
        assert_eq!(ds.delta_stats(3).unwrap(), (0, 4, 1));
    }

    #[test]
    fn validation_rejects_duplicate_facts_across_snapshots() {
        let mut ds = two_snapshot_dataset();
        let dup = ds.snapshots[0].train[0];
        ds.snapshots[1].train.push(dup);
        assert!(ds.validate().is_err());
    }

    #[test]
    fn validation_rejects_out_of_vocab_handles() {
        let mut ds = two_snapshot_dataset();
        ds.snapshots[0]
            .train
            .push(Fact::new(EntityId(3), RelationId(0), EntityId(0)));
        assert!(ds.validate().is_err());
    }

    #[test]
    fn validation_rejects_shrinking_vocabulary() {
        let mut ds = two_snapshot_dataset();
        ds.snapshots[1].num_entities = 2;
        assert!(ds.validate().is_err());
    }

    #[test]
    fn save_load_round_trip_is_identical() {
        let ds = two_snapshot_dataset();
        let dir = tempfile::tempdir().unwrap();
        ds.save(dir.path()).unwrap();
        let reloaded = GrowthDataset::load(dir.path()).unwrap();
        assert_eq!(reloaded.num_snapshots(), ds.num_snapshots());
        for i in 1..=ds.num_snapshots() {
            assert_eq!(reloaded.snapshot(i).unwrap(), ds.snapshot(i).unwrap());
        }
        assert_eq!(reloaded.vocab().num_entities(), ds.vocab().num_entities());
        assert_eq!(reloaded.vocab().entity_name(EntityId(2)), Some("c"));
    }

    #[test]
    fn train_through_accumulates_training_splits() {
        let ds = two_snapshot_dataset();
        assert_eq!(ds.train_through(1).unwrap().len(), 2);
        assert_eq!(ds.train_through(2).unwrap().len(), 3);
        assert_eq!(ds.known_through(2).unwrap().len(), 6);
    }
}
