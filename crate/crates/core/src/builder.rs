//! Growth-dataset construction: turns one base triple set into an ordered
//! snapshot sequence under entity-, relation-, fact-, or hybrid-centric
//! growth.
//!
//! All variants share three stages. Seeding samples a handful of facts to
//! start the graph. Expansion grows the included set one iteration at a
//! time until a per-snapshot stopping rule fires: the centric variants
//! sample facts adjacent to the seen entity set and seal a snapshot when
//! the variant's cumulative quota `i/n` is reached, while the hybrid
//! variant draws entities, relations, and facts from one shared pool and
//! seals with a fixed per-iteration probability. Dividing splits each
//! snapshot's delta set into train/valid/test. The last snapshot always
//! absorbs the whole base KG.
//!
//! Construction is deterministic: the same (base file, config, seed)
//! produces a byte-identical dataset directory.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{self, BuilderMeta, Fact, GrowthDataset, Snapshot, Vocabulary};

/// Which aspect of KG growth a dataset simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Entity,
    Relation,
    Fact,
    Hybrid,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Entity => "entity",
            Variant::Relation => "relation",
            Variant::Fact => "fact",
            Variant::Hybrid => "hybrid",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entity" => Ok(Variant::Entity),
            "relation" => Ok(Variant::Relation),
            "fact" => Ok(Variant::Fact),
            "hybrid" => Ok(Variant::Hybrid),
            other => Err(Error::Config(format!(
                "unknown variant {other:?}, expected entity|relation|fact|hybrid"
            ))),
        }
    }
}

/// Parameters of the snapshot construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuilderConfig {
    pub variant: Variant,
    pub num_snapshots: usize,
    pub seed: u64,
    /// train : valid : test proportions.
    pub split_ratio: [u64; 3],
    /// Facts sampled in the seeding stage.
    pub seed_facts: usize,
    /// Numerator of the hybrid per-iteration stop probability
    /// `numerator / (|E| + |R| + |T|)`.
    pub hybrid_stop_numerator: u64,
    /// When set, the relation and fact variants also add the closure of
    /// facts with both endpoints seen after reaching a quota. The entity
    /// variant always applies the closure; for the others it is an
    /// interpretation toggle, off by default.
    pub closure_on_quota: bool,
}

impl BuilderConfig {
    pub fn new(variant: Variant, seed: u64) -> Self {
        BuilderConfig {
            variant,
            num_snapshots: 5,
            seed,
            split_ratio: [3, 1, 1],
            seed_facts: 10,
            hybrid_stop_numerator: 5,
            closure_on_quota: false,
        }
    }

    fn validate(&self, base_len: usize) -> Result<()> {
        if self.num_snapshots < 2 {
            return Err(Error::Config("num_snapshots must be at least 2".into()));
        }
        if self.split_ratio.iter().any(|&r| r == 0) {
            return Err(Error::Config("split_ratio components must be positive".into()));
        }
        if self.seed_facts == 0 {
            return Err(Error::Config("seed_facts must be at least 1".into()));
        }
        if base_len < self.seed_facts {
            return Err(Error::Config(format!(
                "base KG has {base_len} facts, fewer than seed_facts={}",
                self.seed_facts
            )));
        }
        Ok(())
    }
}

/// Builds a growth dataset from a triple file on disk.
pub fn build_from_file(path: &Path, cfg: &BuilderConfig) -> Result<GrowthDataset> {
    let mut vocab = Vocabulary::new();
    let facts = kg::load_triples(path, &mut vocab)?;
    build_dataset(&facts, &vocab, cfg)
}

/// Builds a growth dataset from an in-memory base fact set.
///
/// `base` must be duplicate-free (as produced by [`kg::load_triples`]).
/// Output handles are reassigned in construction order, so they generally
/// differ from the handles in `base_vocab`.
pub fn build_dataset(
    base: &[Fact],
    base_vocab: &Vocabulary,
    cfg: &BuilderConfig,
) -> Result<GrowthDataset> {
    cfg.validate(base.len())?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut b = Builder::new(base, base_vocab, cfg);
    b.seed_phase(&mut rng)?;
    match cfg.variant {
        Variant::Hybrid => b.expand_hybrid(&mut rng)?,
        _ => b.expand_centric(&mut rng)?,
    }
    b.divide(&mut rng)
}

const UNASSIGNED: u32 = u32::MAX;

struct Builder<'a> {
    base: &'a [Fact],
    base_vocab: &'a Vocabulary,
    cfg: &'a BuilderConfig,
    // Output handle per base handle, assigned in construction order.
    ent_handle: Vec<u32>,
    rel_handle: Vec<u32>,
    // Base handles in assignment order (defines the output vocabulary).
    ent_order: Vec<u32>,
    rel_order: Vec<u32>,
    included: Vec<bool>,
    included_count: usize,
    // Base fact indices per sealed snapshot, in inclusion order.
    deltas: Vec<Vec<usize>>,
    snap_num_entities: Vec<usize>,
    snap_num_relations: Vec<usize>,
    // Entity -> incident base fact indices.
    incidence: Vec<Vec<u32>>,
}

impl<'a> Builder<'a> {
    fn new(base: &'a [Fact], base_vocab: &'a Vocabulary, cfg: &'a BuilderConfig) -> Self {
        let ne = base_vocab.num_entities();
        let nr = base_vocab.num_relations();
        let mut incidence = vec![Vec::new(); ne];
        for (idx, f) in base.iter().enumerate() {
            incidence[f.subject.index()].push(idx as u32);
            if f.object != f.subject {
                incidence[f.object.index()].push(idx as u32);
            }
        }
        Builder {
            base,
            base_vocab,
            cfg,
            ent_handle: vec![UNASSIGNED; ne],
            rel_handle: vec![UNASSIGNED; nr],
            ent_order: Vec::with_capacity(ne),
            rel_order: Vec::with_capacity(nr),
            included: vec![false; base.len()],
            included_count: 0,
            deltas: Vec::with_capacity(cfg.num_snapshots),
            snap_num_entities: Vec::with_capacity(cfg.num_snapshots),
            snap_num_relations: Vec::with_capacity(cfg.num_snapshots),
            incidence,
        }
    }

    fn see_entity(&mut self, e: u32) -> bool {
        if self.ent_handle[e as usize] == UNASSIGNED {
            self.ent_handle[e as usize] = self.ent_order.len() as u32;
            self.ent_order.push(e);
            true
        } else {
            false
        }
    }

    fn see_relation(&mut self, r: u32) -> bool {
        if self.rel_handle[r as usize] == UNASSIGNED {
            self.rel_handle[r as usize] = self.rel_order.len() as u32;
            self.rel_order.push(r);
            true
        } else {
            false
        }
    }

    fn include(&mut self, idx: usize, delta: &mut Vec<usize>) {
        debug_assert!(!self.included[idx]);
        self.included[idx] = true;
        self.included_count += 1;
        let f = self.base[idx];
        self.see_entity(f.subject.0);
        self.see_relation(f.relation.0);
        self.see_entity(f.object.0);
        delta.push(idx);
    }

    fn seal(&mut self, delta: Vec<usize>) {
        self.deltas.push(delta);
        self.snap_num_entities.push(self.ent_order.len());
        self.snap_num_relations.push(self.rel_order.len());
    }

    /// Stage 1: sample `seed_facts` distinct facts uniformly without
    /// replacement; their endpoints and relations form the initial
    /// vocabulary. The sampled facts open snapshot 1's delta set.
    fn seed_phase(&mut self, rng: &mut ChaCha12Rng) -> Result<Vec<usize>> {
        let picks = rand::seq::index::sample(rng, self.base.len(), self.cfg.seed_facts);
        let mut delta = Vec::with_capacity(self.cfg.seed_facts);
        for idx in picks.iter() {
            self.include(idx, &mut delta);
        }
        Ok(delta)
    }

    fn quota_met(&self, snapshot: usize) -> bool {
        let n = self.cfg.num_snapshots as u64;
        let i = snapshot as u64;
        let (have, total) = match self.cfg.variant {
            Variant::Entity => (self.ent_order.len(), self.base_vocab.num_entities()),
            Variant::Relation => (self.rel_order.len(), self.base_vocab.num_relations()),
            Variant::Fact => (self.included_count, self.base.len()),
            Variant::Hybrid => unreachable!("hybrid has no quota"),
        };
        have as u64 * n >= i * total as u64
    }

    /// Adds every not-yet-included base fact whose two endpoints are both
    /// seen. Runs when a snapshot reaches its quota.
    fn add_closure(&mut self, delta: &mut Vec<usize>) {
        for idx in 0..self.base.len() {
            if self.included[idx] {
                continue;
            }
            let f = self.base[idx];
            if self.ent_handle[f.subject.index()] != UNASSIGNED
                && self.ent_handle[f.object.index()] != UNASSIGNED
            {
                self.include(idx, delta);
            }
        }
    }

    /// Stage 2 for the entity/relation/fact variants: repeatedly sample a
    /// not-yet-included fact with at least one seen endpoint, sealing
    /// snapshot `i` once the cumulative quota `i/n` of the variant's
    /// universe is reached. The final snapshot absorbs the whole base KG.
    fn expand_centric(&mut self, rng: &mut ChaCha12Rng) -> Result<()> {
        // Frontier of candidate fact indices; lazily cleaned. A fact enters
        // once, when its first endpoint becomes seen.
        let mut eligible: Vec<u32> = Vec::new();
        let mut queued = vec![false; self.base.len()];
        let mut enqueue_incident = |builder: &Builder, queued: &mut Vec<bool>, eligible: &mut Vec<u32>, e: u32| {
            for &idx in &builder.incidence[e as usize] {
                if !queued[idx as usize] && !builder.included[idx as usize] {
                    queued[idx as usize] = true;
                    eligible.push(idx);
                }
            }
        };
        for &e in &self.ent_order {
            enqueue_incident(self, &mut queued, &mut eligible, e);
        }

        let apply_closure = matches!(self.cfg.variant, Variant::Entity) || self.cfg.closure_on_quota;

        let mut delta = std::mem::take(&mut self.deltas).into_iter().next().unwrap_or_default();
        // The seed facts belong to snapshot 1; seed_phase left them pending.
        debug_assert!(delta.is_empty());
        delta = self.pending_seed_delta.take().unwrap_or(delta);

        for i in 1..self.cfg.num_snapshots {
            loop {
                if self.quota_met(i) {
                    if apply_closure {
                        let before = self.ent_order.len();
                        self.add_closure(&mut delta);
                        debug_assert_eq!(before, self.ent_order.len());
                    }
                    self.seal(std::mem::take(&mut delta));
                    break;
                }
                // Draw uniformly among still-valid frontier entries.
                let idx = loop {
                    if eligible.is_empty() {
                        let remaining = self.base.len() - self.included_count;
                        return Err(Error::BuilderDeadlock(format!(
                            "snapshot {i} quota unmet but no fact touches the seen \
                             entity set; {remaining} facts form a disconnected remainder"
                        )));
                    }
                    let pos = rng.random_range(0..eligible.len());
                    let idx = eligible.swap_remove(pos) as usize;
                    if !self.included[idx] {
                        break idx;
                    }
                };
                let f = self.base[idx];
                self.include(idx, &mut delta);
                for e in [f.subject.0, f.object.0] {
                    enqueue_incident(self, &mut queued, &mut eligible, e);
                }
            }
        }

        // Last snapshot: the whole KG.
        let mut last = Vec::new();
        for idx in 0..self.base.len() {
            if !self.included[idx] {
                self.include(idx, &mut last);
            }
        }
        self.seal(last);
        Ok(())
    }

    /// Stage 2 for the hybrid variant: draw entities, relations, and facts
    /// uniformly without replacement from one shared pool. A drawn fact
    /// joins the snapshot only if all its components are already seen;
    /// otherwise it is returned to the pool and an admissible replacement
    /// is drawn instead. After every iteration the snapshot seals with
    /// probability `hybrid_stop_numerator / (|E|+|R|+|T|)`.
    fn expand_hybrid(&mut self, rng: &mut ChaCha12Rng) -> Result<()> {
        let ne = self.base_vocab.num_entities();
        let nr = self.base_vocab.num_relations();
        let universe = ne + nr + self.base.len();
        let stop_p = (self.cfg.hybrid_stop_numerator as f64 / universe as f64).min(1.0);

        #[derive(Clone, Copy)]
        enum Item {
            Entity(u32),
            Relation(u32),
            Fact(u32),
        }

        // Unseen components per fact; a fact is admissible at zero.
        let mut missing = vec![0u8; self.base.len()];
        for (idx, f) in self.base.iter().enumerate() {
            let mut m = 0u8;
            if self.ent_handle[f.subject.index()] == UNASSIGNED {
                m += 1;
            }
            if self.rel_handle[f.relation.index()] == UNASSIGNED {
                m += 1;
            }
            if f.object != f.subject && self.ent_handle[f.object.index()] == UNASSIGNED {
                m += 1;
            }
            missing[idx] = m;
        }

        let mut pool: Vec<Item> = Vec::with_capacity(universe);
        let mut fact_pos = vec![u32::MAX; self.base.len()];
        for e in 0..ne as u32 {
            if self.ent_handle[e as usize] == UNASSIGNED {
                pool.push(Item::Entity(e));
            }
        }
        for r in 0..nr as u32 {
            if self.rel_handle[r as usize] == UNASSIGNED {
                pool.push(Item::Relation(r));
            }
        }
        let mut non_fact_in_pool = pool.len();
        for idx in 0..self.base.len() {
            if !self.included[idx] {
                fact_pos[idx] = pool.len() as u32;
                pool.push(Item::Fact(idx as u32));
            }
        }

        // Admissible, not-yet-included facts; lazily cleaned.
        let mut admissible: Vec<u32> = Vec::new();
        for idx in 0..self.base.len() {
            if !self.included[idx] && missing[idx] == 0 {
                admissible.push(idx as u32);
            }
        }

        let mut deferred = vec![false; self.base.len()];
        let mut deferred_draws = 0usize;

        let mut delta = self.pending_seed_delta.take().unwrap_or_default();

        let mut remove_at = |pool: &mut Vec<Item>, fact_pos: &mut Vec<u32>, pos: usize| -> Item {
            let item = pool.swap_remove(pos);
            if let Item::Fact(k) = item {
                fact_pos[k as usize] = u32::MAX;
            }
            if pos < pool.len() {
                if let Item::Fact(moved) = pool[pos] {
                    fact_pos[moved as usize] = pos as u32;
                }
            }
            item
        };

        // Marks a component seen and promotes facts that become admissible.
        macro_rules! unlock {
            ($self:ident, $missing:ident, $admissible:ident, $see:ident, $x:expr) => {
                if $self.$see($x) {
                    for &idx in &$self.incidence_for_unlock($x, stringify!($see)) {
                        let m = &mut $missing[idx as usize];
                        debug_assert!(*m > 0);
                        *m -= 1;
                        if *m == 0 && !$self.included[idx as usize] {
                            $admissible.push(idx);
                        }
                    }
                }
            };
        }
        let _ = &unlock; // silence: macro defined for clarity below

        for i in 1..self.cfg.num_snapshots {
            loop {
                if pool.is_empty() {
                    break;
                }
                let pos = rng.random_range(0..pool.len());
                match pool[pos] {
                    Item::Entity(e) => {
                        remove_at(&mut pool, &mut fact_pos, pos);
                        non_fact_in_pool -= 1;
                        self.see_entity(e);
                        for k in 0..self.incidence[e as usize].len() {
                            let idx = self.incidence[e as usize][k] as usize;
                            missing[idx] -= 1;
                            if missing[idx] == 0 && !self.included[idx] {
                                admissible.push(idx as u32);
                            }
                        }
                    }
                    Item::Relation(r) => {
                        remove_at(&mut pool, &mut fact_pos, pos);
                        non_fact_in_pool -= 1;
                        self.see_relation(r);
                        for idx in 0..self.base.len() {
                            if self.base[idx].relation.0 == r {
                                missing[idx] -= 1;
                                if missing[idx] == 0 && !self.included[idx] {
                                    admissible.push(idx as u32);
                                }
                            }
                        }
                    }
                    Item::Fact(idx) => {
                        let idx = idx as usize;
                        if missing[idx] == 0 {
                            remove_at(&mut pool, &mut fact_pos, pos);
                            self.include_admissible(idx, &mut delta);
                        } else {
                            // Inadmissible: leave it in the pool and include a
                            // replacement that only contains seen components.
                            if !deferred[idx] {
                                deferred[idx] = true;
                            }
                            deferred_draws += 1;
                            let replacement = loop {
                                match admissible.pop_if_valid(&self.included) {
                                    Some(k) => break Some(k),
                                    None => break None,
                                }
                            };
                            match replacement {
                                Some(k) => {
                                    let p = fact_pos[k as usize] as usize;
                                    debug_assert!(p != u32::MAX as usize);
                                    remove_at(&mut pool, &mut fact_pos, p);
                                    self.include_admissible(k as usize, &mut delta);
                                }
                                None => {
                                    if non_fact_in_pool == 0
                                        && pool.iter().all(|it| matches!(it, Item::Fact(k) if deferred[*k as usize]))
                                    {
                                        return Err(Error::BuilderDeadlock(format!(
                                            "hybrid pool holds only deferred facts \
                                             ({} deferrals so far)",
                                            deferred_draws
                                        )));
                                    }
                                }
                            }
                        }
                    }
                }
                if rng.random::<f64>() < stop_p {
                    break;
                }
            }
            self.seal(std::mem::take(&mut delta));
            let _ = i;
        }

        // Last snapshot: everything remaining, in base order.
        let mut last = Vec::new();
        for idx in 0..self.base.len() {
            if !self.included[idx] {
                self.include(idx, &mut last);
            }
        }
        self.seal(last);
        if deferred_draws > 0 {
            log::info!("hybrid expansion deferred {deferred_draws} inadmissible fact draws");
        }
        Ok(())
    }

    fn include_admissible(&mut self, idx: usize, delta: &mut Vec<usize>) {
        debug_assert!(!self.included[idx]);
        self.included[idx] = true;
        self.included_count += 1;
        delta.push(idx);
    }

    /// Stage 3: split every delta set into train/valid/test and assemble the
    /// final dataset with construction-order handles.
    fn divide(&mut self, rng: &mut ChaCha12Rng) -> Result<GrowthDataset> {
        let mut vocab = Vocabulary::new();
        for &e in &self.ent_order {
            vocab.intern_entity(self.base_vocab.entity_name(crate::kg::EntityId(e)).unwrap());
        }
        for &r in &self.rel_order {
            vocab.intern_relation(
                self.base_vocab
                    .relation_name(crate::kg::RelationId(r))
                    .unwrap(),
            );
        }

        let remap = |builder: &Builder, idx: usize| -> Fact {
            let f = builder.base[idx];
            Fact::new(
                crate::kg::EntityId(builder.ent_handle[f.subject.index()]),
                crate::kg::RelationId(builder.rel_handle[f.relation.index()]),
                crate::kg::EntityId(builder.ent_handle[f.object.index()]),
            )
        };

        let total: u64 = self.cfg.split_ratio.iter().sum();
        let mut snapshots = Vec::with_capacity(self.deltas.len());
        for (pos, delta) in self.deltas.iter().enumerate() {
            let mut facts: Vec<Fact> = delta.iter().map(|&idx| remap(self, idx)).collect();
            facts.shuffle(rng);
            let k = facts.len();
            let (train_n, valid_n, test_n) = split_sizes(k, self.cfg.split_ratio);
            if k > 0 && (k as u64) < total {
                log::warn!(
                    "snapshot {} delta has only {k} facts; all assigned to train",
                    pos + 1
                );
            }
            let test = facts.split_off(train_n + valid_n);
            let valid = facts.split_off(train_n);
            debug_assert_eq!(test.len(), test_n);
            debug_assert_eq!(valid.len(), valid_n);
            snapshots.push(Snapshot {
                index: pos + 1,
                train: facts,
                valid,
                test,
                num_entities: self.snap_num_entities[pos],
                num_relations: self.snap_num_relations[pos],
            });
        }

        let meta = BuilderMeta {
            variant: self.cfg.variant.as_str().to_owned(),
            seed: self.cfg.seed,
            num_snapshots: self.cfg.num_snapshots,
            split_ratio: self.cfg.split_ratio,
            seed_facts: self.cfg.seed_facts,
            hybrid_stop_numerator: self.cfg.hybrid_stop_numerator,
            closure_on_quota: self.cfg.closure_on_quota,
            rng: "chacha12".to_owned(),
            source_facts: self.base.len(),
            duplicates_dropped: 0,
        };
        GrowthDataset::new(snapshots, vocab, Some(meta))
    }
}

/// Split sizes for a delta of `k` facts under `ratio`: the valid and test
/// shares are floored and train absorbs the remainder, so deltas smaller
/// than the ratio total land entirely in train.
pub(crate) fn split_sizes(k: usize, ratio: [u64; 3]) -> (usize, usize, usize) {
    let total: u64 = ratio.iter().sum();
    let valid = (k as u64 * ratio[1] / total) as usize;
    let test = (k as u64 * ratio[2] / total) as usize;
    (k - valid - test, valid, test)
}
