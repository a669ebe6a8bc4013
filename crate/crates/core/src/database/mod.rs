//! Island populations, a MAP-Elites grid and a global archive over
//! multi-level nodes (delta summary, delta plan, full program).

mod descriptor;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use descriptor::{descriptor, Descriptor, DescriptorFn, TrigramDescriptor};

use crate::delta::{DeltaPlan, DeltaSummary};
use crate::eval::EvaluationReport;
use crate::llm::TokenUsage;

pub const SCHEMA_VERSION: u32 = 1;
/// Weight floor so zero-score nodes stay selectable.
pub const WEIGHT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub parent_id: Option<NodeId>,
    /// Island the node was created on.
    pub island: usize,
    pub iteration: u64,
    pub code: String,
    pub summary: Option<DeltaSummary>,
    pub plan: Option<DeltaPlan>,
    pub report: EvaluationReport,
    pub descriptor: Descriptor,
    pub tokens: TokenUsage,
}

impl Node {
    /// Combined score, or 0 for invalid reports.
    pub fn score(&self) -> f64 {
        if self.report.valid {
            self.report.combined_score
        } else {
            0.0
        }
    }
}

/// Score descending, then iteration ascending, then id ascending.
pub fn rank_order(a: &Node, b: &Node) -> Ordering {
    b.score()
        .total_cmp(&a.score())
        .then(a.iteration.cmp(&b.iteration))
        .then(a.id.cmp(&b.id))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    pub exploitation_ratio: f64,
    pub exploration_ratio: f64,
    pub elite_ratio: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { exploitation_ratio: 0.7, exploration_ratio: 0.2, elite_ratio: 0.1 }
    }
}

impl SelectionConfig {
    pub fn check(&self) -> Result<(), String> {
        let r = [self.exploitation_ratio, self.exploration_ratio, self.elite_ratio];
        if r.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err("selection ratios must be nonnegative".into());
        }
        let sum: f64 = r.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(format!("selection ratios sum to {sum}, expected 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatabaseConfig {
    pub islands: usize,
    /// Upper bound on each island's membership.
    pub population_size: usize,
    pub archive_size: usize,
    pub grid_bins: usize,
    pub migration_interval: u64,
    pub migration_rate: f64,
}

impl Default for DatabaseConfig {
    fn default() -> Self {
        Self {
            islands: 3,
            population_size: 40,
            archive_size: 20,
            grid_bins: 10,
            migration_interval: 10,
            migration_rate: 0.1,
        }
    }
}

impl DatabaseConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.islands == 0 {
            return Err("islands must be at least 1".into());
        }
        if self.population_size == 0 || self.grid_bins == 0 {
            return Err("population_size and grid bins must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.migration_rate) {
            return Err("migration_rate must lie in [0, 1]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    NewCell,
    ReplacedElite,
    Dominated,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MigrationReport {
    pub performed: bool,
    /// (node, source island, destination island)
    pub copies: Vec<(NodeId, usize, usize)>,
}

#[derive(Debug, Error)]
pub enum DbError {
    #[error("DuplicateId: node {0} already stored")]
    DuplicateId(NodeId),
    #[error("InvalidNode: {0}")]
    InvalidNode(String),
    #[error("EmptyPopulation: island {0} has no members")]
    EmptyPopulation(usize),
    #[error("IoFailure: {0}")]
    IoFailure(String),
    #[error("SchemaVersionMismatch: found {found}, expected {expected}")]
    SchemaVersionMismatch { found: u64, expected: u32 },
    #[error("CorruptCheckpoint: {0}")]
    CorruptCheckpoint(String),
}

pub type Cell = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Database {
    config: DatabaseConfig,
    nodes: BTreeMap<NodeId, Node>,
    islands: Vec<Vec<NodeId>>,
    grid: BTreeMap<Cell, NodeId>,
    archive: Vec<NodeId>,
    next_id: u64,
}

impl Database {
    pub fn new(config: DatabaseConfig) -> Self {
        Self {
            islands: vec![Vec::new(); config.islands.max(1)],
            config,
            nodes: BTreeMap::new(),
            grid: BTreeMap::new(),
            archive: Vec::new(),
            next_id: 0,
        }
    }

    pub fn config(&self) -> &DatabaseConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn allocate_id(&mut self) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        id
    }

    pub fn get(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    /// Every node ever inserted, including ones evicted from their island.
    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn island_count(&self) -> usize {
        self.islands.len()
    }

    pub fn island_members(&self, island: usize) -> &[NodeId] {
        self.islands.get(island).map_or(&[], Vec::as_slice)
    }

    pub fn grid(&self) -> &BTreeMap<Cell, NodeId> {
        &self.grid
    }

    pub fn archive(&self) -> &[NodeId] {
        &self.archive
    }

    pub fn cell_of(&self, d: &Descriptor) -> Cell {
        let bins = self.config.grid_bins;
        let bin = |v: f64| {
            let b = (v.clamp(0.0, 1.0) * bins as f64).floor() as usize;
            b.min(bins - 1)
        };
        (bin(d.complexity), bin(d.diversity))
    }

    pub fn best(&self) -> Option<&Node> {
        self.nodes.values().min_by(|a, b| rank_order(a, b))
    }

    fn node(&self, id: NodeId) -> &Node {
        &self.nodes[&id]
    }

    fn is_cell_elite(&self, id: NodeId) -> bool {
        self.grid.get(&self.cell_of(&self.node(id).descriptor)) == Some(&id)
    }

    /// Stores `node` on its island, updates the grid and the archive.
    pub fn insert(&mut self, node: Node) -> Result<Placement, DbError> {
        if self.nodes.contains_key(&node.id) {
            return Err(DbError::DuplicateId(node.id));
        }
        if node.island >= self.islands.len() {
            return Err(DbError::InvalidNode(format!("island {} out of range", node.island)));
        }
        if node.parent_id.is_none() != (node.summary.is_none() && node.plan.is_none()) {
            return Err(DbError::InvalidNode("only parentless nodes may lack deltas".into()));
        }
        if let Some(pid) = node.parent_id {
            let parent = self
                .nodes
                .get(&pid)
                .ok_or_else(|| DbError::InvalidNode(format!("unknown parent {pid}")))?;
            if node.iteration <= parent.iteration {
                return Err(DbError::InvalidNode(format!(
                    "iteration {} does not follow parent iteration {}",
                    node.iteration, parent.iteration
                )));
            }
        }
        if node.report.valid && !node.report.combined_score.is_finite() {
            return Err(DbError::InvalidNode("valid report with non-finite score".into()));
        }

        let id = node.id;
        let island = node.island;
        let cell = self.cell_of(&node.descriptor);
        let score = node.score();
        self.next_id = self.next_id.max(id.0 + 1);
        self.nodes.insert(id, node);

        let placement = match self.grid.get(&cell) {
            None => Placement::NewCell,
            Some(&inc) if score > self.node(inc).score() => Placement::ReplacedElite,
            Some(_) => Placement::Dominated,
        };
        if placement != Placement::Dominated {
            self.grid.insert(cell, id);
        }

        self.islands[island].push(id);
        self.enforce_bound(island);

        self.archive.push(id);
        let mut archive = std::mem::take(&mut self.archive);
        archive.sort_by(|a, b| rank_order(self.node(*a), self.node(*b)));
        archive.truncate(self.config.archive_size);
        self.archive = archive;
        Ok(placement)
    }

    fn enforce_bound(&mut self, island: usize) {
        while self.islands[island].len() > self.config.population_size {
            let members = &self.islands[island];
            let worst = |ids: &mut dyn Iterator<Item = (usize, NodeId)>| {
                ids.max_by(|(_, a), (_, b)| rank_order(self.node(*a), self.node(*b)))
                    .map(|(pos, _)| pos)
            };
            let pos = worst(&mut members.iter().copied().enumerate().filter(|(_, id)| !self.is_cell_elite(*id)))
                .or_else(|| worst(&mut members.iter().copied().enumerate()))
                .expect("non-empty island");
            self.islands[island].remove(pos);
        }
    }

    /// Draws a parent from `island` (or the archive, on the elite branch).
    pub fn select_parent<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        island: usize,
        cfg: &SelectionConfig,
    ) -> Result<&Node, DbError> {
        let members = self.island_members(island);
        if members.is_empty() {
            return Err(DbError::EmptyPopulation(island));
        }
        let r: f64 = rng.random();
        let id = if r < cfg.exploitation_ratio {
            let weights: Vec<f64> =
                members.iter().map(|id| self.node(*id).score().max(WEIGHT_FLOOR)).collect();
            let total: f64 = weights.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut chosen = members[members.len() - 1];
            for (id, w) in members.iter().zip(&weights) {
                if u < *w {
                    chosen = *id;
                    break;
                }
                u -= w;
            }
            chosen
        } else if r < cfg.exploitation_ratio + cfg.exploration_ratio || self.archive.is_empty() {
            members[rng.random_range(0..members.len())]
        } else {
            self.archive[rng.random_range(0..self.archive.len())]
        };
        Ok(self.node(id))
    }

    /// The `k` best nodes overall under [`rank_order`].
    pub fn top_k(&self, k: usize) -> Vec<&Node> {
        let mut all: Vec<&Node> = self.nodes.values().collect();
        all.sort_by(|a, b| rank_order(a, b));
        all.truncate(k);
        all
    }

    /// Elites of the `m` occupied cells farthest from the parent's cell.
    /// The parent's own cell is skipped; equal distances are ordered by `rng`.
    pub fn sample_diverse<R: Rng + ?Sized>(&self, m: usize, parent: &Node, rng: &mut R) -> Vec<&Node> {
        let home = self.cell_of(&parent.descriptor);
        let mut cells: Vec<(Cell, NodeId)> = self
            .grid
            .iter()
            .filter(|(cell, id)| **cell != home && **id != parent.id)
            .map(|(c, id)| (*c, *id))
            .collect();
        cells.shuffle(rng);
        let dist2 = |c: &Cell| {
            let di = c.0 as i64 - home.0 as i64;
            let dj = c.1 as i64 - home.1 as i64;
            di * di + dj * dj
        };
        cells.sort_by_key(|(c, _)| std::cmp::Reverse(dist2(c)));
        cells.into_iter().take(m).map(|(_, id)| self.node(id)).collect()
    }

    /// Ring migration: every `migration_interval` iterations each island
    /// sends its top `ceil(rate * size)` members to the next island.
    pub fn migrate(&mut self, iteration: u64) -> MigrationReport {
        let n = self.islands.len();
        let interval = self.config.migration_interval;
        if n < 2 || interval == 0 || !iteration.is_multiple_of(interval) {
            return MigrationReport::default();
        }
        let snapshot: Vec<Vec<NodeId>> = self
            .islands
            .iter()
            .map(|members| {
                let mut ranked = members.clone();
                ranked.sort_by(|a, b| rank_order(self.node(*a), self.node(*b)));
                let count = (self.config.migration_rate * members.len() as f64).ceil() as usize;
                ranked.truncate(count);
                ranked
            })
            .collect();
        let mut report = MigrationReport { performed: true, copies: Vec::new() };
        for (src, movers) in snapshot.into_iter().enumerate() {
            let dst = (src + 1) % n;
            for id in movers {
                if !self.islands[dst].contains(&id) {
                    self.islands[dst].push(id);
                    report.copies.push((id, src, dst));
                }
            }
            self.enforce_bound(dst);
        }
        report
    }

    /// Adds an existing node to an island's membership (used for the seed).
    pub fn add_member(&mut self, id: NodeId, island: usize) {
        if self.nodes.contains_key(&id) && island < self.islands.len() && !self.islands[island].contains(&id) {
            self.islands[island].push(id);
            self.enforce_bound(island);
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            schema_version: SCHEMA_VERSION,
            config: self.config,
            next_id: self.next_id,
            nodes: self.nodes.values().cloned().collect(),
            islands: self.islands.clone(),
            grid: self.grid.iter().map(|(c, id)| GridEntry { cell: [c.0, c.1], elite: *id }).collect(),
            archive: self.archive.clone(),
        }
    }

    pub fn from_checkpoint(cp: Checkpoint) -> Result<Self, DbError> {
        if cp.schema_version != SCHEMA_VERSION {
            return Err(DbError::SchemaVersionMismatch {
                found: cp.schema_version as u64,
                expected: SCHEMA_VERSION,
            });
        }
        let corrupt = |m: String| DbError::CorruptCheckpoint(m);
        let mut nodes = BTreeMap::new();
        for n in cp.nodes {
            if nodes.insert(n.id, n).is_some() {
                return Err(corrupt("duplicate node id".into()));
            }
        }
        let known = |id: &NodeId| nodes.contains_key(id);
        if cp.islands.is_empty() || !cp.islands.iter().flatten().all(known) {
            return Err(corrupt("island membership references unknown nodes".into()));
        }
        if !cp.archive.iter().all(known) || !cp.grid.iter().all(|g| known(&g.elite)) {
            return Err(corrupt("grid or archive references unknown nodes".into()));
        }
        let grid: BTreeMap<Cell, NodeId> =
            cp.grid.iter().map(|g| ((g.cell[0], g.cell[1]), g.elite)).collect();
        let unique: BTreeSet<_> = cp.archive.iter().collect();
        if unique.len() != cp.archive.len() {
            return Err(corrupt("duplicate archive entry".into()));
        }
        Ok(Self {
            config: cp.config,
            nodes,
            islands: cp.islands,
            grid,
            archive: cp.archive,
            next_id: cp.next_id,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), DbError> {
        write_json_atomic(path, &self.to_checkpoint())
    }

    pub fn load(path: &Path) -> Result<Self, DbError> {
        let value = read_versioned(path)?;
        let cp: Checkpoint =
            serde_json::from_value(value).map_err(|e| DbError::CorruptCheckpoint(e.to_string()))?;
        Self::from_checkpoint(cp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub cell: [usize; 2],
    pub elite: NodeId,
}

/// On-disk form of a [`Database`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub config: DatabaseConfig,
    pub next_id: u64,
    pub nodes: Vec<Node>,
    pub islands: Vec<Vec<NodeId>>,
    pub grid: Vec<GridEntry>,
    pub archive: Vec<NodeId>,
}

/// Serializes `value` to a sibling temp file, then renames it into place.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), DbError> {
    let io = |e: std::io::Error| DbError::IoFailure(format!("{}: {e}", path.display()));
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| DbError::IoFailure(e.to_string()))?;
    tmp.write_all(text.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Reads a JSON document and checks its `schema_version` field.
pub fn read_versioned(path: &Path) -> Result<serde_json::Value, DbError> {
    let text = fs::read_to_string(path).map_err(|e| DbError::IoFailure(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| DbError::CorruptCheckpoint(e.to_string()))?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == SCHEMA_VERSION as u64 => Ok(value),
        Some(v) => Err(DbError::SchemaVersionMismatch { found: v, expected: SCHEMA_VERSION }),
        None => Err(DbError::CorruptCheckpoint("missing schema_version".into())),
    }
}
