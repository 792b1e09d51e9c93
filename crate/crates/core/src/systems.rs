//! Independence-system oracles.
//!
//! Every system answers stateless membership queries through
//! [`IndependenceSystem::contains`]. Algorithms that repeatedly ask whether
//! `S ∪ {u}` is independent for a fixed `S` keep a [`Selection`], which caches
//! per-constraint counters so each such query costs O(labels of u) instead of
//! O(|S|).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_ids, Error, Result};
use crate::verify;

/// Largest ground set an [`ExplicitSystem`] may be built over.
pub const EXPLICIT_MAX_N: usize = 16;

/// Incremental membership state for one growing independent set.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    members: Vec<usize>,
    counts: Vec<u32>,
}

impl Selection {
    pub fn with_counters(counters: usize) -> Self {
        Self { members: Vec::new(), counts: vec![0; counters] }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    fn with_member(&self, u: usize) -> Vec<usize> {
        let mut set = self.members.clone();
        set.push(u);
        set
    }
}

/// A down-closed family `I` over the ground set `0..n`.
///
/// Implementations must satisfy `contains(&[])` and down-closedness. They are
/// immutable after construction and safe to query from several threads.
pub trait IndependenceSystem: Send + Sync {
    fn ground_size(&self) -> usize;

    /// The `k` for which the family is (claimed to be) a k-system.
    fn declared_k(&self) -> usize;

    /// Stateless membership test. Ids are assumed to be in range.
    fn contains(&self, set: &[usize]) -> bool;

    fn kind(&self) -> &'static str;

    /// State for the empty set.
    fn empty_selection(&self) -> Selection {
        Selection::with_counters(0)
    }

    /// Whether `selection ∪ {u}` is independent.
    fn can_extend(&self, selection: &Selection, u: usize) -> bool {
        self.contains(&selection.with_member(u))
    }

    /// Adds `u` to the selection without checking feasibility.
    fn extend(&self, selection: &mut Selection, u: usize) {
        selection.members.push(u);
    }

    /// An upper bound on the rank `r`.
    ///
    /// Builds one base `B` by a single pass in id order and returns
    /// `min(n, k·|B|)`: any two bases of a k-system differ in size by at most a
    /// factor `k`.
    fn rank_upper_bound(&self) -> usize {
        let n = self.ground_size();
        let mut sel = self.empty_selection();
        for u in 0..n {
            if self.can_extend(&sel, u) {
                self.extend(&mut sel, u);
            }
        }
        (self.declared_k() * sel.len()).min(n).max(1)
    }
}

/// Builds a selection holding `set`, in order.
pub fn selection_of(system: &dyn IndependenceSystem, set: &[usize]) -> Selection {
    let mut sel = system.empty_selection();
    for &u in set {
        system.extend(&mut sel, u);
    }
    sel
}

/// `|S| ≤ cap`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CardinalitySystem {
    n: usize,
    cap: usize,
}

impl CardinalitySystem {
    pub fn new(n: usize, cap: usize) -> Self {
        Self { n, cap }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }
}

impl IndependenceSystem for CardinalitySystem {
    fn ground_size(&self) -> usize {
        self.n
    }

    fn declared_k(&self) -> usize {
        1
    }

    fn contains(&self, set: &[usize]) -> bool {
        set.len() <= self.cap
    }

    fn kind(&self) -> &'static str {
        "cardinality"
    }

    fn can_extend(&self, selection: &Selection, _u: usize) -> bool {
        selection.len() < self.cap
    }

    fn rank_upper_bound(&self) -> usize {
        self.cap.min(self.n).max(1)
    }
}

/// One category per element, a cap per category and a global cap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionMatroidSystem {
    category: Vec<usize>,
    caps: Vec<usize>,
    global_cap: usize,
}

impl PartitionMatroidSystem {
    pub fn new(category: Vec<usize>, caps: Vec<usize>, global_cap: usize) -> Result<Self> {
        if let Some(&c) = category.iter().find(|&&c| c >= caps.len()) {
            return Err(Error::InvalidInput(format!(
                "category {c} has no cap ({} caps given)",
                caps.len()
            )));
        }
        Ok(Self { category, caps, global_cap })
    }

    pub fn category(&self, u: usize) -> usize {
        self.category[u]
    }

    pub fn global_cap(&self) -> usize {
        self.global_cap
    }
}

impl IndependenceSystem for PartitionMatroidSystem {
    fn ground_size(&self) -> usize {
        self.category.len()
    }

    fn declared_k(&self) -> usize {
        1
    }

    fn contains(&self, set: &[usize]) -> bool {
        if set.len() > self.global_cap {
            return false;
        }
        let mut counts = vec![0usize; self.caps.len()];
        for &u in set {
            let c = self.category[u];
            counts[c] += 1;
            if counts[c] > self.caps[c] {
                return false;
            }
        }
        true
    }

    fn kind(&self) -> &'static str {
        "partition"
    }

    fn empty_selection(&self) -> Selection {
        Selection::with_counters(self.caps.len())
    }

    fn can_extend(&self, selection: &Selection, u: usize) -> bool {
        let c = self.category[u];
        selection.len() < self.global_cap && (selection.counts[c] as usize) < self.caps[c]
    }

    fn extend(&self, selection: &mut Selection, u: usize) {
        selection.counts[self.category[u]] += 1;
        selection.members.push(u);
    }
}

/// Every element carries a set of labels. At most `label_caps[g]` selected
/// elements may carry label `g`, and at most `global_cap` elements overall.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiLabelBoundSystem {
    labels: Vec<Vec<usize>>,
    label_caps: Vec<usize>,
    global_cap: usize,
}

impl MultiLabelBoundSystem {
    pub fn new(labels: Vec<Vec<usize>>, label_caps: Vec<usize>, global_cap: usize) -> Result<Self> {
        for (u, ls) in labels.iter().enumerate() {
            if let Some(&g) = ls.iter().find(|&&g| g >= label_caps.len()) {
                return Err(Error::InvalidInput(format!(
                    "element {u} carries label {g} but only {} label caps are given",
                    label_caps.len()
                )));
            }
        }
        let mut labels = labels;
        for ls in &mut labels {
            ls.sort_unstable();
            ls.dedup();
        }
        Ok(Self { labels, label_caps, global_cap })
    }

    pub fn label_count(&self) -> usize {
        self.label_caps.len()
    }

    pub fn labels(&self, u: usize) -> &[usize] {
        &self.labels[u]
    }
}

impl IndependenceSystem for MultiLabelBoundSystem {
    fn ground_size(&self) -> usize {
        self.labels.len()
    }

    fn declared_k(&self) -> usize {
        self.label_caps.len().max(1)
    }

    fn contains(&self, set: &[usize]) -> bool {
        if set.len() > self.global_cap {
            return false;
        }
        let mut counts = vec![0usize; self.label_caps.len()];
        for &u in set {
            for &g in &self.labels[u] {
                counts[g] += 1;
                if counts[g] > self.label_caps[g] {
                    return false;
                }
            }
        }
        true
    }

    fn kind(&self) -> &'static str {
        "multilabel"
    }

    fn empty_selection(&self) -> Selection {
        Selection::with_counters(self.label_caps.len())
    }

    fn can_extend(&self, selection: &Selection, u: usize) -> bool {
        selection.len() < self.global_cap
            && self.labels[u]
                .iter()
                .all(|&g| (selection.counts[g] as usize) < self.label_caps[g])
    }

    fn extend(&self, selection: &mut Selection, u: usize) {
        for &g in &self.labels[u] {
            selection.counts[g] += 1;
        }
        selection.members.push(u);
    }
}

/// Ground set of (node, product) pairs with id `node · products + product`.
/// Each node seeds at most `node_cap` products and each product is given to
/// at most `product_cap` nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SocialSeedingSystem {
    nodes: usize,
    products: usize,
    node_cap: usize,
    product_cap: usize,
}

impl SocialSeedingSystem {
    pub fn new(nodes: usize, products: usize, node_cap: usize, product_cap: usize) -> Self {
        Self { nodes, products, node_cap, product_cap }
    }

    pub fn element(&self, node: usize, product: usize) -> usize {
        node * self.products + product
    }

    pub fn pair(&self, id: usize) -> (usize, usize) {
        (id / self.products, id % self.products)
    }

    pub fn products(&self) -> usize {
        self.products
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }
}

impl IndependenceSystem for SocialSeedingSystem {
    fn ground_size(&self) -> usize {
        self.nodes * self.products
    }

    fn declared_k(&self) -> usize {
        2
    }

    fn contains(&self, set: &[usize]) -> bool {
        let mut per_node = vec![0usize; self.nodes];
        let mut per_product = vec![0usize; self.products];
        for &id in set {
            let (v, i) = self.pair(id);
            per_node[v] += 1;
            per_product[i] += 1;
            if per_node[v] > self.node_cap || per_product[i] > self.product_cap {
                return false;
            }
        }
        true
    }

    fn kind(&self) -> &'static str {
        "social"
    }

    fn empty_selection(&self) -> Selection {
        Selection::with_counters(self.nodes + self.products)
    }

    fn can_extend(&self, selection: &Selection, u: usize) -> bool {
        let (v, i) = self.pair(u);
        (selection.counts[v] as usize) < self.node_cap
            && (selection.counts[self.nodes + i] as usize) < self.product_cap
    }

    fn extend(&self, selection: &mut Selection, u: usize) {
        let (v, i) = self.pair(u);
        selection.counts[v] += 1;
        selection.counts[self.nodes + i] += 1;
        selection.members.push(u);
    }
}

/// A family listed set by set over a small ground set, stored as a bitmask
/// membership table.
#[derive(Clone)]
pub struct ExplicitSystem {
    n: usize,
    table: Vec<bool>,
    declared_k: usize,
}

impl fmt::Debug for ExplicitSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExplicitSystem")
            .field("n", &self.n)
            .field("family_size", &self.family_size())
            .field("declared_k", &self.declared_k)
            .finish()
    }
}

pub fn mask_of(set: &[usize]) -> usize {
    set.iter().fold(0, |m, &u| m | (1 << u))
}

pub fn members_of(mask: usize) -> Vec<usize> {
    (0..usize::BITS as usize).filter(|&u| mask >> u & 1 == 1).collect()
}

impl ExplicitSystem {
    /// Builds the family from its complete list of independent sets. Fails if
    /// the list is not down-closed or misses `∅`. `declared_k` is measured by
    /// exhaustive base enumeration.
    pub fn new(n: usize, sets: &[Vec<usize>]) -> Result<Self> {
        let table = Self::table_from(n, sets)?;
        Self::from_table(n, table)
    }

    /// Builds the down-closure of `sets` (which always contains `∅`).
    pub fn down_closure(n: usize, sets: &[Vec<usize>]) -> Result<Self> {
        let mut table = Self::table_from(n, sets)?;
        table[0] = true;
        // Visit masks from the top: a mask is independent if any one-element
        // superset is.
        for mask in (0..table.len()).rev() {
            if table[mask] {
                continue;
            }
            let missing = !mask & (table.len() - 1);
            table[mask] = members_of(missing).into_iter().any(|u| table[mask | 1 << u]);
        }
        Self::from_table(n, table)
    }

    /// Encodes any system over at most [`EXPLICIT_MAX_N`] elements explicitly.
    pub fn encode(system: &dyn IndependenceSystem) -> Result<Self> {
        let n = system.ground_size();
        Self::check_n(n)?;
        let table = (0..1usize << n).map(|m| system.contains(&members_of(m))).collect();
        Self::from_table(n, table)
    }

    pub fn from_table(n: usize, table: Vec<bool>) -> Result<Self> {
        Self::check_n(n)?;
        if table.len() != 1 << n {
            return Err(Error::InvalidInput(format!(
                "membership table has {} entries, expected 2^{n}",
                table.len()
            )));
        }
        if !table[0] {
            return Err(Error::Contract("the empty set must be independent".into()));
        }
        for mask in 1..table.len() {
            if table[mask] {
                if let Some(u) = members_of(mask).into_iter().find(|&u| !table[mask & !(1 << u)]) {
                    return Err(Error::Contract(format!(
                        "family is not down-closed: {:?} is independent but {:?} is not",
                        members_of(mask),
                        members_of(mask & !(1 << u))
                    )));
                }
            }
        }
        let k = verify::measured_k_of_table(n, &table);
        Ok(Self { n, table, declared_k: k })
    }

    /// Overrides the declared `k` (it must still be at least the measured one).
    pub fn with_declared_k(mut self, k: usize) -> Result<Self> {
        if k < self.declared_k {
            return Err(Error::InvalidInput(format!(
                "declared k = {k} is below the measured k = {}",
                self.declared_k
            )));
        }
        self.declared_k = k;
        Ok(self)
    }

    pub fn table(&self) -> &[bool] {
        &self.table
    }

    pub fn contains_mask(&self, mask: usize) -> bool {
        self.table[mask]
    }

    pub fn family_size(&self) -> usize {
        self.table.iter().filter(|&&b| b).count()
    }

    /// Every independent set, as sorted id lists.
    pub fn family(&self) -> Vec<Vec<usize>> {
        (0..self.table.len()).filter(|&m| self.table[m]).map(members_of).collect()
    }

    fn check_n(n: usize) -> Result<()> {
        if n > EXPLICIT_MAX_N {
            return Err(Error::Refused(format!(
                "explicit families are limited to n ≤ {EXPLICIT_MAX_N}, got n = {n}"
            )));
        }
        Ok(())
    }

    fn table_from(n: usize, sets: &[Vec<usize>]) -> Result<Vec<bool>> {
        Self::check_n(n)?;
        let mut table = vec![false; 1 << n];
        for set in sets {
            check_ids(set, n)?;
            table[mask_of(set)] = true;
        }
        Ok(table)
    }
}

impl IndependenceSystem for ExplicitSystem {
    fn ground_size(&self) -> usize {
        self.n
    }

    fn declared_k(&self) -> usize {
        self.declared_k
    }

    fn contains(&self, set: &[usize]) -> bool {
        self.table[mask_of(set)]
    }

    fn kind(&self) -> &'static str {
        "explicit"
    }

    fn empty_selection(&self) -> Selection {
        Selection::with_counters(1)
    }

    fn can_extend(&self, selection: &Selection, u: usize) -> bool {
        self.table[selection.counts[0] as usize | 1 << u]
    }

    fn extend(&self, selection: &mut Selection, u: usize) {
        selection.counts[0] |= 1 << u;
        selection.members.push(u);
    }
}
