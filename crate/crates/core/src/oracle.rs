//! Per-run counting handles over shared, immutable oracles.
//!
//! A handle borrows the system or objective and keeps its own tally, so
//! concurrent runs never contend on a shared counter. Tallies are atomics only
//! so that one run may fan a batch of queries out across threads.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{check_ids, Error, Result};
use crate::objectives::{GainState, SetFunction};
use crate::systems::{IndependenceSystem, Selection};

pub struct IndependenceOracle<'a> {
    sys: &'a dyn IndependenceSystem,
    queries: AtomicU64,
}

impl<'a> IndependenceOracle<'a> {
    pub fn new(sys: &'a dyn IndependenceSystem) -> Self {
        Self { sys, queries: AtomicU64::new(0) }
    }

    pub fn system(&self) -> &'a dyn IndependenceSystem {
        self.sys
    }

    pub fn ground_size(&self) -> usize {
        self.sys.ground_size()
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    fn tick(&self) {
        self.queries.fetch_add(1, Ordering::Relaxed);
    }

    /// Membership of `set` in the family. One query.
    pub fn is_independent(&self, set: &[usize]) -> Result<bool> {
        check_ids(set, self.sys.ground_size())?;
        self.tick();
        Ok(self.sys.contains(set))
    }

    /// Whether `selection ∪ {u}` is independent. One query.
    pub fn can_extend(&self, selection: &Selection, u: usize) -> bool {
        self.tick();
        self.sys.can_extend(selection, u)
    }

    pub fn empty_selection(&self) -> Selection {
        self.sys.empty_selection()
    }

    /// Commits `u`; the caller has already paid for the feasibility query.
    pub fn extend(&self, selection: &mut Selection, u: usize) {
        self.sys.extend(selection, u);
    }
}

pub struct ValueOracle<'a> {
    f: &'a dyn SetFunction,
    queries: AtomicU64,
}

impl<'a> ValueOracle<'a> {
    pub fn new(f: &'a dyn SetFunction) -> Self {
        Self { f, queries: AtomicU64::new(0) }
    }

    pub fn function(&self) -> &'a dyn SetFunction {
        self.f
    }

    pub fn ground_size(&self) -> usize {
        self.f.ground_size()
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    fn tick(&self) {
        self.queries.fetch_add(1, Ordering::Relaxed);
    }

    /// `f(set)`. One query.
    pub fn value(&self, set: &[usize]) -> Result<f64> {
        check_ids(set, self.f.ground_size())?;
        self.tick();
        Ok(self.f.evaluate(set))
    }

    /// State for `∅`, which costs the query for `f(∅)`.
    pub fn empty_state(&self) -> GainState {
        self.tick();
        self.f.empty_state()
    }

    /// `f(u | S)` with `f(S)` cached in `state`. One query.
    pub fn gain(&self, state: &GainState, u: usize) -> f64 {
        self.tick();
        self.f.gain(state, u)
    }

    /// Adds `u` to `state`. Free: the value follows from the gain just paid for.
    pub fn commit(&self, state: &mut GainState, u: usize) {
        self.f.commit(state, u);
    }

    /// `f(S ∪ {u}) − f(S)` without a cache. Two queries.
    pub fn marginal_gain(&self, u: usize, set: &[usize]) -> Result<f64> {
        let n = self.f.ground_size();
        check_ids(set, n)?;
        check_ids(&[u], n)?;
        if set.contains(&u) {
            return Err(Error::InvalidInput(format!("element {u} is already in the set")));
        }
        let base = self.value(set)?;
        let mut with_u = set.to_vec();
        with_u.push(u);
        Ok(self.value(&with_u)? - base)
    }
}
