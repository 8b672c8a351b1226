//! Measurement-driven CHO conditions, their monitoring windows, the
//! prepared-cell set, and the CHO / FCHO execution semantics.
//!
//! All four conditions use strict inequalities on L3 cell quality:
//!
//! | condition   | fires when                         |
//! |-------------|------------------------------------|
//! | preparation | `P_serv < P_tgt + o_prep`          |
//! | execution   | `P_serv + o_exec < P_tgt`          |
//! | release     | `P_prep + o_rel < P_serv`          |
//! | replace     | `P_strong > P_weakest + o_rep`     |
//!
//! and must hold at `window` consecutive SSB instants before firing.

use thiserror::Error;

use crate::config::{HoMode, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoOffsets {
    pub o_prep: f64,
    pub o_exec: f64,
    pub o_rel: f64,
    pub o_rep: f64,
}

impl HoOffsets {
    pub fn from_config(cfg: &SimConfig) -> Self {
        let h = &cfg.handover;
        Self {
            o_prep: h.o_prep,
            o_exec: h.o_exec,
            o_rel: h.o_rel,
            o_rep: h.o_rep,
        }
    }

    /// Release hysteresis; positive for a valid configuration.
    pub fn o_hys(&self) -> f64 {
        self.o_rel - self.o_prep
    }
}

impl Default for HoOffsets {
    fn default() -> Self {
        Self::from_config(&SimConfig::default())
    }
}

pub fn eval_prep(p_serv: f64, p_tgt: f64, o_prep: f64) -> bool {
    p_serv < p_tgt + o_prep
}

pub fn eval_exec(p_serv: f64, p_tgt: f64, o_exec: f64) -> bool {
    p_serv + o_exec < p_tgt
}

pub fn eval_rel(p_serv: f64, p_prepared: f64, o_rel: f64) -> bool {
    p_prepared + o_rel < p_serv
}

pub fn eval_rep(p_strong: f64, p_weakest: f64, o_rep: f64, set_full: bool) -> bool {
    set_full && p_strong > p_weakest + o_rep
}

/// Counts consecutive SSB instants at which a condition held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConditionMonitor {
    window: u32,
    hits: u32,
}

impl ConditionMonitor {
    pub fn new(window: u32) -> Self {
        Self { window, hits: 0 }
    }

    /// Records one instant; returns true once the condition has held for the full window.
    pub fn observe(&mut self, satisfied: bool) -> bool {
        self.hits = if satisfied { self.hits.saturating_add(1) } else { 0 };
        self.hits >= self.window
    }

    pub fn reset(&mut self) {
        self.hits = 0;
    }

    pub fn hits(&self) -> u32 {
        self.hits
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryState {
    Pending { ready_at_ms: u64 },
    Ready,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreparedEntry {
    pub cell_id: usize,
    pub prepared_at_ms: u64,
    pub state: EntryState,
}

impl PreparedEntry {
    pub fn is_ready(&self) -> bool {
        self.state == EntryState::Ready
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PreparedSetError {
    #[error("prepared set is full ({0} entries)")]
    Full(usize),
    #[error("cell {0} is the serving cell")]
    IsServing(usize),
    #[error("cell {0} is not in the prepared set")]
    Absent(usize),
    #[error("cell {0} is already prepared")]
    AlreadyPrepared(usize),
    #[error("cell {0} is not ready for execution")]
    NotReady(usize),
    #[error("replace precondition violated: {0}")]
    Replace(String),
}

/// Bounded list of prepared target cells, kept in insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedSet {
    entries: Vec<PreparedEntry>,
    capacity: usize,
}

impl PreparedSet {
    pub fn new(capacity: usize) -> Self {
        Self {
            entries: Vec::with_capacity(capacity),
            capacity,
        }
    }

    pub fn entries(&self) -> &[PreparedEntry] {
        &self.entries
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    pub fn get(&self, cell: usize) -> Option<&PreparedEntry> {
        self.entries.iter().find(|e| e.cell_id == cell)
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.get(cell).is_some()
    }

    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.cell_id)
    }

    pub fn ready_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().filter(|e| e.is_ready()).map(|e| e.cell_id)
    }

    fn remove(&mut self, cell: usize) -> Option<PreparedEntry> {
        let pos = self.entries.iter().position(|e| e.cell_id == cell)?;
        Some(self.entries.remove(pos))
    }

    fn clear(&mut self) {
        self.entries.clear();
    }

    /// Entry with the lowest L3 quality. Entries without a measurement rank lowest.
    pub fn weakest(&self, l3: &[Option<f64>]) -> Option<(usize, f64)> {
        self.entries
            .iter()
            .map(|e| (e.cell_id, l3[e.cell_id].unwrap_or(f64::NEG_INFINITY)))
            .fold(None, |acc: Option<(usize, f64)>, cur| match acc {
                Some(a) if a.1 <= cur.1 => Some(a),
                _ => Some(cur),
            })
    }

    /// Marks entries whose preparation latency has elapsed as ready.
    /// Returns the newly ready cells.
    pub fn promote(&mut self, now_ms: u64) -> Vec<usize> {
        let mut promoted = Vec::new();
        for e in &mut self.entries {
            if let EntryState::Pending { ready_at_ms } = e.state {
                if ready_at_ms <= now_ms {
                    e.state = EntryState::Ready;
                    promoted.push(e.cell_id);
                }
            }
        }
        promoted
    }
}

/// A monitor that reached its full window at this instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fired {
    Prepare(usize),
    Execute(usize),
    Release(usize),
    Replace { weak: usize, strong: usize },
}

/// Per-UE handover state: serving cell, prepared set and the four
/// families of condition monitors (one monitor per candidate cell).
#[derive(Debug, Clone)]
pub struct HandoverState {
    pub serving: usize,
    pub prepared: PreparedSet,
    prep: Vec<ConditionMonitor>,
    exec: Vec<ConditionMonitor>,
    rel: Vec<ConditionMonitor>,
    rep: Vec<ConditionMonitor>,
}

impl HandoverState {
    pub fn new(serving: usize, n_cells: usize, capacity: usize, window: u32) -> Self {
        let monitors = vec![ConditionMonitor::new(window); n_cells];
        Self {
            serving,
            prepared: PreparedSet::new(capacity),
            prep: monitors.clone(),
            exec: monitors.clone(),
            rel: monitors.clone(),
            rep: monitors,
        }
    }

    pub fn reset_monitors(&mut self) {
        for m in self.prep.iter_mut().chain(&mut self.exec).chain(&mut self.rel).chain(&mut self.rep) {
            m.reset();
        }
    }

    fn reset_cell(&mut self, cell: usize) {
        self.prep[cell].reset();
        self.exec[cell].reset();
        self.rel[cell].reset();
        self.rep[cell].reset();
    }

    pub fn monitor_hits(&self, cell: usize) -> [u32; 4] {
        [self.prep[cell].hits(), self.exec[cell].hits(), self.rel[cell].hits(), self.rep[cell].hits()]
    }

    /// Advances every applicable monitor by one SSB instant and reports
    /// those that completed their window. Applicability is decided on the
    /// state at entry: execution and release for ready entries,
    /// preparation and replace for cells outside the set.
    pub fn tick_monitors(&mut self, l3: &[Option<f64>], offsets: &HoOffsets) -> Vec<Fired> {
        let mut fired = Vec::new();
        let Some(p_serv) = l3[self.serving] else {
            self.reset_monitors();
            return fired;
        };
        let full = self.prepared.is_full();
        let weakest = if full { self.prepared.weakest(l3) } else { None };

        for cell in 0..l3.len() {
            let p = match l3[cell] {
                Some(p) if cell != self.serving => p,
                _ => {
                    self.reset_cell(cell);
                    continue;
                }
            };
            match self.prepared.get(cell).map(|e| e.is_ready()) {
                Some(true) => {
                    self.prep[cell].reset();
                    self.rep[cell].reset();
                    if self.exec[cell].observe(eval_exec(p_serv, p, offsets.o_exec)) {
                        fired.push(Fired::Execute(cell));
                    }
                    if self.rel[cell].observe(eval_rel(p_serv, p, offsets.o_rel)) {
                        fired.push(Fired::Release(cell));
                    }
                }
                Some(false) => self.reset_cell(cell),
                None => {
                    self.exec[cell].reset();
                    self.rel[cell].reset();
                    if self.prep[cell].observe(eval_prep(p_serv, p, offsets.o_prep)) {
                        fired.push(Fired::Prepare(cell));
                    }
                    match weakest {
                        Some((weak, p_weak)) => {
                            if self.rep[cell].observe(eval_rep(p, p_weak, offsets.o_rep, full)) {
                                fired.push(Fired::Replace { weak, strong: cell });
                            }
                        }
                        None => self.rep[cell].reset(),
                    }
                }
            }
        }
        fired
    }

    /// Adds `cell` as a pending preparation that becomes ready after `latency_ms`.
    /// Returns false when the cell was already prepared.
    pub fn apply_preparation(&mut self, cell: usize, now_ms: u64, latency_ms: u64) -> Result<bool, PreparedSetError> {
        if cell == self.serving {
            return Err(PreparedSetError::IsServing(cell));
        }
        if self.prepared.contains(cell) {
            return Ok(false);
        }
        if self.prepared.is_full() {
            return Err(PreparedSetError::Full(self.prepared.len()));
        }
        self.prepared.entries.push(PreparedEntry {
            cell_id: cell,
            prepared_at_ms: now_ms,
            state: EntryState::Pending {
                ready_at_ms: now_ms + latency_ms,
            },
        });
        self.reset_cell(cell);
        Ok(true)
    }

    pub fn apply_release(&mut self, cell: usize) -> Result<(), PreparedSetError> {
        self.prepared.remove(cell).ok_or(PreparedSetError::Absent(cell))?;
        self.reset_cell(cell);
        Ok(())
    }

    /// Swaps the weakest entry for a stronger candidate, keeping the set size.
    pub fn apply_replace(
        &mut self,
        weak: usize,
        strong: usize,
        l3: &[Option<f64>],
        now_ms: u64,
        latency_ms: u64,
    ) -> Result<(), PreparedSetError> {
        if !self.prepared.is_full() {
            return Err(PreparedSetError::Replace("set not full".into()));
        }
        if self.prepared.weakest(l3).map(|w| w.0) != Some(weak) {
            return Err(PreparedSetError::Replace(format!("cell {weak} is not the weakest entry")));
        }
        if strong == self.serving || self.prepared.contains(strong) {
            return Err(PreparedSetError::Replace(format!("cell {strong} is serving or already prepared")));
        }
        let pos = self.prepared.entries.iter().position(|e| e.cell_id == weak).expect("weakest is present");
        self.prepared.entries[pos] = PreparedEntry {
            cell_id: strong,
            prepared_at_ms: now_ms,
            state: EntryState::Pending {
                ready_at_ms: now_ms + latency_ms,
            },
        };
        self.reset_cell(weak);
        self.reset_cell(strong);
        Ok(())
    }

    /// Checks that `target` may be executed toward.
    pub fn check_executable(&self, target: usize) -> Result<(), PreparedSetError> {
        match self.prepared.get(target) {
            Some(e) if e.is_ready() => Ok(()),
            Some(_) => Err(PreparedSetError::NotReady(target)),
            None => Err(PreparedSetError::Absent(target)),
        }
    }

    /// Completes a successful handover to `target`.
    ///
    /// CHO releases every prepared cell. FCHO removes the target, inserts
    /// the previous serving cell in its place and keeps all other entries,
    /// all of them immediately ready. Returns cells that were pending and
    /// became ready through the swap.
    pub fn complete_handover(&mut self, target: usize, mode: HoMode, now_ms: u64) -> Result<Vec<usize>, PreparedSetError> {
        let pos = self
            .prepared
            .entries
            .iter()
            .position(|e| e.cell_id == target)
            .ok_or(PreparedSetError::Absent(target))?;
        let previous = self.serving;
        self.serving = target;
        let mut promoted = Vec::new();
        match mode {
            HoMode::Cho => self.prepared.clear(),
            HoMode::Fcho => {
                self.prepared.entries[pos] = PreparedEntry {
                    cell_id: previous,
                    prepared_at_ms: now_ms,
                    state: EntryState::Ready,
                };
                for e in &mut self.prepared.entries {
                    if !e.is_ready() {
                        e.state = EntryState::Ready;
                        promoted.push(e.cell_id);
                    }
                }
            }
        }
        self.reset_monitors();
        Ok(promoted)
    }

    /// Reconnects to `cell` after a failure; nothing survives.
    pub fn reestablish(&mut self, cell: usize) {
        self.serving = cell;
        self.prepared.clear();
        self.reset_monitors();
    }

    /// Among firing execution targets, the one with the strongest L3 (lowest id on ties).
    pub fn select_execution(&self, fired: &[Fired], l3: &[Option<f64>]) -> Option<usize> {
        best_by_l3(
            fired.iter().filter_map(|f| match f {
                Fired::Execute(c) if self.check_executable(*c).is_ok() => Some(*c),
                _ => None,
            }),
            l3,
        )
    }
}

/// Highest-L3 cell among `cells`; ties go to the first seen.
pub fn best_by_l3(cells: impl Iterator<Item = usize>, l3: &[Option<f64>]) -> Option<usize> {
    cells
        .map(|c| (c, l3[c].unwrap_or(f64::NEG_INFINITY)))
        .fold(None, |acc: Option<(usize, f64)>, cur| match acc {
            Some(a) if a.1 >= cur.1 => Some(a),
            _ => Some(cur),
        })
        .map(|(c, _)| c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn prep_condition() {
        assert!(eval_prep(-80.0, -85.0, 10.0));
        assert!(!eval_prep(-75.0, -85.0, 10.0));
        assert!(!eval_prep(-80.0, -90.0, 10.0));
    }

    #[test]
    fn exec_condition() {
        assert!(eval_exec(-80.0, -76.0, 3.0));
        assert!(!eval_exec(-80.0, -77.0, 3.0));
        for o in [0.5, 3.0, 7.0] {
            assert!(!eval_exec(-80.0, -80.0, o));
        }
    }

    #[test]
    fn rel_condition() {
        assert!(eval_rel(-70.0, -84.0, 13.0));
        assert!(!eval_rel(-70.0, -83.0, 13.0));
        // a cell that just passed preparation sits within o_prep of serving,
        // so it is at least o_hys away from release
        let o = HoOffsets::default();
        for margin in [0.1, 1.0, 2.9] {
            let p_serv = -70.0;
            let p_tgt = p_serv - o.o_prep + margin;
            assert!(eval_prep(p_serv, p_tgt, o.o_prep));
            assert!(!eval_rel(p_serv, p_tgt, o.o_rel));
        }
    }

    #[test]
    fn rep_condition() {
        assert!(eval_rep(-75.0, -79.0, 3.0, true));
        assert!(!eval_rep(-75.0, -79.0, 3.0, false));
        assert!(!eval_rep(-76.0, -79.0, 3.0, true));
    }

    fn first_run(trace: &[bool], window: usize) -> Option<usize> {
        (window - 1..trace.len()).find(|&i| trace[i + 1 - window..=i].iter().all(|&b| b))
    }

    #[test]
    fn window_matches_brute_force() {
        for len in 1..=10usize {
            for bits in 0u32..(1 << len) {
                let trace: Vec<bool> = (0..len).map(|i| bits >> i & 1 == 1).collect();
                let mut m = ConditionMonitor::new(4);
                let fired = trace.iter().position(|&b| m.observe(b));
                assert_eq!(fired, first_run(&trace, 4), "trace {trace:?}");
            }
        }
    }

    #[test]
    fn window_examples() {
        let mut m = ConditionMonitor::new(4);
        let fires: Vec<bool> = [true, true, true, true].iter().map(|&b| m.observe(b)).collect();
        assert_eq!(fires, vec![false, false, false, true]);
        let mut m = ConditionMonitor::new(4);
        let pattern = [true, true, false, true, true, true, true];
        assert_eq!(pattern.iter().position(|&b| m.observe(b)), Some(6));
    }

    fn l3(values: &[(usize, f64)], n: usize) -> Vec<Option<f64>> {
        let mut v = vec![None; n];
        for &(c, p) in values {
            v[c] = Some(p);
        }
        v
    }

    #[test]
    fn preparation_latency_and_capacity() {
        let mut ho = HandoverState::new(0, 8, 4, 4);
        assert_eq!(ho.apply_preparation(1, 100, 40), Ok(true));
        assert!(ho.prepared.promote(120).is_empty());
        assert_eq!(ho.prepared.promote(140), vec![1]);
        assert_eq!(ho.apply_preparation(1, 160, 40), Ok(false));
        for c in 2..=4 {
            ho.apply_preparation(c, 160, 40).unwrap();
        }
        assert_eq!(ho.apply_preparation(5, 160, 40), Err(PreparedSetError::Full(4)));
        assert_eq!(ho.apply_preparation(0, 160, 40), Err(PreparedSetError::IsServing(0)));
    }

    #[test]
    fn monitor_removed_target_never_fires() {
        let n = 3;
        let mut ho = HandoverState::new(0, n, 4, 4);
        ho.apply_preparation(1, 0, 0).unwrap();
        ho.prepared.promote(0);
        let o = HoOffsets::default();
        let meas = l3(&[(0, -80.0), (1, -70.0), (2, -120.0)], n);
        for _ in 0..3 {
            assert!(ho.tick_monitors(&meas, &o).is_empty());
        }
        ho.apply_release(1).unwrap();
        let fired = ho.tick_monitors(&meas, &o);
        assert!(!fired.contains(&Fired::Execute(1)));
        // back in the candidate pool: preparation needs a full window again
        assert_eq!(ho.monitor_hits(1)[0], 1);
    }

    #[test]
    fn exec_only_for_ready_entries() {
        let n = 3;
        let mut ho = HandoverState::new(0, n, 4, 4);
        let o = HoOffsets::default();
        let meas = l3(&[(0, -80.0), (1, -70.0), (2, -75.0)], n);
        ho.apply_preparation(1, 0, 1000).unwrap();
        for _ in 0..6 {
            let fired = ho.tick_monitors(&meas, &o);
            assert!(!fired.iter().any(|f| matches!(f, Fired::Execute(_))));
        }
        assert_eq!(ho.check_executable(1), Err(PreparedSetError::NotReady(1)));
    }

    #[test]
    fn tie_break_strongest() {
        let n = 4;
        let mut ho = HandoverState::new(0, n, 4, 1);
        for c in 1..=3 {
            ho.apply_preparation(c, 0, 0).unwrap();
        }
        ho.prepared.promote(0);
        let meas = l3(&[(0, -80.0), (1, -70.0), (2, -60.0), (3, -65.0)], n);
        let fired = ho.tick_monitors(&meas, &HoOffsets::default());
        assert_eq!(ho.select_execution(&fired, &meas), Some(2));
    }

    fn prepared_ready(serving: usize, cells: &[usize]) -> HandoverState {
        let mut ho = HandoverState::new(serving, 8, 4, 4);
        for &c in cells {
            ho.apply_preparation(c, 0, 40).unwrap();
        }
        ho.prepared.promote(40);
        ho
    }

    #[test]
    fn fcho_swaps_previous_serving_in() {
        let mut ho = prepared_ready(0, &[1, 2]);
        ho.complete_handover(1, HoMode::Fcho, 100).unwrap();
        assert_eq!(ho.serving, 1);
        let mut cells: Vec<_> = ho.prepared.cells().collect();
        cells.sort();
        assert_eq!(cells, vec![0, 2]);
        assert!(ho.prepared.entries().iter().all(|e| e.is_ready()));
        // the retained entry can be executed right away
        assert!(ho.check_executable(2).is_ok());
    }

    #[test]
    fn cho_releases_everything() {
        let mut ho = prepared_ready(0, &[1, 2]);
        ho.complete_handover(1, HoMode::Cho, 100).unwrap();
        assert_eq!(ho.serving, 1);
        assert!(ho.prepared.is_empty());
    }

    #[test]
    fn fcho_second_execution_needs_no_preparation() {
        let n = 3;
        let o = HoOffsets::default();
        let mut ho = prepared_ready(0, &[1, 2]);
        ho.complete_handover(1, HoMode::Fcho, 100).unwrap();
        let meas = l3(&[(0, -90.0), (1, -80.0), (2, -70.0)], n);
        let mut exec = None;
        for _ in 0..4 {
            let fired = ho.tick_monitors(&meas, &o);
            assert!(!fired.iter().any(|f| matches!(f, Fired::Prepare(_))));
            exec = ho.select_execution(&fired, &meas).or(exec);
        }
        assert_eq!(exec, Some(2));
    }

    #[test]
    fn release_semantics() {
        let mut ho = prepared_ready(0, &[1, 2]);
        ho.apply_release(1).unwrap();
        assert_eq!(ho.prepared.cells().collect::<Vec<_>>(), vec![2]);
        assert_eq!(ho.apply_release(1), Err(PreparedSetError::Absent(1)));
    }

    #[test]
    fn replace_semantics() {
        let n = 6;
        let mut ho = prepared_ready(0, &[1, 2, 3, 4]);
        let meas = l3(&[(0, -70.0), (1, -72.0), (2, -74.0), (3, -79.0), (4, -73.0), (5, -75.0)], n);
        ho.apply_replace(3, 5, &meas, 200, 40).unwrap();
        assert_eq!(ho.prepared.len(), 4);
        assert_eq!(ho.prepared.cells().collect::<Vec<_>>(), vec![1, 2, 5, 4]);
        assert_eq!(ho.prepared.get(5).unwrap().state, EntryState::Pending { ready_at_ms: 240 });
        // weakest is now cell 2
        assert!(ho.apply_replace(1, 3, &meas, 200, 40).is_err());
        ho.apply_release(1).unwrap();
        assert!(ho.apply_replace(2, 3, &meas, 200, 40).is_err());
    }

    #[test]
    fn replace_fires_after_window() {
        let n = 6;
        let o = HoOffsets::default();
        let mut ho = prepared_ready(0, &[1, 2, 3, 4]);
        let meas = l3(&[(0, -70.0), (1, -72.0), (2, -74.0), (3, -79.0), (4, -73.0), (5, -75.0)], n);
        let fires: Vec<bool> = (0..4)
            .map(|_| ho.tick_monitors(&meas, &o).contains(&Fired::Replace { weak: 3, strong: 5 }))
            .collect();
        assert_eq!(fires, vec![false, false, false, true]);
    }

    #[derive(Debug, Clone)]
    enum Op {
        Prepare(usize),
        Release(usize),
        Replace(usize),
        Promote,
        Handover(usize, bool),
        Reestablish(usize),
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (0..8usize).prop_map(Op::Prepare),
            (0..8usize).prop_map(Op::Release),
            (0..8usize).prop_map(Op::Replace),
            Just(Op::Promote),
            ((0..8usize), any::<bool>()).prop_map(|(c, f)| Op::Handover(c, f)),
            (0..8usize).prop_map(Op::Reestablish),
        ]
    }

    proptest! {
        #[test]
        fn set_invariants_hold(ops in proptest::collection::vec(op(), 1..80), seed in 0u64..1000) {
            let n = 8;
            let meas: Vec<Option<f64>> = (0..n).map(|c| Some(-60.0 - ((c as u64 * 7 + seed) % 13) as f64)).collect();
            let mut ho = HandoverState::new(0, n, 4, 4);
            let mut now = 0;
            for op in ops {
                now += 20;
                match op {
                    Op::Prepare(c) => { let _ = ho.apply_preparation(c, now, 40); }
                    Op::Release(c) => { let _ = ho.apply_release(c); }
                    Op::Replace(c) => {
                        if let Some((weak, _)) = ho.prepared.weakest(&meas) {
                            let _ = ho.apply_replace(weak, c, &meas, now, 40);
                        }
                    }
                    Op::Promote => { ho.prepared.promote(now); }
                    Op::Handover(c, fcho) => {
                        if ho.check_executable(c).is_ok() {
                            let before = ho.prepared.len();
                            let previous = ho.serving;
                            let mode = if fcho { HoMode::Fcho } else { HoMode::Cho };
                            ho.complete_handover(c, mode, now).unwrap();
                            if fcho {
                                prop_assert_eq!(ho.prepared.len(), before);
                                prop_assert!(ho.prepared.contains(previous));
                                prop_assert!(!ho.prepared.contains(c));
                            } else {
                                prop_assert!(ho.prepared.is_empty());
                            }
                        }
                    }
                    Op::Reestablish(c) => ho.reestablish(c),
                }
                let cells: Vec<usize> = ho.prepared.cells().collect();
                prop_assert!(cells.len() <= 4);
                prop_assert!(!cells.contains(&ho.serving));
                let mut dedup = cells.clone();
                dedup.sort();
                dedup.dedup();
                prop_assert_eq!(dedup.len(), cells.len());
            }
        }
    }
}
