//! Replica reconciliation between partitions.
//!
//! Partitions run on private replicas of the shared spaces and buffer their
//! updates. At an exchange point the buffered updates are reconciled by one
//! of three schemes: all-to-all coalesced deltas (buffered), a master that
//! reduces everything to one update per key and broadcasts (master), or
//! recomputation of derived spaces from exchanged authoritative assignments
//! (indirect). Between exchange points a replica sees only itself; no
//! coherence is promised.

use std::collections::BTreeMap;
use std::sync::Arc;

use smallvec::SmallVec;
use thiserror::Error;

use crate::executor::{CellData, ExecutionState};
use crate::ir::Key;

#[derive(Debug, Error, PartialEq)]
pub enum ExchangeError {
    #[error("partition {partition} wrote key {key:?} of `{space}` owned by partition {owner}")]
    OwnershipViolation { space: String, key: Vec<u64>, partition: u32, owner: u32 },
    #[error("space `{0}` must not receive overwrites under an accumulate policy")]
    PolicyViolation(String),
    #[error("indirect assertion references unknown name `{0}`")]
    AssertionUnsatisfiable(String),
}

/// One buffered update.
#[derive(Debug, Clone, PartialEq)]
pub enum Delta {
    AddScalar(f64),
    AddVector(SmallVec<[f64; 4]>),
    AddCount(i64),
    Overwrite(SmallVec<[f64; 4]>),
}

/// How a space participates in exchanges.
#[derive(Debug, Clone, PartialEq)]
pub enum WirePolicy {
    /// Partition-private; never exchanged.
    Local,
    /// Commutative additive updates, broadcast all-to-all.
    Accumulate { count_like: bool },
    /// Exactly one writing partition per key; values broadcast.
    OwnerOverwrite,
    /// Derived space; rebuilt from authoritative data by the indirect scheme.
    Recompute,
}

/// Per-space wire policies plus key-ownership maps (first key component to
/// owning partition) where a single writer is guaranteed.
#[derive(Debug, Clone, Default)]
pub struct ExchangePolicies {
    per_space: Vec<WirePolicy>,
    owners: Vec<Option<Arc<Vec<u32>>>>,
}

impl ExchangePolicies {
    pub fn local_only(n_spaces: usize) -> ExchangePolicies {
        ExchangePolicies {
            per_space: vec![WirePolicy::Local; n_spaces],
            owners: vec![None; n_spaces],
        }
    }

    pub fn set(&mut self, space: u32, policy: WirePolicy) {
        self.per_space[space as usize] = policy;
    }

    pub fn set_owner_map(&mut self, space: u32, map: Arc<Vec<u32>>) {
        self.owners[space as usize] = Some(map);
    }

    pub fn policy(&self, space: u32) -> &WirePolicy {
        &self.per_space[space as usize]
    }

    pub fn owner_of(&self, space: u32, key: &[u64]) -> Option<u32> {
        self.owners[space as usize].as_ref().map(|m| m[key[0] as usize])
    }

    pub fn owner_map(&self, space: u32) -> Option<&Arc<Vec<u32>>> {
        self.owners[space as usize].as_ref()
    }
}

/// Scheme selector, with the indirect scheme carrying its assertions.
#[derive(Debug, Clone, PartialEq)]
pub enum ExchangeScheme {
    Buffered,
    Master { master: u32 },
    Indirect { assertions: Vec<IndirectAssertion> },
}

impl std::fmt::Display for ExchangeScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExchangeScheme::Buffered => write!(f, "buffered"),
            ExchangeScheme::Master { .. } => write!(f, "master"),
            ExchangeScheme::Indirect { .. } => write!(f, "indirect"),
        }
    }
}

/// Where authoritative assignment/coordinate data lives for recomputation.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Space(String),
    CellField(String),
}

/// Relates derived statistics spaces to the authoritative assignment that
/// determines them: `size[m] = |{x : assign(x) == m}|` and
/// `sum[m] = sum of coords(x) over assigned x`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndirectAssertion {
    pub derived_size: String,
    pub derived_sum: Option<String>,
    pub assignment: DataSource,
    pub coords: Option<DataSource>,
    /// Number of derived keys (clusters).
    pub groups: u64,
}

/// Exchange traffic accounting.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExchangeStats {
    /// Updates recorded before coalescing.
    pub deltas_sent: u64,
    /// Coalesced per-key entries flushed.
    pub keys_touched: u64,
    /// Rough wire size of the flushed entries.
    pub bytes_equivalent: u64,
    /// Reduced updates broadcast by the master scheme.
    pub master_messages: u64,
}

impl ExchangeStats {
    pub fn absorb(&mut self, other: &ExchangeStats) {
        self.deltas_sent += other.deltas_sent;
        self.keys_touched += other.keys_touched;
        self.bytes_equivalent += other.bytes_equivalent;
        self.master_messages += other.master_messages;
    }
}

#[derive(Debug, Clone)]
struct Pending {
    delta: Delta,
    /// Neumaier compensation for float coalescing.
    comp: SmallVec<[f64; 4]>,
}

/// Per-partition buffer of pending updates, coalesced per (space, key).
#[derive(Debug, Clone)]
pub struct UpdateBuffer {
    pub partition: u32,
    pending: BTreeMap<(u32, Key), Pending>,
    pub deltas_recorded: u64,
    pub sweeps_since_flush: u32,
}

impl UpdateBuffer {
    pub fn new(partition: u32) -> UpdateBuffer {
        UpdateBuffer {
            partition,
            pending: BTreeMap::new(),
            deltas_recorded: 0,
            sweeps_since_flush: 0,
        }
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn pending_for(&self, space: u32, key: &[u64]) -> Option<&Delta> {
        self.pending.get(&(space, Key::from_slice(key))).map(|p| &p.delta)
    }

    /// Records one update, coalescing additive deltas per key. Overwrites
    /// for keys owned by another partition are rejected.
    pub fn record_delta(
        &mut self,
        space: u32,
        space_name: &str,
        key: &[u64],
        delta: Delta,
        policies: &ExchangePolicies,
    ) -> Result<(), ExchangeError> {
        if let Delta::Overwrite(_) = &delta {
            if let Some(owner) = policies.owner_of(space, key) {
                if owner != self.partition {
                    return Err(ExchangeError::OwnershipViolation {
                        space: space_name.to_string(),
                        key: key.to_vec(),
                        partition: self.partition,
                        owner,
                    });
                }
            }
        }
        self.deltas_recorded += 1;
        let slot = self.pending.entry((space, Key::from_slice(key)));
        match slot {
            std::collections::btree_map::Entry::Vacant(v) => {
                let width = match &delta {
                    Delta::AddVector(x) | Delta::Overwrite(x) => x.len(),
                    _ => 1,
                };
                v.insert(Pending { delta, comp: SmallVec::from_elem(0.0, width) });
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let p = o.get_mut();
                match (&mut p.delta, delta) {
                    (Delta::AddScalar(acc), Delta::AddScalar(d)) => {
                        neumaier(acc, &mut p.comp[0], d);
                    }
                    (Delta::AddVector(acc), Delta::AddVector(d)) => {
                        for i in 0..acc.len() {
                            neumaier(&mut acc[i], &mut p.comp[i], d[i]);
                        }
                    }
                    (Delta::AddCount(acc), Delta::AddCount(d)) => *acc += d,
                    (_, d @ Delta::Overwrite(_)) => {
                        p.delta = d;
                        p.comp.iter_mut().for_each(|c| *c = 0.0);
                    }
                    (cur, d) => panic!("mixed delta kinds on one key: {cur:?} then {d:?}"),
                }
            }
        }
        Ok(())
    }

    fn drain_sorted(&mut self) -> Vec<((u32, Key), Delta)> {
        self.sweeps_since_flush = 0;
        std::mem::take(&mut self.pending)
            .into_iter()
            .map(|(k, p)| (k, p.delta))
            .collect()
    }
}

#[inline]
fn neumaier(value: &mut f64, comp: &mut f64, delta: f64) {
    let d = delta + *comp;
    let sum = *value + d;
    *comp = if value.abs() >= d.abs() { (*value - sum) + d } else { (d - sum) + *value };
    *value = sum;
}

fn delta_bytes(key: &Key, d: &Delta) -> u64 {
    let payload = match d {
        Delta::AddScalar(_) | Delta::AddCount(_) => 8,
        Delta::AddVector(v) | Delta::Overwrite(v) => 8 * v.len() as u64,
    };
    8 * key.len() as u64 + payload
}

fn apply_delta(state: &mut ExecutionState, space: u32, key: &[u64], delta: &Delta) -> bool {
    let store = state.space_at_mut(space);
    match delta {
        Delta::AddScalar(d) => store.add(key, &[*d]),
        Delta::AddVector(d) => store.add(key, d),
        Delta::AddCount(d) => store.add(key, &[*d as f64]),
        Delta::Overwrite(v) => store.write(key, v),
    }
}

/// All-to-all: every replica applies every other partition's coalesced
/// deltas, in partition order, key-sorted. The emitting partition's own
/// replica already reflects its writes. Returns whether any replica changed.
pub fn flush_buffered(
    buffers: &mut [UpdateBuffer],
    replicas: &mut [ExecutionState],
    stats: &mut ExchangeStats,
) -> bool {
    let mut changed = false;
    for (b, buffer) in buffers.iter_mut().enumerate() {
        let entries = buffer.drain_sorted();
        stats.deltas_sent += buffer.deltas_recorded;
        buffer.deltas_recorded = 0;
        stats.keys_touched += entries.len() as u64;
        for ((space, key), delta) in &entries {
            stats.bytes_equivalent += delta_bytes(key, delta) * (replicas.len() as u64 - 1);
            for (r, replica) in replicas.iter_mut().enumerate() {
                if r != b {
                    changed |= apply_delta(replica, *space, key, delta);
                }
            }
        }
    }
    changed
}

/// Master reduction: all buffers merge into one update per key, which every
/// replica then applies net of its own contribution (`buffers[i]` and
/// `replicas[i]` belong to the same partition). Count deltas stay exact;
/// float totals re-associate within key-sorted order.
pub fn flush_master(
    buffers: &mut [UpdateBuffer],
    replicas: &mut [ExecutionState],
    _master: u32,
    stats: &mut ExchangeStats,
) -> bool {
    type Merged = BTreeMap<(u32, Key), (Delta, SmallVec<[f64; 4]>, Vec<(usize, Delta)>)>;
    let mut merged: Merged = BTreeMap::new();
    for (b, buffer) in buffers.iter_mut().enumerate() {
        stats.deltas_sent += buffer.deltas_recorded;
        buffer.deltas_recorded = 0;
        for ((space, key), delta) in buffer.drain_sorted() {
            stats.keys_touched += 1;
            match merged.entry((space, key)) {
                std::collections::btree_map::Entry::Vacant(v) => {
                    let width = match &delta {
                        Delta::AddVector(x) | Delta::Overwrite(x) => x.len(),
                        _ => 1,
                    };
                    v.insert((delta.clone(), SmallVec::from_elem(0.0, width), vec![(b, delta)]));
                }
                std::collections::btree_map::Entry::Occupied(mut o) => {
                    let (acc, comp, contribs) = o.get_mut();
                    match (acc, &delta) {
                        (Delta::AddScalar(a), Delta::AddScalar(d)) => neumaier(a, &mut comp[0], *d),
                        (Delta::AddVector(a), Delta::AddVector(d)) => {
                            for i in 0..a.len() {
                                neumaier(&mut a[i], &mut comp[i], d[i]);
                            }
                        }
                        (Delta::AddCount(a), Delta::AddCount(d)) => *a += d,
                        (acc @ Delta::Overwrite(_), Delta::Overwrite(_)) => {
                            *acc = delta.clone();
                        }
                        (a, d) => panic!("mixed delta kinds on one key: {a:?} then {d:?}"),
                    }
                    contribs.push((b, delta));
                }
            }
        }
    }
    let mut changed = false;
    for ((space, key), (total, _, contribs)) in &merged {
        stats.master_messages += 1;
        stats.bytes_equivalent += delta_bytes(key, total) * replicas.len() as u64;
        for (r, replica) in replicas.iter_mut().enumerate() {
            // apply the reduced update net of this replica's own contribution
            let own = contribs.iter().find(|(p, _)| *p == r);
            let net = match (total, own.map(|(_, d)| d)) {
                (Delta::AddScalar(t), Some(Delta::AddScalar(o))) => Delta::AddScalar(t - o),
                (Delta::AddVector(t), Some(Delta::AddVector(o))) => {
                    Delta::AddVector(t.iter().zip(o.iter()).map(|(a, b)| a - b).collect())
                }
                (Delta::AddCount(t), Some(Delta::AddCount(o))) => Delta::AddCount(t - o),
                (Delta::Overwrite(_), Some(Delta::Overwrite(_))) => continue,
                (t, _) => t.clone(),
            };
            changed |= apply_delta(replica, *space, key, &net);
        }
    }
    changed
}

/// Recomputes derived statistics spaces on every replica from authoritative
/// assignments. Counts come out exact; sums are compensated and identical on
/// every replica. Returns whether any replica's derived values changed.
pub fn flush_indirect(
    assertions: &[IndirectAssertion],
    replicas: &mut [ExecutionState],
    stats: &mut ExchangeStats,
) -> Result<bool, ExchangeError> {
    let mut changed = false;
    for a in assertions {
        let groups = a.groups as usize;
        let mut sizes = vec![0i64; groups];
        let dim = match (&a.derived_sum, replicas[0].space_opt(&a.derived_size)) {
            (_, None) => return Err(ExchangeError::AssertionUnsatisfiable(a.derived_size.clone())),
            (Some(sum_name), _) => match replicas[0].space_opt(sum_name) {
                Some(s) => s.dim(),
                None => return Err(ExchangeError::AssertionUnsatisfiable(sum_name.clone())),
            },
            (None, Some(_)) => 0,
        };
        let mut sums = vec![0.0f64; groups * dim];
        let mut comps = vec![0.0f64; groups * dim];

        // gather per-partition contributions in partition order
        for replica in replicas.iter() {
            match &a.assignment {
                DataSource::CellField(field) => {
                    let cells = replica
                        .cell_store(field)
                        .ok_or_else(|| ExchangeError::AssertionUnsatisfiable(field.clone()))?;
                    let assign: Vec<u64> = match &cells.data {
                        CellData::Index(v) => v.clone(),
                        CellData::Scalar(v) => v.iter().map(|&x| x as u64).collect(),
                        CellData::Vector { .. } => {
                            return Err(ExchangeError::AssertionUnsatisfiable(field.clone()))
                        }
                    };
                    let coords = match &a.coords {
                        Some(DataSource::CellField(cf)) => Some(
                            replica
                                .cell_store(cf)
                                .ok_or_else(|| ExchangeError::AssertionUnsatisfiable(cf.clone()))?,
                        ),
                        _ => None,
                    };
                    for (i, &m) in assign.iter().enumerate() {
                        let m = m as usize;
                        sizes[m] += 1;
                        if let Some(c) = coords {
                            let p = c.vector(i);
                            for j in 0..dim {
                                neumaier(&mut sums[m * dim + j], &mut comps[m * dim + j], p[j]);
                            }
                        }
                    }
                    stats.keys_touched += assign.len() as u64;
                    stats.bytes_equivalent += 8 * assign.len() as u64;
                }
                DataSource::Space(_) => {
                    // assignments live in a replicated space: gather once below
                }
            }
        }
        if let DataSource::Space(space) = &a.assignment {
            // replicas agree on the assignment space after the overwrite
            // flush; recompute from replica 0's copy
            let replica = &replicas[0];
            let assign = replica
                .space_opt(space)
                .ok_or_else(|| ExchangeError::AssertionUnsatisfiable(space.clone()))?;
            let coords = match &a.coords {
                Some(DataSource::Space(cs)) => Some(
                    replica
                        .space_opt(cs)
                        .ok_or_else(|| ExchangeError::AssertionUnsatisfiable(cs.clone()))?,
                ),
                _ => None,
            };
            let n = assign.scalar_contents();
            for (x, m) in n.iter().enumerate() {
                let m = *m as usize;
                sizes[m] += 1;
                if let Some(c) = coords {
                    let p = c.read(&[x as u64]);
                    for j in 0..dim {
                        neumaier(&mut sums[m * dim + j], &mut comps[m * dim + j], p[j]);
                    }
                }
            }
            stats.keys_touched += n.len() as u64;
            stats.bytes_equivalent += 8 * n.len() as u64;
        }

        // overwrite derived spaces identically on every replica
        for replica in replicas.iter_mut() {
            for m in 0..groups {
                changed |= replica
                    .space_mut(&a.derived_size)
                    .write(&[m as u64], &[sizes[m] as f64]);
                if let Some(sum_name) = &a.derived_sum {
                    changed |=
                        replica.space_mut(sum_name).write(&[m as u64], &sums[m * dim..(m + 1) * dim]);
                }
            }
        }
    }
    Ok(changed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{LoopKind, LoopNest, Program, SpaceDecl, TupleReservoir, TupleSchema};

    fn two_replicas() -> Vec<ExecutionState> {
        let r = TupleReservoir::from_tuples(
            "T",
            TupleSchema::indices(&["i", "j"]),
            &[crate::ir::Tuple::indices(&[0, 1])],
        )
        .unwrap();
        let program = Program::new(
            "x",
            vec![r],
            vec![SpaceDecl::scalar("PR", 1, 0.0).bounded(&[16])],
            LoopNest::flat(LoopKind::Forelem, "T", vec![]),
        );
        let mut states = vec![ExecutionState::new(&program), ExecutionState::new(&program)];
        for (i, s) in states.iter_mut().enumerate() {
            s.rng_seed = i as u64;
        }
        states
    }

    fn policies() -> ExchangePolicies {
        let mut p = ExchangePolicies::local_only(1);
        p.set(0, WirePolicy::Accumulate { count_like: false });
        p
    }

    #[test]
    fn additive_coalescing() {
        let mut buf = UpdateBuffer::new(0);
        let pol = policies();
        buf.record_delta(0, "PR", &[7], Delta::AddScalar(0.1), &pol).unwrap();
        buf.record_delta(0, "PR", &[7], Delta::AddScalar(0.2), &pol).unwrap();
        assert_eq!(buf.pending_len(), 1);
        match buf.pending_for(0, &[7]).unwrap() {
            Delta::AddScalar(v) => assert!((v - 0.3).abs() < 1e-15),
            other => panic!("unexpected delta {other:?}"),
        }
        assert_eq!(buf.deltas_recorded, 2);
    }

    #[test]
    fn distinct_keys_stay_distinct() {
        let mut buf = UpdateBuffer::new(0);
        let pol = policies();
        buf.record_delta(0, "SUM", &[1], Delta::AddVector(SmallVec::from_slice(&[1.0])), &pol)
            .unwrap();
        buf.record_delta(0, "SIZE", &[2], Delta::AddCount(1), &pol).unwrap();
        assert_eq!(buf.pending_len(), 2);
    }

    #[test]
    fn foreign_overwrite_rejected() {
        let mut buf = UpdateBuffer::new(0);
        let mut pol = ExchangePolicies::local_only(1);
        pol.set(0, WirePolicy::OwnerOverwrite);
        pol.set_owner_map(0, Arc::new(vec![1; 8]));
        let err = buf
            .record_delta(0, "M", &[3], Delta::Overwrite(SmallVec::from_slice(&[2.0])), &pol)
            .unwrap_err();
        assert!(matches!(err, ExchangeError::OwnershipViolation { owner: 1, partition: 0, .. }));
    }

    #[test]
    fn buffered_flush_converges_replicas() {
        let mut replicas = two_replicas();
        let pol = policies();
        let mut bufs = vec![UpdateBuffer::new(0), UpdateBuffer::new(1)];
        // each partition adds 1.0 locally and buffers the delta
        for (i, (b, r)) in bufs.iter_mut().zip(replicas.iter_mut()).enumerate() {
            r.space_mut("PR").add(&[7], &[1.0]);
            b.record_delta(0, "PR", &[7], Delta::AddScalar(1.0), &pol).unwrap();
            let _ = i;
        }
        let mut stats = ExchangeStats::default();
        let changed = flush_buffered(&mut bufs, &mut replicas, &mut stats);
        assert!(changed);
        for r in &replicas {
            assert_eq!(r.space("PR").read(&[7])[0], 2.0);
        }
        assert!(bufs.iter().all(UpdateBuffer::is_empty));
    }

    #[test]
    fn empty_buffers_are_a_noop() {
        let mut replicas = two_replicas();
        let mut bufs = vec![UpdateBuffer::new(0), UpdateBuffer::new(1)];
        let mut stats = ExchangeStats::default();
        assert!(!flush_buffered(&mut bufs, &mut replicas, &mut stats));
        assert_eq!(stats.keys_touched, 0);
    }

    #[test]
    fn master_matches_buffered() {
        let pol = policies();
        let mk = |replicas: &mut Vec<ExecutionState>| {
            let mut bufs = vec![UpdateBuffer::new(0), UpdateBuffer::new(1)];
            for (b, r) in bufs.iter_mut().zip(replicas.iter_mut()) {
                for k in [3u64, 7, 3] {
                    let d = 0.25 + b.partition as f64;
                    r.space_mut("PR").add(&[k], &[d]);
                    b.record_delta(0, "PR", &[k], Delta::AddScalar(d), &pol).unwrap();
                }
            }
            bufs
        };
        let mut ra = two_replicas();
        let mut ba = mk(&mut ra);
        let mut rb = two_replicas();
        let mut bb = mk(&mut rb);
        let mut stats = ExchangeStats::default();
        flush_buffered(&mut ba, &mut ra, &mut stats);
        let mut mstats = ExchangeStats::default();
        flush_master(&mut bb, &mut rb, 0, &mut mstats);
        for (a, b) in ra.iter().zip(&rb) {
            for k in 0..16u64 {
                let (x, y) = (a.space("PR").read(&[k])[0], b.space("PR").read(&[k])[0]);
                assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{x} vs {y}");
            }
        }
        // one reduced message per touched key
        assert_eq!(mstats.master_messages, 2);
    }
}
