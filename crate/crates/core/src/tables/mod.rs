//! Exhaustive tables of distinct Clifford+T unitaries ordered by T count.
//!
//! Entries are stored contiguously in enumeration order, so the entries with T count at
//! most `m` form a prefix of the table. The position of an entry is its physical index.

mod io;

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;
use std::sync::OnceLock;

use num_complex::Complex64;
use thiserror::Error;

use crate::unitary::{matrix_of, trace_value, Cost, GateId, GateSequence, Unitary2};

pub use io::{load_table, save_table, table_from_bytes, table_to_bytes, verify_table, FORMAT_VERSION};

/// Entries closer than this in trace value are the same unitary.
pub const DEDUP_TOL: f64 = 1e-9;
/// Longest rewrite key recorded during enumeration.
pub const MAX_REWRITE_KEY: usize = 16;
/// Rough per-entry footprint used for the memory guard.
const BYTES_PER_ENTRY: u64 = 256;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("table with max T count {max_t} needs about {estimate} bytes, above the cap of {cap}")]
    BudgetExceeded { max_t: u8, estimate: u64, cap: u64 },
    #[error("corrupt table file: {0}")]
    Corrupt(String),
    #[error("unsupported table format version {0}")]
    UnsupportedVersion(u32),
    #[error("T band {lo}..={hi} is outside the table (max T {max_t})")]
    BandOutOfRange { lo: u8, hi: u8, max_t: u8 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Closed interval of T counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TBand {
    pub lo: u8,
    pub hi: u8,
}

impl TBand {
    pub fn up_to(hi: u8) -> Self {
        TBand { lo: 0, hi }
    }
}

/// Unitary with its global phase fixed: the first entry of magnitude above `1e-9` is
/// real and positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalMatrix(pub Unitary2);

impl CanonicalMatrix {
    pub fn new(u: &Unitary2) -> Self {
        let pivot = u.0.iter().find(|z| z.norm() > 1e-9).copied().unwrap_or(Complex64::new(1.0, 0.0));
        let phase = pivot.conj() / pivot.norm();
        CanonicalMatrix(u.scale(phase))
    }

    /// Hash of the entries rounded to six decimals.
    pub fn fingerprint(&self) -> u64 {
        let mut h = FNV_OFFSET;
        for z in self.0 .0 {
            for part in [z.re, z.im] {
                let q = (part * 1e6).round() as i64;
                h = fnv1a(h, &q.to_le_bytes());
            }
        }
        h
    }
}

pub(crate) const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;

pub(crate) fn fnv1a(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableEntry {
    pub sequence: GateSequence,
    pub t_count: u8,
}

/// Map from a gate word to a strictly cheaper word for the same unitary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RewriteTable {
    rules: BTreeMap<Vec<GateId>, Vec<GateId>>,
    max_key_len: usize,
}

impl RewriteTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `from -> to` when `to` is strictly cheaper; keeps the cheaper target on
    /// conflicts.
    pub fn insert(&mut self, from: &[GateId], to: &[GateId]) -> bool {
        if Cost::of(to) >= Cost::of(from) {
            return false;
        }
        match self.rules.get(from) {
            Some(existing) if Cost::of(existing) <= Cost::of(to) => false,
            _ => {
                self.max_key_len = self.max_key_len.max(from.len());
                self.rules.insert(from.to_vec(), to.to_vec());
                true
            }
        }
    }

    pub fn get(&self, key: &[GateId]) -> Option<&[GateId]> {
        self.rules.get(key).map(|v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn max_key_len(&self) -> usize {
        self.max_key_len
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[GateId], &[GateId])> {
        self.rules.iter().map(|(k, v)| (k.as_slice(), v.as_slice()))
    }
}

/// Phase-deduplicated Clifford+T unitaries with T count up to `max_t`.
#[derive(Debug, Clone)]
pub struct UniqueTable {
    max_t: u8,
    matrices: Vec<Unitary2>,
    entries: Vec<TableEntry>,
    /// `t_offsets[t]..t_offsets[t + 1]` holds the entries with exactly `t` T gates.
    t_offsets: Vec<usize>,
    index: HashMap<u64, Vec<u32>>,
}

impl PartialEq for UniqueTable {
    fn eq(&self, other: &Self) -> bool {
        self.max_t == other.max_t && self.matrices == other.matrices && self.entries == other.entries
    }
}

impl UniqueTable {
    fn empty(max_t: u8) -> Self {
        UniqueTable { max_t, matrices: Vec::new(), entries: Vec::new(), t_offsets: vec![0], index: HashMap::new() }
    }

    /// Appends an entry. Entries must arrive with non-decreasing T count.
    fn push(&mut self, matrix: CanonicalMatrix, sequence: GateSequence) -> usize {
        let t = sequence.t_count();
        while self.t_offsets.len() <= t + 1 {
            let end = self.entries.len();
            self.t_offsets.push(end);
        }
        let idx = self.entries.len();
        self.index.entry(matrix.fingerprint()).or_default().push(idx as u32);
        self.matrices.push(matrix.0);
        self.entries.push(TableEntry { sequence, t_count: t as u8 });
        *self.t_offsets.last_mut().unwrap() = self.entries.len();
        idx
    }

    fn finish_offsets(&mut self) {
        let end = self.entries.len();
        while self.t_offsets.len() < self.max_t as usize + 2 {
            self.t_offsets.push(end);
        }
    }

    pub fn max_t(&self) -> u8 {
        self.max_t
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The stacked `[n, 2, 2]` tensor of canonical matrices.
    pub fn matrices(&self) -> &[Unitary2] {
        &self.matrices
    }

    pub fn entries(&self) -> &[TableEntry] {
        &self.entries
    }

    pub fn entry(&self, idx: usize) -> &TableEntry {
        &self.entries[idx]
    }

    pub fn matrix(&self, idx: usize) -> &Unitary2 {
        &self.matrices[idx]
    }

    /// Physical index range of the entries whose T count lies in `band`.
    pub fn band_range(&self, band: TBand) -> Result<Range<usize>, TableError> {
        if band.lo > band.hi || band.hi > self.max_t {
            return Err(TableError::BandOutOfRange { lo: band.lo, hi: band.hi, max_t: self.max_t });
        }
        Ok(self.t_offsets[band.lo as usize]..self.t_offsets[band.hi as usize + 1])
    }

    /// Number of entries with exactly `t` T gates.
    pub fn count_with_t(&self, t: u8) -> usize {
        if t > self.max_t {
            return 0;
        }
        self.t_offsets[t as usize + 1] - self.t_offsets[t as usize]
    }

    /// Physical index of the entry equal to `u` up to phase.
    pub fn find(&self, u: &Unitary2) -> Option<usize> {
        let canon = CanonicalMatrix::new(u);
        self.index
            .get(&canon.fingerprint())?
            .iter()
            .map(|&i| i as usize)
            .find(|&i| trace_value(&self.matrices[i], u) > 1.0 - DEDUP_TOL)
    }

    /// Entry with maximal trace value against `target`, ties broken by cost.
    pub fn lookup_nearest(&self, target: &Unitary2) -> usize {
        self.lookup_nearest_in(target, 0..self.len())
    }

    pub fn lookup_nearest_in(&self, target: &Unitary2, range: Range<usize>) -> usize {
        let mut best = range.start;
        let mut best_tv = f64::NEG_INFINITY;
        for i in range {
            let tv = trace_value(target, &self.matrices[i]);
            if tv > best_tv + 1e-12
                || (tv > best_tv - 1e-12 && self.entries[i].sequence.cost() < self.entries[best].sequence.cost())
            {
                best = i;
                best_tv = best_tv.max(tv);
            }
        }
        best
    }
}

/// Exact number of distinct unitaries with T count exactly `t`.
pub fn count_with_t_count(t: u32) -> u64 {
    if t == 0 {
        24
    } else {
        24 * 3 * (1u64 << (t - 1))
    }
}

/// Cumulative count `24 (3 * 2^t - 2)` of unitaries with T count at most `t`.
pub fn cumulative_count(t: u32) -> u64 {
    24 * (3 * (1u64 << t) - 2)
}

pub fn estimate_table_bytes(max_t: u8) -> u64 {
    cumulative_count(max_t as u32).saturating_mul(BYTES_PER_ENTRY)
}

#[derive(Debug, Clone, Copy)]
pub struct EnumerationOptions {
    pub memory_cap_bytes: u64,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions { memory_cap_bytes: 4 << 30 }
    }
}

/// The 24 single-qubit Cliffords with a cheapest word for each, identity first.
pub fn clifford_group() -> &'static [(Unitary2, GateSequence)] {
    static GROUP: OnceLock<Vec<(Unitary2, GateSequence)>> = OnceLock::new();
    GROUP.get_or_init(enumerate_cliffords)
}

fn enumerate_cliffords() -> Vec<(Unitary2, GateSequence)> {
    let letters = [GateId::H, GateId::S, GateId::X, GateId::Y, GateId::Z];
    let mut words: Vec<Vec<GateId>> = vec![vec![]];
    let mut frontier: Vec<Vec<GateId>> = vec![vec![]];
    for _ in 0..5 {
        let mut next = Vec::new();
        for w in &frontier {
            for &g in &letters {
                let mut w2 = w.clone();
                w2.push(g);
                next.push(w2);
            }
        }
        words.extend(next.iter().cloned());
        frontier = next;
    }
    words.sort_by(|a, b| Cost::of(a).cmp(&Cost::of(b)).then_with(|| a.cmp(b)));
    let mut group: Vec<(Unitary2, GateSequence)> = Vec::with_capacity(24);
    for w in words {
        let m = matrix_of(&w);
        if !group.iter().any(|(u, _)| trace_value(u, &m) > 1.0 - DEDUP_TOL) {
            group.push((CanonicalMatrix::new(&m).0, GateSequence(w)));
        }
    }
    group
}

/// Enumerates all distinct Clifford+T unitaries with T count at most `max_t`, keeping a
/// cheapest word for each, and collects rewrite rules for every costlier word seen.
pub fn enumerate_table(max_t: u8, opts: EnumerationOptions) -> Result<(UniqueTable, RewriteTable), TableError> {
    let estimate = estimate_table_bytes(max_t);
    if max_t > 30 || estimate > opts.memory_cap_bytes {
        return Err(TableError::BudgetExceeded { max_t, estimate, cap: opts.memory_cap_bytes });
    }
    let cliffords = clifford_group();
    let mut table = UniqueTable::empty(max_t);
    let mut rewrites = RewriteTable::new();
    for (u, w) in cliffords {
        table.push(CanonicalMatrix(*u), w.clone());
    }
    let t_mat = GateId::T.matrix();
    let mut frontier = 0..table.len();
    for _t in 1..=max_t {
        let level_start = table.len();
        for m in frontier.clone() {
            let base = t_mat * table.matrices[m];
            let mut base_seq = table.entries[m].sequence.clone();
            base_seq.push(GateId::T);
            for (cu, cw) in cliffords {
                let cand = *cu * base;
                let mut cand_seq = base_seq.clone();
                cand_seq.extend_from(cw);
                match table.find(&cand) {
                    None => {
                        table.push(CanonicalMatrix::new(&cand), cand_seq);
                    }
                    Some(idx) => {
                        let existing = &table.entries[idx].sequence;
                        if cand_seq.cmp_cost(existing).is_lt() {
                            debug_assert!(idx >= level_start);
                            if existing.len() <= MAX_REWRITE_KEY {
                                rewrites.insert(&existing.0.clone(), &cand_seq.0);
                            }
                            table.entries[idx].sequence = cand_seq;
                        } else if cand_seq.len() <= MAX_REWRITE_KEY {
                            rewrites.insert(&cand_seq.0, &existing.0.clone());
                        }
                    }
                }
            }
        }
        frontier = level_start..table.len();
    }
    table.finish_offsets();
    Ok((table, rewrites))
}

/// Table cache shared by the process, keyed by `max_t`.
pub fn cached_table(max_t: u8) -> &'static (UniqueTable, RewriteTable) {
    static CACHE: OnceLock<std::sync::Mutex<HashMap<u8, &'static (UniqueTable, RewriteTable)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard.entry(max_t).or_insert_with(|| {
        let built = enumerate_table(max_t, EnumerationOptions::default()).expect("table within budget");
        Box::leak(Box::new(built))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unitary::{distance, haar_random_unitary};
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    #[test]
    fn clifford_group_is_closed() {
        let g = clifford_group();
        assert_eq!(g.len(), 24);
        assert!(g[0].1.is_empty());
        for (a, _) in g {
            for (b, _) in g {
                let p = *a * *b;
                assert!(g.iter().any(|(u, _)| trace_value(u, &p) > 1.0 - 1e-9));
            }
        }
        // Cheapest words: Paulis are free, and H and S need one non-Pauli gate.
        assert!(g.iter().filter(|(_, w)| w.cost().clifford == 0).count() == 4);
        assert!(g.iter().all(|(_, w)| w.cost().clifford <= 3));
    }

    #[test]
    fn counting_law() {
        let (table, _) = enumerate_table(6, EnumerationOptions::default()).unwrap();
        for t in 0..=6u8 {
            assert_eq!(table.count_with_t(t) as u64, count_with_t_count(t as u32), "t = {t}");
        }
        assert_eq!(table.len() as u64, cumulative_count(6));
        assert_eq!(table.len(), 4560);
    }

    #[test]
    fn entries_match_their_words() {
        let (table, _) = enumerate_table(4, EnumerationOptions::default()).unwrap();
        for (i, e) in table.entries().iter().enumerate() {
            assert!(distance(&e.sequence.matrix(), table.matrix(i)) < 1e-7);
            assert_eq!(e.sequence.t_count(), e.t_count as usize);
            assert_eq!(table.find(&e.sequence.matrix()), Some(i));
        }
        // Pairwise distinct up to phase.
        for i in 0..table.len() {
            for j in 0..i {
                assert!(trace_value(table.matrix(i), table.matrix(j)) < 1.0 - 1e-9);
            }
        }
    }

    /// Uniform-cost search over raw gate strings; the first time a unitary is settled its
    /// cost is minimal.
    fn min_costs_by_search(max_t: usize) -> Vec<(Unitary2, Cost)> {
        let mut settled: Vec<(Unitary2, Cost)> = Vec::new();
        let mut heap = BinaryHeap::new();
        let mut store: Vec<Vec<GateId>> = vec![vec![]];
        heap.push(Reverse((Cost::of(&[]), 0usize)));
        while let Some(Reverse((cost, wi))) = heap.pop() {
            let word = store[wi].clone();
            let m = matrix_of(&word);
            if settled.iter().any(|(u, _)| trace_value(u, &m) > 1.0 - 1e-9) {
                continue;
            }
            settled.push((m, cost));
            for g in GateId::ALL {
                let mut w = word.clone();
                w.push(g);
                let c = Cost::of(&w);
                if c.t <= max_t {
                    store.push(w);
                    heap.push(Reverse((c, store.len() - 1)));
                }
            }
        }
        settled
    }

    #[test]
    fn stored_words_are_cheapest() {
        let (table, _) = enumerate_table(3, EnumerationOptions::default()).unwrap();
        let oracle = min_costs_by_search(3);
        assert_eq!(oracle.len(), table.len());
        for (u, cost) in oracle {
            let idx = table.find(&u).expect("oracle unitary in table");
            assert_eq!(table.entry(idx).sequence.cost(), cost);
        }
    }

    #[test]
    fn rewrites_are_sound() {
        let (_, rewrites) = enumerate_table(4, EnumerationOptions::default()).unwrap();
        assert!(!rewrites.is_empty());
        for (k, v) in rewrites.iter() {
            assert!(k.len() <= MAX_REWRITE_KEY);
            assert!(Cost::of(v) < Cost::of(k));
            assert!(distance(&matrix_of(k), &matrix_of(v)) < 1e-7);
        }
    }

    #[test]
    fn lookup_nearest_matches_brute_force() {
        let (table, _) = enumerate_table(5, EnumerationOptions::default()).unwrap();
        for seed in 0..10 {
            let u = haar_random_unitary(seed);
            let best = table.lookup_nearest(&u);
            let best_tv = trace_value(&u, table.matrix(best));
            for m in table.matrices() {
                assert!(trace_value(&u, m) <= best_tv + 1e-12);
            }
        }
    }

    #[test]
    fn band_ranges() {
        let (table, _) = enumerate_table(3, EnumerationOptions::default()).unwrap();
        assert_eq!(table.band_range(TBand::up_to(0)).unwrap(), 0..24);
        assert_eq!(table.band_range(TBand::up_to(2)).unwrap(), 0..240);
        assert_eq!(table.band_range(TBand { lo: 2, hi: 3 }).unwrap(), 96..528);
        assert!(table.band_range(TBand::up_to(4)).is_err());
    }

    #[test]
    fn budget_guard() {
        let opts = EnumerationOptions { memory_cap_bytes: 1 << 20 };
        assert!(matches!(enumerate_table(14, opts), Err(TableError::BudgetExceeded { .. })));
    }

    #[test]
    fn enumeration_is_deterministic() {
        let a = enumerate_table(5, EnumerationOptions::default()).unwrap();
        let b = enumerate_table(5, EnumerationOptions::default()).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}
