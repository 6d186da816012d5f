//! Sampling-based synthesis: one MPS pass per T-budget list, wrapped in the outer loop
//! over tensor counts and attempts.

mod postprocess;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::mps::{build_mps, MpsError};
use crate::sampler::{decode, sample_with, SamplerError, SamplerOptions, Selection, SliceSpan, TailIndex};
use crate::tables::{cumulative_count, RewriteTable, TBand, UniqueTable};
use crate::unitary::{distance, rz, u3_rz_angles, zyz_decompose, GateId, GateSequence, Unitary2};

pub use postprocess::{postprocess, postprocess_with_table};

/// Candidates whose errors differ by less than this are tied and compared by cost.
const TIE_TOL: f64 = 1e-12;
const MAX_TIED: usize = 16;
const BRUTE_FORCE_LIMIT: u128 = 100_000_000;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Mps(#[from] MpsError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("budget of {budget} T exceeds the table (max T {max_t})")]
    BudgetNotCovered { budget: u8, max_t: u8 },
    #[error("search space of {0} tuples is too large to enumerate")]
    TooLarge(u128),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisConfig {
    /// Per-tensor T budgets; the first entry is searched exhaustively.
    pub t_budgets: Vec<u8>,
    pub min_tensors: usize,
    pub samples: u64,
    pub epsilon: Option<f64>,
    pub attempts: usize,
    pub seed: u64,
    pub selection: Selection,
    pub time_limit: Option<Duration>,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            t_budgets: vec![10, 10, 10],
            min_tensors: 1,
            samples: 40_000,
            epsilon: None,
            attempts: 1,
            seed: 0,
            selection: Selection::GreedyTail,
            time_limit: None,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.into()));
        if self.t_budgets.is_empty() {
            return bad("no T budgets");
        }
        if self.min_tensors == 0 || self.min_tensors > self.t_budgets.len() {
            return bad("min_tensors must lie in 1..=len(t_budgets)");
        }
        if self.samples == 0 {
            return bad("samples must be at least 1");
        }
        if self.attempts == 0 {
            return bad("attempts must be at least 1");
        }
        if let Some(e) = self.epsilon {
            if !(0.0..1.0).contains(&e) {
                return bad("epsilon must lie in [0, 1)");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthesisResult {
    pub sequence: GateSequence,
    pub error: f64,
    #[serde(skip)]
    pub realized: Unitary2,
    pub tensors_used: usize,
    pub samples_evaluated: usize,
    /// Sum of the budgets of the tensors used.
    pub t_budget: u32,
}

impl SynthesisResult {
    fn better_than(&self, other: &SynthesisResult) -> bool {
        if (self.error - other.error).abs() <= TIE_TOL {
            self.sequence.cmp_cost(&other.sequence).is_lt()
        } else {
            self.error < other.error
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthesisOutcome {
    pub best: SynthesisResult,
    /// False when an error threshold was given and not reached.
    pub below_threshold: bool,
    /// Best-so-far error after every iteration.
    pub history: Vec<f64>,
    pub timed_out: bool,
}

/// Output of [`Synthesizer::synthesize_via_rz_chain`].
#[derive(Debug, Clone, Serialize)]
pub struct RzChainResult {
    pub sequence: GateSequence,
    /// Distance of the joined sequence from the target.
    pub error: f64,
    /// The three rotation results in time order.
    pub parts: Vec<SynthesisResult>,
    /// Every rotation met `epsilon / 3`.
    pub all_met: bool,
}

/// Output of [`Synthesizer::min_t_trajectory`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub hits: Vec<Option<SynthesisResult>>,
    /// Lowest-error result of the whole run.
    pub best: SynthesisResult,
}

impl Trajectory {
    /// The hit for threshold `i`, or the overall best when it was never reached.
    pub fn result_or_best(&self, i: usize) -> &SynthesisResult {
        self.hits[i].as_ref().unwrap_or(&self.best)
    }
}

/// Settings for the minimum-T search.
#[derive(Debug, Clone, PartialEq)]
pub struct MinTOptions {
    /// Budget of a full tensor; the first tensor is searched exhaustively.
    pub tail_max_t: u8,
    pub max_tensors: usize,
    pub samples: u64,
    pub attempts: usize,
    pub seed: u64,
    pub time_limit: Option<Duration>,
}

impl Default for MinTOptions {
    fn default() -> Self {
        MinTOptions { tail_max_t: 10, max_tensors: 3, samples: 40_000, attempts: 1, seed: 0, time_limit: None }
    }
}

impl MinTOptions {
    /// Budget lists in order of increasing total T: `[0]`, `[1]`, ..., `[tail]`, then
    /// `[tail, 1]`, ..., `[tail, tail]`, `[tail, tail, 1]`, and so on. Each step raises
    /// the total by one T.
    pub fn schedule(&self) -> Vec<Vec<u8>> {
        let mut out: Vec<Vec<u8>> = (0..=self.tail_max_t).map(|b| vec![b]).collect();
        for n in 2..=self.max_tensors {
            for b in 1..=self.tail_max_t {
                let mut m = vec![self.tail_max_t; n - 1];
                m.push(b);
                out.push(m);
            }
        }
        out
    }
}

pub struct Synthesizer {
    table: Arc<UniqueTable>,
    rewrites: Arc<RewriteTable>,
    tails: Mutex<HashMap<u8, Arc<TailIndex>>>,
}

impl Synthesizer {
    pub fn new(table: Arc<UniqueTable>, rewrites: Arc<RewriteTable>) -> Self {
        Synthesizer { table, rewrites, tails: Mutex::new(HashMap::new()) }
    }

    pub fn table(&self) -> &UniqueTable {
        &self.table
    }

    pub fn rewrites(&self) -> &RewriteTable {
        &self.rewrites
    }

    pub fn postprocess(&self, seq: &GateSequence) -> GateSequence {
        postprocess_with_table(seq, &self.rewrites, &self.table)
    }

    fn span(&self, budget: u8) -> Result<SliceSpan, SynthError> {
        let max_t = self.table.max_t();
        let range = self.table.band_range(TBand::up_to(budget)).map_err(|_| SynthError::BudgetNotCovered { budget, max_t })?;
        Ok(SliceSpan { offset: range.start, len: range.len() })
    }

    fn tail_index(&self, budget: u8) -> Arc<TailIndex> {
        let mut tails = self.tails.lock().unwrap_or_else(|e| e.into_inner());
        tails
            .entry(budget)
            .or_insert_with(|| {
                let n = cumulative_count(budget as u32) as usize;
                Arc::new(TailIndex::new(&self.table.matrices()[..n]))
            })
            .clone()
    }

    /// One MPS build and sampling pass. `budgets[0]` is the last tensor in time and is
    /// the one completed greedily.
    pub fn synthesize_inner(
        &self,
        target: &Unitary2,
        budgets: &[u8],
        k: u64,
        seed: u64,
        selection: Selection,
    ) -> Result<SynthesisResult, SynthError> {
        if budgets.is_empty() || k == 0 {
            return Err(SynthError::InvalidConfig("need at least one budget and one sample".into()));
        }
        let node_budgets: Vec<u8> = budgets.iter().rev().copied().collect();
        let spans = node_budgets.iter().map(|&b| self.span(b)).collect::<Result<Vec<_>, _>>()?;
        let matrices = self.table.matrices();
        let slices: Vec<&[Unitary2]> = spans.iter().map(|s| &matrices[s.offset..s.offset + s.len]).collect();
        let mps = build_mps(&slices, target)?;
        let tail = (selection == Selection::GreedyTail).then(|| self.tail_index(budgets[0]));
        let opts = SamplerOptions { selection, exponent: 1.0 };
        let batch = sample_with(&mps, k, seed, &opts, tail.as_deref())?;

        let mut ranked: Vec<(f64, &[u32])> =
            batch.samples.iter().map(|s| (s.trace_value(), s.indices.as_slice())).collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        let top = ranked[0].0;
        let mut best: Option<SynthesisResult> = None;
        for &(tv, indices) in ranked.iter().take(MAX_TIED) {
            if (top - tv) > TIE_TOL {
                break;
            }
            let raw = decode(indices, &spans, &self.table)?;
            let sequence = self.postprocess(&raw);
            let realized = sequence.matrix();
            let cand = SynthesisResult {
                error: distance(target, &realized),
                sequence,
                realized,
                tensors_used: budgets.len(),
                samples_evaluated: batch.samples.len(),
                t_budget: budgets.iter().map(|&b| b as u32).sum(),
            };
            if best.as_ref().map_or(true, |b| cand.better_than(b)) {
                best = Some(cand);
            }
        }
        Ok(best.expect("at least one sample"))
    }

    /// The outer loop: tensor counts `l..=len(m)`, `attempts` seeds each, stopping once
    /// the error drops below `epsilon`.
    pub fn synthesize(&self, target: &Unitary2, config: &SynthesisConfig) -> Result<SynthesisOutcome, SynthError> {
        config.validate()?;
        let schedule: Vec<Vec<u8>> =
            (config.min_tensors..=config.t_budgets.len()).map(|i| config.t_budgets[..i].to_vec()).collect();
        let run = ScheduleRun {
            samples: config.samples,
            attempts: config.attempts,
            seed: config.seed,
            selection: config.selection,
            deadline: config.time_limit.map(|d| Instant::now() + d),
        };
        let mut thresholds: Vec<f64> = config.epsilon.into_iter().collect();
        let (outcome, _) = self.run_schedule(target, &schedule, &run, &mut thresholds)?;
        Ok(outcome)
    }

    /// Smallest-budget result with error below `epsilon` along [`MinTOptions::schedule`].
    pub fn synthesize_min_t(&self, target: &Unitary2, epsilon: f64, opts: &MinTOptions) -> Result<SynthesisOutcome, SynthError> {
        let mut thresholds = vec![epsilon];
        let (outcome, _) = self.run_schedule(target, &opts.schedule(), &opts.run(), &mut thresholds)?;
        Ok(outcome)
    }

    /// Baseline for U3 targets: the three z-rotations of the `Rz H Rz H Rz` form are
    /// synthesized separately at `epsilon / 3` and joined with the two H gates.
    pub fn synthesize_via_rz_chain(&self, target: &Unitary2, epsilon: f64, opts: &MinTOptions) -> Result<RzChainResult, SynthError> {
        let angles = u3_rz_angles(zyz_decompose(target));
        let mut sequence = GateSequence::new();
        let mut parts = Vec::with_capacity(3);
        let mut all_met = true;
        for (i, &a) in angles.iter().enumerate() {
            if i > 0 {
                sequence.push(GateId::H);
            }
            let out = self.synthesize_min_t(&rz(a), epsilon / 3.0, opts)?;
            all_met &= out.below_threshold;
            sequence.extend_from(&out.best.sequence);
            parts.push(out.best);
        }
        let error = distance(target, &sequence.matrix());
        Ok(RzChainResult { sequence, error, parts, all_met })
    }

    /// One escalating run serving several thresholds: `hits[i]` is the first result
    /// with error below `thresholds[i]`, if any.
    pub fn min_t_trajectory(&self, target: &Unitary2, thresholds: &[f64], opts: &MinTOptions) -> Result<Trajectory, SynthError> {
        let mut pending = thresholds.to_vec();
        let (outcome, hits) = self.run_schedule(target, &opts.schedule(), &opts.run(), &mut pending)?;
        let hits = thresholds
            .iter()
            .map(|t| hits.iter().find(|(thr, _)| thr == t).map(|(_, r)| r.clone()))
            .collect();
        Ok(Trajectory { hits, best: outcome.best })
    }

    /// Runs the schedule until every threshold is met (all iterations when there are
    /// none), returning the overall best and the first hit for each threshold.
    fn run_schedule(
        &self,
        target: &Unitary2,
        schedule: &[Vec<u8>],
        run: &ScheduleRun,
        thresholds: &mut Vec<f64>,
    ) -> Result<(SynthesisOutcome, Vec<(f64, SynthesisResult)>), SynthError> {
        let epsilon = thresholds.iter().copied().fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.min(t))));
        let mut best: Option<SynthesisResult> = None;
        let mut history = Vec::new();
        let mut hits = Vec::new();
        let mut timed_out = false;
        'outer: for budgets in schedule {
            for j in 0..run.attempts {
                if best.is_some() && run.deadline.is_some_and(|d| Instant::now() >= d) {
                    timed_out = true;
                    break 'outer;
                }
                let res = self.synthesize_inner(target, budgets, run.samples, run.seed.wrapping_add(j as u64), run.selection)?;
                if best.as_ref().map_or(true, |b| res.better_than(b)) {
                    best = Some(res);
                }
                let b = best.as_ref().expect("set above");
                history.push(b.error);
                thresholds.retain(|&t| {
                    let hit = b.error < t;
                    if hit {
                        hits.push((t, b.clone()));
                    }
                    !hit
                });
                if epsilon.is_some() && thresholds.is_empty() {
                    break 'outer;
                }
            }
        }
        let best = best.ok_or_else(|| SynthError::InvalidConfig("empty schedule".into()))?;
        let below_threshold = epsilon.map_or(true, |e| best.error < e);
        Ok((SynthesisOutcome { best, below_threshold, history, timed_out }, hits))
    }

    /// Exact argmax of the trace value over every index tuple.
    pub fn brute_force_best(&self, target: &Unitary2, budgets: &[u8]) -> Result<SynthesisResult, SynthError> {
        if budgets.is_empty() {
            return Err(SynthError::InvalidConfig("no budgets".into()));
        }
        let node_budgets: Vec<u8> = budgets.iter().rev().copied().collect();
        let spans = node_budgets.iter().map(|&b| self.span(b)).collect::<Result<Vec<_>, _>>()?;
        let size: u128 = spans.iter().map(|s| s.len as u128).product();
        if size > BRUTE_FORCE_LIMIT {
            return Err(SynthError::TooLarge(size));
        }
        let mut search = BruteForce {
            mats: self.table.matrices(),
            spans: &spans,
            udag: target.adjoint(),
            best_tv: -1.0,
            best_idx: vec![0; spans.len()],
            cur: vec![0; spans.len()],
        };
        search.recurse(0, Unitary2::IDENTITY);
        let raw = decode(&search.best_idx, &spans, &self.table)?;
        let realized = raw.matrix();
        Ok(SynthesisResult {
            error: distance(target, &realized),
            sequence: raw,
            realized,
            tensors_used: budgets.len(),
            samples_evaluated: size as usize,
            t_budget: budgets.iter().map(|&b| b as u32).sum(),
        })
    }
}

struct ScheduleRun {
    samples: u64,
    attempts: usize,
    seed: u64,
    selection: Selection,
    deadline: Option<Instant>,
}

impl MinTOptions {
    fn run(&self) -> ScheduleRun {
        ScheduleRun {
            samples: self.samples,
            attempts: self.attempts,
            seed: self.seed,
            selection: Selection::GreedyTail,
            deadline: self.time_limit.map(|d| Instant::now() + d),
        }
    }
}

struct BruteForce<'a> {
    mats: &'a [Unitary2],
    spans: &'a [SliceSpan],
    udag: Unitary2,
    best_tv: f64,
    best_idx: Vec<u32>,
    cur: Vec<u32>,
}

impl BruteForce<'_> {
    fn recurse(&mut self, node: usize, prefix: Unitary2) {
        let span = self.spans[node];
        let slice = &self.mats[span.offset..span.offset + span.len];
        if node + 1 == self.spans.len() {
            // Tr(U^dagger M P) = Tr(G M) with G = P U^dagger.
            let g = prefix * self.udag;
            for (x, m) in slice.iter().enumerate() {
                let tr: Complex64 = g.0[0] * m.0[0] + g.0[1] * m.0[2] + g.0[2] * m.0[1] + g.0[3] * m.0[3];
                let tv = tr.norm() / 2.0;
                if tv > self.best_tv {
                    self.best_tv = tv;
                    self.cur[node] = x as u32;
                    self.best_idx.clone_from(&self.cur);
                }
            }
            return;
        }
        for (x, m) in slice.iter().enumerate() {
            self.cur[node] = x as u32;
            self.recurse(node + 1, *m * prefix);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tables::cached_table;
    use crate::unitary::{haar_random_unitary, rz, GateId};

    fn synth(max_t: u8) -> Synthesizer {
        let (t, r) = cached_table(max_t);
        Synthesizer::new(Arc::new(t.clone()), Arc::new(r.clone()))
    }

    #[test]
    fn exact_hits() {
        let s = synth(6);
        let h = s.synthesize_inner(&GateId::H.matrix(), &[6], 100, 0, Selection::GreedyTail).unwrap();
        assert_eq!(h.sequence.to_string(), "H");
        assert!(h.error < 1e-12);
        let id = s.synthesize(&Unitary2::IDENTITY, &SynthesisConfig { t_budgets: vec![6, 6], ..Default::default() }).unwrap();
        assert!(id.best.sequence.is_empty());
        assert!(id.best.error < 1e-7);
        let cfg = SynthesisConfig { t_budgets: vec![6, 6], epsilon: Some(1e-9), samples: 50, ..Default::default() };
        let t = s.synthesize(&rz(std::f64::consts::FRAC_PI_4), &cfg).unwrap();
        assert_eq!(t.best.sequence.to_string(), "T");
        assert_eq!(t.history.len(), 1);
        assert!(t.below_threshold);
    }

    #[test]
    fn single_tensor_matches_lookup() {
        let s = synth(6);
        for seed in 0..10 {
            let u = haar_random_unitary(seed);
            let r = s.synthesize_inner(&u, &[6], 4560, seed, Selection::TopK).unwrap();
            let idx = s.table().lookup_nearest(&u);
            assert_eq!(r.sequence, s.table().entry(idx).sequence);
            let g = s.synthesize_inner(&u, &[6], 3, seed, Selection::GreedyTail).unwrap();
            assert_eq!(g.sequence, r.sequence);
        }
    }

    #[test]
    fn planted_product_is_recovered() {
        let s = synth(6);
        let m = s.table().matrices();
        let u = m[1234] * m[4000];
        let r = s.synthesize_inner(&u, &[6, 6], 40_000, 1, Selection::GreedyTail).unwrap();
        assert!(r.error < 1e-9, "{}", r.error);
        let b = s.brute_force_best(&u, &[2, 2]).unwrap();
        assert!(b.error <= s.synthesize_inner(&u, &[2, 2], 500, 1, Selection::GreedyTail).unwrap().error + 1e-12);
    }

    #[test]
    fn result_invariants_and_determinism() {
        let s = synth(6);
        let u = haar_random_unitary(77);
        let cfg = SynthesisConfig { t_budgets: vec![6, 4, 4], samples: 2000, attempts: 2, seed: 5, ..Default::default() };
        let a = s.synthesize(&u, &cfg).unwrap();
        let b = s.synthesize(&u, &cfg).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.history.len(), 6);
        assert!(a.history.windows(2).all(|w| w[1] <= w[0]));
        assert!((a.best.error - distance(&u, &a.best.sequence.matrix())).abs() < 1e-10);
        assert!(a.best.sequence.t_count() as u32 <= a.best.t_budget);
    }

    #[test]
    fn brute_force_single_slice_is_lookup() {
        let s = synth(4);
        let u = haar_random_unitary(3);
        let b = s.brute_force_best(&u, &[4]).unwrap();
        assert_eq!(b.sequence, s.table().entry(s.table().lookup_nearest(&u)).sequence);
        assert!(matches!(s.brute_force_best(&u, &[4, 4, 4, 4]), Err(SynthError::TooLarge(_))));
        assert!(matches!(s.brute_force_best(&u, &[5]), Err(SynthError::BudgetNotCovered { .. })));
    }

    #[test]
    fn min_t_schedule_and_trajectory() {
        let s = synth(6);
        let opts = MinTOptions { tail_max_t: 6, max_tensors: 2, samples: 2000, ..Default::default() };
        let schedule = opts.schedule();
        assert_eq!(schedule.len(), 13);
        assert_eq!(schedule[7], vec![6, 1]);
        let totals: Vec<u32> = schedule.iter().map(|m| m.iter().map(|&b| b as u32).sum()).collect();
        assert!(totals.windows(2).all(|w| w[1] == w[0] + 1));
        let u = haar_random_unitary(8);
        let thresholds = [0.2, 0.1, 0.05];
        let traj = s.min_t_trajectory(&u, &thresholds, &opts).unwrap();
        for (thr, hit) in thresholds.iter().zip(&traj.hits) {
            let direct = s.synthesize_min_t(&u, *thr, &opts).unwrap();
            match hit {
                Some(r) => {
                    assert!(r.error < *thr);
                    assert_eq!(&direct.best, r);
                }
                None => assert!(!direct.below_threshold),
            }
        }
        assert!(traj.hits.iter().flatten().all(|h| h.error >= traj.best.error));
    }

    #[test]
    fn rz_chain_matches_target() {
        let s = synth(6);
        let opts = MinTOptions { tail_max_t: 6, max_tensors: 2, samples: 2000, ..Default::default() };
        let u = haar_random_unitary(21);
        let r = s.synthesize_via_rz_chain(&u, 0.3, &opts).unwrap();
        assert_eq!(r.parts.len(), 3);
        assert!(r.sequence.count(GateId::H) >= 2);
        let bound: f64 = r.parts.iter().map(|p| p.error).sum();
        assert!(r.error <= bound + 1e-9);
        assert!((r.error - distance(&u, &r.sequence.matrix())).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_config() {
        let s = synth(2);
        let u = haar_random_unitary(1);
        for cfg in [
            SynthesisConfig { t_budgets: vec![], ..Default::default() },
            SynthesisConfig { t_budgets: vec![2], min_tensors: 2, ..Default::default() },
            SynthesisConfig { t_budgets: vec![2], samples: 0, ..Default::default() },
            SynthesisConfig { t_budgets: vec![2], epsilon: Some(1.5), ..Default::default() },
        ] {
            assert!(matches!(s.synthesize(&u, &cfg), Err(SynthError::InvalidConfig(_))));
        }
        let cfg = SynthesisConfig { t_budgets: vec![3], ..Default::default() };
        assert!(matches!(s.synthesize(&u, &cfg), Err(SynthError::BudgetNotCovered { .. })));
    }
}
