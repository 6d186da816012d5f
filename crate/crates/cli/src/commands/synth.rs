use std::fmt::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use tnsynth::synth::SynthesisOutcome;
use tnsynth::unitary::{haar_random_unitary, Unitary2};

use crate::context::{
    load_tables, par_map, parse_unitary_inline, parse_unitary_json, rz_unitary, target_seed, u3_unitary, write_output,
    LoadedTables, ManifestBuilder, SCHEMA,
};
use crate::error::CliError;
use crate::{SearchArgs, SynthArgs};

/// Runs the configured search on one target.
pub fn synthesize(tables: &LoadedTables, search: &SearchArgs, target: &Unitary2, seed: u64) -> Result<SynthesisOutcome, CliError> {
    if search.min_t {
        let eps = search.epsilon.ok_or_else(|| CliError::Usage("--min-t needs --epsilon".into()))?;
        Ok(tables.synth.synthesize_min_t(target, eps, &search.min_t_options(seed, tables.synth.table().max_t())?)?)
    } else {
        Ok(tables.synth.synthesize(target, &search.config(seed, tables.synth.table().max_t())?)?)
    }
}

#[derive(Serialize)]
struct SynthJson<'a> {
    schema: u32,
    sequence: String,
    t_count: usize,
    clifford_count: usize,
    length: usize,
    distance: f64,
    below_threshold: bool,
    timed_out: bool,
    tensors_used: usize,
    t_budget: u32,
    samples_evaluated: usize,
    history: &'a [f64],
}

fn single_target(a: &SynthArgs) -> Result<Unitary2, CliError> {
    if let Some(p) = &a.from_json {
        parse_unitary_json(p)
    } else if let Some(angle) = a.rz {
        rz_unitary(angle)
    } else if let Some(angles) = &a.u3 {
        u3_unitary(angles)
    } else if !a.unitary.is_empty() {
        parse_unitary_inline(&a.unitary)
    } else {
        Err(CliError::Usage("give a unitary: 8 numbers, --from-json, --rz, --u3 or --random".into()))
    }
}

pub fn run(a: &SynthArgs, manifest: Option<&Path>) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new();
    m.config(a);
    let t0 = Instant::now();
    let tables = load_tables(a.tables.tables.as_deref(), a.tables.max_t)?;
    m.table_checksum(tables.checksum);
    m.timing("load_tables", t0);
    let t1 = Instant::now();
    let unmet = match a.random {
        Some(n) => run_batch(a, &tables, n, &mut m)?,
        None => run_single(a, &tables, &mut m)?,
    };
    m.timing("synthesis", t1);
    m.write(manifest, a.out.as_deref())?;
    match unmet {
        0 => Ok(()),
        k => Err(CliError::ThresholdNotMet(format!("{k} target(s) above epsilon {}", a.search.epsilon.unwrap_or(0.0)))),
    }
}

fn run_single(a: &SynthArgs, tables: &LoadedTables, m: &mut ManifestBuilder) -> Result<usize, CliError> {
    let target = single_target(a)?;
    m.seeds([a.search.seed]);
    let out = synthesize(tables, &a.search, &target, a.search.seed)?;
    let best = &out.best;
    let seq = &best.sequence;
    let text = if a.json {
        let j = SynthJson {
            schema: SCHEMA,
            sequence: seq.to_string(),
            t_count: seq.t_count(),
            clifford_count: seq.cost().clifford,
            length: seq.len(),
            distance: best.error,
            below_threshold: out.below_threshold,
            timed_out: out.timed_out,
            tensors_used: best.tensors_used,
            t_budget: best.t_budget,
            samples_evaluated: best.samples_evaluated,
            history: &out.history,
        };
        serde_json::to_string_pretty(&j)? + "\n"
    } else {
        format!(
            "sequence: {}\nt_count: {}\nclifford_count: {}\ndistance: {:e}\n",
            seq,
            seq.t_count(),
            seq.cost().clifford,
            best.error
        )
    };
    write_output(a.out.as_deref(), &text)?;
    Ok(usize::from(!out.below_threshold))
}

fn run_batch(a: &SynthArgs, tables: &LoadedTables, n: usize, m: &mut ManifestBuilder) -> Result<usize, CliError> {
    let seeds: Vec<u64> = (0..n).map(|i| target_seed(a.search.seed, i)).collect();
    m.seeds(seeds.iter().copied());
    let results = par_map(&seeds, a.jobs, |_, &s| synthesize(tables, &a.search, &haar_random_unitary(s), a.search.seed))?;
    let mut csv = String::from("index,target_seed,distance,t_count,clifford_count,below_threshold\n");
    let mut unmet = 0;
    for (i, (s, r)) in seeds.iter().zip(&results).enumerate() {
        let seq = &r.best.sequence;
        unmet += usize::from(!r.below_threshold);
        let _ = writeln!(csv, "{i},{s},{:e},{},{},{}", r.best.error, seq.t_count(), seq.cost().clifford, r.below_threshold);
    }
    write_output(a.out.as_deref(), &csv)?;
    Ok(unmet)
}
