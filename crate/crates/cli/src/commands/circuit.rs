use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use tnsynth::circuit::{emit, merge_rotations, metrics as circuit_metrics, parse, rotations, synthesize_circuit_with, Circuit, CircuitMetrics};

use crate::context::{load_tables, par_map, write_output, ManifestBuilder, SCHEMA};
use crate::error::CliError;
use crate::{CircuitMetricsArgs, CircuitSynthArgs};

fn read_circuit(path: &Path) -> Result<Circuit, CliError> {
    Ok(parse(&fs::read_to_string(path)?)?)
}

#[derive(Serialize)]
struct SynthReport<'a> {
    schema: u32,
    epsilon: f64,
    input: CircuitMetrics,
    merged: CircuitMetrics,
    output: CircuitMetrics,
    rotation_errors: &'a [f64],
    error_bound: f64,
}

pub fn synth(a: &CircuitSynthArgs, manifest: Option<&Path>) -> Result<(), CliError> {
    if !(a.epsilon > 0.0 && a.epsilon < 1.0) {
        return Err(CliError::Usage("--epsilon must lie in (0, 1)".into()));
    }
    let mut m = ManifestBuilder::new();
    m.config(a);
    m.seeds([a.search.seed]);
    let circuit = read_circuit(&a.input)?;
    let t0 = Instant::now();
    let tables = load_tables(a.tables.tables.as_deref(), a.tables.max_t)?;
    m.table_checksum(tables.checksum);
    m.timing("load_tables", t0);

    let merged = if a.no_merge { circuit.clone() } else { merge_rotations(&circuit, a.commute) };
    let opts = a.search.options(tables.synth.table().max_t())?;
    let t1 = Instant::now();
    let rots = rotations(&merged);
    let solved = par_map(&rots, a.jobs, |_, (_, u)| Ok(tables.synth.synthesize_min_t(u, a.epsilon, &opts)?))?;
    let unmet = solved.iter().filter(|o| !o.below_threshold).count();
    let mut next = solved.into_iter();
    let out = synthesize_circuit_with(&merged, |_| {
        let o = next.next().expect("one result per rotation");
        Ok((o.best.sequence.0, o.best.error))
    })?;
    m.timing("synthesis", t1);

    write_output(a.out.as_deref(), &emit(&out.circuit))?;
    let report = SynthReport {
        schema: SCHEMA,
        epsilon: a.epsilon,
        input: circuit_metrics(&circuit),
        merged: circuit_metrics(&merged),
        output: circuit_metrics(&out.circuit),
        rotation_errors: &out.rotation_errors,
        error_bound: out.error_bound(),
    };
    if let Some(p) = &a.metrics_json {
        fs::write(p, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    eprintln!(
        "rotations {} -> {}, T count {}, T depth {}, error bound {:e}",
        report.input.rotation_count,
        report.merged.rotation_count,
        report.output.t_count,
        report.output.t_depth,
        report.error_bound
    );
    m.write(manifest, a.out.as_deref())?;
    if unmet > 0 {
        return Err(CliError::ThresholdNotMet(format!("{unmet} rotation(s) above epsilon {}", a.epsilon)));
    }
    Ok(())
}

pub fn metrics(a: &CircuitMetricsArgs) -> Result<(), CliError> {
    let c = read_circuit(&a.input)?;
    let mt = circuit_metrics(&c);
    if a.json {
        let v = serde_json::json!({ "schema": SCHEMA, "num_qubits": c.num_qubits(), "metrics": mt });
        println!("{}", serde_json::to_string_pretty(&v)?);
    } else {
        println!("qubits: {}", c.num_qubits());
        println!("t_count: {}", mt.t_count);
        println!("t_depth: {}", mt.t_depth);
        println!("clifford_count: {}", mt.clifford_count);
        println!("rotation_count: {}", mt.rotation_count);
    }
    Ok(())
}
