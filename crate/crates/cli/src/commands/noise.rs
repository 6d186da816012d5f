use std::fmt::Write;
use std::fs;
use std::path::Path;
use std::time::Instant;

use tnsynth::noise::{fit_optimal_threshold, optimal_threshold, sweep_sequences, tradeoff_from_sequences};
use tnsynth::unitary::{haar_random_unitary, Unitary2};

use crate::context::{load_tables, par_map, target_seed, write_output, ManifestBuilder, SCHEMA};
use crate::error::CliError;
use crate::NoiseSweepArgs;

pub fn sweep(a: &NoiseSweepArgs, manifest: Option<&Path>) -> Result<(), CliError> {
    if a.targets == 0 || a.thresholds.is_empty() || a.rates.is_empty() {
        return Err(CliError::Usage("need at least one target, threshold and rate".into()));
    }
    if a.thresholds.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(CliError::Usage("thresholds must lie in (0, 1)".into()));
    }
    let mut m = ManifestBuilder::new();
    m.config(a);
    let t0 = Instant::now();
    let tables = load_tables(a.tables.tables.as_deref(), a.tables.max_t)?;
    m.table_checksum(tables.checksum);
    m.timing("load_tables", t0);

    let seeds: Vec<u64> = (0..a.targets).map(|i| target_seed(a.search.seed, i)).collect();
    m.seeds(seeds.iter().copied());
    let targets: Vec<Unitary2> = seeds.iter().map(|&s| haar_random_unitary(s)).collect();
    let opts = a.search.options(tables.synth.table().max_t())?;
    let t1 = Instant::now();
    let sequences = par_map(&targets, a.jobs, |_, u| Ok(sweep_sequences(&tables.synth, u, &a.thresholds, &opts)?))?;
    m.timing("synthesis", t1);
    let points = tradeoff_from_sequences(&targets, &sequences, &a.thresholds, &a.rates, a.t_rate_multiplier)?;

    let mut csv = String::from("threshold,rate,mean_infidelity,std,mean_t_count\n");
    for p in &points {
        let _ = writeln!(
            csv,
            "{:e},{:e},{:e},{:e},{:.4}",
            p.synthesis_threshold, p.logical_rate, p.mean_process_infidelity, p.std, p.mean_t_count
        );
    }
    write_output(a.out.as_deref(), &csv)?;

    let optima: Vec<serde_json::Value> = a
        .rates
        .iter()
        .map(|&r| serde_json::json!({ "rate": r, "optimal_threshold": optimal_threshold(&points, r) }))
        .collect();
    let fit = fit_optimal_threshold(&points);
    match &fit {
        Ok((e, c)) => eprintln!("fit: optimal threshold = {c:.4} * rate^{e:.4}"),
        Err(err) => eprintln!("fit unavailable: {err}"),
    }
    if let Some(p) = &a.fit_json {
        let (exponent, coefficient) = match fit {
            Ok((e, c)) => (Some(e), Some(c)),
            Err(_) => (None, None),
        };
        let v = serde_json::json!({
            "schema": SCHEMA,
            "exponent": exponent,
            "coefficient": coefficient,
            "optima": optima,
        });
        fs::write(p, serde_json::to_string_pretty(&v)? + "\n")?;
    }
    m.write(manifest, a.out.as_deref())
}
