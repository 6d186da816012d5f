use std::collections::BTreeMap;
use std::fmt::Write;
use std::fs;
use std::path::Path;
use std::time::Instant;

use tnsynth::unitary::haar_random_unitary;

use crate::commands::synth::synthesize;
use crate::context::{load_tables, par_map, summarize, target_seed, write_output, ManifestBuilder, Summary, SCHEMA};
use crate::error::CliError;
use crate::{BenchArgs, BenchMode};

const SEARCH_HEADER: &str = "index,target_seed,distance,t_count,clifford_count,wall_ms";
const U3_HEADER: &str = "index,target_seed,u3_t_count,u3_distance,rz_chain_t_count,rz_chain_distance,t_ratio,wall_ms";

pub fn run(a: &BenchArgs, manifest: Option<&Path>) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new();
    m.config(a);
    let t0 = Instant::now();
    let tables = load_tables(a.tables.tables.as_deref(), a.tables.max_t)?;
    m.table_checksum(tables.checksum);
    m.timing("load_tables", t0);
    let seeds: Vec<u64> = (0..a.count).map(|i| target_seed(a.search.seed, i)).collect();
    m.seeds(seeds.iter().copied());
    let t1 = Instant::now();

    let mut csv = String::new();
    let mut columns: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    match a.mode {
        BenchMode::Search => {
            let rows = par_map(&seeds, a.jobs, |_, &s| {
                let start = Instant::now();
                let out = synthesize(&tables, &a.search, &haar_random_unitary(s), a.search.seed)?;
                Ok((out, start.elapsed().as_secs_f64() * 1e3))
            })?;
            csv.push_str(SEARCH_HEADER);
            csv.push('\n');
            for (i, (s, (out, ms))) in seeds.iter().zip(&rows).enumerate() {
                let seq = &out.best.sequence;
                let (t, c) = (seq.t_count(), seq.cost().clifford);
                let _ = writeln!(csv, "{i},{s},{:e},{t},{c},{ms:.3}", out.best.error);
                columns.entry("distance").or_default().push(out.best.error);
                columns.entry("t_count").or_default().push(t as f64);
                columns.entry("clifford_count").or_default().push(c as f64);
                columns.entry("wall_ms").or_default().push(*ms);
            }
        }
        BenchMode::U3VsRz => {
            let eps = a.search.epsilon.ok_or_else(|| CliError::Usage("u3-vs-rz needs --epsilon".into()))?;
            let opts = a.search.min_t_options(a.search.seed, tables.synth.table().max_t())?;
            let rows = par_map(&seeds, a.jobs, |_, &s| {
                let start = Instant::now();
                let u = haar_random_unitary(s);
                let direct = tables.synth.synthesize_min_t(&u, eps, &opts)?;
                let chain = tables.synth.synthesize_via_rz_chain(&u, eps, &opts)?;
                Ok((direct.best, chain, start.elapsed().as_secs_f64() * 1e3))
            })?;
            csv.push_str(U3_HEADER);
            csv.push('\n');
            let (mut total_u3, mut total_rz) = (0usize, 0usize);
            for (i, (s, (d, c, ms))) in seeds.iter().zip(&rows).enumerate() {
                let (tu, tr) = (d.sequence.t_count(), c.sequence.t_count());
                total_u3 += tu;
                total_rz += tr;
                let ratio = if tu > 0 { tr as f64 / tu as f64 } else { f64::NAN };
                let _ = writeln!(csv, "{i},{s},{tu},{:e},{tr},{:e},{ratio:.4},{ms:.3}", d.error, c.error);
                columns.entry("u3_t_count").or_default().push(tu as f64);
                columns.entry("rz_chain_t_count").or_default().push(tr as f64);
                if ratio.is_finite() {
                    columns.entry("t_ratio").or_default().push(ratio);
                }
            }
            let total = if total_u3 > 0 { total_rz as f64 / total_u3 as f64 } else { f64::NAN };
            eprintln!("total T: u3 {total_u3}, rz chain {total_rz}, ratio {total:.4}");
        }
    }
    m.timing("synthesis", t1);
    write_output(a.out.as_deref(), &csv)?;

    let summary: BTreeMap<&str, Summary> = columns.iter().filter_map(|(k, v)| summarize(v).map(|s| (*k, s))).collect();
    let mut text = String::from("metric,min,mean,geomean,median,max\n");
    for (k, s) in &summary {
        let _ = writeln!(text, "{k},{:e},{:e},{:e},{:e},{:e}", s.min, s.mean, s.geomean, s.median, s.max);
    }
    if a.out.is_some() {
        print!("{text}");
    } else {
        eprint!("{text}");
    }
    if let Some(p) = &a.summary_json {
        let v = serde_json::json!({ "schema": SCHEMA, "count": a.count, "mode": a.mode, "summary": summary });
        fs::write(p, serde_json::to_string_pretty(&v)? + "\n")?;
    }
    m.write(manifest, a.out.as_deref())
}
