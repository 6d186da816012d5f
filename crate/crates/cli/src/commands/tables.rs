use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use tnsynth::tables::{enumerate_table, save_table, table_from_bytes, table_to_bytes, verify_table, EnumerationOptions};

use crate::context::{ManifestBuilder, SCHEMA};
use crate::error::CliError;
use crate::{TablesBuildArgs, TablesVerifyArgs};

#[derive(Serialize)]
struct CountRow {
    t: u8,
    count: usize,
    cumulative: usize,
}

#[derive(Serialize)]
struct BuildReport {
    schema: u32,
    max_t: u8,
    entries: usize,
    rewrite_rules: usize,
    checksum: String,
    counts: Vec<CountRow>,
}

fn checksum_of(bytes: &[u8]) -> u64 {
    u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().expect("8-byte trailer"))
}

pub fn build(a: &TablesBuildArgs, manifest: Option<&Path>) -> Result<(), CliError> {
    let mut m = ManifestBuilder::new();
    m.config(a);
    if !(a.memory_cap_gib > 0.0) {
        return Err(CliError::Usage("--memory-cap-gib must be positive".into()));
    }
    let t0 = Instant::now();
    let opts = EnumerationOptions { memory_cap_bytes: (a.memory_cap_gib * (1u64 << 30) as f64) as u64 };
    let (table, rules) = enumerate_table(a.max_t, opts)?;
    m.timing("enumerate", t0);
    let bytes = table_to_bytes(&table, &rules);
    let checksum = checksum_of(&bytes);
    m.table_checksum(checksum);
    if let Some(out) = &a.out {
        let t1 = Instant::now();
        save_table(out, &table, &rules)?;
        m.timing("save", t1);
    }
    let mut cumulative = 0;
    let counts: Vec<CountRow> = (0..=a.max_t)
        .map(|t| {
            let count = table.count_with_t(t);
            cumulative += count;
            CountRow { t, count, cumulative }
        })
        .collect();
    if a.json {
        let report = BuildReport {
            schema: SCHEMA,
            max_t: a.max_t,
            entries: table.len(),
            rewrite_rules: rules.len(),
            checksum: format!("{checksum:016x}"),
            counts,
        };
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("t,count,cumulative");
        for r in &counts {
            println!("{},{},{}", r.t, r.count, r.cumulative);
        }
    }
    m.write(manifest, a.out.as_deref())
}

pub fn verify(a: &TablesVerifyArgs) -> Result<(), CliError> {
    let bytes = fs::read(&a.file)?;
    let (table, rules) = table_from_bytes(&bytes)?;
    verify_table(&table).map_err(CliError::CorruptTable)?;
    let checksum = format!("{:016x}", checksum_of(&bytes));
    if a.json {
        let v = serde_json::json!({
            "schema": SCHEMA,
            "ok": true,
            "max_t": table.max_t(),
            "entries": table.len(),
            "rewrite_rules": rules.len(),
            "checksum": checksum,
        });
        println!("{}", serde_json::to_string_pretty(&v)?);
    } else {
        println!("ok: {} entries, max T {}, {} rewrite rules, checksum {checksum}", table.len(), table.max_t(), rules.len());
    }
    Ok(())
}
