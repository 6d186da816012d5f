//! Table loading, unitary input parsing, manifests and the worker pool.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use tnsynth::synth::Synthesizer;
use tnsynth::tables::{enumerate_table, load_table, table_to_bytes, EnumerationOptions};
use tnsynth::unitary::{rz, u3, EulerAngles, Unitary2, UNITARY_TOL};

use crate::error::CliError;

pub const SCHEMA: u32 = 1;

/// Seed of the `i`-th Haar-random target of a run seeded with `seed`.
pub fn target_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64)
}

pub struct LoadedTables {
    pub synth: Synthesizer,
    pub checksum: u64,
}

/// Reads `path`, or enumerates a table up to `max_t` in memory when no file is given.
pub fn load_tables(path: Option<&Path>, max_t: u8) -> Result<LoadedTables, CliError> {
    let (table, rewrites) = match path {
        Some(p) => load_table(p)?,
        None => enumerate_table(max_t, EnumerationOptions::default())?,
    };
    let bytes = table_to_bytes(&table, &rewrites);
    let checksum = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().expect("8-byte trailer"));
    Ok(LoadedTables { synth: Synthesizer::new(Arc::new(table), Arc::new(rewrites)), checksum })
}

fn unitary_from_floats(v: &[f64]) -> Result<Unitary2, CliError> {
    if v.len() != 8 {
        return Err(CliError::Input(format!("expected 8 numbers (row-major re/im pairs), got {}", v.len())));
    }
    let z = |i: usize| Complex64::new(v[2 * i], v[2 * i + 1]);
    Unitary2::new([z(0), z(1), z(2), z(3)]).map_err(|e| CliError::Input(format!("{e} (tolerance {UNITARY_TOL})")))
}

pub fn parse_unitary_inline(values: &[f64]) -> Result<Unitary2, CliError> {
    unitary_from_floats(values)
}

/// A JSON array of 8 numbers, or an object with such an array under `"unitary"`.
pub fn parse_unitary_json(path: &Path) -> Result<Unitary2, CliError> {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    let arr = match &v {
        serde_json::Value::Array(a) => a,
        serde_json::Value::Object(o) => o
            .get("unitary")
            .and_then(|u| u.as_array())
            .ok_or_else(|| CliError::Input("JSON object needs a \"unitary\" array".into()))?,
        _ => return Err(CliError::Input("unitary JSON must be an array or object".into())),
    };
    let floats = arr
        .iter()
        .map(|x| x.as_f64().ok_or_else(|| CliError::Input("unitary entries must be numbers".into())))
        .collect::<Result<Vec<f64>, _>>()?;
    unitary_from_floats(&floats)
}

pub fn rz_unitary(angle: f64) -> Result<Unitary2, CliError> {
    if !angle.is_finite() {
        return Err(CliError::Input("angle must be finite".into()));
    }
    Ok(rz(angle))
}

pub fn u3_unitary(angles: &[f64]) -> Result<Unitary2, CliError> {
    match angles {
        [t, p, l] if angles.iter().all(|a| a.is_finite()) => Ok(u3(EulerAngles::new(*t, *p, *l))),
        _ => Err(CliError::Input("--u3 takes three finite angles theta,phi,lambda".into())),
    }
}

/// Maps `f` over `items` on `jobs` threads; output order follows input order.
pub fn par_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Result<Vec<R>, CliError>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> Result<R, CliError> + Sync + Send,
{
    if jobs <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    pool.install(|| items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect())
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub schema: u32,
    pub command: Vec<String>,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub table_checksum: Option<String>,
    pub tool_version: &'static str,
    pub timings_ms: BTreeMap<String, f64>,
}

/// Collects manifest fields while a command runs.
pub struct ManifestBuilder {
    start: Instant,
    manifest: RunManifest,
}

impl ManifestBuilder {
    pub fn new() -> Self {
        ManifestBuilder {
            start: Instant::now(),
            manifest: RunManifest {
                schema: SCHEMA,
                command: std::env::args().collect(),
                config: serde_json::Value::Null,
                seeds: Vec::new(),
                table_checksum: None,
                tool_version: env!("CARGO_PKG_VERSION"),
                timings_ms: BTreeMap::new(),
            },
        }
    }

    pub fn config<C: Serialize>(&mut self, c: &C) {
        self.manifest.config = serde_json::to_value(c).unwrap_or(serde_json::Value::Null);
    }

    pub fn seeds(&mut self, seeds: impl IntoIterator<Item = u64>) {
        self.manifest.seeds.extend(seeds);
    }

    pub fn table_checksum(&mut self, sum: u64) {
        self.manifest.table_checksum = Some(format!("{sum:016x}"));
    }

    pub fn timing(&mut self, name: &str, since: Instant) {
        self.manifest.timings_ms.insert(name.to_string(), since.elapsed().as_secs_f64() * 1e3);
    }

    /// Writes to `explicit`, else next to `output` as `<output>.manifest.json`.
    pub fn write(mut self, explicit: Option<&Path>, output: Option<&Path>) -> Result<(), CliError> {
        let path: Option<PathBuf> = explicit.map(Path::to_path_buf).or_else(|| {
            output.map(|o| {
                let mut s = o.as_os_str().to_owned();
                s.push(".manifest.json");
                PathBuf::from(s)
            })
        });
        if let Some(p) = path {
            let total = self.start;
            self.timing("total", total);
            fs::write(p, serde_json::to_string_pretty(&self.manifest)? + "\n")?;
        }
        Ok(())
    }
}

pub fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => Ok(fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Summary statistics of a sample.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Summary {
    pub min: f64,
    pub mean: f64,
    pub geomean: f64,
    pub median: f64,
    pub max: f64,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    // Geometric mean over positive values only; zeros would pin it to zero.
    let pos: Vec<f64> = v.iter().copied().filter(|x| *x > 0.0).collect();
    let geomean = if pos.is_empty() { 0.0 } else { (pos.iter().map(|x| x.ln()).sum::<f64>() / pos.len() as f64).exp() };
    Some(Summary { min: v[0], mean: v.iter().sum::<f64>() / n as f64, geomean, median, max: v[n - 1] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_stats() {
        let s = summarize(&[4.0, 1.0, 2.0, 8.0]).unwrap();
        assert_eq!((s.min, s.max, s.median), (1.0, 8.0, 3.0));
        assert!((s.geomean - 64f64.powf(0.25)).abs() < 1e-12);
        assert!((s.mean - 3.75).abs() < 1e-12);
        assert!(summarize(&[]).is_none());
    }

    #[test]
    fn inline_unitary_validation() {
        let id = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        assert!(parse_unitary_inline(&id).is_ok());
        assert!(matches!(parse_unitary_inline(&[1.0; 8]), Err(CliError::Input(_))));
        assert!(matches!(parse_unitary_inline(&[1.0; 3]), Err(CliError::Input(_))));
    }

    #[test]
    fn par_map_keeps_order() {
        let items: Vec<u64> = (0..50).collect();
        let out = par_map(&items, 4, |i, &x| Ok((i as u64, x * x))).unwrap();
        assert!(out.iter().enumerate().all(|(i, &(j, sq))| i as u64 == j && sq == j * j));
    }
}
