//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run a subset with `cargo test --test acceptance -- c3 c9`.

use std::fs;
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use tnsynth::circuit::{circuit_distance, merge_rotations, metrics, qaoa::qaoa_circuit, synthesize_circuit, Circuit, Op};
use tnsynth::mps::build_mps;
use tnsynth::noise::{fit_optimal_threshold, optimal_threshold, tradeoff_sweep, SweepConfig};
use tnsynth::sampler::sample;
use tnsynth::synth::{MinTOptions, SynthesisConfig, Synthesizer};
use tnsynth::tables::{cached_table, cumulative_count, table_from_bytes, table_to_bytes};
use tnsynth::unitary::{distance, haar_random_unitary, inner, trace_value, EulerAngles, GateId, GateSequence, Unitary2};

const BIN: &str = env!("CARGO_BIN_EXE_tnsynth");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn synthesizer(max_t: u8) -> Synthesizer {
    let (t, r) = cached_table(max_t).clone();
    Synthesizer::new(Arc::new(t), Arc::new(r))
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn c1_counting_law() -> Outcome {
    let dir = tempfile::tempdir().expect("temp dir");
    let out = dir.path().join("t6.bin");
    let res = Command::new(BIN)
        .args(["tables", "build", "--max-t", "6", "--out"])
        .arg(&out)
        .output()
        .expect("run tnsynth");
    if !res.status.success() {
        return outcome(false, format!("tables build exited with {:?}", res.status.code()));
    }
    let stdout = String::from_utf8_lossy(&res.stdout);
    let cumulative: Vec<u64> = stdout.lines().skip(1).filter_map(|l| l.split(',').nth(2)?.parse().ok()).collect();
    let expected = [24u64, 96, 240, 528, 1104, 2256, 4560];
    let law: Vec<u64> = (0..=6).map(cumulative_count).collect();
    let ok = cumulative == expected && law == expected;
    outcome(ok, format!("cumulative {cumulative:?}"))
}

fn c2_mps_oracle() -> Outcome {
    let m = cached_table(1).0.matrices();
    let slice = &m[..96];
    let mut worst = 0.0f64;
    for s in 0..20 {
        let target = haar_random_unitary(1000 + s);
        let mps = match build_mps(&[slice, slice], &target) {
            Ok(m) => m,
            Err(e) => return outcome(false, e.to_string()),
        };
        for i in 0..96 {
            for j in 0..96 {
                let prod = slice[j] * slice[i];
                let want = inner(&target, &prod) * 0.5;
                let got = mps.contract(&[i, j]).expect("indices in range");
                worst = worst.max((got - want).norm()).max((got.norm() - trace_value(&target, &prod)).abs());
            }
        }
    }
    outcome(worst <= 1e-9, format!("max deviation {worst:.2e} over 20 x 9216 entries"))
}

fn c3_sampler_distribution() -> Outcome {
    let m = cached_table(1).0.matrices();
    let slice = &m[..96];
    let target = haar_random_unitary(77);
    let mut p = vec![0.0; 96 * 96];
    for i in 0..96 {
        for j in 0..96 {
            p[i * 96 + j] = trace_value(&target, &(slice[j] * slice[i])).powi(2);
        }
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    let mps = build_mps(&[slice, slice], &target).expect("mps");
    let n: u64 = 1_000_000;
    let batch = sample(&mps, n, 2024).expect("sampling");
    let mut counts = vec![0u64; 96 * 96];
    for s in &batch.samples {
        counts[s.indices[0] as usize * 96 + s.indices[1] as usize] += s.multiplicity;
    }
    let drawn: u64 = counts.iter().sum();
    // Cells with small expectations are pooled into one bin.
    let (mut stat, mut bins) = (0.0, 0usize);
    let (mut pool_obs, mut pool_exp) = (0.0, 0.0);
    for (c, q) in counts.iter().zip(&p) {
        let e = q * n as f64;
        if e < 5.0 {
            pool_obs += *c as f64;
            pool_exp += e;
        } else {
            stat += (*c as f64 - e).powi(2) / e;
            bins += 1;
        }
    }
    if pool_exp > 0.0 {
        stat += (pool_obs - pool_exp).powi(2) / pool_exp;
        bins += 1;
    }
    let df = (bins - 1) as f64;
    let pval = 1.0 - ChiSquared::new(df).expect("df > 0").cdf(stat);
    outcome(drawn == n && pval >= 0.01, format!("chi2 {stat:.1} on {df} dof, p-value {pval:.3}"))
}

fn c4_single_tensor_optimal() -> Outcome {
    let synth = synthesizer(6);
    let m = synth.table().matrices();
    let mut mismatches = 0;
    for s in 0..100 {
        let target = haar_random_unitary(2000 + s);
        let (best, _) = m
            .iter()
            .enumerate()
            .map(|(i, u)| (i, trace_value(&target, u)))
            .fold((0, f64::MIN), |acc, (i, tv)| if tv > acc.1 { (i, tv) } else { acc });
        let cfg = SynthesisConfig { t_budgets: vec![6], ..Default::default() };
        let got = synth.synthesize(&target, &cfg).expect("synthesis").best;
        if distance(&got.realized, &m[best]) > 1e-9 || (got.error - distance(&target, &m[best])).abs() > 1e-12 {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches over 100 targets"))
}

fn c5_planted_recovery() -> Outcome {
    let synth = synthesizer(6);
    let m = synth.table().matrices();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut hits = 0;
    for _ in 0..100 {
        let (a, b) = (rng.gen_range(0..m.len()), rng.gen_range(0..m.len()));
        let target = m[b] * m[a];
        let cfg = SynthesisConfig { t_budgets: vec![6, 6], min_tensors: 2, samples: 40_000, ..Default::default() };
        let r = synth.synthesize(&target, &cfg).expect("synthesis").best;
        hits += usize::from(r.error < 1e-6);
    }
    outcome(hits >= 95, format!("{hits}/100 recovered below 1e-6"))
}

fn c6_budget_trend() -> Outcome {
    let synth = synthesizer(8);
    let budgets: [&[u8]; 3] = [&[8], &[8, 8], &[8, 8, 8]];
    let mut medians = Vec::new();
    for b in budgets {
        let mut errs: Vec<f64> = (0..100)
            .map(|s| {
                let cfg = SynthesisConfig { t_budgets: b.to_vec(), min_tensors: b.len(), ..Default::default() };
                synth.synthesize(&haar_random_unitary(3000 + s), &cfg).expect("synthesis").best.error
            })
            .collect();
        medians.push(median(&mut errs));
    }
    let ok = medians.windows(2).all(|w| w[1] < w[0]);
    outcome(ok, format!("medians [8] {:.3e}, [8,8] {:.3e}, [8,8,8] {:.3e}", medians[0], medians[1], medians[2]))
}

fn c7_u3_economy() -> Outcome {
    let synth = synthesizer(10);
    let eps = 0.01;
    let opts = MinTOptions::default();
    let (mut direct_t, mut chain_t, mut unmet) = (0usize, 0usize, 0usize);
    for s in 0..50 {
        let u = haar_random_unitary(4000 + s);
        let d = synth.synthesize_min_t(&u, eps, &opts).expect("synthesis");
        let c = synth.synthesize_via_rz_chain(&u, eps, &opts).expect("synthesis");
        unmet += usize::from(!d.below_threshold) + usize::from(!c.all_met || c.error > eps);
        direct_t += d.best.sequence.t_count();
        chain_t += c.sequence.t_count();
    }
    let ratio = direct_t as f64 / chain_t as f64;
    outcome(
        unmet == 0 && 2 * direct_t <= chain_t,
        format!("eps {eps}: direct U3 {direct_t} T vs 3 x Rz {chain_t} T, ratio {ratio:.3} ({unmet} unmet)"),
    )
}

fn c8_postprocess_safety() -> Outcome {
    let synth = synthesizer(6);
    let t = synth.table();
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut violations = 0;
    for _ in 0..1000 {
        let mut seq = GateSequence::new();
        for _ in 0..rng.gen_range(2..=5) {
            seq.extend_from(&t.entry(rng.gen_range(0..t.len())).sequence);
            if rng.gen_bool(0.3) {
                seq.push(GateId::ALL[rng.gen_range(0..6)]);
            }
        }
        let out = synth.postprocess(&seq);
        let again = synth.postprocess(&out);
        if distance(&seq.matrix(), &out.matrix()) >= 1e-9 || out.cmp_cost(&seq).is_gt() || again != out {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("{violations} violations over 1000 concatenations"))
}

fn c9_qaoa_merge() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [8, 10, 12] {
        for p in 1..=3 {
            let c = qaoa_circuit(n, p, (n * 10 + p) as u64);
            let before = metrics(&c).rotation_count;
            let after = metrics(&merge_rotations(&c, true)).rotation_count;
            let removed = before - after;
            // 35% <= removed / before <= 45%, in integers.
            ok &= 100 * removed >= 35 * before && 100 * removed <= 45 * before;
            parts.push(format!("n{n}p{p} {:.1}%", 100.0 * removed as f64 / before as f64));
        }
    }
    outcome(ok, parts.join(", "))
}

fn c10_tradeoff_law() -> Outcome {
    let synth = synthesizer(10);
    let targets: Vec<Unitary2> = (0..100).map(|s| haar_random_unitary(5000 + s)).collect();
    let thresholds = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
    let rates = [1e-3, 1e-4, 1e-5];
    let points = match tradeoff_sweep(&synth, &targets, &thresholds, &rates, &SweepConfig::default()) {
        Ok(p) => p,
        Err(e) => return outcome(false, e.to_string()),
    };
    let optima: Vec<Option<f64>> = rates.iter().map(|&r| optimal_threshold(&points, r)).collect();
    let interior = optima.iter().all(Option::is_some);
    let fit = fit_optimal_threshold(&points);
    let shown: Vec<String> = optima.iter().map(|o| o.map_or("edge".into(), |t| format!("{t:.2e}"))).collect();
    match fit {
        Ok((e, c)) => outcome(
            interior && (0.35..=0.65).contains(&e),
            format!("optima {shown:?}, exponent {e:.3}, coefficient {c:.3}"),
        ),
        Err(err) => outcome(false, format!("optima {shown:?}, {err}")),
    }
}

fn random_circuit(rng: &mut ChaCha8Rng) -> Circuit {
    let n = rng.gen_range(1..=4);
    let mut c = Circuit::new(n);
    let mut rotations = 0;
    for _ in 0..rng.gen_range(4..16) {
        let q = rng.gen_range(0..n);
        let op = match rng.gen_range(0..6) {
            0 if n > 1 => Op::Cx(q, (q + rng.gen_range(1..n)) % n),
            0 | 1 => Op::Fixed(GateId::ALL[rng.gen_range(0..6)], q),
            _ if rotations >= 4 => Op::Fixed(GateId::H, q),
            2 => Op::Rz(rng.gen_range(-3.0..3.0), q),
            3 => Op::Rx(rng.gen_range(-3.0..3.0), q),
            4 => Op::Ry(rng.gen_range(-3.0..3.0), q),
            _ => Op::U3(EulerAngles::new(rng.gen(), rng.gen(), rng.gen()), q),
        };
        rotations += usize::from(op.is_rotation());
        c.push(op).expect("valid op");
    }
    c
}

fn c11_semantic_preservation() -> Outcome {
    let synth = synthesizer(10);
    let opts = MinTOptions { samples: 20_000, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let (mut violations, mut worst_slack) = (0, f64::INFINITY);
    for _ in 0..50 {
        let c = random_circuit(&mut rng);
        let out = synthesize_circuit(&c, &synth, 0.03, &opts).expect("synthesis");
        let d = circuit_distance(&c, &out.circuit).expect("dense comparison");
        let bound = out.error_bound();
        worst_slack = worst_slack.min(bound - d);
        if d > bound + 1e-9 || out.circuit.ops().iter().any(Op::is_rotation) {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("{violations} violations over 50 circuits, min slack {worst_slack:.2e}"))
}

fn c12_serialization() -> Outcome {
    let (table, rules) = cached_table(6);
    let bytes = table_to_bytes(table, rules);
    let again = match table_from_bytes(&bytes) {
        Ok((t, r)) => table_to_bytes(&t, &r),
        Err(e) => return outcome(false, e.to_string()),
    };
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("t6.bin");
    fs::write(&path, &bytes).expect("write");
    let verify = |p: &std::path::Path| {
        Command::new(BIN).args(["tables", "verify"]).arg(p).stderr(Stdio::null()).stdout(Stdio::null()).status().expect("run").code()
    };
    let mut codes = vec![("intact", verify(&path), Some(0))];
    let mut corrupt = |name: &'static str, data: Vec<u8>| {
        let p = dir.path().join(name);
        fs::write(&p, data).expect("write");
        codes.push((name, verify(&p), Some(5)));
    };
    let mut flipped = bytes.clone();
    flipped[bytes.len() / 2] ^= 0x10;
    corrupt("flipped", flipped);
    corrupt("truncated", bytes[..bytes.len() - 100].to_vec());
    let mut magic = bytes.clone();
    magic[0] = b'X';
    corrupt("magic", magic);
    let mut version = bytes.clone();
    version[4] = 9;
    corrupt("version", version);
    codes.push(("missing", verify(&dir.path().join("nope.bin")), Some(3)));
    let codes_ok = codes.iter().all(|(_, got, want)| got == want);
    let shown: Vec<String> = codes.iter().map(|(n, g, _)| format!("{n}={}", g.unwrap_or(-1))).collect();
    outcome(again == bytes && codes_ok, format!("round trip identical: {}, exit codes {}", again == bytes, shown.join(" ")))
}

type Criterion = (&'static str, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 12] = [
    ("c1", "counting law", c1_counting_law),
    ("c2", "MPS vs trace oracle", c2_mps_oracle),
    ("c3", "sampler distribution", c3_sampler_distribution),
    ("c4", "optimality at one tensor", c4_single_tensor_optimal),
    ("c5", "planted-solution recovery", c5_planted_recovery),
    ("c6", "error vs budget trend", c6_budget_trend),
    ("c7", "U3 economy", c7_u3_economy),
    ("c8", "post-processing safety", c8_postprocess_safety),
    ("c9", "QAOA merge", c9_qaoa_merge),
    ("c10", "trade-off law", c10_tradeoff_law),
    ("c11", "semantic preservation", c11_semantic_preservation),
    ("c12", "serialization round trip", c12_serialization),
];

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).map(|a| a.to_lowercase()).collect();
    let mut failed = 0;
    for (id, name, run) in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|f| f == id) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let secs = start.elapsed().as_secs_f64();
        failed += usize::from(!o.pass);
        println!("{} {id:>3} {name}: {} ({secs:.1} s)", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
