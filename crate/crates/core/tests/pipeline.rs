//! End-to-end use of the public API: table file, single-qubit synthesis, circuits and noise.

use std::sync::Arc;

use tnsynth::circuit::{circuit_distance, emit, merge_rotations, metrics, parse, synthesize_circuit};
use tnsynth::noise::{process_fidelity, sequence_channel};
use tnsynth::synth::{MinTOptions, SynthesisConfig, Synthesizer};
use tnsynth::tables::{cumulative_count, enumerate_table, load_table, save_table, EnumerationOptions};
use tnsynth::unitary::{haar_random_unitary, rz};
use tnsynth::{distance, GateSequence};

fn synthesizer_from_file(max_t: u8) -> Synthesizer {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.bin");
    let (table, rewrites) = enumerate_table(max_t, EnumerationOptions::default()).unwrap();
    save_table(&path, &table, &rewrites).unwrap();
    let (loaded, loaded_rw) = load_table(&path).unwrap();
    assert_eq!(loaded.len() as u64, cumulative_count(max_t as u32));
    assert_eq!(loaded.matrices(), table.matrices());
    Synthesizer::new(Arc::new(loaded), Arc::new(loaded_rw))
}

#[test]
fn table_file_drives_synthesis() {
    let synth = synthesizer_from_file(6);
    let cfg = SynthesisConfig { t_budgets: vec![6, 6], seed: 7, samples: 5_000, ..Default::default() };
    for seed in 0..5 {
        let u = haar_random_unitary(seed);
        let out = synth.synthesize(&u, &cfg).unwrap();
        let best = &out.best;
        assert!((distance(&u, &best.sequence.matrix()) - best.error).abs() < 1e-9);
        assert!(best.sequence.t_count() <= 12);
        assert!(best.error < 0.2, "seed {seed}: {}", best.error);
    }
}

#[test]
fn exact_words_come_back_exact() {
    let synth = synthesizer_from_file(6);
    let word: GateSequence = "HTSHTHTHTSHT".parse().unwrap();
    let opts = MinTOptions { tail_max_t: 6, max_tensors: 2, samples: 5_000, ..Default::default() };
    let out = synth.synthesize_min_t(&word.matrix(), 1e-9, &opts).unwrap();
    assert!(out.below_threshold);
    assert!(out.best.sequence.t_count() <= word.t_count());
}

#[test]
fn circuit_text_to_clifford_t() {
    let synth = synthesizer_from_file(8);
    let src = "qreg q[3];\nh q[0];\nrz(0.3) q[0];\nrz(pi/7) q[0];\ncx q[0], q[1];\nrx(1.1) q[2];\ncx q[1], q[2];\nry(-0.4) q[1];\n";
    let circuit = parse(src).unwrap();
    let merged = merge_rotations(&circuit, true);
    assert!(circuit_distance(&circuit, &merged).unwrap() < 1e-9);
    assert!(metrics(&merged).rotation_count < metrics(&circuit).rotation_count);

    let opts = MinTOptions { tail_max_t: 8, max_tensors: 2, samples: 10_000, ..Default::default() };
    let out = synthesize_circuit(&merged, &synth, 0.05, &opts).unwrap();
    assert_eq!(metrics(&out.circuit).rotation_count, 0);
    let d = circuit_distance(&circuit, &out.circuit).unwrap();
    assert!(d <= out.error_bound() + 1e-9, "{d} > {}", out.error_bound());

    let reparsed = parse(&emit(&out.circuit)).unwrap();
    assert_eq!(reparsed.ops(), out.circuit.ops());
}

#[test]
fn noiseless_fidelity_tracks_distance() {
    let synth = synthesizer_from_file(8);
    let target = rz(0.7);
    let opts = MinTOptions { tail_max_t: 8, max_tensors: 2, samples: 10_000, ..Default::default() };
    let out = synth.synthesize_min_t(&target, 0.01, &opts).unwrap();
    let seq = out.best.sequence.gates();
    let ideal = sequence_channel(seq, 0.0).unwrap();
    let f = process_fidelity(&target, &ideal);
    // Process fidelity of a unitary pair is 1 - distance^2.
    assert!((f - (1.0 - out.best.error.powi(2))).abs() < 1e-9);
    let noisy = sequence_channel(seq, 1e-3).unwrap();
    assert!(process_fidelity(&target, &noisy) < f);
    assert!(noisy.is_completely_positive(1e-10) && noisy.is_trace_preserving(1e-10));
}
