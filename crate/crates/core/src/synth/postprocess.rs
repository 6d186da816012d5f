//! Peephole simplification of gate words. Every replacement is strictly cheaper in
//! [`Cost`] order, so repeating the passes until nothing changes terminates and the
//! result is a fixpoint.

use crate::tables::{clifford_group, RewriteTable, UniqueTable};
use crate::unitary::{matrix_of, trace_value, Cost, GateId, GateSequence, Unitary2};

/// Rewrite-rule matching and Clifford-run canonicalisation, to fixpoint.
pub fn postprocess(seq: &GateSequence, rewrites: &RewriteTable) -> GateSequence {
    run(seq, rewrites, None)
}

/// As [`postprocess`], plus replacement of any window with few enough T gates by its
/// table word when that is cheaper.
pub fn postprocess_with_table(seq: &GateSequence, rewrites: &RewriteTable, table: &UniqueTable) -> GateSequence {
    run(seq, rewrites, Some(table))
}

fn run(seq: &GateSequence, rewrites: &RewriteTable, table: Option<&UniqueTable>) -> GateSequence {
    let mut gates = seq.0.clone();
    loop {
        let mut changed = apply_rewrites(&mut gates, rewrites);
        changed |= canonicalize_clifford_runs(&mut gates);
        if let Some(table) = table {
            changed |= resynthesize_windows(&mut gates, table);
        }
        if !changed {
            return GateSequence(gates);
        }
    }
}

fn apply_rewrites(gates: &mut Vec<GateId>, rewrites: &RewriteTable) -> bool {
    let max_key = rewrites.max_key_len();
    let mut changed = false;
    let mut i = 0;
    while i < gates.len() {
        let longest = max_key.min(gates.len() - i);
        let hit = (1..=longest).rev().find_map(|w| rewrites.get(&gates[i..i + w]).map(|to| (w, to.to_vec())));
        match hit {
            Some((w, to)) => {
                gates.splice(i..i + w, to);
                changed = true;
            }
            None => i += 1,
        }
    }
    changed
}

/// Cheapest word for a Clifford, if `u` is one.
fn clifford_word(u: &Unitary2) -> Option<&'static GateSequence> {
    clifford_group().iter().find(|(c, _)| trace_value(c, u) > 1.0 - 1e-9).map(|(_, w)| w)
}

fn canonicalize_clifford_runs(gates: &mut Vec<GateId>) -> bool {
    let mut changed = false;
    let mut i = 0;
    while i < gates.len() {
        if gates[i] == GateId::T {
            i += 1;
            continue;
        }
        let end = gates[i..].iter().position(|&g| g == GateId::T).map_or(gates.len(), |p| i + p);
        let run = &gates[i..end];
        let word = clifford_word(&matrix_of(run)).expect("T-free words are Clifford");
        if word.cost() < Cost::of(run) {
            let n = word.len();
            gates.splice(i..end, word.0.iter().copied());
            changed = true;
            i += n;
        } else {
            i = end;
        }
    }
    changed
}

fn resynthesize_windows(gates: &mut Vec<GateId>, table: &UniqueTable) -> bool {
    let max_t = table.max_t() as usize;
    let mut changed = false;
    let mut i = 0;
    'outer: while i < gates.len() {
        let mut m = Unitary2::IDENTITY;
        let mut t = 0;
        for j in i..gates.len() {
            m = gates[j].matrix() * m;
            if gates[j] == GateId::T {
                t += 1;
                if t > max_t {
                    break;
                }
            }
            if j == i {
                continue;
            }
            if let Some(idx) = table.find(&m) {
                let word = &table.entry(idx).sequence;
                if word.cost() < Cost::of(&gates[i..=j]) {
                    gates.splice(i..=j, word.0.iter().copied());
                    changed = true;
                    continue 'outer;
                }
            }
        }
        i += 1;
    }
    changed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tables::{enumerate_table, EnumerationOptions};
    use crate::unitary::distance;
    use proptest::prelude::*;

    fn seq(s: &str) -> GateSequence {
        s.parse().unwrap()
    }

    fn rules() -> &'static (UniqueTable, RewriteTable) {
        crate::tables::cached_table(4)
    }

    #[test]
    fn small_identities() {
        let (_, r) = rules();
        assert_eq!(postprocess(&seq("TT"), r), seq("S"));
        assert_eq!(postprocess(&seq("HH"), r), seq(""));
        assert_eq!(postprocess(&seq("SSSS"), r), seq(""));
        assert_eq!(postprocess(&seq("TTTTTTTT"), r), seq(""));
        let out = postprocess(&seq("HSSH"), r);
        assert!(distance(&out.matrix(), &GateId::X.matrix()) < 1e-12);
        assert_eq!(out.cost().clifford, 0);
    }

    #[test]
    fn windows_beyond_rule_keys_shrink() {
        let (table, r) = rules();
        // T^9 = T up to phase but the key is longer than any rule of small tables.
        let input = seq("HTHHTHHTHHTHTTTTT");
        let out = postprocess_with_table(&input, r, table);
        assert!(distance(&out.matrix(), &input.matrix()) < 1e-9);
        assert!(out.cost() < input.cost());
        assert_eq!(postprocess_with_table(&out, r, table), out);
    }

    fn random_concatenation() -> impl Strategy<Value = GateSequence> {
        let n = rules().0.len();
        proptest::collection::vec(0..n, 1..6).prop_map(|ix| {
            let table = &rules().0;
            let mut s = GateSequence::new();
            for i in ix {
                s.extend_from(&table.entry(i).sequence);
            }
            s
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn preserves_matrix_and_never_costs_more(s in random_concatenation()) {
            let (table, r) = rules();
            for out in [postprocess(&s, r), postprocess_with_table(&s, r, table)] {
                prop_assert!(distance(&out.matrix(), &s.matrix()) < 1e-9);
                prop_assert!(out.cost() <= s.cost());
                prop_assert_eq!(&postprocess(&out, r), &out);
            }
        }

        #[test]
        fn raw_gate_strings(ids in proptest::collection::vec(0u8..6, 0..40)) {
            let s = GateSequence(ids.into_iter().map(|i| GateId::from_u8(i).unwrap()).collect());
            let (table, r) = rules();
            let out = postprocess_with_table(&s, r, table);
            prop_assert!(distance(&out.matrix(), &s.matrix()) < 1e-9);
            prop_assert!(out.cost() <= s.cost());
        }
    }

    #[test]
    fn works_with_freshly_enumerated_rules() {
        let (_, r) = enumerate_table(2, EnumerationOptions::default()).unwrap();
        assert_eq!(postprocess(&seq("TT"), &r), seq("S"));
    }
}
