//! Single-qubit channels, sequences with depolarizing noise after each T, and the
//! threshold/noise-rate trade-off.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::synth::{MinTOptions, SynthError, Synthesizer};
use crate::unitary::{GateId, Unitary2};

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("depolarizing probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("need interior minima for at least 3 noise rates, found {0}")]
    TooFewInteriorMinima(usize),
    #[error("empty sweep: {0}")]
    Empty(&'static str),
    #[error(transparent)]
    Synthesis(#[from] SynthError),
}

type Mat4 = [[Complex64; 4]; 4];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[ZERO; 4]; 4];
    for i in 0..4 {
        for k in 0..4 {
            let aik = a[i][k];
            for j in 0..4 {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

/// Single-qubit channel as a superoperator on row-major vectorised density matrices:
/// `vec(E(rho))[2k+l] = sum S[2k+l][2i+j] rho[i][j]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel2 {
    superop: Mat4,
}

impl Channel2 {
    pub fn identity() -> Self {
        let mut s = [[ZERO; 4]; 4];
        for (i, row) in s.iter_mut().enumerate() {
            row[i] = Complex64::new(1.0, 0.0);
        }
        Channel2 { superop: s }
    }

    /// `rho -> U rho U^dagger`.
    pub fn unitary(u: &Unitary2) -> Self {
        let mut s = [[ZERO; 4]; 4];
        for k in 0..2 {
            for l in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        s[2 * k + l][2 * i + j] = u.get(k, i) * u.get(l, j).conj();
                    }
                }
            }
        }
        Channel2 { superop: s }
    }

    /// `rho -> (1 - p) rho + p Tr(rho) I / 2`.
    pub fn depolarizing(p: f64) -> Result<Self, NoiseError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(NoiseError::BadProbability(p));
        }
        let mut s = [[ZERO; 4]; 4];
        for (i, row) in s.iter_mut().enumerate() {
            row[i] = Complex64::new(1.0 - p, 0.0);
        }
        for a in [0, 3] {
            for b in [0, 3] {
                s[a][b] += Complex64::new(p / 2.0, 0.0);
            }
        }
        Ok(Channel2 { superop: s })
    }

    pub fn superop(&self) -> &Mat4 {
        &self.superop
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Channel2) -> Channel2 {
        Channel2 { superop: mat4_mul(&next.superop, &self.superop) }
    }

    pub fn apply(&self, rho: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
        let v = [rho[0][0], rho[0][1], rho[1][0], rho[1][1]];
        let mut out = [ZERO; 4];
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|c| self.superop[r][c] * v[c]).sum();
        }
        [[out[0], out[1]], [out[2], out[3]]]
    }

    /// Normalised Choi matrix `J[2i+k][2j+l] = E(|i><j|)[k][l] / 2`, trace one.
    pub fn choi(&self) -> Mat4 {
        let mut j = [[ZERO; 4]; 4];
        for i in 0..2 {
            for jj in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        j[2 * i + k][2 * jj + l] = self.superop[2 * k + l][2 * i + jj] / 2.0;
                    }
                }
            }
        }
        j
    }

    /// Positive semidefinite Choi matrix, within `tol`.
    pub fn is_completely_positive(&self, tol: f64) -> bool {
        let mut a = self.choi();
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += Complex64::new(tol, 0.0);
        }
        hermitian(&self.choi(), tol) && cholesky_succeeds(a)
    }

    /// Partial trace of the Choi matrix over the output equals `I / 2`.
    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        let j = self.choi();
        (0..2).all(|i| {
            (0..2).all(|jj| {
                let s: Complex64 = (0..2).map(|k| j[2 * i + k][2 * jj + k]).sum();
                let want = if i == jj { 0.5 } else { 0.0 };
                (s - Complex64::new(want, 0.0)).norm() <= tol
            })
        })
    }
}

fn hermitian(a: &Mat4, tol: f64) -> bool {
    (0..4).all(|i| (0..4).all(|j| (a[i][j] - a[j][i].conj()).norm() <= tol))
}

/// Cholesky without pivoting; fails on a non-positive pivot.
fn cholesky_succeeds(mut a: Mat4) -> bool {
    for k in 0..4 {
        let d = a[k][k].re;
        if !(d > 0.0) {
            return false;
        }
        let r = d.sqrt();
        for i in k..4 {
            a[i][k] /= r;
        }
        for j in k + 1..4 {
            for i in j..4 {
                let v = a[i][k] * a[j][k].conj();
                a[i][j] -= v;
            }
        }
    }
    true
}

/// The gates of `seq` in time order, with depolarizing noise of strength `p` after each T.
pub fn sequence_channel(seq: &[GateId], p: f64) -> Result<Channel2, NoiseError> {
    let dep = Channel2::depolarizing(p)?;
    let mut ch = Channel2::identity();
    for &g in seq {
        ch = ch.then(&Channel2::unitary(&g.matrix()));
        if g == GateId::T {
            ch = ch.then(&dep);
        }
    }
    Ok(ch)
}

/// `<Phi_U| J(E) |Phi_U>` with `Phi_U = (I x U)|Phi+>`.
pub fn process_fidelity(ideal: &Unitary2, channel: &Channel2) -> f64 {
    let j = channel.choi();
    let phi = |i: usize, k: usize| ideal.get(k, i) / std::f64::consts::SQRT_2;
    let mut f = ZERO;
    for i in 0..2 {
        for k in 0..2 {
            for jj in 0..2 {
                for l in 0..2 {
                    f += phi(i, k).conj() * j[2 * i + k][2 * jj + l] * phi(jj, l);
                }
            }
        }
    }
    f.re
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub synthesis_threshold: f64,
    pub logical_rate: f64,
    pub mean_process_infidelity: f64,
    pub std: f64,
    pub mean_t_count: f64,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub synthesis: MinTOptions,
    /// Noise per T gate is `rate * t_rate_multiplier`.
    pub t_rate_multiplier: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { synthesis: MinTOptions::default(), t_rate_multiplier: 1.0 }
    }
}

/// Per-target minimum-T sequences for every threshold. Thresholds that a target never
/// reaches fall back to its lowest-error sequence.
pub fn sweep_sequences(
    synth: &Synthesizer,
    target: &Unitary2,
    thresholds: &[f64],
    opts: &MinTOptions,
) -> Result<Vec<Vec<GateId>>, NoiseError> {
    let traj = synth.min_t_trajectory(target, thresholds, opts)?;
    Ok((0..thresholds.len()).map(|i| traj.result_or_best(i).sequence.0.clone()).collect())
}

/// Mean and standard deviation of process infidelity over targets for every
/// (threshold, rate) pair. `sequences[t][i]` is target `t`'s word for `thresholds[i]`.
pub fn tradeoff_from_sequences(
    targets: &[Unitary2],
    sequences: &[Vec<Vec<GateId>>],
    thresholds: &[f64],
    rates: &[f64],
    t_rate_multiplier: f64,
) -> Result<Vec<TradeoffPoint>, NoiseError> {
    if targets.is_empty() {
        return Err(NoiseError::Empty("no targets"));
    }
    let mut points = Vec::with_capacity(thresholds.len() * rates.len());
    for (ti, &thr) in thresholds.iter().enumerate() {
        for &rate in rates {
            let p = rate * t_rate_multiplier;
            let mut inf = Vec::with_capacity(targets.len());
            let mut t_total = 0usize;
            for (u, seqs) in targets.iter().zip(sequences) {
                let seq = &seqs[ti];
                t_total += seq.iter().filter(|&&g| g == GateId::T).count();
                inf.push(1.0 - process_fidelity(u, &sequence_channel(seq, p)?));
            }
            let n = inf.len() as f64;
            let mean = inf.iter().sum::<f64>() / n;
            let var = if inf.len() > 1 { inf.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            points.push(TradeoffPoint {
                synthesis_threshold: thr,
                logical_rate: rate,
                mean_process_infidelity: mean,
                std: var.sqrt(),
                mean_t_count: t_total as f64 / n,
            });
        }
    }
    Ok(points)
}

pub fn tradeoff_sweep(
    synth: &Synthesizer,
    targets: &[Unitary2],
    thresholds: &[f64],
    rates: &[f64],
    config: &SweepConfig,
) -> Result<Vec<TradeoffPoint>, NoiseError> {
    let sequences = targets
        .iter()
        .map(|u| sweep_sequences(synth, u, thresholds, &config.synthesis))
        .collect::<Result<Vec<_>, _>>()?;
    tradeoff_from_sequences(targets, &sequences, thresholds, rates, config.t_rate_multiplier)
}

/// Best threshold for one rate: the discrete argmin refined by a parabola through it and
/// its neighbours in log-threshold. `None` when the minimum sits on the grid edge.
pub fn optimal_threshold(points: &[TradeoffPoint], rate: f64) -> Option<f64> {
    let mut row: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.logical_rate == rate)
        .map(|p| (p.synthesis_threshold.ln(), p.mean_process_infidelity))
        .collect();
    row.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (k, _) = row.iter().enumerate().min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))?;
    if k == 0 || k + 1 == row.len() {
        return None;
    }
    let ((x0, y0), (x1, y1), (x2, y2)) = (row[k - 1], row[k], row[k + 1]);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curv = (d12 - d01) / (x2 - x0);
    // Vertex of y0 + d01 (x - x0) + curv (x - x0)(x - x1).
    let vertex = if curv > 0.0 { (x0 + x1) / 2.0 - d01 / (2.0 * curv) } else { x1 };
    Some(vertex.clamp(x0, x2).exp())
}

/// Least-squares fit of `log t* = log c + a log rate` over rates with interior minima;
/// returns `(a, c)`.
pub fn fit_optimal_threshold(points: &[TradeoffPoint]) -> Result<(f64, f64), NoiseError> {
    let mut rates: Vec<f64> = points.iter().map(|p| p.logical_rate).filter(|r| *r > 0.0).collect();
    rates.sort_by(f64::total_cmp);
    rates.dedup();
    let xy: Vec<(f64, f64)> = rates
        .iter()
        .filter_map(|&r| optimal_threshold(points, r).map(|t| (r.ln(), t.ln())))
        .collect();
    if xy.len() < 3 {
        return Err(NoiseError::TooFewInteriorMinima(xy.len()));
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let a = sxy / sxx;
    Ok((a, (my - a * mx).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unitary::{haar_random_unitary, trace_value};
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn unitary_channel_fidelity() {
        for s in 0..100 {
            let (u, v) = (haar_random_unitary(2 * s), haar_random_unitary(2 * s + 1));
            assert!((process_fidelity(&u, &Channel2::unitary(&u)) - 1.0).abs() < 1e-12);
            let tv = trace_value(&u, &v);
            assert!((process_fidelity(&u, &Channel2::unitary(&v)) - tv * tv).abs() < 1e-10);
        }
    }

    #[test]
    fn fully_depolarized_identity() {
        let ch = Channel2::depolarizing(1.0).unwrap();
        assert!((process_fidelity(&Unitary2::IDENTITY, &ch) - 0.25).abs() < 1e-15);
        assert!(Channel2::depolarizing(1.5).is_err());
    }

    #[test]
    fn channels_are_cptp() {
        for p in [0.0, 1e-3, 0.3, 1.0] {
            let ch = sequence_channel(&"HTSTHTXT".parse::<crate::GateSequence>().unwrap().0, p).unwrap();
            let j = ch.choi();
            let tr: Complex64 = (0..4).map(|i| j[i][i]).sum();
            assert!((tr - c(1.0)).norm() < 1e-12);
            assert!(ch.is_completely_positive(1e-12));
            assert!(ch.is_trace_preserving(1e-12));
        }
        // Transpose map is positive but not completely positive.
        let mut t = [[ZERO; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                t[2 * j + i][2 * i + j] = c(1.0);
            }
        }
        let ch = Channel2 { superop: t };
        assert!(ch.is_trace_preserving(1e-12));
        assert!(!ch.is_completely_positive(1e-12));
    }

    #[test]
    fn matches_density_matrix_oracle() {
        // Applies gates and noise to basis operators directly.
        let seq: Vec<GateId> = "THSTTHT".parse::<crate::GateSequence>().unwrap().0;
        let p = 0.07;
        let ch = sequence_channel(&seq, p).unwrap();
        let states: [[[Complex64; 2]; 2]; 3] = [
            [[c(1.0), ZERO], [ZERO, ZERO]],
            [[c(0.5), c(0.5)], [c(0.5), c(0.5)]],
            [[c(0.5), Complex64::new(0.0, -0.5)], [Complex64::new(0.0, 0.5), c(0.5)]],
        ];
        for rho0 in states {
            let mut rho = rho0;
            for &g in &seq {
                let m = g.matrix();
                let mut next = [[ZERO; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        for a in 0..2 {
                            for b in 0..2 {
                                next[i][j] += m.get(i, a) * rho[a][b] * m.get(j, b).conj();
                            }
                        }
                    }
                }
                if g == GateId::T {
                    let tr = next[0][0] + next[1][1];
                    for (i, row) in next.iter_mut().enumerate() {
                        for (j, x) in row.iter_mut().enumerate() {
                            *x = *x * (1.0 - p) + if i == j { tr * p / 2.0 } else { ZERO };
                        }
                    }
                }
                rho = next;
            }
            let got = ch.apply(&rho0);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((got[i][j] - rho[i][j]).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn fit_recovers_square_root_law() {
        let thresholds: Vec<f64> = (0..25).map(|i| 10f64.powf(-4.0 + 0.125 * i as f64)).collect();
        let mut points = Vec::new();
        for rate in [1e-3, 1e-4, 1e-5, 1e-6] {
            let opt = 0.7 * f64::sqrt(rate);
            for &t in &thresholds {
                let x = (t / opt).ln();
                points.push(TradeoffPoint {
                    synthesis_threshold: t,
                    logical_rate: rate,
                    mean_process_infidelity: 1e-3 + x * x,
                    std: 0.0,
                    mean_t_count: 0.0,
                });
            }
        }
        let (a, coef) = fit_optimal_threshold(&points).unwrap();
        assert!((a - 0.5).abs() < 1e-9, "{a}");
        assert!((coef - 0.7).abs() < 1e-8, "{coef}");
        let few: Vec<TradeoffPoint> = points.iter().filter(|p| p.logical_rate >= 1e-4).copied().collect();
        assert!(matches!(fit_optimal_threshold(&few), Err(NoiseError::TooFewInteriorMinima(2))));
    }

    #[test]
    fn edge_minimum_is_not_interior() {
        let points: Vec<TradeoffPoint> = [1e-3, 1e-2, 1e-1]
            .iter()
            .map(|&t| TradeoffPoint { synthesis_threshold: t, logical_rate: 1e-3, mean_process_infidelity: t, std: 0.0, mean_t_count: 0.0 })
            .collect();
        assert_eq!(optimal_threshold(&points, 1e-3), None);
    }

    proptest! {
        #[test]
        fn composition_is_associative(s1 in 0u64..1000, s2 in 0u64..1000, p in 0.0f64..1.0) {
            let a = Channel2::unitary(&haar_random_unitary(s1));
            let b = Channel2::depolarizing(p).unwrap();
            let cc = Channel2::unitary(&haar_random_unitary(s2));
            let left = a.then(&b).then(&cc);
            let right = a.then(&b.then(&cc));
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert!((left.superop[i][j] - right.superop[i][j]).norm() < 1e-12);
                }
            }
        }

        #[test]
        fn sequence_channel_concatenates(a in "[HSTXYZ]{0,12}", b in "[HSTXYZ]{0,12}", p in 0.0f64..0.5) {
            let sa: crate::GateSequence = a.parse().unwrap();
            let sb: crate::GateSequence = b.parse().unwrap();
            let mut ab = sa.clone();
            ab.extend_from(&sb);
            let joined = sequence_channel(&ab.0, p).unwrap();
            let split = sequence_channel(&sa.0, p).unwrap().then(&sequence_channel(&sb.0, p).unwrap());
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert!((joined.superop[i][j] - split.superop[i][j]).norm() < 1e-12);
                }
            }
        }
    }
}
