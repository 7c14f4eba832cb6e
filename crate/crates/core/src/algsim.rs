//! Exact and sampled simulation of the three query algorithms driven by
//! `U_x`, all evaluated in the eigenbasis of `U_x`.
//!
//! * Algorithm 1: phase estimation on `U_x |0>`, output 1 when the measured
//!   phase is zero.
//! * Algorithm 2: Hadamard test on `U_x^T` for uniform `T` in `[ceil(100 W)]`.
//! * Algorithm 3: apply `U_x^T` for uniform `T` in `[ceil(1e5 W)]`, output 1
//!   when the vertex measurement returns `0`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boolfn::Bits;
use crate::error::{Error, Result};
use crate::graphrefl::InputOperators;
use crate::spectral::{PhaseWeight, ReflectionSpectrum};

/// Relative slack in `ceil(c W)`, so a solver `W` of `1 + 1e-11` still gives
/// `tau = c`.
const CEIL_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    PhaseEstimation = 1,
    HadamardTest = 2,
    RandomPower = 3,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::PhaseEstimation,
        Algorithm::HadamardTest,
        Algorithm::RandomPower,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for Algorithm {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Algorithm::PhaseEstimation),
            2 => Ok(Algorithm::HadamardTest),
            3 => Ok(Algorithm::RandomPower),
            _ => Err(Error::Validation(format!(
                "algorithm must be 1, 2 or 3, got {v}"
            ))),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl Serialize for Algorithm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.number())
    }
}

impl<'de> Deserialize<'de> for Algorithm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Algorithm::try_from(v).map_err(serde::de::Error::custom)
    }
}

/// `ceil(c * w)` with a small relative slack against solver noise.
pub fn scaled_ceiling(c: f64, w: f64) -> u64 {
    let x = c * w;
    (x * (1.0 - CEIL_SLACK)).ceil().max(1.0) as u64
}

/// Algorithm parameters as used in a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmParams {
    pub delta_p: Option<f64>,
    pub delta_e: Option<f64>,
    pub tau: Option<u64>,
    pub phase_qubits: Option<u32>,
}

impl AlgorithmParams {
    /// Defaults for `alg` at width `w`: `delta_p = 1/(100 W)`,
    /// `delta_e = 1/10`, `tau = ceil(100 W)` or `ceil(1e5 W)`.
    pub fn for_algorithm(alg: Algorithm, w: f64) -> Self {
        match alg {
            Algorithm::PhaseEstimation => {
                let delta_p = 1.0 / (100.0 * w);
                let delta_e = 0.1;
                let (precision, extra) = phase_qubits(delta_p, delta_e);
                Self {
                    delta_p: Some(delta_p),
                    delta_e: Some(delta_e),
                    tau: None,
                    phase_qubits: Some(precision + extra),
                }
            }
            Algorithm::HadamardTest => Self {
                delta_p: None,
                delta_e: None,
                tau: Some(scaled_ceiling(100.0, w)),
                phase_qubits: None,
            },
            Algorithm::RandomPower => Self {
                delta_p: None,
                delta_e: None,
                tau: Some(scaled_ceiling(1e5, w)),
                phase_qubits: None,
            },
        }
    }
}

/// `(precision bits, extra bits)`: `ceil(log2(2 pi / delta_p))` and
/// `ceil(log2(2 + 1/(2 delta_e)))`.
pub fn phase_qubits(delta_p: f64, delta_e: f64) -> (u32, u32) {
    let precision = (2.0 * PI / delta_p).log2().ceil().max(0.0) as u32;
    let extra = (2.0 + 1.0 / (2.0 * delta_e)).log2().ceil().max(0.0) as u32;
    (precision, extra)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sampled {
    pub trials: u64,
    pub successes: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmOutcome {
    pub alg: Algorithm,
    pub x: String,
    pub f_x: u8,
    pub p_one: f64,
    /// Algorithm 1 only: bounds on `p_one` over every phase-estimation
    /// routine meeting `(delta_p, delta_e)`.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub params: AlgorithmParams,
    pub query_count: u64,
    pub sampled: Option<Sampled>,
}

/// Eigenphases of `U_x` weighted by `|<beta|0>|^2`, equal phases merged.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseDistribution {
    entries: Vec<PhaseWeight>,
    /// Weight on phase exactly zero (the eigenvalue-one space).
    zero_mass: f64,
}

impl PhaseDistribution {
    pub fn new(mut entries: Vec<PhaseWeight>) -> Result<Self> {
        if let Some(bad) = entries
            .iter()
            .find(|e| !(e.weight >= 0.0) || !e.phase.is_finite())
        {
            return Err(Error::Validation(format!("bad phase entry {bad:?}")));
        }
        entries.retain(|e| e.weight > 0.0);
        entries.sort_by(|a, b| a.phase.total_cmp(&b.phase));
        let mut merged: Vec<PhaseWeight> = Vec::with_capacity(entries.len());
        for e in entries {
            match merged.last_mut() {
                Some(last) if last.phase == e.phase => last.weight += e.weight,
                _ => merged.push(e),
            }
        }
        let zero_mass = merged
            .iter()
            .filter(|e| e.phase == 0.0)
            .map(|e| e.weight)
            .sum();
        Ok(Self {
            entries: merged,
            zero_mass,
        })
    }

    pub fn from_spectrum(s: &ReflectionSpectrum) -> Self {
        Self::new(s.eigen.clone()).expect("spectrum weights are squares")
    }

    pub fn entries(&self) -> &[PhaseWeight] {
        &self.entries
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }

    pub fn zero_mass(&self) -> f64 {
        self.zero_mass
    }

    pub fn window_mass(&self, theta: f64) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.phase.abs() <= theta)
            .map(|e| e.weight)
            .sum()
    }

    /// `<0|U^T|0> = sum_beta w_beta e^{i theta_beta T}`.
    pub fn amplitude(&self, t: u64) -> Complex<f64> {
        self.entries
            .iter()
            .map(|e| Complex::from_polar(e.weight, e.phase * t as f64))
            .sum()
    }
}

/// `phi` reduced to `(-pi, pi]`.
fn reduce(phi: f64) -> f64 {
    let r = phi - 2.0 * PI * (phi / (2.0 * PI)).round();
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

/// `(1/tau) sum_{T=1}^{tau} cos(phi T)` in closed form.
pub fn mean_cos(phi: f64, tau: u64) -> f64 {
    let phi = reduce(phi);
    let t = tau as f64;
    if phi == 0.0 {
        return 1.0;
    }
    let h = 0.5 * phi;
    (t * h).sin() * ((t + 1.0) * h).cos() / (h.sin() * t)
}

/// `E_T |<0|U^T|0>|^2` over `T` uniform in `[tau]`.
pub fn random_power_probability(dist: &PhaseDistribution, tau: u64) -> f64 {
    let e = dist.entries();
    let mut p = 0.0;
    for (i, a) in e.iter().enumerate() {
        p += a.weight * a.weight;
        for b in &e[i + 1..] {
            p += 2.0 * a.weight * b.weight * mean_cos(a.phase - b.phase, tau);
        }
    }
    p.clamp(0.0, 1.0)
}

/// `E_T (1/4) |(1 + U^T)|0>|^2 = 1/2 + (1/2) E_T Re <0|U^T|0>`.
pub fn hadamard_probability(dist: &PhaseDistribution, tau: u64) -> f64 {
    let mean: f64 = dist
        .entries()
        .iter()
        .map(|e| e.weight * mean_cos(e.phase, tau))
        .sum();
    (0.5 + 0.5 * mean).clamp(0.0, 1.0)
}

/// Inverse-Fourier phase estimation with `precision + extra` qubits. The
/// estimate counts as zero when the outcome `l` satisfies
/// `|l| < 2^{extra - 1}` (that is, it rounds to zero at `precision` bits).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseEstimator {
    pub precision: u32,
    pub extra: u32,
}

impl PhaseEstimator {
    pub fn new(delta_p: f64, delta_e: f64) -> Self {
        let (precision, extra) = phase_qubits(delta_p, delta_e);
        Self { precision, extra }
    }

    pub fn qubits(&self) -> u32 {
        self.precision + self.extra
    }

    /// Controlled applications of `U`: `2^t - 1`.
    pub fn query_count(&self) -> u64 {
        (1u64 << self.qubits()) - 1
    }

    /// Probability that the estimate of eigenphase `theta` reads zero.
    pub fn accept(&self, theta: f64) -> f64 {
        let m = (1u64 << self.qubits()) as f64;
        let half = if self.extra == 0 {
            0
        } else {
            (1i64 << (self.extra - 1)) - 1
        };
        let phi = reduce(theta) / (2.0 * PI);
        (-half..=half)
            .map(|l| fejer(phi - l as f64 / m, m))
            .sum::<f64>()
            .min(1.0)
    }
}

/// `|(1/M) sum_{k<M} e^{2 pi i k d}|^2`.
fn fejer(d: f64, m: f64) -> f64 {
    let d = d - d.round();
    if d == 0.0 {
        return 1.0;
    }
    let num = (PI * m * d).sin();
    let den = m * (PI * d).sin();
    (num / den).powi(2)
}

fn outcome(
    alg: Algorithm,
    x: &Bits,
    f_x: bool,
    p_one: f64,
    params: AlgorithmParams,
    query_count: u64,
) -> AlgorithmOutcome {
    AlgorithmOutcome {
        alg,
        x: x.to_string(),
        f_x: u8::from(f_x),
        p_one,
        lower: None,
        upper: None,
        params,
        query_count,
        sampled: None,
    }
}

/// Exact outcome of `alg` on the phase distribution of `U_x`.
pub fn run(
    alg: Algorithm,
    x: &Bits,
    f_x: bool,
    dist: &PhaseDistribution,
    w: f64,
) -> AlgorithmOutcome {
    let params = AlgorithmParams::for_algorithm(alg, w);
    match alg {
        Algorithm::PhaseEstimation => {
            let (dp, de) = (params.delta_p.expect("set"), params.delta_e.expect("set"));
            let est = PhaseEstimator::new(dp, de);
            let p_one: f64 = dist
                .entries()
                .iter()
                .map(|e| e.weight * est.accept(e.phase))
                .sum();
            let window = dist.window_mass(dp);
            let mut out = outcome(
                alg,
                x,
                f_x,
                p_one.clamp(0.0, 1.0),
                params,
                est.query_count(),
            );
            out.lower = Some((1.0 - de) * dist.zero_mass());
            out.upper = Some((window + de * (dist.total() - window)).min(1.0));
            out
        }
        Algorithm::HadamardTest => {
            let tau = params.tau.expect("set");
            outcome(alg, x, f_x, hadamard_probability(dist, tau), params, tau)
        }
        Algorithm::RandomPower => {
            let tau = params.tau.expect("set");
            outcome(
                alg,
                x,
                f_x,
                random_power_probability(dist, tau),
                params,
                tau,
            )
        }
    }
}

pub fn run_alg1(ops: &InputOperators, spectrum: &ReflectionSpectrum, w: f64) -> AlgorithmOutcome {
    run(
        Algorithm::PhaseEstimation,
        &ops.x,
        ops.value,
        &PhaseDistribution::from_spectrum(spectrum),
        w,
    )
}

pub fn run_alg2(ops: &InputOperators, spectrum: &ReflectionSpectrum, w: f64) -> AlgorithmOutcome {
    run(
        Algorithm::HadamardTest,
        &ops.x,
        ops.value,
        &PhaseDistribution::from_spectrum(spectrum),
        w,
    )
}

pub fn run_alg3(ops: &InputOperators, spectrum: &ReflectionSpectrum, w: f64) -> AlgorithmOutcome {
    run(
        Algorithm::RandomPower,
        &ops.x,
        ops.value,
        &PhaseDistribution::from_spectrum(spectrum),
        w,
    )
}

/// Exact outcome plus a seeded Monte-Carlo run of the measurement procedure.
pub fn sample(
    alg: Algorithm,
    x: &Bits,
    f_x: bool,
    dist: &PhaseDistribution,
    w: f64,
    trials: u64,
    seed: u64,
) -> Result<AlgorithmOutcome> {
    if trials == 0 {
        return Err(Error::Validation("trials must be at least 1".into()));
    }
    let mut out = run(alg, x, f_x, dist, w);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut successes = 0u64;
    match alg {
        Algorithm::PhaseEstimation => {
            let est = PhaseEstimator::new(
                out.params.delta_p.expect("set"),
                out.params.delta_e.expect("set"),
            );
            let entries = dist.entries();
            let accept: Vec<f64> = entries.iter().map(|e| est.accept(e.phase)).collect();
            let total = dist.total();
            for _ in 0..trials {
                // Collapse onto an eigenvector, then read the estimate.
                let mut r = rng.random::<f64>() * total;
                let mut pick = entries.len() - 1;
                for (i, e) in entries.iter().enumerate() {
                    if r < e.weight {
                        pick = i;
                        break;
                    }
                    r -= e.weight;
                }
                if rng.random::<f64>() < accept[pick] {
                    successes += 1;
                }
            }
        }
        Algorithm::HadamardTest | Algorithm::RandomPower => {
            let tau = out.params.tau.expect("set");
            for _ in 0..trials {
                let t = rng.random_range(1..=tau);
                let a = dist.amplitude(t);
                let p = if alg == Algorithm::HadamardTest {
                    0.5 * (1.0 + a.re)
                } else {
                    a.norm_sqr()
                };
                if rng.random::<f64>() < p {
                    successes += 1;
                }
            }
        }
    }
    out.sampled = Some(Sampled {
        trials,
        successes,
        seed,
    });
    Ok(out)
}

/// Largest number of oracle calls a run of `alg` can make.
pub fn query_count(alg: Algorithm, params: &AlgorithmParams) -> u64 {
    match alg {
        Algorithm::PhaseEstimation => PhaseEstimator::new(
            params.delta_p.unwrap_or(0.01),
            params.delta_e.unwrap_or(0.1),
        )
        .query_count(),
        Algorithm::HadamardTest | Algorithm::RandomPower => params.tau.unwrap_or(0),
    }
}

#[cfg(test)]
mod tests;
