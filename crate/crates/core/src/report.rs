//! End-to-end verification of one function: solve (or load) the dual, build
//! the graph, and run every spectral and algorithmic check per input.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::advsdp::{
    duality_gap, evaluate_primal, solve_dual, DualSolution, SolveStats, SolverOptions,
};
use crate::algsim::{self, Algorithm, AlgorithmOutcome, PhaseDistribution};
use crate::boolfn::BooleanFunction;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::graphrefl::AdversaryGraph;
use crate::spectral::{
    input_spectrum, padded_t, verify_bipartite_gap, verify_effective_gap, verify_phase_gap,
    witness_negative, witness_positive, GapReport,
};

/// Completeness and soundness thresholds per algorithm: `(f=1 lower, f=0 upper)`.
/// Algorithm 1 compares its envelopes; the soundness side is strict.
pub const ALG1_BOUNDS: (f64, f64) = (0.8, 0.4);
pub const ALG2_BOUNDS: (f64, f64) = (0.9, 0.88);
pub const ALG3_BOUNDS: (f64, f64) = (0.64, 0.61);

/// One group of checks selectable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Feasibility,
    Witness,
    BipartiteGap,
    EffectiveGap,
    PhaseGap,
    Jordan,
    Algorithms,
}

impl Check {
    pub const ALL: [Check; 7] = [
        Check::Feasibility,
        Check::Witness,
        Check::BipartiteGap,
        Check::EffectiveGap,
        Check::PhaseGap,
        Check::Jordan,
        Check::Algorithms,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Feasibility => "feasibility",
            Check::Witness => "witness",
            Check::BipartiteGap => "bipartite-gap",
            Check::EffectiveGap => "effective-gap",
            Check::PhaseGap => "phase-gap",
            Check::Jordan => "jordan",
            Check::Algorithms => "algorithms",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = Error;

    /// Accepts the check names plus the numeric aliases `3.1` to `3.5`.
    fn from_str(s: &str) -> Result<Self> {
        let c = match s.to_ascii_lowercase().as_str() {
            "feasibility" => Check::Feasibility,
            "witness" | "3.1" => Check::Witness,
            "bipartite-gap" | "3.2" => Check::BipartiteGap,
            "effective-gap" | "3.3" => Check::EffectiveGap,
            "phase-gap" | "3.4" => Check::PhaseGap,
            "jordan" | "3.5" => Check::Jordan,
            "algorithms" => Check::Algorithms,
            other => {
                return Err(Error::Validation(format!(
                    "unknown check {other:?}; expected one of feasibility, witness, bipartite-gap, effective-gap, phase-gap, jordan, algorithms"
                )))
            }
        };
        Ok(c)
    }
}

/// A function with its dual solution and graph.
#[derive(Clone, Debug)]
pub struct Instance {
    pub name: String,
    pub function: BooleanFunction,
    pub dual: DualSolution,
    pub stats: Option<SolveStats>,
    pub graph: AdversaryGraph,
}

impl Instance {
    pub fn solve(name: &str, f: &BooleanFunction, config: &RunConfig) -> Result<Self> {
        let out = solve_dual(f, &config.solver_options())?;
        Self::assemble(name, f, out.solution, Some(out.stats), config)
    }

    pub fn with_dual(
        name: &str,
        f: &BooleanFunction,
        dual: DualSolution,
        config: &RunConfig,
    ) -> Result<Self> {
        Self::assemble(name, f, dual, None, config)
    }

    fn assemble(
        name: &str,
        f: &BooleanFunction,
        dual: DualSolution,
        stats: Option<SolveStats>,
        config: &RunConfig,
    ) -> Result<Self> {
        let graph = AdversaryGraph::build(f, &dual, config.kappa, config.tol_ker)?;
        Ok(Self {
            name: name.into(),
            function: f.clone(),
            dual,
            stats,
            graph,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    #[serde(rename = "W")]
    pub w: f64,
    pub m: usize,
    pub feasibility_residual: f64,
    pub stats: Option<SolveStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessRow {
    pub x: String,
    pub f_x: u8,
    pub overlap: f64,
    pub bound: f64,
    pub residual: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JordanRow {
    pub x: String,
    pub blocks: usize,
    pub rotations: usize,
    pub reconstruction: f64,
    pub block_residual: f64,
    pub pairing_residual: f64,
    pub weight_error: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmCheck {
    pub alg: Algorithm,
    pub x: String,
    pub f_x: u8,
    /// Which quantity was compared: `p_one`, `lower` or `upper`.
    pub quantity: String,
    pub measured: f64,
    pub bound: f64,
    /// `measured >= bound` when true, `measured <= bound` (or `<` for
    /// Algorithm 1 soundness) otherwise.
    pub lower_bound: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub function: String,
    pub n: usize,
    pub domain_size: usize,
    pub kappa: f64,
    pub solver: SolverMeta,
    pub checks: Vec<Check>,
    pub feasibility: Option<BoundCheck>,
    /// `|Delta |0>|^2 >= 1 / (1 + kappa^2)`.
    pub kernel_zero_mass: Option<BoundCheck>,
    pub witnesses: Vec<WitnessRow>,
    pub gap_reports: Vec<GapReport>,
    pub jordan: Vec<JordanRow>,
    pub outcomes: Vec<AlgorithmOutcome>,
    pub algorithm_checks: Vec<AlgorithmCheck>,
    /// Names of failed invariants, in a stable order.
    pub failures: Vec<String>,
    pub errors: Vec<String>,
    pub pass: bool,
}

#[derive(Default)]
struct InputResult {
    witness: Option<WitnessRow>,
    gaps: Vec<GapReport>,
    jordan: Option<JordanRow>,
    outcomes: Vec<AlgorithmOutcome>,
    algorithm_checks: Vec<AlgorithmCheck>,
    errors: Vec<String>,
}

fn algorithm_check(out: &AlgorithmOutcome) -> AlgorithmCheck {
    let positive = out.f_x == 1;
    let (quantity, measured, bound, pass) = match out.alg {
        Algorithm::PhaseEstimation => {
            if positive {
                let v = out.lower.expect("set for alg 1");
                ("lower", v, ALG1_BOUNDS.0, v >= ALG1_BOUNDS.0)
            } else {
                let v = out.upper.expect("set for alg 1");
                ("upper", v, ALG1_BOUNDS.1, v < ALG1_BOUNDS.1)
            }
        }
        Algorithm::HadamardTest | Algorithm::RandomPower => {
            let b = if out.alg == Algorithm::HadamardTest {
                ALG2_BOUNDS
            } else {
                ALG3_BOUNDS
            };
            if positive {
                ("p_one", out.p_one, b.0, out.p_one >= b.0)
            } else {
                ("p_one", out.p_one, b.1, out.p_one <= b.1)
            }
        }
    };
    AlgorithmCheck {
        alg: out.alg,
        x: out.x.clone(),
        f_x: out.f_x,
        quantity: quantity.into(),
        measured,
        bound,
        lower_bound: positive,
        pass,
    }
}

fn check_input(inst: &Instance, pos: usize, config: &RunConfig, checks: &[Check]) -> InputResult {
    let mut r = InputResult::default();
    let g = &inst.graph;
    let x = &inst.function.domain()[pos];
    let value = inst.function.value_at(pos);
    let wants = |c: Check| checks.contains(&c);
    let ops = match g.input_operators(x) {
        Ok(o) => o,
        Err(e) => {
            r.errors.push(format!("x={x}: {e}"));
            return r;
        }
    };

    let witness = if value {
        witness_positive(g, &inst.dual, x)
    } else {
        witness_negative(g, &inst.dual, x)
    };
    match &witness {
        Ok(w) if wants(Check::Witness) => {
            r.witness = Some(WitnessRow {
                x: x.to_string(),
                f_x: u8::from(value),
                overlap: w.overlap,
                bound: w.bound,
                residual: w.residual,
                pass: w.holds(),
            })
        }
        Ok(_) => {}
        Err(e) => r.errors.push(format!("witness x={x}: {e}")),
    }

    if !value && wants(Check::BipartiteGap) {
        if let Ok(w) = &witness {
            match verify_bipartite_gap(&ops.b_gpx, &padded_t(g), &w.psi, &config.gamma_grid) {
                Ok(mut rep) => {
                    rep.x = Some(x.to_string());
                    rep.rejudge(config.tol_gap);
                    r.gaps.push(rep);
                }
                Err(e) => r.errors.push(format!("bipartite-gap x={x}: {e}")),
            }
        }
    }
    if !value && wants(Check::EffectiveGap) {
        match verify_effective_gap(g, x, &config.c_grid) {
            Ok(mut rep) => {
                rep.rejudge(config.tol_gap);
                r.gaps.push(rep);
            }
            Err(e) => r.errors.push(format!("effective-gap x={x}: {e}")),
        }
    }

    if !(wants(Check::PhaseGap) || wants(Check::Jordan) || wants(Check::Algorithms)) {
        return r;
    }
    let spectrum = match input_spectrum(g, &ops) {
        Ok(s) => s,
        Err(e) => {
            r.errors.push(format!("jordan x={x}: {e}"));
            return r;
        }
    };
    if wants(Check::PhaseGap) {
        let mut rep = verify_phase_gap(&ops, &spectrum, &config.theta_grid, g.w, g.kappa);
        rep.rejudge(config.tol_gap);
        r.gaps.push(rep);
    }
    if wants(Check::Jordan) {
        let c = spectrum.check(&ops.pi_matrix(), &g.delta, &ops.unitary, &g.zero_vector());
        r.jordan = Some(JordanRow {
            x: x.to_string(),
            blocks: spectrum.blocks.len(),
            rotations: spectrum
                .blocks
                .iter()
                .filter(|b| b.v_perp.is_some())
                .count(),
            reconstruction: c.reconstruction,
            block_residual: c.block_residual,
            pairing_residual: c.pairing_residual,
            weight_error: c.weight_error,
            pass: c.passes(),
        });
    }
    if wants(Check::Algorithms) {
        let dist = PhaseDistribution::from_spectrum(&spectrum);
        for alg in Algorithm::ALL {
            let out = if config.trials > 0 {
                let seed = config
                    .seed
                    .wrapping_add((pos as u64) * 3 + u64::from(alg.number()));
                match algsim::sample(alg, x, value, &dist, g.w, config.trials, seed) {
                    Ok(o) => o,
                    Err(e) => {
                        r.errors.push(format!("alg {alg} x={x}: {e}"));
                        continue;
                    }
                }
            } else {
                algsim::run(alg, x, value, &dist, g.w)
            };
            r.algorithm_checks.push(algorithm_check(&out));
            r.outcomes.push(out);
        }
    }
    r
}

/// Run the selected checks over every input of the instance.
pub fn verify(inst: &Instance, config: &RunConfig, checks: &[Check]) -> VerificationReport {
    let mut checks = checks.to_vec();
    checks.sort();
    checks.dedup();
    let f = &inst.function;
    let g = &inst.graph;
    let residual = inst.dual.feasibility_residual(f);

    let feasibility = checks.contains(&Check::Feasibility).then_some(BoundCheck {
        measured: residual,
        bound: config.tol_feas,
        pass: residual <= config.tol_feas,
    });
    let kernel_zero_mass = checks.contains(&Check::Witness).then(|| {
        let mass = g.zero_kernel_mass();
        let bound = 1.0 / (1.0 + g.kappa * g.kappa);
        BoundCheck {
            measured: mass,
            bound,
            pass: mass >= bound - 1e-9,
        }
    });

    let per_input: Vec<InputResult> = (0..f.len())
        .into_par_iter()
        .map(|pos| check_input(inst, pos, config, &checks))
        .collect();

    let mut report = VerificationReport {
        function: inst.name.clone(),
        n: f.n(),
        domain_size: f.len(),
        kappa: g.kappa,
        solver: SolverMeta {
            w: inst.dual.w(),
            m: inst.dual.m(),
            feasibility_residual: residual,
            stats: inst.stats.clone(),
        },
        checks: checks.clone(),
        feasibility,
        kernel_zero_mass,
        witnesses: Vec::new(),
        gap_reports: Vec::new(),
        jordan: Vec::new(),
        outcomes: Vec::new(),
        algorithm_checks: Vec::new(),
        failures: Vec::new(),
        errors: Vec::new(),
        pass: true,
    };
    for r in per_input {
        report.witnesses.extend(r.witness);
        report.gap_reports.extend(r.gaps);
        report.jordan.extend(r.jordan);
        report.outcomes.extend(r.outcomes);
        report.algorithm_checks.extend(r.algorithm_checks);
        report.errors.extend(r.errors);
    }
    report
        .gap_reports
        .sort_by(|a, b| a.check.cmp(&b.check).then_with(|| a.x.cmp(&b.x)));
    report.failures = collect_failures(&report);
    report.pass = report.failures.is_empty() && report.errors.is_empty();
    report
}

fn collect_failures(r: &VerificationReport) -> Vec<String> {
    let mut out = Vec::new();
    if r.feasibility.as_ref().is_some_and(|c| !c.pass) {
        out.push("feasibility".to_string());
    }
    if r.kernel_zero_mass.as_ref().is_some_and(|c| !c.pass) {
        out.push("kernel-zero-mass".to_string());
    }
    out.extend(
        r.witnesses
            .iter()
            .filter(|w| !w.pass)
            .map(|w| format!("witness x={}", w.x)),
    );
    out.extend(
        r.gap_reports
            .iter()
            .filter(|g| !g.pass)
            .map(|g| format!("{} x={}", g.check, g.x.as_deref().unwrap_or("-"))),
    );
    out.extend(
        r.jordan
            .iter()
            .filter(|j| !j.pass)
            .map(|j| format!("jordan x={}", j.x)),
    );
    out.extend(
        r.algorithm_checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| format!("alg{} x={}", c.alg, c.x)),
    );
    out
}

impl VerificationReport {
    /// One line per check group: `PASS` or `FAIL` with a short summary.
    pub fn summary_lines(&self) -> Vec<String> {
        let mut lines = Vec::new();
        let status = |ok: bool| if ok { "PASS" } else { "FAIL" };
        for c in &self.checks {
            let (ok, detail) = match c {
                Check::Feasibility => {
                    let b = self.feasibility.as_ref().expect("feasibility computed");
                    (
                        b.pass,
                        format!(
                            "residual {:.3e} {} {:.1e}",
                            b.measured,
                            if b.pass { "<=" } else { ">" },
                            b.bound
                        ),
                    )
                }
                Check::Witness => {
                    let k = self
                        .kernel_zero_mass
                        .as_ref()
                        .expect("kernel mass computed");
                    let ok = k.pass && self.witnesses.iter().all(|w| w.pass);
                    (
                        ok,
                        format!(
                            "{} witnesses, |Delta|0>|^2 = {:.6}",
                            self.witnesses.len(),
                            k.measured
                        ),
                    )
                }
                Check::BipartiteGap | Check::EffectiveGap | Check::PhaseGap => {
                    let reps: Vec<&GapReport> = self
                        .gap_reports
                        .iter()
                        .filter(|g| g.check == c.name())
                        .collect();
                    let worst = reps
                        .iter()
                        .map(|g| g.worst_margin())
                        .fold(f64::NEG_INFINITY, f64::max);
                    (
                        reps.iter().all(|g| g.pass),
                        format!("{} inputs, worst margin {worst:.3e}", reps.len()),
                    )
                }
                Check::Jordan => {
                    let worst = self
                        .jordan
                        .iter()
                        .map(|j| j.reconstruction)
                        .fold(0.0, f64::max);
                    (
                        self.jordan.iter().all(|j| j.pass),
                        format!("max reconstruction error {worst:.3e}"),
                    )
                }
                Check::Algorithms => (
                    self.algorithm_checks.iter().all(|a| a.pass),
                    format!("{} outcome checks", self.algorithm_checks.len()),
                ),
            };
            lines.push(format!(
                "{} {} {}: {}",
                status(ok),
                self.function,
                c,
                detail
            ));
        }
        for e in &self.errors {
            lines.push(format!("ERROR {}: {e}", self.function));
        }
        lines
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComposeReport {
    pub w_f: f64,
    pub w_g: f64,
    pub w_fg: f64,
    pub product: f64,
    pub abs_deviation: f64,
    pub rel_deviation: f64,
}

/// Solve `f`, `g` and `f o g`, and compare `W_{f o g}` with `W_f W_g`.
pub fn compose_report(
    f: &BooleanFunction,
    g: &BooleanFunction,
    cap: usize,
    opts: &SolverOptions,
) -> Result<ComposeReport> {
    let fg = f.compose(g, cap)?;
    let w_f = solve_dual(f, opts)?.solution.w();
    let w_g = solve_dual(g, opts)?.solution.w();
    let w_fg = solve_dual(&fg, opts)?.solution.w();
    let product = w_f * w_g;
    let abs_deviation = (w_fg - product).abs();
    Ok(ComposeReport {
        w_f,
        w_g,
        w_fg,
        product,
        abs_deviation,
        rel_deviation: abs_deviation / product,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub norm: f64,
    pub max_bit_norm: f64,
    pub value: f64,
    #[serde(rename = "W")]
    pub w: Option<f64>,
    pub duality_gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaFile {
    /// Rows in domain order.
    pub gamma: Vec<Vec<f64>>,
}

impl GammaFile {
    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        let size = self.gamma.len();
        if self.gamma.iter().any(|r| r.len() != size) {
            return Err(Error::InvalidCertificate("Gamma must be square".into()));
        }
        Ok(DMatrix::from_fn(size, size, |r, c| self.gamma[r][c]))
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self {
            gamma: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }
}

/// Evaluate an adversary matrix, optionally against a dual solution.
pub fn certify(
    f: &BooleanFunction,
    gamma: &DMatrix<f64>,
    dual: Option<&DualSolution>,
) -> Result<CertifyReport> {
    let cert = evaluate_primal(f, gamma)?;
    Ok(CertifyReport {
        norm: cert.norm,
        max_bit_norm: cert.max_bit_norm,
        value: cert.value,
        w: dual.map(DualSolution::w),
        duality_gap: dual.map(|d| duality_gap(d, &cert)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::advsdp::library;

    #[test]
    fn check_names_and_aliases() {
        for c in Check::ALL {
            assert_eq!(c.name().parse::<Check>().unwrap(), c);
        }
        assert_eq!("3.4".parse::<Check>().unwrap(), Check::PhaseGap);
        assert_eq!("3.2".parse::<Check>().unwrap(), Check::BipartiteGap);
        assert!("lemma".parse::<Check>().is_err());
    }

    #[test]
    fn library_instances_pass_everything() {
        let config = RunConfig::default();
        for cert in [library::or(1), library::or(2), library::majority3()] {
            let inst = Instance::with_dual(&cert.name, &cert.function, cert.dual.clone(), &config)
                .unwrap();
            let report = verify(&inst, &config, &Check::ALL);
            assert!(report.pass, "{:?} {:?}", report.failures, report.errors);
            assert_eq!(report.summary_lines().len(), Check::ALL.len());
            assert_eq!(report.outcomes.len(), 3 * cert.function.len());
        }
    }

    #[test]
    fn corrupted_dual_names_the_failing_invariant() {
        let config = RunConfig::default();
        let cert = library::or(2);
        let bad = cert.dual.scaled(&cert.function, 1.0);
        let mut rows: Vec<Vec<Vec<f64>>> = (0..cert.function.len())
            .map(|p| (0..2).map(|j| bad.vector(p, j).to_vec()).collect())
            .collect();
        rows[0][0][0] *= 0.5;
        let bad = DualSolution::from_vectors(&cert.function, rows).unwrap();
        let inst = Instance::with_dual("bad", &cert.function, bad, &config).unwrap();
        let report = verify(&inst, &config, &[Check::Feasibility]);
        assert!(!report.pass);
        assert_eq!(report.failures, vec!["feasibility".to_string()]);
    }

    #[test]
    fn reports_are_deterministic() {
        let config = RunConfig {
            trials: 200,
            seed: 5,
            ..RunConfig::default()
        };
        let cert = library::and(2);
        let inst =
            Instance::with_dual(&cert.name, &cert.function, cert.dual.clone(), &config).unwrap();
        let a = crate::io::to_json_string(&verify(&inst, &config, &Check::ALL));
        let b = crate::io::to_json_string(&verify(&inst, &config, &Check::ALL));
        assert_eq!(a, b);
    }

    #[test]
    fn certify_identity_and_gap() {
        let cert = library::or(2);
        let rep = certify(&cert.function, &cert.gamma, Some(&cert.dual)).unwrap();
        assert!((rep.value - 2f64.sqrt()).abs() < 1e-12);
        assert!(rep.duality_gap.unwrap().abs() < 1e-12);
        let file = GammaFile::from_matrix(&cert.gamma);
        assert_eq!(file.matrix().unwrap(), cert.gamma);
        assert!(GammaFile {
            gamma: vec![vec![0.0, 1.0]]
        }
        .matrix()
        .is_err());
    }
}
