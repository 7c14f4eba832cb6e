//! Acceptance suite: the thirteen end-to-end criteria on the canonical
//! function set with solver-produced duals at the default `kappa`.
//!
//! Prints one `PASS`/`FAIL` line per criterion and exits nonzero if any
//! criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use advq_core::advsdp::library;
use advq_core::algsim::{self, Algorithm, PhaseDistribution};
use advq_core::boolfn::{BooleanFunction, DEFAULT_COMPOSE_CAP};
use advq_core::config::RunConfig;
use advq_core::report::{compose_report, verify, Check, Instance, VerificationReport};
use advq_core::spectral::{input_spectrum, witness_negative, witness_positive};
use nalgebra::DVector;
use rayon::prelude::*;

struct Criterion {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn canonical() -> Vec<(&'static str, BooleanFunction)> {
    let or2 = BooleanFunction::or(2);
    vec![
        ("IDENT_1", BooleanFunction::identity()),
        ("OR_2", or2.clone()),
        ("AND_2", BooleanFunction::and(2)),
        ("PARITY_2", BooleanFunction::parity(2)),
        ("OR_3", BooleanFunction::or(3)),
        ("MAJ_3", BooleanFunction::majority(3)),
        (
            "OR_2.OR_2",
            or2.compose(&or2, DEFAULT_COMPOSE_CAP).expect("4 bits"),
        ),
    ]
}

fn brute_force_alg3(u: &nalgebra::DMatrix<f64>, zero: usize, tau: u64) -> f64 {
    let mut v = DVector::zeros(u.nrows());
    v[zero] = 1.0;
    let mut acc = 0.0;
    for _ in 0..tau {
        v = u * v;
        acc += v[zero] * v[zero];
    }
    acc / tau as f64
}

fn worst<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn main() -> ExitCode {
    let start = Instant::now();
    let config = RunConfig::default();
    let functions = canonical();

    let instances: Vec<Instance> = functions
        .par_iter()
        .map(|(name, f)| {
            Instance::solve(name, f, &config).unwrap_or_else(|e| panic!("{name}: {e}"))
        })
        .collect();
    let reports: Vec<VerificationReport> = instances
        .par_iter()
        .map(|i| verify(i, &config, &Check::ALL))
        .collect();
    for r in &reports {
        for e in &r.errors {
            println!("error in {}: {e}", r.function);
        }
    }
    let mut out = Vec::new();

    // 1. SDP values against the closed-form sandwich.
    {
        let mut pass = true;
        let mut parts = Vec::new();
        for (name, cert) in [
            ("IDENT_1", library::or(1)),
            ("OR_2", library::or(2)),
            ("AND_2", library::and(2)),
            ("PARITY_2", library::parity(2)),
            ("OR_3", library::or(3)),
        ] {
            let primal = advq_core::advsdp::evaluate_primal(&cert.function, &cert.gamma)
                .expect("valid Gamma");
            let sandwich = (primal.value - cert.dual.w()).abs() <= 1e-12;
            let inst = instances.iter().find(|i| i.name == name).expect("in suite");
            let rel = (inst.dual.w() - cert.value).abs() / cert.value;
            pass &= sandwich && rel <= 1e-4;
            parts.push(format!("{name} W={:.9} rel={rel:.1e}", inst.dual.w()));
        }
        out.push(Criterion {
            id: 1,
            name: "SDP values",
            pass,
            detail: parts.join(", "),
        });
    }

    // 2. Feasibility of every returned dual.
    {
        let w = worst(
            instances
                .iter()
                .map(|i| i.dual.feasibility_residual(&i.function)),
        );
        out.push(Criterion {
            id: 2,
            name: "dual feasibility",
            pass: w <= 1e-8,
            detail: format!("worst residual {w:.3e} (<= 1e-8)"),
        });
    }

    // 3. Witness tightness on IDENT_1.
    {
        let inst = &instances[0];
        let x1 = "1".parse().unwrap();
        let x0 = "0".parse().unwrap();
        let pos = witness_positive(&inst.graph, &inst.dual, &x1).expect("f(1) = 1");
        let neg = witness_negative(&inst.graph, &inst.dual, &x0).expect("f(0) = 0");
        let (e1, e0) = ((pos.overlap - 0.9).abs(), (neg.overlap - 1.0 / 18.0).abs());
        out.push(Criterion {
            id: 3,
            name: "witness overlaps on IDENT_1",
            pass: e1 <= 1e-12 && e0 <= 1e-12,
            detail: format!("positive {:.15} negative {:.15}", pos.overlap, neg.overlap),
        });
    }

    let gap = |check: &str| -> (bool, f64, usize) {
        let reps: Vec<_> = reports
            .iter()
            .flat_map(|r| r.gap_reports.iter())
            .filter(|g| g.check == check)
            .collect();
        (
            reps.iter().all(|g| g.pass),
            worst(reps.iter().map(|g| g.worst_margin())),
            reps.len(),
        )
    };

    // 4. Bipartite gap.
    {
        let (pass, margin, count) = gap("bipartite-gap");
        let grid_ok = config.gamma_grid.len() >= 50;
        out.push(Criterion {
            id: 4,
            name: "bipartite gap mass <= 8 gamma^2 / delta",
            pass: pass && count > 0 && grid_ok,
            detail: format!(
                "{count} inputs x {} gammas, worst mass - bound {margin:.3e}",
                config.gamma_grid.len()
            ),
        });
    }

    // 5. Effective gap, with zero kernel mass at c = 0.
    {
        let (pass, margin, count) = gap("effective-gap");
        let at_zero = worst(
            reports
                .iter()
                .flat_map(|r| r.gap_reports.iter())
                .filter(|g| g.check == "effective-gap")
                .flat_map(|g| {
                    g.rows
                        .iter()
                        .filter(|row| row.parameter == 0.0)
                        .map(|row| row.measured)
                }),
        );
        out.push(Criterion {
            id: 5,
            name: "effective gap mass <= 72 (1 + 1/W) c^2",
            pass: pass && count > 0 && at_zero <= 1e-12 && config.c_grid.len() == 21,
            detail: format!(
                "{count} inputs, worst mass - bound {margin:.3e}, mass at c=0 {at_zero:.1e}"
            ),
        });
    }

    // 6. Phase gap of U_x.
    {
        let (pass, margin, count) = gap("phase-gap");
        let fixed = reports
            .iter()
            .flat_map(|r| r.gap_reports.iter())
            .filter(|g| g.check == "phase-gap")
            .flat_map(|g| {
                g.rows
                    .iter()
                    .filter(|row| row.lower_bound)
                    .map(|row| row.measured)
            })
            .fold(f64::INFINITY, f64::min);
        out.push(Criterion {
            id: 6,
            name: "phase gap of U_x",
            pass: pass && count > 0,
            detail: format!(
                "{count} inputs, min eigenvalue-one mass {fixed:.6}, worst margin {margin:.3e}"
            ),
        });
    }

    // 7-9. Algorithms.
    for (id, alg, name) in [
        (
            7,
            Algorithm::PhaseEstimation,
            "algorithm 1 envelopes (>= 4/5, < 2/5)",
        ),
        (
            8,
            Algorithm::HadamardTest,
            "algorithm 2 exact (>= 0.9, <= 0.88)",
        ),
        (
            9,
            Algorithm::RandomPower,
            "algorithm 3 exact (>= 0.64, <= 0.61)",
        ),
    ] {
        let rows: Vec<_> = reports
            .iter()
            .flat_map(|r| r.algorithm_checks.iter())
            .filter(|c| c.alg == alg)
            .collect();
        let min_pos = rows
            .iter()
            .filter(|c| c.f_x == 1)
            .map(|c| c.measured)
            .fold(f64::INFINITY, f64::min);
        let max_neg = worst(rows.iter().filter(|c| c.f_x == 0).map(|c| c.measured));
        let expected: usize = instances.iter().map(|i| i.function.len()).sum();
        out.push(Criterion {
            id,
            name,
            pass: rows.len() == expected && rows.iter().all(|c| c.pass),
            detail: format!(
                "{} inputs, min over f=1 {min_pos:.6}, max over f=0 {max_neg:.6}",
                rows.len()
            ),
        });
    }

    // 10. Jordan reconstruction.
    {
        let rows: Vec<_> = reports.iter().flat_map(|r| r.jordan.iter()).collect();
        let rec = worst(rows.iter().map(|j| j.reconstruction));
        let blk = worst(rows.iter().map(|j| j.block_residual));
        out.push(Criterion {
            id: 10,
            name: "Jordan reconstruction",
            pass: !rows.is_empty() && rec <= 1e-10 && blk <= 1e-9 && rows.iter().all(|j| j.pass),
            detail: format!(
                "{} inputs, max |U - rebuilt| {rec:.3e}, max block residual {blk:.3e}",
                rows.len()
            ),
        });
    }

    // 11. Composition.
    {
        let opts = config.solver_options();
        let or2 = BooleanFunction::or(2);
        let parity2 = BooleanFunction::parity(2);
        let a = compose_report(&or2, &or2, DEFAULT_COMPOSE_CAP, &opts).expect("OR_2 o OR_2");
        let b = compose_report(&parity2, &parity2, DEFAULT_COMPOSE_CAP, &opts)
            .expect("PARITY_2 o PARITY_2");
        out.push(Criterion {
            id: 11,
            name: "composition",
            pass: a.abs_deviation <= 2e-3 && b.abs_deviation <= 4e-3,
            detail: format!(
                "OR: W_fg={:.6} W_f W_g={:.6} dev {:.2e}; PARITY: W_fg={:.6} W_f W_g={:.6} dev {:.2e}",
                a.w_fg, a.product, a.abs_deviation, b.w_fg, b.product, b.abs_deviation
            ),
        });
    }

    // 12. Monte-Carlo consistency on IDENT_1.
    {
        let inst = &instances[0];
        let g = &inst.graph;
        let trials = 100_000u64;
        let mut pass = true;
        let mut parts = Vec::new();
        for (pos, x) in inst.function.domain().iter().enumerate() {
            let ops = g.input_operators(x).expect("in domain");
            let dist =
                PhaseDistribution::from_spectrum(&input_spectrum(g, &ops).expect("projectors"));
            for alg in Algorithm::ALL {
                let seed = 0x5eed + 10 * pos as u64 + u64::from(alg.number());
                let o = algsim::sample(alg, x, ops.value, &dist, g.w, trials, seed)
                    .expect("trials > 0");
                let s = o.sampled.expect("sampled");
                let rate = s.successes as f64 / trials as f64;
                let sigma = (o.p_one * (1.0 - o.p_one) / trials as f64).sqrt();
                let ok = (rate - o.p_one).abs() <= 4.0 * sigma;
                pass &= ok;
                parts.push(format!("x={x} alg{alg} {rate:.4}/{:.4}", o.p_one));
            }
        }
        out.push(Criterion {
            id: 12,
            name: "Monte-Carlo within 4 sigma",
            pass,
            detail: parts.join(", "),
        });
    }

    // 13. Analytic T-average against explicit matrix powers.
    {
        let errs: Vec<f64> = instances
            .par_iter()
            .flat_map_iter(|inst| {
                let g = &inst.graph;
                inst.function.domain().iter().flat_map(move |x| {
                    let ops = g.input_operators(x).expect("in domain");
                    let dist = PhaseDistribution::from_spectrum(
                        &input_spectrum(g, &ops).expect("projectors"),
                    );
                    [1u64, 10, 100, 1000]
                        .into_iter()
                        .map(move |tau| {
                            (algsim::random_power_probability(&dist, tau)
                                - brute_force_alg3(&ops.unitary, g.index.zero(), tau))
                            .abs()
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        let w = worst(errs.iter().copied());
        out.push(Criterion {
            id: 13,
            name: "algorithm 3 analytic vs matrix powers",
            pass: w <= 1e-9,
            detail: format!("{} cases (tau <= 1000), max error {w:.3e}", errs.len()),
        });
    }

    let mut all = true;
    for c in &out {
        all &= c.pass;
        println!(
            "[{}] {:>2} {}: {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            c.detail
        );
    }
    let passed = out.iter().filter(|c| c.pass).count();
    println!(
        "acceptance: {passed}/{} criteria passed in {:.1}s",
        out.len(),
        start.elapsed().as_secs_f64()
    );
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
