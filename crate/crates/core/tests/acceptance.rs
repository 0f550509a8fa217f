//! Acceptance runner: evaluates each criterion at its stated tolerance and
//! prints one line per criterion. Exits non-zero when any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use common::*;
use momentvv::cli::solve_order;
use momentvv::f16mrac::{lyapunov_residual, solve_lyapunov, ClosedLoop, Variant};
use momentvv::mc::{integrate_compiled, sweep, CompiledSystem, McReport, SimConfig, SweepProblem};
use momentvv::relax::{self, BoundSequence};
use momentvv::sdp::{export_sdpa, lower, parse_sdpa, solve, BlockKind, LmiBlock, LmiStandardForm, SolveStatus, SolverOptions, SymSparse};
use nalgebra::DMatrix;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rayon::prelude::*;

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Pass,
    Fail,
    /// The criterion allows downgrading to a recorded discrepancy.
    Discrepancy,
}

struct Outcome {
    id: u32,
    name: &'static str,
    status: Status,
    detail: String,
}

impl Outcome {
    fn new(id: u32, name: &'static str, ok: bool, detail: String) -> Self {
        Self {
            id,
            name,
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
        }
    }

    fn print(&self) {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Discrepancy => "DISCREPANCY",
        };
        println!("criterion {:>2} [{tag}] {}: {}", self.id, self.name, self.detail);
    }
}

const VARIANTS: [Variant; 2] = [Variant::Lqr, Variant::LqrMrac];
const F16_CASES: [&str; 2] = ["case1", "case2"];

fn fmt_bounds(seq: &BoundSequence) -> String {
    seq.entries
        .iter()
        .map(|e| match e.bound {
            Some(b) if e.inexact => format!("{b:.5e} ({})", e.status),
            Some(b) => format!("{b:.5e}"),
            None => e.status.clone(),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn bound_sequence(cl: &ClosedLoop, orders: std::ops::RangeInclusive<u32>) -> BoundSequence {
    let entries = orders
        .into_par_iter()
        .map(|d| solve_order(cl, d, &SolverOptions::default()).expect("relaxation builds"))
        .collect();
    BoundSequence { entries }
}

fn surrogate() -> Outcome {
    let start = Instant::now();
    let cl = closed_loop("surrogate", Variant::LqrMrac);
    let seq = bound_sequence(&cl, 1..=3);
    let elapsed = start.elapsed().as_secs_f64();
    let truth = (-20.0f64).exp();
    let b: Vec<f64> = seq.entries.iter().map(|e| e.bound.unwrap_or(f64::NAN)).collect();
    let ok = b.len() == 3
        && b[0] >= b[1]
        && b[1] >= b[2]
        && b[2] <= 1e-2
        && b.iter().all(|&x| x >= truth)
        && elapsed < 10.0;
    Outcome::new(
        1,
        "surrogate oracle",
        ok,
        format!("B_1..3 = [{}], true value {truth:.3e}, {elapsed:.2} s", fmt_bounds(&seq)),
    )
}

type BoundTable = BTreeMap<(&'static str, &'static str), BoundSequence>;

fn f16_bounds(loops: &[(&'static str, ClosedLoop)]) -> BoundTable {
    loops
        .par_iter()
        .map(|(case, cl)| ((*case, cl.variant.label()), bound_sequence(cl, 1..=3)))
        .collect()
}

fn first_order(table: &BoundTable) -> Outcome {
    let target = 0.27416;
    let mut ok = true;
    let mut parts = Vec::new();
    for v in VARIANTS {
        let e = &table[&("case1", v.label())].entries[0];
        let b = e.bound.unwrap_or(f64::NAN);
        let rel = (b - target).abs() / target;
        ok &= e.status == SolveStatus::Optimal.label() && rel <= 0.15 && e.wall_time < 60.0;
        parts.push(format!("{}: B_1 = {b:.5} ({:+.2}%, {:.2} s)", v.label(), 100.0 * (b - target) / target, e.wall_time));
    }
    Outcome::new(2, "case 1 first-order bound", ok, parts.join("; "))
}

fn monotone(table: &BoundTable) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for ((case, variant), seq) in table {
        let good = seq.is_monotone(1e-6);
        ok &= good;
        parts.push(format!("{case} {variant}: [{}]{}", fmt_bounds(seq), if good { "" } else { " not monotone" }));
    }
    Outcome::new(3, "hierarchy monotonicity", ok, parts.join("; "))
}

fn dominance(table: &BoundTable, sweeps: &BTreeMap<(&'static str, &'static str), McReport>, elapsed: f64) -> Outcome {
    let mut ok = elapsed < 600.0;
    let mut parts = Vec::new();
    for (key, seq) in table {
        let mc = &sweeps[key];
        let tightest = seq
            .entries
            .iter()
            .filter(|e| e.status == SolveStatus::Optimal.label())
            .filter_map(|e| e.bound)
            .fold(f64::INFINITY, f64::min);
        let holds = seq
            .entries
            .iter()
            .filter(|e| e.status == SolveStatus::Optimal.label())
            .filter_map(|e| e.bound)
            .all(|b| mc.j_mc <= b + 1e-6);
        ok &= holds;
        parts.push(format!(
            "{} {}: J_mc = {:.4e} ({}/{} diverged, worst completed {:.4e}) vs min B_d = {tightest:.5e}",
            key.0,
            key.1,
            mc.j_mc,
            mc.diverged,
            mc.total,
            mc.worst_completed()
        ));
    }
    parts.push(format!("{elapsed:.1} s"));
    Outcome::new(4, "Monte-Carlo dominance", ok, parts.join("; "))
}

fn empirical_liouville() -> Outcome {
    let cl = closed_loop("case1", Variant::LqrMrac);
    let cfg = SimConfig {
        step: 1e-4,
        grid: 5,
        record: true,
        ..SimConfig::default()
    };
    let problem = SweepProblem::from(&cl);
    let compiled = CompiledSystem::new(&cl.raw);
    let results: Vec<Option<f64>> = problem
        .grid(cfg.grid)
        .par_iter()
        .map(|x0| {
            let traj = integrate_compiled(&compiled, cl.raw.horizon, x0, &cfg).expect("valid start");
            traj.completed().then(|| max_liouville_residual(&cl, &traj, 4))
        })
        .collect();
    let completed: Vec<f64> = results.iter().flatten().copied().collect();
    let worst = completed.iter().copied().fold(0.0, f64::max);
    let ok = !completed.is_empty() && worst <= 1e-2;
    Outcome::new(
        5,
        "empirical Liouville",
        ok,
        format!(
            "{} of {} trajectories completed, worst residual over test degree <= 4: {worst:.3e}",
            completed.len(),
            results.len()
        ),
    )
}

fn lyapunov() -> Outcome {
    let mut rng = rng(2024);
    let mut worst: f64 = 0.0;
    let mut all_pd = true;
    for _ in 0..100 {
        let a = random_stable(&mut rng, 3);
        let r = random_spd(&mut rng, 3);
        match solve_lyapunov(&a, &r) {
            Ok(p) => {
                worst = worst.max(lyapunov_residual(&a, &p, &r).amax());
                all_pd &= p.symmetric_eigenvalues().min() > 0.0;
            }
            Err(_) => all_pd = false,
        }
    }
    let i3 = DMatrix::<f64>::identity(3, 3);
    let trivial = solve_lyapunov(&-&i3, &(&i3 * 2.0)).map(|p| (p - &i3).amax()).unwrap_or(f64::INFINITY);
    let ok = worst <= 1e-10 && all_pd && trivial <= 1e-12;
    Outcome::new(
        6,
        "Lyapunov solver",
        ok,
        format!("max residual {worst:.2e} over 100 instances, all P > 0: {all_pd}, |P - I| = {trivial:.1e}"),
    )
}

fn case3_split() -> Outcome {
    let sweeps: Vec<(Variant, McReport)> = VARIANTS
        .par_iter()
        .map(|&v| {
            let cl = closed_loop("case3", v);
            (v, sweep(&SweepProblem::from(&cl), &SimConfig::default()).expect("sweep runs"))
        })
        .collect();
    let lqr = &sweeps[0].1;
    let mrac = &sweeps[1].1;
    let reproduced = lqr.diverged > 0 && mrac.diverged == 0;
    let detail = format!(
        "lqr {}/{} diverged (J_mc = {:.3e}), lqr+mrac {}/{} diverged (J_mc = {:.3e})",
        lqr.diverged, lqr.total, lqr.j_mc, mrac.diverged, mrac.total, mrac.j_mc
    );
    Outcome {
        id: 7,
        name: "case 3 qualitative split",
        status: if reproduced { Status::Pass } else { Status::Discrepancy },
        detail: if reproduced {
            detail
        } else {
            format!("{detail}; the transcribed model does not reproduce the split, recorded as a discrepancy")
        },
    }
}

fn single_var(blocks: Vec<LmiBlock>) -> LmiStandardForm {
    LmiStandardForm {
        num_vars: 1,
        cost: vec![1.0],
        eq_rows: vec![],
        eq_rhs: vec![],
        blocks,
    }
}

fn scalar_block(c: f64, a: f64) -> LmiBlock {
    LmiBlock::new(BlockKind::Diag, 1, SymSparse::new([(0, 0, c)]), vec![(0, SymSparse::new([(0, 0, a)]))])
}

fn solver() -> Outcome {
    let opts = SolverOptions::default();
    let mut ok = true;
    let det = single_var(vec![LmiBlock::new(
        BlockKind::Dense,
        2,
        SymSparse::new([(0, 1, 1.0)]),
        vec![(0, SymSparse::new([(0, 0, 1.0), (1, 1, 1.0)]))],
    )]);
    for (form, expected) in [(det, 1.0), (single_var(vec![scalar_block(-3.0, 1.0)]), 3.0)] {
        let r = solve(&form, &opts);
        ok &= r.status == SolveStatus::Optimal && r.gap <= 1e-8 && (r.y[0] - expected).abs() <= 1e-6;
    }
    let infeasible = solve(&single_var(vec![scalar_block(-1.0, 1.0), scalar_block(0.0, -1.0)]), &opts);
    ok &= infeasible.status == SolveStatus::Infeasible;
    let mut worst_gap: f64 = 0.0;
    let mut worst_err: f64 = 0.0;
    let mut optimal = 0;
    for seed in 0..50 {
        let inst = random_sdp(seed);
        let r = solve(&inst.form, &opts);
        optimal += usize::from(r.status == SolveStatus::Optimal);
        worst_gap = worst_gap.max(r.gap);
        worst_err = worst_err.max((r.objective - inst.optimum).abs() / (1.0 + inst.optimum.abs()));
    }
    ok &= optimal == 50 && worst_gap <= 1e-8 && worst_err <= 1e-6;
    Outcome::new(
        8,
        "embedded solver",
        ok,
        format!(
            "examples {}, random: {optimal}/50 optimal, max gap {worst_gap:.2e}, max objective error {worst_err:.2e}",
            if ok { "matched" } else { "checked" }
        ),
    )
}

fn round_trip() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for v in VARIANTS {
        let cl = closed_loop("case1", v);
        for d in 1..=2 {
            let p = relax::build(&cl.system, &cl.terminal_cost, &cl.running_cost, d).expect("relaxation builds");
            let form = lower(&p);
            let same = parse_sdpa(&export_sdpa(&form)).map(|f| f == form).unwrap_or(false);
            ok &= same;
            parts.push(format!("{} d={d} ({} vars): {}", v.label(), form.num_vars, if same { "identical" } else { "differs" }));
        }
    }
    Outcome::new(9, "SDPA round trip", ok, parts.join(", "))
}

fn polynomial_suite() -> Outcome {
    fn runner() -> TestRunner {
        TestRunner::new_with_rng(
            Config {
                cases: 1000,
                failure_persistence: None,
                ..Config::default()
            },
            TestRng::deterministic_rng(RngAlgorithm::ChaCha),
        )
    }
    let lift = |r: Result<(), String>| r.map_err(TestCaseError::fail);
    let results = [
        (
            "ring axioms",
            runner()
                .run(&(poly_strategy(), poly_strategy(), poly_strategy()), |(a, b, c)| lift(check_ring_axioms(a, b, c)))
                .map_err(|e| e.to_string()),
        ),
        (
            "Leibniz",
            runner()
                .run(&(int_poly_strategy(), int_poly_strategy(), 0usize..POLY_VARS), |(a, b, v)| lift(check_leibniz(a, b, v)))
                .map_err(|e| e.to_string()),
        ),
        (
            "evaluation",
            runner()
                .run(&(poly_strategy(), poly_strategy(), point_strategy()), |(a, b, pt)| lift(check_eval_homomorphism(a, b, pt)))
                .map_err(|e| e.to_string()),
        ),
        (
            "affine substitution",
            runner()
                .run(&affine_strategy(), |(a, pt, v, s, t)| lift(check_affine_substitution(a, pt, v, s, t)))
                .map_err(|e| e.to_string()),
        ),
    ];
    let ok = results.iter().all(|(_, r)| r.is_ok());
    let detail = results
        .iter()
        .map(|(name, r)| match r {
            Ok(()) => format!("{name} 1000/1000"),
            Err(e) => format!("{name} failed: {e}"),
        })
        .collect::<Vec<_>>()
        .join(", ");
    Outcome::new(10, "polynomial properties", ok, detail)
}

fn main() {
    let report = |o: Outcome| {
        o.print();
        o
    };
    let mut outcomes = vec![report(surrogate())];

    let start = Instant::now();
    let loops: Vec<(&'static str, ClosedLoop)> = F16_CASES
        .iter()
        .flat_map(|&c| VARIANTS.iter().map(move |&v| (c, closed_loop(c, v))))
        .collect();
    let table = f16_bounds(&loops);
    let sweeps: BTreeMap<_, _> = loops
        .par_iter()
        .map(|(case, cl)| ((*case, cl.variant.label()), sweep(&SweepProblem::from(cl), &SimConfig::default()).expect("sweep runs")))
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    outcomes.push(report(first_order(&table)));
    outcomes.push(report(monotone(&table)));
    outcomes.push(report(dominance(&table, &sweeps, elapsed)));

    outcomes.push(report(empirical_liouville()));
    outcomes.push(report(lyapunov()));
    outcomes.push(report(case3_split()));
    outcomes.push(report(solver()));
    outcomes.push(report(round_trip()));
    outcomes.push(report(polynomial_suite()));

    let failed: Vec<String> = outcomes.iter().filter(|o| o.status == Status::Fail).map(|o| o.id.to_string()).collect();
    let discrepancies = outcomes.iter().filter(|o| o.status == Status::Discrepancy).count();
    println!(
        "acceptance: {} passed, {} failed, {} recorded discrepancies",
        outcomes.iter().filter(|o| o.status == Status::Pass).count(),
        failed.len(),
        discrepancies
    );
    if !failed.is_empty() {
        println!("failing criteria: {}", failed.join(", "));
        std::process::exit(1);
    }
}
