//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use tvar::bitvec3::TBitVec;
use tvar::cli;
use tvar::genauto::{AbstractGA, Fault, Strategy};
use tvar::mc3::{model_check3, Formula, ThreeValued};
use tvar::oracle::{
    audit_soundness, audit_terminating, build_concrete_ks, check_modal_simulation, verify_concrete,
    Sampler,
};
use tvar::refine::{refine_strict, verify_loop, CandidateKind, Iteration, LimitHit, RefinementCandidate, VerifyLimits, VerifyOutcome};
use tvar::statespace::{build_pks, BuildLimits, Pks};
use tvar::sysir::{generate_benchmark, BenchmarkKind, SystemIR};

const CONCRETE_CAP: usize = 1 << 14;
const MAX_REFINEMENTS: usize = 10_000;
const LANDING_GEAR_BUDGET: Duration = Duration::from_secs(1);
const FUZZ_SYSTEMS: usize = 200;
const FUZZ_FORMULAS: usize = 20;
const FUZZ_BUDGET: Duration = Duration::from_secs(600);
const MONO_SYSTEMS: usize = 50;
const MONO_POOL: usize = 10;
const MONO_DRIVERS: usize = 2;
const TREND_BUDGET: Duration = Duration::from_secs(60);
const NAIVE_GROWTH_PER_BIT: f64 = 2.0;
const TERMINATING_MAX_BITS: u32 = 12;

fn limits() -> VerifyLimits {
    VerifyLimits {
        max_refinements: MAX_REFINEMENTS,
        max_states: CONCRETE_CAP,
        timeout: None,
    }
}

fn tv(s: &str) -> TBitVec {
    s.parse().unwrap()
}

fn landing_gear() -> Arc<SystemIR> {
    generate_benchmark(BenchmarkKind::LandingGear, 0, 0, 0).unwrap().into_shared()
}

fn bench(kind: BenchmarkKind, v: u32, u: u32, c: u32) -> Arc<SystemIR> {
    generate_benchmark(kind, v, u, c).unwrap().into_shared()
}

fn fuzz_system(k: usize) -> Arc<SystemIR> {
    common::random_system(&mut common::rng(10_000 + k as u64), 8, 4).into_shared()
}

fn parametric_corpus() -> Vec<Arc<SystemIR>> {
    let mut out = Vec::new();
    for kind in [BenchmarkKind::Recoverable, BenchmarkKind::Nonrecoverable] {
        for (v, u, c) in [(1, 1, 1), (2, 1, 1), (2, 2, 2), (3, 1, 2), (2, 3, 1)] {
            out.push(bench(kind, v, u, c));
        }
    }
    out
}

/// Per-run evidence for the simulation and termination criteria.
#[derive(Default)]
struct Evidence {
    runs: usize,
    iterations: usize,
    modal_failures: Vec<String>,
    termination_failures: Vec<String>,
}

impl Evidence {
    fn absorb(&mut self, other: Evidence) {
        self.runs += other.runs;
        self.iterations += other.iterations;
        self.modal_failures.extend(other.modal_failures);
        self.termination_failures.extend(other.termination_failures);
    }
}

/// Runs the loop, checking modal simulation at every iteration and the
/// termination bound at the end. `extra` sees each iteration too.
fn audited_run(
    ir: &Arc<SystemIR>,
    formula: &Formula,
    strategy: Strategy,
    ks: Option<&Pks>,
    ev: &mut Evidence,
    mut extra: impl FnMut(&Iteration<'_>),
) -> VerifyOutcome {
    let tag = format!("{} {strategy} {formula}", ir.name());
    let mut modal = Vec::new();
    let mut iterations = 0;
    let outcome = verify_loop(ir.clone(), formula, strategy, limits(), Fault::None, |it| {
        iterations += 1;
        if let Some(ks) = ks {
            let report = check_modal_simulation(ks, it.pks).unwrap();
            if !report.passed {
                modal.push(format!("{tag} iteration {}: {:?}", it.iteration, report.conditions()));
            }
        }
        extra(it);
    })
    .unwrap_or_else(|e| panic!("{tag}: {e}"));
    ev.runs += 1;
    ev.iterations += iterations;
    ev.modal_failures.extend(modal);
    let bound = (ir.state_width() + ir.input_width()) as usize * outcome.raised_states;
    if outcome.limit_hit == Some(LimitHit::Refinements) || outcome.stats.refinements > bound {
        ev.termination_failures.push(format!(
            "{tag}: {} refinements, bound {bound}, limit {:?}",
            outcome.stats.refinements, outcome.limit_hit
        ));
    }
    outcome
}

struct Line {
    id: usize,
    title: &'static str,
    passed: bool,
    detail: String,
}

fn first<T: std::fmt::Debug>(items: &[T]) -> String {
    match items.first() {
        Some(x) => format!("; first: {x:?}"),
        None => String::new(),
    }
}

fn criterion1(ev: &mut Evidence) -> Line {
    let cases = [("EF(AG(msb))", "true", 0), ("AG(EF(!msb))", "false", 1)];
    let mut failures = Vec::new();
    let mut slowest = Duration::ZERO;
    for strategy in Strategy::ALL {
        for (property, expected, code) in cases {
            let args = ["tvar", "verify", "--benchmark", "landing-gear", "--property", property, "--strategy", strategy.name()];
            let mut out = Vec::new();
            let start = Instant::now();
            let exit = cli::run(args, &mut out);
            let took = start.elapsed();
            slowest = slowest.max(took);
            let text = String::from_utf8(out).unwrap();
            if exit != code || text.trim() != format!("result: {expected}") || took >= LANDING_GEAR_BUDGET {
                failures.push(format!("{strategy} {property}: exit {exit}, {text:?}, {took:?}"));
            }
        }
    }
    // the same runs with per-iteration simulation checks
    let ir = landing_gear();
    let ks = build_concrete_ks(&ir, CONCRETE_CAP).unwrap();
    for strategy in Strategy::ALL {
        for (property, _, _) in cases {
            audited_run(&ir, &property.parse().unwrap(), strategy, Some(&ks), ev, |_| {});
        }
    }
    Line {
        id: 1,
        title: "landing-gear ground truth",
        passed: failures.is_empty(),
        detail: format!("6 runs, slowest {:.3} s (budget {:.0} s){}", slowest.as_secs_f64(), LANDING_GEAR_BUDGET.as_secs_f64(), first(&failures)),
    }
}

fn strings(states: &[&str]) -> BTreeSet<TBitVec> {
    states.iter().map(|s| tv(s)).collect()
}

fn criterion2() -> Line {
    let ir = landing_gear();
    let mut aga = AbstractGA::new(ir, Strategy::Input);
    let (initial, _) = build_pks(&aga, None, BuildLimits::default()).unwrap();
    let (states, edges) = initial.relation();
    let mut problems = Vec::new();
    if states != strings(&["000", "0X1", "X1X", "XXX"]) || edges.len() != 4 {
        problems.push(format!("initial: {} states, {} transitions", states.len(), edges.len()));
    }
    let expected_edges: BTreeSet<(TBitVec, TBitVec)> = [
        ("000", "001"),
        ("000", "011"),
        ("001", "010"),
        ("010", "X10"),
        ("X10", "X10"),
        ("011", "111"),
        ("111", "10X"),
        ("10X", "10X"),
    ]
    .iter()
    .map(|(a, b)| (tv(a), tv(b)))
    .collect();
    let split = RefinementCandidate {
        kind: CandidateKind::InputBit,
        state: tv("000"),
        bit: 0,
    };
    let refined = refine_strict(&mut aga, &[split], &initial, BuildLimits::default()).unwrap();
    let (states, edges) = refined.pks.relation();
    if states != strings(&["000", "001", "011", "010", "111", "X10", "10X"]) || edges != expected_edges {
        problems.push(format!("refined: {} states, {} pairs", states.len(), edges.len()));
    }
    Line {
        id: 2,
        title: "initial and split structures",
        passed: problems.is_empty(),
        detail: format!("initial 4 states/4 transitions, split at 000 gives 7 states/8 pairs{}", first(&problems)),
    }
}

/// The last structure a naive run model-checks.
fn naive_structure(ir: &Arc<SystemIR>, formula: &Formula) -> (VerifyOutcome, Option<Pks>) {
    let mut last = None;
    let outcome = verify_loop(ir.clone(), formula, Strategy::Naive, limits(), Fault::None, |it| {
        last = Some(it.pks.clone());
    })
    .unwrap();
    (outcome, last)
}

fn default_formula(ir: &SystemIR) -> Formula {
    let atom = ir.label_names().next().unwrap().to_string();
    Formula::AG(Box::new(Formula::EF(Box::new(Formula::atom(&atom)))))
}

fn criterion3(corpus: &[Arc<SystemIR>]) -> Line {
    let failures: Vec<String> = corpus
        .par_iter()
        .filter_map(|ir| {
            let ks = build_concrete_ks(ir, CONCRETE_CAP).ok()?;
            let (outcome, pks) = naive_structure(ir, &default_formula(ir));
            let Some(pks) = pks else {
                return Some(format!("{ir}: no structure built"));
            };
            let ok = outcome.stats.refinements == 0 && !pks.has_unknown_labels() && pks.same_structure(&ks);
            (!ok).then(|| format!("{}: {} refinements", ir, outcome.stats.refinements))
        })
        .collect();
    Line {
        id: 3,
        title: "naive equals concrete",
        passed: failures.is_empty(),
        detail: format!("{} systems{}", corpus.len(), first(&failures)),
    }
}

fn criterion4(ev: &mut Evidence) -> Line {
    let start = Instant::now();
    let results: Vec<(usize, usize, Vec<String>, Evidence)> = (0..FUZZ_SYSTEMS)
        .into_par_iter()
        .map(|k| {
            let ir = fuzz_system(k);
            let ks = build_concrete_ks(&ir, CONCRETE_CAP).unwrap();
            let mut rng = common::rng(20_000 + k as u64);
            let atoms = common::label_names(&ir);
            let mut ev = Evidence::default();
            let (mut checked, mut decided, mut wrong) = (0, 0, Vec::new());
            for _ in 0..FUZZ_FORMULAS {
                let f = common::random_formula(&mut rng, &atoms, 4);
                let truth = tvar::mc3::model_check2(&ks, &f).unwrap().0;
                for strategy in Strategy::ALL {
                    let outcome = audited_run(&ir, &f, strategy, Some(&ks), &mut ev, |_| {});
                    checked += 1;
                    if let Some(r) = outcome.result.to_bool() {
                        decided += 1;
                        if r != truth {
                            wrong.push(format!("system {k} {strategy} {f}: {r} vs {truth}"));
                        }
                    }
                }
            }
            (checked, decided, wrong, ev)
        })
        .collect();
    let took = start.elapsed();
    let (mut checked, mut decided, mut wrong) = (0, 0, Vec::new());
    for (c, d, w, e) in results {
        checked += c;
        decided += d;
        wrong.extend(w);
        ev.absorb(e);
    }
    // the oracle itself agrees with the stand-alone entry point
    let ir = fuzz_system(0);
    let f = default_formula(&ir);
    let direct = verify_concrete(&ir, &f, CONCRETE_CAP).unwrap();
    let via_ks = tvar::mc3::model_check2(&build_concrete_ks(&ir, CONCRETE_CAP).unwrap(), &f).unwrap().0;
    Line {
        id: 4,
        title: "soundness fuzz",
        passed: wrong.is_empty() && took < FUZZ_BUDGET && direct == via_ks,
        detail: format!(
            "{FUZZ_SYSTEMS} systems x {FUZZ_FORMULAS} formulas x 3 strategies: {decided}/{checked} decided, {} disagreements, {:.1} s (budget {} s){}",
            wrong.len(),
            took.as_secs_f64(),
            FUZZ_BUDGET.as_secs(),
            first(&wrong)
        ),
    }
}

fn criterion5(ev: &mut Evidence) -> Line {
    let results: Vec<(usize, Vec<String>, Evidence)> = (0..MONO_SYSTEMS)
        .into_par_iter()
        .map(|k| {
            let ir = common::random_system(&mut common::rng(30_000 + k as u64), 6, 3).into_shared();
            let ks = build_concrete_ks(&ir, CONCRETE_CAP).unwrap();
            let mut rng = common::rng(40_000 + k as u64);
            let atoms = common::label_names(&ir);
            let pool: Vec<Formula> = (0..MONO_POOL).map(|_| common::random_formula(&mut rng, &atoms, 4)).collect();
            let mut ev = Evidence::default();
            let (mut evaluations, mut problems) = (0, Vec::new());
            for strategy in Strategy::ALL {
                for driver in &pool[..MONO_DRIVERS] {
                    let mut seen: Vec<ThreeValued> = vec![ThreeValued::Unknown; pool.len()];
                    audited_run(&ir, driver, strategy, Some(&ks), &mut ev, |it| {
                        for (j, f) in pool.iter().enumerate() {
                            let (r, _) = model_check3(it.pks, f).unwrap();
                            evaluations += 1;
                            if seen[j].is_known() && r != seen[j] {
                                problems.push(format!("system {k} {strategy} {f}: {} then {r}", seen[j]));
                            }
                            if r.is_known() {
                                seen[j] = r;
                            }
                        }
                        let audit = audit_soundness(it.aga, Sampler::Reachable(it.pks));
                        if !audit.passed {
                            problems.push(format!("system {k} {strategy} soundness {:?}", audit.conditions()));
                        }
                    });
                }
            }
            (evaluations, problems, ev)
        })
        .collect();
    let (mut evaluations, mut problems) = (0, Vec::new());
    for (n, p, e) in results {
        evaluations += n;
        problems.extend(p);
        ev.absorb(e);
    }
    Line {
        id: 5,
        title: "monotonicity across refinement",
        passed: problems.is_empty(),
        detail: format!("{MONO_SYSTEMS} systems, pool of {MONO_POOL}, {evaluations} evaluations, {} reversals{}", problems.len(), first(&problems)),
    }
}

fn criterion6(ev: &Evidence) -> Line {
    let ir = landing_gear();
    let ks = build_concrete_ks(&ir, CONCRETE_CAP).unwrap();
    let mut aga = AbstractGA::new(ir, Strategy::Input);
    let (initial, _) = build_pks(&aga, None, BuildLimits::default()).unwrap();
    let split = RefinementCandidate {
        kind: CandidateKind::InputBit,
        state: tv("000"),
        bit: 0,
    };
    let pks = refine_strict(&mut aga, &[split], &initial, BuildLimits::default()).unwrap().pks;
    let at = |s: &str| pks.index_of(&tv(s)).unwrap();

    let mut deleted = pks.clone();
    deleted.remove_transition(at("011"), at("111"));
    let mut relabelled = pks.clone();
    relabelled.set_label(at("011"), 0, Some(true));
    let mut spurious = pks.clone();
    spurious.add_transition(at("000"), at("10X"), tv("X"));
    let mutants = [("12b", deleted), ("12a", relabelled), ("12c", spurious)];
    let caught = mutants
        .iter()
        .filter(|(cond, m)| check_modal_simulation(&ks, m).unwrap().conditions().contains(cond))
        .count();
    Line {
        id: 6,
        title: "modal simulation audit",
        passed: ev.modal_failures.is_empty() && caught == mutants.len() && ev.iterations > 0,
        detail: format!(
            "{} iterations over {} runs, {} failures; mutants caught {caught}/{}{}",
            ev.iterations,
            ev.runs,
            ev.modal_failures.len(),
            mutants.len(),
            first(&ev.modal_failures)
        ),
    }
}

fn criterion7(ev: &Evidence) -> Line {
    Line {
        id: 7,
        title: "termination bound",
        passed: ev.termination_failures.is_empty() && ev.runs > 0,
        detail: format!("{} runs, {} over the bound or at max-refinements{}", ev.runs, ev.termination_failures.len(), first(&ev.termination_failures)),
    }
}

fn trend_run(kind: BenchmarkKind, v: u32, u: u32, c: u32, strategy: Strategy) -> VerifyOutcome {
    let ir = bench(kind, v, u, c);
    let f: Formula = "AG(EF(v_zero))".parse().unwrap();
    verify_loop(ir, &f, strategy, limits(), Fault::None, |_| {}).unwrap()
}

fn criterion8() -> Line {
    let kind = BenchmarkKind::Recoverable;
    let mut problems = Vec::new();
    let mut notes = Vec::new();

    let start = Instant::now();
    let us = [2u32, 6, 10, 14];
    let input: Vec<_> = us.iter().map(|&u| trend_run(kind, 4, u, 2, Strategy::Input)).collect();
    let naive: Vec<_> = us.iter().map(|&u| trend_run(kind, 4, u, 2, Strategy::Naive)).collect();
    let took_u = start.elapsed();
    let flat = |runs: &[VerifyOutcome]| {
        runs.iter().all(|r| r.result.is_known())
            && runs.windows(2).all(|w| {
                (w[0].stats.states_final, w[0].stats.refinements) == (w[1].stats.states_final, w[1].stats.refinements)
            })
    };
    if !flat(&input) {
        problems.push(format!("input over U: {:?}", input.iter().map(|r| (r.stats.states_final, r.stats.refinements)).collect::<Vec<_>>()));
    }
    let completed: Vec<(u32, usize)> = us
        .iter()
        .zip(&naive)
        .filter(|(_, r)| r.limit_hit.is_none())
        .map(|(&u, r)| (u, r.stats.states_final))
        .collect();
    for w in completed.windows(2) {
        let ((u0, s0), (u1, s1)) = (w[0], w[1]);
        let needed = NAIVE_GROWTH_PER_BIT.powi((u1 - u0) as i32);
        if (s1 as f64) < needed * s0 as f64 {
            problems.push(format!("naive U={u0}->{u1}: {s0}->{s1}"));
        }
    }
    if completed.len() < 2 {
        problems.push("naive completed fewer than two grid points".to_string());
    }
    notes.push(format!("input states_final {} at every U", input[0].stats.states_final));
    notes.push(format!("naive completed {:?}", completed));
    if took_u >= TREND_BUDGET {
        problems.push(format!("U grid took {took_u:?}"));
    }

    let start = Instant::now();
    let decay: Vec<_> = [2u32, 6, 10, 14].iter().map(|&c| trend_run(kind, 4, 2, c, Strategy::Decay)).collect();
    let took_c = start.elapsed();
    if !flat(&decay) {
        problems.push(format!("decay over C: {:?}", decay.iter().map(|r| (r.stats.states_final, r.stats.refinements)).collect::<Vec<_>>()));
    }
    if took_c >= TREND_BUDGET {
        problems.push(format!("C grid took {took_c:?}"));
    }
    notes.push(format!("decay states_final {} at every C", decay[0].stats.states_final));
    Line {
        id: 8,
        title: "trend reproduction",
        passed: problems.is_empty(),
        detail: format!(
            "{}; grids {:.1} s and {:.1} s (budget {} s each){}",
            notes.join(", "),
            took_u.as_secs_f64(),
            took_c.as_secs_f64(),
            TREND_BUDGET.as_secs(),
            first(&problems)
        ),
    }
}

fn criterion9(corpus: &[Arc<SystemIR>]) -> Line {
    let eligible: Vec<&Arc<SystemIR>> = corpus
        .iter()
        .filter(|ir| ir.state_width() + ir.input_width() <= TERMINATING_MAX_BITS)
        .collect();
    let failures: Vec<String> = eligible
        .par_iter()
        .filter_map(|ir| {
            let full = AbstractGA::new((*ir).clone(), Strategy::Naive);
            let ks = build_concrete_ks(ir, CONCRETE_CAP).ok()?;
            let mut report = audit_terminating(&full, Sampler::Reachable(&ks));
            report = report.merge(audit_terminating(&full, Sampler::Random { seed: 9, count: 64 }));
            let gamma = build_pks(&full, None, BuildLimits::default()).map(|(p, _)| p);
            let same = gamma.as_ref().is_ok_and(|p| p.same_structure(&ks));
            (!report.passed || !same).then(|| format!("{ir}: {:?}, same structure {same}", report.conditions()))
        })
        .collect();
    Line {
        id: 9,
        title: "terminating full-precision automaton",
        passed: failures.is_empty() && !eligible.is_empty(),
        detail: format!("{} systems with w+y <= {TERMINATING_MAX_BITS}{}", eligible.len(), first(&failures)),
    }
}

fn main() {
    let start = Instant::now();
    let mut ev = Evidence::default();
    let mut corpus = vec![landing_gear()];
    corpus.extend(parametric_corpus());
    corpus.extend((0..FUZZ_SYSTEMS).map(fuzz_system));

    let mut lines = vec![criterion1(&mut ev), criterion2(), criterion3(&corpus)];
    // parametric corpus runs feed the simulation and termination evidence
    for ir in parametric_corpus() {
        let ks = build_concrete_ks(&ir, CONCRETE_CAP).unwrap();
        for strategy in Strategy::ALL {
            audited_run(&ir, &default_formula(&ir), strategy, Some(&ks), &mut ev, |_| {});
        }
    }
    lines.push(criterion4(&mut ev));
    lines.push(criterion5(&mut ev));
    lines.push(criterion6(&ev));
    lines.push(criterion7(&ev));
    lines.push(criterion8());
    lines.push(criterion9(&corpus));

    let mut failed = 0;
    for line in &lines {
        let verdict = if line.passed { "PASS" } else { "FAIL" };
        failed += usize::from(!line.passed);
        println!("criterion {} {}: {verdict} ({})", line.id, line.title, line.detail);
    }
    println!("acceptance: {}/{} passed in {:.1} s", lines.len() - failed, lines.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
