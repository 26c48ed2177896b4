//! The abstraction-refinement loop: culprit search, candidate selection
//! and strictly monotone precision raising.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::bitvec3::TBitVec;
use crate::genauto::{AbstractGA, Fault};
use crate::mc3::{model_check3, Formula, Labelling, McError, NnfNode, ThreeValued};
use crate::statespace::{build_pks, BuildError, BuildLimits, BuildStats, Pks};
use crate::sysir::SystemIR;

pub use crate::genauto::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateKind {
    /// A result bit of the step function that is decayed.
    #[serde(rename = "step")]
    StepBit,
    /// An input bit that is not split.
    #[serde(rename = "input")]
    InputBit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RefinementCandidate {
    pub kind: CandidateKind,
    pub state: TBitVec,
    pub bit: u32,
}

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("refinement requested but the result is already {0}")]
    NotUnknown(ThreeValued),
    #[error("no candidate changed the state space; applied: {applied:?}")]
    Exhausted { applied: Vec<String> },
    #[error(transparent)]
    Check(#[from] McError),
    #[error(transparent)]
    Build(#[from] BuildError),
}

/// An abstract path from the initial state to a state whose ⊥ label
/// makes the property unknown.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Culprit {
    pub path: Vec<usize>,
    pub atom: usize,
}

fn bfs_path(parent: &HashMap<usize, usize>, start: usize, end: usize) -> Vec<usize> {
    let mut rev = vec![end];
    let mut at = end;
    while at != start {
        at = parent[&at];
        rev.push(at);
    }
    rev.pop();
    rev.reverse();
    rev
}

/// Follows unknown subformulas from the root at the initial state down to
/// an unknown literal. Temporal operators are unfolded breadth-first over
/// states where they are unknown, keeping the path taken.
pub fn find_culprit(pks: &Pks, lab: &Labelling) -> Option<Culprit> {
    let unknown = |node: usize, state: usize| lab.value(node, state) == ThreeValued::Unknown;
    let mut node = lab.root();
    let mut state = pks.initial();
    if !unknown(node, state) {
        return None;
    }
    let mut path = vec![state];
    loop {
        match lab.nodes()[node] {
            NnfNode::True | NnfNode::False => return None,
            NnfNode::Lit { atom, .. } => return Some(Culprit { path, atom }),
            NnfNode::And(a, b) | NnfNode::Or(a, b) => {
                node = if unknown(a, state) { a } else { b };
            }
            NnfNode::EX(a) | NnfNode::AX(a) => {
                let next = pks
                    .successors(state)
                    .iter()
                    .map(|e| e.to)
                    .find(|&t| unknown(a, t))?;
                path.push(next);
                node = a;
                state = next;
            }
            NnfNode::EU(a, b) | NnfNode::AU(a, b) | NnfNode::EW(a, b) | NnfNode::AW(a, b) => {
                let start = state;
                let mut parent = HashMap::new();
                let mut seen = HashSet::from([start]);
                let mut queue = VecDeque::from([start]);
                let mut found = None;
                while let Some(s) = queue.pop_front() {
                    if unknown(b, s) {
                        found = Some((s, b));
                        break;
                    }
                    if unknown(a, s) {
                        found = Some((s, a));
                        break;
                    }
                    for e in pks.successors(s) {
                        if unknown(node, e.to) && seen.insert(e.to) {
                            parent.insert(e.to, s);
                            queue.push_back(e.to);
                        }
                    }
                }
                let (s, child) = found?;
                path.extend(bfs_path(&parent, start, s));
                node = child;
                state = s;
            }
        }
    }
}

/// Declaration position of a bit: variable index, then most significant
/// bit first.
fn bit_order(owner: Option<(usize, u32)>) -> (usize, i64) {
    owner.map_or((usize::MAX, 0), |(var, bit)| (var, -i64::from(bit)))
}

fn bits(mask: u64) -> impl Iterator<Item = u32> {
    (0..64).filter(move |k| mask >> k & 1 == 1)
}

/// Kind, distance from the culprit, then (variable, reversed bit).
type RankKey = (CandidateKind, usize, (usize, i64));

/// Refinement candidates for an unknown result, best first.
///
/// Bits are marked backwards from the culprit label along the culprit
/// path. Decayed step bits come first, then unsplit input bits; within
/// each kind, bits closer to the culprit come first. Every remaining
/// imprecise bit along the path is appended so that raising all
/// candidates always changes the state space.
pub fn propose_candidates(
    aga: &AbstractGA,
    pks: &Pks,
    lab: &Labelling,
) -> Result<Vec<RefinementCandidate>, RefineError> {
    let result = lab.value(lab.root(), pks.initial());
    if result.is_known() {
        return Err(RefineError::NotUnknown(result));
    }
    let ir = aga.ir();
    let (w, y) = (ir.state_width(), ir.input_width());
    let mut ranked: Vec<(RankKey, RefinementCandidate)> = Vec::new();
    let mut push = |kind, state: TBitVec, bit: u32, distance: usize| {
        let owner = match kind {
            CandidateKind::StepBit => ir.state_bit_owner(bit),
            CandidateKind::InputBit => ir.input_bit_owner(bit),
        };
        ranked.push((
            (kind, distance, bit_order(owner)),
            RefinementCandidate { kind, state, bit },
        ));
    };

    let path = match find_culprit(pks, lab) {
        Some(culprit) => {
            let last = *culprit.path.last().expect("path is never empty");
            let mut marked = ir.label_mark(pks.state(last), culprit.atom);
            for step in (0..culprit.path.len() - 1).rev() {
                if marked == 0 {
                    break;
                }
                let distance = culprit.path.len() - 1 - step;
                let from = *pks.state(culprit.path[step]);
                let to = *pks.state(culprit.path[step + 1]);
                let step_mask = aga.step_mask(&from);
                let input_mask = aga.input_mask(&from);
                for bit in bits(marked & !step_mask) {
                    push(CandidateKind::StepBit, from, bit, distance);
                }
                let (mut prev_marked, mut input_marked) = (0u64, 0u64);
                for input in aga.qualified_inputs(&from) {
                    if aga.abstract_step(&from, &input) != to {
                        continue;
                    }
                    let basic = ir.abstract_next(&from, &input);
                    let target = marked & basic.unknown_mask();
                    if target != 0 {
                        let (sm, im) = ir.backward_mark(&from, &input, target);
                        prev_marked |= sm;
                        input_marked |= im;
                    }
                }
                for bit in bits(input_marked & !input_mask) {
                    push(CandidateKind::InputBit, from, bit, distance);
                }
                marked = prev_marked;
            }
            culprit.path
        }
        None => (0..pks.num_states()).collect(),
    };
    ranked.sort_by_key(|(key, _)| *key);

    let mut out: Vec<RefinementCandidate> = Vec::new();
    let mut seen = HashSet::new();
    for (_, c) in ranked {
        if seen.insert(c) {
            out.push(c);
        }
    }
    for &k in &path {
        let state = *pks.state(k);
        let mut rest: Vec<(CandidateKind, (usize, i64), u32)> = Vec::new();
        for bit in bits(!aga.step_mask(&state) & crate::genauto::width_mask(w)) {
            rest.push((CandidateKind::StepBit, bit_order(ir.state_bit_owner(bit)), bit));
        }
        for bit in bits(!aga.input_mask(&state) & crate::genauto::width_mask(y)) {
            rest.push((CandidateKind::InputBit, bit_order(ir.input_bit_owner(bit)), bit));
        }
        rest.sort();
        for (kind, _, bit) in rest {
            let c = RefinementCandidate { kind, state, bit };
            if seen.insert(c) {
                out.push(c);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub kind: CandidateKind,
    pub state: String,
    pub bit: u32,
    pub r_changed: bool,
}

#[derive(Debug, Clone)]
pub struct StrictRefinement {
    pub pks: Pks,
    /// Statistics of every rebuild performed.
    pub builds: Vec<BuildStats>,
    /// Raises in application order; only the last one changed R.
    pub applied: Vec<(RefinementCandidate, bool)>,
}

/// Raises candidates in order, rebuilding after each, until the state set
/// or the transition pairs change. Candidates already implied by the
/// monotone precision are skipped.
pub fn refine_strict(
    aga: &mut AbstractGA,
    candidates: &[RefinementCandidate],
    pks: &Pks,
    limits: BuildLimits,
) -> Result<StrictRefinement, RefineError> {
    let before = pks.relation();
    let mut current: Option<Pks> = None;
    let mut builds = Vec::new();
    let mut applied = Vec::new();
    for c in candidates {
        let implied = match c.kind {
            CandidateKind::StepBit => aga.pf().monotone_mask(&c.state),
            CandidateKind::InputBit => aga.pq().monotone_mask(&c.state),
        };
        if implied >> c.bit & 1 == 1 {
            continue;
        }
        let map = match c.kind {
            CandidateKind::StepBit => aga.pf_mut(),
            CandidateKind::InputBit => aga.pq_mut(),
        };
        map.raise(&c.state, c.bit).expect("candidate widths match the system");
        let (next, stats) = build_pks(aga, Some(current.as_ref().unwrap_or(pks)), limits)?;
        builds.push(stats);
        let changed = next.relation() != before;
        applied.push((*c, changed));
        if changed {
            return Ok(StrictRefinement {
                pks: next,
                builds,
                applied,
            });
        }
        current = Some(next);
    }
    Err(RefineError::Exhausted {
        applied: applied
            .iter()
            .map(|(c, _)| format!("{:?} {} bit {}", c.kind, c.state, c.bit))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyLimits {
    pub max_refinements: usize,
    pub max_states: usize,
    pub timeout: Option<Duration>,
}

impl Default for VerifyLimits {
    fn default() -> Self {
        VerifyLimits {
            max_refinements: 10_000,
            max_states: 1 << 20,
            timeout: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitHit {
    Refinements,
    States,
    Timeout,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub refinements: usize,
    pub states_total: usize,
    pub states_final: usize,
    pub transitions_total: usize,
    pub transitions_final: usize,
    /// Seconds.
    pub wall_time: f64,
}

impl RunStats {
    fn add_build(&mut self, stats: &BuildStats) {
        self.states_total += stats.states_generated;
        self.transitions_total += stats.transitions_generated;
        self.states_final = stats.states;
        self.transitions_final = stats.transitions;
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub result: ThreeValued,
    pub stats: RunStats,
    pub limit_hit: Option<LimitHit>,
    pub trace: Vec<TraceEntry>,
    /// Distinct states that received any precision override.
    pub raised_states: usize,
    /// Total precision bits raised.
    pub raised_bits: usize,
}

/// Everything visible at one iteration of the loop, after model checking.
pub struct Iteration<'a> {
    pub iteration: usize,
    pub aga: &'a AbstractGA,
    pub pks: &'a Pks,
    pub result: ThreeValued,
    pub labelling: &'a Labelling,
}

/// Runs build, check and refine until the property is decided or a limit
/// is hit. `observe` sees every iteration.
pub fn verify_loop(
    ir: Arc<SystemIR>,
    formula: &Formula,
    strategy: Strategy,
    limits: VerifyLimits,
    fault: Fault,
    mut observe: impl FnMut(&Iteration<'_>),
) -> Result<VerifyOutcome, RefineError> {
    let start = Instant::now();
    let deadline = limits.timeout.map(|t| start + t);
    let build_limits = BuildLimits {
        max_states: limits.max_states,
        deadline,
    };
    let mut aga = AbstractGA::new(ir, strategy).with_fault(fault);
    let mut stats = RunStats::default();
    let mut trace = Vec::new();

    let finish = |result, mut stats: RunStats, limit_hit, trace, aga: &AbstractGA| {
        stats.wall_time = start.elapsed().as_secs_f64();
        let raised: HashSet<TBitVec> = aga
            .pq()
            .overrides()
            .chain(aga.pf().overrides())
            .map(|(s, _)| *s)
            .collect();
        let raised_bits = aga
            .pq()
            .overrides()
            .chain(aga.pf().overrides())
            .map(|(_, m)| m.count_ones() as usize)
            .sum();
        VerifyOutcome {
            result,
            stats,
            limit_hit,
            trace,
            raised_states: raised.len(),
            raised_bits,
        }
    };
    let limit_of = |e: &BuildError| match e {
        BuildError::StateLimit { .. } => LimitHit::States,
        BuildError::Timeout { .. } => LimitHit::Timeout,
    };

    let mut pks = match build_pks(&aga, None, build_limits) {
        Ok((pks, s)) => {
            stats.add_build(&s);
            pks
        }
        Err(e) => {
            stats.add_build(&e.partial());
            let hit = limit_of(&e);
            return Ok(finish(ThreeValued::Unknown, stats, Some(hit), trace, &aga));
        }
    };
    loop {
        let (result, labelling) = model_check3(&pks, formula)?;
        observe(&Iteration {
            iteration: stats.refinements,
            aga: &aga,
            pks: &pks,
            result,
            labelling: &labelling,
        });
        if result.is_known() {
            return Ok(finish(result, stats, None, trace, &aga));
        }
        if stats.refinements >= limits.max_refinements {
            return Ok(finish(result, stats, Some(LimitHit::Refinements), trace, &aga));
        }
        if deadline.is_some_and(|d| Instant::now() > d) {
            return Ok(finish(result, stats, Some(LimitHit::Timeout), trace, &aga));
        }
        let candidates = propose_candidates(&aga, &pks, &labelling)?;
        let refined = refine_strict(&mut aga, &candidates, &pks, build_limits);
        let refined = match refined {
            Ok(r) => r,
            Err(RefineError::Build(e)) => {
                stats.add_build(&e.partial());
                let hit = limit_of(&e);
                return Ok(finish(ThreeValued::Unknown, stats, Some(hit), trace, &aga));
            }
            Err(e) => return Err(e),
        };
        stats.refinements += 1;
        for b in &refined.builds {
            stats.add_build(b);
        }
        for (c, changed) in &refined.applied {
            trace.push(TraceEntry {
                iteration: stats.refinements,
                kind: c.kind,
                state: c.state.to_string(),
                bit: c.bit,
                r_changed: *changed,
            });
        }
        pks = refined.pks;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc3::parse_formula;
    use crate::sysir::{generate_benchmark, BenchmarkKind};

    fn tv(s: &str) -> TBitVec {
        s.parse().unwrap()
    }

    fn landing_gear() -> Arc<SystemIR> {
        generate_benchmark(BenchmarkKind::LandingGear, 0, 0, 0)
            .unwrap()
            .into_shared()
    }

    fn initial(strategy: Strategy) -> (AbstractGA, Pks, Labelling) {
        let aga = AbstractGA::new(landing_gear(), strategy);
        let (pks, _) = build_pks(&aga, None, BuildLimits::default()).unwrap();
        let (_, lab) = model_check3(&pks, &parse_formula("EF(AG(msb))").unwrap()).unwrap();
        (aga, pks, lab)
    }

    #[test]
    fn input_strategy_splits_after_initial_state() {
        let (mut aga, pks, lab) = initial(Strategy::Input);
        let culprit = find_culprit(&pks, &lab).unwrap();
        assert_eq!(culprit.path, [0, 1, 2]);
        let cands = propose_candidates(&aga, &pks, &lab).unwrap();
        assert_eq!(
            cands[0],
            RefinementCandidate {
                kind: CandidateKind::InputBit,
                state: tv("000"),
                bit: 0
            }
        );
        let refined = refine_strict(&mut aga, &cands, &pks, BuildLimits::default()).unwrap();
        assert_eq!(refined.applied.len(), 1);
        assert_eq!(refined.pks.num_states(), 7);
    }

    #[test]
    fn decay_strategy_prefers_step_bits() {
        let (mut aga, pks, lab) = initial(Strategy::Decay);
        assert_eq!(pks.num_states(), 2);
        let cands = propose_candidates(&aga, &pks, &lab).unwrap();
        assert_eq!(cands[0].kind, CandidateKind::StepBit);
        assert_eq!(cands[0].state, tv("000"));
        let refined = refine_strict(&mut aga, &cands, &pks, BuildLimits::default()).unwrap();
        assert!(refined.applied.len() <= 3);
    }

    #[test]
    fn implied_candidates_are_skipped() {
        let (mut aga, pks, lab) = initial(Strategy::Input);
        let mut cands = propose_candidates(&aga, &pks, &lab).unwrap();
        aga.pq_mut().raise(&tv("0XX"), 0).unwrap();
        // the covering override already implies the split at 000
        cands.insert(0, cands[0]);
        let refined = refine_strict(&mut aga, &cands, &pks, BuildLimits::default());
        let refined = refined.unwrap();
        assert!(refined.applied.iter().all(|(c, _)| c.state != tv("000") || c.kind != CandidateKind::InputBit));
    }

    #[test]
    fn rejects_known_results() {
        let aga = AbstractGA::new(landing_gear(), Strategy::Naive);
        let (pks, _) = build_pks(&aga, None, BuildLimits::default()).unwrap();
        let (_, lab) = model_check3(&pks, &parse_formula("EF(AG(msb))").unwrap()).unwrap();
        assert!(matches!(
            propose_candidates(&aga, &pks, &lab),
            Err(RefineError::NotUnknown(ThreeValued::True))
        ));
    }

    #[test]
    fn landing_gear_verdicts() {
        let yes = parse_formula("EF(AG(msb))").unwrap();
        let no = parse_formula("AG(EF(!msb))").unwrap();
        for strategy in Strategy::ALL {
            let run = |f| {
                verify_loop(landing_gear(), f, strategy, VerifyLimits::default(), Fault::None, |_| {}).unwrap()
            };
            let a = run(&yes);
            assert_eq!(a.result, ThreeValued::True, "{strategy}");
            assert_eq!(run(&no).result, ThreeValued::False, "{strategy}");
            match strategy {
                Strategy::Naive => assert_eq!(a.stats.refinements, 0),
                _ => assert!(a.stats.refinements >= 1),
            }
        }
    }

    #[test]
    fn nonrecoverable_is_refuted() {
        let ir = generate_benchmark(BenchmarkKind::Nonrecoverable, 2, 1, 1).unwrap();
        let f = parse_formula("AG(EF(v_zero))").unwrap();
        let out = verify_loop(ir.into_shared(), &f, Strategy::Decay, VerifyLimits::default(), Fault::None, |_| {}).unwrap();
        assert_eq!(out.result, ThreeValued::False);
        assert!(out.limit_hit.is_none());
    }

    #[test]
    fn limits_yield_unknown() {
        let f = parse_formula("EF(AG(msb))").unwrap();
        let limits = VerifyLimits {
            max_refinements: 0,
            ..VerifyLimits::default()
        };
        let out = verify_loop(landing_gear(), &f, Strategy::Input, limits, Fault::None, |_| {}).unwrap();
        assert_eq!(out.result, ThreeValued::Unknown);
        assert_eq!(out.limit_hit, Some(LimitHit::Refinements));
        let limits = VerifyLimits {
            max_states: 2,
            ..VerifyLimits::default()
        };
        let out = verify_loop(landing_gear(), &f, Strategy::Naive, limits, Fault::None, |_| {}).unwrap();
        assert_eq!(out.limit_hit, Some(LimitHit::States));
    }

    #[test]
    fn trace_is_deterministic() {
        let f = parse_formula("AG(EF(!msb))").unwrap();
        let run = || verify_loop(landing_gear(), &f, Strategy::Decay, VerifyLimits::default(), Fault::None, |_| {}).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.stats.refinements, b.stats.refinements);
        assert_eq!(a.stats.states_total, b.stats.states_total);
        assert!(a.trace.iter().any(|t| t.r_changed));
    }
}
