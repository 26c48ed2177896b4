//! Brute-force concrete model checking and executable audits of the
//! abstraction's soundness, simulation and termination conditions.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::bitvec3::{CBitVec, TBit, TBitVec};
use crate::genauto::AbstractGA;
use crate::mc3::{model_check2, Formula, McError};
use crate::statespace::{Edge, Pks};
use crate::sysir::SystemIR;

/// Widths above this are sampled instead of enumerated.
const ENUMERATE_BITS: u32 = 12;
const SAMPLES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("concrete state space exceeds {cap} states ({reached} reached)")]
    StateLimit { cap: usize, reached: usize },
    #[error("input width {0} is too large to enumerate")]
    InputSpace(u32),
    #[error("width mismatch: concrete {concrete}, abstract {abstract_width}")]
    WidthMismatch { concrete: u32, abstract_width: u32 },
    #[error(transparent)]
    Check(#[from] McError),
}

/// Reachable concrete Kripke structure: every input value is explored
/// in ascending order from each state.
pub fn build_concrete_ks(ir: &SystemIR, cap: usize) -> Result<Pks, OracleError> {
    let (w, y) = (ir.state_width(), ir.input_width());
    if y > 24 {
        return Err(OracleError::InputSpace(y));
    }
    let init = ir.init_state();
    let mut states = vec![init];
    let mut index = HashMap::from([(init.value(), 0usize)]);
    let mut succ = Vec::new();
    let mut labels = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(k) = queue.pop_front() {
        let s = states[k];
        let mut edges: Vec<Edge> = Vec::new();
        let mut seen = HashSet::new();
        for i in 0..(1u64 << y) {
            let input = CBitVec::new(y, i).expect("in range");
            let t = ir.concrete_next(s, input);
            if !seen.insert(t.value()) {
                continue;
            }
            let to = match index.get(&t.value()) {
                Some(&to) => to,
                None => {
                    if states.len() >= cap {
                        return Err(OracleError::StateLimit {
                            cap,
                            reached: states.len(),
                        });
                    }
                    index.insert(t.value(), states.len());
                    queue.push_back(states.len());
                    states.push(t);
                    states.len() - 1
                }
            };
            edges.push(Edge { to, via: input.into() });
        }
        succ.push(edges);
        labels.push(ir.concrete_labels(s).into_iter().map(Some).collect());
    }
    debug_assert!(states.iter().all(|s| s.width() == w));
    Ok(Pks::from_parts(
        states.into_iter().map(TBitVec::from).collect(),
        succ,
        labels,
        ir.label_names().map(str::to_string).collect(),
    ))
}

/// Two-valued truth of `formula` on the concrete system.
pub fn verify_concrete(ir: &SystemIR, formula: &Formula, cap: usize) -> Result<bool, OracleError> {
    let ks = build_concrete_ks(ir, cap)?;
    Ok(model_check2(&ks, formula)?.0)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Violation {
    pub condition: &'static str,
    pub witness: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    fn from_violations(mut violations: Vec<Violation>) -> Self {
        violations.sort();
        violations.dedup();
        AuditReport {
            passed: violations.is_empty(),
            violations,
        }
    }

    /// Condition ids that were violated, sorted and deduplicated.
    pub fn conditions(&self) -> Vec<&'static str> {
        let mut out: Vec<_> = self.violations.iter().map(|v| v.condition).collect();
        out.dedup();
        out
    }

    pub fn merge(self, other: AuditReport) -> AuditReport {
        let mut all = self.violations;
        all.extend(other.violations);
        AuditReport::from_violations(all)
    }
}

fn violation(condition: &'static str, witness: String) -> Violation {
    Violation { condition, witness }
}

/// Checks that H = {(s, ŝ) | s ∈ γ(ŝ)} over reachable states is a modal
/// simulation from `ks` to `pks` relating the initial states.
pub fn check_modal_simulation(ks: &Pks, pks: &Pks) -> Result<AuditReport, OracleError> {
    let (cw, aw) = (ks.state(0).width(), pks.state(0).width());
    if cw != aw || ks.label_names() != pks.label_names() {
        return Err(OracleError::WidthMismatch {
            concrete: cw,
            abstract_width: aw,
        });
    }
    let mut out = Vec::new();
    let related = |c: usize, a: usize| pks.state(a).covers_unchecked(ks.state(c));

    if !related(ks.initial(), pks.initial()) {
        out.push(violation(
            "12init",
            format!("s0={} ŝ0={}", ks.state(ks.initial()), pks.state(pks.initial())),
        ));
    }
    for a in 0..pks.num_states() {
        let abs = pks.state(a);
        let members: Vec<usize> = if abs.unknown_count() <= ENUMERATE_BITS
            && (1usize << abs.unknown_count()) < ks.num_states()
        {
            abs.concretizations()
                .filter_map(|c| ks.index_of(&c.into()))
                .collect()
        } else {
            (0..ks.num_states()).filter(|&c| related(c, a)).collect()
        };
        for c in members {
            for (k, (&lc, &la)) in ks.labels(c).iter().zip(pks.labels(a)).enumerate() {
                if la.is_some() && la != lc {
                    out.push(violation(
                        "12a",
                        format!("s={} ŝ={} label={}", ks.state(c), abs, ks.label_names()[k]),
                    ));
                }
            }
            for e in ks.successors(c) {
                if !pks.successors(a).iter().any(|f| related(e.to, f.to)) {
                    out.push(violation(
                        "12b",
                        format!("s={} t={} ŝ={}", ks.state(c), ks.state(e.to), abs),
                    ));
                }
            }
            for f in pks.successors(a) {
                if !ks.successors(c).iter().any(|e| related(e.to, f.to)) {
                    out.push(violation(
                        "12c",
                        format!("s={} ŝ={} t̂={}", ks.state(c), abs, pks.state(f.to)),
                    ));
                }
            }
        }
    }
    Ok(AuditReport::from_violations(out))
}

/// Abstract states an audit quantifies over.
#[derive(Debug, Clone, Copy)]
pub enum Sampler<'a> {
    /// Every three-valued state; only sensible for small widths.
    Exhaustive,
    /// The states of a built structure.
    Reachable(&'a Pks),
    /// Uniformly random states with a fixed seed.
    Random { seed: u64, count: usize },
}

fn all_abstract(width: u32) -> Vec<TBitVec> {
    let mut out = Vec::new();
    for unknown in 0..(1u64 << width) {
        for value in (0..(1u64 << width)).filter(|v| v & unknown == 0) {
            out.push(TBitVec::from_masks(width, value, unknown).expect("disjoint"));
        }
    }
    out
}

fn random_abstract(rng: &mut ChaCha8Rng, width: u32) -> TBitVec {
    let bits: Vec<TBit> = (0..width)
        .map(|_| match rng.gen_range(0..3) {
            0 => TBit::Zero,
            1 => TBit::One,
            _ => TBit::Unknown,
        })
        .collect();
    TBitVec::from_bits(&bits).expect("nonzero width")
}

fn random_concrete(rng: &mut ChaCha8Rng, width: u32) -> CBitVec {
    let mask = if width >= 64 { u64::MAX } else { (1u64 << width) - 1 };
    CBitVec::new(width, rng.gen::<u64>() & mask).expect("masked")
}

/// Concretizations of `v`, or a deterministic sample when there are many.
fn members(v: &TBitVec, rng: &mut ChaCha8Rng) -> Vec<CBitVec> {
    if v.unknown_count() <= ENUMERATE_BITS {
        return v.concretizations().collect();
    }
    (0..SAMPLES)
        .map(|_| {
            let noise = rng.gen::<u64>() & v.unknown_mask();
            CBitVec::new(v.width(), v.value_mask() | noise).expect("within width")
        })
        .collect()
}

fn sample_states(aga: &AbstractGA, sampler: Sampler<'_>) -> Vec<TBitVec> {
    let w = aga.ir().state_width();
    let mut out = match sampler {
        Sampler::Exhaustive => all_abstract(w),
        Sampler::Reachable(pks) => pks.states().to_vec(),
        Sampler::Random { seed, count } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count)
                .map(|k| {
                    if k % 2 == 0 {
                        random_abstract(&mut rng, w)
                    } else {
                        random_concrete(&mut rng, w).into()
                    }
                })
                .collect()
        }
    };
    // Override keys and their one-bit refinements are where precision
    // changes, so faults in the closures show up there.
    let keys: Vec<TBitVec> = aga
        .pq()
        .overrides()
        .chain(aga.pf().overrides())
        .map(|(k, _)| *k)
        .collect();
    for key in keys {
        out.push(key);
        for bit in 0..w {
            if key.bit(bit) == TBit::Unknown {
                for b in [TBit::Zero, TBit::One] {
                    out.push(key.with_bit(bit, b).expect("in range"));
                }
            }
        }
    }
    out.push(aga.initial_state());
    let mut seen = HashSet::new();
    out.retain(|s| seen.insert(*s));
    out
}

fn concrete_inputs(width: u32, rng: &mut ChaCha8Rng) -> Vec<CBitVec> {
    if width <= ENUMERATE_BITS {
        (0..(1u64 << width))
            .map(|i| CBitVec::new(width, i).expect("in range"))
            .collect()
    } else {
        (0..SAMPLES).map(|_| random_concrete(rng, width)).collect()
    }
}

/// Checks the soundness conditions of the abstract automaton and the
/// monotonicity of its labels and step under one-bit coarsening.
pub fn audit_soundness(aga: &AbstractGA, sampler: Sampler<'_>) -> AuditReport {
    let ir = aga.ir();
    let (w, y) = (ir.state_width(), ir.input_width());
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut out = Vec::new();

    let init = aga.initial_state();
    if init.as_concrete() != Some(ir.init_state()) {
        out.push(violation("6a", format!("ŝ0={init} s0={}", TBitVec::from(ir.init_state()))));
    }

    let inputs = concrete_inputs(y, &mut rng);
    for state in sample_states(aga, sampler) {
        let labels = aga.labels(&state);
        let concretes = members(&state, &mut rng);
        for &s in &concretes {
            for (k, (l, c)) in labels.iter().zip(ir.concrete_labels(s)).enumerate() {
                if l.is_some_and(|l| l != c) {
                    out.push(violation(
                        "6b",
                        format!("ŝ={state} s={} label={k}", TBitVec::from(s)),
                    ));
                }
            }
        }

        let qualified = aga.qualified_inputs(&state);
        for &i in &inputs {
            if !qualified.iter().any(|q| q.covers_unchecked(&i.into())) {
                out.push(violation("6c", format!("ŝ={state} i={}", TBitVec::from(i))));
            }
        }

        for q in &qualified {
            let next = aga.abstract_step(&state, q);
            let q_members = members(q, &mut rng);
            'pairs: for &s in &concretes {
                for &i in &q_members {
                    let t = ir.concrete_next(s, i);
                    if !next.covers_unchecked(&t.into()) {
                        out.push(violation(
                            "6d",
                            format!("ŝ={state} î={q} s={} i={} f={}", TBitVec::from(s), TBitVec::from(i), TBitVec::from(t)),
                        ));
                        break 'pairs;
                    }
                }
            }

            for bit in (0..y).filter(|&b| q.bit(b) != TBit::Unknown) {
                let coarse = q.with_bit(bit, TBit::Unknown).expect("in range");
                if !aga.abstract_step(&state, &coarse).covers_unchecked(&next) {
                    out.push(violation("7b", format!("ŝ={state} î={q} î'={coarse}")));
                }
            }
        }

        for bit in (0..w).filter(|&b| state.bit(b) != TBit::Unknown) {
            let coarse = state.with_bit(bit, TBit::Unknown).expect("in range");
            for (k, (lc, lf)) in aga.labels(&coarse).into_iter().zip(&labels).enumerate() {
                if lc.is_some() && lc != *lf {
                    out.push(violation("7a", format!("ŝ={state} ŝ'={coarse} label={k}")));
                }
            }
            let coarse_inputs = aga.qualified_inputs(&coarse);
            for q in &qualified {
                let fine = aga.abstract_step(&state, q);
                let covering = coarse_inputs.iter().find(|c| c.covers_unchecked(q));
                let Some(cq) = covering else {
                    // no coarse input covers q; compare with q itself
                    if !aga.abstract_step(&coarse, q).covers_unchecked(&fine) {
                        out.push(violation("7b", format!("ŝ={state} ŝ'={coarse} î={q}")));
                    }
                    continue;
                };
                if !aga.abstract_step(&coarse, cq).covers_unchecked(&fine) {
                    out.push(violation("7b", format!("ŝ={state} ŝ'={coarse} î={q} î'={cq}")));
                }
            }
        }
    }
    AuditReport::from_violations(out)
}

/// Checks the termination conditions: exact labels and steps on
/// singleton states and singleton qualified inputs everywhere.
pub fn audit_terminating(aga: &AbstractGA, sampler: Sampler<'_>) -> AuditReport {
    let ir = aga.ir();
    let y = ir.input_width();
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e57);
    let mut out = Vec::new();
    let inputs = concrete_inputs(y, &mut rng);

    for state in sample_states(aga, sampler) {
        let qualified = aga.qualified_inputs(&state);
        for q in qualified.iter().filter(|q| !q.is_concrete()) {
            out.push(violation("11b", format!("ŝ={state} î={q}")));
        }
        for &i in &inputs {
            if !qualified.contains(&i.into()) {
                out.push(violation("11c", format!("ŝ={state} i={}", TBitVec::from(i))));
            }
        }
        let Some(s) = state.as_concrete() else { continue };
        let exact: Vec<Option<bool>> = ir.concrete_labels(s).into_iter().map(Some).collect();
        if aga.labels(&state) != exact {
            out.push(violation("11a", format!("ŝ={state}")));
        }
        for &i in &inputs {
            let t: TBitVec = ir.concrete_next(s, i).into();
            let i: TBitVec = i.into();
            if aga.abstract_step(&state, &i) != t {
                out.push(violation("11d", format!("ŝ={state} i={i} f={t}")));
            }
        }
    }
    AuditReport::from_violations(out)
}
