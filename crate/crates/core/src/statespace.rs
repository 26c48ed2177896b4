//! Reachable partial Kripke structures by forward simulation.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::bitvec3::TBitVec;
use crate::genauto::AbstractGA;
use crate::sysir::{EvalScratch, LabelValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub to: usize,
    /// A qualified input producing this transition (the first one found).
    pub via: TBitVec,
}

/// A partial Kripke structure over reachable states. State 0 is initial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pks {
    states: Vec<TBitVec>,
    index: HashMap<TBitVec, usize>,
    succ: Vec<Vec<Edge>>,
    labels: Vec<Vec<LabelValue>>,
    label_names: Vec<String>,
    /// (input, step) precision each state was expanded with.
    masks: Vec<(u64, u64)>,
}

impl Pks {
    /// Assembles a structure from explicit parts; `succ[k]` lists
    /// `(to, via)` pairs of state `k`.
    pub fn from_parts(
        states: Vec<TBitVec>,
        succ: Vec<Vec<Edge>>,
        labels: Vec<Vec<LabelValue>>,
        label_names: Vec<String>,
    ) -> Self {
        assert_eq!(states.len(), succ.len());
        assert_eq!(states.len(), labels.len());
        let index = states.iter().enumerate().map(|(k, s)| (*s, k)).collect();
        let masks = vec![(0, 0); states.len()];
        Pks {
            states,
            index,
            succ,
            labels,
            label_names,
            masks,
        }
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn states(&self) -> &[TBitVec] {
        &self.states
    }

    pub fn state(&self, k: usize) -> &TBitVec {
        &self.states[k]
    }

    pub fn index_of(&self, state: &TBitVec) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn successors(&self, k: usize) -> &[Edge] {
        &self.succ[k]
    }

    pub fn transitions(&self) -> impl Iterator<Item = (usize, &Edge)> {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(k, edges)| edges.iter().map(move |e| (k, e)))
    }

    pub fn labels(&self, k: usize) -> &[LabelValue] {
        &self.labels[k]
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.label_names.iter().position(|n| n == name)
    }

    pub fn has_unknown_labels(&self) -> bool {
        self.labels.iter().flatten().any(Option::is_none)
    }

    /// State set and `(from, to)` pairs, ignoring via inputs.
    pub fn relation(&self) -> (BTreeSet<TBitVec>, BTreeSet<(TBitVec, TBitVec)>) {
        let states = self.states.iter().copied().collect();
        let edges = self
            .transitions()
            .map(|(k, e)| (self.states[k], self.states[e.to]))
            .collect();
        (states, edges)
    }

    /// Equal states, transitions and labels, regardless of numbering.
    pub fn same_structure(&self, other: &Pks) -> bool {
        self.relation() == other.relation()
            && self.label_names == other.label_names
            && self.states[self.initial()] == other.states[other.initial()]
            && self
                .states
                .iter()
                .enumerate()
                .all(|(k, s)| other.index_of(s).is_some_and(|j| other.labels[j] == self.labels[k]))
    }

    pub fn remove_transition(&mut self, from: usize, to: usize) -> bool {
        let before = self.succ[from].len();
        self.succ[from].retain(|e| e.to != to);
        self.succ[from].len() != before
    }

    pub fn add_transition(&mut self, from: usize, to: usize, via: TBitVec) {
        if !self.succ[from].iter().any(|e| e.to == to) {
            self.succ[from].push(Edge { to, via });
        }
    }

    pub fn set_label(&mut self, state: usize, label: usize, value: LabelValue) {
        self.labels[state][label] = value;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BuildStats {
    /// States not present in the reused structure.
    pub states_generated: usize,
    /// Transitions computed by simulation rather than reused.
    pub transitions_generated: usize,
    pub states: usize,
    pub transitions: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct BuildLimits {
    pub max_states: usize,
    pub deadline: Option<Instant>,
}

impl Default for BuildLimits {
    fn default() -> Self {
        BuildLimits {
            max_states: usize::MAX,
            deadline: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("state limit exceeded: {} states, {} transitions generated", .partial.states, .partial.transitions)]
    StateLimit { partial: BuildStats },
    #[error("time limit exceeded after {} states", .partial.states)]
    Timeout { partial: BuildStats },
}

impl BuildError {
    pub fn partial(&self) -> BuildStats {
        match self {
            BuildError::StateLimit { partial } | BuildError::Timeout { partial } => *partial,
        }
    }
}

/// Builds the reachable part of Γ(Ĝ) breadth-first from the initial
/// state. States of `reuse` whose precision is unchanged keep their
/// previously computed successors.
pub fn build_pks(
    aga: &AbstractGA,
    reuse: Option<&Pks>,
    limits: BuildLimits,
) -> Result<(Pks, BuildStats), BuildError> {
    let ir = aga.ir();
    let label_names: Vec<String> = ir.label_names().map(str::to_string).collect();
    let mut states = vec![aga.initial_state()];
    let mut index = HashMap::from([(states[0], 0usize)]);
    let mut succ: Vec<Vec<Edge>> = Vec::new();
    let mut labels = Vec::new();
    let mut masks = Vec::new();
    let mut stats = BuildStats::default();
    let mut scratch = EvalScratch::default();
    let mut seen = HashSet::new();
    let mut queue = VecDeque::from([0usize]);

    let fresh = |s: &TBitVec| reuse.is_none_or(|p| p.index_of(s).is_none());
    if fresh(&states[0]) {
        stats.states_generated += 1;
    }

    while let Some(k) = queue.pop_front() {
        if k % 256 == 0 {
            if let Some(deadline) = limits.deadline {
                if Instant::now() > deadline {
                    stats.states = states.len();
                    stats.transitions = succ.iter().map(Vec::len).sum();
                    return Err(BuildError::Timeout { partial: stats });
                }
            }
        }
        let state = states[k];
        let mq = aga.input_mask(&state);
        let mf = aga.step_mask(&state);
        let cached = reuse.and_then(|p| {
            p.index_of(&state)
                .filter(|&j| p.masks[j] == (mq, mf))
                .map(|j| (p, j))
        });
        let (targets, label): (Vec<(TBitVec, TBitVec)>, Vec<LabelValue>) = match cached {
            Some((p, j)) => (
                p.succ[j].iter().map(|e| (p.states[e.to], e.via)).collect(),
                p.labels[j].clone(),
            ),
            None => {
                seen.clear();
                let mut out = Vec::new();
                for input in aga.qualified_inputs(&state) {
                    let next = aga.step_with_mask(&state, &input, mf, &mut scratch);
                    if seen.insert(next) {
                        out.push((next, input));
                    }
                }
                stats.transitions_generated += out.len();
                let label = match reuse.and_then(|p| p.index_of(&state)) {
                    Some(j) => reuse.expect("checked").labels[j].clone(),
                    None => aga.labels(&state),
                };
                (out, label)
            }
        };
        let mut edges = Vec::with_capacity(targets.len());
        for (next, via) in targets {
            let to = match index.get(&next) {
                Some(&to) => to,
                None => {
                    let to = states.len();
                    if to >= limits.max_states {
                        stats.states = states.len();
                        stats.transitions = succ.iter().map(Vec::len).sum::<usize>() + edges.len();
                        return Err(BuildError::StateLimit { partial: stats });
                    }
                    if fresh(&next) {
                        stats.states_generated += 1;
                    }
                    states.push(next);
                    index.insert(next, to);
                    queue.push_back(to);
                    to
                }
            };
            edges.push(Edge { to, via });
        }
        succ.push(edges);
        labels.push(label);
        masks.push((mq, mf));
    }
    stats.states = states.len();
    stats.transitions = succ.iter().map(Vec::len).sum();
    Ok((
        Pks {
            states,
            index,
            succ,
            labels,
            label_names,
            masks,
        },
        stats,
    ))
}

/// GraphViz rendering; label values become node attributes.
pub fn export_dot(pks: &Pks) -> String {
    let mut out = String::from("digraph pks {\n");
    for (k, s) in pks.states().iter().enumerate() {
        let mut attrs: Vec<String> = pks
            .label_names()
            .iter()
            .zip(pks.labels(k))
            .map(|(name, v)| {
                let v = match v {
                    Some(true) => "1",
                    Some(false) => "0",
                    None => "⊥",
                };
                format!("{name}=\"{v}\"")
            })
            .collect();
        if k == pks.initial() {
            attrs.push("peripheries=2".into());
        }
        if attrs.is_empty() {
            let _ = writeln!(out, "  \"{s}\";");
        } else {
            let _ = writeln!(out, "  \"{s}\" [{}];", attrs.join(", "));
        }
    }
    for (k, e) in pks.transitions() {
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [label=\"{}\"];",
            pks.state(k),
            pks.state(e.to),
            e.via
        );
    }
    out.push_str("}\n");
    out
}
