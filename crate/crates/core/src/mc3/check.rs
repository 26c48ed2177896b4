use std::collections::VecDeque;

use super::{normalize_nnf, Formula, McError, Nnf, ThreeValued};
use crate::statespace::Pks;

type Set = Vec<bool>;

struct Graph<'a> {
    pks: &'a Pks,
    pred: Vec<Vec<usize>>,
}

impl<'a> Graph<'a> {
    fn new(pks: &'a Pks) -> Self {
        let mut pred = vec![Vec::new(); pks.num_states()];
        for (from, e) in pks.transitions() {
            pred[e.to].push(from);
        }
        Graph { pks, pred }
    }

    fn len(&self) -> usize {
        self.pred.len()
    }

    fn ex(&self, a: &Set) -> Set {
        (0..self.len())
            .map(|s| self.pks.successors(s).iter().any(|e| a[e.to]))
            .collect()
    }

    fn ax(&self, a: &Set) -> Set {
        (0..self.len())
            .map(|s| self.pks.successors(s).iter().all(|e| a[e.to]))
            .collect()
    }

    /// Least fixpoint of b ∨ (a ∧ EX Z) by backward search from b.
    fn eu(&self, a: &Set, b: &Set) -> Set {
        let mut sat = b.clone();
        let mut work: VecDeque<usize> = (0..self.len()).filter(|&s| b[s]).collect();
        while let Some(t) = work.pop_front() {
            for &s in &self.pred[t] {
                if !sat[s] && a[s] {
                    sat[s] = true;
                    work.push_back(s);
                }
            }
        }
        sat
    }

    /// Least fixpoint of b ∨ (a ∧ AX Z), counting unsatisfied successors.
    fn au(&self, a: &Set, b: &Set) -> Set {
        let mut remaining: Vec<usize> = (0..self.len())
            .map(|s| self.pks.successors(s).len())
            .collect();
        let mut sat = b.clone();
        let mut work: VecDeque<usize> = (0..self.len()).filter(|&s| b[s]).collect();
        while let Some(t) = work.pop_front() {
            // a state may list the same successor once only
            for &s in &self.pred[t] {
                remaining[s] -= 1;
                if remaining[s] == 0 && !sat[s] && a[s] {
                    sat[s] = true;
                    work.push_back(s);
                }
            }
        }
        sat
    }

    /// Greatest fixpoint of a ∧ EX Z.
    fn eg(&self, a: &Set) -> Set {
        let mut sat = a.clone();
        let mut count: Vec<usize> = (0..self.len())
            .map(|s| self.pks.successors(s).iter().filter(|e| a[e.to]).count())
            .collect();
        let mut work: VecDeque<usize> = (0..self.len()).filter(|&s| sat[s] && count[s] == 0).collect();
        for &s in &work {
            sat[s] = false;
        }
        while let Some(t) = work.pop_front() {
            for &s in &self.pred[t] {
                if sat[s] {
                    count[s] -= 1;
                    if count[s] == 0 {
                        sat[s] = false;
                        work.push_back(s);
                    }
                }
            }
        }
        sat
    }
}

fn not(a: &Set) -> Set {
    a.iter().map(|v| !v).collect()
}

fn zip(a: &Set, b: &Set, f: impl Fn(bool, bool) -> bool) -> Set {
    a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect()
}

fn check_atoms<'a>(pks: &Pks, atoms: impl IntoIterator<Item = &'a str>) -> Result<(), McError> {
    for atom in atoms {
        if pks.label_index(atom).is_none() {
            return Err(McError::UndeclaredAtom(atom.to_string()));
        }
    }
    Ok(())
}

/// Two-valued CTL model checking. Returns satisfaction at the initial
/// state and the satisfying set of `formula`.
pub fn model_check2(pks: &Pks, formula: &Formula) -> Result<(bool, Vec<bool>), McError> {
    check_atoms(pks, formula.atoms())?;
    let graph = Graph::new(pks);
    let sat = sat2(&graph, formula)?;
    Ok((sat[pks.initial()], sat))
}

fn sat2(g: &Graph, f: &Formula) -> Result<Set, McError> {
    let n = g.len();
    Ok(match f {
        Formula::True => vec![true; n],
        Formula::False => vec![false; n],
        Formula::Atom(name) => {
            let k = g.pks.label_index(name).expect("atoms checked");
            (0..n)
                .map(|s| {
                    g.pks.labels(s)[k].ok_or_else(|| McError::UnknownLabel {
                        atom: name.clone(),
                        state: g.pks.state(s).to_string(),
                    })
                })
                .collect::<Result<_, _>>()?
        }
        Formula::Not(a) => not(&sat2(g, a)?),
        Formula::And(a, b) => zip(&sat2(g, a)?, &sat2(g, b)?, |x, y| x && y),
        Formula::Or(a, b) => zip(&sat2(g, a)?, &sat2(g, b)?, |x, y| x || y),
        Formula::Implies(a, b) => zip(&sat2(g, a)?, &sat2(g, b)?, |x, y| !x || y),
        Formula::EX(a) => g.ex(&sat2(g, a)?),
        Formula::AX(a) => g.ax(&sat2(g, a)?),
        Formula::EF(a) => g.eu(&vec![true; n], &sat2(g, a)?),
        Formula::AF(a) => g.au(&vec![true; n], &sat2(g, a)?),
        Formula::EG(a) => g.eg(&sat2(g, a)?),
        Formula::AG(a) => not(&g.eu(&vec![true; n], &not(&sat2(g, a)?))),
        Formula::EU(a, b) => g.eu(&sat2(g, a)?, &sat2(g, b)?),
        Formula::AU(a, b) => g.au(&sat2(g, a)?, &sat2(g, b)?),
    })
}

/// A node of the normalized formula; children precede parents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NnfNode {
    True,
    False,
    Lit { atom: usize, positive: bool },
    And(usize, usize),
    Or(usize, usize),
    EX(usize),
    AX(usize),
    EU(usize, usize),
    AU(usize, usize),
    EW(usize, usize),
    AW(usize, usize),
}

/// Per-state values of every subformula of the normalized property.
#[derive(Debug, Clone)]
pub struct Labelling {
    nnf: Nnf,
    nodes: Vec<NnfNode>,
    pess: Vec<Set>,
    opt: Vec<Set>,
}

impl Labelling {
    pub fn nnf(&self) -> &Nnf {
        &self.nnf
    }

    pub fn nodes(&self) -> &[NnfNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn value(&self, node: usize, state: usize) -> ThreeValued {
        if self.pess[node][state] {
            ThreeValued::True
        } else if !self.opt[node][state] {
            ThreeValued::False
        } else {
            ThreeValued::Unknown
        }
    }
}

fn flatten(pks: &Pks, f: &Nnf, nodes: &mut Vec<NnfNode>) -> usize {
    let node = match f {
        Nnf::True => NnfNode::True,
        Nnf::False => NnfNode::False,
        Nnf::Lit(name, positive) => NnfNode::Lit {
            atom: pks.label_index(name).expect("atoms checked"),
            positive: *positive,
        },
        Nnf::EX(a) => NnfNode::EX(flatten(pks, a, nodes)),
        Nnf::AX(a) => NnfNode::AX(flatten(pks, a, nodes)),
        Nnf::And(a, b)
        | Nnf::Or(a, b)
        | Nnf::EU(a, b)
        | Nnf::AU(a, b)
        | Nnf::EW(a, b)
        | Nnf::AW(a, b) => {
            let (x, y) = (flatten(pks, a, nodes), flatten(pks, b, nodes));
            match f {
                Nnf::And(..) => NnfNode::And(x, y),
                Nnf::Or(..) => NnfNode::Or(x, y),
                Nnf::EU(..) => NnfNode::EU(x, y),
                Nnf::AU(..) => NnfNode::AU(x, y),
                Nnf::EW(..) => NnfNode::EW(x, y),
                _ => NnfNode::AW(x, y),
            }
        }
    };
    nodes.push(node);
    nodes.len() - 1
}

/// Evaluates every node with `⊥` literals resolved to `unknown_as`.
fn eval_completion(g: &Graph, nodes: &[NnfNode], unknown_as: bool) -> Vec<Set> {
    let n = g.len();
    let mut sets: Vec<Set> = Vec::with_capacity(nodes.len());
    for node in nodes {
        let set = match *node {
            NnfNode::True => vec![true; n],
            NnfNode::False => vec![false; n],
            NnfNode::Lit { atom, positive } => (0..n)
                .map(|s| g.pks.labels(s)[atom].map_or(unknown_as, |v| v == positive))
                .collect(),
            NnfNode::And(a, b) => zip(&sets[a], &sets[b], |x, y| x && y),
            NnfNode::Or(a, b) => zip(&sets[a], &sets[b], |x, y| x || y),
            NnfNode::EX(a) => g.ex(&sets[a]),
            NnfNode::AX(a) => g.ax(&sets[a]),
            NnfNode::EU(a, b) => g.eu(&sets[a], &sets[b]),
            NnfNode::AU(a, b) => g.au(&sets[a], &sets[b]),
            NnfNode::EW(a, b) => zip(&g.eu(&sets[a], &sets[b]), &g.eg(&sets[a]), |x, y| x || y),
            NnfNode::AW(a, b) => {
                let stop = zip(&sets[a], &sets[b], |x, y| !x && !y);
                not(&g.eu(&not(&sets[b]), &stop))
            }
        };
        sets.push(set);
    }
    sets
}

/// Three-valued CTL model checking on the pessimistic and optimistic
/// label completions of the normalized property.
pub fn model_check3(pks: &Pks, formula: &Formula) -> Result<(ThreeValued, Labelling), McError> {
    check_atoms(pks, formula.atoms())?;
    let nnf = normalize_nnf(formula);
    let mut nodes = Vec::new();
    flatten(pks, &nnf, &mut nodes);
    let graph = Graph::new(pks);
    let pess = eval_completion(&graph, &nodes, false);
    let opt = eval_completion(&graph, &nodes, true);
    let labelling = Labelling {
        nnf,
        nodes,
        pess,
        opt,
    };
    let result = labelling.value(labelling.root(), pks.initial());
    Ok((result, labelling))
}
