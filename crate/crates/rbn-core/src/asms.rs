//! Two companion models with their own concrete semantics, used as oracle
//! suites: asynchronous shared-memory systems (a single shared register read
//! and written by anonymous agents) and immediate-observation nets (an agent
//! changes state by observing another agent, who stays put).

use std::collections::{HashSet, VecDeque};
use std::ops::RangeInclusive;

use crate::counting::Cube;
use crate::error::{Budget, Error, Result};
use crate::model::{Configuration, Letter, StateId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegOp {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AsmsTransition {
    pub source: StateId,
    pub op: RegOp,
    pub letter: Letter,
    pub target: StateId,
}

/// Agents around one shared register: a read transition fires only when the
/// register holds its letter, a write transition always fires and sets it.
#[derive(Debug, Clone)]
pub struct Asms {
    state_names: Vec<String>,
    letter_names: Vec<String>,
    transitions: Vec<AsmsTransition>,
}

impl Asms {
    pub fn new<S: Into<String>, L: Into<String>>(states: Vec<S>, letters: Vec<L>) -> Asms {
        Asms {
            state_names: states.into_iter().map(Into::into).collect(),
            letter_names: letters.into_iter().map(Into::into).collect(),
            transitions: Vec::new(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn letter_names(&self) -> &[String] {
        &self.letter_names
    }

    pub fn state_index(&self, name: &str) -> Option<StateId> {
        self.state_names.iter().position(|n| n == name).map(StateId)
    }

    pub fn letter_index(&self, name: &str) -> Option<Letter> {
        self.letter_names.iter().position(|n| n == name).map(Letter)
    }

    pub fn transitions(&self) -> &[AsmsTransition] {
        &self.transitions
    }

    pub fn add_transition(&mut self, t: AsmsTransition) -> Result<()> {
        if t.source.0 >= self.n_states() || t.target.0 >= self.n_states() {
            return Err(Error::Precondition("undeclared state in transition".into()));
        }
        if t.letter.0 >= self.letter_names.len() {
            return Err(Error::Precondition(
                "undeclared register value in transition".into(),
            ));
        }
        if !self.transitions.contains(&t) {
            self.transitions.push(t);
        }
        Ok(())
    }
}

/// A multiset of agent states plus the current register value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AsmsConfiguration {
    pub counts: Configuration,
    pub register: Letter,
}

/// A cube over the agent states paired with one required register value.
#[derive(Debug, Clone)]
pub struct AsmsCube {
    pub cube: Cube,
    pub register: Letter,
}

impl AsmsCube {
    pub fn contains(&self, c: &AsmsConfiguration) -> Result<bool> {
        Ok(self.register == c.register && self.cube.contains(&c.counts)?)
    }
}

/// Exact one-step successors. A read `(p, R(x), q)` needs an agent in p and
/// the register at x and leaves the register unchanged; a write
/// `(p, W(x), q)` needs an agent in p and sets the register to x.
pub fn asms_successors(a: &Asms, c: &AsmsConfiguration) -> Vec<AsmsConfiguration> {
    let mut out: HashSet<AsmsConfiguration> = HashSet::new();
    for t in a.transitions() {
        if c.counts.get(t.source) == 0 {
            continue;
        }
        let enabled = match t.op {
            RegOp::Read => c.register == t.letter,
            RegOp::Write => true,
        };
        if !enabled {
            continue;
        }
        let mut counts = c.counts.clone();
        counts.sub(t.source, 1);
        counts.add(t.target, 1);
        out.insert(AsmsConfiguration {
            counts,
            register: t.letter,
        });
    }
    let mut v: Vec<_> = out.into_iter().collect();
    v.sort();
    v
}

/// Bounded cube-to-cube reachability: for each agent count in the range,
/// exact breadth-first search from every start of that size. Returns the
/// first configuration found in the target, or `None` if no size in the
/// range works; a `None` says nothing about sizes outside the range.
pub fn asms_cube_reach_bounded(
    a: &Asms,
    from: &AsmsCube,
    to: &AsmsCube,
    sizes: RangeInclusive<u64>,
    budget: Budget,
) -> Result<Option<AsmsConfiguration>> {
    for n in sizes {
        let starts: Vec<AsmsConfiguration> = crate::counting::CountingConstraint::from_cube(
            from.cube.clone(),
        )
        .enumerate_size(n)
        .into_iter()
        .map(|counts| AsmsConfiguration {
            counts,
            register: from.register,
        })
        .collect();
        let mut seen: HashSet<AsmsConfiguration> = HashSet::new();
        let mut queue: VecDeque<AsmsConfiguration> = VecDeque::new();
        for s in starts {
            if seen.insert(s.clone()) {
                queue.push_back(s);
            }
        }
        while let Some(cur) = queue.pop_front() {
            if to.contains(&cur)? {
                return Ok(Some(cur));
            }
            budget.check(seen.len(), "shared-memory reachability")?;
            for succ in asms_successors(a, &cur) {
                if seen.insert(succ.clone()) {
                    queue.push_back(succ);
                }
            }
        }
    }
    Ok(None)
}

/// Immediate-observation net: transitions (p, q, p') move one agent from p
/// to p' provided some other agent sits in q.
#[derive(Debug, Clone)]
pub struct IoNet {
    state_names: Vec<String>,
    transitions: Vec<(StateId, StateId, StateId)>,
}

impl IoNet {
    pub fn new<S: Into<String>>(states: Vec<S>) -> IoNet {
        IoNet {
            state_names: states.into_iter().map(Into::into).collect(),
            transitions: Vec::new(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn state_index(&self, name: &str) -> Option<StateId> {
        self.state_names.iter().position(|n| n == name).map(StateId)
    }

    pub fn transitions(&self) -> &[(StateId, StateId, StateId)] {
        &self.transitions
    }

    pub fn add_transition(&mut self, p: StateId, q: StateId, p2: StateId) -> Result<()> {
        if p.0 >= self.n_states() || q.0 >= self.n_states() || p2.0 >= self.n_states() {
            return Err(Error::Precondition("undeclared state in transition".into()));
        }
        if !self.transitions.contains(&(p, q, p2)) {
            self.transitions.push((p, q, p2));
        }
        Ok(())
    }
}

/// Exact one-step successors: `(p, q, p')` requires the multiset to cover
/// one agent in p plus a distinct observed agent in q; the observed agent is
/// unchanged.
pub fn io_successors(net: &IoNet, c: &Configuration) -> Vec<Configuration> {
    let mut out: HashSet<Configuration> = HashSet::new();
    for &(p, q, p2) in net.transitions() {
        let mut needed = Configuration::zero(net.n_states());
        needed.add(p, 1);
        needed.add(q, 1);
        if !c.covers(&needed) {
            continue;
        }
        let mut succ = c.clone();
        succ.sub(p, 1);
        succ.add(p2, 1);
        out.insert(succ);
    }
    let mut v: Vec<_> = out.into_iter().collect();
    v.sort();
    v
}
