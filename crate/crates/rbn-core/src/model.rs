//! Concrete RBN semantics: states, transitions, configurations, the broadcast
//! step relation and exhaustive fixed-size reachability. Everything here is
//! brute force on purpose; the symbolic layers are validated against it.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::counting::CountingConstraint;
use crate::error::{Budget, Error, Result};

/// Index into the ordered state list of an [`Rbn`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub usize);

/// Index into the ordered alphabet of an [`Rbn`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransitionKind {
    Broadcast,
    Receive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transition {
    pub source: StateId,
    pub kind: TransitionKind,
    pub letter: Letter,
    pub target: StateId,
}

/// A reconfigurable broadcast network: finite states, a broadcast alphabet
/// and a set of `!a` / `?a` transitions. Agents are anonymous and the
/// communication topology is abstracted away.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rbn {
    state_names: Vec<String>,
    letter_names: Vec<String>,
    transitions: Vec<Transition>,
}

impl Rbn {
    pub fn new<S: Into<String>, L: Into<String>>(states: Vec<S>, letters: Vec<L>) -> Rbn {
        Rbn {
            state_names: states.into_iter().map(Into::into).collect(),
            letter_names: letters.into_iter().map(Into::into).collect(),
            transitions: Vec::new(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn n_letters(&self) -> usize {
        self.letter_names.len()
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

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Adds a transition; duplicates are ignored so the transition set stays a set.
    pub fn add_transition(&mut self, t: Transition) -> Result<()> {
        if t.source.0 >= self.n_states() || t.target.0 >= self.n_states() {
            return Err(Error::Precondition(format!(
                "transition references undeclared state (|Q| = {})",
                self.n_states()
            )));
        }
        if t.letter.0 >= self.n_letters() {
            return Err(Error::Precondition(format!(
                "transition references undeclared letter (|Sigma| = {})",
                self.n_letters()
            )));
        }
        if !self.transitions.contains(&t) {
            self.transitions.push(t);
        }
        Ok(())
    }

    pub fn broadcasts_on(&self, letter: Letter) -> impl Iterator<Item = &Transition> {
        self.transitions
            .iter()
            .filter(move |t| t.kind == TransitionKind::Broadcast && t.letter == letter)
    }

    pub fn receives_on(&self, letter: Letter) -> impl Iterator<Item = &Transition> {
        self.transitions
            .iter()
            .filter(move |t| t.kind == TransitionKind::Receive && t.letter == letter)
    }

    pub fn broadcasts(&self) -> impl Iterator<Item = &Transition> {
        self.transitions
            .iter()
            .filter(|t| t.kind == TransitionKind::Broadcast)
    }

    /// Same states and alphabet with every transition flipped: `(q, *a, q')`
    /// becomes `(q', *a, q)`. Running the result forwards runs `self`
    /// backwards, which is how backward closures are computed.
    pub fn reverse(&self) -> Rbn {
        let mut r = Rbn {
            state_names: self.state_names.clone(),
            letter_names: self.letter_names.clone(),
            transitions: Vec::new(),
        };
        for t in &self.transitions {
            let flipped = Transition {
                source: t.target,
                kind: t.kind,
                letter: t.letter,
                target: t.source,
            };
            if !r.transitions.contains(&flipped) {
                r.transitions.push(flipped);
            }
        }
        r
    }
}

/// A multiset over the states of an RBN, counting agents per state.
/// Steps preserve the total count, so reachability questions decompose by size.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    counts: Vec<u64>,
}

impl Configuration {
    pub fn new(counts: Vec<u64>) -> Configuration {
        Configuration { counts }
    }

    pub fn zero(n_states: usize) -> Configuration {
        Configuration {
            counts: vec![0; n_states],
        }
    }

    /// Builds `⟦n·q⟧`-style multisets from (state, count) pairs.
    pub fn from_pairs(n_states: usize, pairs: &[(StateId, u64)]) -> Configuration {
        let mut c = Configuration::zero(n_states);
        for &(q, n) in pairs {
            c.counts[q.0] += n;
        }
        c
    }

    pub fn arity(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, q: StateId) -> u64 {
        self.counts[q.0]
    }

    pub fn set(&mut self, q: StateId, n: u64) {
        self.counts[q.0] = n;
    }

    pub fn size(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Componentwise `self >= other`, the covering order.
    pub fn covers(&self, other: &Configuration) -> bool {
        self.counts
            .iter()
            .zip(&other.counts)
            .all(|(a, b)| a >= b)
    }

    pub fn add(&mut self, q: StateId, n: u64) {
        self.counts[q.0] += n;
    }

    pub fn sub(&mut self, q: StateId, n: u64) {
        debug_assert!(self.counts[q.0] >= n);
        self.counts[q.0] -= n;
    }

    /// All multisets of the given size, in lexicographic order.
    pub fn all_of_size(n_states: usize, size: u64) -> Vec<Configuration> {
        let mut out = Vec::new();
        let mut cur = vec![0u64; n_states];
        fn rec(i: usize, rem: u64, cur: &mut Vec<u64>, out: &mut Vec<Configuration>) {
            if i + 1 == cur.len() {
                cur[i] = rem;
                out.push(Configuration::new(cur.clone()));
                return;
            }
            for v in 0..=rem {
                cur[i] = v;
                rec(i + 1, rem - v, cur, out);
            }
        }
        if n_states == 0 {
            if size == 0 {
                out.push(Configuration::new(vec![]));
            }
            return out;
        }
        rec(0, size, &mut cur, &mut out);
        out
    }
}

/// The transitions used by one step: the broadcast and a multiset of receive
/// transitions given as (transition, multiplicity) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepWitness {
    pub broadcast: Transition,
    pub receives: Vec<(Transition, u64)>,
}

impl Rbn {
    /// All one-step successors of `c`, deduplicated and sorted.
    ///
    /// A step picks one broadcast transition `(p, !a, q)` enabled in `c` and a
    /// multiset of `?a` receive transitions whose sources are covered by
    /// `c` minus the broadcaster, so the broadcaster never receives its own
    /// message. Receivers move simultaneously.
    pub fn successors(&self, c: &Configuration) -> Vec<Configuration> {
        let mut set: HashSet<Configuration> = HashSet::new();
        self.for_each_step(c, |_, succ| {
            set.insert(succ);
        });
        let mut v: Vec<_> = set.into_iter().collect();
        v.sort();
        v
    }

    /// Like [`Rbn::successors`] but keeps every (witness, successor) pair,
    /// including distinct witnesses for the same successor.
    pub fn successors_with_witnesses(&self, c: &Configuration) -> Vec<(StepWitness, Configuration)> {
        let mut out = Vec::new();
        self.for_each_step(c, |w, succ| out.push((w, succ)));
        out
    }

    fn for_each_step<F: FnMut(StepWitness, Configuration)>(&self, c: &Configuration, mut f: F) {
        for bt in self.broadcasts() {
            if c.get(bt.source) == 0 {
                continue;
            }
            let mut base = c.clone();
            base.sub(bt.source, 1);
            let recvs: Vec<Transition> = self.receives_on(bt.letter).copied().collect();
            let mut picks = vec![0u64; recvs.len()];
            let mut avail = base.clone();
            enumerate_receives(&recvs, 0, &mut avail, &mut picks, &mut |picks| {
                let mut succ = base.clone();
                let mut used = Vec::new();
                for (i, &m) in picks.iter().enumerate() {
                    if m > 0 {
                        succ.sub(recvs[i].source, m);
                        succ.add(recvs[i].target, m);
                        used.push((recvs[i], m));
                    }
                }
                succ.add(bt.target, 1);
                f(
                    StepWitness {
                        broadcast: *bt,
                        receives: used,
                    },
                    succ,
                );
            });
        }
    }

    /// Exact forward closure of `c` by breadth-first search. Every member has
    /// the same size as `c`.
    pub fn reachable_set(
        &self,
        c: &Configuration,
        budget: Budget,
    ) -> Result<HashSet<Configuration>> {
        self.reachable_set_from_all(std::iter::once(c.clone()), budget)
    }

    /// Forward closure of a whole set of start configurations.
    pub fn reachable_set_from_all<I: IntoIterator<Item = Configuration>>(
        &self,
        starts: I,
        budget: Budget,
    ) -> Result<HashSet<Configuration>> {
        let mut seen: HashSet<Configuration> = HashSet::new();
        let mut queue: VecDeque<Configuration> = VecDeque::new();
        for c in starts {
            if seen.insert(c.clone()) {
                queue.push_back(c);
            }
        }
        while let Some(cur) = queue.pop_front() {
            budget.check(seen.len(), "forward reachability")?;
            for succ in self.successors(&cur) {
                if seen.insert(succ.clone()) {
                    queue.push_back(succ);
                }
            }
        }
        Ok(seen)
    }

    /// Forward closure that remembers one predecessor per discovered
    /// configuration, for replaying a run to a target.
    pub fn reachable_with_parents(
        &self,
        starts: &[Configuration],
        budget: Budget,
    ) -> Result<HashMap<Configuration, Option<Configuration>>> {
        let mut seen: HashMap<Configuration, Option<Configuration>> = HashMap::new();
        let mut queue: VecDeque<Configuration> = VecDeque::new();
        for c in starts {
            if !seen.contains_key(c) {
                seen.insert(c.clone(), None);
                queue.push_back(c.clone());
            }
        }
        while let Some(cur) = queue.pop_front() {
            budget.check(seen.len(), "forward reachability with parents")?;
            for succ in self.successors(&cur) {
                if !seen.contains_key(&succ) {
                    seen.insert(succ.clone(), Some(cur.clone()));
                    queue.push_back(succ);
                }
            }
        }
        Ok(seen)
    }

    /// True iff `to` is reachable from `from`. Sizes must match, otherwise
    /// the answer is immediately false.
    pub fn reachable(&self, from: &Configuration, to: &Configuration) -> Result<bool> {
        self.reachable_budget(from, to, Budget::default())
    }

    pub fn reachable_budget(
        &self,
        from: &Configuration,
        to: &Configuration,
        budget: Budget,
    ) -> Result<bool> {
        if from.size() != to.size() {
            return Ok(false);
        }
        // Early-exit BFS rather than building the whole closure.
        let mut seen: HashSet<Configuration> = HashSet::new();
        let mut queue: VecDeque<Configuration> = VecDeque::new();
        seen.insert(from.clone());
        queue.push_back(from.clone());
        while let Some(cur) = queue.pop_front() {
            if &cur == to {
                return Ok(true);
            }
            budget.check(seen.len(), "reachability query")?;
            for succ in self.successors(&cur) {
                if seen.insert(succ.clone()) {
                    queue.push_back(succ);
                }
            }
        }
        Ok(false)
    }

    /// True iff some configuration reachable from `from` covers `target`
    /// componentwise.
    pub fn coverable(&self, from: &Configuration, target: &Configuration) -> Result<bool> {
        self.coverable_budget(from, target, Budget::default())
    }

    pub fn coverable_budget(
        &self,
        from: &Configuration,
        target: &Configuration,
        budget: Budget,
    ) -> Result<bool> {
        let mut seen: HashSet<Configuration> = HashSet::new();
        let mut queue: VecDeque<Configuration> = VecDeque::new();
        seen.insert(from.clone());
        queue.push_back(from.clone());
        while let Some(cur) = queue.pop_front() {
            if cur.covers(target) {
                return Ok(true);
            }
            budget.check(seen.len(), "coverability query")?;
            for succ in self.successors(&cur) {
                if seen.insert(succ.clone()) {
                    queue.push_back(succ);
                }
            }
        }
        Ok(false)
    }
}

/// Ground-truth membership test for the forward closure of a constraint:
/// true iff some start in `gamma` of the same size as `c` can reach `c`.
/// Runs a backward BFS from `c` through the reversed RBN and checks each
/// visited configuration against `gamma`.
pub fn member_poststar_oracle(
    rbn: &Rbn,
    gamma: &CountingConstraint,
    c: &Configuration,
    budget: Budget,
) -> Result<bool> {
    let rev = rbn.reverse();
    let mut seen: HashSet<Configuration> = HashSet::new();
    let mut queue: VecDeque<Configuration> = VecDeque::new();
    seen.insert(c.clone());
    queue.push_back(c.clone());
    while let Some(cur) = queue.pop_front() {
        if gamma.contains(&cur)? {
            return Ok(true);
        }
        budget.check(seen.len(), "backward membership oracle")?;
        for pred in rev.successors(&cur) {
            if seen.insert(pred.clone()) {
                queue.push_back(pred);
            }
        }
    }
    Ok(false)
}

pub(crate) fn enumerate_receives<F: FnMut(&[u64])>(
    recvs: &[Transition],
    i: usize,
    avail: &mut Configuration,
    picks: &mut Vec<u64>,
    f: &mut F,
) {
    if i == recvs.len() {
        f(picks);
        return;
    }
    let cap = avail.get(recvs[i].source);
    for m in 0..=cap {
        picks[i] = m;
        avail.sub(recvs[i].source, m);
        enumerate_receives(recvs, i + 1, avail, picks, f);
        avail.add(recvs[i].source, m);
    }
    picks[i] = 0;
}
