//! The symbolic graph of index k.
//!
//! A node (v, S) tracks at most k agents exactly in the multiset v and the
//! support of the remaining agents in the set S: a configuration C belongs to
//! the node when C equals v outside S and strictly exceeds v on S (at least
//! one untracked agent sits on every support state). Edges come in two
//! flavours depending on whether the broadcasting agent is tracked in v or
//! abstracted in S. Reachability in this finite graph characterizes concrete
//! reachability for arbitrarily many agents.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::counting::{Bound, Cube};
use crate::error::{Budget, Error, Result};
use crate::model::{enumerate_receives, Configuration, Letter, Rbn, StateId, StepWitness};

/// A subset of the state set, stored as a bitmask. Models with more than 64
/// states are rejected at the graph entry points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SupportSet(pub u64);

impl SupportSet {
    pub fn empty() -> SupportSet {
        SupportSet(0)
    }

    pub fn singleton(q: StateId) -> SupportSet {
        SupportSet(1 << q.0)
    }

    pub fn from_states<I: IntoIterator<Item = StateId>>(states: I) -> SupportSet {
        let mut s = SupportSet(0);
        for q in states {
            s.insert(q);
        }
        s
    }

    pub fn contains(&self, q: StateId) -> bool {
        self.0 >> q.0 & 1 == 1
    }

    pub fn insert(&mut self, q: StateId) {
        self.0 |= 1 << q.0;
    }

    pub fn remove(&mut self, q: StateId) {
        self.0 &= !(1 << q.0);
    }

    pub fn union(&self, other: SupportSet) -> SupportSet {
        SupportSet(self.0 | other.0)
    }

    pub fn difference(&self, other: SupportSet) -> SupportSet {
        SupportSet(self.0 & !other.0)
    }

    pub fn intersection(&self, other: SupportSet) -> SupportSet {
        SupportSet(self.0 & other.0)
    }

    pub fn is_subset(&self, other: SupportSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(&self, n_states: usize) -> impl Iterator<Item = StateId> + '_ {
        let mask = self.0;
        (0..n_states).filter(move |&i| mask >> i & 1 == 1).map(StateId)
    }

    /// All subsets of this set.
    pub fn subsets(&self) -> Vec<SupportSet> {
        let mask = self.0;
        let mut out = Vec::new();
        let mut sub = mask;
        loop {
            out.push(SupportSet(sub));
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & mask;
        }
        out
    }
}

/// A node (v, S) of the symbolic graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolicConfiguration {
    pub concrete: Configuration,
    pub support: SupportSet,
}

impl SymbolicConfiguration {
    pub fn new(concrete: Configuration, support: SupportSet) -> SymbolicConfiguration {
        SymbolicConfiguration { concrete, support }
    }

    /// Membership in the fattened denotation: C(q) = v(q) off the support and
    /// C(q) >= v(q) + n on it. The node's denotation is n = 1; n = 0 also
    /// admits configurations sitting exactly at v on support coordinates.
    pub fn support_member(&self, n: &BigUint, c: &Configuration) -> bool {
        for i in 0..c.arity() {
            let q = StateId(i);
            let cq = BigUint::from(c.get(q));
            let vq = BigUint::from(self.concrete.get(q));
            if self.support.contains(q) {
                if cq < vq + n {
                    return false;
                }
            } else if cq != vq {
                return false;
            }
        }
        true
    }

    /// The cube with L = v and U(q) = v(q) off the support, infinity on it:
    /// the upward closure of v in the order that fixes coordinates outside
    /// the support. It contains the node's denotation.
    pub fn cube(&self) -> Cube {
        let lower: Vec<BigUint> = self
            .concrete
            .counts()
            .iter()
            .map(|&n| BigUint::from(n))
            .collect();
        let upper: Vec<Bound> = self
            .concrete
            .counts()
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                if self.support.contains(StateId(i)) {
                    Bound::Infinite
                } else {
                    Bound::finite_u64(n)
                }
            })
            .collect();
        Cube::new(lower, upper)
    }
}

/// A path in the symbolic graph: n+1 nodes and n edge letters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicPath {
    pub nodes: Vec<SymbolicConfiguration>,
    pub letters: Vec<Letter>,
}

impl SymbolicPath {
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Indices (i, j) with i < j where a state that leaves the support after
    /// node i reappears in the support of node j.
    pub fn bad_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            let lost = self.nodes[i]
                .support
                .difference(self.nodes[i + 1].support);
            if lost.is_empty() {
                continue;
            }
            for j in i + 1..=self.len() {
                if !lost.intersection(self.nodes[j].support).is_empty() {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

fn check_width(rbn: &Rbn) -> Result<()> {
    if rbn.n_states() > 64 {
        return Err(Error::TooLarge(format!(
            "symbolic analysis supports at most 64 states, model has {}",
            rbn.n_states()
        )));
    }
    Ok(())
}

fn full_set(n_states: usize) -> SupportSet {
    if n_states == 64 {
        SupportSet(u64::MAX)
    } else {
        SupportSet((1u64 << n_states) - 1)
    }
}

/// States that may enter the support on a broadcast of `letter`: targets of a
/// receive on `letter` whose source lies in `s`.
fn enterable(rbn: &Rbn, letter: Letter, s: SupportSet) -> SupportSet {
    let mut e = SupportSet::empty();
    for t in rbn.receives_on(letter) {
        if s.contains(t.source) {
            e.insert(t.target);
        }
    }
    e
}

/// The per-state justification of a support change on a broadcast of
/// `letter`: every state entering `s2` has a receive predecessor in `s1` and
/// every state leaving `s1` has a receive successor in `s2`; states in
/// `exempt` are not constrained.
fn support_change_justified(
    rbn: &Rbn,
    letter: Letter,
    s1: SupportSet,
    s2: SupportSet,
    exempt: SupportSet,
) -> bool {
    let n = rbn.n_states();
    for q in s2.difference(s1).difference(exempt).iter(n) {
        let ok = rbn
            .receives_on(letter)
            .any(|t| t.target == q && s1.contains(t.source));
        if !ok {
            return false;
        }
    }
    for q in s1.difference(s2).difference(exempt).iter(n) {
        let ok = rbn
            .receives_on(letter)
            .any(|t| t.source == q && s2.contains(t.target));
        if !ok {
            return false;
        }
    }
    true
}

/// Labelled successor set of a node, with the candidate supports pruned to
/// the only sets that can satisfy the justification conditions.
pub fn symb_successors(
    rbn: &Rbn,
    k: u64,
    theta: &SymbolicConfiguration,
) -> Result<Vec<(Letter, SymbolicConfiguration)>> {
    symb_successors_impl(rbn, k, theta, false)
}

/// Reference implementation that blindly tries every subset of Q as the
/// successor support. Equal to [`symb_successors`] by construction; kept for
/// differential testing.
pub fn symb_successors_naive(
    rbn: &Rbn,
    k: u64,
    theta: &SymbolicConfiguration,
) -> Result<Vec<(Letter, SymbolicConfiguration)>> {
    symb_successors_impl(rbn, k, theta, true)
}

fn symb_successors_impl(
    rbn: &Rbn,
    k: u64,
    theta: &SymbolicConfiguration,
    naive: bool,
) -> Result<Vec<(Letter, SymbolicConfiguration)>> {
    check_width(rbn)?;
    if theta.concrete.size() > k {
        return Err(Error::Precondition(format!(
            "concrete part has size {} which exceeds the index {}",
            theta.concrete.size(),
            k
        )));
    }
    let n = rbn.n_states();
    let v = &theta.concrete;
    let s = theta.support;
    let mut out: BTreeSet<(Letter, SymbolicConfiguration)> = BTreeSet::new();

    for bt in rbn.broadcasts() {
        let letter = bt.letter;
        let recvs: Vec<_> = rbn.receives_on(letter).copied().collect();
        let enter = enterable(rbn, letter, s);

        // Broadcast from v: the broadcaster is a tracked agent.
        if v.get(bt.source) > 0 {
            let mut base = v.clone();
            base.sub(bt.source, 1);
            let mut avail = base.clone();
            let mut picks = vec![0u64; recvs.len()];
            let mut vprimes: BTreeSet<Configuration> = BTreeSet::new();
            enumerate_receives(&recvs, 0, &mut avail, &mut picks, &mut |picks| {
                let mut vp = base.clone();
                for (i, &m) in picks.iter().enumerate() {
                    if m > 0 {
                        vp.sub(recvs[i].source, m);
                        vp.add(recvs[i].target, m);
                    }
                }
                vp.add(bt.target, 1);
                vprimes.insert(vp);
            });
            let candidates: Vec<SupportSet> = if naive {
                full_set(n).subsets()
            } else {
                s.union(enter).subsets()
            };
            for vp in vprimes {
                for &sp in &candidates {
                    if support_change_justified(rbn, letter, s, sp, SupportSet::empty()) {
                        out.insert((letter, SymbolicConfiguration::new(vp.clone(), sp)));
                    }
                }
            }
        }

        // Broadcast from S: the broadcaster is an abstract agent in state
        // bt.source, which must lie in S; its target must lie in S'.
        if s.contains(bt.source) {
            let mut avail = v.clone();
            let mut picks = vec![0u64; recvs.len()];
            let mut vprimes: BTreeSet<Configuration> = BTreeSet::new();
            enumerate_receives(&recvs, 0, &mut avail, &mut picks, &mut |picks| {
                let mut vp = v.clone();
                for (i, &m) in picks.iter().enumerate() {
                    if m > 0 {
                        vp.sub(recvs[i].source, m);
                        vp.add(recvs[i].target, m);
                    }
                }
                vprimes.insert(vp);
            });
            let exempt =
                SupportSet::singleton(bt.source).union(SupportSet::singleton(bt.target));
            let candidates: Vec<SupportSet> = if naive {
                full_set(n).subsets()
            } else {
                s.union(enter)
                    .union(SupportSet::singleton(bt.target))
                    .subsets()
            };
            for vp in vprimes {
                for &sp in &candidates {
                    if !sp.contains(bt.target) {
                        continue;
                    }
                    if support_change_justified(rbn, letter, s, sp, exempt) {
                        out.insert((letter, SymbolicConfiguration::new(vp.clone(), sp)));
                    }
                }
            }
        }
    }
    Ok(out.into_iter().collect())
}

/// Forward closure of a set of nodes under [`symb_successors`].
pub fn symb_reachable<I: IntoIterator<Item = SymbolicConfiguration>>(
    rbn: &Rbn,
    k: u64,
    starts: I,
    budget: Budget,
) -> Result<HashSet<SymbolicConfiguration>> {
    let mut seen: HashSet<SymbolicConfiguration> = HashSet::new();
    let mut queue: VecDeque<SymbolicConfiguration> = VecDeque::new();
    for theta in starts {
        if seen.insert(theta.clone()) {
            queue.push_back(theta);
        }
    }
    while let Some(cur) = queue.pop_front() {
        budget.check(seen.len(), "symbolic reachability")?;
        for (_, succ) in symb_successors(rbn, k, &cur)? {
            if seen.insert(succ.clone()) {
                queue.push_back(succ);
            }
        }
    }
    Ok(seen)
}

/// Lifts one concrete step to a symbolic edge.
///
/// Given a node whose denotation contains `c` and a witnessed step
/// `c -> c'`, returns the letter and successor node such that the edge exists
/// and the successor's denotation contains `c'`. The agents of `c` split into
/// the tracked part v and the untracked surplus on the support; each receiver
/// of the witness is drawn from the surplus when possible and from v
/// otherwise, and the successor support is exactly where surplus agents end
/// up.
pub fn lift_step(
    rbn: &Rbn,
    theta: &SymbolicConfiguration,
    c: &Configuration,
    c_after: &Configuration,
    witness: &StepWitness,
) -> Result<(Letter, SymbolicConfiguration)> {
    check_width(rbn)?;
    if !theta.support_member(&BigUint::from(1u32), c) {
        return Err(Error::Precondition(
            "configuration not in the node's denotation".into(),
        ));
    }
    // Replay the witness to confirm it produces c_after.
    {
        let mut replay = c.clone();
        if replay.get(witness.broadcast.source) == 0 {
            return Err(Error::Precondition("broadcaster not present".into()));
        }
        replay.sub(witness.broadcast.source, 1);
        for &(t, m) in &witness.receives {
            if replay.get(t.source) < m {
                return Err(Error::Precondition("receivers not present".into()));
            }
            replay.sub(t.source, m);
        }
        for &(t, m) in &witness.receives {
            replay.add(t.target, m);
        }
        replay.add(witness.broadcast.target, 1);
        if &replay != c_after {
            return Err(Error::Precondition(
                "witness does not produce the claimed successor".into(),
            ));
        }
    }

    let n = rbn.n_states();
    let bt = witness.broadcast;
    let mut vp = theta.concrete.clone();
    // Untracked surplus per state; at least 1 on every support state.
    let mut surplus: Vec<u64> = (0..n)
        .map(|q| c.get(StateId(q)) - theta.concrete.get(StateId(q)))
        .collect();
    let abstract_broadcaster = surplus[bt.source.0] > 0;
    if abstract_broadcaster {
        surplus[bt.source.0] -= 1;
    } else {
        vp.sub(bt.source, 1);
    }
    // Draw each receiver from the surplus first, then from v; subtract all
    // sources before adding any target, mirroring the concrete step.
    let mut surplus_in = vec![0u64; n];
    let mut tracked_moves: Vec<(StateId, u64)> = Vec::new();
    for &(t, m) in &witness.receives {
        let from_surplus = m.min(surplus[t.source.0]);
        surplus[t.source.0] -= from_surplus;
        surplus_in[t.target.0] += from_surplus;
        let tracked = m - from_surplus;
        if tracked > 0 {
            if vp.get(t.source) < tracked {
                return Err(Error::Precondition(
                    "witness uses more receivers than agents available".into(),
                ));
            }
            vp.sub(t.source, tracked);
            tracked_moves.push((t.target, tracked));
        }
    }
    for (target, m) in tracked_moves {
        vp.add(target, m);
    }
    for q in 0..n {
        surplus[q] += surplus_in[q];
    }
    if abstract_broadcaster {
        surplus[bt.target.0] += 1;
    } else {
        vp.add(bt.target, 1);
    }
    let sp = SupportSet::from_states(
        (0..n).filter(|&q| surplus[q] > 0).map(StateId),
    );
    Ok((bt.letter, SymbolicConfiguration::new(vp, sp)))
}

/// Rewrites a valid path into one with the same endpoints and length and no
/// bad pairs. Each repair picks a bad pair (w, j), takes the states that left
/// the support at w but are back at j, and keeps them in the support all
/// along the segment; monotonicity of the edge rules keeps every edge valid.
pub fn normalize_path(rbn: &Rbn, k: u64, path: &SymbolicPath) -> Result<SymbolicPath> {
    validate_path(rbn, k, path)?;
    let mut nodes = path.nodes.clone();
    loop {
        let current = SymbolicPath {
            nodes: nodes.clone(),
            letters: path.letters.clone(),
        };
        let bad = current.bad_pairs();
        let (w, j) = match bad.first() {
            None => break,
            Some(&p) => p,
        };
        let z = nodes[w]
            .support
            .difference(nodes[w + 1].support)
            .intersection(nodes[j].support);
        debug_assert!(!z.is_empty());
        for node in nodes.iter_mut().take(j).skip(w + 1) {
            node.support = node.support.union(z);
        }
    }
    let out = SymbolicPath {
        nodes,
        letters: path.letters.clone(),
    };
    validate_path(rbn, k, &out)?;
    Ok(out)
}

/// Checks that every consecutive node pair is connected by an edge with the
/// recorded letter.
pub fn validate_path(rbn: &Rbn, k: u64, path: &SymbolicPath) -> Result<()> {
    if path.nodes.len() != path.letters.len() + 1 || path.nodes.is_empty() {
        return Err(Error::Precondition(
            "path must have one more node than letters".into(),
        ));
    }
    let mut cache: HashMap<SymbolicConfiguration, Vec<(Letter, SymbolicConfiguration)>> =
        HashMap::new();
    for i in 0..path.letters.len() {
        let succs = match cache.get(&path.nodes[i]) {
            Some(s) => s,
            None => {
                let s = symb_successors(rbn, k, &path.nodes[i])?;
                cache.entry(path.nodes[i].clone()).or_insert(s)
            }
        };
        let ok = succs
            .iter()
            .any(|(l, t)| *l == path.letters[i] && t == &path.nodes[i + 1]);
        if !ok {
            return Err(Error::Precondition(format!(
                "nodes {} and {} are not connected by the recorded letter",
                i,
                i + 1
            )));
        }
    }
    Ok(())
}

/// The refinement threshold for index k over q_count states:
/// `k * (2k)^|Q| * (|Q|+1)^(|Q|+1) + 1`. Above a reachable node's concrete
/// part by this much, membership in the node's denotation implies concrete
/// reachability.
pub fn refinement_bound(k: u64, q_count: usize) -> BigUint {
    let kb = BigUint::from(k);
    let two_k = BigUint::from(2 * k);
    let q1 = BigUint::from(q_count as u64 + 1);
    kb * two_k.pow(q_count as u32) * q1.pow(q_count as u32 + 1) + BigUint::from(1u32)
}

/// Decomposes a cube into symbolic nodes whose denotations partition it.
/// Coordinates with a finite upper bound range over L..=U; every coordinate
/// with an infinite upper bound has concrete part L and either carries the
/// support (configurations strictly above L there) or not (exactly L there).
/// Every node fits the index 2 * norm(cube).
pub fn symb_of_cube(cube: &Cube, budget: Budget) -> Result<Vec<SymbolicConfiguration>> {
    if cube.is_empty() {
        return Ok(Vec::new());
    }
    let arity = cube.arity();
    let mut unbounded = SupportSet::empty();
    let mut ranges: Vec<(u64, u64)> = Vec::with_capacity(arity);
    let mut count: u128 = 1;
    for q in 0..arity {
        let lo = cube.lower()[q]
            .to_u64()
            .ok_or_else(|| Error::TooLarge("cube lower bound exceeds u64".into()))?;
        match &cube.upper()[q] {
            Bound::Infinite => {
                unbounded.insert(StateId(q));
                ranges.push((lo, lo));
                count = count.saturating_mul(2);
            }
            Bound::Finite(u) => {
                let hi = u
                    .to_u64()
                    .ok_or_else(|| Error::TooLarge("cube upper bound exceeds u64".into()))?;
                ranges.push((lo, hi));
                count = count.saturating_mul((hi - lo + 1) as u128);
            }
        }
    }
    if count > budget.max_nodes as u128 {
        return Err(Error::BudgetExceeded {
            visited: usize::MAX,
            limit: budget.max_nodes,
            context: "cube decomposition into symbolic nodes".into(),
        });
    }
    let mut out = Vec::new();
    if arity == 0 {
        out.push(SymbolicConfiguration::new(
            Configuration::new(vec![]),
            SupportSet::empty(),
        ));
        return Ok(out);
    }
    let mut cur = vec![0u64; arity];
    fn rec(
        q: usize,
        ranges: &[(u64, u64)],
        cur: &mut Vec<u64>,
        unbounded: SupportSet,
        out: &mut Vec<SymbolicConfiguration>,
    ) {
        if q == ranges.len() {
            for support in unbounded.subsets() {
                out.push(SymbolicConfiguration::new(
                    Configuration::new(cur.clone()),
                    support,
                ));
            }
            return;
        }
        for v in ranges[q].0..=ranges[q].1 {
            cur[q] = v;
            rec(q + 1, ranges, cur, unbounded, out);
        }
    }
    rec(0, &ranges, &mut cur, unbounded, &mut out);
    Ok(out)
}

/// A fully materialized symbolic graph, for inspection and DOT export.
#[derive(Debug, Clone)]
pub struct MaterializedGraph {
    pub nodes: Vec<SymbolicConfiguration>,
    pub edges: Vec<(usize, Letter, usize)>,
}

/// Materializes every node (v, S) with |v| <= k together with all edges.
pub fn materialize_graph(rbn: &Rbn, k: u64, budget: Budget) -> Result<MaterializedGraph> {
    check_width(rbn)?;
    let n = rbn.n_states();
    let mut nodes: Vec<SymbolicConfiguration> = Vec::new();
    for size in 0..=k {
        for v in Configuration::all_of_size(n, size) {
            for s in full_set(n).subsets() {
                nodes.push(SymbolicConfiguration::new(v.clone(), s));
            }
        }
    }
    budget.check(nodes.len(), "symbolic graph materialization")?;
    nodes.sort();
    let index: HashMap<&SymbolicConfiguration, usize> =
        nodes.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let mut edges = Vec::new();
    for (i, theta) in nodes.iter().enumerate() {
        for (letter, succ) in symb_successors(rbn, k, theta)? {
            if let Some(&j) = index.get(&succ) {
                edges.push((i, letter, j));
            }
        }
    }
    drop(index);
    Ok(MaterializedGraph { nodes, edges })
}

impl MaterializedGraph {
    /// Graphviz rendering: node label "v | S", edge label the letter.
    pub fn to_dot(&self, rbn: &Rbn) -> String {
        let mut out = String::from("digraph symbolic {\n  rankdir=LR;\n");
        for (i, node) in self.nodes.iter().enumerate() {
            let v_label: Vec<String> = node
                .concrete
                .counts()
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(q, &c)| format!("{}*{}", c, rbn.state_names()[q]))
                .collect();
            let s_label: Vec<String> = node
                .support
                .iter(rbn.n_states())
                .map(|q| rbn.state_names()[q.0].clone())
                .collect();
            out.push_str(&format!(
                "  n{} [label=\"{} | {{{}}}\"];\n",
                i,
                if v_label.is_empty() {
                    "0".to_string()
                } else {
                    v_label.join(",")
                },
                s_label.join(",")
            ));
        }
        for (src, letter, dst) in &self.edges {
            out.push_str(&format!(
                "  n{} -> n{} [label=\"{}\"];\n",
                src, dst, rbn.letter_names()[letter.0]
            ));
        }
        out.push_str("}\n");
        out
    }
}
