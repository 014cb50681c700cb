//! Consensus protocols on top of RBN semantics.
//!
//! A protocol designates input states and assigns every state an output bit.
//! An input vector v places v(i) agents on the i-th input state; the protocol
//! computes a predicate if every fair run from such an initial configuration
//! stabilizes to the consensus matching the predicate's value. The exact
//! verification condition is symbolic: everything forward-reachable from the
//! b-side initial configurations must be able to reach a stable b-consensus.
//! Two independent oracles back it up at small sizes: bottom-SCC analysis of
//! the finite reachability graph, and a seeded random simulator.

use std::collections::HashMap;

use num_bigint::BigUint;
use petgraph::graph::DiGraph;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::closure::{poststar, prestar};
use crate::counting::{Bound, CountingConstraint, Cube};
use crate::error::{Budget, Error, Result};
use crate::expr::is_empty_of_evaluated;
use crate::model::{Configuration, Rbn, StateId, TransitionKind};

/// An RBN with designated input states and a 0/1 output per state.
#[derive(Debug, Clone)]
pub struct Protocol {
    pub rbn: Rbn,
    pub inputs: Vec<StateId>,
    pub output: Vec<u8>,
}

impl Protocol {
    pub fn new(rbn: Rbn, inputs: Vec<StateId>, output: Vec<u8>) -> Result<Protocol> {
        if output.len() != rbn.n_states() || output.iter().any(|&b| b > 1) {
            return Err(Error::Precondition(
                "output must assign 0 or 1 to every state".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for q in &inputs {
            if q.0 >= rbn.n_states() || !seen.insert(q.0) {
                return Err(Error::Precondition(
                    "input states must be distinct declared states".into(),
                ));
            }
        }
        Ok(Protocol {
            rbn,
            inputs,
            output,
        })
    }

    /// The initial configuration for an input vector: v(i) agents on the
    /// i-th input state.
    pub fn initial_configuration(&self, v: &[u64]) -> Result<Configuration> {
        if v.len() != self.inputs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.inputs.len(),
                got: v.len(),
            });
        }
        let mut c = Configuration::zero(self.rbn.n_states());
        for (i, &n) in v.iter().enumerate() {
            c.add(self.inputs[i], n);
        }
        Ok(c)
    }

    /// True iff every agent sits in a state with output `b`. The empty
    /// configuration is vacuously a consensus for both bits.
    pub fn is_consensus(&self, c: &Configuration, b: u8) -> bool {
        c.counts()
            .iter()
            .enumerate()
            .all(|(q, &n)| n == 0 || self.output[q] == b)
    }
}

/// The predicate to verify, given per bit as the set of input vectors mapped
/// to that bit. The two constraints range over the input coordinates and
/// must partition all input vectors.
#[derive(Debug, Clone)]
pub struct PredicateSpec {
    pub phi: [CountingConstraint; 2],
}

impl PredicateSpec {
    pub fn value(&self, v: &[u64]) -> Result<Option<u8>> {
        let c = Configuration::new(v.to_vec());
        let in0 = self.phi[0].contains(&c)?;
        let in1 = self.phi[1].contains(&c)?;
        match (in0, in1) {
            (true, false) => Ok(Some(0)),
            (false, true) => Ok(Some(1)),
            _ => Ok(None), // not a partition at this vector
        }
    }
}

/// The cube of b-consensus configurations: zero agents allowed in every
/// state with the opposite output, anything elsewhere.
pub fn consensus_cube(p: &Protocol, b: u8) -> Cube {
    let n = p.rbn.n_states();
    let lower = vec![BigUint::from(0u32); n];
    let upper: Vec<Bound> = (0..n)
        .map(|q| {
            if p.output[q] == 1 - b {
                Bound::finite_u64(0)
            } else {
                Bound::Infinite
            }
        })
        .collect();
    Cube::new(lower, upper)
}

/// The stable b-consensus configurations: those from which no reachable
/// configuration leaves the b-consensus set. Computed as the complement of
/// the backward closure of the non-consensus configurations.
pub fn stable_consensus(p: &Protocol, b: u8, budget: Budget) -> Result<CountingConstraint> {
    let cons = CountingConstraint::from_cube(consensus_cube(p, b));
    let not_cons = cons.complement()?;
    let pre = prestar(&p.rbn, &not_cons, budget)?;
    Ok(pre.complement()?.simplify())
}

/// The initial configurations whose input vector has predicate value b:
/// the b-side input constraint on the input coordinates, exactly zero agents
/// everywhere else.
pub fn initial_constraint(p: &Protocol, spec: &PredicateSpec, b: u8) -> Result<CountingConstraint> {
    let n = p.rbn.n_states();
    let phi = &spec.phi[b as usize];
    if phi.arity() != p.inputs.len() {
        return Err(Error::DimensionMismatch {
            expected: p.inputs.len(),
            got: phi.arity(),
        });
    }
    let mut cubes = Vec::new();
    for c in phi.cubes() {
        let mut lower = vec![BigUint::from(0u32); n];
        let mut upper = vec![Bound::finite_u64(0); n];
        for (i, q) in p.inputs.iter().enumerate() {
            lower[q.0] = c.lower()[i].clone();
            upper[q.0] = c.upper()[i].clone();
        }
        cubes.push(Cube::new(lower, upper));
    }
    Ok(CountingConstraint::new(n, cubes))
}

/// Verification verdict; a counterexample is a configuration reachable from
/// a b-side initial configuration that can no longer reach a stable
/// b-consensus.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub computes: bool,
    pub counterexample: Option<(u8, Configuration)>,
}

/// Decides whether the protocol computes the predicate: for both bits, every
/// configuration reachable from the b-side initial configurations must be
/// able to reach a stable b-consensus.
pub fn verify_computes(p: &Protocol, spec: &PredicateSpec, budget: Budget) -> Result<Verdict> {
    for b in [0u8, 1u8] {
        let init_b = initial_constraint(p, spec, b)?;
        let st_b = stable_consensus(p, b, budget)?;
        let reach = poststar(&p.rbn, &init_b, budget)?;
        let can_stabilize = prestar(&p.rbn, &st_b, budget)?;
        let bad = reach.intersect(&can_stabilize.complement()?)?;
        if let Some(witness) = is_empty_of_evaluated(&bad)? {
            return Ok(Verdict {
                computes: false,
                counterexample: Some((b, witness)),
            });
        }
    }
    Ok(Verdict {
        computes: true,
        counterexample: None,
    })
}

/// Convergence of fair runs from one initial configuration, decided exactly
/// on the finite fixed-size reachability graph: a fair run settles into a
/// bottom strongly connected component and visits all of it, so the runs
/// converge to b iff every bottom component consists of b-consensus
/// configurations only. Both flags may hold (empty input), neither means
/// non-convergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FairVerdict {
    pub converges_zero: bool,
    pub converges_one: bool,
}

impl FairVerdict {
    pub fn converges(&self, b: u8) -> bool {
        if b == 0 {
            self.converges_zero
        } else {
            self.converges_one
        }
    }

    pub fn non_converging(&self) -> bool {
        !self.converges_zero && !self.converges_one
    }
}

pub fn bottom_scc_oracle(p: &Protocol, v: &[u64], budget: Budget) -> Result<FairVerdict> {
    let start = p.initial_configuration(v)?;
    let closure = p.rbn.reachable_set(&start, budget)?;
    let mut graph: DiGraph<Configuration, ()> = DiGraph::new();
    let mut index = HashMap::new();
    let mut members: Vec<Configuration> = closure.into_iter().collect();
    members.sort();
    for c in &members {
        let idx = graph.add_node(c.clone());
        index.insert(c.clone(), idx);
    }
    for c in &members {
        let from = index[c];
        for succ in p.rbn.successors(c) {
            graph.add_edge(from, index[&succ], ());
        }
    }
    let sccs = petgraph::algo::tarjan_scc(&graph);
    let mut scc_of = vec![usize::MAX; graph.node_count()];
    for (i, scc) in sccs.iter().enumerate() {
        for &node in scc {
            scc_of[node.index()] = i;
        }
    }
    let mut verdict = FairVerdict {
        converges_zero: true,
        converges_one: true,
    };
    for (i, scc) in sccs.iter().enumerate() {
        let is_bottom = scc.iter().all(|&node| {
            graph
                .neighbors(node)
                .all(|succ| scc_of[succ.index()] == i)
        });
        if !is_bottom {
            continue;
        }
        for &node in scc {
            let c = &graph[node];
            if !p.is_consensus(c, 0) {
                verdict.converges_zero = false;
            }
            if !p.is_consensus(c, 1) {
                verdict.converges_one = false;
            }
        }
    }
    Ok(verdict)
}

/// Consensus status of a single configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsensusStatus {
    Neither,
    Zero,
    One,
    Both,
}

pub fn consensus_status(p: &Protocol, c: &Configuration) -> ConsensusStatus {
    match (p.is_consensus(c, 0), p.is_consensus(c, 1)) {
        (true, true) => ConsensusStatus::Both,
        (true, false) => ConsensusStatus::Zero,
        (false, true) => ConsensusStatus::One,
        (false, false) => ConsensusStatus::Neither,
    }
}

/// One pseudo-random run: each step draws a broadcasting (agent, transition)
/// pair uniformly, then every other agent with a matching receive transition
/// participates with probability one half, choosing uniformly among its
/// matching receive transitions. Deterministic for a fixed seed. This is a
/// sampling aid; exact verdicts come from the symbolic condition or the
/// bottom-SCC oracle.
pub fn simulate_fair(
    p: &Protocol,
    v: &[u64],
    seed: u64,
    max_steps: u64,
) -> Result<(Vec<Configuration>, ConsensusStatus)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = p.initial_configuration(v)?;
    let mut trace = vec![current.clone()];
    for _ in 0..max_steps {
        // Enabled broadcasts, weighted by the number of agents able to fire them.
        let mut choices: Vec<(usize, u64)> = Vec::new();
        let mut total: u64 = 0;
        for (ti, t) in p.rbn.transitions().iter().enumerate() {
            if t.kind == TransitionKind::Broadcast {
                let w = current.get(t.source);
                if w > 0 {
                    choices.push((ti, w));
                    total += w;
                }
            }
        }
        if total == 0 {
            break;
        }
        let mut pick = rng.gen_range(0..total);
        let mut chosen = choices[0].0;
        for &(ti, w) in &choices {
            if pick < w {
                chosen = ti;
                break;
            }
            pick -= w;
        }
        let bt = p.rbn.transitions()[chosen];
        let mut next = current.clone();
        next.sub(bt.source, 1);
        let pool = next.clone();
        for q in 0..p.rbn.n_states() {
            let q = StateId(q);
            let matching: Vec<_> = p
                .rbn
                .receives_on(bt.letter)
                .filter(|t| t.source == q)
                .copied()
                .collect();
            if matching.is_empty() {
                continue;
            }
            for _agent in 0..pool.get(q) {
                if rng.gen_bool(0.5) {
                    let t = matching[rng.gen_range(0..matching.len())];
                    next.sub(t.source, 1);
                    next.add(t.target, 1);
                }
            }
        }
        next.add(bt.target, 1);
        current = next;
        trace.push(current.clone());
    }
    let status = consensus_status(p, &current);
    Ok((trace, status))
}
