//! Shared fixtures: the running example models, an independent brute-force
//! step enumerator, and seeded random model/constraint generators.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rbn_core::counting::{Bound, CountingConstraint, Cube};
use rbn_core::model::{Configuration, Letter, Rbn, StateId, Transition, TransitionKind};
use rbn_core::protocol::Protocol;

pub fn t(source: usize, kind: TransitionKind, letter: usize, target: usize) -> Transition {
    Transition {
        source: StateId(source),
        kind,
        letter: Letter(letter),
        target: StateId(target),
    }
}

pub const B: TransitionKind = TransitionKind::Broadcast;
pub const R: TransitionKind = TransitionKind::Receive;

/// Three states q1 q2 q3, letters a b, with q1 !a q1, q1 ?a q2, q2 !b q1,
/// q2 ?b q3. One agent alone loops in q1; three agents can funnel one into q3.
pub fn ex1() -> Rbn {
    let mut r = Rbn::new(vec!["q1", "q2", "q3"], vec!["a", "b"]);
    r.add_transition(t(0, B, 0, 0)).unwrap();
    r.add_transition(t(0, R, 0, 1)).unwrap();
    r.add_transition(t(1, B, 1, 0)).unwrap();
    r.add_transition(t(1, R, 1, 2)).unwrap();
    r
}

/// The consensus protocol built on ex1 plus q1 ?b q3 and q3 !b q3, with
/// input q1 and outputs 0,0,1. The added receive lets q2's b broadcast pull a
/// q1 agent straight into q3, so two agents already suffice to populate q3
/// and the protocol computes "at least two agents were started".
pub fn ex2() -> Protocol {
    let mut r = ex1();
    r.add_transition(t(0, R, 1, 2)).unwrap();
    r.add_transition(t(2, B, 1, 2)).unwrap();
    Protocol::new(r, vec![StateId(0)], vec![0, 0, 1]).unwrap()
}

/// ex2 with the q1 ?b q3 transition removed. Populating q3 again takes three
/// agents, but a lone leftover q1 agent can never join the others in q3, so
/// this variant computes no threshold predicate at all.
pub fn ex2_mutated() -> Protocol {
    let mut r = ex1();
    r.add_transition(t(2, B, 1, 2)).unwrap();
    Protocol::new(r, vec![StateId(0)], vec![0, 0, 1]).unwrap()
}

pub fn cfg(counts: &[u64]) -> Configuration {
    Configuration::new(counts.to_vec())
}

/// Step enumerator written independently of the library one: explodes the
/// configuration into an agent list, picks the broadcasting agent, and lets
/// each remaining agent independently stay put or take one matching receive
/// transition.
pub fn naive_successors(rbn: &Rbn, c: &Configuration) -> BTreeSet<Configuration> {
    let mut agents: Vec<usize> = Vec::new();
    for (q, &n) in c.counts().iter().enumerate() {
        for _ in 0..n {
            agents.push(q);
        }
    }
    let mut out = BTreeSet::new();
    for ai in 0..agents.len() {
        for bt in rbn.transitions() {
            if bt.kind != TransitionKind::Broadcast || bt.source.0 != agents[ai] {
                continue;
            }
            let mut others: Vec<usize> = Vec::new();
            for (i, &q) in agents.iter().enumerate() {
                if i != ai {
                    others.push(q);
                }
            }
            let mut states = vec![0usize; others.len()];
            explode(rbn, bt.letter, &others, 0, &mut states, &mut |states| {
                let mut counts = vec![0u64; rbn.n_states()];
                counts[bt.target.0] += 1;
                for &s in states {
                    counts[s] += 1;
                }
                out.insert(Configuration::new(counts));
            });
        }
    }
    out
}

fn explode<F: FnMut(&[usize])>(
    rbn: &Rbn,
    letter: Letter,
    others: &[usize],
    i: usize,
    states: &mut Vec<usize>,
    f: &mut F,
) {
    if i == others.len() {
        f(states);
        return;
    }
    states[i] = others[i];
    explode(rbn, letter, others, i + 1, states, f);
    for tr in rbn.transitions() {
        if tr.kind == TransitionKind::Receive && tr.letter == letter && tr.source.0 == others[i] {
            states[i] = tr.target.0;
            explode(rbn, letter, others, i + 1, states, f);
        }
    }
}

/// A seeded random model with at most `max_q` states and `max_l` letters,
/// guaranteed at least one broadcast transition.
pub fn random_rbn(rng: &mut ChaCha8Rng, max_q: usize, max_l: usize) -> Rbn {
    let nq = rng.gen_range(1..=max_q);
    let nl = rng.gen_range(1..=max_l);
    let states: Vec<String> = (0..nq).map(|i| format!("s{}", i)).collect();
    let letters: Vec<String> = (0..nl).map(|i| format!("m{}", i)).collect();
    let mut r = Rbn::new(states, letters);
    let n_broadcasts = rng.gen_range(1..=nq.min(3));
    let n_receives = rng.gen_range(0..=2 * nq.min(3));
    for _ in 0..n_broadcasts {
        r.add_transition(t(
            rng.gen_range(0..nq),
            TransitionKind::Broadcast,
            rng.gen_range(0..nl),
            rng.gen_range(0..nq),
        ))
        .unwrap();
    }
    for _ in 0..n_receives {
        r.add_transition(t(
            rng.gen_range(0..nq),
            TransitionKind::Receive,
            rng.gen_range(0..nl),
            rng.gen_range(0..nq),
        ))
        .unwrap();
    }
    r
}

/// A seeded random cube with per-coordinate bounds at most `max_bound`;
/// upper bounds are infinite with the given probability, and empty cubes
/// (lower above upper) are allowed.
pub fn random_cube(rng: &mut ChaCha8Rng, arity: usize, max_bound: u64, p_inf: f64) -> Cube {
    let lower: Vec<_> = (0..arity)
        .map(|_| num_bigint::BigUint::from(rng.gen_range(0..=max_bound)))
        .collect();
    let upper: Vec<_> = (0..arity)
        .map(|_| {
            if rng.gen_bool(p_inf) {
                Bound::Infinite
            } else {
                Bound::finite_u64(rng.gen_range(0..=max_bound))
            }
        })
        .collect();
    Cube::new(lower, upper)
}

pub fn random_constraint(
    rng: &mut ChaCha8Rng,
    arity: usize,
    max_cubes: usize,
    max_bound: u64,
    p_inf: f64,
) -> CountingConstraint {
    let n = rng.gen_range(0..=max_cubes);
    CountingConstraint::new(
        arity,
        (0..n).map(|_| random_cube(rng, arity, max_bound, p_inf)).collect(),
    )
}
