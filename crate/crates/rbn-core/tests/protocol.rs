mod common;

use common::*;
use rbn_core::counting::{CountingConstraint, Cube};
use rbn_core::model::{Configuration, StateId};
use rbn_core::protocol::{
    bottom_scc_oracle, consensus_cube, consensus_status, simulate_fair, stable_consensus,
    verify_computes, ConsensusStatus, PredicateSpec,
};
use rbn_core::Budget;

/// A threshold predicate on the single input coordinate.
fn at_least(n: u64) -> PredicateSpec {
    PredicateSpec {
        phi: [
            CountingConstraint::from_cube(Cube::from_u64(vec![0], vec![Some(n - 1)])),
            CountingConstraint::from_cube(Cube::from_u64(vec![n], vec![None])),
        ],
    }
}

#[test]
fn predicate_values() {
    let spec = at_least(3);
    assert_eq!(spec.value(&[0]).unwrap(), Some(0));
    assert_eq!(spec.value(&[2]).unwrap(), Some(0));
    assert_eq!(spec.value(&[3]).unwrap(), Some(1));
    assert_eq!(spec.value(&[7]).unwrap(), Some(1));
}

#[test]
fn consensus_predicates() {
    let p = ex2();
    assert!(p.is_consensus(&cfg(&[2, 1, 0]), 0));
    assert!(!p.is_consensus(&cfg(&[2, 0, 1]), 0));
    assert!(p.is_consensus(&cfg(&[0, 0, 4]), 1));
    assert!(p.is_consensus(&cfg(&[0, 0, 0]), 0));
    assert!(p.is_consensus(&cfg(&[0, 0, 0]), 1));
    assert_eq!(consensus_status(&p, &cfg(&[0, 0, 0])), ConsensusStatus::Both);
    assert_eq!(consensus_status(&p, &cfg(&[1, 0, 1])), ConsensusStatus::Neither);
    let cube1 = consensus_cube(&p, 1);
    assert!(cube1.contains(&cfg(&[0, 0, 3])).unwrap());
    assert!(!cube1.contains(&cfg(&[1, 0, 3])).unwrap());
}

/// Stability requires staying in consensus under every continuation. A lone
/// agent is stuck on output 0, but two agents are not: q2's b broadcast can
/// pull the remaining q1 agent into q3 via the extra receive, e.g.
/// (2,0,0) -> (1,1,0) -> (1,0,1). q3-only configurations are stable on 1.
#[test]
fn stable_consensus_examples() {
    let p = ex2();
    let st0 = stable_consensus(&p, 0, Budget::default()).unwrap();
    assert!(st0.contains(&cfg(&[1, 0, 0])).unwrap());
    assert!(st0.contains(&cfg(&[0, 1, 0])).unwrap());
    assert!(!st0.contains(&cfg(&[2, 0, 0])).unwrap());
    assert!(!st0.contains(&cfg(&[1, 1, 0])).unwrap());
    assert!(!st0.contains(&cfg(&[0, 2, 0])).unwrap());
    assert!(!st0.contains(&cfg(&[3, 0, 0])).unwrap());
    let st1 = stable_consensus(&p, 1, Budget::default()).unwrap();
    assert!(st1.contains(&cfg(&[0, 0, 1])).unwrap());
    assert!(st1.contains(&cfg(&[0, 0, 5])).unwrap());
    assert!(!st1.contains(&cfg(&[1, 0, 1])).unwrap());
    assert!(!st1.contains(&cfg(&[0, 1, 1])).unwrap());
}

/// Two agents already suffice: (2,0,0) -> (1,1,0) -> (1,0,1) -> (0,0,2) ends
/// in an absorbing 1-consensus, so the protocol answers "at least two", and
/// the threshold three is refuted with a reachable counterexample.
#[test]
fn ex2_computes_at_least_two() {
    let p = ex2();
    let verdict = verify_computes(&p, &at_least(2), Budget::default()).unwrap();
    assert!(verdict.computes);
    assert!(verdict.counterexample.is_none());

    let verdict = verify_computes(&p, &at_least(3), Budget::default()).unwrap();
    assert!(!verdict.computes);
    let (b, witness) = verdict.counterexample.expect("failure carries a counterexample");
    assert_eq!(b, 0);
    let init_b = rbn_core::protocol::initial_constraint(&p, &at_least(3), b).unwrap();
    assert!(rbn_core::model::member_poststar_oracle(
        &p.rbn,
        &init_b,
        &witness,
        Budget::default()
    )
    .unwrap());
}

/// Dropping the q1 ?b q3 transition breaks the protocol; the returned
/// counterexample is confirmed against concrete semantics: it is reachable
/// from a b-side initial configuration yet none of its successors reaches a
/// stable b-consensus.
#[test]
fn mutated_protocol_fails_with_confirmed_counterexample() {
    let p = ex2_mutated();
    let spec = at_least(3);
    let verdict = verify_computes(&p, &spec, Budget::default()).unwrap();
    assert!(!verdict.computes);
    let (b, witness) = verdict.counterexample.expect("failure carries a counterexample");
    let init_b = rbn_core::protocol::initial_constraint(&p, &spec, b).unwrap();
    assert!(rbn_core::model::member_poststar_oracle(
        &p.rbn,
        &init_b,
        &witness,
        Budget::default()
    )
    .unwrap());
    let st_b = stable_consensus(&p, b, Budget::default()).unwrap();
    let onward = p.rbn.reachable_set(&witness, Budget::default()).unwrap();
    assert!(
        onward.iter().all(|c| !st_b.contains(c).unwrap()),
        "counterexample must be unable to reach a stable consensus"
    );
}

/// The exact bottom-component analysis agrees with the predicate for every
/// input vector up to five agents: fair runs converge to the predicate's bit
/// and not to the other (except at size zero where both hold vacuously).
#[test]
fn bottom_scc_oracle_matches_predicate() {
    let p = ex2();
    let spec = at_least(2);
    for v in 0..=5u64 {
        let verdict = bottom_scc_oracle(&p, &[v], Budget::default()).unwrap();
        let bit = spec.value(&[v]).unwrap().unwrap();
        assert!(verdict.converges(bit), "input {}", v);
        if v > 0 {
            assert!(!verdict.converges(1 - bit), "input {}", v);
        }
        assert!(!verdict.non_converging());
    }
}

/// The simulator is deterministic per seed and only takes concrete steps.
#[test]
fn simulation_is_deterministic_and_sound() {
    let p = ex2();
    let (trace1, status1) = simulate_fair(&p, &[4], 7, 60).unwrap();
    let (trace2, status2) = simulate_fair(&p, &[4], 7, 60).unwrap();
    assert_eq!(trace1, trace2);
    assert_eq!(status1, status2);
    assert_eq!(trace1[0], cfg(&[4, 0, 0]));
    for pair in trace1.windows(2) {
        assert!(
            p.rbn.successors(&pair[0]).contains(&pair[1]),
            "simulated step {:?} -> {:?}",
            pair[0].counts(),
            pair[1].counts()
        );
    }
    assert_eq!(trace1.len() as u64 - 1, 60, "no deadlock in ex2 from q1 starts");
}

#[test]
fn initial_configurations_and_constraints() {
    let p = ex2();
    assert_eq!(p.initial_configuration(&[4]).unwrap(), cfg(&[4, 0, 0]));
    let spec = at_least(3);
    let init1 = rbn_core::protocol::initial_constraint(&p, &spec, 1).unwrap();
    assert!(init1.contains(&cfg(&[3, 0, 0])).unwrap());
    assert!(init1.contains(&cfg(&[9, 0, 0])).unwrap());
    assert!(!init1.contains(&cfg(&[2, 0, 0])).unwrap());
    assert!(!init1.contains(&cfg(&[3, 1, 0])).unwrap());
    for size in 0..=4u64 {
        for c in Configuration::all_of_size(3, size) {
            let expect = c.get(StateId(1)) == 0
                && c.get(StateId(2)) == 0
                && c.get(StateId(0)) <= 2;
            assert_eq!(
                rbn_core::protocol::initial_constraint(&p, &spec, 0)
                    .unwrap()
                    .contains(&c)
                    .unwrap(),
                expect
            );
        }
    }
}
