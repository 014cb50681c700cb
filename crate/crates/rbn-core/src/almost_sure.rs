//! Almost-sure coverability and cut-off classification.
//!
//! With h agents starting in `init`, the final state `fin` is covered almost
//! surely (under any fair stochastic scheduler) iff every configuration
//! reachable from `⟦h·init⟧` can still reach a configuration with an agent in
//! `fin`, i.e. iff the forward closure of the starts is contained in the
//! backward closure of the upward-closed target. The classifier computes the
//! difference set once, symbolically, for all population sizes at a time:
//! if it is finite there is a positive cut-off, otherwise a negative one.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};

use crate::counting::{Bound, CountingConstraint, Cube};
use crate::error::{Budget, Error, Result};
use crate::expr::{eval, NiceExpr};
use crate::model::{Configuration, Rbn, StateId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

/// Classification result: from every population size at or above `bound`,
/// almost-sure coverability uniformly holds (Positive) or uniformly fails
/// (Negative). `difference` is the computed set of reachable configurations
/// that can no longer cover the target; `witness` exhibits its infinitude
/// for negative verdicts.
#[derive(Debug, Clone)]
pub struct CutoffVerdict {
    pub polarity: Polarity,
    pub bound: BigUint,
    pub difference: CountingConstraint,
    pub witness: Option<(StateId, Configuration)>,
}

/// The cube of configurations whose agents all sit in `init`:
/// lower bounds 0, upper bound infinity at `init` and 0 elsewhere.
pub fn init_cube(n_states: usize, init: StateId) -> Cube {
    let lower = vec![0u64; n_states];
    let upper: Vec<Option<u64>> = (0..n_states)
        .map(|q| if q == init.0 { None } else { Some(0) })
        .collect();
    Cube::from_u64(lower, upper)
}

/// The upward-closed cube of configurations with at least one agent in `fin`.
pub fn upward_fin_cube(n_states: usize, fin: StateId) -> Cube {
    let lower: Vec<u64> = (0..n_states).map(|q| u64::from(q == fin.0)).collect();
    Cube::new(
        lower.into_iter().map(BigUint::from).collect(),
        vec![Bound::Infinite; n_states],
    )
}

/// Decides almost-sure coverability exactly at one fixed population size by
/// brute force: every configuration reachable from `⟦k·init⟧` must be able to
/// reach a configuration with an agent in `fin`.
pub fn as_cover_fixed(
    rbn: &Rbn,
    k: u64,
    init: StateId,
    fin: StateId,
    budget: Budget,
) -> Result<bool> {
    let start = Configuration::from_pairs(rbn.n_states(), &[(init, k)]);
    let closure = rbn.reachable_set(&start, budget)?;
    let good: Vec<Configuration> = closure
        .iter()
        .filter(|c| c.get(fin) >= 1)
        .cloned()
        .collect();
    if good.is_empty() {
        // k = 0 included: the empty configuration never covers fin.
        return Ok(false);
    }
    // A configuration can reach `good` iff it lies in the backward closure
    // of `good`, computed as a forward closure of the reversed network.
    let can_reach = rbn.reverse().reachable_set_from_all(good, budget)?;
    Ok(closure.iter().all(|c| can_reach.contains(c)))
}

/// Classifies the cut-off for covering `fin` from populations of `init`.
pub fn cutoff(rbn: &Rbn, init: StateId, fin: StateId, budget: Budget) -> Result<CutoffVerdict> {
    let n = rbn.n_states();
    let starts = CountingConstraint::from_cube(init_cube(n, init));
    let target = CountingConstraint::from_cube(upward_fin_cube(n, fin));
    let e = NiceExpr::and(
        NiceExpr::PostStar(starts),
        NiceExpr::not(NiceExpr::PreStar(target)),
    );
    let difference = eval(rbn, &e, budget)?.simplify();
    let norm = difference.norm();

    let verdict = if difference.is_finite() {
        CutoffVerdict {
            polarity: Polarity::Positive,
            bound: BigUint::from(n as u64) * &norm + BigUint::one(),
            difference,
            witness: None,
        }
    } else {
        let witness = witness_infinitude(&difference, &norm)?;
        CutoffVerdict {
            polarity: Polarity::Negative,
            bound: norm,
            difference,
            witness,
        }
    };

    // Cross-check the verdict against the fixed-size decision at a few sizes
    // at and above the bound, when that is cheap enough to enumerate.
    if let Some(b) = verdict.bound.to_u64() {
        if b <= 8 {
            for k in b..=b + 2 {
                let fixed = as_cover_fixed(rbn, k, init, fin, budget)?;
                let expected = verdict.polarity == Polarity::Positive;
                if fixed != expected {
                    return Err(Error::Precondition(format!(
                        "cut-off verdict contradicts the fixed-size decision at size {}",
                        k
                    )));
                }
            }
        }
    }
    Ok(verdict)
}

/// For an infinite constraint, produces a state q and a member with exactly
/// `n + 1` agents in q and at most `n` in every other state, where `n` must
/// be at least the representation norm; returns `None` iff the constraint is
/// finite.
pub fn witness_infinitude(
    s: &CountingConstraint,
    n: &BigUint,
) -> Result<Option<(StateId, Configuration)>> {
    for cube in s.cubes() {
        if cube.is_empty() {
            continue;
        }
        for (q, upper) in cube.upper().iter().enumerate() {
            if !upper.is_infinite() {
                continue;
            }
            let mut counts = Vec::with_capacity(cube.arity());
            for l in cube.lower() {
                let base = l
                    .to_u64()
                    .ok_or_else(|| Error::TooLarge("cube lower bound exceeds u64".into()))?;
                counts.push(base);
            }
            let pumped = (n + BigUint::one())
                .to_u64()
                .ok_or_else(|| Error::TooLarge("infinitude witness count exceeds u64".into()))?;
            counts[q] = pumped;
            return Ok(Some((StateId(q), Configuration::new(counts))));
        }
    }
    Ok(None)
}
