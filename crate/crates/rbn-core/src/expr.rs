//! Expressions over counting constraints: atoms, forward/backward closures,
//! and boolean connectives. Every expression evaluates to an explicit
//! counting constraint; membership is additionally decidable by an
//! independent on-the-fly engine that answers closure atoms with the
//! brute-force backward-search oracle, which the test suites compare against
//! the evaluated representation.

use crate::closure::{poststar, prestar};
use crate::counting::CountingConstraint;
use crate::error::{Budget, Error, Result};
use crate::model::{member_poststar_oracle, Configuration, Rbn};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NiceExpr {
    Atom(CountingConstraint),
    PostStar(CountingConstraint),
    PreStar(CountingConstraint),
    And(Box<NiceExpr>, Box<NiceExpr>),
    Or(Box<NiceExpr>, Box<NiceExpr>),
    Not(Box<NiceExpr>),
}

impl NiceExpr {
    pub fn and(a: NiceExpr, b: NiceExpr) -> NiceExpr {
        NiceExpr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: NiceExpr, b: NiceExpr) -> NiceExpr {
        NiceExpr::Or(Box::new(a), Box::new(b))
    }

    pub fn not(a: NiceExpr) -> NiceExpr {
        NiceExpr::Not(Box::new(a))
    }

    /// Number of leaves: atoms and closure applications count 1.
    pub fn size(&self) -> usize {
        match self {
            NiceExpr::Atom(_) | NiceExpr::PostStar(_) | NiceExpr::PreStar(_) => 1,
            NiceExpr::And(a, b) | NiceExpr::Or(a, b) => a.size() + b.size(),
            NiceExpr::Not(a) => a.size(),
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            NiceExpr::Atom(c) | NiceExpr::PostStar(c) | NiceExpr::PreStar(c) => c.arity(),
            NiceExpr::And(a, _) | NiceExpr::Or(a, _) | NiceExpr::Not(a) => a.arity(),
        }
    }
}

/// Bottom-up evaluation to an explicit counting constraint denoting the
/// expression's set.
pub fn eval(rbn: &Rbn, e: &NiceExpr, budget: Budget) -> Result<CountingConstraint> {
    let out = match e {
        NiceExpr::Atom(c) => c.clone().simplify(),
        NiceExpr::PostStar(c) => poststar(rbn, c, budget)?,
        NiceExpr::PreStar(c) => prestar(rbn, c, budget)?,
        NiceExpr::And(a, b) => eval(rbn, a, budget)?.intersect(&eval(rbn, b, budget)?)?,
        NiceExpr::Or(a, b) => eval(rbn, a, budget)?.union(&eval(rbn, b, budget)?)?.simplify(),
        NiceExpr::Not(a) => eval(rbn, a, budget)?.complement()?.simplify(),
    };
    Ok(out)
}

/// Membership through full evaluation.
pub fn member_evaluated(
    rbn: &Rbn,
    e: &NiceExpr,
    c: &Configuration,
    budget: Budget,
) -> Result<bool> {
    eval(rbn, e, budget)?.contains(c)
}

/// Membership without evaluating closures: closure atoms are answered by the
/// backward-search oracle, connectives recurse.
pub fn member_onthefly(
    rbn: &Rbn,
    e: &NiceExpr,
    c: &Configuration,
    budget: Budget,
) -> Result<bool> {
    match e {
        NiceExpr::Atom(g) => g.contains(c),
        NiceExpr::PostStar(g) => member_poststar_oracle(rbn, g, c, budget),
        NiceExpr::PreStar(g) => member_poststar_oracle(&rbn.reverse(), g, c, budget),
        NiceExpr::And(a, b) => {
            Ok(member_onthefly(rbn, a, c, budget)? && member_onthefly(rbn, b, c, budget)?)
        }
        NiceExpr::Or(a, b) => {
            Ok(member_onthefly(rbn, a, c, budget)? || member_onthefly(rbn, b, c, budget)?)
        }
        NiceExpr::Not(a) => Ok(!member_onthefly(rbn, a, c, budget)?),
    }
}

/// Membership decided by both engines; disagreement is reported as an error
/// since it would mean one of the engines is wrong.
pub fn member(rbn: &Rbn, e: &NiceExpr, c: &Configuration, budget: Budget) -> Result<bool> {
    let a = member_evaluated(rbn, e, c, budget)?;
    let b = member_onthefly(rbn, e, c, budget)?;
    if a != b {
        return Err(Error::Precondition(format!(
            "engine disagreement on membership of {:?}: evaluated {}, on-the-fly {}",
            c.counts(),
            a,
            b
        )));
    }
    Ok(a)
}

/// Emptiness of the expression's set, with a smallest-size witness when
/// nonempty. A nonempty evaluated constraint has a nonempty cube, whose lower
/// bound vector is a member of size at most the representation norm, so the
/// ascending size scan below always terminates with a witness.
pub fn is_empty(rbn: &Rbn, e: &NiceExpr, budget: Budget) -> Result<Option<Configuration>> {
    let evaluated = eval(rbn, e, budget)?;
    is_empty_of_evaluated(&evaluated)
}

/// Emptiness check on an already evaluated constraint; `Some(witness)` when
/// nonempty, `None` when empty.
pub fn is_empty_of_evaluated(evaluated: &CountingConstraint) -> Result<Option<Configuration>> {
    if evaluated.cubes().iter().all(|c| c.is_empty()) {
        return Ok(None);
    }
    let cap = evaluated.norm_u64()?;
    for size in 0..=cap {
        if let Some(w) = evaluated.enumerate_size(size).into_iter().next() {
            return Ok(Some(w));
        }
    }
    Err(Error::Precondition(
        "nonempty constraint yielded no witness within its norm".into(),
    ))
}

/// Can some member of `from` reach some member of `to`? On success returns
/// the reached configuration and a complete step-by-step run from a member
/// of `from` to it.
pub fn cube_reach(
    rbn: &Rbn,
    from: &CountingConstraint,
    to: &CountingConstraint,
    budget: Budget,
) -> Result<Option<(Configuration, Vec<Configuration>)>> {
    let e = NiceExpr::and(
        NiceExpr::PostStar(from.clone()),
        NiceExpr::Atom(to.clone()),
    );
    let target = match is_empty(rbn, &e, budget)? {
        None => return Ok(None),
        Some(t) => t,
    };
    // Recover a run: search backwards from the target and stop at a start
    // member; parent pointers then spell the forward run.
    let rev = rbn.reverse();
    let parents = rev.reachable_with_parents(std::slice::from_ref(&target), budget)?;
    let mut start: Option<Configuration> = None;
    let mut keys: Vec<&Configuration> = parents.keys().collect();
    keys.sort();
    for c in keys {
        if from.contains(c)? {
            start = Some(c.clone());
            break;
        }
    }
    let start = start.ok_or_else(|| {
        Error::Precondition("witness is not backward-reachable from the start set".into())
    })?;
    let mut run = vec![start];
    while let Some(Some(parent)) = parents.get(run.last().unwrap()) {
        run.push(parent.clone());
    }
    debug_assert_eq!(run.last(), Some(&target));
    Ok(Some((target, run)))
}
