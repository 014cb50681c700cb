//! Exact forward/backward reachability closures of counting constraints.
//!
//! The forward closure of a cube is assembled over a doubled network that
//! carries a tracked and a surplus copy of every state, with every
//! transition duplicated per copy and no transition crossing copies. A cube
//! member splits into a tracked part (the bounded coordinates plus the
//! floors of the unbounded ones) and a surplus living on a chosen set of
//! unbounded coordinates; runs of the doubled network are exactly runs of
//! the original network that remember this split. The split matters because
//! of a subtlety: the set of reachable configurations inside a symbolic
//! node's denotation is *not* upward closed on the support in general —
//! only the configurations whose own runs keep the surplus on the support
//! can be pumped. In the doubled network that distinction is structural:
//! for a fixed tracked part and surplus support, the reachable surpluses
//! form an upward-closed set, because extra surplus agents can ride the
//! same run (placed at receive predecessors of wherever they must end up,
//! or replaying a broadcast). Each such slice is therefore described
//! exactly by its finitely many minimal elements, found by iterative basis
//! refinement: a levelwise search produces new members, and a basis is
//! certified complete by showing that every region of the slice it leaves
//! uncovered contains no member. Regions with unbounded coordinates are
//! decided exactly by reachability in an auxiliary symbolic graph that
//! tracks the bounded coordinates concretely. Each minimal element projects
//! (by summing the two copies) to a cube with infinity exactly on the
//! surplus support. The backward closure runs the same construction on the
//! reversed network.

use std::collections::{BTreeSet, HashMap, HashSet};

use num_traits::ToPrimitive;

use crate::counting::{Bound, CountingConstraint, Cube};
use crate::error::{Budget, Error, Result};
use crate::model::{Configuration, Rbn, StateId, Transition};
use crate::symbolic::{symb_of_cube, symb_reachable, SupportSet, SymbolicConfiguration};

/// Memoized per-size forward closures of a fixed start constraint. Membership
/// of any configuration in the forward closure reduces to one breadth-first
/// search per configuration size, shared across all queries of that size.
pub struct PostSizeCache<'a> {
    rbn: &'a Rbn,
    start: CountingConstraint,
    by_size: HashMap<u64, HashSet<Configuration>>,
    budget: Budget,
}

impl<'a> PostSizeCache<'a> {
    pub fn new(rbn: &'a Rbn, start: CountingConstraint, budget: Budget) -> PostSizeCache<'a> {
        PostSizeCache {
            rbn,
            start,
            by_size: HashMap::new(),
            budget,
        }
    }

    /// True iff `c` is reachable from some start configuration of equal size.
    pub fn member(&mut self, c: &Configuration) -> Result<bool> {
        let n = c.size();
        if !self.by_size.contains_key(&n) {
            let starts = self.start.enumerate_size(n);
            let closure = self.rbn.reachable_set_from_all(starts, self.budget)?;
            self.by_size.insert(n, closure);
        }
        Ok(self.by_size[&n].contains(c))
    }
}

/// The minimal elements, in the per-node order, of the forward-reachable part
/// of a node's denotation.
#[derive(Debug, Clone)]
pub struct ThetaOrderWitness {
    pub theta: SymbolicConfiguration,
    pub minimal_elements: Vec<Configuration>,
}

/// Computes the minimal elements of the reachable part of the node's
/// denotation, in the order that compares support coordinates componentwise
/// and requires equality elsewhere.
pub fn minimal_antichain(
    rbn: &Rbn,
    cube: &Cube,
    theta: &SymbolicConfiguration,
    budget: Budget,
) -> Result<ThetaOrderWitness> {
    let mut ctx = CubeContext::new(rbn, std::slice::from_ref(cube), budget)?;
    let basis = ctx.antichain(theta)?;
    // The basis search covers the reachable part from above, but when that
    // part is not upward closed on the support a basis element found by
    // coordinate descent need not be minimal. Every minimal member lies in
    // the basis (it is reachable and below no other member), so filtering
    // out elements with a reachable member strictly below them leaves
    // exactly the minimal ones.
    let support_states: Vec<StateId> = theta.support.iter(rbn.n_states()).collect();
    let mut minimal_elements = Vec::new();
    for b in basis {
        let floors: Vec<u64> = support_states
            .iter()
            .map(|&q| theta.concrete.get(q) + 1)
            .collect();
        let mut vals = floors.clone();
        let mut dominated = false;
        'scan: loop {
            ctx.tick()?;
            let mut counts = theta.concrete.counts().to_vec();
            for (i, &q) in support_states.iter().enumerate() {
                counts[q.0] = vals[i];
            }
            let cand = Configuration::new(counts);
            if cand != b && ctx.oracle.member(&cand)? {
                dominated = true;
                break 'scan;
            }
            let mut done = true;
            for i in 0..vals.len() {
                if vals[i] < b.get(support_states[i]) {
                    vals[i] += 1;
                    vals[..i].copy_from_slice(&floors[..i]);
                    done = false;
                    break;
                }
            }
            if done {
                break;
            }
        }
        if !dominated {
            minimal_elements.push(b);
        }
    }
    Ok(ThetaOrderWitness {
        theta: theta.clone(),
        minimal_elements,
    })
}

/// The per-coordinate bounds of one start cube.
struct BoundsSpec {
    lower: Vec<u64>,
    /// Per-coordinate upper bound; `None` is unbounded.
    upper: Vec<Option<u64>>,
    unbounded: SupportSet,
}

/// State shared by the antichain computations of all nodes reachable from a
/// start constraint: the concrete membership oracle and the memoized
/// auxiliary graphs used for region queries.
struct CubeContext<'a> {
    rbn: &'a Rbn,
    arity: usize,
    specs: Vec<BoundsSpec>,
    /// Largest per-cube sum of finite upper bounds (lower bounds where
    /// unbounded): how many agents beyond the fixed ones a region query must
    /// track to pin a run's start inside some start cube.
    slack: u64,
    oracle: PostSizeCache<'a>,
    ray_reach: HashMap<u64, HashSet<SymbolicConfiguration>>,
    ray_memo: HashMap<(u64, Vec<u64>), bool>,
    budget: Budget,
    work: usize,
}

impl<'a> CubeContext<'a> {
    fn new(rbn: &'a Rbn, cubes: &[Cube], budget: Budget) -> Result<CubeContext<'a>> {
        let arity = rbn.n_states();
        let mut specs = Vec::with_capacity(cubes.len());
        let mut slack = 0u64;
        for cube in cubes {
            let mut lower = Vec::with_capacity(arity);
            let mut upper = Vec::with_capacity(arity);
            let mut unbounded = SupportSet::empty();
            for q in 0..arity {
                lower.push(
                    cube.lower()[q]
                        .to_u64()
                        .ok_or_else(|| Error::TooLarge("cube lower bound exceeds u64".into()))?,
                );
                match &cube.upper()[q] {
                    Bound::Infinite => {
                        unbounded.insert(StateId(q));
                        upper.push(None);
                    }
                    Bound::Finite(u) => upper.push(Some(
                        u.to_u64()
                            .ok_or_else(|| Error::TooLarge("cube upper bound exceeds u64".into()))?,
                    )),
                }
            }
            let cube_slack: u64 = (0..arity)
                .map(|q| match upper[q] {
                    Some(u) => u,
                    None => lower[q],
                })
                .sum();
            slack = slack.max(cube_slack);
            specs.push(BoundsSpec {
                lower,
                upper,
                unbounded,
            });
        }
        let oracle = PostSizeCache::new(
            rbn,
            CountingConstraint::new(arity, cubes.to_vec()),
            budget,
        );
        Ok(CubeContext {
            rbn,
            arity,
            specs,
            slack,
            oracle,
            ray_reach: HashMap::new(),
            ray_memo: HashMap::new(),
            budget,
            work: 0,
        })
    }

    fn tick(&mut self) -> Result<()> {
        self.work += 1;
        self.budget.check(self.work, "closure antichain computation")
    }

    /// Start nodes of the auxiliary graph tracking exactly `mass` agents:
    /// for each start cube, every multiset within its bounds of that size,
    /// combined with every support choice among its unbounded coordinates.
    /// The denotations of these nodes cover exactly the start-constraint
    /// members with at least `mass` agents placed as tracked.
    fn ray_starts(&self, mass: u64) -> Vec<SymbolicConfiguration> {
        let arity = self.arity;
        let mut out: BTreeSet<SymbolicConfiguration> = BTreeSet::new();
        if arity == 0 {
            if mass == 0 && !self.specs.is_empty() {
                out.insert(SymbolicConfiguration::new(
                    Configuration::new(vec![]),
                    SupportSet::empty(),
                ));
            }
            return out.into_iter().collect();
        }
        #[allow(clippy::too_many_arguments)]
        fn rec(
            q: usize,
            left: u64,
            lower: &[u64],
            upper: &[Option<u64>],
            min_left: &[u64],
            unbounded: SupportSet,
            cur: &mut Vec<u64>,
            out: &mut BTreeSet<SymbolicConfiguration>,
        ) {
            if q == lower.len() {
                if left == 0 {
                    let w = Configuration::new(cur.clone());
                    for support in unbounded.subsets() {
                        out.insert(SymbolicConfiguration::new(w.clone(), support));
                    }
                }
                return;
            }
            if left < min_left[q] {
                return;
            }
            let hi = match upper[q] {
                Some(u) => u.min(left - min_left[q + 1]),
                None => left - min_left[q + 1],
            };
            if hi < lower[q] {
                return;
            }
            for v in lower[q]..=hi {
                cur[q] = v;
                rec(q + 1, left - v, lower, upper, min_left, unbounded, cur, out);
            }
        }
        for spec in &self.specs {
            // Minimal mass still owed by coordinates q..end, for pruning.
            let mut min_left = vec![0u64; arity + 1];
            for q in (0..arity).rev() {
                min_left[q] = min_left[q + 1] + spec.lower[q];
            }
            let mut cur = vec![0u64; arity];
            rec(
                0,
                mass,
                &spec.lower,
                &spec.upper,
                &min_left,
                spec.unbounded,
                &mut cur,
                &mut out,
            );
        }
        out.into_iter().collect()
    }

    fn ray_reachable(&mut self, mass: u64) -> Result<&HashSet<SymbolicConfiguration>> {
        if !self.ray_reach.contains_key(&mass) {
            let starts = self.ray_starts(mass);
            let reach = symb_reachable(self.rbn, mass, starts, self.budget)?;
            self.ray_reach.insert(mass, reach);
        }
        Ok(&self.ray_reach[&mass])
    }

    /// Decides whether the closure contains a configuration that equals
    /// `fixed` outside `free` and exceeds the node's concrete part on `free`.
    ///
    /// Any run witnessing such a configuration can be replayed tracking the
    /// agents that end on the fixed coordinates plus enough agents to pin the
    /// start inside the cube, so it appears as a reachable node of the
    /// auxiliary graph of some tracked mass between the fixed total and the
    /// fixed total plus the cube's bound sum. Conversely a reachable node can
    /// be inflated on its support, so a hit proves the region inhabited.
    fn region_nonempty(
        &mut self,
        theta: &SymbolicConfiguration,
        fixed: &[u64],
        free: SupportSet,
    ) -> Result<bool> {
        let arity = self.arity;
        let key: Vec<u64> = (0..arity)
            .map(|q| {
                if free.contains(StateId(q)) {
                    theta.concrete.get(StateId(q)) + 1
                } else {
                    fixed[q]
                }
            })
            .collect();
        if let Some(&known) = self.ray_memo.get(&(free.0, key.clone())) {
            return Ok(known);
        }
        let fixed_mass: u64 = (0..arity)
            .filter(|&q| !free.contains(StateId(q)))
            .map(|q| fixed[q])
            .sum();
        let slack = self.slack;
        let mut found = false;
        'scan: for mass in fixed_mass..=fixed_mass + slack {
            self.tick()?;
            let reach = self.ray_reachable(mass)?;
            for node in reach {
                if !node.support.is_subset(free) {
                    continue;
                }
                let ok = (0..arity).all(|q| {
                    let qq = StateId(q);
                    let nv = node.concrete.get(qq);
                    if !free.contains(qq) {
                        nv == fixed[q]
                    } else {
                        node.support.contains(qq) || nv >= key[q]
                    }
                });
                if ok {
                    found = true;
                    break 'scan;
                }
            }
        }
        self.ray_memo.insert((free.0, key), found);
        Ok(found)
    }

    /// A concrete member of a region already known to be inhabited, found by
    /// a levelwise scan over the total surplus on the free coordinates.
    fn region_witness(
        &mut self,
        theta: &SymbolicConfiguration,
        fixed: &[u64],
        free: SupportSet,
    ) -> Result<Configuration> {
        let arity = self.arity;
        let free_states: Vec<StateId> = free.iter(arity).collect();
        let mut total: u64 = 0;
        loop {
            for comp in compositions(total, free_states.len()) {
                self.tick()?;
                let mut counts = fixed.to_vec();
                for (i, &q) in free_states.iter().enumerate() {
                    counts[q.0] = theta.concrete.get(q) + 1 + comp[i];
                }
                let cand = Configuration::new(counts);
                if self.oracle.member(&cand)? {
                    return Ok(cand);
                }
            }
            total += 1;
        }
    }

    /// A member of the node's denotation not above any basis element, or
    /// `None` when the basis already covers every member. The complement of
    /// the basis's upward closure is split into regions by choosing, for each
    /// basis element, one support coordinate to undercut.
    fn uncovered_member(
        &mut self,
        theta: &SymbolicConfiguration,
        support_states: &[StateId],
        basis: &[Configuration],
    ) -> Result<Option<Configuration>> {
        let d = support_states.len();
        let v = &theta.concrete;
        let mut pieces: BTreeSet<Vec<Option<u64>>> = BTreeSet::new();
        if basis.is_empty() {
            pieces.insert(vec![None; d]);
        } else {
            // Coordinates where a member can undercut each basis element,
            // with the resulting cap; an element with none pins the whole
            // denotation above it.
            let mut feasible: Vec<Vec<(usize, u64)>> = Vec::new();
            for b in basis {
                let f: Vec<(usize, u64)> = support_states
                    .iter()
                    .enumerate()
                    .filter_map(|(i, &q)| {
                        let bq = b.get(q);
                        if bq >= v.get(q) + 2 {
                            Some((i, bq - 1))
                        } else {
                            None
                        }
                    })
                    .collect();
                if f.is_empty() {
                    return Ok(None);
                }
                feasible.push(f);
            }
            let mut idx = vec![0usize; basis.len()];
            loop {
                self.tick()?;
                let mut caps: Vec<Option<u64>> = vec![None; d];
                for (bi, &ci) in idx.iter().enumerate() {
                    let (pos, cap) = feasible[bi][ci];
                    caps[pos] = Some(match caps[pos] {
                        None => cap,
                        Some(c) => c.min(cap),
                    });
                }
                pieces.insert(caps);
                let mut done = true;
                for bi in 0..idx.len() {
                    if idx[bi] + 1 < feasible[bi].len() {
                        idx[bi] += 1;
                        for j in idx.iter_mut().take(bi) {
                            *j = 0;
                        }
                        done = false;
                        break;
                    }
                }
                if done {
                    break;
                }
            }
        }
        for caps in pieces {
            if let Some(c) = self.piece_member(theta, support_states, &caps)? {
                return Ok(Some(c));
            }
        }
        Ok(None)
    }

    /// Searches one region of the complement: capped support coordinates are
    /// enumerated below their caps, uncapped ones are left free and resolved
    /// by a region query.
    fn piece_member(
        &mut self,
        theta: &SymbolicConfiguration,
        support_states: &[StateId],
        caps: &[Option<u64>],
    ) -> Result<Option<Configuration>> {
        let v = &theta.concrete;
        let capped: Vec<(StateId, u64, u64)> = support_states
            .iter()
            .enumerate()
            .filter_map(|(i, &q)| caps[i].map(|cap| (q, v.get(q) + 1, cap)))
            .collect();
        let mut free = SupportSet::empty();
        for (i, &q) in support_states.iter().enumerate() {
            if caps[i].is_none() {
                free.insert(q);
            }
        }
        let mut vals: Vec<u64> = capped.iter().map(|&(_, lo, _)| lo).collect();
        loop {
            self.tick()?;
            let mut fixed = v.counts().to_vec();
            for (j, &(q, _, _)) in capped.iter().enumerate() {
                fixed[q.0] = vals[j];
            }
            if free.is_empty() {
                let cand = Configuration::new(fixed);
                if self.oracle.member(&cand)? {
                    return Ok(Some(cand));
                }
            } else if self.region_nonempty(theta, &fixed, free)? {
                return Ok(Some(self.region_witness(theta, &fixed, free)?));
            }
            let mut done = true;
            for j in 0..vals.len() {
                if vals[j] < capped[j].2 {
                    vals[j] += 1;
                    for (l, &(_, lo, _)) in capped.iter().enumerate().take(j) {
                        vals[l] = lo;
                    }
                    done = false;
                    break;
                }
            }
            if done {
                break;
            }
        }
        Ok(None)
    }

    /// One downward pass per support coordinate; since the member set is
    /// upward closed, a coordinate that cannot drop now can never drop later,
    /// so the pass ends on a minimal element.
    fn minimize(
        &mut self,
        theta: &SymbolicConfiguration,
        support_states: &[StateId],
        mut c: Configuration,
    ) -> Result<Configuration> {
        for &q in support_states {
            let floor = theta.concrete.get(q) + 1;
            while c.get(q) > floor {
                self.tick()?;
                let mut lower_c = c.clone();
                lower_c.sub(q, 1);
                if self.oracle.member(&lower_c)? {
                    c = lower_c;
                } else {
                    break;
                }
            }
        }
        Ok(c)
    }

    /// The complete minimal basis of the reachable part of the node's
    /// denotation. Terminates because every round adds an element
    /// incomparable to the current basis and componentwise orders on
    /// fixed-width vectors admit no infinite antichain.
    fn antichain(&mut self, theta: &SymbolicConfiguration) -> Result<Vec<Configuration>> {
        let support_states: Vec<StateId> = theta.support.iter(self.rbn.n_states()).collect();
        if support_states.is_empty() {
            let single = self.oracle.member(&theta.concrete)?;
            return Ok(if single {
                vec![theta.concrete.clone()]
            } else {
                Vec::new()
            });
        }
        let mut basis: Vec<Configuration> = Vec::new();
        while let Some(c) = self.uncovered_member(theta, &support_states, &basis)? {
            let m = self.minimize(theta, &support_states, c)?;
            basis.push(m);
        }
        basis.sort();
        Ok(basis)
    }
}

/// All ways to write `total` as an ordered sum of `parts` non-negative
/// integers. For `parts == 0`, only `total == 0` has (one, empty) solution.
fn compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    if parts == 0 {
        if total == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    let mut cur = vec![0u64; parts];
    fn rec(i: usize, rem: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if i + 1 == cur.len() {
            cur[i] = rem;
            out.push(cur.clone());
            return;
        }
        for v in 0..=rem {
            cur[i] = v;
            rec(i + 1, rem - v, cur, out);
        }
    }
    rec(0, total, &mut cur, &mut out);
    out
}

/// The network on two non-interacting copies of the state space: a tracked
/// copy (coordinates 0..n) and a surplus copy (coordinates n..2n), each with
/// the full transition set. Its runs are exactly the runs of the original
/// network together with a choice, fixed along the run, of which agents are
/// surplus.
fn doubled(rbn: &Rbn) -> Rbn {
    let mut states: Vec<String> = rbn
        .state_names()
        .iter()
        .map(|s| format!("{}.tracked", s))
        .collect();
    states.extend(rbn.state_names().iter().map(|s| format!("{}.surplus", s)));
    let mut out = Rbn::new(states, rbn.letter_names().to_vec());
    let n = rbn.n_states();
    for t in rbn.transitions() {
        for shift in [0, n] {
            out.add_transition(Transition {
                source: StateId(t.source.0 + shift),
                kind: t.kind,
                letter: t.letter,
                target: StateId(t.target.0 + shift),
            })
            .expect("doubled transition is well-formed");
        }
    }
    out
}

/// The forward reachability closure of a counting constraint, returned as a
/// counting constraint denoting exactly the set of configurations reachable
/// from some member of the input.
pub fn poststar(rbn: &Rbn, a: &CountingConstraint, budget: Budget) -> Result<CountingConstraint> {
    let a = a.clone().simplify();
    let arity = a.arity();
    if arity != rbn.n_states() {
        return Err(Error::DimensionMismatch {
            expected: rbn.n_states(),
            got: arity,
        });
    }
    let n = rbn.n_states();
    let two = doubled(rbn);
    let mut cubes: Vec<Cube> = Vec::new();
    // The closure distributes over union, so handle each cube separately.
    for cube in a.cubes() {
        if cube.is_empty() {
            continue;
        }
        // Tile the cube by which unbounded coordinates carry a surplus, and
        // lift each tile to the doubled network: the tile's concrete part
        // becomes the tracked copy, the surplus copy holds at least one
        // agent on each support coordinate and nothing elsewhere.
        let tiles = symb_of_cube(cube, budget)?;
        let mut starts: Vec<SymbolicConfiguration> = Vec::with_capacity(tiles.len());
        let mut tile_cubes: Vec<Cube> = Vec::with_capacity(tiles.len());
        let mut index = 0u64;
        for tile in &tiles {
            index = index.max(tile.concrete.size());
            let mut counts = tile.concrete.counts().to_vec();
            counts.extend(std::iter::repeat(0).take(n));
            starts.push(SymbolicConfiguration::new(
                Configuration::new(counts),
                SupportSet(tile.support.0 << n),
            ));
            let mut lower = tile.concrete.counts().to_vec();
            let mut upper: Vec<Option<u64>> =
                tile.concrete.counts().iter().map(|&x| Some(x)).collect();
            for q in 0..n {
                if tile.support.contains(StateId(q)) {
                    lower.push(1);
                    upper.push(None);
                } else {
                    lower.push(0);
                    upper.push(Some(0));
                }
            }
            tile_cubes.push(Cube::from_u64(lower, upper));
        }
        // For each reachable (tracked part, surplus support) slice, the
        // reachable surpluses form an upward-closed set; emit one cube per
        // minimal element, with the two copies summed back together.
        let mut reach: Vec<SymbolicConfiguration> = symb_reachable(&two, index, starts, budget)?
            .into_iter()
            .collect();
        reach.sort();
        let mut ctx = CubeContext::new(&two, &tile_cubes, budget)?;
        for theta in &reach {
            for c in ctx.antichain(theta)? {
                let mut lower = Vec::with_capacity(n);
                let mut upper = Vec::with_capacity(n);
                for q in 0..n {
                    let total = c.get(StateId(q)) + c.get(StateId(n + q));
                    lower.push(total);
                    upper.push(if theta.support.contains(StateId(n + q)) {
                        None
                    } else {
                        Some(total)
                    });
                }
                cubes.push(Cube::from_u64(lower, upper));
            }
        }
    }
    Ok(CountingConstraint::new(arity, cubes).simplify())
}

/// The backward reachability closure: the forward closure on the reversed
/// network.
pub fn prestar(rbn: &Rbn, a: &CountingConstraint, budget: Budget) -> Result<CountingConstraint> {
    poststar(&rbn.reverse(), a, budget)
}
