//! Bundle-moving operations on envy graphs and the potential that
//! guarantees their termination.

use std::cmp::Ordering;
use std::fmt;

use num_traits::{One, Zero};

use crate::allocation::{Allocation, Bundle};
use crate::error::{Error, Result};
use crate::fairness::{
    check_alpha_efx, critical_goods, enforce_ordering_invariant, one_half, three_halves, two_thirds, BundleValues,
};
use crate::graph::{EnvyGraph, GraphKind};
use crate::instance::{Agent, Good, Instance};
use crate::value::{Rational, Value};

pub const CYCLE_BUDGET: usize = 100_000;

/// `w(1) = 1`, `w(s) = 3/2` for `s >= 2`.
pub fn weight(size: usize) -> Rational {
    if size >= 2 {
        three_halves()
    } else {
        Rational::one()
    }
}

/// The product of `w(|X_a|)·v_a(X_a)` over agents holding something.
///
/// Each factor is `base + tag·ε`, so the product is a polynomial in ε;
/// polynomials compare coefficient by coefficient from the constant term.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Potential {
    coeffs: Vec<Rational>,
}

impl Potential {
    pub fn one() -> Self {
        Potential {
            coeffs: vec![Rational::one()],
        }
    }

    fn mul_factor(&mut self, f: &Value) {
        let mut next = vec![Rational::zero(); self.coeffs.len() + 1];
        for (i, c) in self.coeffs.iter().enumerate() {
            next[i] += c * f.base();
            next[i + 1] += c * f.tag();
        }
        while next.len() > 1 && next.last().is_some_and(|c| c.is_zero()) {
            next.pop();
        }
        self.coeffs = next;
    }

    /// The tag-free product.
    pub fn base(&self) -> &Rational {
        &self.coeffs[0]
    }

    pub fn coefficients(&self) -> &[Rational] {
        &self.coeffs
    }
}

impl Ord for Potential {
    fn cmp(&self, other: &Self) -> Ordering {
        let zero = Rational::zero();
        let n = self.coeffs.len().max(other.coeffs.len());
        for i in 0..n {
            let a = self.coeffs.get(i).unwrap_or(&zero);
            let b = other.coeffs.get(i).unwrap_or(&zero);
            match a.cmp(b) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for Potential {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.coeffs[0])
    }
}

pub fn potential_phi(inst: &Instance, x: &Allocation) -> Potential {
    let mut phi = Potential::one();
    for (a, b) in x.bundles.iter().enumerate() {
        if b.is_empty() {
            continue;
        }
        phi.mul_factor(&inst.agent_value(a, b).scale(&weight(b.len())));
    }
    phi
}

/// `max_a (3/2 · v_a(M))^n`, which no reachable potential exceeds.
pub fn potential_upper_bound(inst: &Instance) -> Rational {
    let all: Vec<Good> = (0..inst.num_goods()).collect();
    let best = (0..inst.num_types())
        .map(|t| inst.value(t, &all).base() * three_halves())
        .max()
        .unwrap_or_default();
    num_traits::pow(best, inst.num_agents())
}

fn rotate(x: &Allocation, c: &[Agent]) -> Allocation {
    let mut y = x.clone();
    for (i, &a) in c.iter().enumerate() {
        y.bundles[a] = x.bundles[c[(i + 1) % c.len()]].clone();
    }
    y
}

/// Every agent on `c` takes the bundle of its successor.
pub fn cycle_resolution(inst: &Instance, x: &Allocation, g: &EnvyGraph, c: &[Agent]) -> Result<Allocation> {
    if !g.is_cycle(c) {
        return Err(Error::contract(format!("{c:?} is not a cycle of the {:?} graph", g.kind())));
    }
    let mut y = rotate(x, c);
    enforce_ordering_invariant(inst, &mut y);
    Ok(y)
}

pub type CycleObserver<'o> = dyn FnMut(&[Agent], &Allocation, &Allocation) -> Result<()> + 'o;

pub fn all_cycles_resolution(inst: &Instance, x: &Allocation, kind: GraphKind) -> Result<Allocation> {
    all_cycles_resolution_with(inst, x, kind, &mut |_, _, _| Ok(()))
}

/// Resolves cycles of the `kind` graph, rebuilding it after each, until it
/// is acyclic. Plain resolutions must leave every cycle agent strictly better;
/// reduced and enhanced ones must strictly raise the potential.
pub fn all_cycles_resolution_with(
    inst: &Instance,
    x: &Allocation,
    kind: GraphKind,
    observer: &mut CycleObserver<'_>,
) -> Result<Allocation> {
    let mut cur = x.clone();
    for _ in 0..CYCLE_BUDGET {
        let g = EnvyGraph::build(inst, &cur, kind);
        let Some(c) = g.find_cycle() else {
            return Ok(cur);
        };
        let mut next = rotate(&cur, &c);
        match kind {
            GraphKind::Plain => {
                for &a in &c {
                    if inst.agent_value(a, &next.bundles[a]) <= inst.agent_value(a, &cur.bundles[a]) {
                        return Err(Error::invariant(format!("agent {a} did not gain on plain cycle {c:?}")));
                    }
                }
            }
            GraphKind::Reduced | GraphKind::Enhanced => {
                let before = potential_phi(inst, &cur);
                let after = potential_phi(inst, &next);
                if after <= before {
                    return Err(Error::invariant(format!(
                        "potential did not increase on {kind:?} cycle {c:?}: {before} -> {after}"
                    )));
                }
            }
        }
        enforce_ordering_invariant(inst, &mut next);
        observer(&c, &cur, &next)?;
        cur = next;
    }
    Err(Error::Budget {
        context: "cycle resolution",
        budget: CYCLE_BUDGET,
        trace: Box::default(),
    })
}

/// Shifts bundles back along `pi`: `i_k` takes `X_{i_{k+1}}`. The first
/// agent's old bundle goes to the pool and the last agent is left empty.
pub fn path_resolution(inst: &Instance, x: &Allocation, g: &EnvyGraph, pi: &[Agent]) -> Result<Allocation> {
    if !g.is_path(pi) {
        return Err(Error::contract(format!("{pi:?} is not a path of the {:?} graph", g.kind())));
    }
    let mut y = x.clone();
    let freed = x.bundles[pi[0]].clone();
    for k in 0..pi.len() - 1 {
        y.bundles[pi[k]] = x.bundles[pi[k + 1]].clone();
    }
    y.bundles[pi[pi.len() - 1]] = Bundle::new();
    y.pool.extend(freed);
    debug_assert!(y.validate(inst).is_ok());
    Ok(y)
}

fn argmax_for(inst: &Instance, a: Agent, goods: &Bundle) -> Option<Good> {
    let t = inst.group_of(a);
    goods.iter().copied().max_by(|&p, &q| inst.good_value(t, p).cmp(inst.good_value(t, q)))
}

/// Path resolution from a two-good source `s` to `i`, after which `i` holds
/// its favourite pool good together with its favourite good of `X_s`.
pub fn path_resolution_star(inst: &Instance, x: &Allocation, g: &EnvyGraph, pi: &[Agent]) -> Result<Allocation> {
    let (&s, &i) = match (pi.first(), pi.last()) {
        (Some(s), Some(i)) => (s, i),
        _ => return Err(Error::contract("empty path")),
    };
    if x.len(s) != 2 {
        return Err(Error::contract(format!("path source {s} holds {} goods, need 2", x.len(s))));
    }
    if x.pool.is_empty() {
        return Err(Error::contract("path resolution needs a nonempty pool"));
    }
    if !EnvyGraph::build(inst, x, GraphKind::Reduced).is_source(s) {
        return Err(Error::contract(format!("{s} is not a source of the reduced graph")));
    }
    let g_s = argmax_for(inst, i, &x.bundles[s]).expect("two goods");
    let g_star = argmax_for(inst, i, &x.pool).expect("nonempty pool");
    let mut y = path_resolution(inst, x, g, pi)?;
    y.pool.remove(&g_s);
    y.pool.remove(&g_star);
    y.bundles[i] = [g_s, g_star].into();
    enforce_ordering_invariant(inst, &mut y);
    Ok(y)
}

/// Handles a one-good pool that some singleton agent values above 2/3 of
/// its bundle: that agent is reached from a reduced-graph source and takes
/// the good plus one good of the source's bundle.
pub fn singleton_pool(inst: &Instance, x: &Allocation) -> Result<Allocation> {
    if x.pool.len() != 1 {
        return Err(Error::contract(format!("singleton pool needs one pool good, found {}", x.pool.len())));
    }
    let g = *x.pool.iter().next().expect("one good");
    let vals = BundleValues::new(inst, x);
    let tt = two_thirds();
    let i = (0..inst.num_agents())
        .find(|&a| x.len(a) == 1 && *inst.good_value(inst.group_of(a), g) > vals.own(a).scale(&tt))
        .ok_or_else(|| Error::contract("no singleton agent values the pool good above 2/3 of its bundle"))?;
    let gr = EnvyGraph::build(inst, x, GraphKind::Reduced);
    if gr.is_source(i) {
        return Err(Error::contract(format!("agent {i} is a source of the reduced graph")));
    }
    let sources = gr.sources();
    if let Some(&s) = sources.iter().find(|&&s| x.len(s) == 1) {
        return Err(Error::contract(format!("reduced-graph source {s} holds a single good")));
    }
    let pi = sources
        .iter()
        .find_map(|&s| gr.find_path(s, i))
        .ok_or_else(|| Error::invariant(format!("agent {i} is not reachable from any reduced-graph source")))?;
    let y = path_resolution_star(inst, x, &gr, &pi)?;
    if y.pool.len() != 1 || y.pool.contains(&g) {
        return Err(Error::invariant("singleton pool did not trade the pool good"));
    }
    Ok(y)
}

/// Ordered-by-value group comparison: every agent is at least as well off
/// as the agent in the same rank before.
pub fn weakly_dominates(inst: &Instance, after: &Allocation, before: &Allocation) -> bool {
    (0..inst.num_types()).all(|t| {
        let mut a: Vec<Value> = inst.group_agents(t).map(|j| inst.value(t, &after.bundles[j])).collect();
        let mut b: Vec<Value> = inst.group_agents(t).map(|j| inst.value(t, &before.bundles[j])).collect();
        a.sort();
        b.sort();
        a.iter().zip(&b).all(|(p, q)| p >= q)
    })
}

pub fn ece_completion(inst: &Instance, x: &Allocation, alpha: &Rational) -> Result<Allocation> {
    ece_completion_with(inst, x, alpha, &mut |_, _, _| Ok(()), &mut |_, _, _| Ok(()))
}

/// Hands out the pool with envy-cycle elimination on the plain graph: each
/// round clears cycles, then the first source takes its favourite pool good.
pub fn ece_completion_with(
    inst: &Instance,
    x: &Allocation,
    alpha: &Rational,
    on_cycle: &mut CycleObserver<'_>,
    on_add: &mut dyn FnMut(Agent, Good, &Allocation) -> Result<()>,
) -> Result<Allocation> {
    let beta = one_half();
    if let Some((g, who)) = critical_goods(inst, x, &beta).into_iter().next() {
        return Err(Error::contract(format!("pool good {g} is critical for agents {who:?}")));
    }
    let pre = check_alpha_efx(inst, x, alpha)?;
    if !pre.pass {
        return Err(Error::contract("ECE completion needs an alpha-EFX start"));
    }
    let mut cur = x.clone();
    loop {
        cur = all_cycles_resolution_with(inst, &cur, GraphKind::Plain, on_cycle)?;
        if cur.pool.is_empty() {
            break;
        }
        let gp = EnvyGraph::build(inst, &cur, GraphKind::Plain);
        let s = *gp.sources().first().ok_or_else(|| Error::invariant("acyclic plain graph without a source"))?;
        let g = argmax_for(inst, s, &cur.pool).expect("nonempty pool");
        cur.pool.remove(&g);
        cur.bundles[s].insert(g);
        enforce_ordering_invariant(inst, &mut cur);
        on_add(s, g, &cur)?;
    }
    let target = if alpha < &two_thirds() { alpha.clone() } else { two_thirds() };
    let cert = check_alpha_efx(inst, &cur, &target)?;
    if !cert.pass {
        return Err(Error::invariant(format!(
            "ECE completion lost {target}-EFX: {:?}",
            cert.violations.first()
        )));
    }
    if !weakly_dominates(inst, &cur, x) {
        return Err(Error::invariant("ECE completion made some agent worse off"));
    }
    Ok(cur)
}
