//! (1-ε)-EFX allocations with a small set of unallocated goods (the
//! charity), for instances with k agent types.
//!
//! The loop keeps the plain envy graph acyclic and applies Pareto
//! improvements until none is left: heavy envy of the pool, goods nobody
//! finds valuable, goods a source can absorb, and rainbow cycles of the
//! group champion graph.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::allocation::{Allocation, Bundle};
use crate::error::{Error, Result};
use crate::fairness::{check_alpha_efx, check_charity, enforce_ordering_invariant, leading_agents, Certificate};
use crate::graph::{EnvyGraph, GraphKind};
use crate::instance::{Agent, Good, Instance};
use crate::ppa::seed_allocation;
use crate::resolution::{all_cycles_resolution_with, weakly_dominates};
use crate::trace::{Trace, TraceEvent, TraceHeader};
use crate::value::{ceil, format_rational, Rational, Value};

/// Node expansions allowed per rainbow search.
pub const RAINBOW_BUDGET: usize = 100_000;
/// Rule applications allowed per run.
pub const CHARITY_BUDGET: usize = 100_000;

fn check_eps(eps: &Rational) -> Result<()> {
    if eps <= &Rational::zero() || eps > &Rational::new(1.into(), 2.into()) {
        return Err(Error::input(format!("epsilon must lie in (0, 1/2], got {}", format_rational(eps))));
    }
    Ok(())
}

fn keep(eps: &Rational) -> Rational {
    Rational::one() - eps
}

/// `v_a(X_a) < (1-ε)·v_a(S)`.
pub fn heavy_envies(inst: &Instance, x: &Allocation, a: Agent, s: &Bundle, eps: &Rational) -> bool {
    inst.agent_value(a, &x.bundles[a]) < inst.agent_value(a, s).scale(&keep(eps))
}

/// `v_a(g) > ε·v_a(X_a)`.
pub fn is_valuable(inst: &Instance, x: &Allocation, a: Agent, g: Good, eps: &Rational) -> bool {
    *inst.good_value(inst.group_of(a), g) > inst.agent_value(a, &x.bundles[a]).scale(eps)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub claimant: Agent,
    pub subset: Bundle,
    pub origin: Bundle,
}

/// Checks both witness conditions: the claimant heavily envies `subset`
/// and nobody envies `subset` minus one good beyond the 1-ε factor.
pub fn is_witness(inst: &Instance, x: &Allocation, w: &Witness, eps: &Rational) -> bool {
    if !w.subset.is_subset(&w.origin) || !heavy_envies(inst, x, w.claimant, &w.subset, eps) {
        return false;
    }
    let f = keep(eps);
    (0..inst.num_agents()).all(|b| {
        let own = inst.agent_value(b, &x.bundles[b]);
        let total = inst.agent_value(b, &w.subset);
        w.subset
            .iter()
            .all(|&h| own >= (&total - inst.good_value(inst.group_of(b), h)).scale(&f))
    })
}

/// Peels goods off `t` while someone still heavily envies what is left
/// after removing one good; the last such agent is the claimant.
pub fn most_envious_witness(inst: &Instance, x: &Allocation, t: &Bundle, eps: &Rational) -> Result<Witness> {
    let n = inst.num_agents();
    let Some(mut claimant) = (0..n).find(|&a| heavy_envies(inst, x, a, t, eps)) else {
        return Err(Error::contract(format!("nobody heavily envies {t:?}")));
    };
    let f = keep(eps);
    let own: Vec<Value> = (0..n).map(|b| inst.agent_value(b, &x.bundles[b])).collect();
    let mut s = t.clone();
    'peel: loop {
        for (b, own_b) in own.iter().enumerate() {
            let t_b = inst.group_of(b);
            let total = inst.value(t_b, &s);
            for &h in &s {
                if *own_b < (&total - inst.good_value(t_b, h)).scale(&f) {
                    s.remove(&h);
                    claimant = b;
                    continue 'peel;
                }
            }
        }
        break;
    }
    Ok(Witness {
        claimant,
        subset: s,
        origin: t.clone(),
    })
}

fn sum_values(inst: &Instance, x: &Allocation) -> Value {
    (0..inst.num_agents()).map(|a| inst.agent_value(a, &x.bundles[a])).fold(Value::zero(), |acc, v| acc + v)
}

/// Every group sorted by value is pointwise no worse and the total grew.
fn check_improvement(inst: &Instance, before: &Allocation, after: &Allocation, eps: &Rational, rule: &str) -> Result<()> {
    after.validate(inst)?;
    if !weakly_dominates(inst, after, before) || sum_values(inst, after) <= sum_values(inst, before) {
        return Err(Error::invariant(format!("rule {rule} is not a Pareto improvement")));
    }
    let cert = check_alpha_efx(inst, after, &keep(eps))?;
    if !cert.pass {
        return Err(Error::invariant(format!(
            "rule {rule} broke (1-ε)-EFX: {:?}",
            cert.violations.first()
        )));
    }
    Ok(())
}

/// The claimant of a witness on the pool swaps its bundle for the witness
/// subset; the old bundle returns to the pool.
pub fn improve_pool_envy(inst: &Instance, x: &Allocation, eps: &Rational) -> Result<Option<(Allocation, Witness)>> {
    if !(0..inst.num_agents()).any(|a| heavy_envies(inst, x, a, &x.pool, eps)) {
        return Ok(None);
    }
    let w = most_envious_witness(inst, x, &x.pool, eps)?;
    let mut y = x.clone();
    let old = std::mem::replace(&mut y.bundles[w.claimant], w.subset.clone());
    for g in &w.subset {
        y.pool.remove(g);
    }
    y.pool.extend(old);
    enforce_ordering_invariant(inst, &mut y);
    Ok(Some((y, w)))
}

/// A pool good valuable to nobody goes to the first source of the plain graph.
pub fn allocate_nonvaluable(inst: &Instance, x: &Allocation, eps: &Rational) -> Result<Option<(Allocation, Agent, Good)>> {
    let n = inst.num_agents();
    let Some(g) = x.pool.iter().copied().find(|&g| (0..n).all(|a| !is_valuable(inst, x, a, g, eps))) else {
        return Ok(None);
    };
    let plain = EnvyGraph::build(inst, x, GraphKind::Plain);
    if !plain.is_acyclic() {
        return Err(Error::contract("allocate_nonvaluable needs an acyclic envy graph"));
    }
    let s = *plain.sources().first().ok_or_else(|| Error::invariant("acyclic graph without a source"))?;
    let mut y = x.clone();
    y.pool.remove(&g);
    y.bundles[s].insert(g);
    enforce_ordering_invariant(inst, &mut y);
    Ok(Some((y, s, g)))
}

/// First (source, pool good) pair, in ascending order, such that no other
/// agent heavily envies `X_s ∪ {g}`; the source takes the good.
pub fn absorb(inst: &Instance, x: &Allocation, eps: &Rational) -> Result<Option<(Allocation, Agent, Good)>> {
    let plain = EnvyGraph::build(inst, x, GraphKind::Plain);
    if !plain.is_acyclic() {
        return Err(Error::contract("absorb needs an acyclic envy graph"));
    }
    for s in plain.sources() {
        for &g in &x.pool {
            let mut t = x.bundles[s].clone();
            t.insert(g);
            if (0..inst.num_agents()).all(|a| a == s || !heavy_envies(inst, x, a, &t, eps)) {
                let mut y = x.clone();
                y.pool.remove(&g);
                y.bundles[s] = t;
                enforce_ordering_invariant(inst, &mut y);
                return Ok(Some((y, s, g)));
            }
        }
    }
    Ok(None)
}

/// Leading agents that find `g` valuable.
fn demand(inst: &Instance, x: &Allocation, leaders: &[Agent], g: Good, eps: &Rational) -> Vec<Agent> {
    leaders.iter().copied().filter(|&a| is_valuable(inst, x, a, g, eps)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChampionVertex {
    pub part: usize,
    pub good: Good,
    pub agent: Agent,
    pub source: Agent,
}

/// Multipartite graph with one part per low-demand pool good. The vertex
/// `(g, a)` stands for the source assigned to leading agent `a`.
#[derive(Clone, Debug)]
pub struct GroupChampionGraph {
    pub parts: Vec<Good>,
    pub vertices: Vec<ChampionVertex>,
    pub out: Vec<Vec<usize>>,
    pub source_of: BTreeMap<Agent, Agent>,
    /// Witness of `X_s ∪ {g}` keyed by `(s, g)`, for pairs someone heavily envies.
    pub witnesses: BTreeMap<(Agent, Good), Witness>,
}

impl GroupChampionGraph {
    pub fn num_parts(&self) -> usize {
        self.parts.len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.out[u].contains(&v)
    }
}

/// Vertices per part are the leading agents valuing the part's good; an
/// edge `(g_i, a) -> (g_j, b)` means `a` heavily envies the witness of
/// `X_{s(b)} ∪ {g_i}`.
pub fn build_group_champion_graph(inst: &Instance, x: &Allocation, eps: &Rational, d: usize) -> Result<GroupChampionGraph> {
    let n = inst.num_agents();
    let plain = EnvyGraph::build(inst, x, GraphKind::Plain);
    if !plain.is_acyclic() {
        return Err(Error::contract("champion graph needs an acyclic envy graph"));
    }
    if (0..n).any(|a| heavy_envies(inst, x, a, &x.pool, eps)) {
        return Err(Error::contract("champion graph needs a pool nobody heavily envies"));
    }
    if let Some(a) = (0..n).find(|&a| x.bundles[a].is_empty()) {
        return Err(Error::contract(format!("agent {a} holds no good")));
    }
    let leaders = leading_agents(inst, x)?;
    let sources = plain.sources();
    let mut source_of = BTreeMap::new();
    for &a in &leaders {
        let s = sources
            .iter()
            .copied()
            .find(|&s| plain.find_path(s, a).is_some())
            .ok_or_else(|| Error::invariant(format!("leading agent {a} is reachable from no source")))?;
        source_of.insert(a, s);
    }

    let mut parts = Vec::new();
    let mut vertices = Vec::new();
    for &g in &x.pool {
        let fans = demand(inst, x, &leaders, g, eps);
        if fans.len() > d {
            continue;
        }
        let part = parts.len();
        parts.push(g);
        for a in fans {
            vertices.push(ChampionVertex {
                part,
                good: g,
                agent: a,
                source: source_of[&a],
            });
        }
    }

    let mut witnesses = BTreeMap::new();
    for &g in &parts {
        let targets: BTreeSet<Agent> = vertices.iter().map(|v| v.source).collect();
        for s in targets {
            let mut t = x.bundles[s].clone();
            t.insert(g);
            if (0..n).any(|a| heavy_envies(inst, x, a, &t, eps)) {
                witnesses.insert((s, g), most_envious_witness(inst, x, &t, eps)?);
            }
        }
    }

    let mut out = vec![Vec::new(); vertices.len()];
    for (ui, u) in vertices.iter().enumerate() {
        for (vi, v) in vertices.iter().enumerate() {
            if u.part == v.part {
                continue;
            }
            if let Some(w) = witnesses.get(&(v.source, u.good)) {
                if heavy_envies(inst, x, u.agent, &w.subset, eps) {
                    out[ui].push(vi);
                }
            }
        }
    }
    let g = GroupChampionGraph {
        parts,
        vertices,
        out,
        source_of,
        witnesses,
    };
    check_champion_graph(&g, d)?;
    Ok(g)
}

/// Part sizes stay within `d` and every vertex is entered from every other part.
fn check_champion_graph(g: &GroupChampionGraph, d: usize) -> Result<()> {
    let mut size = vec![0usize; g.num_parts()];
    for v in &g.vertices {
        size[v.part] += 1;
    }
    if let Some(p) = size.iter().position(|&s| s == 0 || s > d) {
        return Err(Error::invariant(format!("part {p} has {} vertices, expected 1..={d}", size[p])));
    }
    let mut entered: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); g.vertices.len()];
    for (u, row) in g.out.iter().enumerate() {
        for &v in row {
            entered[v].insert(g.vertices[u].part);
        }
    }
    for (v, parts) in entered.iter().enumerate() {
        if parts.len() + 1 != g.num_parts() {
            return Err(Error::invariant(format!(
                "champion vertex {v} is entered from {} of the {} other parts",
                parts.len(),
                g.num_parts() - 1
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RainbowSearch {
    Found(Vec<usize>),
    None,
    /// The budget ran out before the search space was covered.
    Limited,
}

/// DFS for a cycle visiting each part at most once. Cycles are reported
/// from their least vertex, so each is met once.
pub fn find_rainbow_cycle(g: &GroupChampionGraph, budget: usize) -> RainbowSearch {
    let nv = g.vertices.len();
    let mut spent = 0usize;
    for start in 0..nv {
        let mut used = vec![false; g.num_parts()];
        used[g.vertices[start].part] = true;
        let mut path = vec![start];
        let mut stack: Vec<usize> = vec![0];
        while let Some(pos) = stack.last_mut() {
            let v = *path.last().expect("path tracks stack");
            if let Some(&w) = g.out[v].get(*pos) {
                *pos += 1;
                if w == start {
                    if path.len() >= 2 {
                        return RainbowSearch::Found(path);
                    }
                    continue;
                }
                if w < start || used[g.vertices[w].part] {
                    continue;
                }
                spent += 1;
                if spent > budget {
                    return RainbowSearch::Limited;
                }
                used[g.vertices[w].part] = true;
                path.push(w);
                stack.push(0);
            } else {
                stack.pop();
                let v = path.pop().expect("path tracks stack");
                used[g.vertices[v].part] = false;
            }
        }
    }
    RainbowSearch::None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Move {
    /// Take the bundle of the next agent.
    Envy(Agent),
    /// Take the witness subset of `X_target ∪ {good}`.
    Champion { target: Agent, good: Good },
}

impl Move {
    fn target(self) -> Agent {
        match self {
            Move::Envy(c) => c,
            Move::Champion { target, .. } => target,
        }
    }
}

/// Composes source-to-agent envy paths with the champion edges of the
/// rainbow cycle, cuts a simple agent cycle out of the closed walk and
/// applies it.
pub fn resolve_rainbow_cycle(
    inst: &Instance,
    x: &Allocation,
    cycle: &[usize],
    g: &GroupChampionGraph,
    eps: &Rational,
) -> Result<(Allocation, Vec<Agent>)> {
    let len = cycle.len();
    if len < 2 || (0..len).any(|i| !g.has_edge(cycle[i], cycle[(i + 1) % len])) {
        return Err(Error::contract(format!("{cycle:?} is not a cycle of the champion graph")));
    }
    let plain = EnvyGraph::build(inst, x, GraphKind::Plain);
    let mut walk: Vec<(Agent, Move)> = Vec::new();
    for i in 0..len {
        let u = g.vertices[cycle[i]];
        let v = g.vertices[cycle[(i + 1) % len]];
        let path = plain
            .find_path(u.source, u.agent)
            .ok_or_else(|| Error::contract(format!("agent {} not reachable from {}", u.agent, u.source)))?;
        for w in path.windows(2) {
            walk.push((w[0], Move::Envy(w[1])));
        }
        walk.push((
            u.agent,
            Move::Champion {
                target: v.source,
                good: u.good,
            },
        ));
    }
    let mut seen: BTreeMap<Agent, usize> = BTreeMap::new();
    let mut simple = None;
    for (i, &(a, _)) in walk.iter().enumerate() {
        if let Some(&j) = seen.get(&a) {
            simple = Some(walk[j..i].to_vec());
            break;
        }
        seen.insert(a, i);
    }
    let simple = simple.unwrap_or(walk);
    let mut y = x.clone();
    for &(a, mv) in &simple {
        y.bundles[a] = match mv {
            Move::Envy(c) => x.bundles[c].clone(),
            Move::Champion { target, good } => {
                let w = g
                    .witnesses
                    .get(&(target, good))
                    .ok_or_else(|| Error::invariant(format!("no witness for source {target} and good {good}")))?;
                if !heavy_envies(inst, x, a, &w.subset, eps) {
                    return Err(Error::contract(format!("agent {a} does not heavily envy the witness of {target}")));
                }
                w.subset.clone()
            }
        };
    }
    for (i, &(a, mv)) in simple.iter().enumerate() {
        let next = simple[(i + 1) % simple.len()].0;
        if mv.target() != next {
            return Err(Error::invariant("rainbow walk is not closed"));
        }
        if inst.agent_value(a, &y.bundles[a]) <= inst.agent_value(a, &x.bundles[a]) {
            return Err(Error::invariant(format!("agent {a} did not gain on the rainbow cycle")));
        }
    }
    y.refill_pool(inst.num_goods());
    enforce_ordering_invariant(inst, &mut y);
    Ok((y, simple.iter().map(|&(a, _)| a).collect()))
}

fn bitlen(d: usize) -> usize {
    (usize::BITS - d.leading_zeros()) as usize
}

fn high_demand_bound(k: usize, eps: &Rational, d: usize) -> usize {
    let q = Rational::from_integer((2 * k).into()) / (eps * Rational::from_integer(d.into()));
    ceil(&q).try_into().expect("bound fits in usize")
}

/// The part count `d` that balances the estimated rainbow-free part count
/// `d·bitlen(d)` against the high-demand bound `⌈2k/(εd)⌉`.
pub fn choose_d(k: usize, eps: &Rational) -> Result<usize> {
    check_eps(eps)?;
    if k == 0 {
        return Err(Error::input("k must be positive"));
    }
    let top = k * high_demand_bound(1, eps, 1);
    let mut best = (usize::MAX, 1);
    for d in 1..=top {
        let est = d * bitlen(d) + high_demand_bound(k, eps, d);
        if est < best.0 {
            best = (est, d);
        }
    }
    Ok(best.1)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RulesFired {
    pub pool_envy: usize,
    pub nonvaluable: usize,
    pub absorb: usize,
    pub rainbow: usize,
    pub pool_envy_strict: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharityReport {
    pub epsilon: String,
    pub d: usize,
    pub charity_size: usize,
    pub high_demand: usize,
    pub high_demand_bound: usize,
    pub low_demand_parts: usize,
    pub rules_fired: RulesFired,
    pub cycle_resolutions: usize,
    pub search_limited: bool,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, Default)]
pub struct CharityOptions {
    pub d: Option<usize>,
    /// Also remove plain (unscaled) envy of the pool.
    pub strict: bool,
}

#[derive(Clone, Debug)]
pub struct CharityResult {
    pub allocation: Allocation,
    pub report: CharityReport,
    pub trace: Trace,
}

pub fn charity_header(eps: &Rational, d: usize, strict: bool) -> TraceHeader {
    TraceHeader {
        algo: "charity".into(),
        epsilon: Some(format_rational(eps)),
        d: Some(d),
        strict,
    }
}

fn event(inst: &Instance, iter: usize, step: &str, actors: Vec<Agent>, before: &Allocation, after: &Allocation) -> TraceEvent {
    let mut ev = TraceEvent::new(inst, iter, step, actors, after);
    ev.pool_delta = Some(after.pool.len() as i64 - before.pool.len() as i64);
    ev
}

/// Full loop from the seed allocation. The result is (1-ε)-EFX, nobody
/// heavily envies the pool and every pool good is valuable to someone.
pub fn charity_allocate(inst: &Instance, eps: &Rational, opts: &CharityOptions) -> Result<CharityResult> {
    check_eps(eps)?;
    let n = inst.num_agents();
    if inst.num_goods() < n {
        return Err(Error::input(format!(
            "charity allocation needs at least one good per agent: {} goods, {n} agents",
            inst.num_goods()
        )));
    }
    let k = inst.num_types();
    let d = match opts.d {
        Some(0) => return Err(Error::input("d must be positive")),
        Some(d) => d,
        None => choose_d(k, eps)?,
    };
    let zero = Rational::zero();
    let mut trace = Trace::with_header(charity_header(eps, d, opts.strict));
    let mut x = seed_allocation(inst)?;
    trace.push(TraceEvent::new(inst, 0, "seed", Vec::new(), &x));
    let mut fired = RulesFired::default();
    let mut cycles = 0usize;
    let mut search_limited = false;
    let mut iter = 0usize;
    let fail = |e: Error, t: &Trace| e.with_trace(t);

    let (x, parts) = loop {
        iter += 1;
        if iter > CHARITY_BUDGET {
            return Err(Error::Budget {
                context: "charity loop",
                budget: CHARITY_BUDGET,
                trace: Box::new(trace),
            });
        }
        let mut cycle_events = Vec::new();
        let acyclic = all_cycles_resolution_with(inst, &x, GraphKind::Plain, &mut |c, _, after| {
            cycle_events.push(TraceEvent::new(inst, iter, "cycle_plain", c.to_vec(), after));
            Ok(())
        });
        cycles += cycle_events.len();
        trace.events.extend(cycle_events);
        x = acyclic.map_err(|e| fail(e, &trace))?;

        if let Some((y, w)) = improve_pool_envy(inst, &x, eps)? {
            check_improvement(inst, &x, &y, eps, "pool_envy").map_err(|e| fail(e, &trace))?;
            trace.push(event(inst, iter, "pool_envy", vec![w.claimant], &x, &y));
            fired.pool_envy += 1;
            x = y;
            continue;
        }
        if opts.strict {
            if let Some((y, w)) = improve_pool_envy(inst, &x, &zero)? {
                check_improvement(inst, &x, &y, eps, "pool_envy_strict").map_err(|e| fail(e, &trace))?;
                trace.push(event(inst, iter, "pool_envy_strict", vec![w.claimant], &x, &y));
                fired.pool_envy_strict += 1;
                x = y;
                continue;
            }
        }
        if let Some((y, s, _)) = allocate_nonvaluable(inst, &x, eps)? {
            check_improvement(inst, &x, &y, eps, "nonvaluable").map_err(|e| fail(e, &trace))?;
            trace.push(event(inst, iter, "nonvaluable", vec![s], &x, &y));
            fired.nonvaluable += 1;
            x = y;
            continue;
        }
        if let Some((y, s, _)) = absorb(inst, &x, eps)? {
            check_improvement(inst, &x, &y, eps, "absorb").map_err(|e| fail(e, &trace))?;
            trace.push(event(inst, iter, "absorb", vec![s], &x, &y));
            fired.absorb += 1;
            x = y;
            continue;
        }
        let g = build_group_champion_graph(inst, &x, eps, d).map_err(|e| fail(e, &trace))?;
        match find_rainbow_cycle(&g, RAINBOW_BUDGET) {
            RainbowSearch::Found(c) => {
                let (y, agents) = resolve_rainbow_cycle(inst, &x, &c, &g, eps).map_err(|e| fail(e, &trace))?;
                check_improvement(inst, &x, &y, eps, "rainbow").map_err(|e| fail(e, &trace))?;
                trace.push(event(inst, iter, "rainbow", agents, &x, &y));
                fired.rainbow += 1;
                x = y;
            }
            RainbowSearch::None => break (x, g.num_parts()),
            RainbowSearch::Limited => {
                search_limited = true;
                break (x, g.num_parts());
            }
        }
    };

    let leaders = leading_agents(inst, &x)?;
    let high_demand = x.pool.iter().filter(|&&g| demand(inst, &x, &leaders, g, eps).len() > d).count();
    let bound = high_demand_bound(k, eps, d);
    if high_demand > bound {
        return Err(Error::invariant(format!("{high_demand} high-demand goods exceed the bound {bound}"))
            .with_trace(&trace));
    }
    let certificate = check_alpha_efx(inst, &x, &keep(eps))?.merge(check_charity(inst, &x, Some(eps))?);
    Ok(CharityResult {
        report: CharityReport {
            epsilon: format_rational(eps),
            d,
            charity_size: x.pool.len(),
            high_demand,
            high_demand_bound: bound,
            low_demand_parts: parts,
            rules_fired: fired,
            cycle_resolutions: cycles,
            search_limited,
            certificate,
        },
        allocation: x,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::rational;

    #[test]
    fn heavy_envy_basics() {
        let inst = Instance::from_json_str(r#"{"m":3,"types":[{"count":1,"values":[1,2,1]}]}"#).unwrap();
        let x = Allocation::from_json_str(r#"{"bundles":[[0]],"pool":[1,2]}"#).unwrap();
        let half = rational(1, 2);
        assert!(!heavy_envies(&inst, &x, 0, &Bundle::new(), &half));
        assert!(heavy_envies(&inst, &x, 0, &[1, 2].into(), &half));
        // Own (1, 2^0) against half of (2, 2^1): exactly equal, so no heavy envy.
        assert!(!heavy_envies(&inst, &x, 0, &[1].into(), &half));
    }

    #[test]
    fn singleton_witness() {
        let inst = Instance::from_json_str(r#"{"m":2,"types":[{"count":1,"values":[1,5]}]}"#).unwrap();
        let x = Allocation::from_json_str(r#"{"bundles":[[0]],"pool":[1]}"#).unwrap();
        let w = most_envious_witness(&inst, &x, &[1].into(), &rational(1, 4)).unwrap();
        assert_eq!(w.claimant, 0);
        assert_eq!(w.subset, [1].into());
        assert!(is_witness(&inst, &x, &w, &rational(1, 4)));
    }

    #[test]
    fn choose_d_small_k() {
        // d=1: 1 + 4 = 5; d=2: 4 + 2 = 6; d=3: 6 + 2; d=4: 12 + 1.
        assert_eq!(choose_d(1, &rational(1, 2)).unwrap(), 1);
        assert!(choose_d(1, &rational(3, 4)).is_err());
    }

    #[test]
    fn one_agent_takes_all() {
        let inst = Instance::from_json_str(r#"{"m":3,"types":[{"count":1,"values":[1,2,3]}]}"#).unwrap();
        let r = charity_allocate(&inst, &rational(1, 4), &CharityOptions::default()).unwrap();
        assert_eq!(r.report.charity_size, 0);
        assert!(r.report.certificate.pass);
    }

    #[test]
    fn m_equal_n_keeps_seed() {
        let inst = Instance::from_json_str(r#"{"m":2,"types":[{"count":1,"values":[1,2]},{"count":1,"values":[2,1]}]}"#)
            .unwrap();
        let r = charity_allocate(&inst, &rational(1, 2), &CharityOptions::default()).unwrap();
        assert!(r.allocation.pool.is_empty());
        assert_eq!(r.report.rules_fired, RulesFired::default());
    }

    #[test]
    fn too_few_goods() {
        let inst = Instance::from_json_str(r#"{"m":1,"types":[{"count":2,"values":[1]}]}"#).unwrap();
        assert!(matches!(
            charity_allocate(&inst, &rational(1, 2), &CharityOptions::default()),
            Err(Error::Input(_))
        ));
    }
}
