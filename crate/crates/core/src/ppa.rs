//! The 3PA⁺ loop, with the extra four-group steps of the few-types variant.
//!
//! Each iteration fires the first applicable step. Every step keeps
//! bundles at size at most two, keeps singleton holders EFX and everybody
//! else 2/3-EFX; these are re-checked after every step.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::allocation::{Allocation, Bundle};
use crate::error::{Error, Result};
use crate::fairness::{
    efx_toward_with, enforce_ordering_invariant, group_minima, leading_agents, one_half, ordering_invariant_holds,
    three_halves, two_thirds, BundleValues,
};
use crate::graph::{leading_path, EnvyGraph, GraphKind};
use crate::instance::{Agent, Good, Instance};
use crate::resolution::{all_cycles_resolution_with, path_resolution_star, potential_phi, singleton_pool};
use crate::trace::{Trace, TraceEvent};
use crate::value::{Rational, Value};

pub const PPA_BUDGET: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StepId {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    S7,
    S8,
    S9,
    S9_1,
    S9_2Gate,
    S9_3,
    S9_4,
}

impl StepId {
    pub fn as_str(self) -> &'static str {
        match self {
            StepId::S1 => "S1",
            StepId::S2 => "S2",
            StepId::S3 => "S3",
            StepId::S4 => "S4",
            StepId::S5 => "S5",
            StepId::S6 => "S6",
            StepId::S7 => "S7",
            StepId::S8 => "S8",
            StepId::S9 => "S9",
            StepId::S9_1 => "S9_1",
            StepId::S9_2Gate => "S9_2_gate",
            StepId::S9_3 => "S9_3",
            StepId::S9_4 => "S9_4",
        }
    }

    pub fn parse(s: &str) -> Option<StepId> {
        use StepId::*;
        [S1, S2, S3, S4, S5, S6, S7, S8, S9, S9_1, S9_2Gate, S9_3, S9_4]
            .into_iter()
            .find(|id| id.as_str() == s)
    }
}

impl fmt::Display for StepId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per group, its bundles in ascending value order. Agent identity within
/// a group is irrelevant, so this is the allocation up to relabelling.
pub type Configuration = Vec<Vec<Vec<Good>>>;

pub fn configuration(inst: &Instance, x: &Allocation) -> Configuration {
    (0..inst.num_types())
        .map(|t| {
            let mut keyed: Vec<(Value, Vec<Good>)> = inst
                .group_agents(t)
                .map(|a| (inst.value(t, &x.bundles[a]), x.bundles[a].iter().copied().collect()))
                .collect();
            keyed.sort();
            keyed.into_iter().map(|(_, b)| b).collect()
        })
        .collect()
}

pub fn config_hash(c: &Configuration) -> String {
    let bytes = serde_json::to_vec(c).expect("configuration serialises");
    hex::encode(Sha256::digest(bytes))
}

/// Serial dictatorship in flat agent order: each agent takes its favourite
/// remaining good while goods last.
pub fn seed_allocation(inst: &Instance) -> Result<Allocation> {
    let mut x = Allocation::empty(inst);
    for a in 0..inst.num_agents() {
        let t = inst.group_of(a);
        let Some(g) = x.pool.iter().copied().max_by(|&p, &q| inst.good_value(t, p).cmp(inst.good_value(t, q)))
        else {
            break;
        };
        x.pool.remove(&g);
        x.bundles[a].insert(g);
    }
    enforce_ordering_invariant(inst, &mut x);
    if !EnvyGraph::build(inst, &x, GraphKind::Plain).is_acyclic() {
        return Err(Error::invariant("seed allocation has an envy cycle"));
    }
    Ok(x)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyViolation {
    pub property: u8,
    pub agent: Agent,
    pub detail: String,
}

/// The four post-conditions of the loop:
/// 1. singleton holders are EFX toward everybody;
/// 2. everybody is 2/3-EFX toward everybody;
/// 3. holders of two or more goods have no critical pool good;
/// 4. a singleton holder has at most one critical pool good, worth at most
///    2/3 of its bundle.
pub fn check_properties(inst: &Instance, x: &Allocation) -> Vec<PropertyViolation> {
    let mut out = check_efx_properties(inst, x);
    let half = one_half();
    let tt = two_thirds();
    for a in 0..inst.num_agents() {
        let t = inst.group_of(a);
        let own = inst.value(t, &x.bundles[a]);
        let critical: Vec<Good> = x
            .pool
            .iter()
            .copied()
            .filter(|&g| *inst.good_value(t, g) > own.scale(&half))
            .collect();
        match x.len(a) {
            0 => {}
            1 => {
                if critical.len() > 1 {
                    out.push(PropertyViolation {
                        property: 4,
                        agent: a,
                        detail: format!("critical goods {critical:?}"),
                    });
                }
                for &g in &critical {
                    if *inst.good_value(t, g) > own.scale(&tt) {
                        out.push(PropertyViolation {
                            property: 4,
                            agent: a,
                            detail: format!("critical good {g} above 2/3 of the bundle"),
                        });
                    }
                }
            }
            _ => {
                if !critical.is_empty() {
                    out.push(PropertyViolation {
                        property: 3,
                        agent: a,
                        detail: format!("critical goods {critical:?}"),
                    });
                }
            }
        }
    }
    out
}

/// Properties 1 and 2 only.
pub fn check_efx_properties(inst: &Instance, x: &Allocation) -> Vec<PropertyViolation> {
    let vals = BundleValues::new(inst, x);
    let one = Rational::from_integer(1.into());
    let tt = two_thirds();
    let mut out = Vec::new();
    for a in 0..inst.num_agents() {
        for b in 0..inst.num_agents() {
            if a == b {
                continue;
            }
            if x.len(a) == 1 && !efx_toward_with(inst, &vals, x, a, b, &one) {
                out.push(PropertyViolation {
                    property: 1,
                    agent: a,
                    detail: format!("not EFX toward {b}"),
                });
            }
            if !efx_toward_with(inst, &vals, x, a, b, &tt) {
                out.push(PropertyViolation {
                    property: 2,
                    agent: a,
                    detail: format!("not 2/3-EFX toward {b}"),
                });
            }
        }
    }
    out
}

/// When the loop stops with goods left, the enhanced graph has a source and
/// every source holds exactly two goods.
pub fn check_output_shape(inst: &Instance, x: &Allocation) -> Result<(), String> {
    if x.is_complete() {
        return Ok(());
    }
    let ge = EnvyGraph::build(inst, x, GraphKind::Enhanced);
    let sources = ge.sources();
    if sources.is_empty() {
        return Err("enhanced graph has no source".into());
    }
    match sources.iter().find(|&&s| x.len(s) != 2) {
        Some(s) => Err(format!("enhanced-graph source {s} holds {} goods", x.len(*s))),
        None => Ok(()),
    }
}

/// `z_2..z_{l-1}` shift one place back along `pi`, `z_star` takes `X_{z_2}`
/// and `z_l` takes `s`. Goods of `s` must come from the pool or from
/// `X_{z_star}`; whatever `z_star` held and did not pass on returns to the pool.
pub fn pseudo_cycle_resolution(
    inst: &Instance,
    x: &Allocation,
    pi: &[Agent],
    z_star: Agent,
    s: &Bundle,
) -> Result<Allocation> {
    let ge = EnvyGraph::build(inst, x, GraphKind::Enhanced);
    if pi.len() < 2 || !ge.is_path(pi) {
        return Err(Error::contract(format!("{pi:?} is not a path of the enhanced graph")));
    }
    let leaders = leading_agents(inst, x)?;
    if pi.iter().any(|a| !leaders.contains(a)) {
        return Err(Error::contract("pseudo-cycle path must run through leading agents"));
    }
    if inst.group_of(z_star) != inst.group_of(pi[0]) || pi.contains(&z_star) {
        return Err(Error::contract(format!("{z_star} is not a fresh member of the path head's group")));
    }
    if s.is_empty() || s.len() > 2 || s.iter().any(|g| !x.pool.contains(g) && !x.bundles[z_star].contains(g)) {
        return Err(Error::contract(format!("{s:?} is not drawn from the pool and X_{z_star}")));
    }
    let l = pi.len();
    let mut y = x.clone();
    for j in 1..l - 1 {
        y.bundles[pi[j]] = x.bundles[pi[j + 1]].clone();
    }
    y.bundles[z_star] = x.bundles[pi[1]].clone();
    y.bundles[pi[l - 1]] = s.clone();
    y.refill_pool(inst.num_goods());
    y.validate(inst)
        .map_err(|e| Error::invariant(format!("pseudo-cycle resolution broke the partition: {e}")))?;
    enforce_ordering_invariant(inst, &mut y);
    Ok(y)
}

/// One cycle resolved inside a step.
#[derive(Clone, Debug)]
pub struct CycleEvent {
    pub kind: GraphKind,
    pub cycle: Vec<Agent>,
    pub before: Allocation,
    pub after: Allocation,
}

#[derive(Clone, Debug)]
pub struct Fired {
    pub step: StepId,
    pub actors: Vec<Agent>,
    pub next: Allocation,
    pub cycles: Vec<CycleEvent>,
}

fn fired(step: StepId, actors: Vec<Agent>, next: Allocation) -> Fired {
    Fired {
        step,
        actors,
        next,
        cycles: Vec::new(),
    }
}

fn move_to_pool(x: &mut Allocation, a: Agent, new: Bundle) {
    let old = std::mem::replace(&mut x.bundles[a], new);
    for g in &x.bundles[a] {
        x.pool.remove(g);
    }
    let kept = &x.bundles[a];
    x.pool.extend(old.into_iter().filter(|g| !kept.contains(g)));
}

/// Checks that an agent who took bundle `b` through a cycle is EFX toward
/// everybody when `b` is a single good and 2/3-EFX otherwise.
fn check_cycle_recipients(inst: &Instance, cycle: &[Agent], before: &Allocation, after: &Allocation) -> Result<()> {
    let vals = BundleValues::new(inst, after);
    let one = Rational::from_integer(1.into());
    let tt = two_thirds();
    for (i, _) in cycle.iter().enumerate() {
        let taken = &before.bundles[cycle[(i + 1) % cycle.len()]];
        let holder = after
            .bundles
            .iter()
            .position(|b| b == taken)
            .ok_or_else(|| Error::invariant("cycle bundle vanished"))?;
        let alpha = if taken.len() == 1 { &one } else { &tt };
        if let Some(b) = (0..inst.num_agents()).find(|&b| b != holder && !efx_toward_with(inst, &vals, after, holder, b, alpha)) {
            return Err(Error::invariant(format!(
                "agent {holder} took a {}-good bundle on cycle {cycle:?} but is not {alpha}-EFX toward {b}",
                taken.len()
            )));
        }
    }
    Ok(())
}

fn resolve_all(inst: &Instance, x: &Allocation, kind: GraphKind) -> Result<(Allocation, Vec<CycleEvent>)> {
    let mut events = Vec::new();
    let y = all_cycles_resolution_with(inst, x, kind, &mut |c, before, after| {
        check_cycle_recipients(inst, c, before, after)?;
        events.push(CycleEvent {
            kind,
            cycle: c.to_vec(),
            before: before.clone(),
            after: after.clone(),
        });
        Ok(())
    })?;
    Ok((y, events))
}

/// Evaluates the steps in order and applies the first that fires.
pub fn ppa_step_detailed(inst: &Instance, x: &Allocation, types_mode: bool) -> Result<Option<Fired>> {
    if x.pool.is_empty() {
        return Ok(None);
    }
    let n = inst.num_agents();
    let vals = BundleValues::new(inst, x);
    let gv = |a: Agent, g: Good| inst.good_value(inst.group_of(a), g);
    let pool: Vec<Good> = x.pool.iter().copied().collect();
    let tt = two_thirds();
    let th = three_halves();

    // S1: a singleton holder prefers a pool good.
    for a in (0..n).filter(|&a| x.len(a) == 1) {
        if let Some(&g) = pool.iter().find(|&&g| gv(a, g) > vals.own(a)) {
            let mut y = x.clone();
            move_to_pool(&mut y, a, [g].into());
            enforce_ordering_invariant(inst, &mut y);
            return Ok(Some(fired(StepId::S1, vec![a], y)));
        }
    }

    // S2: a pair holder values a pool good above 3/2 of its pair.
    for a in (0..n).filter(|&a| x.len(a) == 2) {
        let bar = vals.own(a).scale(&th);
        if let Some(&g) = pool.iter().find(|&&g| *gv(a, g) > bar) {
            let mut y = x.clone();
            move_to_pool(&mut y, a, [g].into());
            enforce_ordering_invariant(inst, &mut y);
            return Ok(Some(fired(StepId::S2, vec![a], y)));
        }
    }

    // S3: a singleton holder values two pool goods above 2/3 of its good.
    if pool.len() >= 2 {
        for a in (0..n).filter(|&a| x.len(a) == 1) {
            let bar = vals.own(a).scale(&tt);
            let mut by_value: Vec<&Value> = pool.iter().map(|&g| gv(a, g)).collect();
            by_value.sort();
            if by_value[by_value.len() - 1] + by_value[by_value.len() - 2] <= bar {
                continue;
            }
            for (i, &g1) in pool.iter().enumerate() {
                if let Some(&g2) = pool[i + 1..].iter().find(|&&g2| gv(a, g1) + gv(a, g2) > bar) {
                    let mut y = x.clone();
                    move_to_pool(&mut y, a, [g1, g2].into());
                    enforce_ordering_invariant(inst, &mut y);
                    return Ok(Some(fired(StepId::S3, vec![a], y)));
                }
            }
        }
    }

    // S4: a pair holder swaps one of its goods for a better pool good.
    for a in (0..n).filter(|&a| x.len(a) == 2) {
        for &g in &pool {
            if let Some(&h) = x.bundles[a].iter().find(|&&h| gv(a, g) > gv(a, h)) {
                let mut y = x.clone();
                let mut b = x.bundles[a].clone();
                b.remove(&h);
                b.insert(g);
                move_to_pool(&mut y, a, b);
                enforce_ordering_invariant(inst, &mut y);
                return Ok(Some(fired(StepId::S4, vec![a], y)));
            }
        }
    }

    // S5: cycles in the reduced graph.
    let gr = EnvyGraph::build(inst, x, GraphKind::Reduced);
    if let Some(c) = gr.find_cycle() {
        let (y, cycles) = resolve_all(inst, x, GraphKind::Reduced)?;
        let mut f = fired(StepId::S5, c, y);
        f.cycles = cycles;
        return Ok(Some(f));
    }

    // S6: a reduced-graph source holding one good takes its favourite pool good.
    let r_sources = gr.sources();
    if let Some(&s) = r_sources.iter().find(|&&s| x.len(s) == 1) {
        let g = *pool.iter().max_by(|&&p, &&q| gv(s, p).cmp(gv(s, q))).expect("nonempty pool");
        let mut y = x.clone();
        y.pool.remove(&g);
        y.bundles[s].insert(g);
        enforce_ordering_invariant(inst, &mut y);
        return Ok(Some(fired(StepId::S6, vec![s], y)));
    }

    // S7: exactly one pool good is worth more than 2/3 of some singleton bundle.
    let hot: Vec<Good> = pool
        .iter()
        .copied()
        .filter(|&g| (0..n).any(|a| x.len(a) == 1 && *gv(a, g) > vals.own(a).scale(&tt)))
        .collect();
    if hot.len() == 1 {
        let y = singleton_pool(inst, x)?;
        let actors = (0..n).filter(|&a| x.bundles[a] != y.bundles[a]).collect();
        return Ok(Some(fired(StepId::S7, actors, y)));
    }

    // S8: cycles in the enhanced graph.
    let ge = EnvyGraph::build(inst, x, GraphKind::Enhanced);
    if let Some(c) = ge.find_cycle() {
        let (y, cycles) = resolve_all(inst, x, GraphKind::Enhanced)?;
        let mut f = fired(StepId::S8, c, y);
        f.cycles = cycles;
        return Ok(Some(f));
    }

    // S9: an enhanced-graph path from a reduced-graph source to an agent who
    // prefers a pool good plus a good of the source's bundle.
    for &s in &r_sources {
        let reach: BTreeSet<Agent> = ge.reachable(s).into_iter().collect();
        for &a in &reach {
            let best_pool = pool.iter().map(|&g| gv(a, g)).max().expect("nonempty pool");
            let Some(best_src) = x.bundles[s].iter().map(|&g| gv(a, g)).max() else {
                continue;
            };
            if *vals.own(a) < best_pool + best_src {
                let pi = ge.find_path(s, a).expect("reachable");
                let y = path_resolution_star(inst, x, &ge, &pi)?;
                return Ok(Some(fired(StepId::S9, pi, y)));
            }
        }
    }

    if types_mode && inst.num_types() == 4 {
        if let Some(f) = four_group_steps(inst, x, &ge, &vals)? {
            return Ok(Some(f));
        }
    }
    Ok(None)
}

fn four_group_steps(inst: &Instance, x: &Allocation, ge: &EnvyGraph, vals: &BundleValues) -> Result<Option<Fired>> {
    // S9.1: a single enhanced-graph source, in a group with at least two agents.
    let sources = ge.sources();
    let [d1] = sources[..] else {
        return Ok(None);
    };
    let dg = inst.group_of(d1);
    let leaders = leading_agents(inst, x)?;
    if inst.group_size(dg) < 2 || leaders[dg] != d1 {
        return Ok(None);
    }
    let d2 = d1 + 1;
    let others: Vec<Agent> = leaders.iter().copied().filter(|&l| l != d1).collect();

    // S9.2: the other leaders hold one good each, and d2 holds two goods or
    // is not envied by d1.
    if others.iter().any(|&l| x.len(l) != 1) || !(x.len(d2) == 2 || !ge.has_edge(d1, d2)) {
        return Ok(None);
    }

    // S9.3: another leader envies d2.
    if let Some(&a1) = others.iter().find(|&&a| vals.own(a) < vals.of(a, d2)) {
        let pi = leading_path(inst, x, ge, d1, a1)?;
        let y = pseudo_cycle_resolution(inst, x, &pi, d2, &x.bundles[d2])?;
        let mut actors = pi;
        actors.push(d2);
        return Ok(Some(fired(StepId::S9_3, actors, y)));
    }

    // S9.4: another leader prefers a good of d2 plus a pool good.
    let gv = |a: Agent, g: Good| inst.good_value(inst.group_of(a), g);
    for &a1 in &others {
        let best = |goods: &Bundle| goods.iter().copied().max_by(|&p, &q| gv(a1, p).cmp(gv(a1, q)));
        let (Some(g), Some(h)) = (best(&x.bundles[d2]), best(&x.pool)) else {
            continue;
        };
        if *vals.own(a1) < gv(a1, g) + gv(a1, h) {
            let pi = leading_path(inst, x, ge, d1, a1)?;
            let y = pseudo_cycle_resolution(inst, x, &pi, d2, &[g, h].into())?;
            let mut actors = pi;
            actors.push(d2);
            return Ok(Some(fired(StepId::S9_4, actors, y)));
        }
    }
    Ok(None)
}

pub fn ppa_step(inst: &Instance, x: &Allocation, types_mode: bool) -> Result<Option<(StepId, Allocation)>> {
    Ok(ppa_step_detailed(inst, x, types_mode)?.map(|f| (f.step, f.next)))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PpaStats {
    pub iterations: usize,
    pub steps: BTreeMap<String, usize>,
    pub cycle_resolutions: usize,
    /// Potential-raising resolutions where the tag-free product did not move.
    pub base_equal_phi: usize,
    pub configs_recorded: usize,
}

#[derive(Clone, Debug)]
pub struct PpaRun {
    pub allocation: Allocation,
    pub trace: Trace,
    pub stats: PpaStats,
}

pub fn run_ppa_types(inst: &Instance, x0: &Allocation) -> Result<PpaRun> {
    run_ppa(inst, x0, true, Trace::default())
}

/// Runs the loop to a fixed point, appending to `trace` and checking the
/// step invariants as it goes.
pub fn run_ppa(inst: &Instance, x0: &Allocation, types_mode: bool, trace: Trace) -> Result<PpaRun> {
    x0.validate(inst)?;
    if x0.size() > 2 {
        return Err(Error::contract("3PA+ starts from bundles of at most two goods"));
    }
    let mut x = x0.clone();
    enforce_ordering_invariant(inst, &mut x);
    let mut run = PpaRun {
        allocation: x.clone(),
        trace,
        stats: PpaStats::default(),
    };
    let fail = |run: &PpaRun, msg: String| Error::invariant(msg).with_trace(&run.trace);
    if let Some(v) = check_efx_properties(inst, &x).first() {
        return Err(Error::contract(format!("start allocation violates property {}: {}", v.property, v.detail)));
    }
    run.trace.push(TraceEvent::new(inst, 0, "seed", vec![], &x));

    let mut recorded: BTreeSet<Configuration> = BTreeSet::new();
    let tt = two_thirds();
    let mut best_minima = group_minima(inst, &x);
    let mut done = false;
    for iter in 1..=PPA_BUDGET {
        let pre_config = configuration(inst, &x);
        let Some(f) = ppa_step_detailed(inst, &x, types_mode).map_err(|e| e.with_trace(&run.trace))? else {
            done = true;
            break;
        };
        for c in &f.cycles {
            let before = potential_phi(inst, &c.before);
            let after = potential_phi(inst, &c.after);
            if before.base() == after.base() {
                run.stats.base_equal_phi += 1;
            }
            run.stats.cycle_resolutions += 1;
            let label = match c.kind {
                GraphKind::Reduced => "cycle_reduced",
                GraphKind::Enhanced => "cycle_enhanced",
                GraphKind::Plain => "cycle_plain",
            };
            let mut ev = TraceEvent::new(inst, iter, label, c.cycle.clone(), &c.after);
            ev.phi_before = Some(before.to_string());
            ev.phi_after = Some(after.to_string());
            ev.pool_delta = Some(0);
            run.trace.push(ev);
        }
        let mut ev = TraceEvent::new(inst, iter, f.step.as_str(), f.actors.clone(), &f.next);
        ev.pool_delta = Some(f.next.pool.len() as i64 - x.pool.len() as i64);
        if matches!(f.step, StepId::S9_3 | StepId::S9_4) {
            ev.config_hash = Some(config_hash(&pre_config));
            recorded.insert(pre_config);
            run.stats.configs_recorded += 1;
        }
        run.trace.push(ev);
        *run.stats.steps.entry(f.step.to_string()).or_default() += 1;
        run.stats.iterations = iter;
        x = f.next;

        if let Err(e) = x.validate(inst) {
            return Err(fail(&run, format!("{} broke the partition: {e}", f.step)));
        }
        if x.size() > 2 {
            return Err(fail(&run, format!("{} created a bundle of {} goods", f.step, x.size())));
        }
        if !ordering_invariant_holds(inst, &x) {
            return Err(fail(&run, format!("{} broke the ordering invariant", f.step)));
        }
        if let Some(v) = check_efx_properties(inst, &x).first() {
            return Err(fail(&run, format!("after {}: property {} fails for agent {}: {}", f.step, v.property, v.agent, v.detail)));
        }
        if recorded.contains(&configuration(inst, &x)) {
            return Err(fail(&run, format!("{} revisited a recorded configuration", f.step)));
        }
        for (t, now) in group_minima(inst, &x).into_iter().enumerate() {
            if now < best_minima[t].scale(&tt) {
                return Err(fail(
                    &run,
                    format!("group {t} minimum fell to {now}, below 2/3 of the earlier {}", best_minima[t]),
                ));
            }
            if now > best_minima[t] {
                best_minima[t] = now;
            }
        }
    }
    if !done {
        return Err(Error::Budget {
            context: "3PA+ loop",
            budget: PPA_BUDGET,
            trace: Box::new(run.trace),
        });
    }
    if let Some(v) = check_properties(inst, &x).first() {
        return Err(fail(&run, format!("at exit property {} fails for agent {}: {}", v.property, v.agent, v.detail)));
    }
    if let Err(msg) = check_output_shape(inst, &x) {
        return Err(fail(&run, msg));
    }
    run.allocation = x;
    Ok(run)
}
