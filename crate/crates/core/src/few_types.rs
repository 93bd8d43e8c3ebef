//! 2/3-EFX complete allocations when agents come in at most four types.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::allocation::Allocation;
use crate::error::{Error, Result};
use crate::fairness::{
    check_alpha_efx, critical_goods, enforce_ordering_invariant, is_alpha_efx_toward, one_half, two_thirds,
    Certificate,
};
use crate::graph::{EnvyGraph, GraphKind};
use crate::instance::{Agent, Good, Instance};
use crate::ppa::{run_ppa, seed_allocation, PpaStats};
use crate::resolution::ece_completion_with;
use crate::trace::{Trace, TraceEvent, TraceHeader};

pub const MAX_TYPES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalCase {
    NoCritical,
    TwoCritTwoSources,
    AtMostTwoCritOneSource,
    ThreeCritSingletonD,
    ThreeCritBigDKeepAll,
    ThreeCritBigDSplit,
}

impl CriticalCase {
    pub fn as_str(self) -> &'static str {
        match self {
            CriticalCase::NoCritical => "no_critical",
            CriticalCase::TwoCritTwoSources => "two_crit_two_sources",
            CriticalCase::AtMostTwoCritOneSource => "at_most_two_crit_one_source",
            CriticalCase::ThreeCritSingletonD => "three_crit_singleton_d",
            CriticalCase::ThreeCritBigDKeepAll => "three_crit_big_d_keep_all",
            CriticalCase::ThreeCritBigDSplit => "three_crit_big_d_split",
        }
    }
}

impl fmt::Display for CriticalCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn give(x: &mut Allocation, a: Agent, goods: impl IntoIterator<Item = Good>) {
    for g in goods {
        x.pool.remove(&g);
        x.bundles[a].insert(g);
    }
}

/// Every group claiming a critical good values each source bundle below
/// 2/3 of each of its members' bundles.
fn check_claimant_margin(inst: &Instance, x: &Allocation, sources: &[Agent]) -> Result<()> {
    let claims = critical_goods(inst, x, &one_half());
    let groups: BTreeSet<usize> = claims.values().flatten().map(|&a| inst.group_of(a)).collect();
    let tt = two_thirds();
    for &l in &groups {
        for &s in sources {
            let vs = inst.value(l, &x.bundles[s]);
            for j in inst.group_agents(l) {
                if vs >= inst.value(l, &x.bundles[j]).scale(&tt) {
                    return Err(Error::invariant(format!(
                        "claimant group {l} values source {s} at {vs}, not below 2/3 of agent {j}'s bundle"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Places the critical goods `c` left by 3PA+ on enhanced-graph sources.
pub fn allocate_criticals(
    inst: &Instance,
    x: &Allocation,
    c: &BTreeSet<Good>,
    ge: &EnvyGraph,
) -> Result<(Allocation, CriticalCase)> {
    if let Some(g) = c.iter().find(|g| !x.pool.contains(g)) {
        return Err(Error::contract(format!("critical good {g} is not in the pool")));
    }
    if c.len() > 3 {
        return Err(Error::contract(format!("{} critical goods, at most 3 expected", c.len())));
    }
    let mut y = x.clone();
    if c.is_empty() {
        return Ok((y, CriticalCase::NoCritical));
    }
    let sources = ge.sources();
    let Some(&d1) = sources.first() else {
        return Err(Error::contract("enhanced graph has no source"));
    };
    check_claimant_margin(inst, x, &sources)?;
    let goods: Vec<Good> = c.iter().copied().collect();
    let case = match (goods.len(), sources.len()) {
        (2, n) if n >= 2 => {
            give(&mut y, sources[0], [goods[0]]);
            give(&mut y, sources[1], [goods[1]]);
            CriticalCase::TwoCritTwoSources
        }
        (1 | 2, _) => {
            give(&mut y, d1, goods.iter().copied());
            CriticalCase::AtMostTwoCritOneSource
        }
        (3, 1) => {
            let dg = inst.group_of(d1);
            if inst.group_size(dg) == 1 {
                give(&mut y, d1, goods.iter().copied());
                CriticalCase::ThreeCritSingletonD
            } else {
                let d2 = d1 + 1;
                let h = *goods
                    .iter()
                    .min_by(|&&p, &&q| inst.good_value(dg, p).cmp(inst.good_value(dg, q)))
                    .expect("three goods");
                let mut all = y.clone();
                give(&mut all, d1, goods.iter().copied());
                if is_alpha_efx_toward(inst, &all, d2, d1, &two_thirds()) {
                    y = all;
                    CriticalCase::ThreeCritBigDKeepAll
                } else {
                    give(&mut y, d2, [h]);
                    give(&mut y, d1, goods.iter().copied().filter(|&g| g != h));
                    CriticalCase::ThreeCritBigDSplit
                }
            }
        }
        (3, n) => {
            return Err(Error::invariant(format!("three critical goods but {n} enhanced-graph sources")));
        }
        _ => unreachable!("critical count checked above"),
    };
    enforce_ordering_invariant(inst, &mut y);
    Ok((y, case))
}

#[derive(Clone, Debug)]
pub struct FewTypesResult {
    pub allocation: Allocation,
    pub certificate: Certificate,
    pub case: CriticalCase,
    pub trace: Trace,
    pub stats: PpaStats,
    /// The 3PA+ output, before critical goods and completion.
    pub partial: Allocation,
}

pub fn few_types_header() -> TraceHeader {
    TraceHeader {
        algo: "fewtypes".into(),
        epsilon: None,
        d: None,
        strict: false,
    }
}

/// Seed, 3PA+, critical goods, then envy-cycle completion. The result is
/// complete and certified 2/3-EFX.
pub fn few_types_allocate(inst: &Instance) -> Result<FewTypesResult> {
    if inst.num_types() > MAX_TYPES {
        return Err(Error::input(format!(
            "few-types allocation supports at most {MAX_TYPES} types, got {}",
            inst.num_types()
        )));
    }
    let seed = seed_allocation(inst)?;
    let run = run_ppa(inst, &seed, true, Trace::with_header(few_types_header()))?;
    let mut trace = run.trace;
    let x = run.allocation;
    let iter = run.stats.iterations + 1;

    let crit: BTreeSet<Good> = critical_goods(inst, &x, &one_half()).into_keys().collect();
    let ge = EnvyGraph::build(inst, &x, GraphKind::Enhanced);
    let (y, case) = allocate_criticals(inst, &x, &crit, &ge).map_err(|e| e.with_trace(&trace))?;
    let receivers: Vec<Agent> = (0..inst.num_agents()).filter(|&a| x.bundles[a] != y.bundles[a]).collect();
    let mut ev = TraceEvent::new(inst, iter, "criticals", receivers, &y);
    ev.pool_delta = Some(y.pool.len() as i64 - x.pool.len() as i64);
    trace.push(ev);

    let tt = two_thirds();
    let mid = check_alpha_efx(inst, &y, &tt)?;
    if !mid.pass {
        return Err(Error::invariant(format!(
            "critical goods case {case} broke 2/3-EFX: {:?}",
            mid.violations.first()
        ))
        .with_trace(&trace));
    }

    let events = RefCell::new(Vec::new());
    let done = ece_completion_with(
        inst,
        &y,
        &tt,
        &mut |c, _, after| {
            events.borrow_mut().push(TraceEvent::new(inst, iter, "cycle_plain", c.to_vec(), after));
            Ok(())
        },
        &mut |s, _g, after| {
            let mut ev = TraceEvent::new(inst, iter, "ece_add", vec![s], after);
            ev.pool_delta = Some(-1);
            events.borrow_mut().push(ev);
            Ok(())
        },
    );
    trace.events.extend(events.into_inner());
    let done = done.map_err(|e| e.with_trace(&trace))?;
    let certificate = check_alpha_efx(inst, &done, &tt)?;
    Ok(FewTypesResult {
        allocation: done,
        certificate,
        case,
        trace,
        stats: run.stats,
        partial: x,
    })
}
