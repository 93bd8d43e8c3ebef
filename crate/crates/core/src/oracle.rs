//! Brute-force ground truth for small instances and trace verification.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::Allocation;
use crate::charity::{charity_allocate, CharityOptions};
use crate::error::{Error, Result};
use crate::fairness::{check_alpha_efx, check_charity, group_minima, two_thirds, Certificate, Violation};
use crate::few_types::few_types_allocate;
use crate::instance::Instance;
use crate::ppa::{check_efx_properties, config_hash, configuration, StepId};
use crate::resolution::potential_phi;
use crate::trace::Trace;
use crate::value::{parse_rational, Rational, Value};

/// Largest number of assignments the oracle will enumerate.
pub const MAX_ASSIGNMENTS: u64 = 100_000_000;

/// Every map from goods to agents (and the pool, unless `complete_only`),
/// numbered as mixed-radix counters with good 0 as the lowest digit.
#[derive(Clone, Debug)]
pub struct SearchSpace {
    n: usize,
    m: usize,
    radix: u64,
    total: u64,
    complete_only: bool,
}

impl SearchSpace {
    pub fn new(inst: &Instance, complete_only: bool) -> Result<Self> {
        let n = inst.num_agents();
        let m = inst.num_goods();
        let radix = if complete_only { n as u64 } else { n as u64 + 1 };
        let mut total: u64 = 1;
        for _ in 0..m {
            total = total
                .checked_mul(radix)
                .filter(|&t| t <= MAX_ASSIGNMENTS)
                .ok_or_else(|| Error::input(format!("{radix}^{m} assignments exceed the oracle limit of {MAX_ASSIGNMENTS}")))?;
        }
        Ok(SearchSpace {
            n,
            m,
            radix,
            total,
            complete_only,
        })
    }

    pub fn len(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn complete_only(&self) -> bool {
        self.complete_only
    }

    /// Digit `n` means the pool.
    pub fn decode(&self, mut idx: u64) -> Allocation {
        let mut x = Allocation {
            bundles: vec![Default::default(); self.n],
            pool: Default::default(),
        };
        for g in 0..self.m {
            let digit = (idx % self.radix) as usize;
            idx /= self.radix;
            if digit == self.n {
                x.pool.insert(g);
            } else {
                x.bundles[digit].insert(g);
            }
        }
        x
    }
}

fn passes(inst: &Instance, x: &Allocation, alpha: &Rational) -> bool {
    let efx = check_alpha_efx(inst, x, alpha).map(|c| c.pass).unwrap_or(false);
    efx && (x.pool.is_empty() || check_charity(inst, x, None).map(|c| c.pass).unwrap_or(false))
}

/// First allocation in enumeration order that is alpha-EFX and, when
/// partial, leaves a pool nobody envies.
pub fn brute_force_exists_alpha_efx(inst: &Instance, alpha: &Rational, complete_only: bool) -> Result<Option<Allocation>> {
    let space = SearchSpace::new(inst, complete_only)?;
    let hit = (0..space.len()).into_par_iter().find_first(|&i| passes(inst, &space.decode(i), alpha));
    Ok(hit.map(|i| space.decode(i)))
}

/// alpha-EFX check that tries every removed good and sums values from
/// scratch, sharing no code with the main checker.
pub fn brute_force_efx_recheck(inst: &Instance, x: &Allocation, alpha: &Rational) -> Result<Certificate> {
    x.validate(inst)?;
    let n = inst.num_agents();
    let sum = |a: usize, goods: &mut dyn Iterator<Item = usize>| -> Value {
        let t = inst.group_of(a);
        let mut v = Value::zero();
        for g in goods {
            v += inst.good_value(t, g);
        }
        v
    };
    let mut violations = Vec::new();
    for a in 0..n {
        let own = sum(a, &mut x.bundles[a].iter().copied());
        for b in 0..n {
            if a == b {
                continue;
            }
            for &h in &x.bundles[b] {
                let rest = sum(a, &mut x.bundles[b].iter().copied().filter(|&g| g != h));
                let scaled = rest.scale(alpha);
                if own < scaled {
                    violations.push(Violation::Efx {
                        envier: a,
                        envied: b,
                        removed: h,
                        own: own.to_string(),
                        scaled: scaled.to_string(),
                    });
                }
            }
        }
    }
    Ok(Certificate {
        pass: violations.is_empty(),
        violations,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceMismatch {
    pub event: usize,
    pub step: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceReport {
    pub pass: bool,
    pub events: usize,
    /// Whether the trace was compared against a fresh run.
    pub rerun: bool,
    pub mismatches: Vec<TraceMismatch>,
}

fn is_ppa_step(step: &str) -> bool {
    StepId::parse(step).is_some() || step == "cycle_reduced" || step == "cycle_enhanced"
}

/// Checks each snapshot on its own, then, if the trace has a header,
/// compares it event by event with a fresh run of the same algorithm.
pub fn verify_trace(trace: &Trace, inst: &Instance) -> Result<TraceReport> {
    let mut out = Vec::new();
    let mut miss = |i: usize, step: &str, message: String| {
        out.push(TraceMismatch {
            event: i,
            step: step.to_string(),
            message,
        })
    };
    let few = trace.header.as_ref().is_none_or(|h| h.algo == "fewtypes");
    let tt = two_thirds();
    let mut prev: Option<Allocation> = None;
    let mut recorded: BTreeSet<String> = BTreeSet::new();
    let mut best: Option<Vec<Value>> = None;

    for (i, ev) in trace.events.iter().enumerate() {
        let step = ev.step.as_str();
        let x = ev.allocation();
        if let Err(e) = x.validate(inst) {
            miss(i, step, format!("snapshot is not an allocation: {e}"));
            prev = None;
            continue;
        }
        if ev.pool_size != x.pool.len() {
            miss(i, step, format!("pool_size {} but the pool holds {}", ev.pool_size, x.pool.len()));
        }
        let minima = group_minima(inst, &x);
        let bases: Vec<String> = minima.iter().map(|v| v.base().to_string()).collect();
        if bases != ev.group_minima {
            miss(i, step, format!("group minima {:?}, recomputed {bases:?}", ev.group_minima));
        }
        if StepId::parse(step).is_some() {
            if x.size() > 2 {
                miss(i, step, "bundle of more than two goods during 3PA+".into());
            }
            if let Some(v) = check_efx_properties(inst, &x).first() {
                miss(i, step, format!("property {} fails for agent {}: {}", v.property, v.agent, v.detail));
            }
        }
        if step == "cycle_reduced" || step == "cycle_enhanced" {
            let after = potential_phi(inst, &x);
            if ev.phi_after.as_deref() != Some(after.to_string().as_str()) {
                miss(i, step, format!("phi_after {:?}, recomputed {after}", ev.phi_after));
            }
            if let Some(p) = &prev {
                let before = potential_phi(inst, p);
                if ev.phi_before.as_deref() != Some(before.to_string().as_str()) {
                    miss(i, step, format!("phi_before {:?}, recomputed {before}", ev.phi_before));
                }
                if after <= before {
                    miss(i, step, format!("potential did not increase: {before} -> {after}"));
                }
            }
        }
        if let Some(h) = &ev.config_hash {
            match &prev {
                Some(p) if config_hash(&configuration(inst, p)) == *h => {}
                _ => miss(i, step, "config_hash does not match the previous snapshot".into()),
            }
            recorded.insert(h.clone());
        }
        if few && (is_ppa_step(step) || step == "seed") {
            if is_ppa_step(step) && recorded.contains(&config_hash(&configuration(inst, &x))) {
                miss(i, step, "revisits a configuration recorded before S9_3/S9_4".into());
            }
            match &mut best {
                None => best = Some(minima),
                Some(best) => {
                    for (t, now) in minima.into_iter().enumerate() {
                        if now < best[t].scale(&tt) {
                            miss(i, step, format!("group {t} minimum below 2/3 of its earlier maximum"));
                        }
                        if now > best[t] {
                            best[t] = now;
                        }
                    }
                }
            }
        }
        prev = Some(x);
    }

    let mut rerun = false;
    if let Some(h) = &trace.header {
        rerun = true;
        let fresh = match h.algo.as_str() {
            "fewtypes" => few_types_allocate(inst).map(|r| r.trace),
            "charity" => {
                let eps = h.epsilon.as_deref().ok_or_else(|| Error::input("charity trace header lacks epsilon"))?;
                let opts = CharityOptions {
                    d: h.d,
                    strict: h.strict,
                };
                charity_allocate(inst, &parse_rational(eps)?, &opts).map(|r| r.trace)
            }
            other => return Err(Error::input(format!("unknown algorithm {other:?} in trace header"))),
        };
        match fresh {
            Err(e) => miss(trace.events.len(), "rerun", format!("fresh run failed: {e}")),
            Ok(fresh) => {
                if fresh.header != trace.header {
                    miss(0, "header", "header differs from a fresh run".into());
                }
                let diverge = trace.events.iter().zip(&fresh.events).position(|(a, b)| a != b);
                match diverge {
                    Some(i) => miss(
                        i,
                        &trace.events[i].step,
                        format!("fresh run has step {} with actors {:?}", fresh.events[i].step, fresh.events[i].actors),
                    ),
                    None if fresh.events.len() != trace.events.len() => miss(
                        fresh.events.len().min(trace.events.len()),
                        "length",
                        format!("{} events, fresh run has {}", trace.events.len(), fresh.events.len()),
                    ),
                    None => {}
                }
            }
        }
    }
    out.sort_by_key(|m| m.event);
    Ok(TraceReport {
        pass: out.is_empty(),
        events: trace.events.len(),
        rerun,
        mismatches: out,
    })
}
