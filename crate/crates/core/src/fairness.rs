//! Fairness predicates and certificates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::allocation::{Allocation, Bundle};
use crate::error::{Error, Result};
use crate::instance::{Agent, Good, Instance};
use crate::value::{rational, Rational, Value};

pub fn two_thirds() -> Rational {
    rational(2, 3)
}

pub fn three_halves() -> Rational {
    rational(3, 2)
}

pub fn one_half() -> Rational {
    rational(1, 2)
}

/// `v_t(X_b)` for every type `t` and agent `b`.
#[derive(Clone, Debug)]
pub struct BundleValues {
    per_type: Vec<Vec<Value>>,
    group_of: Vec<usize>,
}

impl BundleValues {
    pub fn new(inst: &Instance, x: &Allocation) -> Self {
        let per_type = (0..inst.num_types())
            .map(|t| x.bundles.iter().map(|b| inst.value(t, b)).collect())
            .collect();
        BundleValues {
            per_type,
            group_of: (0..inst.num_agents()).map(|a| inst.group_of(a)).collect(),
        }
    }

    /// `v_a(X_b)`.
    pub fn of(&self, a: Agent, b: Agent) -> &Value {
        &self.per_type[self.group_of[a]][b]
    }

    pub fn own(&self, a: Agent) -> &Value {
        self.of(a, a)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// `v_a(X_a) < alpha · v_a(X_b \ {h})`.
    Efx {
        envier: Agent,
        envied: Agent,
        removed: Good,
        own: String,
        scaled: String,
    },
    /// The agent envies the pool (heavily, if a threshold was given).
    PoolEnvy {
        agent: Agent,
        own: String,
        pool: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub pass: bool,
    pub violations: Vec<Violation>,
}

impl Certificate {
    fn from(violations: Vec<Violation>) -> Self {
        Certificate {
            pass: violations.is_empty(),
            violations,
        }
    }

    pub fn merge(mut self, other: Certificate) -> Certificate {
        self.violations.extend(other.violations);
        Certificate::from(self.violations)
    }
}

fn min_good(inst: &Instance, t: usize, bundle: &Bundle) -> Option<Value> {
    bundle.iter().map(|&g| inst.good_value(t, g)).min().cloned()
}

/// `v_a(X_a) >= alpha · v_a(X_b \ {h})` for every `h` in `X_b`.
/// Additivity lets us check only the least valuable `h`.
pub fn is_alpha_efx_toward(inst: &Instance, x: &Allocation, a: Agent, b: Agent, alpha: &Rational) -> bool {
    let t = inst.group_of(a);
    let Some(least) = min_good(inst, t, &x.bundles[b]) else {
        return true;
    };
    let own = inst.value(t, &x.bundles[a]);
    let rest = &inst.value(t, &x.bundles[b]) - &least;
    own >= rest.scale(alpha)
}

pub(crate) fn efx_toward_with(
    inst: &Instance,
    vals: &BundleValues,
    x: &Allocation,
    a: Agent,
    b: Agent,
    alpha: &Rational,
) -> bool {
    let Some(least) = min_good(inst, inst.group_of(a), &x.bundles[b]) else {
        return true;
    };
    *vals.own(a) >= (vals.of(a, b) - &least).scale(alpha)
}

/// Every `a` is alpha-EFX toward every `b != a`. Lists all violating triples.
pub fn check_alpha_efx(inst: &Instance, x: &Allocation, alpha: &Rational) -> Result<Certificate> {
    x.validate(inst)?;
    let vals = BundleValues::new(inst, x);
    let mut out = Vec::new();
    for a in 0..inst.num_agents() {
        let t = inst.group_of(a);
        for b in 0..inst.num_agents() {
            if a == b || efx_toward_with(inst, &vals, x, a, b, alpha) {
                continue;
            }
            for &h in &x.bundles[b] {
                let scaled = (vals.of(a, b) - inst.good_value(t, h)).scale(alpha);
                if *vals.own(a) < scaled {
                    out.push(Violation::Efx {
                        envier: a,
                        envied: b,
                        removed: h,
                        own: vals.own(a).to_string(),
                        scaled: scaled.to_string(),
                    });
                }
            }
        }
    }
    Ok(Certificate::from(out))
}

/// No agent envies the pool. With `heavy_eps`, only envy by more than a
/// `1/(1-eps)` factor counts.
pub fn check_charity(inst: &Instance, x: &Allocation, heavy_eps: Option<&Rational>) -> Result<Certificate> {
    x.validate(inst)?;
    let factor = match heavy_eps {
        Some(e) => {
            if e <= &Rational::default() || e >= &rational(1, 1) {
                return Err(Error::input("heavy-envy epsilon must lie in (0,1)"));
            }
            rational(1, 1) - e
        }
        None => rational(1, 1),
    };
    let mut out = Vec::new();
    for a in 0..inst.num_agents() {
        let own = inst.agent_value(a, &x.bundles[a]);
        let pool = inst.agent_value(a, &x.pool);
        if own < pool.scale(&factor) {
            out.push(Violation::PoolEnvy {
                agent: a,
                own: own.to_string(),
                pool: pool.to_string(),
            });
        }
    }
    Ok(Certificate::from(out))
}

/// `g` is critical for `a` when `v_a(g) > beta · v_a(X_a)`.
pub fn is_critical(inst: &Instance, x: &Allocation, a: Agent, g: Good, beta: &Rational) -> Result<bool> {
    if !x.pool.contains(&g) {
        return Err(Error::contract(format!("good {g} is not in the pool")));
    }
    let t = inst.group_of(a);
    Ok(*inst.good_value(t, g) > inst.value(t, &x.bundles[a]).scale(beta))
}

/// Pool goods critical for at least one agent, with the agents they are critical for.
pub fn critical_goods(inst: &Instance, x: &Allocation, beta: &Rational) -> BTreeMap<Good, Vec<Agent>> {
    let mut out: BTreeMap<Good, Vec<Agent>> = BTreeMap::new();
    for a in 0..inst.num_agents() {
        let t = inst.group_of(a);
        let bar = inst.value(t, &x.bundles[a]).scale(beta);
        for &g in &x.pool {
            if *inst.good_value(t, g) > bar {
                out.entry(g).or_default().push(a);
            }
        }
    }
    out
}

/// Sorts each group's bundles ascending by the group's valuation.
pub fn enforce_ordering_invariant(inst: &Instance, x: &mut Allocation) {
    for t in 0..inst.num_types() {
        let range = inst.group_agents(t);
        let mut keyed: Vec<(Value, Bundle)> = x.bundles[range.clone()]
            .iter()
            .map(|b| (inst.value(t, b), b.clone()))
            .collect();
        keyed.sort_by(|p, q| p.0.cmp(&q.0));
        for (slot, (_, b)) in range.zip(keyed) {
            x.bundles[slot] = b;
        }
    }
}

pub fn ordering_invariant_holds(inst: &Instance, x: &Allocation) -> bool {
    (0..inst.num_types()).all(|t| {
        let vals: Vec<Value> = inst.group_agents(t).map(|a| inst.value(t, &x.bundles[a])).collect();
        vals.windows(2).all(|w| w[0] <= w[1])
    })
}

/// The first (least well-off) agent of every group.
pub fn leading_agents(inst: &Instance, x: &Allocation) -> Result<Vec<Agent>> {
    if !ordering_invariant_holds(inst, x) {
        return Err(Error::invariant("ordering invariant broken, leading agents undefined"));
    }
    Ok((0..inst.num_types()).map(|t| inst.group_agents(t).start).collect())
}

/// Per group, the smallest bundle value.
pub fn group_minima(inst: &Instance, x: &Allocation) -> Vec<Value> {
    (0..inst.num_types())
        .map(|t| {
            inst.group_agents(t)
                .map(|a| inst.value(t, &x.bundles[a]))
                .min()
                .unwrap_or_default()
        })
        .collect()
}
