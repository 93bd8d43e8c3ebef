//! Few-types instances: `k` groups of agents sharing an additive valuation.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::value::{format_rational, parse_rational, pow2, Rational, Value};

pub type Good = usize;
pub type Agent = usize;

/// Agent `j` of group `t`, both zero based. Printed as `t:j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId {
    pub group: usize,
    pub index: usize,
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.group, self.index)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentType {
    pub count: usize,
    pub values: Vec<Rational>,
}

#[derive(Clone, Debug)]
pub struct Instance {
    m: usize,
    types: Vec<AgentType>,
    group_start: Vec<usize>,
    group_of: Vec<usize>,
    // good values per type with the tag already attached
    tagged: Vec<Vec<Value>>,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m && self.types == other.types
    }
}

impl Instance {
    pub fn new(m: usize, types: Vec<AgentType>) -> Result<Self> {
        if types.is_empty() {
            return Err(Error::input("instance needs at least one agent type"));
        }
        let mut group_start = Vec::with_capacity(types.len() + 1);
        let mut group_of = Vec::new();
        let mut tagged = Vec::with_capacity(types.len());
        group_start.push(0);
        for (t, ty) in types.iter().enumerate() {
            if ty.count == 0 {
                return Err(Error::input(format!("type {t} has count 0")));
            }
            if ty.values.len() != m {
                return Err(Error::input(format!(
                    "type {t} lists {} values for {m} goods",
                    ty.values.len()
                )));
            }
            if let Some(g) = ty.values.iter().position(|v| v < &Rational::default()) {
                return Err(Error::input(format!("type {t} values good {g} negatively")));
            }
            group_of.extend(std::iter::repeat_n(t, ty.count));
            group_start.push(group_of.len());
            tagged.push(
                ty.values
                    .iter()
                    .enumerate()
                    .map(|(g, v)| Value::new(v.clone(), pow2(g)))
                    .collect(),
            );
        }
        Ok(Instance {
            m,
            types,
            group_start,
            group_of,
            tagged,
        })
    }

    pub fn num_goods(&self) -> usize {
        self.m
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn num_agents(&self) -> usize {
        self.group_of.len()
    }

    pub fn types(&self) -> &[AgentType] {
        &self.types
    }

    pub fn group_of(&self, a: Agent) -> usize {
        self.group_of[a]
    }

    pub fn group_agents(&self, t: usize) -> Range<Agent> {
        self.group_start[t]..self.group_start[t + 1]
    }

    pub fn group_size(&self, t: usize) -> usize {
        self.types[t].count
    }

    pub fn agent_id(&self, a: Agent) -> AgentId {
        let group = self.group_of[a];
        AgentId {
            group,
            index: a - self.group_start[group],
        }
    }

    pub fn agent(&self, id: AgentId) -> Agent {
        self.group_start[id.group] + id.index
    }

    /// Value of a single good for type `t`, tag included.
    pub fn good_value(&self, t: usize, g: Good) -> &Value {
        &self.tagged[t][g]
    }

    /// `v_t(S)` for goods already known to be in range.
    pub fn value<'a>(&self, t: usize, goods: impl IntoIterator<Item = &'a Good>) -> Value {
        let row = &self.tagged[t];
        let mut acc = Value::zero();
        for &g in goods {
            acc += &row[g];
        }
        acc
    }

    pub fn value_of(&self, t: usize, goods: &[Good]) -> Result<Value> {
        if t >= self.num_types() {
            return Err(Error::input(format!("no type {t}")));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &g in goods {
            if g >= self.m {
                return Err(Error::input(format!("good {g} out of range 0..{}", self.m)));
            }
            if !seen.insert(g) {
                return Err(Error::input(format!("good {g} repeated in bundle")));
            }
        }
        Ok(self.value(t, goods))
    }

    pub fn agent_value<'a>(&self, a: Agent, goods: impl IntoIterator<Item = &'a Good>) -> Value {
        self.value(self.group_of[a], goods)
    }

    /// Folds the tags into the base values: `v'(g) = v(g) + eps·2^g`.
    pub fn explicit_perturbation(&self, eps: &Rational) -> Result<Instance> {
        if eps <= &Rational::default() {
            return Err(Error::input("perturbation epsilon must be positive"));
        }
        let types = self
            .types
            .iter()
            .map(|ty| AgentType {
                count: ty.count,
                values: ty
                    .values
                    .iter()
                    .enumerate()
                    .map(|(g, v)| v + eps * pow2(g))
                    .collect(),
            })
            .collect();
        Instance::new(self.m, types)
    }

    pub fn to_json(&self) -> InstanceJson {
        InstanceJson {
            m: self.m,
            types: self
                .types
                .iter()
                .map(|ty| TypeJson {
                    count: ty.count,
                    values: ty
                        .values
                        .iter()
                        .map(|v| serde_json::Value::String(format_rational(v)))
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Instance> {
        let raw: InstanceJson =
            serde_json::from_str(s).map_err(|e| Error::input(format!("instance JSON: {e}")))?;
        raw.into_instance()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("instance serialises")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceJson {
    pub m: usize,
    pub types: Vec<TypeJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TypeJson {
    pub count: usize,
    pub values: Vec<serde_json::Value>,
}

impl InstanceJson {
    pub fn into_instance(self) -> Result<Instance> {
        let mut types = Vec::with_capacity(self.types.len());
        for (t, ty) in self.types.into_iter().enumerate() {
            let values = ty
                .values
                .iter()
                .enumerate()
                .map(|(g, v)| json_rational(v).map_err(|e| Error::input(format!("type {t} good {g}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            types.push(AgentType {
                count: ty.count,
                values,
            });
        }
        Instance::new(self.m, types)
    }
}

pub fn json_rational(v: &serde_json::Value) -> Result<Rational> {
    match v {
        serde_json::Value::String(s) => parse_rational(s),
        serde_json::Value::Number(n) => match n.as_i64() {
            Some(i) => Ok(Rational::from_integer(i.into())),
            None => Err(Error::input(format!(
                "number {n} is not an integer, write an exact fraction string"
            ))),
        },
        other => Err(Error::input(format!("expected a rational, got {other}"))),
    }
}
