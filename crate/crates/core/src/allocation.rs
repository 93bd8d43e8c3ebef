use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Agent, Good, Instance};

pub type Bundle = BTreeSet<Good>;

/// Agent bundles plus the unallocated pool. Together they partition the goods.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Allocation {
    pub bundles: Vec<Bundle>,
    pub pool: Bundle,
}

impl Allocation {
    /// Nothing allocated yet.
    pub fn empty(inst: &Instance) -> Self {
        Allocation {
            bundles: vec![Bundle::new(); inst.num_agents()],
            pool: (0..inst.num_goods()).collect(),
        }
    }

    pub fn bundle(&self, a: Agent) -> &Bundle {
        &self.bundles[a]
    }

    pub fn len(&self, a: Agent) -> usize {
        self.bundles[a].len()
    }

    /// Largest bundle cardinality.
    pub fn size(&self) -> usize {
        self.bundles.iter().map(|b| b.len()).max().unwrap_or(0)
    }

    pub fn is_complete(&self) -> bool {
        self.pool.is_empty()
    }

    pub fn holder(&self, g: Good) -> Option<Agent> {
        self.bundles.iter().position(|b| b.contains(&g))
    }

    /// Recomputes the pool as every good not held by an agent.
    pub(crate) fn refill_pool(&mut self, m: usize) {
        let held: BTreeSet<Good> = self.bundles.iter().flatten().copied().collect();
        self.pool = (0..m).filter(|g| !held.contains(g)).collect();
    }

    pub fn validate(&self, inst: &Instance) -> Result<()> {
        if self.bundles.len() != inst.num_agents() {
            return Err(Error::input(format!(
                "allocation has {} bundles for {} agents",
                self.bundles.len(),
                inst.num_agents()
            )));
        }
        let m = inst.num_goods();
        let mut seen = vec![false; m];
        for g in self.bundles.iter().flatten().chain(self.pool.iter()) {
            if *g >= m {
                return Err(Error::input(format!("good {g} out of range 0..{m}")));
            }
            if seen[*g] {
                return Err(Error::input(format!("good {g} appears twice")));
            }
            seen[*g] = true;
        }
        if let Some(g) = seen.iter().position(|s| !s) {
            return Err(Error::input(format!("good {g} is neither allocated nor pooled")));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Allocation> {
        serde_json::from_str(s).map_err(|e| Error::input(format!("allocation JSON: {e}")))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("allocation serialises")
    }
}
