//! Seeded instances shared by the benchmarks.

use efx_core::generate::random_instance;
use efx_core::{Allocation, Instance};

/// Four groups of `per_group` agents and `goods` goods.
pub fn four_types(per_group: usize, goods: usize, seed: u64) -> Instance {
    random_instance(&[per_group; 4], goods, 20, seed).expect("valid shape")
}

/// `k` groups of three agents, twice as many goods as agents.
pub fn charity_instance(k: usize, seed: u64) -> Instance {
    random_instance(&vec![3; k], 6 * k, 20, seed).expect("valid shape")
}

/// Goods dealt round robin, so every agent holds something.
pub fn round_robin(inst: &Instance) -> Allocation {
    let n = inst.num_agents();
    let mut x = Allocation::empty(inst);
    for g in 0..inst.num_goods() {
        x.pool.remove(&g);
        x.bundles[g % n].insert(g);
    }
    x
}
