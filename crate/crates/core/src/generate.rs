//! Seeded random instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::instance::{AgentType, Instance};
use crate::value::int;

/// Integer values drawn uniformly from `0..=max_value`.
pub fn random_instance(sizes: &[usize], m: usize, max_value: u32, seed: u64) -> Result<Instance> {
    if sizes.is_empty() {
        return Err(Error::input("need at least one group"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let types = sizes
        .iter()
        .map(|&count| AgentType {
            count,
            values: (0..m).map(|_| int(rng.gen_range(0..=max_value) as i64)).collect(),
        })
        .collect();
    Instance::new(m, types)
}

/// Group sizes and good count drawn from a seed, within the given caps.
/// At least one good per agent unless `allow_scarce` is set.
pub fn random_shape(
    rng: &mut ChaCha8Rng,
    k: usize,
    max_group: usize,
    max_agents: usize,
    max_goods: usize,
    allow_scarce: bool,
) -> (Vec<usize>, usize) {
    let mut sizes: Vec<usize> = (0..k).map(|_| rng.gen_range(1..=max_group)).collect();
    while sizes.iter().sum::<usize>() > max_agents {
        let i = sizes.iter().enumerate().max_by_key(|(_, s)| **s).map(|(i, _)| i).expect("k >= 1");
        sizes[i] -= 1;
    }
    let n: usize = sizes.iter().sum();
    let lo = if allow_scarce { 1 } else { n.min(max_goods) };
    let m = rng.gen_range(lo..=max_goods.max(lo));
    (sizes, m)
}
