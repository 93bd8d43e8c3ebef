//! Hand-built states that reach the rarely taken branches of 3PA+ and of the
//! critical-goods case analysis.

use std::collections::BTreeSet;

use efx_core::few_types::{allocate_criticals, CriticalCase};
use efx_core::fairness::{check_alpha_efx, critical_goods, one_half, two_thirds};
use efx_core::ppa::{check_properties, ppa_step, run_ppa, StepId};
use efx_core::trace::Trace;
use efx_core::{Allocation, EdgeLabel, EnvyGraph, GraphKind, Instance};

fn inst(json: &str) -> Instance {
    Instance::from_json_str(json).unwrap()
}

fn alloc(json: &str) -> Allocation {
    Allocation::from_json_str(json).unwrap()
}

// Group D = {d1, d2} (agents 0, 1), then singletons a1, b1, c1 (agents 2, 3, 4).
// Leading path d1 -> c1 -> b1 -> a1, and a1 envies X_{d2}.
const S9_3_INSTANCE: &str = r#"{"m":8,"types":[
    {"count":2,"values":[1,2,2,3,5,0,0,0]},
    {"count":1,"values":[0,0,3,3,0,0,4,0]},
    {"count":1,"values":[0,0,0,0,0,4,5,0]},
    {"count":1,"values":[1,1,0,0,4,5,0,0]}]}"#;
const S9_3_STATE: &str = r#"{"bundles":[[0,1],[2,3],[6],[5],[4]],"pool":[7]}"#;

// Same shape, but a1 only wants one good of X_{d2} together with pool good 7.
const S9_4_INSTANCE: &str = r#"{"m":9,"types":[
    {"count":2,"values":[1,2,2,3,5,0,0,0,0]},
    {"count":1,"values":[0,0,4,4,0,0,8,5,0]},
    {"count":1,"values":[0,0,0,0,0,4,5,0,0]},
    {"count":1,"values":[1,1,0,0,4,5,0,0,0]}]}"#;
const S9_4_STATE: &str = r#"{"bundles":[[0,1],[2,3],[6],[5],[4]],"pool":[7,8]}"#;

#[test]
fn s9_3_state_shape() {
    let i = inst(S9_3_INSTANCE);
    let x = alloc(S9_3_STATE);
    assert!(check_properties(&i, &x).is_empty());
    let ge = EnvyGraph::build(&i, &x, GraphKind::Enhanced);
    let expected = vec![
        (0, 1, EdgeLabel::Envy),
        (0, 4, EdgeLabel::Envy),
        (2, 1, EdgeLabel::Envy),
        (3, 2, EdgeLabel::Envy),
        (4, 3, EdgeLabel::Envy),
    ];
    assert_eq!(ge.edges(), expected);
    assert_eq!(ge.sources(), vec![0]);
}

#[test]
fn s9_3_hands_x_d2_to_the_path_end() {
    let i = inst(S9_3_INSTANCE);
    let x = alloc(S9_3_STATE);
    let (step, y) = ppa_step(&i, &x, true).unwrap().unwrap();
    assert_eq!(step, StepId::S9_3);
    // c1 takes X_{b1}, b1 takes X_{a1}, d2 takes X_{c1}, a1 takes X_{d2}.
    assert_eq!(y, alloc(r#"{"bundles":[[0,1],[4],[2,3],[6],[5]],"pool":[7]}"#));
    let run = run_ppa(&i, &x, true, Trace::default()).unwrap();
    assert_eq!(run.stats.steps.get("S9_3"), Some(&1));
    assert_eq!(run.stats.configs_recorded, 1);
    assert!(check_properties(&i, &run.allocation).is_empty());
}

#[test]
fn s9_3_is_off_without_types_mode() {
    let i = inst(S9_3_INSTANCE);
    let x = alloc(S9_3_STATE);
    assert!(ppa_step(&i, &x, false).unwrap().is_none());
}

#[test]
fn s9_4_builds_a_new_pair() {
    let i = inst(S9_4_INSTANCE);
    let x = alloc(S9_4_STATE);
    assert!(check_properties(&i, &x).is_empty());
    let (step, y) = ppa_step(&i, &x, true).unwrap().unwrap();
    assert_eq!(step, StepId::S9_4);
    // a1 pairs its favourite good of X_{d2} with pool good 7.
    assert_eq!(y, alloc(r#"{"bundles":[[0,1],[4],[3,7],[6],[5]],"pool":[2,8]}"#));
    let run = run_ppa(&i, &x, true, Trace::default()).unwrap();
    assert_eq!(run.stats.steps.get("S9_4"), Some(&1));
    assert!(check_properties(&i, &run.allocation).is_empty());
}

fn criticals(i: &Instance, x: &Allocation) -> (BTreeSet<usize>, EnvyGraph) {
    let c = critical_goods(i, x, &one_half()).into_keys().collect();
    (c, EnvyGraph::build(i, x, GraphKind::Enhanced))
}

#[test]
fn two_criticals_two_sources() {
    let i = inst(
        r#"{"m":8,"types":[
        {"count":1,"values":[1,1,0,0,4,0,0,0]},
        {"count":1,"values":[0,0,1,1,0,4,0,0]},
        {"count":1,"values":[0,0,0,0,4,0,3,0]},
        {"count":1,"values":[0,0,0,0,0,4,0,3]}]}"#,
    );
    let x = alloc(r#"{"bundles":[[0,1],[2,3],[4],[5]],"pool":[6,7]}"#);
    let (c, ge) = criticals(&i, &x);
    assert_eq!(c, [6, 7].into());
    assert_eq!(ge.sources(), vec![0, 1]);
    let (y, case) = allocate_criticals(&i, &x, &c, &ge).unwrap();
    assert_eq!(case, CriticalCase::TwoCritTwoSources);
    assert_eq!(y, alloc(r#"{"bundles":[[0,1,6],[2,3,7],[4],[5]],"pool":[]}"#));
    assert!(check_alpha_efx(&i, &y, &two_thirds()).unwrap().pass);
}

#[test]
fn one_critical_goes_to_the_source() {
    let i = inst(
        r#"{"m":4,"types":[
        {"count":1,"values":[1,1,4,0]},
        {"count":1,"values":[0,0,4,3]}]}"#,
    );
    let x = alloc(r#"{"bundles":[[0,1],[2]],"pool":[3]}"#);
    let (c, ge) = criticals(&i, &x);
    assert_eq!(c, [3].into());
    let (y, case) = allocate_criticals(&i, &x, &c, &ge).unwrap();
    assert_eq!(case, CriticalCase::AtMostTwoCritOneSource);
    assert_eq!(y.bundles[0], [0, 1, 3].into());
    assert!(check_alpha_efx(&i, &y, &two_thirds()).unwrap().pass);
}

const THREE_CRIT_SINGLE_D: &str = r#"{"m":8,"types":[
    {"count":1,"values":[1,1,4,4,4,0,0,0]},
    {"count":1,"values":[0,0,4,0,0,3,0,0]},
    {"count":1,"values":[0,0,0,4,0,0,3,0]},
    {"count":1,"values":[0,0,0,0,4,0,0,3]}]}"#;

#[test]
fn three_criticals_singleton_group() {
    let i = inst(THREE_CRIT_SINGLE_D);
    let x = alloc(r#"{"bundles":[[0,1],[2],[3],[4]],"pool":[5,6,7]}"#);
    let (c, ge) = criticals(&i, &x);
    assert_eq!(c.len(), 3);
    assert_eq!(ge.sources(), vec![0]);
    let (y, case) = allocate_criticals(&i, &x, &c, &ge).unwrap();
    assert_eq!(case, CriticalCase::ThreeCritSingletonD);
    assert_eq!(y.bundles[0], [0, 1, 5, 6, 7].into());
    assert!(check_alpha_efx(&i, &y, &two_thirds()).unwrap().pass);
}

// D = {d1, d2} holds {0,1} and {2,3}; claimants hold 4, 5, 6 and claim 7, 8, 9.
fn big_d(d2_goods: [u32; 2], pool_for_d: [u32; 3]) -> Instance {
    let json = format!(
        r#"{{"m":10,"types":[
        {{"count":2,"values":[2,2,{},{},7,7,7,{},{},{}]}},
        {{"count":1,"values":[0,0,0,0,4,0,0,3,0,0]}},
        {{"count":1,"values":[0,0,0,0,0,4,0,0,3,0]}},
        {{"count":1,"values":[0,0,0,0,0,0,4,0,0,3]}}]}}"#,
        d2_goods[0], d2_goods[1], pool_for_d[0], pool_for_d[1], pool_for_d[2]
    );
    inst(&json)
}

const BIG_D_STATE: &str = r#"{"bundles":[[0,1],[2,3],[4],[5],[6]],"pool":[7,8,9]}"#;

#[test]
fn three_criticals_big_group_keeps_all() {
    let i = big_d([2, 3], [0, 0, 0]);
    let x = alloc(BIG_D_STATE);
    let (c, ge) = criticals(&i, &x);
    assert_eq!(c, [7, 8, 9].into());
    assert_eq!(ge.sources(), vec![0]);
    let (y, case) = allocate_criticals(&i, &x, &c, &ge).unwrap();
    assert_eq!(case, CriticalCase::ThreeCritBigDKeepAll);
    assert_eq!(y.bundles[0], [0, 1, 7, 8, 9].into());
    assert!(check_alpha_efx(&i, &y, &two_thirds()).unwrap().pass);
}

#[test]
fn three_criticals_big_group_splits() {
    // d2 values its own pair exactly like d1's, so d1 ∪ C is too rich for it.
    let i = big_d([2, 2], [1, 1, 1]);
    let x = alloc(BIG_D_STATE);
    let (c, ge) = criticals(&i, &x);
    assert_eq!(c, [7, 8, 9].into());
    assert_eq!(ge.sources(), vec![0]);
    let (y, case) = allocate_criticals(&i, &x, &c, &ge).unwrap();
    assert_eq!(case, CriticalCase::ThreeCritBigDSplit);
    // The least valued critical good (7) ends with the {2,3} holder; the
    // ordering invariant may swap the two D bundles.
    let with_h = y.bundles.iter().find(|b| b.contains(&7)).unwrap();
    assert_eq!(*with_h, [2, 3, 7].into());
    assert!(y.bundles.iter().any(|b| *b == [0, 1, 8, 9].into()));
    assert!(check_alpha_efx(&i, &y, &two_thirds()).unwrap().pass);
}

#[test]
fn claimant_margin_is_enforced() {
    // The claimant values the source bundle at its own level.
    let i = inst(
        r#"{"m":4,"types":[
        {"count":1,"values":[1,1,4,0]},
        {"count":1,"values":[2,2,4,3]}]}"#,
    );
    let x = alloc(r#"{"bundles":[[0,1],[2]],"pool":[3]}"#);
    let c: BTreeSet<usize> = [3].into();
    let ge = EnvyGraph::from_edges(2, GraphKind::Enhanced, [(0, 1, EdgeLabel::Envy)]);
    assert!(allocate_criticals(&i, &x, &c, &ge).is_err());
}
