//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use efx_core::charity::{charity_allocate, CharityOptions};
use efx_core::few_types::few_types_allocate;
use efx_core::generate::{random_instance, random_shape};
use efx_core::oracle::{brute_force_efx_recheck, brute_force_exists_alpha_efx, verify_trace};
use efx_core::ppa::{self, check_properties, config_hash, configuration, run_ppa, run_ppa_types, seed_allocation};
use efx_core::trace::Trace;
use efx_core::resolution::{cycle_resolution, potential_phi};
use efx_core::value::{int, pow2, rational};
use efx_core::{
    check_alpha_efx, check_charity, Allocation, AgentType, EdgeLabel, EnvyGraph, GraphKind, Instance, Rational,
};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn few_corpus() -> Vec<Instance> {
    (0..500u64)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = 1 + (seed % 4) as usize;
            let (sizes, m) = random_shape(&mut rng, k, 4, 12, 16, seed % 10 == 0);
            random_instance(&sizes, m, 20, rng.gen()).unwrap()
        })
        .collect()
}

fn epsilons() -> [Rational; 3] {
    [rational(1, 10), rational(1, 4), rational(1, 2)]
}

fn charity_corpus() -> Vec<(Instance, Rational)> {
    (0..300u64)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(10_000 + seed);
            let k = rng.gen_range(1..=5);
            let (sizes, m) = random_shape(&mut rng, k, 3, 15, 25, false);
            let inst = random_instance(&sizes, m, 20, rng.gen()).unwrap();
            (inst, epsilons()[(seed % 3) as usize].clone())
        })
        .collect()
}

fn small_corpus() -> Vec<Instance> {
    (0..100u64)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(20_000 + seed);
            let k = rng.gen_range(1..=4);
            let (sizes, m) = random_shape(&mut rng, k, 4, 4, 7, false);
            random_instance(&sizes, m, 20, rng.gen()).unwrap()
        })
        .collect()
}

fn first_failure(results: Vec<Result<(), String>>) -> Result<(), String> {
    results.into_iter().collect()
}

fn four_types_complete(corpus: &[Instance]) -> Outcome {
    let tt = rational(2, 3);
    let results = corpus
        .par_iter()
        .enumerate()
        .map(|(i, inst)| {
            let r = few_types_allocate(inst).map_err(|e| format!("instance {i}: {e}"))?;
            if !r.allocation.is_complete() {
                return Err(format!("instance {i}: {} goods left in the pool", r.allocation.pool.len()));
            }
            let cert = check_alpha_efx(inst, &r.allocation, &tt).map_err(|e| e.to_string())?;
            if !cert.pass {
                return Err(format!("instance {i}: {:?}", cert.violations.first()));
            }
            Ok(())
        })
        .collect();
    first_failure(results)?;
    Ok(format!("{} instances complete and 2/3-EFX", corpus.len()))
}

fn ppa_postconditions(corpus: &[Instance]) -> Outcome {
    let results: Vec<Result<bool, String>> = corpus
        .par_iter()
        .enumerate()
        .map(|(i, inst)| {
            let seed = seed_allocation(inst).map_err(|e| format!("instance {i}: {e}"))?;
            let run = run_ppa_types(inst, &seed).map_err(|e| format!("instance {i}: {e}"))?;
            let y = &run.allocation;
            if let Some(v) = check_properties(inst, y).first() {
                return Err(format!("instance {i}: property {} fails for agent {}", v.property, v.agent));
            }
            if y.pool.is_empty() {
                return Ok(false);
            }
            let sources = EnvyGraph::build(inst, y, GraphKind::Enhanced).sources();
            if sources.is_empty() {
                return Err(format!("instance {i}: incomplete output without a source"));
            }
            if let Some(&s) = sources.iter().find(|&&s| y.bundles[s].len() != 2) {
                return Err(format!("instance {i}: source {s} holds {} goods", y.bundles[s].len()));
            }
            Ok(true)
        })
        .collect();
    let incomplete = results.into_iter().collect::<Result<Vec<bool>, String>>()?;
    let n = incomplete.iter().filter(|&&b| b).count();
    Ok(format!("{} outputs satisfy properties 1-4, {n} incomplete with paired sources", corpus.len()))
}

fn termination(corpus: &[Instance]) -> Outcome {
    let results: Vec<Result<(usize, usize), String>> = corpus
        .par_iter()
        .enumerate()
        .map(|(i, inst)| {
            let r = few_types_allocate(inst).map_err(|e| format!("instance {i}: {e}"))?;
            let report = verify_trace(&r.trace, inst).map_err(|e| format!("instance {i}: {e}"))?;
            if let Some(m) = report.mismatches.first() {
                return Err(format!("instance {i}: event {} ({}): {}", m.event, m.step, m.message));
            }
            let cycles = r
                .trace
                .events
                .iter()
                .filter(|e| e.step == "cycle_reduced" || e.step == "cycle_enhanced")
                .count();
            Ok((cycles, r.stats.configs_recorded))
        })
        .collect();
    let mut counts = results.into_iter().collect::<Result<Vec<_>, String>>()?;
    for (name, inst, state) in [("S9_3", S9_3_INSTANCE, S9_3_STATE), ("S9_4", S9_4_INSTANCE, S9_4_STATE)] {
        counts.push(pairing_run(name, inst, state)?);
    }
    let cycles: usize = counts.iter().map(|c| c.0).sum();
    let configs: usize = counts.iter().map(|c| c.1).sum();
    Ok(format!("{cycles} potential-raising cycle resolutions, {configs} recorded configurations never revisited"))
}

// Hand-built states where the pairing steps fire: a group of two sharing a
// type, then three singleton types.
const S9_3_INSTANCE: &str = r#"{"m":8,"types":[
    {"count":2,"values":[1,2,2,3,5,0,0,0]},
    {"count":1,"values":[0,0,3,3,0,0,4,0]},
    {"count":1,"values":[0,0,0,0,0,4,5,0]},
    {"count":1,"values":[1,1,0,0,4,5,0,0]}]}"#;
const S9_3_STATE: &str = r#"{"bundles":[[0,1],[2,3],[6],[5],[4]],"pool":[7]}"#;
const S9_4_INSTANCE: &str = r#"{"m":9,"types":[
    {"count":2,"values":[1,2,2,3,5,0,0,0,0]},
    {"count":1,"values":[0,0,4,4,0,0,8,5,0]},
    {"count":1,"values":[0,0,0,0,0,4,5,0,0]},
    {"count":1,"values":[1,1,0,0,4,5,0,0,0]}]}"#;
const S9_4_STATE: &str = r#"{"bundles":[[0,1],[2,3],[6],[5],[4]],"pool":[7,8]}"#;

fn pairing_run(name: &str, inst: &str, state: &str) -> Result<(usize, usize), String> {
    let inst = Instance::from_json_str(inst).map_err(|e| e.to_string())?;
    let x = Allocation::from_json_str(state).map_err(|e| e.to_string())?;
    let run = run_ppa(&inst, &x, true, Trace::default()).map_err(|e| format!("{name}: {e}"))?;
    let report = verify_trace(&run.trace, &inst).map_err(|e| e.to_string())?;
    if let Some(m) = report.mismatches.first() {
        return Err(format!("{name}: event {} ({}): {}", m.event, m.step, m.message));
    }
    let mut recorded = BTreeSet::new();
    let mut cycles = 0;
    for ev in &run.trace.events {
        if ev.step == "cycle_reduced" || ev.step == "cycle_enhanced" {
            cycles += 1;
        }
        if ppa::StepId::parse(&ev.step).is_some() && recorded.contains(&config_hash(&configuration(&inst, &ev.allocation()))) {
            return Err(format!("{name}: step {} at iteration {} revisits a recorded configuration", ev.step, ev.iter));
        }
        if let Some(h) = &ev.config_hash {
            recorded.insert(h.clone());
        }
    }
    if recorded.is_empty() {
        return Err(format!("{name}: the pairing step did not fire"));
    }
    Ok((cycles, recorded.len()))
}

const S: usize = 0;
const I1: usize = 1;
const I2: usize = 2;
const I3: usize = 3;
const J: [usize; 4] = [4, 5, 6, 7];
const K: [usize; 5] = [8, 9, 10, 11, 12];

/// Each agent is its own type. Goods 0..10 are the k pairs, 10 is i1's,
/// 11 and 12 are i2's, 13 is i3's, 14 and 15 are s's, 16..20 the j goods.
fn thirteen_agents() -> (Instance, Allocation) {
    let m = 20;
    let mut values = vec![vec![1i64; m]; 13];
    values[S][14] = 2;
    values[S][15] = 2;
    values[S][10] = 10;
    for g in [10, 11, 12] {
        values[I1][g] = 10;
    }
    values[I2][11] = 10;
    values[I2][12] = 10;
    values[I2][13] = 31;
    values[I3][13] = 12;
    values[I3][..10].fill(6);
    values[I3][14] = 5;
    values[I3][15] = 5;
    for (l, &j) in J.iter().enumerate() {
        values[j][16 + l] = 10;
        values[j][11] = 4;
        values[j][12] = 4;
    }
    for (l, &k) in K.iter().enumerate() {
        values[k][2 * l] = 10;
        values[k][2 * l + 1] = 10;
    }
    let types = values
        .into_iter()
        .map(|v| AgentType {
            count: 1,
            values: v.into_iter().map(int).collect(),
        })
        .collect();
    let inst = Instance::new(m, types).unwrap();
    let mut x = Allocation::empty(&inst);
    let mut give = |a: usize, goods: &[usize]| {
        for &g in goods {
            x.pool.remove(&g);
            x.bundles[a].insert(g);
        }
    };
    give(S, &[14, 15]);
    give(I1, &[10]);
    give(I2, &[11, 12]);
    give(I3, &[13]);
    for (l, &j) in J.iter().enumerate() {
        give(j, &[16 + l]);
    }
    for (l, &k) in K.iter().enumerate() {
        give(k, &[2 * l, 2 * l + 1]);
    }
    x.validate(&inst).unwrap();
    (inst, x)
}

fn edge_counts(g: &EnvyGraph) -> (usize, usize) {
    let edges = g.edges();
    let envy = edges.iter().filter(|e| e.2 == EdgeLabel::Envy).count();
    (envy, edges.len() - envy)
}

fn edge_growth() -> Outcome {
    let (inst, x) = thirteen_agents();
    let ge = EnvyGraph::build(&inst, &x, GraphKind::Enhanced);
    let before_expected = vec![
        (S, I1, EdgeLabel::Envy),
        (I1, I2, EdgeLabel::Envy),
        (I2, I3, EdgeLabel::Envy),
        (I3, S, EdgeLabel::Red),
    ];
    let before_actual = ge.edges();
    let (be, br) = edge_counts(&ge);

    let y = cycle_resolution(&inst, &x, &ge, &[S, I1, I2, I3]).map_err(|e| e.to_string())?;
    let ge2 = EnvyGraph::build(&inst, &y, GraphKind::Enhanced);
    let mut after_problems = Vec::new();
    for &k in &K {
        if ge2.label(I3, k) != Some(EdgeLabel::Envy) {
            after_problems.push(format!("no envy edge i3->{k}"));
        }
    }
    for &j in &J {
        if ge2.label(j, I1) != Some(EdgeLabel::Red) {
            after_problems.push(format!("no red edge {j}->i1"));
        }
    }
    let phi_up = potential_phi(&inst, &y) > potential_phi(&inst, &x);
    let (ae, ar) = edge_counts(&ge2);
    let summary = format!(
        "before: {be} envy + {br} red edges; after: {ae} envy + {ar} red edges; potential increased: {phi_up}"
    );
    if !phi_up || !after_problems.is_empty() {
        return Err(format!("{summary}; {}", after_problems.join(", ")));
    }
    if before_actual != before_expected {
        let extra: Vec<String> = before_actual
            .iter()
            .filter(|e| !before_expected.contains(e))
            .map(|(a, b, l)| format!("{a}->{b} {}", l.as_str()))
            .collect();
        return Err(format!(
            "{summary}; the starting graph cannot have exactly 3 envy + 1 red edge: \
             each k holds two goods, is a source, and i3 values its bundle like its own, \
             so i3->k is red as well (extra: {})",
            extra.join(", ")
        ));
    }
    Ok(summary)
}

fn charity_bound(k: usize, eps: &Rational, d: usize) -> usize {
    // ceil(2k / (eps d)) with eps = p/q.
    let p: usize = eps.numer().try_into().unwrap();
    let q: usize = eps.denom().try_into().unwrap();
    (2 * k * q).div_ceil(p * d)
}

fn charity_guarantees(corpus: &[(Instance, Rational)]) -> Outcome {
    let results: Vec<Result<usize, String>> = corpus
        .par_iter()
        .enumerate()
        .map(|(i, (inst, eps))| {
            let r = charity_allocate(inst, eps, &CharityOptions::default()).map_err(|e| format!("instance {i}: {e}"))?;
            let x = &r.allocation;
            let alpha = rational(1, 1) - eps;
            let cert = check_alpha_efx(inst, x, &alpha).map_err(|e| e.to_string())?;
            if !cert.pass {
                return Err(format!("instance {i}: not (1-eps)-EFX: {:?}", cert.violations.first()));
            }
            let pool = check_charity(inst, x, Some(eps)).map_err(|e| e.to_string())?;
            if !pool.pass {
                return Err(format!("instance {i}: heavy envy of the pool: {:?}", pool.violations.first()));
            }
            let rep = &r.report;
            if rep.search_limited {
                return Err(format!("instance {i}: rainbow search hit its budget"));
            }
            let bound = charity_bound(inst.num_types(), eps, rep.d) + rep.low_demand_parts;
            if x.pool.len() > bound {
                return Err(format!("instance {i}: charity {} exceeds {bound}", x.pool.len()));
            }
            Ok(x.pool.len())
        })
        .collect();
    let sizes = results.into_iter().collect::<Result<Vec<_>, String>>()?;
    let max = sizes.iter().max().copied().unwrap_or(0);
    let total: usize = sizes.iter().sum();
    Ok(format!("{} instances certified; total charity {total}, largest {max}", corpus.len()))
}

fn oracle_agreement(few: &[Instance], charity: &[(Instance, Rational)], small: &[Instance]) -> Outcome {
    let tiny = |inst: &Instance| inst.num_agents() <= 4 && inst.num_goods() <= 7;
    let mut jobs: Vec<(Instance, Option<Rational>)> = Vec::new();
    for inst in few.iter().chain(small).filter(|i| tiny(i)) {
        jobs.push((inst.clone(), None));
    }
    for (inst, eps) in charity.iter().filter(|(i, _)| tiny(i)) {
        jobs.push((inst.clone(), Some(eps.clone())));
    }
    let tt = rational(2, 3);
    let results = jobs
        .par_iter()
        .enumerate()
        .map(|(i, (inst, eps))| {
            let found = brute_force_exists_alpha_efx(inst, &tt, true).map_err(|e| e.to_string())?;
            if found.is_none() {
                return Err(format!("case {i}: no complete 2/3-EFX allocation found"));
            }
            let (x, alpha) = match eps {
                None => (few_types_allocate(inst).map_err(|e| e.to_string())?.allocation, tt.clone()),
                Some(eps) => {
                    let r = charity_allocate(inst, eps, &CharityOptions::default()).map_err(|e| e.to_string())?;
                    (r.allocation, rational(1, 1) - eps)
                }
            };
            let cert = brute_force_efx_recheck(inst, &x, &alpha).map_err(|e| e.to_string())?;
            if !cert.pass {
                return Err(format!("case {i}: solver output fails the pairwise re-check"));
            }
            Ok(())
        })
        .collect();
    first_failure(results)?;
    Ok(format!("{} small instances agree with exhaustive search", jobs.len()))
}

fn perturbation_equivalence() -> Outcome {
    let alphas = [rational(1, 1), rational(2, 3), rational(1, 2), rational(3, 4), rational(9, 10)];
    let results: Vec<Result<usize, String>> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(30_000 + seed);
            let k = rng.gen_range(1..=3);
            let (sizes, m) = random_shape(&mut rng, k, 2, 6, 8, true);
            let inst = random_instance(&sizes, m, 20, rng.gen()).unwrap();
            let eps = Rational::from_integer(1.into()) / pow2(m + 8);
            let pert = inst.explicit_perturbation(&eps).map_err(|e| e.to_string())?;
            let subsets: Vec<Vec<usize>> = (0..1usize << m)
                .map(|mask| (0..m).filter(|g| mask >> g & 1 == 1).collect())
                .collect();
            let mut checked = 0;
            for t in 0..inst.num_types() {
                let tagged: Vec<_> = subsets.iter().map(|s| inst.value(t, s)).collect();
                let plain: Vec<_> = subsets.iter().map(|s| pert.value(t, s).base().clone()).collect();
                for alpha in &alphas {
                    let tagged_scaled: Vec<_> = tagged.iter().map(|v| v.scale(alpha)).collect();
                    let plain_scaled: Vec<_> = plain.iter().map(|v| v * alpha).collect();
                    for a in 0..subsets.len() {
                        for b in 0..subsets.len() {
                            if tagged[a].cmp(&tagged_scaled[b]) != plain[a].cmp(&plain_scaled[b]) {
                                return Err(format!("seed {seed}: type {t}, alpha {alpha}, {:?} vs {:?}", subsets[a], subsets[b]));
                            }
                            checked += 1;
                        }
                    }
                }
            }
            Ok(checked)
        })
        .collect();
    let counts = results.into_iter().collect::<Result<Vec<_>, String>>()?;
    Ok(format!("{} comparisons over 50 instances agree", counts.iter().sum::<usize>()))
}

struct Capture {
    code: i32,
    stdout: Vec<u8>,
    files: Vec<Vec<u8>>,
}

fn cli(args: &[&str], files: &[&Path]) -> Capture {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = efx_cli::run(std::iter::once("efx").chain(args.iter().copied()), &mut out, &mut err);
    Capture {
        code,
        stdout: out,
        files: files.iter().map(|f| fs::read(f).unwrap_or_default()).collect(),
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name);
    let s = |path: &Path| path.to_str().unwrap().to_string();
    let (inst, small, sol, trace, ctrace) = (p("inst.json"), p("small.json"), p("sol.json"), p("t.jsonl"), p("c.jsonl"));
    let (inst, small, sol, trace, ctrace) = (s(&inst), s(&small), s(&sol), s(&trace), s(&ctrace));
    let commands: Vec<(Vec<&str>, Vec<&str>)> = vec![
        (vec!["gen", "--types", "3", "--sizes", "2,1,2", "--goods", "12", "--seed", "9", "--out", &inst], vec![&inst]),
        (vec!["gen", "--types", "2", "--sizes", "2,1", "--goods", "5", "--seed", "4", "--out", &small], vec![&small]),
        (vec!["solve", "--algo", "fewtypes", "--input", &inst, "--out", &sol, "--trace", &trace], vec![&sol, &trace]),
        (vec!["verify", "--instance", &inst, "--allocation", &sol], vec![]),
        (vec!["replay", "--trace", &trace, "--instance", &inst], vec![]),
        (vec!["solve", "--algo", "charity", "--epsilon", "1/10", "--input", &inst, "--trace", &ctrace], vec![&ctrace]),
        (vec!["solve", "--algo", "charity", "--jobs", "3", "--input", &inst, "--input", &small], vec![]),
        (vec!["oracle", "--complete", "--input", &small], vec![]),
        (vec!["perturb", "--input", &small], vec![]),
        (vec!["graph", "--instance", &inst, "--allocation", &sol, "--kind", "enhanced"], vec![]),
    ];
    for (args, files) in &commands {
        let paths: Vec<&Path> = files.iter().map(|f| Path::new(*f)).collect();
        let first = cli(args, &paths);
        if first.code != 0 {
            return Err(format!("`efx {}` exited {}", args.join(" "), first.code));
        }
        let second = cli(args, &paths);
        if first.code != second.code || first.stdout != second.stdout || first.files != second.files {
            return Err(format!("`efx {}` differs between runs", args.join(" ")));
        }
    }
    Ok(format!("{} commands byte-identical on rerun", commands.len()))
}

fn main() -> ExitCode {
    let few = few_corpus();
    let charity = charity_corpus();
    let small = small_corpus();
    let criteria: Vec<Criterion> = vec![
        ("four-types completeness", Box::new(|| four_types_complete(&few))),
        ("3PA+ postconditions", Box::new(|| ppa_postconditions(&few))),
        ("potential and configuration termination", Box::new(|| termination(&few))),
        ("13-agent edge growth fixture", Box::new(edge_growth)),
        ("charity guarantees", Box::new(|| charity_guarantees(&charity))),
        ("oracle agreement", Box::new(|| oracle_agreement(&few, &charity, &small))),
        ("perturbation equivalence", Box::new(perturbation_equivalence)),
        ("CLI determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
