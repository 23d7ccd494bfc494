//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use dlpp_core::fixtures::InstanceBuilder;
use dlpp_core::network::{Instance, ReferencePlan, ServiceClass};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const CLASSES: [ServiceClass; 4] = [ServiceClass::OneDay, ServiceClass::TwoDay, ServiceClass::ThreeDay, ServiceClass::Other];

fn vol(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo..hi) * 10.0).round() / 10.0
}

#[derive(Debug, Clone, Copy)]
pub enum Paths {
    /// Primary only.
    Single,
    /// Every sort pair.
    All,
    /// Primary plus a random subset of the others.
    Random,
}

/// A random instance. `menus` chooses trailer types per pair: `None` lets
/// every pair use every type; `Some(true)` draws a random nonempty subset.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    pairs: usize,
    commodities: usize,
    types: &[(f64, f64)],
    paths: Paths,
    random_menus: bool,
    volume: (f64, f64),
) -> Instance {
    let mut b = InstanceBuilder::new();
    let tnames: Vec<String> = (0..types.len()).map(|v| format!("t{v}")).collect();
    for (name, &(q, c)) in tnames.iter().zip(types) {
        b = b.trailer(name, q, c);
    }
    let snames: Vec<String> = (0..pairs).map(|s| format!("s{s}")).collect();
    for name in &snames {
        let mut allowed: Vec<&str> = tnames.iter().map(String::as_str).collect();
        if random_menus && allowed.len() > 1 {
            allowed.shuffle(rng);
            let n = rng.random_range(1..=allowed.len());
            allowed.truncate(n);
        }
        b = b.sort_pair(name, &allowed);
    }
    for k in 0..commodities {
        let primary = rng.random_range(0..pairs);
        let others: Vec<usize> = (0..pairs).filter(|&s| s != primary).collect();
        let alts: Vec<usize> = match paths {
            Paths::Single => Vec::new(),
            Paths::All => others,
            Paths::Random => others.into_iter().filter(|_| rng.random_bool(0.5)).collect(),
        };
        let alts: Vec<(&str, f64)> =
            alts.iter().map(|&s| (snames[s].as_str(), rng.random_range(1.0..100.0_f64).round())).collect();
        let class = CLASSES[rng.random_range(0..CLASSES.len())];
        let q = vol(rng, volume.0, volume.1);
        b = b.commodity(&format!("k{k}"), q, class, &snames[primary], &alts);
    }
    b.build().expect("generated instances are valid")
}

fn random_types(rng: &mut ChaCha8Rng, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| {
            let q = rng.random_range(2..=12) as f64 * 5.0;
            let c = (q * rng.random_range(0.6..1.4_f64)).round().max(1.0);
            (q, c)
        })
        .collect()
}

/// One trailer type, one compatible pair per commodity.
pub fn case1(rng: &mut ChaCha8Rng) -> Instance {
    let types = random_types(rng, 1);
    let (s, k) = (rng.random_range(1..=5), rng.random_range(1..=8));
    random_instance(rng, s, k, &types, Paths::Single, false, (1.0, 80.0))
}

/// One trailer type, every pair compatible with every commodity.
pub fn case2(rng: &mut ChaCha8Rng) -> Instance {
    let types = random_types(rng, 1);
    let (s, k) = (rng.random_range(1..=4), rng.random_range(1..=6));
    random_instance(rng, s, k, &types, Paths::All, false, (1.0, 80.0))
}

/// Several trailer types, one compatible pair per commodity.
pub fn case3(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.random_range(2..=3);
    let types = random_types(rng, n);
    let (s, k) = (rng.random_range(1..=4), rng.random_range(1..=8));
    random_instance(rng, s, k, &types, Paths::Single, true, (1.0, 80.0))
}

/// Several trailer types shared by every pair, every pair compatible.
pub fn case4(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.random_range(2..=3);
    let types = random_types(rng, n);
    let (s, k) = (rng.random_range(1..=3), rng.random_range(1..=5));
    random_instance(rng, s, k, &types, Paths::All, false, (1.0, 60.0))
}

/// Unit volumes and costs with one trailer type whose capacity is the most
/// commodities any pair can receive: optimal plans are set covers.
pub fn case5(rng: &mut ChaCha8Rng) -> Instance {
    let pairs = rng.random_range(2..=8);
    let commodities = rng.random_range(2..=8);
    let compat: Vec<Vec<usize>> = (0..commodities)
        .map(|_| {
            let mut set: Vec<usize> = (0..pairs).filter(|_| rng.random_bool(0.35)).collect();
            if set.is_empty() {
                set.push(rng.random_range(0..pairs));
            }
            set.shuffle(rng);
            set
        })
        .collect();
    let q = (0..pairs).map(|s| compat.iter().filter(|c| c.contains(&s)).count()).max().unwrap_or(1).max(1) as f64;
    let mut b = InstanceBuilder::new().trailer("t", q, 1.0);
    let snames: Vec<String> = (0..pairs).map(|s| format!("s{s}")).collect();
    for name in &snames {
        b = b.sort_pair(name, &["t"]);
    }
    for (k, set) in compat.iter().enumerate() {
        let alts: Vec<(&str, f64)> = set[1..].iter().map(|&s| (snames[s].as_str(), 10.0)).collect();
        b = b.commodity(&format!("k{k}"), 1.0, ServiceClass::OneDay, &snames[set[0]], &alts);
    }
    b.build().expect("generated instances are valid")
}

/// Small instances for exhaustive enumeration: at most 3 pairs,
/// 4 commodities and 2 trailer types, with a random reference plan.
pub fn small_dlpp(rng: &mut ChaCha8Rng) -> Instance {
    let nt = rng.random_range(1..=2);
    let types: Vec<(f64, f64)> = (0..nt)
        .map(|_| {
            let q = [20.0, 25.0, 30.0, 40.0, 50.0][rng.random_range(0..5)];
            (q, (q * rng.random_range(0.7..1.3_f64)).round())
        })
        .collect();
    let (s, k) = (rng.random_range(1..=3), rng.random_range(1..=4));
    let mut inst = random_instance(rng, s, k, &types, Paths::Random, true, (1.0, 40.0));
    let gamma: Vec<u32> = (0..inst.grid_len()).map(|_| rng.random_range(0..=3)).collect();
    inst.reference_plan = Some(ReferencePlan::from_grid(&inst, &gamma).unwrap());
    inst
}
