#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use hwv::nwpd::{self, NwpdHandle, PolicyStore};
use hwv::optimizer::{AllocationProblem, SliceQuota, SubstrateId};
use hwv::policy::PolicyDocument;
use hwv::runner::Preset;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A random problem with at most six variables whose minima are feasible.
pub fn random_problem(rng: &mut ChaCha8Rng) -> AllocationProblem {
    loop {
        let n_sub = rng.gen_range(1..=3usize);
        let n_sl = rng.gen_range(1..=6 / n_sub);
        let substrates: Vec<SubstrateId> = (0..n_sub)
            .map(|i| if rng.gen_bool(0.5) { SubstrateId::bts(i) } else { SubstrateId::ap(i) })
            .collect();
        let quotas: Vec<SliceQuota> = (0..n_sl)
            .map(|_| SliceQuota {
                total: rng.gen_bool(0.8).then(|| rng.gen_range(0.1..n_sub as f64)),
                scheduled: rng.gen_bool(0.25).then(|| rng.gen_range(0.1..1.5)),
                contention: rng.gen_bool(0.25).then(|| rng.gen_range(0.1..1.5)),
            })
            .collect();
        let minima: Vec<Vec<f64>> = (0..n_sub)
            .map(|_| {
                (0..n_sl)
                    .map(|_| if rng.gen_bool(0.3) { rng.gen_range(0.0..0.25) } else { 0.0 })
                    .collect()
            })
            .collect();
        let utility: Vec<Vec<f64>> = (0..n_sub)
            .map(|_| (0..n_sl).map(|_| rng.gen_range(0.0..50.0)).collect())
            .collect();
        let weights: Vec<f64> = if rng.gen_bool(0.5) {
            vec![1.0; n_sub]
        } else {
            (0..n_sub).map(|_| rng.gen_range(0.5..3.0)).collect()
        };
        let p = AllocationProblem::new(substrates, quotas, minima, utility, weights)
            .expect("generated problem is well-formed");
        if p.check_feasibility().is_feasible() {
            return p;
        }
    }
}

/// n_vars × step × max|w·C|: the most a grid-restricted optimum can lose.
pub fn grid_error_bound(p: &AllocationProblem, step: f64) -> f64 {
    let mut max_c: f64 = 0.0;
    for k in 0..p.n_substrates() {
        for j in 0..p.n_slices() {
            max_c = max_c.max(p.weighted_coeff(k, j).abs());
        }
    }
    p.n_vars() as f64 * step * max_c
}

/// The unconstrained preset policy, made distinguishable per version.
pub fn versioned_policy(version: u64) -> PolicyDocument {
    let mut doc = Preset::find("unconstrained").unwrap().policy();
    doc.version = version;
    doc.slices[0].bid = Some(bid_for(version));
    doc
}

pub fn bid_for(version: u64) -> f64 {
    1.4 - 0.001 * version as f64
}

pub fn spawn_nwpd(store_path: &Path) -> (Arc<PolicyStore>, NwpdHandle) {
    let store = Arc::new(PolicyStore::open(store_path).unwrap());
    let handle = nwpd::spawn(store.clone(), "127.0.0.1:0".parse().unwrap()).unwrap();
    (store, handle)
}

pub fn read_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    ["weights.csv", "revenue.csv", "cdf.csv", "summary.json"]
        .iter()
        .map(|f| (f.to_string(), std::fs::read(dir.join(f)).unwrap()))
        .collect()
}
