mod common;

use common::*;
use iface_core::awareness::{
    compute_s_reduced, enumerate_sitaware_reduced, expand_sitaware, is_situation_aware,
    is_situation_aware_direct, AwarenessFamily, EnumerateOptions,
};
use iface_core::enumgen::{
    EnumerationOrder, GeneratorConfig, PruneRegistry, SubsetGenerator,
};
use iface_core::solver::{greedy_max, solve, Regime, SolveOptions};
use iface_core::uii::{relative_degree, GammaOracle, OracleOptions};
use iface_core::{RankTolerance, SensorSet, TrustLevel};
use proptest::prelude::*;

fn subsets(p: usize) -> impl Iterator<Item = SensorSet> {
    (0..(1u128 << p)).map(SensorSet::from_mask)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_matches_exact_rank_and_degrees(seed in any::<u64>()) {
        let inst = random_instance(seed, 6, 7);
        let exact = ExactOracle::new(&inst);
        let pool = inst.pool();
        let sys = inst.system();
        let o = GammaOracle::new(&sys, &pool);
        for s in pool.sensors() {
            prop_assert_eq!(relative_degree(&sys, s, RankTolerance::DEFAULT), exact.degrees[s.id]);
        }
        for s in subsets(pool.len()) {
            prop_assert_eq!(o.gamma(s), exact.gamma(s));
        }
    }

    #[test]
    fn gamma_is_monotone_and_submodular(seed in any::<u64>()) {
        let inst = random_instance(seed, 5, 6);
        let pool = inst.pool();
        let o = GammaOracle::new(&inst.system(), &pool);
        for a in subsets(pool.len()) {
            for b in subsets(pool.len()) {
                prop_assert!(o.gamma(a.union(b)) + o.gamma(a.intersection(b)) <= o.gamma(a) + o.gamma(b));
                if a.is_subset(b) {
                    prop_assert!(o.gamma(a) <= o.gamma(b));
                }
            }
        }
    }

    #[test]
    fn capped_cache_is_transparent(seed in any::<u64>(), cap in 0usize..20) {
        let inst = random_instance(seed, 6, 7);
        let pool = inst.pool();
        let sys = inst.system();
        let capped = GammaOracle::with_options(&sys, &pool, OracleOptions { cache_cap: Some(cap), ..Default::default() });
        let plain = GammaOracle::new(&sys, &pool);
        for s in subsets(pool.len()).chain(subsets(pool.len())) {
            prop_assert_eq!(capped.gamma(s), plain.gamma_uncached(s));
        }
        prop_assert!(capped.stats().cached_entries <= cap);
    }

    #[test]
    fn reduced_family_matches_brute_force(seed in any::<u64>()) {
        let inst = random_instance(seed, 6, 7);
        let exact = ExactOracle::new(&inst);
        let pool = inst.pool();
        let o = GammaOracle::new(&inst.system(), &pool);
        let task = inst.task(&pool);
        let t = task.sensors;
        let gamma_t = exact.gamma(t);
        let reduced: SensorSet = (0..pool.len())
            .filter(|&i| {
                let s = SensorSet::singleton(i);
                exact.gamma(s) + gamma_t > exact.gamma(s.union(t))
            })
            .collect();
        prop_assert_eq!(compute_s_reduced(&o, &task), reduced);

        let mut brute: Vec<SensorSet> = subsets(pool.len())
            .filter(|&p| !p.is_empty() && p.is_subset(reduced) && aware(&exact, t, p))
            .collect();
        brute.sort_by_key(|s| (s.len(), s.mask()));
        let family = enumerate_sitaware_reduced(&o, &task, EnumerateOptions::default()).unwrap();
        prop_assert_eq!(&family, &brute);
        prop_assert!(family.contains(&t));

        for opts in [
            EnumerateOptions { aggressive_prune: true, ..Default::default() },
            EnumerateOptions { partitions: 3, ..Default::default() },
            EnumerateOptions { partitions: 2, aggressive_prune: true, cap: None },
        ] {
            prop_assert_eq!(&enumerate_sitaware_reduced(&o, &task, opts).unwrap(), &family);
        }
        let cap = t.len();
        let capped = enumerate_sitaware_reduced(&o, &task, EnumerateOptions { cap: Some(cap), ..Default::default() }).unwrap();
        let expect: Vec<SensorSet> = family.iter().copied().filter(|p| p.len() <= cap).collect();
        prop_assert_eq!(capped, expect);

        // feasible for the level problem at some t in [Γ(S_task), Γ(S_reduced)] iff in the family
        let hi = exact.gamma(reduced);
        for p in subsets(pool.len()).filter(|p| !p.is_empty() && p.is_subset(reduced)) {
            let feasible = (gamma_t..=hi).any(|lvl| exact.gamma(p) >= lvl && exact.gamma(p.union(t)) <= lvl);
            prop_assert_eq!(feasible, family.contains(&p));
        }
    }

    #[test]
    fn expansion_is_the_intersection_test_closure(seed in any::<u64>()) {
        let inst = random_instance(seed, 6, 7);
        let exact = ExactOracle::new(&inst);
        let pool = inst.pool();
        let o = GammaOracle::new(&inst.system(), &pool);
        let task = inst.task(&pool);
        let fam = AwarenessFamily::compute(&o, &task, EnumerateOptions::default()).unwrap();
        let expanded = expand_sitaware(&fam, &pool, usize::MAX);
        let mut via_test: Vec<SensorSet> = subsets(pool.len())
            .filter(|&s| is_situation_aware(&o, &task, &fam, s))
            .collect();
        via_test.sort_by_key(|s| (s.len(), s.mask()));
        prop_assert_eq!(&expanded, &via_test);
        // every materialised member is aware by the direct test
        for s in &expanded {
            prop_assert!(aware(&exact, task.sensors, *s));
            prop_assert!(is_situation_aware_direct(&o, &task, *s));
        }
        let limited = expand_sitaware(&fam, &pool, 5);
        prop_assert_eq!(limited.len(), expanded.len().min(5));
    }

    #[test]
    fn solutions_are_feasible_exact_and_bounded(seed in any::<u64>()) {
        let inst = random_instance(seed, 6, 7);
        let exact = ExactOracle::new(&inst);
        let pool = inst.pool();
        let o = GammaOracle::new(&inst.system(), &pool);
        let task = inst.task(&pool);
        let fam = AwarenessFamily::compute(&o, &task, EnumerateOptions::default()).unwrap();
        let gamma_pool = exact.gamma(pool.all());
        let weak = 1.0 + (gamma_pool as f64).ln();
        for k in 1..=gamma_pool {
            let s = solve(&o, &task, &fam, TrustLevel(k), SolveOptions::default()).unwrap();
            let again = solve(&o, &task, &fam, TrustLevel(k), SolveOptions::default()).unwrap();
            prop_assert_eq!(s.selected, again.selected);
            prop_assert!(aware(&exact, task.sensors, s.selected));
            prop_assert!(exact.gamma(s.selected) >= k);
            let opt = brute_force_optimum(&exact, task.sensors, k).unwrap();
            if s.regime == Regime::HighTrustExact {
                prop_assert_eq!(s.selected.len(), opt);
            } else {
                let d = s.bound_delta.unwrap();
                prop_assert!(s.selected.len() as f64 <= d * opt as f64 + 1e-12);
                prop_assert!(d <= weak + 1e-12);
            }
            if s.regime == Regime::MidTrustHybrid {
                let alt = solve(&o, &task, &fam, TrustLevel(k), SolveOptions { alt_heuristic: true }).unwrap();
                prop_assert!(aware(&exact, task.sensors, alt.selected));
                prop_assert!(exact.gamma(alt.selected) >= k);
                prop_assert!(alt.bound_delta.is_none());
            }
        }
    }

    #[test]
    fn greedy_bound_and_cost(seed in any::<u64>()) {
        let inst = random_instance(seed, 6, 7);
        let exact = ExactOracle::new(&inst);
        let pool = inst.pool();
        let p = pool.len() as u64;
        let o = GammaOracle::new(&inst.system(), &pool);
        let gamma_pool = exact.gamma(pool.all());
        for k in 1..=gamma_pool {
            let g = greedy_max(&o, SensorSet::EMPTY, pool.all(), k).unwrap();
            prop_assert!(g.queries <= p * p + p);
            prop_assert!(exact.gamma(g.selected) >= k);
            // plain coverage optimum, no awareness constraint
            let opt = subsets(pool.len()).filter(|&s| exact.gamma(s) >= k).map(SensorSet::len).min().unwrap();
            prop_assert!(g.selected.len() as f64 <= g.bound * opt as f64 + 1e-12);
        }
    }

    #[test]
    fn pruning_is_sound_and_complete(
        pool_size in 1usize..=10,
        masks in proptest::collection::vec(1u128..1024, 0..4),
        order_flag in any::<bool>(),
        cap in proptest::option::of(1usize..=10),
    ) {
        let full = (1u128 << pool_size) - 1;
        let mut registry = PruneRegistry::new();
        for m in &masks {
            if m & full != 0 {
                registry.register(m & full);
            }
        }
        let order = if order_flag { EnumerationOrder::CardinalityFirst } else { EnumerationOrder::ColumnMajor };
        let mut cfg = GeneratorConfig::new(pool_size).unwrap().with_order(order);
        if let Some(c) = cap {
            cfg = cfg.with_cap(c.min(pool_size)).unwrap();
        }
        let limit = cfg.max_cardinality.unwrap_or(pool_size);
        let mut emitted: Vec<u128> = SubsetGenerator::with_registry(cfg.clone(), registry.clone())
            .map(SensorSet::mask)
            .collect();
        let mut no_row_skip = cfg.clone();
        no_row_skip.row_skipping = false;
        let per_cell: Vec<u128> = SubsetGenerator::with_registry(no_row_skip, registry.clone())
            .map(SensorSet::mask)
            .collect();
        prop_assert_eq!(&emitted, &per_cell);
        if order == EnumerationOrder::CardinalityFirst {
            prop_assert!(emitted.windows(2).all(|w| w[0].count_ones() <= w[1].count_ones()));
        }
        emitted.sort_unstable();
        let expect: Vec<u128> = (1..=full)
            .filter(|&n| !registry.covers(n) && n.count_ones() as usize <= limit)
            .collect();
        prop_assert_eq!(emitted, expect);
    }

    #[test]
    fn mid_iteration_registration_skips_later_supersets(pool_size in 2usize..=9, pick in any::<prop::sample::Index>()) {
        let mut g = SubsetGenerator::new(GeneratorConfig::new(pool_size).unwrap());
        let target = (pick.index((1usize << pool_size) - 1) + 1) as u128;
        let mut after = Vec::new();
        let mut registered = false;
        while let Some(s) = g.next() {
            if registered {
                after.push(s.mask());
            }
            if s.mask() == target {
                g.prune(target);
                registered = true;
            }
        }
        prop_assert!(registered);
        prop_assert!(after.iter().all(|&m| m & target != target));
    }
}
