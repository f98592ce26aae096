use orthodual::fields::{exact_space_time_covariance, TestFunction};
use orthodual::kernels::{
    config_kernel, finite_state_kernel, rw_kernel, FiniteGenerator, IrwKernel, KernelSpec,
    ProcessKind,
};
use orthodual::orthopoly::{
    alternative_duality_product, charlier_explicit, charlier_recurrence, duality_product,
    expand_local_function, factorial, norm_a, LocalFunctionSpec, PolyParams,
};
use orthodual::sampler::{replica_rng, sample_poisson_product, simulate};
use orthodual::{CoordVector, DualConfig, OccupationState, Site, Window};
use proptest::prelude::*;

fn site2() -> impl Strategy<Value = Site> {
    (-50i64..50, -50i64..50).prop_map(|(a, b)| Site::new(vec![a, b]))
}

fn config2() -> impl Strategy<Value = DualConfig> {
    prop::collection::vec((site2(), 1u32..4), 0..5)
        .prop_map(|pairs| DualConfig::from_pairs(2, pairs).unwrap())
}

fn coords1(max_len: usize) -> impl Strategy<Value = CoordVector> {
    prop::collection::vec(-3i64..4, 1..=max_len).prop_map(|xs| CoordVector::from_1d(&xs))
}

fn tv_distance(a: &orthodual::kernels::KernelTable, b: &orthodual::kernels::KernelTable) -> f64 {
    let r = a.radius().max(b.radius()) as i64;
    (-r..=r)
        .map(|x| (a.get(&[x]) - b.get(&[x])).abs())
        .sum::<f64>()
        / 2.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shift_is_a_group_action(o in config2(), a in site2(), b in site2()) {
        let ab = a.checked_add(&b).unwrap();
        prop_assert_eq!(o.shift(&a).unwrap().shift(&b).unwrap(), o.shift(&ab).unwrap());
        prop_assert_eq!(o.shift(&Site::origin(2)).unwrap(), o.clone());
    }

    #[test]
    fn labeling_commutes_with_shifts(o in config2(), z in site2()) {
        let x = o.to_coords();
        prop_assert_eq!(x.shift(&z).unwrap().to_config(), o.shift(&z).unwrap());
    }

    #[test]
    fn class_count_times_multiplicities_is_k_factorial(x in coords1(6)) {
        let classes = x.permutation_classes();
        let k = x.len() as u32;
        let prod = x.to_config().multiplicity_factorial();
        prop_assert_eq!(classes.len() as f64 * prod, factorial(k));
        for c in &classes {
            prop_assert_eq!(c.to_config(), x.to_config());
        }
    }

    #[test]
    fn moves_conserve_particles(counts in prop::collection::vec(0u32..5, 8), from in 0usize..8, to in 0usize..8) {
        let w = Window::new(1, 8).unwrap();
        let eta = OccupationState::from_counts(w, counts).unwrap();
        let (i, j) = (w.site(from), w.site(to));
        match eta.move_particle(&i, &j) {
            Ok(moved) => prop_assert_eq!(moved.total(), eta.total()),
            Err(_) => prop_assert_eq!(eta.get(&i), 0),
        }
    }

    #[test]
    fn recurrence_matches_explicit(k in 0u32..=12, n in 0u32..=12, r in 0usize..4) {
        let rho = [0.5, 1.0, 2.0, 5.0][r];
        let a = charlier_recurrence(k, n, rho).unwrap();
        let b = charlier_explicit(k, n, rho).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn single_site_polynomial_has_its_degree(k in 0u32..7, start in 0u32..6, r in 0usize..3) {
        // the (k+1)-th forward difference of n ↦ d(k, n) vanishes
        let rho = [0.5, 1.0, 3.0][r];
        let order = k + 1;
        let mut diff = 0.0;
        let mut scale: f64 = 0.0;
        for j in 0..=order {
            let c = factorial(order) / (factorial(j) * factorial(order - j));
            let v = charlier_recurrence(k, start + j, rho).unwrap();
            let sign = if (order - j) % 2 == 0 { 1.0 } else { -1.0 };
            diff += sign * c * v;
            scale = scale.max((c * v).abs());
        }
        prop_assert!(diff.abs() <= 1e-9 * scale.max(1.0), "{}", diff);
    }

    #[test]
    fn alternative_normalisation_is_a_constant_multiple(
        m0 in 1u32..4, m1 in 0u32..3, counts in prop::collection::vec(0u32..8, 2..6), r in 0usize..3
    ) {
        let rho = [0.5, 1.0, 2.0][r];
        let params = PolyParams::homogeneous(rho).unwrap();
        let w = Window::new(1, 6).unwrap();
        let mut pairs = vec![(0i64, m0)];
        if m1 > 0 {
            pairs.push((1, m1));
        }
        let xi = DualConfig::from_1d(&pairs);
        let factor = orthodual::orthopoly::alternative_normalisation_factor(&xi, &params).unwrap();
        let mut c = vec![0u32; 6];
        for (i, v) in counts.iter().enumerate() {
            c[i] = *v;
        }
        let eta = OccupationState::from_counts(w, c).unwrap();
        let d = duality_product(&xi, &eta, &params).unwrap();
        let alt = alternative_duality_product(&xi, &eta, &params).unwrap();
        prop_assert!((alt - factor * d).abs() <= 1e-9 * alt.abs().max(1.0));
    }

    #[test]
    fn expansion_reconstructs_polynomials(
        terms in prop::collection::vec((-3i32..4, 0u32..3, 0u32..3), 1..4),
        state in prop::collection::vec(0u32..=10, 2),
        r in 0usize..3,
    ) {
        let rho = [0.5, 1.0, 2.0][r];
        let text: Vec<String> = terms
            .iter()
            .map(|(c, p0, p1)| format!("{c}*eta(0)^{p0}*eta(1)^{p1}"))
            .collect();
        let f = LocalFunctionSpec::parse(&text.join(" + "), 1).unwrap();
        let params = PolyParams::homogeneous(rho).unwrap();
        let g = expand_local_function(&f, &params).unwrap();
        let w = Window::new(1, 6).unwrap();
        let mut counts = vec![0u32; 6];
        counts[w.index(&Site::at(0)).unwrap()] = state[0];
        counts[w.index(&Site::at(1)).unwrap()] = state[1];
        let eta = OccupationState::from_counts(w, counts).unwrap();
        let want = f.eval(&eta);
        let got = g.eval(&eta).unwrap();
        prop_assert!((want - got).abs() <= 1e-8 * want.abs().max(1.0), "{} vs {}", want, got);
    }

    #[test]
    fn chapman_kolmogorov(t in 0.1f64..3.0, s in 0.1f64..3.0) {
        let spec = KernelSpec::nearest_neighbor(1);
        let a = rw_kernel(&spec, t).unwrap();
        let b = rw_kernel(&spec, s).unwrap();
        let c = rw_kernel(&spec, t + s).unwrap();
        prop_assert!(tv_distance(&a.convolve(&b).unwrap(), &c) < 1e-10);
    }

    #[test]
    fn kernel_tables_are_symmetric_probabilities(t in 0.0f64..20.0, q in 0.05f64..0.45) {
        let spec = KernelSpec::new(1, [(Site::at(1), q), (Site::at(-1), q), (Site::at(2), 0.5 - q), (Site::at(-2), 0.5 - q)]).unwrap();
        let table = rw_kernel(&spec, t).unwrap();
        prop_assert!((table.total_mass() - 1.0).abs() <= 1e-12 + table.truncation_error());
        let r = table.radius() as i64;
        for x in 0..=r {
            prop_assert!(table.get(&[x]) >= 0.0);
            prop_assert_eq!(table.get(&[x]), table.get(&[-x]));
        }
    }

    #[test]
    fn weighted_config_kernel_is_symmetric_and_nonnegative(
        x in coords1(3), shift in prop::collection::vec(-2i64..3, 3), t in 0.05f64..2.0, r in 0usize..2
    ) {
        let rho = [1.0, 2.0][r];
        let params = PolyParams::homogeneous(rho).unwrap();
        let spec = KernelSpec::nearest_neighbor(1);
        let xi = x.to_config();
        let ys: Vec<i64> = x.positions().iter().zip(&shift).map(|(p, s)| p.coords()[0] + s).collect();
        let xi2 = CoordVector::from_1d(&ys).to_config();
        let kern = IrwKernel::new(&spec, t).unwrap();
        let forward = kern.config(&xi, &xi2).unwrap() * norm_a(&xi2, &params).unwrap();
        let backward = kern.config(&xi2, &xi).unwrap() * norm_a(&xi, &params).unwrap();
        prop_assert!(forward >= 0.0);
        prop_assert!((forward - backward).abs() <= 1e-12 * forward.max(1e-300), "{} vs {}", forward, backward);
    }

    #[test]
    fn finite_kernels_are_stochastic(t in 0.0f64..3.0, sep in any::<bool>()) {
        let process = if sep { ProcessKind::Sep } else { ProcessKind::Irw };
        let gen = FiniteGenerator::new(process, KernelSpec::nearest_neighbor(1), 7, 2).unwrap();
        let k = finite_state_kernel(&gen, t).unwrap();
        for i in 0..k.len() {
            let row = k.row(i);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|v| *v >= -1e-15));
            prop_assert_eq!(gen.state(i).size(), 2);
        }
    }

    #[test]
    fn trajectories_conserve_and_replay(seed in any::<u64>(), sep in any::<bool>()) {
        let process = if sep { ProcessKind::Sep } else { ProcessKind::Irw };
        let spec = KernelSpec::nearest_neighbor(1);
        let w = Window::new(1, 12).unwrap();
        let eta = if sep {
            let counts = (0..12).map(|i| (i % 3 == 0) as u32).collect();
            OccupationState::from_counts(w, counts).unwrap()
        } else {
            sample_poisson_product(&PolyParams::homogeneous(1.5).unwrap(), w, &mut replica_rng(seed, 99)).unwrap()
        };
        let a = simulate(process, &spec, &eta, &[0.5, 1.0, 4.0], seed, 3).unwrap();
        let b = simulate(process, &spec, &eta, &[0.5, 1.0, 4.0], seed, 3).unwrap();
        prop_assert!(a.conserves_particles());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn stationary_covariance_is_time_symmetric(t in 0.0f64..1.0, s in 0.0f64..1.0, distinct in any::<bool>()) {
        let params = PolyParams::homogeneous(1.0).unwrap();
        let spec = KernelSpec::nearest_neighbor(1);
        let x = CoordVector::from_1d(if distinct { &[0, 1] } else { &[0, 0] });
        let phi = TestFunction::unit_bump(1);
        let a = exact_space_time_covariance(&x, &phi, 4, t, s, &spec, &params).unwrap();
        let b = exact_space_time_covariance(&x, &phi, 4, s, t, &spec, &params).unwrap();
        prop_assert_eq!(a.value, b.value);
    }
}

#[test]
fn config_kernel_mass_over_reachable_configurations() {
    // Σ over ξ' of size 2 in a large window: each unordered target counted once
    let spec = KernelSpec::nearest_neighbor(1);
    let xi = DualConfig::from_1d(&[(0, 1), (1, 1)]);
    let mut total = 0.0;
    for a in -20i64..=21 {
        for b in a..=21 {
            let target = if a == b {
                DualConfig::from_1d(&[(a, 2)])
            } else {
                DualConfig::from_1d(&[(a, 1), (b, 1)])
            };
            total += config_kernel(&spec, 1.5, &xi, &target).unwrap();
        }
    }
    assert!((total - 1.0).abs() < 1e-10, "{total}");
}
