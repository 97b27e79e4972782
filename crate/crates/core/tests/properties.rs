use proptest::prelude::*;

use bondlimit::dissociation::{gamma_value, optimal_allocation, staylocal_check, MassAllocation};
use bondlimit::functionals::trial::HydrogenicMixture;
use bondlimit::functionals::{kinetic, u0};
use bondlimit::gb::{GbMethod, GbTable};
use bondlimit::measures::{decompose_atoms, scale_measure, variance, Measure};
use bondlimit::mmot::{check_bounds, mmot_exact};
use bondlimit::partial::{partial_cost, relaxed_envelope_n2};
use bondlimit::{DiscreteMeasure, NucleiConfig};

fn point() -> impl Strategy<Value = [f64; 3]> {
    [-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64]
}

/// Probability on 3..=max points with no atom heavier than one half.
fn spread_probability(max: usize) -> impl Strategy<Value = DiscreteMeasure> {
    (3..=max)
        .prop_flat_map(|k| (prop::collection::vec(point(), k), prop::collection::vec(1.0..2.0f64, k)))
        .prop_map(|(points, raw)| {
            let s: f64 = raw.iter().sum();
            let mut w: Vec<f64> = raw.iter().map(|x| x / s).collect();
            let rest: f64 = w[1..].iter().sum();
            w[0] = 1.0 - rest;
            DiscreteMeasure::new(points, w).unwrap()
        })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a.is_infinite() && b.is_infinite()) || (a - b).abs() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transport_scales_with_dilation(rho in spread_probability(6), s in 0.25..4.0f64) {
        let c = mmot_exact(&rho, 2).unwrap().cost;
        let cs = mmot_exact(&rho.scaled(s).unwrap(), 2).unwrap().cost;
        prop_assert!(close(cs, s * c, 1e-8 * (1.0 + c)), "{cs} vs {}", s * c);
    }

    #[test]
    fn transport_is_homogeneous(rho in spread_probability(6), t in 0.05..1.0f64) {
        let c = mmot_exact(&rho, 2).unwrap().cost;
        let ct = mmot_exact(&rho.times(t).unwrap(), 2).unwrap().cost;
        prop_assert!(close(ct, t * c, 1e-9 * (1.0 + c)));
    }

    #[test]
    fn lower_bound_holds(rho in spread_probability(6), n in 2usize..=3) {
        let c = mmot_exact(&rho, n).unwrap().cost;
        let b = check_bounds(&rho, n, c).unwrap();
        prop_assert!(b.lower <= c + 1e-8);
    }

    #[test]
    fn symmetrized_plan_keeps_cost(rho in spread_probability(5)) {
        let r = mmot_exact(&rho, 2).unwrap();
        let sym = r.plan.symmetrized();
        prop_assert!((sym.cost(rho.points()) - r.cost).abs() <= 1e-10);
        prop_assert!(sym.marginal_violation(rho.weights()) <= 1e-8);
    }

    #[test]
    fn transport_is_convex(
        points in prop::collection::vec(point(), 4),
        a in prop::collection::vec(1.0..2.0f64, 4),
        b in prop::collection::vec(1.0..2.0f64, 4),
        lambda in 0.0..1.0f64,
    ) {
        let norm = |w: &[f64]| { let s: f64 = w.iter().sum(); w.iter().map(|x| x / s).collect::<Vec<_>>() };
        let (wa, wb) = (norm(&a), norm(&b));
        let mix: Vec<f64> = wa.iter().zip(&wb).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
        let c = |w: Vec<f64>| mmot_exact(&DiscreteMeasure::new(points.clone(), w).unwrap(), 2).unwrap().cost;
        let (ca, cb, cm) = (c(wa), c(wb), c(mix));
        prop_assert!(cm <= lambda * ca + (1.0 - lambda) * cb + 1e-9);
    }

    #[test]
    fn partial_cost_monotone_and_convex(rho in spread_probability(5), m1 in 0.0..1.0f64, m2 in 0.0..1.0f64) {
        let (lo, hi) = if m1 < m2 { (m1, m2) } else { (m2, m1) };
        let mid = 0.5 * (lo + hi);
        let (clo, cmid, chi) = (
            partial_cost(&rho, lo, 2).unwrap(),
            partial_cost(&rho, mid, 2).unwrap(),
            partial_cost(&rho, hi, 2).unwrap(),
        );
        prop_assert!(clo <= cmid + 1e-10 && cmid <= chi + 1e-10);
        prop_assert!(cmid <= 0.5 * (clo + chi) + 1e-10);
    }

    #[test]
    fn envelope_sign(rho in spread_probability(5), t in 0.05..1.0f64) {
        let sub = rho.times(t).unwrap();
        let env = relaxed_envelope_n2(&sub).unwrap();
        prop_assert!(env <= mmot_exact(&sub, 2).unwrap().cost + 1e-10);
        if t <= 0.5 {
            prop_assert_eq!(env, 0.0);
        } else if t > 0.5 + 1e-6 {
            prop_assert!(env > 0.0);
        }
    }

    #[test]
    fn measure_scaling_round_trip(rho in spread_probability(6), s in 0.25..4.0f64) {
        let m = Measure::Discrete(rho.clone());
        let back = scale_measure(&scale_measure(&m, s).unwrap(), 1.0 / s).unwrap();
        let Measure::Discrete(b) = back else { panic!("kind changed") };
        prop_assert!((b.total_mass() - rho.total_mass()).abs() <= 1e-10);
        for (p, q) in b.points().iter().zip(rho.points()) {
            for k in 0..3 {
                prop_assert!((p[k] - q[k]).abs() <= 1e-12 * (1.0 + q[k].abs()));
            }
        }
        prop_assert!(variance(&rho).unwrap() > 0.0);
    }

    #[test]
    fn atoms_conserve_mass(rho in spread_probability(6)) {
        let nuclei = NucleiConfig::new(vec![rho.points()[0], rho.points()[1]], vec![1.0, 1.0]).unwrap();
        if let Ok(d) = decompose_atoms(&rho, &nuclei, 1e-9) {
            let atomic: f64 = d.atomic_part.iter().map(|(_, w)| w).sum();
            prop_assert!((atomic + d.diffuse_part.total_mass() - rho.total_mass()).abs() <= 1e-15);
        }
    }

    #[test]
    fn radial_terms_scale(a in 0.7..1.5f64, s in 0.5..2.0f64) {
        let rho = HydrogenicMixture::single(0.9, a).unwrap().to_radial(40.0, 4000, [0.0; 3]).unwrap();
        let r = rho.scaled(s).unwrap();
        prop_assert!((kinetic(&r).unwrap() / kinetic(&rho).unwrap() / (s * s) - 1.0).abs() <= 5e-3);
        prop_assert!((u0(&r) / u0(&rho) / s - 1.0).abs() <= 5e-3);
    }

    #[test]
    fn staylocal_dichotomy(heavy in 0.05..0.95f64, sep in 5.0..20.0f64, split in 0.2..0.5f64) {
        let delta = 0.1;
        let cluster = |m: f64| [m * split, m * (1.0 - split) / 2.0, m * (1.0 - split) / 2.0];
        let (a, b) = (cluster(heavy), cluster(1.0 - heavy));
        let rho = DiscreteMeasure::new(
            vec![
                [0.0; 3], [delta, 0.0, 0.0], [0.0, delta, 0.0],
                [sep, 0.0, 0.0], [sep, 1.5 * delta, 0.0], [sep, 0.0, 1.5 * delta],
            ],
            vec![a[0], a[1], a[2], b[0], b[1], b[2]],
        ).unwrap();
        let r = staylocal_check(&rho, delta, 2).unwrap();
        prop_assert!(r.all_match, "{:?}", r);
    }

    #[test]
    fn allocation_is_optimal(s1 in 0.1..1.0f64, s2 in 0.1..1.0f64, z2 in 0.5..1.5f64, probe in 0.0..1.0f64) {
        // convex piecewise-linear stand-ins with the analytic branch below one half
        let table = |z: f64, tail: f64| {
            let alphas: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
            let h = -z * z / 4.0;
            let values: Vec<f64> = alphas.iter().map(|&a| if a <= 0.5 { h * a } else { h * (0.5 + tail * (a - 0.5)) }).collect();
            GbTable { z, b: 0.5, n: 2, methods: vec![GbMethod::SolvedN2; alphas.len()], raw_values: values.clone(), alphas, values }
        };
        let tables = vec![table(1.0, s1), table(z2, s2)];
        let (alloc, v) = optimal_allocation(&tables).unwrap();
        prop_assert_eq!(alloc.total(), 1.0);
        let other = MassAllocation::new(vec![probe, 1.0 - probe], 2).unwrap();
        prop_assert!(v <= gamma_value(&other, &tables).unwrap() + 1e-12);
    }
}
