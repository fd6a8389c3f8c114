mod common;

use std::sync::Arc;

use entropic_lab::kernel::build_ou_kernel;
use entropic_lab::measures::{measure_from_potential, Curvature, DiscreteMeasure, GammaGrid, PotentialField, PotentialSpec, Sign};
use entropic_lab::schrodinger::*;

fn field(g: &Arc<GammaGrid>, s: &str) -> PotentialField {
    PotentialField::from_spec(g.clone(), &PotentialSpec::parse(s).unwrap(), Curvature::Unspecified).unwrap()
}

fn small_grid() -> Arc<GammaGrid> {
    Arc::new(GammaGrid::new(1, 5.0, 41).unwrap())
}

#[test]
fn gaussian_to_itself_is_trivial() {
    let g = Arc::new(GammaGrid::new(1, 6.0, 301).unwrap());
    let k = Arc::new(build_ou_kernel(g.clone(), 0.5).unwrap());
    let gam = DiscreteMeasure::gamma(g.clone());
    let s = sinkhorn_solve(&gam, &gam, &k, &SinkhornOptions::default()).unwrap();
    assert!(s.converged);
    assert_eq!(s.iterations, 1);
    assert!(s.cost.abs() < 1e-12);
    let f = fortet_solve(&field(&g, "zero"), &field(&g, "zero"), &k, &FortetOptions::default()).unwrap();
    assert!(f.converged);
    assert!(f.log_f.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn sinkhorn_matches_gaussian_closed_form() {
    let g = Arc::new(GammaGrid::new(1, 6.0, 301).unwrap());
    let k = Arc::new(build_ou_kernel(g.clone(), 0.5).unwrap());
    let mu = DiscreteMeasure::gamma(g.clone());
    let nu = measure_from_potential(&field(&g, "quadratic(1.5, 0, 0)"), Sign::Minus).unwrap();
    let s = sinkhorn_solve(&mu, &nu, &k, &SinkhornOptions { tol: 1e-12, ..Default::default() }).unwrap();
    let exact = common::gaussian_entropic_cost(0.5, 0.5);
    assert!((s.cost - exact).abs() < 1e-6, "{} vs {exact}", s.cost);
    assert!((s.cost - s.direct_cost).abs() < 1e-9);
    assert!((s.gauge_integral - 1.0).abs() < 1e-9);
}

fn five_atom_b(g: &Arc<GammaGrid>) -> (DiscreteMeasure, DiscreteMeasure) {
    let mut a = vec![0.0; g.len()];
    let mut b = vec![0.0; g.len()];
    for (i, w) in [(10, 0.1), (15, 0.2), (20, 0.4), (25, 0.2), (30, 0.1)] {
        a[i] = w;
    }
    for (i, w) in [(12, 0.3), (17, 0.1), (20, 0.2), (22, 0.25), (28, 0.15)] {
        b[i] = w;
    }
    (
        DiscreteMeasure::from_weights(g.clone(), a).unwrap(),
        DiscreteMeasure::from_weights(g.clone(), b).unwrap(),
    )
}

#[test]
fn sinkhorn_matches_brute_force_on_five_atoms() {
    let g = small_grid();
    let k = Arc::new(build_ou_kernel(g.clone(), 0.5).unwrap());
    let (mu, nu) = five_atom_b(&g);
    let s = sinkhorn_solve(&mu, &nu, &k, &SinkhornOptions { tol: 1e-13, ..Default::default() }).unwrap();
    let oracle = common::kl_projection(|i, j| k.log_reference(i, j), mu.weights(), nu.weights());
    let d = common::tv(s.coupling().unwrap().data(), &oracle);
    assert!(d < 1e-7, "{d}");
}

#[test]
fn fortet_and_sinkhorn_agree_with_oracle_on_interval_target() {
    let g = small_grid();
    let k = Arc::new(build_ou_kernel(g.clone(), 0.5).unwrap());
    let v = field(&g, "zero");
    let w = field(&g, "indicator-ball(0.5)");
    let f = fortet_solve(&v, &w, &k, &FortetOptions { tol: 1e-12, ..Default::default() }).unwrap();
    assert!(f.converged);
    let problem = Problem::from_potentials(k.clone(), &v, &w).unwrap();
    assert_eq!(problem.nu.support().len(), 5);
    let s = sinkhorn_solve_problem(&problem, &SinkhornOptions { tol: 1e-13, ..Default::default() }).unwrap();
    let oracle = common::kl_projection(|i, j| k.log_reference(i, j), problem.mu.weights(), problem.nu.weights());
    let pf = f.coupling().unwrap().data();
    let ps = s.coupling().unwrap().data();
    assert!(common::tv(pf, &oracle) < 1e-7);
    assert!(common::tv(ps, &oracle) < 1e-7);
    assert!(common::tv(pf, ps) < 1e-6);
    let tr = f.fortet.unwrap();
    assert!(tr.monotonicity_violation < 1e-12);
    assert!(tr.bound_violation <= 0.0);
    assert!(f.fixed_point_residual < 1e-9);
    assert!((f.gauge_integral - 1.0).abs() < 1e-9);
    let hmin = f.log_f.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(hmin.abs() < 1e-12);
}

#[test]
fn oscillation_free_sparse_targets_and_certificate() {
    let g = Arc::new(GammaGrid::new(1, 6.0, 301).unwrap());
    let k = Arc::new(build_ou_kernel(g.clone(), 0.3).unwrap());
    let mu = DiscreteMeasure::gamma(g.clone());
    let nu = measure_from_potential(&field(&g, "indicator-ball(1)"), Sign::Minus).unwrap();
    let p_nu = Problem::new(k.clone(), mu.clone(), nu.clone()).unwrap();
    let sol = sinkhorn_solve_problem(&p_nu, &SinkhornOptions::default()).unwrap();
    let eta = DiscreteMeasure::dirac(g.clone(), 150).unwrap();
    let alt = sinkhorn_solve(&mu, &eta, &k, &SinkhornOptions::default()).unwrap();
    assert!(alt.converged);
    let cert = duality_certificate(&sol, &p_nu, alt.coupling().unwrap()).unwrap();
    assert!(cert.margin >= -1e-9, "{cert:?}");
    // collapsing to the centre can only raise the cost
    assert!(alt.cost >= sol.cost);
}

#[test]
fn fortet_rejects_infinite_v() {
    let g = small_grid();
    let k = Arc::new(build_ou_kernel(g.clone(), 0.5).unwrap());
    let r = fortet_solve(&field(&g, "indicator-ball(1)"), &field(&g, "zero"), &k, &FortetOptions::default());
    assert!(r.is_err());
}

#[test]
fn phi_is_monotone_and_gauge_is_one() {
    let g = Arc::new(GammaGrid::new(1, 6.0, 301).unwrap());
    let k = Arc::new(build_ou_kernel(g.clone(), 0.2).unwrap());
    let v = field(&g, "quadratic(0.1, 0, 0)");
    let w = field(&g, "indicator-ball(2)");
    let h: Vec<f64> = g.axis().iter().map(|x| 0.3 * x * x).collect();
    let k2: Vec<f64> = h.iter().map(|x| x + 0.5).collect();
    let p1 = phi_epsilon(&h, &v, &w, &k).unwrap();
    let p2 = phi_epsilon(&k2, &v, &w, &k).unwrap();
    // additive shift passes straight through
    for (a, b) in p1.iter().zip(&p2) {
        assert!((b - a - 0.5).abs() < 1e-10);
    }
    let mu = measure_from_potential(&v, Sign::Plus).unwrap();
    assert!((gauge_integral(&h, &p1, &mu) - 1.0).abs() < 1e-12);
    let inf = {
        let mut x = h.clone();
        x[10] = f64::INFINITY;
        phi_epsilon(&x, &v, &w, &k).unwrap()
    };
    assert!(inf.iter().all(|x| *x == f64::INFINITY));
    assert_eq!(gauge_integral(&h, &inf, &mu), 0.0);
}

mod phi_map {
    use super::*;
    use proptest::prelude::*;

    fn problem() -> Problem {
        let g = small_grid();
        let k = Arc::new(build_ou_kernel(g.clone(), 0.4).unwrap());
        Problem::from_potentials(k, &field(&g, "quadratic(0.1, 0.2, 0)"), &field(&g, "abs-norm(1) + indicator-ball(2)")).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn phi_is_monotone(
            h in proptest::collection::vec(-2.0f64..2.0, 41),
            bump in proptest::collection::vec(0.0f64..1.5, 41),
        ) {
            let p = problem();
            let up: Vec<f64> = h.iter().zip(&bump).map(|(a, b)| a + b).collect();
            for (lo, hi) in p.phi(&h).iter().zip(p.phi(&up)) {
                prop_assert!(hi >= lo - 1e-12, "{} < {}", hi, lo);
            }
        }

        #[test]
        fn phi_commutes_with_constants(h in proptest::collection::vec(-2.0f64..2.0, 41), c in -3.0f64..3.0) {
            let p = problem();
            let shifted: Vec<f64> = h.iter().map(|v| v + c).collect();
            for (a, b) in p.phi(&h).iter().zip(p.phi(&shifted)) {
                prop_assert!((b - a - c).abs() < 1e-10);
            }
        }
    }
}
