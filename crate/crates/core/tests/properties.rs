use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use sysweyl_core::asymptotics::{point_coeffs, CoeffOptions, SphereRule};
use sysweyl_core::brackets::{poisson, MatJet1};
use sysweyl_core::eigen::decompose;
use sysweyl_core::fixtures;
use sysweyl_core::flow::{self, FlowOptions};
use sysweyl_core::identities::{run_identities, IdentityOptions};
use sysweyl_core::symbol::{CMat, ExprMatrix, OperatorSpec};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, rng_seed: RngSeed::Fixed(0x5eed), ..ProptestConfig::default() }
}

fn point(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(0.0..std::f64::consts::TAU, n),
        prop::collection::vec(-3.0..3.0_f64, n).prop_filter("covector away from zero", |v| v.iter().map(|a| a * a).sum::<f64>() > 0.25),
    )
}

fn random_case() -> impl Strategy<Value = (u64, Vec<f64>, Vec<f64>)> {
    (0u64..16).prop_flat_map(|seed| {
        let n = 2 + ((seed / 2) % 2) as usize;
        point(n).prop_map(move |(x, xi)| (seed, x, xi))
    })
}

fn cmat(m: usize, vals: &[f64]) -> CMat {
    CMat::from_fn(m, m, |r, c| Complex64::new(vals[2 * (r * m + c)], vals[2 * (r * m + c) + 1]))
}

fn norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Dirac-like torus operator written out by hand as a symbol:
/// `A1 = C^α ξ_α`, `A0 = V - (i/2) ∂_α C^α`.
fn variable_dirac_symbol() -> OperatorSpec {
    let a1 = ExprMatrix::parse(&[
        &["0.3*cos(x1)*p1 + 0.2*sin(x1)*p2", "(1 + 0.2*cos(x2))*p1 - i*p2"],
        &["(1 + 0.2*cos(x2))*p1 + i*p2", "-0.3*cos(x1)*p1 - 0.2*sin(x1)*p2"],
    ])
    .unwrap();
    let a0 = ExprMatrix::parse(&[
        &["0.3 + 0.15*i*sin(x1)", "0.1*sin(x2)"],
        &["0.1*sin(x2)", "0.3 - 0.15*i*sin(x1)"],
    ])
    .unwrap();
    OperatorSpec::from_symbol("variable dirac (symbol)", 2, a1, a0).unwrap()
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn euler_identity_for_principal_symbol((seed, x, xi) in random_case()) {
        let spec = fixtures::random(seed);
        let sj = spec.symbol_at(&x, &xi).unwrap();
        let n = spec.n();
        let mut lhs = CMat::zeros(spec.m(), spec.m());
        for a in 0..n {
            lhs += sj.a1_d(n + a) * Complex64::new(xi[a], 0.0);
        }
        prop_assert!(norm(&(lhs - sj.a1())) < 1e-10 * (1.0 + norm(&sj.a1())));
    }

    #[test]
    fn torus_and_symbol_forms_give_the_same_jets((x, xi) in point(2)) {
        let t = fixtures::variable_dirac().symbol_at(&x, &xi).unwrap();
        let s = variable_dirac_symbol().symbol_at(&x, &xi).unwrap();
        prop_assert!(norm(&(t.a1() - s.a1())) < 1e-12);
        prop_assert!(norm(&(t.a0() - s.a0())) < 1e-12);
        prop_assert!(norm(&(t.a1_mixed() - s.a1_mixed())) < 1e-12);
        for (g, h) in t.a1_grad().iter().zip(s.a1_grad()) {
            prop_assert!(norm(&(g - h)) < 1e-12);
        }
    }

    #[test]
    fn projectors_resolve_the_identity((seed, x, xi) in random_case()) {
        let spec = fixtures::random(seed);
        let es = decompose(&spec.symbol_at(&x, &xi).unwrap()).unwrap();
        let m = spec.m();
        let mut sum = CMat::zeros(m, m);
        for (a, p) in es.p.iter().enumerate() {
            sum += p;
            prop_assert!(norm(&(p * p - p)) < 1e-12);
            for q in &es.p[a + 1..] {
                prop_assert!(norm(&(p * q)) < 1e-12);
            }
        }
        prop_assert!(norm(&(sum - CMat::identity(m, m))) < 1e-12);
    }

    #[test]
    fn projector_derivatives_match_differences((seed, x, xi) in random_case()) {
        let spec = fixtures::random(seed);
        let n = spec.n();
        let es = decompose(&spec.symbol_at(&x, &xi).unwrap()).unwrap();
        let d = 1e-5;
        for mu in 0..2 * n {
            let (mut xp, mut xip, mut xm, mut xim) = (x.clone(), xi.clone(), x.clone(), xi.clone());
            if mu < n {
                xp[mu] += d;
                xm[mu] -= d;
            } else {
                xip[mu - n] += d;
                xim[mu - n] -= d;
            }
            let ep = decompose(&spec.symbol_at(&xp, &xip).unwrap()).unwrap();
            let em = decompose(&spec.symbol_at(&xm, &xim).unwrap()).unwrap();
            for pos in 0..spec.m() {
                let fd = (&ep.p[pos] - &em.p[pos]) / Complex64::new(2.0 * d, 0.0);
                let scale = 1.0 + norm(&es.dp[pos][mu]);
                prop_assert!(norm(&(fd - &es.dp[pos][mu])) < 1e-7 * scale);
            }
        }
    }

    #[test]
    fn gauge_fixed_vectors_move_continuously((seed, x, xi) in random_case(), dir in prop::collection::vec(-1.0..1.0_f64, 3)) {
        let spec = fixtures::random(seed);
        let n = spec.n();
        let es = decompose(&spec.symbol_at(&x, &xi).unwrap()).unwrap();
        let eps = 1e-7;
        let xs: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + eps * b).collect();
        let es2 = decompose(&spec.symbol_at(&xs, &xi).unwrap()).unwrap();
        for pos in 0..spec.m() {
            let bound: f64 = 1e3 * eps * (1.0 + es.dv[pos][..n].iter().map(|v| v.norm()).sum::<f64>());
            prop_assert!((&es.v[pos] - &es2.v[pos]).norm() < bound);
        }
    }

    #[test]
    fn poisson_bracket_antisymmetry(vals in prop::collection::vec(-1.0..1.0_f64, 2 * 4 * 5)) {
        let m = 2;
        let block = 2 * m * m;
        let jet = |k: usize| MatJet1::new(cmat(m, &vals[k * block..]), (1..=4).map(|a| cmat(m, &vals[((k + a) % 5) * block..])).collect());
        let p = jet(0);
        let r = jet(1);
        let lhs = poisson(&p, &r).unwrap();
        let rhs = poisson(&r.adjoint(), &p.adjoint()).unwrap().adjoint();
        prop_assert!(norm(&(lhs + rhs)) < 1e-13);
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn identity_suite_holds_for_random_operators(seed in 0u64..64) {
        let spec = fixtures::random(seed);
        let report = run_identities(&spec, &IdentityOptions { samples: 20, seed, coeff_points: 1, ..IdentityOptions::default() }).unwrap();
        for c in report.checks.iter().filter(|c| c.skipped.is_none()) {
            prop_assert!(c.passed, "{}: {} {:e}", spec.name, c.name, c.max_residual);
        }
    }

    #[test]
    fn flow_conserves_energy_and_transports((seed, x, xi) in random_case()) {
        let spec = fixtures::random(seed);
        let branches = spec.branches().unwrap();
        let j = branches[(seed as usize) % branches.len()];
        let traj = flow::integrate(&spec, j, &x, &xi, 5.0, FlowOptions::with_tol(1e-12)).unwrap();
        prop_assert!(traj.energy_drift(&spec).unwrap() < 1e-10);
        let (res, dev) = traj.transport_residuals(&spec).unwrap();
        prop_assert!(res < 1e-8 && dev < 1e-8);
        let h = flow::homogeneity_defect(&spec, j, &x, &xi, 2.0, FlowOptions::with_tol(1e-12)).unwrap();
        prop_assert!(h < 1e-6);
    }
}

#[test]
fn sphere_quadrature_is_converged_for_trig_fixtures() {
    for spec in [fixtures::variable_dirac(), fixtures::conjugated_variable_dirac(), fixtures::shifted_dirac(0.3)] {
        let coarse = SphereRule::new(2, 256).unwrap();
        let fine = SphereRule::new(2, 512).unwrap();
        for x in [[0.3, 1.1], [2.0, 4.5], [5.5, 0.2]] {
            let a = point_coeffs(&spec, &x, &coarse, CoeffOptions::default()).unwrap();
            let b = point_coeffs(&spec, &x, &fine, CoeffOptions::default()).unwrap();
            assert!((a.a - b.a).abs() < 1e-10, "{}", spec.name);
            assert!((a.b - b.b).abs() < 1e-10, "{}", spec.name);
        }
    }
}

#[test]
fn hand_expanded_symbol_has_the_torus_coefficients() {
    let t = sysweyl_core::asymptotics::AsymptoticCoeffs::compute(&fixtures::variable_dirac(), 8, 256, CoeffOptions::default()).unwrap();
    let s = sysweyl_core::asymptotics::AsymptoticCoeffs::compute(&variable_dirac_symbol(), 8, 256, CoeffOptions::default()).unwrap();
    assert!((t.a_global - s.a_global).abs() < 1e-12);
    assert!((t.b_global - s.b_global).abs() < 1e-12);
}
