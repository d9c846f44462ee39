use proptest::prelude::*;

use refresh_sched::shortterm::{
    g_derivative, g_value, optimal_wait, should_update_now, MyopicKind, MyopicProblem,
};

const ROOT_TOL: f64 = 1e-10;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn threshold_rule_and_first_root(
        eta in 0.0f64..0.99,
        t_half in 0.3f64..120.0,
        cost in 0.0f64..5.0,
        downtime in 0.1f64..10.0,
    ) {
        let p = MyopicProblem::new(eta, t_half, downtime, cost, None).unwrap();
        let lambda = std::f64::consts::LN_2 / t_half;
        let rule = cost / (downtime * downtime) <= (1.0 - eta) * lambda / 2.0;
        prop_assert_eq!(should_update_now(&p), rule);

        let d = optimal_wait(&p, ROOT_TOL).unwrap();
        match d.decision {
            MyopicKind::UpdateNow => prop_assert!(rule),
            MyopicKind::UpdateAt { t } => {
                prop_assert!(!rule && t > 0.0);
                prop_assert!(g_derivative(&p, t).unwrap().abs() <= 1e-8);
                // No earlier sign change on a dense scan.
                let n = 4000;
                for k in 1..n {
                    let s = t * k as f64 / n as f64;
                    if s < t - 1e-6 {
                        prop_assert!(g_derivative(&p, s).unwrap() > 0.0, "g' <= 0 at {s} before root {t}");
                    }
                }
                let g_star = g_value(&p, t).unwrap();
                for k in 1..200 {
                    let s = t * k as f64 / 200.0;
                    prop_assert!(g_value(&p, s).unwrap() <= g_star + 1e-12);
                }
            }
            MyopicKind::NoUpdateWithinHorizon => {
                prop_assert!(!rule);
                let n = 2000;
                for k in 1..=n {
                    let s = p.horizon * k as f64 / n as f64;
                    prop_assert!(g_derivative(&p, s).unwrap() > 0.0);
                }
            }
        }
    }
}

#[test]
fn free_update_is_immediate() {
    for &(eta, t_half, d) in &[(0.0, 1.0, 1.0), (0.5, 30.0, 3.0), (0.9, 200.0, 0.5)] {
        let p = MyopicProblem::new(eta, t_half, d, 0.0, None).unwrap();
        let dec = optimal_wait(&p, ROOT_TOL).unwrap();
        assert_eq!(dec.decision, MyopicKind::UpdateNow);
        assert_eq!(dec.g_at_decision, 1.0);
    }
}

#[test]
fn constant_efficacy_never_updates() {
    for &(t_half, d, c) in &[(1.0, 1.0, 0.1), (50.0, 2.0, 3.0)] {
        let p = MyopicProblem::new(1.0, t_half, d, c, None).unwrap();
        assert!(!should_update_now(&p));
        assert_eq!(optimal_wait(&p, ROOT_TOL).unwrap().decision, MyopicKind::NoUpdateWithinHorizon);
        for k in 1..50 {
            let t = k as f64;
            assert_eq!(g_value(&p, t).unwrap(), 1.0 - c / (t + d));
            assert!(g_derivative(&p, t).unwrap() > 0.0);
        }
    }
}

#[test]
fn hand_checked_values() {
    let p = MyopicProblem::new(0.0, std::f64::consts::LN_2, 1.0, 0.1, None).unwrap();
    let expected = (1.0 - (-1.0f64).exp()) - 0.1 / 2.0;
    assert!((g_value(&p, 1.0).unwrap() - expected).abs() < 1e-12);
    let p = MyopicProblem::new(0.0, std::f64::consts::LN_2, 1.0, 0.4, None).unwrap();
    assert_eq!(optimal_wait(&p, ROOT_TOL).unwrap().decision, MyopicKind::UpdateNow);
    let p = MyopicProblem::new(0.0, std::f64::consts::LN_2, 1.0, 0.6, Some(50.0)).unwrap();
    assert!(matches!(optimal_wait(&p, ROOT_TOL).unwrap().decision, MyopicKind::UpdateAt { .. }));
}
