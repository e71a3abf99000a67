use proptest::prelude::*;

use pumba::constraints::{bounded_moments_constraints, county_table_constraints, regression_constraints, CountSupport};
use pumba::imputation::{impute, sample_truncated_univariate, ImputationOptions};
use pumba::mechanisms::{release, NoiseFamily, NoiseKind, PrivacyBudget, PrivacyRegime};
use pumba::models::SummaryStatistic;
use pumba::{ConstraintSet, PrivateRelease, RngHandle};

fn laplace_release(task: &str, n: u64, s_dp: Vec<f64>, scale: f64) -> PrivateRelease {
    let k = s_dp.len();
    PrivateRelease {
        task_id: task.to_string(),
        n,
        s_dp,
        noise: NoiseFamily::laplace(vec![scale; k]).unwrap(),
        budget: PrivacyBudget::new(k as f64 / scale, PrivacyRegime::PureDp, vec![1.0; k]).unwrap(),
    }
}

fn quick() -> ImputationOptions {
    ImputationOptions {
        burn_in: 200,
        pilot_sweeps: 200,
        ..Default::default()
    }
}

fn all_inside(cs: &ConstraintSet, draws: &[Vec<f64>]) -> bool {
    draws.iter().all(|d| cs.contains(d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn truncated_draws_stay_in_bounds(
        laplace in any::<bool>(),
        center in -50.0f64..50.0,
        scale in 0.05f64..20.0,
        lo in -30.0f64..30.0,
        len in 1e-3f64..40.0,
        seed in any::<u64>(),
    ) {
        let kind = if laplace { NoiseKind::Laplace } else { NoiseKind::Gaussian };
        let mut rng = RngHandle::new(seed, 0);
        for _ in 0..20 {
            let x = sample_truncated_univariate(&mut rng, kind, center, scale, lo, lo + len).unwrap();
            prop_assert!(lo <= x && x <= lo + len, "{x} outside [{lo}, {}]", lo + len);
        }
    }

    #[test]
    fn bounded_moment_draws_are_feasible(
        n in 2u64..400,
        frac in 0.0f64..1.0,
        jitter in -3.0f64..3.0,
        scale in 0.2f64..10.0,
        seed in any::<u64>(),
    ) {
        let nf = n as f64;
        let s1 = frac * nf + jitter * scale;
        let s2 = frac * frac * nf + jitter * scale;
        let rel = laplace_release("bounded_mean", n, vec![s1, s2], scale);
        let cs = bounded_moments_constraints(n).unwrap();
        let rep = impute(&mut RngHandle::new(seed, 1), &rel, &cs, 40, &quick()).unwrap();
        prop_assert_eq!(rep.len(), 40);
        prop_assert!(all_inside(&cs, &rep.draws));
    }

    #[test]
    fn regression_draws_are_feasible(
        n in 5u64..200,
        x in 0.1f64..0.9,
        y in 0.1f64..0.9,
        scale in 0.5f64..8.0,
        seed in any::<u64>(),
    ) {
        let nf = n as f64;
        let t = vec![x * nf, (x * x + 0.02) * nf, y * nf, (y * y + 0.02) * nf, x * y * nf];
        let rel = PrivateRelease {
            task_id: "linreg_ssp".to_string(),
            n,
            s_dp: t,
            noise: NoiseFamily::gaussian(vec![scale; 5]).unwrap(),
            budget: PrivacyBudget::new(5f64.sqrt() / scale, PrivacyRegime::GaussianDp, vec![1.0; 5]).unwrap(),
        };
        let cs = regression_constraints(n).unwrap();
        let rep = impute(&mut RngHandle::new(seed, 2), &rel, &cs, 30, &quick()).unwrap();
        prop_assert!(all_inside(&cs, &rep.draws));
    }

    #[test]
    fn county_draws_respect_integrality_and_totals(
        pops in prop::collection::vec(5u64..60, 1..4),
        noise in 0.3f64..3.0,
        seed in any::<u64>(),
    ) {
        let s_dp: Vec<f64> = pops.iter().flat_map(|&p| {
            let q = p as f64 / 4.0;
            [q, q, q, q, p as f64 / 2.0]
        }).collect();
        let k = s_dp.len();
        let rel = PrivateRelease {
            task_id: "county_linear".to_string(),
            n: pops.len() as u64,
            s_dp,
            noise: NoiseFamily::gaussian(vec![noise; k]).unwrap(),
            budget: PrivacyBudget::new(8f64.sqrt() / noise, PrivacyRegime::GaussianDp, vec![8f64.sqrt()]).unwrap(),
        };
        let cs = county_table_constraints(&pops, CountSupport::Discrete).unwrap();
        let rep = impute(&mut RngHandle::new(seed, 3), &rel, &cs, 25, &quick()).unwrap();
        prop_assert!(all_inside(&cs, &rep.draws));
        for d in &rep.draws {
            for (c, &p) in d.chunks(5).zip(&pops) {
                prop_assert!(c.iter().all(|v| v.fract() == 0.0));
                prop_assert!(c[..4].iter().sum::<f64>() <= p as f64);
            }
        }
    }

    #[test]
    fn translating_release_and_support_translates_draws(
        n in 2u64..200,
        frac in 0.05f64..0.95,
        shift in prop::array::uniform2(-1000i32..1000),
        seed in any::<u64>(),
    ) {
        let nf = n as f64;
        // dyadic release so that moving it back and forth is exact
        let s_dp = vec![(frac * nf * 8.0).round() / 8.0, (frac * frac * nf * 8.0).round() / 8.0];
        let c = [shift[0] as f64, shift[1] as f64];
        let rel = laplace_release("bounded_mean", n, s_dp.clone(), 1.0);
        let moved = laplace_release("bounded_mean", n, vec![s_dp[0] + c[0], s_dp[1] + c[1]], 1.0);
        let cs = bounded_moments_constraints(n).unwrap();
        let a = impute(&mut RngHandle::new(seed, 4), &rel, &cs, 20, &quick()).unwrap();
        let b = impute(&mut RngHandle::new(seed, 4), &moved, &cs.shifted(&c).unwrap(), 20, &quick()).unwrap();
        for (u, v) in a.draws.iter().zip(&b.draws) {
            for j in 0..2 {
                prop_assert_eq!((u[j] + c[j]).to_bits(), v[j].to_bits());
            }
        }
    }

    #[test]
    fn released_budget_matches_noise(
        eps in 0.01f64..10.0,
        k in 1usize..6,
        laplace in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let (noise, budget) = if laplace {
            (
                NoiseFamily::laplace(vec![k as f64 / eps; k]).unwrap(),
                PrivacyBudget::new(eps, PrivacyRegime::PureDp, vec![1.0; k]).unwrap(),
            )
        } else {
            (
                NoiseFamily::gaussian(vec![(k as f64).sqrt() / eps; k]).unwrap(),
                PrivacyBudget::new(eps, PrivacyRegime::GaussianDp, vec![1.0; k]).unwrap(),
            )
        };
        let t = SummaryStatistic::new("x", 10, vec![1.0; k]);
        let rel = release(&mut RngHandle::new(seed, 5), &t, &noise, &budget).unwrap();
        prop_assert!(rel.validate().is_ok());
        let implied = rel.budget.implied_epsilon(&rel.noise).unwrap();
        prop_assert!((implied - eps).abs() < 1e-9 * eps);
        let over = PrivacyBudget::new(eps * 0.9, budget.regime, budget.sensitivity.clone()).unwrap();
        prop_assert!(release(&mut RngHandle::new(seed, 5), &t, &noise, &over).is_err());
    }
}
