use countdiag::dist::{FamilyKind, FamilySpec};
use countdiag::fit::{fit_glm, DesignMatrix, Predictive};
use countdiag::rootogram::{
    expected_frequencies, layout_rootogram, observed_frequencies, BreakSpec, FrequencyTable, Scale, Style,
};
use proptest::prelude::*;

fn family() -> impl Strategy<Value = FamilySpec> {
    prop_oneof![
        (0.05f64..30.0).prop_map(|m| FamilySpec::poisson(m).unwrap()),
        (0.05f64..30.0, 0.1f64..50.0).prop_map(|(m, t)| FamilySpec::negbin(m, t).unwrap()),
    ]
}

fn predictive() -> impl Strategy<Value = Predictive> {
    prop_oneof![
        family().prop_map(Predictive::Count),
        (0.0f64..0.95, 0.05f64..20.0, 0.2f64..10.0).prop_map(|(p, m, t)| Predictive::Hurdle {
            p_zero: p,
            count: FamilySpec::zt_negbin(m, t).unwrap(),
        }),
    ]
}

fn style() -> impl Strategy<Value = Style> {
    prop_oneof![Just(Style::Standing), Just(Style::Hanging), Just(Style::Suspended)]
}

fn scale() -> impl Strategy<Value = Scale> {
    prop_oneof![Just(Scale::Sqrt), Just(Scale::Raw)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn layout_inverts_to_the_frequencies(
        pairs in prop::collection::vec((0.0f64..500.0, 0.0f64..500.0), 1..20),
        style in style(),
        scale in scale(),
    ) {
        let (obs, exp): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let breaks = BreakSpec::integers(obs.len() as u64 - 1, false);
        let table = FrequencyTable::new(breaks, obs.clone(), exp.clone()).unwrap();
        let (o, e) = layout_rootogram(&table, style, scale).invert();
        for j in 0..obs.len() {
            prop_assert!((o[j] - obs[j]).abs() <= 1e-12 * obs[j].max(1.0), "obs {j}: {} vs {}", o[j], obs[j]);
            prop_assert!((e[j] - exp[j]).abs() <= 1e-12 * exp[j].max(1.0));
        }
    }

    #[test]
    fn frequencies_scale_with_weights(
        rows in prop::collection::vec((predictive(), 0u64..25, 0.1f64..3.0), 1..30),
        c in 0.1f64..10.0,
    ) {
        let preds: Vec<Predictive> = rows.iter().map(|r| r.0.clone()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.1 as f64).collect();
        let w: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let cw: Vec<f64> = w.iter().map(|v| c * v).collect();
        let breaks = BreakSpec::integers(12, true);
        let (o1, _) = observed_frequencies(&y, &w, &breaks).unwrap();
        let (o2, _) = observed_frequencies(&y, &cw, &breaks).unwrap();
        let e1 = expected_frequencies(&preds, &w, &breaks).unwrap();
        let e2 = expected_frequencies(&preds, &cw, &breaks).unwrap();
        for j in 0..o1.len() {
            prop_assert!((o2[j] - c * o1[j]).abs() < 1e-9 * (1.0 + o2[j]));
            prop_assert!((e2[j] - c * e1[j]).abs() < 1e-9 * (1.0 + e2[j]));
        }
        // open tail: the bins exhaust the support
        let total: f64 = w.iter().sum();
        prop_assert!((e1.iter().sum::<f64>() - total).abs() < 1e-6);
        prop_assert!((o1.iter().sum::<f64>() - total).abs() < 1e-9);
    }

    #[test]
    fn survival_complements_cdf(p in predictive(), j in 0i64..60) {
        let (cdf, sf) = (p.cdf(j), p.sf(j));
        prop_assert!((cdf + sf - 1.0).abs() < 1e-12, "cdf {cdf} sf {sf}");
        prop_assert!(sf >= 0.0);
    }

    #[test]
    fn poisson_scores_vanish_and_doubling_weights_is_duplication(
        data in prop::collection::vec((0u64..15, -1.0f64..1.0), 8..40),
    ) {
        let y: Vec<f64> = data.iter().map(|d| d.0 as f64).collect();
        prop_assume!(y.iter().any(|&v| v > 0.0));
        let rows: Vec<Vec<f64>> = data.iter().map(|d| vec![1.0, d.1]).collect();
        let x = DesignMatrix::from_rows(vec!["(Intercept)".into(), "x".into()], &rows).unwrap();
        let Ok(fit) = fit_glm(&x, &y, &vec![1.0; y.len()], FamilyKind::Poisson) else {
            return Ok(());
        };
        for col in 0..2 {
            let score: f64 = (0..y.len()).map(|i| x.get(i, col) * (y[i] - fit.fitted_means[i])).sum();
            prop_assert!(score.abs() < 1e-6 * (1.0 + y.iter().sum::<f64>()), "score {col}: {score}");
        }

        let doubled = fit_glm(&x, &y, &vec![2.0; y.len()], FamilyKind::Poisson).unwrap();
        let rows2: Vec<Vec<f64>> = rows.iter().chain(&rows).cloned().collect();
        let x2 = DesignMatrix::from_rows(vec!["(Intercept)".into(), "x".into()], &rows2).unwrap();
        let y2: Vec<f64> = y.iter().chain(&y).copied().collect();
        let dup = fit_glm(&x2, &y2, &vec![1.0; y2.len()], FamilyKind::Poisson).unwrap();
        for k in 0..2 {
            prop_assert!((doubled.coefficients[k] - dup.coefficients[k]).abs() < 1e-7);
            prop_assert!((doubled.coefficients[k] - fit.coefficients[k]).abs() < 1e-7);
        }
        prop_assert!((doubled.loglik - dup.loglik).abs() < 1e-7 * dup.loglik.abs().max(1.0));
    }
}
