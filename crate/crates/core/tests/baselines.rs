use postshift::baselines::{argmax_baseline, coordinate_search_plugin, grid_len};
use postshift::{Dataset, MetricSpec, ProbabilityModel, SoftPredictions};
use proptest::prelude::*;

fn sample() -> impl Strategy<Value = (usize, Vec<usize>, Vec<f64>)> {
    (2usize..=4, 5usize..40).prop_flat_map(|(m, n)| {
        (Just(m), prop::collection::vec(0..m, n), prop::collection::vec(0.01f64..1.0, n * m))
    })
}

fn metric_of(metric: &MetricSpec, d: &Dataset, assignment: &[usize]) -> f64 {
    metric.evaluate(d, &SoftPredictions::from_assignment(assignment, d.n_classes()).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn search_never_loses_to_argmax((m, labels, raw) in sample(), pick in 0usize..3) {
        let n = labels.len();
        let d = Dataset::new(vec![vec![0.0]; n], labels, m).unwrap();
        let p = ProbabilityModel::normalized(raw, m).unwrap();
        let metric = match pick {
            0 => MetricSpec::GMean,
            1 => MetricSpec::accuracy(m),
            _ => MetricSpec::Linear { weights: (1..=m).map(|k| k as f64).collect() },
        };
        let out = coordinate_search_plugin(&p, &d, &metric, 0.05).unwrap();
        let plain = metric_of(&metric, &d, &argmax_baseline(&p).apply(&d, &p).unwrap());
        prop_assert!(out.value >= plain - 1e-12, "{} < {plain}", out.value);
        prop_assert_eq!(out.queries, (m - 1) * grid_len(0.05));
        prop_assert_eq!(out.zetas.len(), m - 1);
        if out.capped.is_empty() {
            let again = metric_of(&metric, &d, &out.rule.apply(&d, &p).unwrap());
            prop_assert!((again - out.value).abs() < 1e-12, "{again} vs {}", out.value);
        }
    }
}

#[test]
fn binary_search_finds_the_minority_threshold() {
    // class 1 is rare and η̂_1 never exceeds 0.4, so argmax never predicts it
    let p1 = [0.05, 0.1, 0.15, 0.2, 0.3, 0.35, 0.38, 0.4];
    let labels = vec![0, 0, 0, 0, 1, 1, 1, 1];
    let rows: Vec<Vec<f64>> = p1.iter().map(|&q| vec![1.0 - q, q]).collect();
    let d = Dataset::new(vec![vec![0.0]; 8], labels, 2).unwrap();
    let p = ProbabilityModel::from_rows(&rows).unwrap();
    assert_eq!(metric_of(&MetricSpec::GMean, &d, &argmax_baseline(&p).apply(&d, &p).unwrap()), 0.0);
    let out = coordinate_search_plugin(&p, &d, &MetricSpec::GMean, 0.01).unwrap();
    assert_eq!(out.value, 1.0);
    assert_eq!(out.queries, 101);
}
