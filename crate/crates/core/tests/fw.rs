use std::sync::atomic::{AtomicUsize, Ordering};

use postshift::fw::{fw_eg, FwConfig, FwPath};
use postshift::metrics::MetricOracle;
use postshift::shiftlab::{benchmarks, corrupt, noisy_conditional};
use postshift::{BasisSet, Dataset, Error, MetricSpec, OracleHandle, ProbabilityModel, SoftPredictions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn benchmark(seed: u64) -> (Dataset, ProbabilityModel, Dataset, ProbabilityModel) {
    let (spec, shift) = benchmarks::gaussian_cluster_noise(0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clean = spec.sample_clean(2000, &mut rng).unwrap();
    let train = corrupt(&spec, &clean, &shift, &mut rng).unwrap();
    let val = spec.sample_clean(600, &mut rng).unwrap();
    let p_tr = noisy_conditional(&spec, &shift, &train).unwrap();
    let p_val = noisy_conditional(&spec, &shift, &val).unwrap();
    (train, p_tr, val, p_val)
}

/// G-mean behind a query interface that stops answering after a budget.
struct Budgeted {
    left: AtomicUsize,
}

impl MetricOracle for Budgeted {
    fn name(&self) -> String {
        "budgeted-gmean".into()
    }

    fn query(&self, data: &Dataset, predictions: &SoftPredictions) -> postshift::Result<f64> {
        if self.left.fetch_sub(1, Ordering::SeqCst) == 0 {
            self.left.store(0, Ordering::SeqCst);
            return Ok(f64::NAN);
        }
        MetricSpec::GMean.evaluate(data, predictions)
    }
}

#[test]
fn known_path_records_the_gradient_chain() {
    let (train, p_tr, val, p_val) = benchmark(1);
    let basis = BasisSet::clusters([0, 1]).unwrap();
    let config = FwConfig { iterations: 6, ..FwConfig::default() };
    let out = fw_eg(&MetricSpec::GMean, &basis, &train, &p_tr, &val, &p_val, &config).unwrap();
    assert_eq!(out.trace.len(), 6);
    for (t, r) in out.trace.iter().enumerate() {
        assert_eq!(r.t, t);
        assert!(!r.shifted);
        assert_eq!(r.step, 2.0 / (t as f64 + 2.0));
        let g = MetricSpec::GMean.gradient(&r.diag, &val.priors()).unwrap();
        assert_eq!(r.gradient.as_ref().unwrap(), &g);
    }
    for pair in out.trace.windows(2) {
        assert_eq!(pair[0].metric_after, pair[1].metric);
    }
    // argmax of the noisy conditional is far from G-mean optimal on this benchmark
    let (start, end) = (out.trace[0].metric, out.trace[5].metric_after);
    assert!(end > start + 0.05, "{start} -> {end}");
}

#[test]
fn oracle_metrics_take_the_unknown_path() {
    let (train, p_tr, val, p_val) = benchmark(2);
    let basis = BasisSet::clusters([0, 1]).unwrap();
    let metric = MetricSpec::Oracle(OracleHandle::new(Budgeted { left: AtomicUsize::new(usize::MAX) }));
    let config = FwConfig { iterations: 3, ..FwConfig::default() };
    let out = fw_eg(&metric, &basis, &train, &p_tr, &val, &p_val, &config).unwrap();
    assert!(out.trace.iter().all(|r| r.shifted && r.gradient.is_none()));
    assert_eq!(out.trace[0].epsilon, 0.1);

    let forced = FwConfig { path: FwPath::Unknown, ..config };
    let direct = fw_eg(&MetricSpec::GMean, &basis, &train, &p_tr, &val, &p_val, &forced).unwrap();
    assert_eq!(direct.trace.len(), 3);
    for (a, b) in out.trace.iter().zip(&direct.trace) {
        assert_eq!(a.alpha, b.alpha);
    }
}

#[test]
fn failure_keeps_the_completed_records() {
    let (train, p_tr, val, p_val) = benchmark(3);
    let basis = BasisSet::clusters([0, 1]).unwrap();
    let config = FwConfig { iterations: 5, ..FwConfig::default() };
    // one base query plus 2·3 probe queries per iteration, plus one for metric_after
    let per_iteration = 2 + 6;
    let metric = MetricSpec::Oracle(OracleHandle::new(Budgeted { left: AtomicUsize::new(2 * per_iteration + 3) }));
    let err = fw_eg(&metric, &basis, &train, &p_tr, &val, &p_val, &config).unwrap_err();
    assert_eq!(err.iteration, err.trace.len());
    assert!(err.iteration >= 1 && err.iteration < 5, "failed at {}", err.iteration);
    assert!(matches!(err.source, Error::NonFiniteMetric { .. }), "{}", err.source);
}

#[test]
fn zero_iterations_is_rejected() {
    let (train, p_tr, val, p_val) = benchmark(4);
    let basis = BasisSet::constant();
    let config = FwConfig { iterations: 0, ..FwConfig::default() };
    let err = fw_eg(&MetricSpec::GMean, &basis, &train, &p_tr, &val, &p_val, &config).unwrap_err();
    assert_eq!(err.iteration, 0);
    assert!(err.trace.is_empty());
}

#[test]
fn runs_are_reproducible() {
    let (train, p_tr, val, p_val) = benchmark(5);
    let basis = BasisSet::clusters([0, 1]).unwrap();
    let config = FwConfig { iterations: 4, split: postshift::fw::SplitMode::Halved, seed: 9, ..FwConfig::default() };
    let a = fw_eg(&MetricSpec::GMean, &basis, &train, &p_tr, &val, &p_val, &config).unwrap();
    let b = fw_eg(&MetricSpec::GMean, &basis, &train, &p_tr, &val, &p_val, &config).unwrap();
    assert_eq!(a, b);
}
