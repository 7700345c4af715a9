use approx::assert_abs_diff_eq;
use postshift::shiftlab::{benchmarks, bayes_oracle, corrupt, noisy_conditional, true_weights, ShiftSpec, SyntheticSpec};
use postshift::{confusion, MetricSpec, SoftPredictions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

fn assignments(points: usize, m: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..m.pow(points as u32)).map(move |mut code| {
        (0..points)
            .map(|_| {
                let c = code % m;
                code /= m;
                c
            })
            .collect()
    })
}

fn four_points() -> SyntheticSpec {
    SyntheticSpec::Discrete {
        points: vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
        joint: vec![vec![0.2, 0.1], vec![0.05, 0.15], vec![0.1, 0.1], vec![0.25, 0.05]],
    }
}

#[test]
fn gaussian_bayes_accuracy_matches_normal_cdf() {
    let spec = SyntheticSpec::Gaussian {
        means: vec![vec![-1.0], vec![1.0]],
        covariance: vec![vec![1.0]],
        priors: vec![0.5, 0.5],
        cluster_feature: None,
    };
    let sample = spec.sample_clean(100_000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let oracle = bayes_oracle(&spec, &MetricSpec::accuracy(2), 10, Some(&sample)).unwrap();
    let phi1 = Normal::new(0.0, 1.0).unwrap().cdf(1.0);
    assert!((oracle.value - phi1).abs() < 0.01, "{} vs {phi1}", oracle.value);
    assert_eq!(oracle.weights[0], oracle.weights[1]);
}

#[test]
fn domain_shift_weights_reproduce_clean_accuracy_for_every_classifier() {
    let spec = four_points();
    let marginal = vec![0.1, 0.4, 0.3, 0.2];
    let shift = ShiftSpec::Ds { marginal: marginal.clone() };
    let joint = [[0.2, 0.1], [0.05, 0.15], [0.1, 0.1], [0.25, 0.05]];
    let mut seen = 0;
    for a in assignments(4, 2) {
        let mut weighted = 0.0;
        for (p, row) in joint.iter().enumerate() {
            let mass: f64 = row.iter().sum();
            let w = true_weights(&spec, &shift, &[1.0, 0.0, 0.0, 1.0], &[p as f64], Some(p)).unwrap();
            // training law: point drawn from the marginal, label from the clean conditional
            let i = a[p];
            weighted += w[i * 2 + i] * marginal[p] * row[i] / mass;
        }
        let clean = spec.population_confusion(&a).unwrap();
        assert_abs_diff_eq!(weighted, clean.diag().iter().sum::<f64>(), epsilon = 1e-12);
        seen += 1;
    }
    assert_eq!(seen, 16);
}

#[test]
fn label_noise_weights_reproduce_any_linear_metric() {
    let spec = SyntheticSpec::Discrete {
        points: vec![vec![0.0], vec![1.0]],
        joint: vec![vec![0.2, 0.15, 0.1], vec![0.05, 0.3, 0.2]],
    };
    let t = vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.8, 0.1], vec![0.15, 0.05, 0.8]];
    let shift = ShiftSpec::Iln { transition: t.clone() };
    let costs = [1.0, -0.5, 0.2, 0.0, 2.0, -1.0, 0.3, 0.1, 1.5];
    for a in assignments(2, 3) {
        let clean = spec.population_confusion(&a).unwrap();
        let target: f64 = costs.iter().zip(clean.full()).map(|(l, c)| l * c).sum();
        let mut weighted = 0.0;
        for p in 0..2 {
            let w = true_weights(&spec, &shift, &costs, &[p as f64], Some(p)).unwrap();
            for (j, wrow) in w.chunks(3).enumerate() {
                let noisy: f64 = (0..3).map(|i| clean_joint(&spec, p, i) * t[i][j]).sum();
                weighted += wrow[a[p]] * noisy;
            }
        }
        assert_abs_diff_eq!(weighted, target, epsilon = 1e-12);
    }
}

fn clean_joint(spec: &SyntheticSpec, p: usize, i: usize) -> f64 {
    match spec {
        SyntheticSpec::Discrete { joint, .. } => joint[p][i],
        _ => unreachable!(),
    }
}

#[test]
fn noisy_conditional_is_the_transition_image() {
    let (spec, shift) = benchmarks::gaussian_cluster_noise(0.3);
    let d = spec.sample_clean(200, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let clean = spec.conditional_model(&d).unwrap();
    let noisy = noisy_conditional(&spec, &shift, &d).unwrap();
    for x in 0..d.len() {
        let g = d.groups().unwrap()[x];
        let t = shift.transition(d.row(x), Some(g)).unwrap();
        for j in 0..3 {
            let expected: f64 = (0..3).map(|i| clean.row(x)[i] * t[i * 3 + j]).sum();
            assert_abs_diff_eq!(noisy.row(x)[j], expected, epsilon = 1e-12);
        }
        if g == 0 {
            for (a, b) in noisy.row(x).iter().zip(clean.row(x)) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-15);
            }
        }
    }
}

#[test]
fn flip_rate_matches_the_transition() {
    let spec = SyntheticSpec::Gaussian {
        means: vec![vec![-1.0], vec![1.0]],
        covariance: vec![vec![1.0]],
        priors: vec![0.5, 0.5],
        cluster_feature: None,
    };
    let shift = ShiftSpec::Iln { transition: vec![vec![0.4, 0.6], vec![0.6, 0.4]] };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 20_000;
    let clean = spec.sample_clean(n, &mut rng).unwrap();
    let noisy = corrupt(&spec, &clean, &shift, &mut rng).unwrap();
    let flips = clean.labels().iter().zip(noisy.labels()).filter(|(a, b)| a != b).count() as f64 / n as f64;
    let sd = (0.6 * 0.4 / n as f64).sqrt();
    assert!((flips - 0.6).abs() < 3.0 * sd, "flip rate {flips}");
    assert_eq!(clean.features(), noisy.features());
}

#[test]
fn domain_shift_keeps_conditionals() {
    let (spec, shift) = benchmarks::two_point_domain_shift();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let clean = spec.sample_clean(20_000, &mut rng).unwrap();
    let shifted = corrupt(&spec, &clean, &shift, &mut rng).unwrap();
    let mut counts = [[0usize; 2]; 2];
    for x in 0..shifted.len() {
        counts[shifted.groups().unwrap()[x]][shifted.label(x)] += 1;
    }
    // Pearson statistic of the labels at each point against P(y | x)
    let conds = [[0.7, 0.3], [0.2, 0.8]];
    let mut stat = 0.0;
    for p in 0..2 {
        let total = (counts[p][0] + counts[p][1]) as f64;
        for i in 0..2 {
            let e = total * conds[p][i];
            stat += (counts[p][i] as f64 - e).powi(2) / e;
        }
    }
    let limit = ChiSquared::new(2.0).unwrap().inverse_cdf(0.999);
    assert!(stat < limit, "chi-square {stat} above {limit}");
    let share = counts[0].iter().sum::<usize>() as f64 / shifted.len() as f64;
    assert!((share - 0.5).abs() < 4.0 * (0.25 / shifted.len() as f64).sqrt());
}

#[test]
fn sample_oracle_beats_every_fixed_rule_it_contains() {
    let (spec, _) = benchmarks::gaussian_cluster_noise(0.3);
    let sample = spec.sample_clean(3000, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let oracle = bayes_oracle(&spec, &MetricSpec::GMean, 6, Some(&sample)).unwrap();
    let cond = spec.conditional_model(&sample).unwrap();
    let plain_rule = SoftPredictions::new(cond.values().to_vec(), 3).unwrap().argmax();
    let h = SoftPredictions::from_assignment(&plain_rule, 3).unwrap();
    let plain = MetricSpec::GMean.value_from_stats(&confusion(&sample, &h).unwrap()).unwrap().value;
    assert!(oracle.value >= plain - 1e-12);
}
