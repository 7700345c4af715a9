"""Smoke test for the Python extension.

Build and install it first, e.g.

    cd crates/python && maturin develop --release

then run `python python/smoke_test.py`.
"""

import math
import sys

import postshift as ps


def accuracy_oracle(labels, predictions, protected):
    return sum(p[y] for y, p in zip(labels, predictions)) / len(labels)


def splits(bench, n_train, n_val, n_test, seed):
    clean = bench.sample_clean(n_train, seed)
    train = bench.corrupt(clean, seed + 1)
    val = bench.sample_clean(n_val, seed + 2)
    test = bench.sample_clean(n_test, seed + 3)
    probs = [bench.noisy_conditional(d) for d in (train, val, test)]
    return (train, val, test), probs


def check_domain_shift():
    bench = ps.Benchmark.two_point_domain_shift()
    (train, val, test), (p_train, p_val, p_test) = splits(bench, 50_000, 5_000, 50_000, 11)
    basis = ps.Basis.clusters(sorted(set(train.groups)))
    metric = ps.Metric.accuracy(2)
    rule, result = ps.pi_ew(metric, basis, train, p_train, val, p_val, epsilon=1.0, reg=1e-8)
    preds = rule.predict(test, p_test)
    acc = sum(int(p == y) for p, y in zip(preds, test.labels)) / len(test)
    bayes = bench.bayes_oracle(metric)["value"]
    assert abs(acc - bayes) < 0.01, (acc, bayes)

    # the same metric through a Python callable elicits the same weights
    oracle = ps.Metric.oracle(accuracy_oracle, name="py-accuracy")
    _, via_oracle = ps.pi_ew(oracle, basis, train, p_train, val, p_val, epsilon=1.0, reg=1e-8)
    gap = max(abs(a - b) for a, b in zip(result["coefficients"]["alpha"], via_oracle["coefficients"]["alpha"]))
    assert gap < 1e-6, gap
    print(f"domain shift: pi-ew test accuracy {acc:.4f}, bayes {bayes:.4f}, oracle alpha gap {gap:.1e}")


def check_frank_wolfe():
    bench = ps.Benchmark.gaussian_cluster_noise(0.3)
    (train, val, test), (p_train, p_val, p_test) = splits(bench, 20_000, 2_000, 20_000, 5)
    basis = ps.Basis.clusters(sorted(set(train.groups)))
    gmean = ps.Metric.gmean()
    argmax = [[1.0 if k == j else 0.0 for k in range(3)] for j in p_test.argmax()]
    base = gmean.evaluate(test, argmax)
    classifier, trace = ps.fw_eg(gmean, basis, train, p_train, val, p_val, iterations=10, reg=1e-8)
    value = gmean.evaluate(test, classifier.predict_proba(test, p_test))
    assert len(trace) == 10
    assert value > base + 0.05, (value, base)

    rule, info = ps.coordinate_search(gmean, p_val, val, spacing=0.01)
    assert info["queries"] == 2 * 101
    assert math.isclose(info["value"], gmean.evaluate(val, [[float(k == j) for k in range(3)] for j in rule.predict(val, p_val)]))
    print(f"gaussian noise: argmax gmean {base:.4f}, fw-eg {value:.4f}, coordinate search val {info['value']:.4f}")


def check_errors():
    try:
        ps.Dataset([[0.0]], [3], 2)
    except ValueError as e:
        print(f"bad label rejected: {e}")
    else:
        raise AssertionError("label outside the class range was accepted")
    d = ps.Dataset([[0.0], [1.0]], [0, 1], 2)
    c = ps.confusion(d, [[1.0, 0.0], [0.5, 0.5]])
    assert c == [[0.5, 0.0], [0.25, 0.25]], c


def main():
    print(f"postshift {ps.__version__}")
    check_errors()
    check_domain_shift()
    check_frank_wolfe()
    print("ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
