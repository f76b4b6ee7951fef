import math

import numpy as np
import pytest

from sgt.discretize import NominalFeature, NumericFeature


def two_pass(gs, hs):
    """Reference moments computed the textbook way: means first, then deviations."""
    gs = np.asarray(gs, dtype=float)
    hs = np.asarray(hs, dtype=float)
    n = len(gs)
    if n == 0:
        return dict(n=0, raw_g=0.0, raw_h=0.0, mean_g=0.0, mean_h=0.0, m2_g=0.0, m2_h=0.0, c_gh=0.0)
    mg = math.fsum(gs) / n
    mh = math.fsum(hs) / n
    return dict(
        n=n,
        raw_g=math.fsum(gs * gs),
        raw_h=math.fsum(hs * hs),
        mean_g=mg,
        mean_h=mh,
        m2_g=math.fsum((gs - mg) ** 2),
        m2_h=math.fsum((hs - mh) ** 2),
        c_gh=math.fsum((gs - mg) * (hs - mh)),
    )


def moments_close(stats, ref, rel=1e-9):
    """Compare an accumulator with two_pass output at relative tolerance.

    Means are measured against the spread of the data as well as their own
    size, and the cross moment against sqrt(m2_g * m2_h). Second moments get
    a floor of 1e-6 of the raw sum of squares (an absolute slack of 1e-15 of
    it), below which neither route resolves anything.
    """
    if stats.n != ref["n"]:
        return False
    sg = math.sqrt(ref["m2_g"] / max(ref["n"], 1))
    sh = math.sqrt(ref["m2_h"] / max(ref["n"], 1))
    checks = [
        (stats.mean_g, ref["mean_g"], max(abs(ref["mean_g"]), sg, 1e-300)),
        (stats.mean_h, ref["mean_h"], max(abs(ref["mean_h"]), sh, 1e-300)),
        (stats.m2_g, ref["m2_g"], max(ref["m2_g"], 1e-6 * ref["raw_g"], 1e-300)),
        (stats.m2_h, ref["m2_h"], max(ref["m2_h"], 1e-6 * ref["raw_h"], 1e-300)),
        (stats.c_gh, ref["c_gh"], max(math.sqrt(ref["m2_g"] * ref["m2_h"]),
                                      1e-6 * math.sqrt(ref["raw_g"] * ref["raw_h"]), 1e-300)),
    ]
    return all(abs(a - b) <= rel * scale for a, b, scale in checks)


def central_diff(f, x, step=1e-5):
    return (f(x + step) - f(x - step)) / (2 * step)


def student_t_density(t, df):
    logc = math.lgamma((df + 1) / 2) - math.lgamma(df / 2) - 0.5 * math.log(df * math.pi)
    return math.exp(logc - (df + 1) / 2 * math.log1p(t * t / df))


def student_t_cdf_quad(t, df):
    """P(T <= t) by adaptive quadrature of the density (independent of betainc)."""
    from scipy.integrate import quad

    if t <= 0:
        val, _ = quad(student_t_density, -np.inf, t, args=(df,), epsabs=1e-13, epsrel=1e-12)
        return val
    val, _ = quad(student_t_density, t, np.inf, args=(df,), epsabs=1e-13, epsrel=1e-12)
    return 1.0 - val


def planted_mil(n_bags, rng, n_features=4):
    """Bags of uniform points; positive bags hold one point inside the box
    [0.6, 0.9] x [0.1, 0.4] on the first two features, negatives never do."""
    bags, labels = [], []
    for _ in range(n_bags):
        m = int(rng.integers(3, 10))
        X = rng.random((m, n_features))
        inside = (X[:, 0] > 0.6) & (X[:, 0] < 0.9) & (X[:, 1] > 0.1) & (X[:, 1] < 0.4)
        X[inside, 0] = rng.random(inside.sum()) * 0.6
        y = int(rng.random() < 0.5)
        if y:
            j = int(rng.integers(m))
            X[j, 0] = rng.uniform(0.6, 0.9)
            X[j, 1] = rng.uniform(0.1, 0.4)
        bags.append(X)
        labels.append(y)
    return bags, labels


@pytest.fixture
def unit_features():
    return [NumericFeature("a", 64, 0.0, 1.0), NumericFeature("b", 64, 0.0, 1.0), NominalFeature("c", 3)]


def write_stream_dataset(dirpath, n=3000, seed=0, kind="class"):
    """A small CSV + schema pair: one numeric, one nominal feature."""
    import csv
    import json

    rng = np.random.default_rng(seed)
    csv_path = dirpath / f"{kind}.csv"
    schema_path = dirpath / f"{kind}.schema.json"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x0", "x1", "y"])
        for _ in range(n):
            x0 = rng.random()
            x1 = str(rng.choice(["a", "b"]))
            if kind == "class":
                y = "pos" if (x0 > 0.4) != (rng.random() < 0.05) else "neg"
            else:
                y = repr(float(5.0 * (x0 > 0.4) + (x1 == "b") + 0.1 * rng.normal()))
            w.writerow([repr(float(x0)), x1, y])
    target = {"name": "y", "type": "class", "values": ["neg", "pos"]} if kind == "class" else \
        {"name": "y", "type": "numeric"}
    schema = {"format_version": 1,
              "features": [{"name": "x0", "type": "numeric"}, {"name": "x1", "type": "nominal", "values": ["a", "b"]}],
              "target": target}
    schema_path.write_text(json.dumps(schema))
    return csv_path, schema_path


def write_mil_dataset(dirpath, n_bags=200, seed=0):
    import csv
    import json

    bags, labels = planted_mil(n_bags, np.random.default_rng(seed), n_features=2)
    csv_path = dirpath / "mil.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x0", "x1", "label", "bag"])
        for i, (b, y) in enumerate(zip(bags, labels)):
            for x in b:
                w.writerow([repr(float(x[0])), repr(float(x[1])), y, f"bag{i}"])
    schema_path = dirpath / "mil.schema.json"
    schema_path.write_text(json.dumps({
        "format_version": 1,
        "features": [{"name": "x0", "type": "numeric"}, {"name": "x1", "type": "numeric"}],
        "target": {"name": "label", "type": "bag_label"}, "bag_id": "bag"}))
    return csv_path, schema_path


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS):
            terminalreporter.write_line(line)
