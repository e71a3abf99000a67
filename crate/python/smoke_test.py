"""Smoke test for the pumba_py extension.

Build and install it first:

    pip install --no-build-isolation -e crates/python
    python python/smoke_test.py
"""

import csv
import io
import random

import pumba_py as pb


def bounded_mean():
    rng = random.Random(5)
    data = [rng.betavariate(2, 4) for _ in range(2000)]
    rel = pb.privatize("bounded_mean", data, epsilon=[0.5, 0.5], seed=3)
    assert rel.task_id == "bounded_mean" and rel.n == 2000
    assert rel.noise_scales == [2.0, 2.0]

    back = pb.PrivateRelease.from_json(rel.to_json())
    assert back.s_dp == rel.s_dp

    s = pb.analyze(rel, draws=400, seed=1)
    lo, hi = s.intervals[0]
    assert s.mode == "draws" and len(s.draws) == 400
    assert lo < s.mean[0] < hi
    assert abs(s.mean[0] - sum(data) / len(data)) < 0.05

    mc = pb.analyze(rel, mode="mean_cov", draws=400, seed=1)
    assert mc.draws is None and mc.param_names == ["mu"]

    imputed = pb.impute(rel, draws=200, seed=2)
    n = rel.n
    for s1, s2 in imputed:
        assert 0 <= s1 <= n and 0 <= s2 <= s1 and s1 * s1 <= n * s2 + 1e-9
    print("bounded mean:", s)


def regression():
    rng = random.Random(6)
    pairs = []
    for _ in range(500):
        x = rng.random()
        pairs.append((x, 0.25 + 0.5 * x + (rng.betavariate(4, 4) - 0.5) / 2))
    rel = pb.privatize("linreg_ssp", pairs, epsilon=[1.0], seed=4)
    s = pb.analyze(rel, draws=300)
    assert s.param_names == ["beta0", "beta1"]
    assert len(s.cov) == 2 and len(s.cov[0]) == 2
    print("regression:", [f"{a:.3f} [{lo:.3f}, {hi:.3f}]" for a, (lo, hi) in zip(s.mean, s.intervals)])


def simulation():
    config = """
design = "bounded_mean"
replicates = 3
draws = 100
methods = ["pumba_draws", "wang_oracle", "non_dp"]

[data]
n = 200

[privacy]
epsilon = [0.5, 0.5]
"""
    table = pb.simulate(config, format="markdown")
    assert table.startswith("| Method | n | Coverage |")
    # ESS/sec depends on wall-clock time, the scores do not
    def scores(text):
        return [(r["method"], r["coverage"], r["width"], r["rmse"]) for r in csv.DictReader(io.StringIO(text))]

    assert scores(pb.simulate(config, seed=9)) == scores(pb.simulate(config, seed=9))
    assert "design" in pb.preset_config("table2")
    print(table)


def errors():
    for call in (
        lambda: pb.privatize("nope", [0.5], epsilon=[1.0]),
        lambda: pb.preset_config("table9"),
        lambda: pb.simulate("bogus = 1"),
    ):
        try:
            call()
        except ValueError:
            continue
        raise AssertionError("expected ValueError")


if __name__ == "__main__":
    bounded_mean()
    regression()
    simulation()
    errors()
    print("smoke test passed")
