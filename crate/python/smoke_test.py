"""Smoke test of the seqmt Python module.

Build and install first:
    pip install maturin
    pip install --no-build-isolation ./crates/python
then run:
    python3 python/smoke_test.py
"""

import math

import seqmt


def main() -> None:
    prior = seqmt.PriorBounds(0, 10, 10)
    t = seqmt.analytic("sprt", 0.01, 0.01, prior)
    assert abs(t.a - 6.90776) < 1e-5 and t.a == t.b, t

    try:
        seqmt.PriorBounds(5, 3, 10)
    except ValueError as e:
        assert "l <= u" in str(e)
    else:
        raise AssertionError("l > u accepted")

    known = seqmt.PriorBounds(3, 3, 10)
    gap = seqmt.analytic("proposed", 0.01, 0.01, known)
    assert abs(gap.c - (math.log(100) + math.log(21))) < 1e-12

    models = [seqmt.Model.gaussian(0.5)] * 10
    truth = seqmt.SignalConfig(10, [1, 2, 3])
    assert truth.labels == [1, 2, 3]
    rec = seqmt.replicate("proposed", models, truth, gap, known, seed=3, index=0)
    assert sum(rec.decision) == 3 and max(rec.stop_time) == rec.overall_stop
    again = seqmt.replicate("proposed", models, truth, gap, known, seed=3, index=0)
    assert again.stop_time == rec.stop_time

    rates = seqmt.error_rates("proposed", models, truth, gap, known, replications=500, seed=1)
    fwe1 = next(m for m in rates["metrics"] if m["metric"] == "fwe1")
    bound = seqmt.error_bound("proposed", known, gap, truth, "type1")
    assert fwe1["value"] <= bound + 3 * fwe1["std_error"] + 1e-12

    cal = seqmt.calibrate("sprt", [seqmt.Model.gaussian(1.0)] * 2, seqmt.PriorBounds(0, 2, 2),
                          0.1, 0.1, method="monte_carlo", replications=1000, seed=2)
    th = cal["thresholds"]
    assert th["a"] == th["b"] and cal["method"] == "monte_carlo"

    means = ["0.25", "0.25", "0.5", "0.5"]
    rows = [[1], [3], [1, 2], [1, 3]]
    table = seqmt.are_table("synchronous", rows, means=means, l=1, u=3)
    assert table[1] == ["1", "1", "1/5", "1/4"], table
    table = seqmt.are_table("decentralized", rows, means=means)
    assert table[1] == ["1/5", "1/5", "4/5", "1/2"], table

    small = seqmt.PriorBounds(1, 3, 4)
    curves = seqmt.sweep(["sprt", "proposed", "synchronous"], [seqmt.Model.gaussian(1.0)] * 4, small,
                         [seqmt.SignalConfig(4, [1])], [2.0, 4.0], replications=200, seed=5,
                         max_replications=200)
    assert len(curves) == 3 and all(len(c["points"]) == 2 for c in curves)
    for c in curves:
        m = [p["mean_time"][0] for p in c["points"]]
        assert m[0] <= m[1]

    coin = [seqmt.Model.bernoulli(0.2, 0.8)]
    one = seqmt.PriorBounds(0, 1, 1)
    exact = seqmt.exact_distribution("sprt", coin, seqmt.SignalConfig(1, [1]),
                                     seqmt.Thresholds(math.log(4), math.log(4), math.log(4), math.log(4)),
                                     one, 1)
    assert abs(exact["fwe2"] - 0.2) < 1e-12

    reports = seqmt.oracle(replications=4000, seed=1)
    assert all(r["passes"] for r in reports), [(r["case"], r["worst_sigmas"]) for r in reports]

    assert [name for name, _ in seqmt.recipes()] == ["homo-gap", "homo-gapinter", "nonhomo"]
    print(f"seqmt {seqmt.__version__}: python smoke test passed")


if __name__ == "__main__":
    main()
