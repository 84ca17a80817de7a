"""Acceptance checks, one PASS/FAIL line each in the terminal summary.

A check that misses its target stays red; nothing here is loosened to pass.
"""

import math
import time

import numpy as np

import oracles
from instances import FAMILIES, random_instance
from geostat import io
from geostat import kernels as K
from geostat.cli import main
from geostat.fields import Dataset, Design, Kind, SplitScheme, make_bivariate_design, make_grid
from geostat.fields import make_spacetime_design, sample_uniform_locations, split
from geostat.inference import Exact, Vecchia, build_neighbor_graph, fit_mle, log_likelihood, vecchia_log_likelihood
from geostat.predict import exact_kriging
from geostat.score import mcrmse, rmse
from geostat.simulate import StationaryMatern, build_covariance_matrix, preset, sample_grf


def test_parsimonious_cross_correlation(verdict):
    a = K.parsimonious_rho(0.6, 1.4, 0.9)
    b = K.parsimonious_rho(0.9, 0.9, 0.9)
    reps = 1000
    t = time.perf_counter()
    for _ in range(reps):
        K.parsimonious_rho(0.6, 1.4, 0.9)
    per_call = (time.perf_counter() - t) / reps
    ok = abs(a - 0.824) <= 5e-4 and abs(b - 0.9) <= 1e-12 and per_call < 1e-3
    assert verdict(
        "parsimonious rho",
        ok,
        f"rho(0.6,1.4,0.9)={a:.6f} (target 0.824+-5e-4, off by {abs(a - 0.824):.1e}); "
        f"rho(0.9,0.9,0.9)={b:.15f}; {per_call * 1e6:.1f} us/call",
    )


def test_effective_ranges(verdict):
    t = time.perf_counter()

    def temporal(a_t, alpha):
        return lambda u: K.gneiting_temporal_factor(a_t, alpha, u)

    def spatial(nu, a):
        return lambda h: K.matern_correlation(nu, h / a)

    cases = [
        (K.effective_range(temporal(1.0, 0.6)), 11.63, 0.01),
        (K.effective_range(temporal(0.24, 0.6)), 38.20, 0.01),
        (K.effective_range(spatial(1.0, 0.02)), 0.08, 0.005),
        (K.effective_range(spatial(1.0, 0.08)), 0.32, 0.005),
        (K.effective_range(spatial(1.0, 0.4)), 1.6, 0.005),
    ]
    for nu, a, expected in [(0.6, 0.03, 0.097), (1.4, 0.03, 0.138), (0.9, 0.02, 0.077), (0.9, 0.3, 1.15),
                            (1.4, 0.1, 0.46)]:
        cases.append((K.effective_range(spatial(nu, a)), expected, 0.005))
    try:
        K.effective_range(temporal(1.0, 0.08), bracket=(0.0, 1e6))
        unbounded = False
    except K.Unbounded:
        unbounded = True
    elapsed = time.perf_counter() - t
    worst = max(abs(got - want) / tol for got, want, tol in cases)
    ok = worst <= 1 and unbounded and elapsed < 1
    assert verdict(
        "effective ranges",
        ok,
        f"{len(cases)} ranges, worst error {worst:.2f} of tolerance; alpha=0.08 unbounded={unbounded}; {elapsed:.2f}s",
    )


def _oracle_loglik(family, params, data):
    S = oracles.covariance(family, params, data.design)
    mean = np.array([oracles.mean1a(*p) for p in data.design.coords]) if family == "nugget" else 0.0
    return oracles.gaussian_loglik(S, data.values - mean)


def test_exact_likelihood_against_oracle(verdict):
    t = time.perf_counter()
    worst = 0.0
    for family in FAMILIES:
        for seed in range(20):
            n = 8 + (seed * 7) % 57  # sizes 8..64
            params, model, data = random_instance(family, n, 100 + seed)
            worst = max(worst, abs(log_likelihood(model, data) - _oracle_loglik(family, params, data)))
    elapsed = time.perf_counter() - t
    ok = worst <= 1e-8 and elapsed < 10
    assert verdict("exact likelihood", ok, f"{20 * len(FAMILIES)} instances, max |diff|={worst:.2e}; {elapsed:.1f}s")


def test_vecchia_full_conditioning(verdict):
    t = time.perf_counter()
    worst = 0.0
    for family in FAMILIES:
        _, model, data = random_instance(family, 50, 200)
        g = build_neighbor_graph(data.design, len(data) - 1)
        worst = max(worst, abs(vecchia_log_likelihood(model, data, g) - log_likelihood(model, data)))
    elapsed = time.perf_counter() - t
    ok = worst <= 1e-8 and elapsed < 10
    assert verdict("vecchia full conditioning", ok, f"max |diff|={worst:.2e} over {len(FAMILIES)} families; {elapsed:.1f}s")


def test_kriging_interpolation_and_conditioning(verdict):
    t = time.perf_counter()
    m = StationaryMatern(K.MaternParams(1.0, 0.1, 1.0, 0.0))
    train = sample_grf(m, Design(Kind.SPATIAL, sample_uniform_locations(200, 1)), seed=1)
    interp = float(np.max(np.abs(exact_kriging(m, train, train.design).mean - train.values)))
    worst_mean = worst_var = 0.0
    for family in FAMILIES:
        for seed in range(5):
            params, model, data = random_instance(family, 20, 300 + seed)
            tr, te = data.take(np.arange(0, len(data), 2)), data.take(np.arange(1, len(data), 2))
            S_xx = oracles.covariance(family, params, tr.design)
            S_tx = oracles.covariance(family, params, te.design, tr.design)
            S_tt = np.diag(oracles.covariance(family, params, te.design))
            if family == "nugget":
                mx = np.array([oracles.mean1a(*p) for p in tr.design.coords])
                mt = np.array([oracles.mean1a(*p) for p in te.design.coords])
            else:
                mx = mt = 0.0
            shift, var = oracles.conditional_normal(S_xx, S_tx, S_tt, tr.values - mx)
            p = exact_kriging(model, tr, te.design)
            worst_mean = max(worst_mean, float(np.max(np.abs(p.mean - (mt + shift)))))
            worst_var = max(worst_var, float(np.max(np.abs(p.variance - var))))
    elapsed = time.perf_counter() - t
    ok = interp <= 1e-6 and worst_mean <= 1e-9 and worst_var <= 1e-9 and elapsed < 10
    assert verdict(
        "kriging",
        ok,
        f"interpolation error {interp:.1e}; conditional mean/var error {worst_mean:.1e}/{worst_var:.1e}; {elapsed:.1f}s",
    )


def test_simulation_moments(verdict):
    t = time.perf_counter()
    reps = 1000
    pts = sample_uniform_locations(100, 21)
    cases = [
        ("matern", StationaryMatern(K.MaternParams(1.0, 0.1, 1.0, 0.05)), Design(Kind.SPATIAL, pts)),
        ("gneiting", preset("ST1").model, make_spacetime_design(pts[:25], 4)),
        ("bivariate", preset("3a-1").model, make_bivariate_design(pts[:50])),
    ]
    report = []
    ok = True
    for name, model, design in cases:
        C = build_covariance_matrix(model, design).entries
        Z = np.stack([sample_grf(model, design, seed=s).values for s in range(reps)])
        E = Z.T @ Z / reps  # the mean is known to be zero
        tol = 5 * np.sqrt((np.outer(np.diag(C), np.diag(C)) + C**2) / reps)
        ratio = float(np.max(np.abs(E - C) / tol))
        ok &= ratio <= 1
        report.append(f"{name} {ratio:.2f}")
    elapsed = time.perf_counter() - t
    ok &= elapsed < 300
    assert verdict("simulation moments", ok, f"worst entry error / tolerance: {', '.join(report)}; {elapsed:.1f}s")


def test_end_to_end_recovery(verdict):
    t = time.perf_counter()
    truth = StationaryMatern(K.MaternParams(1.0, 0.1, 1.0, 0.05))
    data = sample_grf(truth, Design(Kind.SPATIAL, make_grid(40)), seed=11)
    tts = split(data, SplitScheme("random10"), 5)
    rough = fit_mle("matern", tts.train, likelihood=Vecchia(30))
    fit = fit_mle("matern", tts.train, init=rough.params, likelihood=Exact())
    ll_fit, ll_true = log_likelihood(fit.model, tts.train), log_likelihood(truth, tts.train)
    r_fit = rmse(exact_kriging(fit.model, tts.train, tts.test.design).mean, tts.test.values)
    r_true = rmse(exact_kriging(truth, tts.train, tts.test.design).mean, tts.test.values)
    elapsed = time.perf_counter() - t
    ok = ll_fit >= ll_true and abs(r_fit - r_true) <= 0.1 * r_true and elapsed < 300
    assert verdict(
        "end-to-end recovery",
        ok,
        f"loglik fitted {ll_fit:.3f} vs true {ll_true:.3f}; RMSE fitted {r_fit:.4f} vs true {r_true:.4f}; "
        f"{elapsed:.0f}s",
    )


def test_split_structure(verdict):
    t = time.perf_counter()
    pts = sample_uniform_locations(100, 4)
    st = Dataset(make_spacetime_design(pts, 100), np.zeros(10_000))
    t10 = split(st, SplitScheme("t10"), 1)
    t10_ok = len(t10.test) == 1000
    rs = split(st, SplitScheme("rs"), 1)
    test_locs = {tuple(p) for p in rs.test.design.coords}
    train_locs = {tuple(p) for p in rs.train.design.coords}
    rs_ok = not (test_locs & train_locs) and len(rs.test) == 100 * len(test_locs)
    bv = Dataset(make_bivariate_design(pts), np.zeros(200))
    r10 = split(bv, SplitScheme("random10"), 1)
    pairs = {}
    for p, v in zip(map(tuple, r10.test.design.coords), r10.test.design.var):
        pairs.setdefault(p, set()).add(int(v))
    pairs_ok = all(s == {1, 2} for s in pairs.values()) and len(r10.test) == 2 * len(pairs)
    elapsed = time.perf_counter() - t
    ok = t10_ok and rs_ok and pairs_ok and elapsed < 1
    assert verdict(
        "split structure",
        ok,
        f"T10 test rows {len(t10.test)}; RS whole locations {rs_ok}; bivariate pairs kept {pairs_ok}; {elapsed:.2f}s",
    )


def _cli(*argv):
    code = main([str(a) for a in argv])
    assert code == 0, argv
    return code


def test_scoring_and_pipeline(verdict, tmp_path, capsys):
    t = time.perf_counter()
    r = rmse([0.0, 0.0], [3.0, 4.0])
    per = [0.41, 0.97, 1.3]
    m = mcrmse(per)
    data = tmp_path / "st2.csv"
    _cli("generate", "--preset", "ST2", "--n", 50, "--m-slots", 10, "--seed", 7, "--out", data)
    _cli("split", data, "--seed", 7, "--out", tmp_path / "st2")
    _cli("predict", tmp_path / "st2.train.csv", tmp_path / "st2.targets.csv", "--exact", "--out", tmp_path / "p.csv")
    capsys.readouterr()
    _cli("score", tmp_path / "st2.test.csv", tmp_path / "p.csv")
    pipeline = float(io.parse_kv(capsys.readouterr().out)["rmse.st2"])
    elapsed = time.perf_counter() - t
    rows = len(io.read_dataset(data))
    ok = abs(r - 3.535534) <= 1e-9 and abs(m - sum(per) / 3) <= 1e-12 and pipeline < math.sqrt(0.9)
    ok &= rows == 500 and elapsed < 120
    assert verdict(
        "scoring",
        ok,
        f"rmse((3,4))={r:.10f} (target 3.535534+-1e-9, off by {abs(r - 3.535534):.1e}); mcrmse error {abs(m - sum(per) / 3):.0e}; "
        f"{rows}-row pipeline RMSE {pipeline:.4f} < sqrt(0.9)={math.sqrt(0.9):.4f}; {elapsed:.1f}s",
    )


def _pipeline(root, threads):
    root.mkdir()
    for name, extra in (("st", ["--preset", "ST5", "--n", 60, "--m-slots", 12]), ("ns", ["--preset", "1a-2", "--n", 500])):
        data = root / f"{name}.csv"
        _cli("generate", *extra, "--seed", 42, "--threads", threads, "--out", data)
        _cli("split", data, "--seed", 42, "--threads", threads, "--out", root / name)
        for how in (["--exact"], ["--neighbors", 25]):
            out = root / f"{name}.{how[0].strip('-')}.pred.csv"
            _cli("predict", root / f"{name}.train.csv", root / f"{name}.targets.csv", *how,
                 "--threads", threads, "--out", out)
    _cli("score", root / "st.test.csv", root / "st.neighbors.pred.csv", root / "ns.test.csv",
         root / "ns.neighbors.pred.csv", "--out", root / "scores.csv")
    return {p.name: p.read_bytes() for p in sorted(root.glob("*.csv"))}


def test_determinism_across_thread_counts(verdict, tmp_path, capsys):
    a = _pipeline(tmp_path / "one", 1)
    b = _pipeline(tmp_path / "three", 3)
    capsys.readouterr()
    same = [k for k in a if b.get(k) == a[k]]
    ok = set(a) == set(b) and len(same) == len(a)
    assert verdict("determinism", ok, f"{len(same)}/{len(a)} CSV outputs byte-identical with 1 vs 3 threads")
