"""Release acceptance suite: one test per criterion, in order.

Each test exercises a complete pipeline (simulate, fit, summarize,
diagnose, or the CLI) against its stated tolerance and, where one is
given, its runtime ceiling.  Fixture seeds are frozen; every expected
value is either an algebraic identity, an analytic moment, or a
Monte-Carlo band wide enough to be stable across platforms.
"""

import hashlib
import math
import time

import numpy as np
import pytest

from stpoint import (
    COV_FAMILIES,
    IntensitySpec,
    SummaryConfig,
    branching_ratio,
    cov_eval,
    globaldiag,
    interpolate_idw,
    localdiag,
    localtest,
    locstppm,
    min_contrast,
    omori_times,
    radial_displacements,
    second_order_global,
    second_order_local,
    sim_etas,
    sim_lgcp,
    sim_poisson,
    stlgcppm,
    stppm,
)
from stpoint.cli import main
from stpoint.simulate import EtasParams
from stpoint.summaries import SummarySurface


def test_criterion_01_homogeneous_intensity_identity():
    # intercept-only fit must return exactly the count density n / volume
    start = time.perf_counter()
    for s in range(20):
        pat = sim_poisson(IntensitySpec.constant(200.0), seed=s)
        fit = stppm(pat, "~1", seed=s)
        est = math.exp(fit.coef[0])
        density = pat.n / pat.volume
        assert abs(est - density) / density < 1e-8
        assert abs(est - 200.0) < 3.0 * math.sqrt(200.0)
    assert time.perf_counter() - start < 5.0


def test_criterion_02_loglinear_coefficient_recovery():
    start = time.perf_counter()
    coefs = []
    for s in range(20):
        pat = sim_poisson(IntensitySpec.loglinear("~x", (2.0, 6.0)), seed=100 + s)
        coefs.append(stppm(pat, "~x", seed=s).coef)
    mean = np.mean(coefs, axis=0)
    assert abs(mean[0] - 2.0) < 0.3
    assert abs(mean[1] - 6.0) < 0.4
    assert time.perf_counter() - start < 120.0


def test_criterion_03_glm_and_lsr_agree():
    gaps = []
    for s in range(10):
        pat = sim_poisson(IntensitySpec.loglinear("~x", (2.0, 6.0)), seed=100 + s)
        side = math.ceil((16 * pat.n) ** (1.0 / 3.0))
        a = stppm(pat, "~x", method="glm", nd=(side, side, side), seed=s)
        b = stppm(pat, "~x", method="lsr", nd=(side, side, side), seed=s)
        gaps.append(float(np.max(np.abs(a.coef - b.coef))))
    assert float(np.mean(gaps)) < 0.15


def test_criterion_04_local_surfaces_average_to_global(grid_network):
    start = time.perf_counter()
    cfg = SummaryConfig(statistic="K")
    for s in range(5):
        pat = sim_poisson(IntensitySpec.loglinear("~x", (3.5, 1.5)), seed=40 + s)
        lam = np.exp(3.5 + 1.5 * pat.x)
        whole = second_order_global(pat, lam, cfg)
        parts = second_order_local(pat, lam, cfg).mean_surface()
        assert np.abs(whole.est - parts.est).max() <= 1e-10
    for s in range(5):
        pat = sim_poisson(
            IntensitySpec.constant(3.0), network=grid_network, seed=60 + s
        )
        lam = np.full(pat.n, pat.n / pat.volume)
        whole = second_order_global(pat, lam, cfg)
        parts = second_order_local(pat, lam, cfg).mean_surface()
        assert np.abs(whole.est - parts.est).max() <= 1e-10
    assert time.perf_counter() - start < 30.0


def test_criterion_05_poisson_summary_calibration(grid_network):
    start = time.perf_counter()
    kvals, gsurfs = [], []
    theo = None
    for s in range(100):
        pat = sim_poisson(IntensitySpec.constant(100.0), seed=10000 + s)
        lam = pat.n / pat.volume
        ksurf = second_order_global(pat, lam, SummaryConfig(statistic="K"))
        gsurf = second_order_global(pat, lam, SummaryConfig(statistic="g"))
        kvals.append(ksurf.est[3, 3])  # node (r, h) = (0.1, 0.1)
        gsurfs.append(gsurf.est)
        theo = ksurf.theo[3, 3]
    kvals = np.asarray(kvals)
    assert theo == pytest.approx(2.0 * math.pi * 0.01 * 0.1, rel=1e-12)
    se = kvals.std(ddof=1) / math.sqrt(len(kvals))
    assert abs(kvals.mean() - theo) < 3.0 * se
    interior = np.mean(gsurfs, axis=0)[1:-1, 1:-1]
    assert interior.min() > 0.85 and interior.max() < 1.15

    netvals, net_theo = [], None
    for s in range(100):
        pat = sim_poisson(
            IntensitySpec.constant(3.0), network=grid_network, seed=20000 + s
        )
        surf = second_order_global(
            pat, pat.n / pat.volume, SummaryConfig(statistic="K")
        )
        netvals.append(surf.est[3, 3])
        net_theo = surf.theo[3, 3]  # r * h on a network
    netvals = np.asarray(netvals)
    se = netvals.std(ddof=1) / math.sqrt(len(netvals))
    assert abs(netvals.mean() - net_theo) < 3.0 * se
    assert time.perf_counter() - start < 180.0


def test_criterion_06_diagnostic_prefers_true_model():
    start = time.perf_counter()
    wins = 0
    for s in range(20):
        pat = sim_poisson(IntensitySpec.loglinear("~x", (0.3, 6.0)), seed=s)
        with_trend = stppm(pat, "~x", seed=0)
        flat = stppm(pat, "~1", seed=0)
        wins += (
            globaldiag(pat, with_trend.fitted).discrepancy
            < globaldiag(pat, flat.fitted).discrepancy
        )
    assert wins >= 18
    assert time.perf_counter() - start < 180.0


def test_criterion_07_outlier_flag_count_tracks_quantile():
    for s in range(20):
        pat = sim_poisson(IntensitySpec.constant(100.0), seed=300 + s)
        res = localdiag(pat, float(pat.n / pat.volume), p=0.9)
        target = pat.n // 10
        assert target - 1 <= len(res.flagged_ids) <= target + 1


def test_criterion_08_contrast_recovers_noiseless_surfaces():
    start = time.perf_counter()
    rs = np.linspace(0.02, 0.5, 12)
    hs = np.linspace(0.02, 0.5, 12)
    r_grid = rs[:, None] * np.ones_like(hs)[None, :]
    h_grid = np.ones_like(rs)[:, None] * hs[None, :]
    rng = np.random.default_rng(77)
    for family in COV_FAMILIES:
        for _ in range(5):
            truth = {
                "sigma": float(rng.uniform(0.5, 2.0)),
                "alpha": float(rng.uniform(0.08, 0.35)),
                "beta": float(rng.uniform(0.08, 0.35)),
            }
            est = np.exp(cov_eval(family, truth, r_grid, h_grid))
            surf = SummarySurface(rs, hs, est, np.ones_like(est), "g")
            fit = min_contrast(surf, family=family)
            for key, want in truth.items():
                assert abs(fit.params[key] - want) / want < 1e-3
    assert time.perf_counter() - start < 10.0


def test_criterion_09_lgcp_end_to_end_recovery():
    # Known failure: the plug-in pair-correlation surface of a single
    # realization carries the realized field's own level and range
    # fluctuation, which at these domain-to-range ratios exceeds the
    # stated tolerance for the two decay parameters (sigma passes).
    start = time.perf_counter()
    truth = {"sigma": 1.2, "alpha": 0.15, "beta": 0.2}
    estimates = {key: [] for key in truth}
    for s in range(20):
        pat = sim_lgcp(params=truth, lam0=400.0, grid=(12, 12, 8), seed=9000 + s)
        fit = stlgcppm(pat, "~1")
        for key in truth:
            estimates[key].append(fit.params[key])
    assert time.perf_counter() - start < 900.0
    misses = {}
    for key, want in truth.items():
        got = np.asarray(estimates[key])
        med = float(np.median(np.abs(got - want) / want))
        if med >= 0.30:
            misses[key] = round(med, 3)
    assert not misses, f"median relative error at or above 0.30: {misses}"


def test_criterion_10_local_fits_bracket_global_truth():
    spec = IntensitySpec.loglinear("~x", (3.0, 2.0))
    pat = sim_poisson(spec, seed=9)
    whole = stppm(pat, "~x", nd=(5, 5, 5), seed=3)
    flat = locstppm(pat, "~x", h_space=1e6, h_time=1e6, nd=(5, 5, 5), seed=3)
    assert np.abs(flat.coef - whole.coef).max() < 1e-6

    hits = 0
    for s in range(20):
        pat = sim_poisson(IntensitySpec.loglinear("~x", (0.005, 5.0)), seed=500 + s)
        fit = locstppm(pat, "~x", seed=s)
        slopes = fit.coef[fit.converged, 1]
        q1, q3 = np.percentile(slopes, [25, 75])
        hits += q1 <= 5.0 <= q3
    assert hits >= 16


def test_criterion_11_permutation_test_null_calibration():
    fracs = []
    for s in range(20):
        bg = sim_poisson(IntensitySpec.constant(30.0), seed=7000 + s)
        alt = sim_poisson(IntensitySpec.constant(30.0), seed=7500 + s)
        res = localtest(bg, alt, k=19, alpha=0.05, seed=s)
        fracs.append(len(res.significant_ids) / bg.n)
    assert float(np.mean(fracs)) <= 0.10


def test_criterion_12_branching_ratio_and_kernel_samplers():
    params = EtasParams(mu=25.0, k0=1e-4, c=0.02, p=1.5, d=0.05, q=2.0)
    eta = branching_ratio(params, 0.5)
    assert eta < 1.0
    spawners = 0
    offspring = 0
    for s in range(200):
        _, info = sim_etas(params, seed=s, return_info=True)
        spawners += info["spawners"]
        offspring += info["offspring_drawn"]
    assert abs(offspring / spawners - eta) / eta < 0.05

    def ks(sample, cdf):
        x = np.sort(sample)
        n = len(x)
        f = cdf(x)
        return max(
            float(np.max(np.arange(1, n + 1) / n - f)),
            float(np.max(f - np.arange(0, n) / n)),
        )

    tau = omori_times(np.random.default_rng(5), 10_000, 0.02, 1.5)
    assert ks(tau, lambda v: 1.0 - (1.0 + v / 0.02) ** -0.5) < 0.02
    rad = radial_displacements(np.random.default_rng(6), 10_000, 0.05, 2.0)
    assert ks(rad, lambda v: 1.0 - (1.0 + v**2 / 0.05) ** -1.0) < 0.02


def test_criterion_13_idw_interpolation_properties():
    rng = np.random.default_rng(21)
    nodes = np.array([0.0, 0.5, 1.0])
    sites = np.array(
        [
            [0.0, 0.0, 0.0],
            [1.0, 1.0, 1.0],
            [0.5, 0.5, 0.5],
            [1.0, 0.0, 0.5],
            [0.0, 1.0, 1.0],
        ]
    )
    vals = rng.normal(size=len(sites))
    grid = interpolate_idw(np.column_stack([sites, vals]), grid=(3, 3, 3))
    for (x, y, t), want in zip(sites, vals):
        ix = int(np.where(nodes == x)[0][0])
        iy = int(np.where(nodes == y)[0][0])
        it = int(np.where(nodes == t)[0][0])
        assert abs(grid.values[it, iy, ix] - want) <= 1e-12

    coords = rng.random((100, 3))
    values = rng.poisson(15, 100).astype(float)
    smooth = interpolate_idw(np.column_stack([coords, values]))
    assert smooth.values.min() >= values.min() - 1e-12
    assert smooth.values.max() <= values.max() + 1e-12

    pair = np.array([[0.0, 0.0, 0.0, 0.0], [1.0, 1.0, 1.0, 1.0]])
    mid = interpolate_idw(pair, grid=(3, 3, 3))
    assert mid.values[1, 1, 1] == 0.5


def _digest_dir(path):
    out = {}
    for f in sorted(path.iterdir()):
        out[f.name] = hashlib.sha256(f.read_bytes()).hexdigest()
    return out


def test_criterion_14_cli_reruns_are_byte_identical(tmp_path):
    domain = ["--window", "0,1,0,1", "--time", "0,1"]
    bg_dir = tmp_path / "bg"
    alt_dir = tmp_path / "alt"
    assert main(["simulate", "poisson", "--lambda", "150", *domain,
                 "--seed", "3", "--out", str(bg_dir)]) == 0
    assert main(["simulate", "poisson", "--lambda", "120", *domain,
                 "--seed", "4", "--out", str(alt_dir)]) == 0
    pattern = str(bg_dir / "pattern.csv")
    lags = ["--rs", "0.05,0.1,0.15,0.2", "--hs", "0.05,0.1,0.15,0.2"]

    commands = {
        "sim-poisson": ["simulate", "poisson", "--lambda", "150", *domain,
                        "--seed", "3"],
        "sim-etas": ["simulate", "etas", "--mu", "30", "--k0", "0.0001",
                     "--c", "0.02", "--p", "1.5", "--d", "0.05", "--q", "2.0",
                     *domain, "--seed", "6"],
        "fit-poisson": ["fit", "poisson", "--pattern", pattern, *domain,
                        "--formula", "~x", "--seed", "2"],
        "fit-separable": ["fit", "separable", "--pattern", pattern, *domain,
                          "--space-formula", "~x", "--time-formula", "~1",
                          "--seed", "5"],
        "fit-local": ["fit", "local-poisson", "--pattern", pattern, *domain,
                      "--formula", "~x", "--nd", "5", "--seed", "7"],
        "fit-lgcp": ["fit", "lgcp", "--pattern", pattern, *domain, *lags,
                     "--family", "sep-exp", "--nd", "6", "--seed", "4"],
        "test-local": ["test", "local", "--background", pattern,
                       "--alt", str(alt_dir / "pattern.csv"), *domain,
                       "--k", "19", "--seed", "11"],
    }
    for name, argv in commands.items():
        out = tmp_path / name
        digests = []
        for extra in ([], [], ["--threads", "2"]):
            assert main(argv + ["--out", str(out)] + extra) == 0
            digests.append(_digest_dir(out))
        assert digests[0] == digests[1] == digests[2], name
