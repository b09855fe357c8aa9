"""File formats and the command-line pipelines.

Round trips must be bit-for-bit (floats serialize with 17 significant
digits in CSV and shortest exact repr in JSON), CLI runs byte-identical
under reruns and --threads variation, and every CLI artifact must equal
the corresponding library call on the same inputs.
"""

import json
import hashlib
import math

import numpy as np
import pytest

from stpoint import (
    CovariateGrid,
    MarkColumn,
    PointPattern,
    SpatialWindow,
    TimeInterval,
    globaldiag,
    interpolate_idw,
    localdiag,
    localtest,
    second_order_global,
    stppm,
)
from stpoint.cli import main
from stpoint.io import (
    fmt_float,
    grid_from_nodes,
    json_dumps,
    read_covariate_csv,
    read_intensity_csv,
    read_network_json,
    read_pattern_csv,
    read_surface_csv,
    write_covariate_csv,
    write_intensity_csv,
    write_network_json,
    write_pattern_csv,
    write_surface_csv,
)


# ---------------------------------------------------------------------------
# serialization round trips


def test_float_formats_round_trip():
    tricky = [
        math.pi,
        1.0 / 3.0,
        1e-300,
        6.02214076e23,
        -0.1,
        2.0**-52,
        1.7976931348623157e308,
    ]
    for v in tricky:
        assert float(fmt_float(v)) == v
        assert json.loads(json_dumps({"v": v}))["v"] == v


def test_pattern_csv_round_trip(tmp_path, unit_window, unit_interval):
    rng = np.random.default_rng(5)
    coords = rng.random((40, 3))
    pat = PointPattern(
        coords,
        unit_window,
        unit_interval,
        marks={
            "mag": MarkColumn("continuous", rng.random(40) * 3 + 2),
            "type": MarkColumn(
                "categorical", (rng.random(40) < 0.5).astype(int), ("A", "B")
            ),
        },
    )
    path = tmp_path / "pattern.csv"
    write_pattern_csv(pat, path)
    back = read_pattern_csv(path, window=unit_window, interval=unit_interval)
    assert np.array_equal(back.coords, pat.coords)
    assert np.array_equal(back.marks["mag"].values, pat.marks["mag"].values)
    assert list(back.marks["type"].labels) == list(pat.marks["type"].labels)
    assert back.window == pat.window and back.interval == pat.interval


def test_pattern_csv_header_check(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError, match="header must start with x,y,t"):
        read_pattern_csv(bad)


def test_network_json_round_trip(tmp_path, grid_network):
    path = tmp_path / "net.json"
    write_network_json(grid_network, path)
    back = read_network_json(path)
    assert np.array_equal(back.vertices, grid_network.vertices)
    assert np.array_equal(back.segments, grid_network.segments)
    with pytest.raises(ValueError, match="vertices"):
        (tmp_path / "empty.json").write_text("[]")
        read_network_json(tmp_path / "empty.json")


def test_covariate_grid_round_trip(tmp_path):
    vals = np.arange(24, dtype=float).reshape(4, 3, 2) * math.pi
    grid = CovariateGrid("elev", 0.0, 0.5, 2, 0.0, 0.25, 3, 0.0, 0.1, 4, vals)
    path = tmp_path / "cov.csv"
    write_covariate_csv(grid, path)
    back = grid_from_nodes(read_covariate_csv(path), name="elev")
    assert np.array_equal(back.values, grid.values)
    for attr in ("x0", "dx", "nx", "y0", "dy", "ny", "t0", "dt", "nt"):
        assert getattr(back, attr) == getattr(grid, attr)


def test_grid_from_nodes_rejects_scattered_samples():
    rng = np.random.default_rng(2)
    scattered = np.column_stack([rng.random((10, 3)), rng.random(10)])
    with pytest.raises(ValueError, match="complete regular grid"):
        grid_from_nodes(scattered)
    # complete grid but shuffled rows: the node order is part of the format
    grid = CovariateGrid(
        "c", 0.0, 1.0, 2, 0.0, 1.0, 2, 0.0, 1.0, 2, np.arange(8, dtype=float).reshape(2, 2, 2)
    )
    table = grid.node_table()[::-1]
    with pytest.raises(ValueError, match="x-fastest"):
        grid_from_nodes(table)


def test_surface_csv_round_trip(tmp_path, poisson100):
    lam = float(poisson100.n / poisson100.volume)
    surf = second_order_global(poisson100, lam)
    path = tmp_path / "surface.csv"
    write_surface_csv(surf, path)
    back = read_surface_csv(path, statistic="K")
    assert np.array_equal(back.rs, surf.rs)
    assert np.array_equal(back.hs, surf.hs)
    assert np.array_equal(back.est, surf.est)
    assert np.array_equal(back.theo, surf.theo)


def test_intensity_csv_round_trip(tmp_path):
    vals = np.exp(np.random.default_rng(3).random(25) * 4)
    path = tmp_path / "lam.csv"
    write_intensity_csv(vals, path)
    assert np.array_equal(read_intensity_csv(path), vals)
    bad = tmp_path / "bad.csv"
    bad.write_text("intensity\n-1.0\n")
    with pytest.raises(ValueError, match="positive"):
        read_intensity_csv(bad)


# ---------------------------------------------------------------------------
# CLI: determinism and exit codes


SIM_ARGS = [
    "simulate",
    "poisson",
    "--lambda",
    "200",
    "--window",
    "0,1,0,1",
    "--time",
    "0,1",
    "--seed",
    "2",
]


def read_bytes(path):
    return path.read_bytes()


def test_simulate_rerun_is_byte_identical(tmp_path, capsys, monkeypatch):
    out = tmp_path / "out"
    assert main(SIM_ARGS + ["-o", str(out)]) == 0
    first = {p.name: read_bytes(p) for p in out.iterdir()}
    assert set(first) == {"pattern.csv", "run.json"}

    assert main(SIM_ARGS + ["-o", str(out)]) == 0
    assert {p.name: read_bytes(p) for p in out.iterdir()} == first

    monkeypatch.setenv("STPP_THREADS", "4")
    assert main(SIM_ARGS + ["-o", str(out)]) == 0
    assert {p.name: read_bytes(p) for p in out.iterdir()} == first
    monkeypatch.delenv("STPP_THREADS")

    assert main(SIM_ARGS + ["--threads", "2", "-o", str(out)]) == 0
    assert {p.name: read_bytes(p) for p in out.iterdir()} == first
    capsys.readouterr()


def test_run_manifest_checksums(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(SIM_ARGS + ["-o", str(out)]) == 0
    manifest = json.loads((out / "run.json").read_text())
    assert manifest["command"] == "simulate poisson"
    assert manifest["seed"] == 2
    assert "threads" not in manifest["flags"]
    for name, digest in manifest["outputs"].items():
        actual = hashlib.sha256(read_bytes(out / name)).hexdigest()
        assert actual == digest
    capsys.readouterr()


def test_usage_errors_exit_2(tmp_path, capsys, monkeypatch):
    out = str(tmp_path / "o")
    # argparse: missing required --seed
    assert main(["simulate", "poisson", "--lambda", "5", "-o", out]) == 2
    # unknown subcommand
    assert main(["frobnicate"]) == 2
    # conflicting intensity specifications
    assert (
        main(
            ["simulate", "poisson", "--lambda", "5", "--formula", "~x",
             "--coef", "1,1", "--seed", "1", "-o", out]
        )
        == 2
    )
    # network domain without a network file
    assert (
        main(["simulate", "poisson", "--lambda", "5", "--domain", "network",
              "--seed", "1", "-o", out])
        == 2
    )
    assert main(SIM_ARGS + ["--threads", "0", "-o", out]) == 2
    monkeypatch.setenv("STPP_THREADS", "soon")
    assert main(SIM_ARGS + ["-o", out]) == 2
    monkeypatch.delenv("STPP_THREADS")
    capsys.readouterr()


def test_computation_errors_exit_1(tmp_path, capsys):
    out = str(tmp_path / "o")
    assert main(["fit", "poisson", "--pattern", str(tmp_path / "missing.csv"),
                 "--seed", "1", "-o", out]) == 1
    pat = tmp_path / "p.csv"
    main(SIM_ARGS + ["-o", str(tmp_path / "sim")])
    (tmp_path / "sim" / "pattern.csv").rename(pat)
    assert main(["fit", "poisson", "--pattern", str(pat), "--formula", "~ zz",
                 "--seed", "1", "-o", out]) == 1
    capsys.readouterr()


# ---------------------------------------------------------------------------
# CLI: golden equivalence with library calls


def simulate_pattern(tmp_path, capsys):
    out = tmp_path / "sim"
    assert main(SIM_ARGS + ["-o", str(out)]) == 0
    capsys.readouterr()
    return out / "pattern.csv"


def test_fit_poisson_names_and_equivalence(tmp_path, capsys):
    pat_csv = simulate_pattern(tmp_path, capsys)
    out = tmp_path / "fit"
    assert main(["fit", "poisson", "--pattern", str(pat_csv), "--formula", "~ x",
                 "--seed", "2", "-o", str(out)]) == 0
    capsys.readouterr()
    model = json.loads((out / "model.json").read_text())
    assert model["coefficients"]["names"] == ["(Intercept)", "x"]

    pattern = read_pattern_csv(pat_csv)
    lib = stppm(pattern, trend="~ x", seed=2)
    assert model["coefficients"]["values"] == lib.coef.tolist()
    assert np.array_equal(read_intensity_csv(out / "intensity.csv"), lib.fitted)


def test_summary_equivalence(tmp_path, capsys):
    pat_csv = simulate_pattern(tmp_path, capsys)
    out = tmp_path / "summ"
    assert main(["summary", "--pattern", str(pat_csv), "--statistic", "K",
                 "-o", str(out)]) == 0
    capsys.readouterr()
    pattern = read_pattern_csv(pat_csv)
    lib = second_order_global(pattern, pattern.n / pattern.volume)
    back = read_surface_csv(out / "surface.csv")
    assert np.array_equal(back.est, lib.est)
    assert np.array_equal(back.theo, lib.theo)


def test_diagnose_global_equivalence(tmp_path, capsys):
    pat_csv = simulate_pattern(tmp_path, capsys)
    pattern = read_pattern_csv(pat_csv)
    lam = np.full(pattern.n, pattern.n / pattern.volume)
    lam_csv = tmp_path / "lam.csv"
    write_intensity_csv(lam, lam_csv)

    out = tmp_path / "diag"
    assert main(["diagnose", "global", "--pattern", str(pat_csv),
                 "--intensity", str(lam_csv), "-o", str(out)]) == 0
    capsys.readouterr()
    lib = globaldiag(pattern, lam)
    diag = json.loads((out / "diag.json").read_text())
    assert diag["sum_squared_differences"] == lib.discrepancy
    back = read_surface_csv(out / "ksurface.csv")
    assert np.array_equal(back.est, lib.surface.est)


def test_diagnose_local_emits_flagged_surfaces(tmp_path, capsys):
    pat_csv = simulate_pattern(tmp_path, capsys)
    pattern = read_pattern_csv(pat_csv)
    lam = np.full(pattern.n, pattern.n / pattern.volume)
    lam_csv = tmp_path / "lam.csv"
    write_intensity_csv(lam, lam_csv)

    out = tmp_path / "dl"
    assert main(["diagnose", "local", "--pattern", str(pat_csv),
                 "--intensity", str(lam_csv), "--p", "0.9", "-o", str(out)]) == 0
    capsys.readouterr()
    lib = localdiag(pattern, lam, p=0.9)
    diag = json.loads((out / "diag.json").read_text())
    assert diag["flagged_ids"] == lib.flagged_ids.tolist()
    assert diag["threshold"] == lib.threshold

    rows = (out / "scores.csv").read_text().strip().splitlines()
    assert rows[0] == "id,score,flagged"
    scores = np.array([float(r.split(",")[1]) for r in rows[1:]])
    assert np.array_equal(scores, lib.scores)

    # one surface file per flagged event, bit-for-bit with the library
    for pid in lib.flagged_ids:
        back = read_surface_csv(out / f"infl_{int(pid)}.csv")
        assert np.array_equal(back.est, lib.listas.surfaces[int(pid) - 1].est)


def test_test_local_equivalence(tmp_path, capsys):
    bg_out, alt_out = tmp_path / "bg", tmp_path / "alt"
    assert main(SIM_ARGS + ["-o", str(bg_out)]) == 0
    alt_args = list(SIM_ARGS)
    alt_args[alt_args.index("--seed") + 1] = "3"
    alt_args[alt_args.index("--lambda") + 1] = "150"
    assert main(alt_args + ["-o", str(alt_out)]) == 0

    out = tmp_path / "test"
    assert main(["test", "local", "--background", str(bg_out / "pattern.csv"),
                 "--alt", str(alt_out / "pattern.csv"),
                 "--window", "0,1,0,1", "--time", "0,1",
                 "--k", "19", "--alpha", "0.05", "--seed", "11",
                 "-o", str(out)]) == 0
    capsys.readouterr()

    win, iv = SpatialWindow(0, 1, 0, 1), TimeInterval(0, 1)
    bg = read_pattern_csv(bg_out / "pattern.csv", window=win, interval=iv)
    alt = read_pattern_csv(alt_out / "pattern.csv", window=win, interval=iv)
    lib = localtest(bg, alt, k=19, alpha=0.05, seed=11)

    rows = (out / "pvalues.csv").read_text().strip().splitlines()
    assert rows[0] == "id,pvalue,significant"
    pvals = np.array([float(r.split(",")[1]) for r in rows[1:]])
    assert np.array_equal(pvals, lib.pvalues)
    info = json.loads((out / "test.json").read_text())
    assert info["significant_ids"] == lib.significant_ids.tolist()
    assert info["n_background"] == bg.n and info["n_alternative"] == alt.n


def test_covariate_equivalence(tmp_path, capsys):
    rng = np.random.default_rng(9)
    samples = np.column_stack([rng.random((30, 3)), rng.random(30) * 10])
    sample_csv = tmp_path / "samples.csv"
    with open(sample_csv, "w") as fh:
        fh.write("x,y,t,value\n")
        for row in samples:
            fh.write(",".join(fmt_float(v) for v in row) + "\n")

    out = tmp_path / "cov"
    assert main(["covariate", "--samples", str(sample_csv), "--name", "elev",
                 "--grid", "4,4,3", "--power", "2.0", "-o", str(out)]) == 0
    capsys.readouterr()
    lib = interpolate_idw(
        read_covariate_csv(sample_csv), grid=(4, 4, 3), power=2.0, name="elev"
    )
    back = grid_from_nodes(read_covariate_csv(out / "covariate.csv"), name="elev")
    assert np.array_equal(back.values, lib.values)


def test_fit_lgcp_family_alias_and_artifacts(tmp_path, capsys):
    pat_csv = simulate_pattern(tmp_path, capsys)
    out = tmp_path / "lgcp"
    assert main(["fit", "lgcp", "--pattern", str(pat_csv),
                 "--family", "sep-exp",
                 "--rs", "0.05,0.1,0.15,0.2", "--hs", "0.05,0.1,0.15,0.2",
                 "--nd", "6", "--seed", "4", "-o", str(out)]) == 0
    capsys.readouterr()
    model = json.loads((out / "model.json").read_text())
    assert model["family"] == "separable-exponential"
    assert set(model["second_order"]["params"]) == {"sigma", "alpha", "beta"}
    pattern = read_pattern_csv(pat_csv)
    lam = read_intensity_csv(out / "intensity.csv")
    assert lam.shape == (pattern.n,)


def test_simulate_etas_and_svg(tmp_path, capsys):
    out = tmp_path / "etas"
    assert main(["simulate", "etas", "--mu", "30", "--k0", "0.0001", "--c", "0.02",
                 "--p", "1.5", "--d", "0.05", "--q", "2.0",
                 "--seed", "6", "--emit-svg", "-o", str(out)]) == 0
    capsys.readouterr()
    info = json.loads((out / "etas.json").read_text())
    assert info["branching_ratio"] < 1.0
    pattern = read_pattern_csv(out / "pattern.csv")
    assert "magnitude" in pattern.marks
    svg = (out / "pattern.svg").read_text()
    assert svg.startswith("<svg") or svg.startswith("<?xml")
