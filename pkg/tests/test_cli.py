"""CLI subcommands produce their documented artifacts."""

import json

import numpy as np

from blowlab.cli import main

TINY = [
    "--p", "3", "--alpha", "1", "--n", "1",
    "--A", "20", "--K", "3", "--s0", "20",
]


def test_scaling_csv(tmp_path):
    out = tmp_path / "scaling.csv"
    js = tmp_path / "map.json"
    main(["scaling", *TINY, "--s-max", "25", "--every", "0.5",
          "--out", str(out), "--json", str(js)])
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "s,ell,h,h_expansion,ratio_to_kappa"
    assert len(lines) > 5
    d = json.loads(js.read_text())
    assert set(d) >= {"s", "ell", "h", "p", "alpha"}


def test_terms_csv(tmp_path):
    out = tmp_path / "terms.csv"
    main(["terms", *TINY, "--s-list", "20,22", "--y-max", "10",
          "--dy", "1.0", "--out", str(out)])
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "y,s,V,R,D_at_q0,B_at_qref"
    assert len(lines) == 1 + 2 * 11


def test_shoot_profile_report(tmp_path):
    rundir = tmp_path / "run"
    main(["shoot", *TINY, "--s-target", "22", "--dy", "0.15",
          "--outdir", str(rundir)])
    for name in ("bracket_history.csv", "trajectory.csv", "checkpoint.json",
                 "snapshots.npz", "summary.json"):
        assert (rundir / name).exists(), name
    summary = json.loads((rundir / "summary.json").read_text())
    assert summary["survived"] is True
    ck = json.loads((rundir / "checkpoint.json").read_text())
    assert set(ck) == {"s", "y_nodes", "w_values"}
    data = np.load(rundir / "snapshots.npz")
    assert data["w"].shape[0] == len(data["s"])

    main(["profile", str(rundir)])
    rep = json.loads((rundir / "final_profile.json").read_text())
    assert "fitted_slope" in rep and "dyadic_ratios" in rep
    assert (rundir / "final_profile.csv").exists()


def test_report_bundle(tmp_path):
    outdir = tmp_path / "bundle"
    main(["report", *TINY, "--s-target", "21.5", "--dy", "0.15",
          "--observe-every", "0.1", "--outdir", str(outdir)])
    manifest = json.loads((outdir / "manifest.json").read_text())
    for name in manifest["artifacts"]:
        assert (outdir / name).exists(), name


def test_bench_smoke(capsys):
    main(["bench", "--steps", "20", "--dy", "0.2", "--K", "3"])
    out = capsys.readouterr().out
    assert "numpy" in out
