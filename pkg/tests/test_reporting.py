import json

import numpy as np

from crossdiff.grid import Grid
from crossdiff.model import build_system_spec
from crossdiff.reporting import spec_from_dict, spec_to_dict, validate_report, write_report
from crossdiff.runner import run
from crossdiff.solver import SolverConfig


def small_result(mode="both", with_picard=False):
    spec = build_system_spec({"k": [1.0, 2.0], "a": [1.0, 1.0], "d": 1})
    g = Grid(d=1, N=64)
    x = g.axes()[0]
    u0 = np.stack([1 + 0.3 * np.cos(x), 1 + 0.3 * np.sin(x)])
    return run(spec, u0, g, SolverConfig(t_end=0.01), mode=mode, with_picard=with_picard)


def test_spec_dict_roundtrip():
    spec = build_system_spec({"k": [1.0, 2.0], "a": [0.5, 1.0], "d": 2})
    back = spec_from_dict(spec_to_dict(spec))
    np.testing.assert_allclose(back.k, spec.k)
    assert back.d == 2
    specB = build_system_spec({"B": [[1.0, 1.0], [1.0, 1.0]], "d": 1})
    backB = spec_from_dict(spec_to_dict(specB))
    assert backB.rank == 1


def test_write_and_validate_csv_report(tmp_path):
    res = small_result()
    outdir = write_report(res, tmp_path / "rep", fmt="csv")
    assert (outdir / "report.json").exists()
    with open(outdir / "report.json") as fh:
        payload = json.load(fh)
    assert len(payload["snapshot_files"]["direct"]) == len(res.times)
    ok, checks = validate_report(outdir)
    assert ok, checks


def test_write_and_validate_binary_report(tmp_path):
    res = small_result(mode="direct")
    outdir = write_report(res, tmp_path / "rep", fmt="binary")
    ok, checks = validate_report(outdir)
    assert ok, checks


def test_picard_trace_written(tmp_path):
    res = small_result(mode="direct", with_picard=True)
    outdir = write_report(res, tmp_path / "rep")
    trace = (outdir / "picard_trace.csv").read_text().strip().splitlines()
    assert trace[0].startswith("iterate,")
    assert len(trace) == len(res.picard.records) + 1


def test_tampered_report_fails_validation(tmp_path):
    res = small_result(mode="direct")
    outdir = write_report(res, tmp_path / "rep")
    with open(outdir / "report.json") as fh:
        payload = json.load(fh)
    payload["masses"][-1][0] += 1.0
    with open(outdir / "report.json", "w") as fh:
        json.dump(payload, fh)
    ok, checks = validate_report(outdir)
    assert not ok
    failed = [name for name, passed, _ in checks if not passed]
    assert any("mass" in name for name in failed)


def test_missing_snapshots_reported(tmp_path):
    res = small_result(mode="direct")
    outdir = write_report(res, tmp_path / "rep")
    for p in (outdir / "snapshots").iterdir():
        p.unlink()
    ok, checks = validate_report(outdir)
    assert not ok
    assert any("present" in name and not passed for name, passed, _ in checks)
