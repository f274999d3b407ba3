import csv
import filecmp
import math
import os
import shutil
import tempfile

import numpy as np
import pytest
from hypothesis import given, strategies as st

from multisol.aobd import SolutionRecord
from multisol.cli import main
from multisol.runner import (
    ConfigError,
    RunConfig,
    export_field,
    load_bundle,
    load_config,
    read_record,
    run,
    sweep_bundle,
    validate,
    write_record,
)

SMALL_INI = """
[problem]
name = henon
[resolution]
M = 4
N = 6
[basis]
max_basis = 3
starts_per_round = 3
max_rounds = 1
"""


def _small(**kw):
    return load_config(SMALL_INI, seed=0, **kw)


@pytest.fixture(scope="module")
def bundle_dir(tmp_path_factory):
    d = str(tmp_path_factory.mktemp("bundle") / "run")
    run(_small(), d)
    return d


def _tree_equal(a, b):
    cmp = filecmp.dircmp(a, b)
    if cmp.left_only or cmp.right_only or cmp.funny_files:
        return False
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    return not mismatch and not errors and all(_tree_equal(os.path.join(a, s), os.path.join(b, s)) for s in cmp.common_dirs)


def test_config_round_trip():
    cfg = _small(seed_resolution=(2, 3), b_end=0.8, sweep_steps=2)
    again = load_config(cfg.to_ini())
    assert again == cfg
    assert again.digest() == cfg.digest()


@pytest.mark.parametrize(
    "text,needle",
    [
        ("[problem]\ncolour = red\n", "colour"),
        ("[resolution]\nM = four\n", "M"),
        ("[domain]\nb = 2.0\n", "b"),
        ("[problem]\nbc = robin\n", "bc"),
        ("[solver]\neps_g = -1\n", "eps_g"),
        ("[sweep]\nsteps = 3\n", "b_end"),
        ("not an ini", "parse"),
    ],
)
def test_config_errors_name_the_field(text, needle):
    with pytest.raises(ConfigError, match=needle):
        load_config(text)


def test_run_requires_seed(tmp_path):
    with pytest.raises(ConfigError):
        run(load_config(SMALL_INI), str(tmp_path))


finite = st.floats(allow_nan=False, allow_infinity=False)


# n_dofs(2, 3) = 2 * 2 * 2 + 3
@given(st.lists(finite, min_size=11, max_size=11), finite, st.floats(0, 1))
def test_record_payload_round_trip_is_bit_exact(values, J, res):
    rec = SolutionRecord(np.array(values), res, J, amplitudes=(1.5, -2.0), iterations=7, origin="refine")
    with tempfile.TemporaryDirectory() as d:
        p = os.path.join(d, "r.txt")
        write_record(p, rec, 2, 3)
        back, M, N = read_record(p)
    assert (M, N) == (2, 3)
    assert np.array_equal(back.xi, rec.xi) and back.J == J and back.residual_inf == res
    assert back.amplitudes == rec.amplitudes and back.origin == "refine"


def test_bundle_layout_and_validation(bundle_dir):
    for sub in ("config.ini", "summary.csv", "records", "fields", "traces/step_one.csv"):
        assert os.path.exists(os.path.join(bundle_dir, sub))
    b = load_bundle(bundle_dir)
    assert len(b.records) >= 2
    assert validate(bundle_dir).ok


def test_runs_are_deterministic(bundle_dir, tmp_path):
    d = str(tmp_path / "again")
    run(_small(), d)
    assert _tree_equal(bundle_dir, d)


def test_field_export(bundle_dir, tmp_path):
    b = load_bundle(bundle_dir)
    dp = b.config.discrete_problem()
    p1, p2 = str(tmp_path / "f1.csv"), str(tmp_path / "f2.csv")
    export_field(dp, b.records[0], p1, 5, 8)
    export_field(dp, b.records[0], p2, 5, 8)
    assert filecmp.cmp(p1, p2, shallow=False)
    with open(p1) as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    assert len(rows) == 40
    outer = [float(r["u"]) for r in rows if float(r["r"]) == 1.0]
    assert np.allclose(outer, 0.0, atol=1e-13)
    single = str(tmp_path / "f3.csv")
    export_field(dp, b.records[0], single, 1, 4)
    with open(single) as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    assert {float(r["r"]) for r in rows} == {0.0}
    assert len({r["u"] for r in rows}) == 1


def test_sweep_energy_table(bundle_dir, tmp_path):
    d = str(tmp_path / "swept")
    shutil.copytree(bundle_dir, d)
    paths = sweep_bundle(d, 0.9, 2)
    recs = load_bundle(d).records
    with open(os.path.join(d, "energy.csv")) as fh:
        rows = list(csv.DictReader(fh))
    assert {float(r["b"]) for r in rows} <= {1.0, 0.95, 0.9}
    for r in rows:
        if float(r["b"]) == 1.0:
            assert float(r["J"]) == pytest.approx(recs[int(r["record_id"])].J, rel=1e-12)
        assert math.isfinite(float(r["J_over_Jref"]))
    assert len(paths) == len(recs)
    with pytest.raises(ConfigError):
        sweep_bundle(d, 1.5, 2)


def _perturb(directory):
    path = os.path.join(directory, "records", "rec_000.txt")
    with open(path) as fh:
        lines = fh.read().splitlines()
    k = next(i for i, line in enumerate(lines) if not line.startswith("#"))
    lines[k] = repr(float(lines[k]) + 1e-3)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def test_validate_detects_perturbation(bundle_dir, tmp_path):
    d = str(tmp_path / "bad")
    shutil.copytree(bundle_dir, d)
    _perturb(d)
    assert not validate(d).ok
    assert main(["validate", d]) == 4
    assert main(["validate", bundle_dir]) == 0


def test_cli_run_and_export(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text(SMALL_INI)
    out = str(tmp_path / "b")
    assert main(["run", "--config", str(cfg), "--seed", "0", "--output", out]) == 0
    assert main(["export", out, "--record", "0", "--out", str(tmp_path / "f.csv"), "--nr", "3"]) == 0
    assert main(["export", out, "--record", "99", "--out", str(tmp_path / "g.csv")]) == 2
    assert main(["export", out, "--energy", "--out", str(tmp_path / "e.csv")]) == 2
    assert main(["sweep", out, "--b-end", "0.9", "--steps", "1"]) == 0
    assert main(["export", out, "--energy", "--out", str(tmp_path / "e.csv")]) == 0
    assert (tmp_path / "e.csv").exists()


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[problem]\nname = burgers\n")
    assert main(["run", "--config", str(bad), "--seed", "0", "-o", str(tmp_path / "x")]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.ini"), "--seed", "0"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["run", "--problem", "henon"])  # no seed
    assert exc.value.code == 2
    # below the first eigenvalue only the trivial solution exists
    args = ["run", "--problem", "sine-gordon", "--lambda", "1.0", "--M", "3", "--N", "4", "--seed", "0"]
    assert main(args + ["-o", str(tmp_path / "none")]) == 3


def test_cli_eigs(capsys):
    assert main(["eigs", "--M", "12", "--N", "12", "--count", "1"]) == 0
    value = float(capsys.readouterr().out.split()[1])
    assert value == pytest.approx(5.783185962946784, abs=1e-8)
    assert main(["eigs", "--b", "2.0"]) == 2
