import math

import numpy as np
import pytest

from delaydyne.cli import (SWEEP_COLUMNS, fmt, main, read_csv, render_sweep_figures, theory_rows,
                           traj_rows)
from delaydyne.config import ConfigError, ExperimentConfig, parse_config

SMALL = """\
# tiny sweep
master_seed = 7
n_steps = 512
delays = 1, 2, 4, 8
alphas = 5
schemes = simplified, arg_a
n_traj = 64
"""


def test_fmt():
    assert fmt(0.1) == "0.1"
    assert fmt(1 / 3) == "0.333333333333"
    assert fmt(2.5e-5) == "0.000025"
    assert fmt(123456789.123) == "123456789.123"
    assert fmt(7) == "7" and fmt(True) == "1" and fmt(math.nan) == "nan"


def test_parse_config():
    cfg = parse_config(SMALL)
    assert cfg.delays == (1, 2, 4, 8) and cfg.alphas == (5.0,)
    assert [s.tag for s in cfg.feedback_schemes()] == ["simplified", "arg_a"]
    assert parse_config(SMALL, master_seed=9).master_seed == 9


@pytest.mark.parametrize("line", ["delays =", "delays = 3", "delays = 1, 256", "delays = 4, 2",
                                  "alphas =", "schemes = bogus", "estimators = arg_b",
                                  "n_steps = 1000", "unknown = 1", "n_traj = x", "no equals"])
def test_config_errors(line):
    with pytest.raises(ConfigError):
        parse_config(SMALL + line + "\n")


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("delays =\n")
    assert main(["sweep", "--config", str(bad)]) == 2
    assert main(["sweep", "--config", str(tmp_path / "missing.cfg")]) == 2
    cfg = tmp_path / "c.cfg"
    cfg.write_text(SMALL)
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["sweep", "--config", str(cfg), "--out", str(blocker / "sub")]) == 3
    assert not (blocker.parent / "sub").exists()


def test_sweep_csv_and_figures(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(SMALL)
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    text = (out / "sweep.csv").read_text()
    rows = read_csv(text)
    assert tuple(rows[0]) == SWEEP_COLUMNS
    assert len(rows) == 2 * 4 * 3
    for r in rows:
        assert float(r["tau"]) == int(r["delay_steps"]) / 512
        assert float(r["mean_abs_b"]) <= 1 - float(r["tau"]) + 2 / 512
        assert float(r["tau_half_ref"]) == float(r["tau"]) / 2
    # every figure is reproducible from the CSV alone
    for name, svg in render_sweep_figures(text).items():
        assert (out / name).read_text() == svg
        assert svg.startswith("<?xml") and "<svg" in svg
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "sweep.csv").read_text() == text


def test_theory_rows():
    cfg = ExperimentConfig(n_bars=(100.0, 10000.0), taus=(1e-4, 1e-2, 1.0))
    rows = theory_rows(cfg)
    last = [r for r in rows if r["n_bar"] == 100 and r["tau"] == 1.0][0]
    assert last["delay_limit"] == last["heterodyne_var"] == 2.5e-3
    lim = [r["delay_limit"] for r in rows if r["n_bar"] == 100]
    assert lim == sorted(lim)
    q = [r["perturbation_quadrature"] for r in rows if r["n_bar"] == 10000][0]
    assert q == pytest.approx(0.0025, rel=0.02)


def _traj_cfg(**kw):
    base = dict(n_steps=256, delays=(8,), alphas=(10.0,), schemes=("var_eps",), n_traj=10)
    base.update(kw)
    return ExperimentConfig(**base)


def test_traj_dump():
    rows = traj_rows(_traj_cfg(), 3)
    assert len(rows) == 256
    for k in range(8):
        assert math.cos(rows[k]["lo_phase"]) == pytest.approx(math.cos(k * math.pi / 2), abs=1e-12)
    for r in rows:
        A, B = complex(r["A_re"], r["A_im"]), complex(r["B_re"], r["B_im"])
        C = complex(r["C_re"], r["C_im"])
        assert C == pytest.approx(A * r["v"] + B * A.conjugate(), abs=1e-15)
    with pytest.raises(ConfigError):
        traj_rows(_traj_cfg(), 10)
    with pytest.raises(ConfigError):
        traj_rows(_traj_cfg(delays=(1, 2)), 0)


def test_traj_vacuum_quadratic_variation():
    rows = traj_rows(_traj_cfg(n_steps=2 ** 14, alphas=(0.0,), schemes=("simplified",)), 0)
    qv = np.cumsum([r["i_dv"] ** 2 for r in rows])
    v = np.array([r["v"] for r in rows])
    assert abs(qv[-1] - 1.0) < 4 * math.sqrt(2 / 2 ** 14)
    assert np.max(np.abs(qv - v)) < 0.05


def test_traj_cli(tmp_path):
    cfg = tmp_path / "t.cfg"
    cfg.write_text("n_steps = 64\ndelays = 2\nalphas = 3\nschemes = arg_a\nn_traj = 5\n")
    assert main(["traj", "--config", str(cfg), "--out", str(tmp_path), "--index", "4"]) == 0
    assert len(read_csv((tmp_path / "traj.csv").read_text())) == 64
    assert main(["traj", "--config", str(cfg), "--out", str(tmp_path), "--index", "5"]) == 2
