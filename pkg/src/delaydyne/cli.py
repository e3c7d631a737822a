"""Command line experiment runner: delay sweeps, mark I slope checks, theory
tables and single-trajectory dumps."""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from collections import defaultdict
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import theory
from .config import ConfigError, ExperimentConfig, load_config
from .feedback import FeedbackScheme, SchemeKind
from .linearized import slope_vs_tau
from .simcore import NoiseStream, SignalModel, TimeGrid
from .stats import (EnsembleConfig, InsufficientRange, delay_sweep, excess_variance,
                    markone_slope, sweep_seed)
from .svgplot import Plot
from .trajectory import simulate_trajectory

SWEEP_COLUMNS = (
    "scheme", "alpha", "n_bar", "delay_steps", "tau", "estimator", "holevo_var", "moment_var",
    "std_error", "baseline_var", "excess_var", "mean_abs_b", "mean_inv_np", "invalid_count",
    "theory_limit", "theory_corrected_limit", "heterodyne_ref", "tau_half_ref", "introduced_var",
)
THEORY_COLUMNS = (
    "n_bar", "alpha", "tau", "delay_limit", "delay_limit_asymptotic", "heterodyne_var",
    "markII_intro_var", "theory_limit_no_delay", "markI_delay_var", "perturbation_quadrature",
)
TRAJ_COLUMNS = ("step", "v", "lo_phase", "i_dv", "A_re", "A_im", "B_re", "B_im", "C_re", "C_im",
                "eps")
MARKONE_COLUMNS = ("model", "alpha", "n_points", "slope", "slope_se", "passed")

EXIT_OK, EXIT_CONFIG, EXIT_FAILURE = 0, 2, 3


class RunFailure(RuntimeError):
    """Runtime or statistical failure reported with exit code 3."""


def fmt(x) -> str:
    """Decimal text with 12 significant digits (integers and strings pass through)."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return np.format_float_positional(x, precision=12, unique=False, fractional=False, trim="-")


def to_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row[c]) for c in columns])
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def write_outputs(out_dir: Path, files: dict) -> list[Path]:
    """Write every file under ``out_dir`` via temp-file-and-rename."""
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        staged = []
        for name, text in files.items():
            tmp = out_dir / f".{name}.tmp"
            with open(tmp, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            staged.append((tmp, out_dir / name))
        for tmp, final in staged:
            os.replace(tmp, final)
    except OSError as exc:
        raise RunFailure(f"cannot write results to {out_dir}: {exc}") from None
    return [final for _, final in staged]


def _safe(fn, *args):
    try:
        return fn(*args)
    except (ValueError, ArithmeticError):
        return math.nan


# ---- sweep -------------------------------------------------------------------

def sweep_rows(cfg: ExperimentConfig, threads: int = 1) -> list[dict]:
    rows = []
    delays = list(cfg.delays)
    for scheme in cfg.feedback_schemes():
        for alpha in cfg.alphas:
            base = EnsembleConfig(cfg.n_traj, cfg.master_seed, scheme, float(alpha), cfg.n_steps,
                                  delays[0])
            table = delay_sweep(base, delays, threads)
            n_bar = alpha * alpha
            for est in cfg.estimators:
                if scheme.kind is SchemeKind.HETERODYNE and est == "feedback":
                    continue
                baseline, excess = excess_variance(table.variances(est), cfg.k_baseline)
                for d, s, ex in zip(delays, table.summaries, excess):
                    st = s.estimators[est]
                    tau = d / cfg.n_steps
                    rows.append({
                        "scheme": scheme.tag, "alpha": float(alpha), "n_bar": n_bar,
                        "delay_steps": d, "tau": tau, "estimator": est,
                        "holevo_var": st.holevo_variance, "moment_var": st.moment_variance,
                        "std_error": st.std_error, "baseline_var": baseline, "excess_var": ex,
                        "mean_abs_b": s.mean_abs_b, "mean_inv_np": s.mean_inv_np,
                        "invalid_count": s.invalid_count,
                        "theory_limit": _safe(theory.delay_limit, tau, n_bar),
                        "theory_corrected_limit": _safe(theory.corrected_limit, s.mean_inv_np, tau),
                        "heterodyne_ref": _safe(theory.heterodyne_var, n_bar),
                        "tau_half_ref": 0.5 * tau,
                        "introduced_var": st.holevo_variance - _safe(theory.heterodyne_var, n_bar),
                    })
    return rows


def _group(rows, *keys):
    out = defaultdict(list)
    for r in rows:
        out[tuple(r[k] for k in keys)].append(r)
    return out


def _col(rows, name):
    return [float(r[name]) for r in rows]


def render_sweep_figures(csv_text: str) -> dict:
    """SVG figures built only from the sweep CSV text."""
    rows = read_csv(csv_text)
    figs = {}

    fb = [r for r in rows if r["estimator"] == "feedback"]
    if fb:
        p = Plot("Excess variance of the final feedback phase", "tau", "excess variance")
        for (scheme, alpha), grp in sorted(_group(fb, "scheme", "alpha").items()):
            p.add(f"{scheme} a={alpha}", _col(grp, "tau"), _col(grp, "excess_var"))
        first = next(iter(_group(fb, "scheme", "alpha").values()))
        p.add("tau/2", _col(first, "tau"), _col(first, "tau_half_ref"), markers=False, dash="6,4",
              color="black")
        figs["fig_excess_feedback.svg"] = p.render()

    for (scheme, alpha), grp in sorted(_group(rows, "scheme", "alpha").items()):
        p = Plot(f"Estimator variances, {scheme}, alpha={alpha}", "tau", "Holevo variance")
        for (est,), sub in sorted(_group(grp, "estimator").items()):
            p.add(est, _col(sub, "tau"), _col(sub, "holevo_var"))
        p.add("1/(4 n)", _col(sub, "tau"), _col(sub, "heterodyne_ref"), markers=False, dash="2,3",
              color="black")
        figs[f"fig_estimators_{_slug(scheme)}_a{_slug(alpha)}.svg"] = p.render()

    argc = [r for r in rows if r["estimator"] == "arg_c"]
    for (alpha,), grp in sorted(_group(argc, "alpha").items()):
        p = Plot(f"Introduced variance of arg C, alpha={alpha}", "tau", "introduced variance")
        for (scheme,), sub in sorted(_group(grp, "scheme").items()):
            p.add(scheme, _col(sub, "tau"), _col(sub, "introduced_var"))
        p.add("delay limit", _col(sub, "tau"), _col(sub, "theory_limit"), markers=False,
              dash="6,4", color="black")
        p.add("heterodyne", _col(sub, "tau"), _col(sub, "heterodyne_ref"), markers=False,
              dash="2,3", color="#666666")
        for (scheme,), s2 in sorted(_group(grp, "scheme").items()):
            p.add(f"corrected limit {scheme}", _col(s2, "tau"),
                  _col(s2, "theory_corrected_limit"), markers=False, dash="1,3")
        figs[f"fig_introduced_argc_a{_slug(alpha)}.svg"] = p.render()
    return figs


def _slug(x) -> str:
    return "".join(c if c.isalnum() else "_" for c in str(x))


def cmd_sweep(cfg: ExperimentConfig, out_dir: Path, threads: int = 1) -> list[Path]:
    text = to_csv(SWEEP_COLUMNS, sweep_rows(cfg, threads))
    files = {"sweep.csv": text}
    files.update(render_sweep_figures(text))
    return write_outputs(out_dir, files)


# ---- markone-check -----------------------------------------------------------

def markone_rows(cfg: ExperimentConfig, threads: int = 1) -> list[dict]:
    rows = []
    lin = slope_vs_tau(cfg.lin_alpha, cfg.lin_taus, cfg.lin_n_traj, master_seed=cfg.master_seed,
                       n_steps=cfg.lin_n_steps, v1=cfg.lin_v1,
                       max_alpha_tau=cfg.max_alpha_tau, threads=threads)
    f = lin.fit
    rows.append({"model": "linearized", "alpha": cfg.lin_alpha, "n_points": f.n_points,
                 "slope": f.slope, "slope_se": f.slope_se,
                 "passed": abs(f.slope - 0.5) <= 3.0 * f.slope_se})

    scheme = FeedbackScheme.parse("simplified", cfg.denominator)
    slopes, ses = [], []
    for alpha in cfg.alphas:
        # keep enough leading delays for the baseline even if they exceed the cutoff
        delays = [d for i, d in enumerate(cfg.delays)
                  if alpha * d / cfg.n_steps <= cfg.max_alpha_tau or i < cfg.k_baseline]
        base = EnsembleConfig(cfg.n_traj, cfg.master_seed, scheme, float(alpha), cfg.n_steps,
                              delays[0])
        table = delay_sweep(base, delays, threads)
        fit = markone_slope(table, alpha, "feedback", cfg.k_baseline, cfg.max_alpha_tau)
        slopes.append(fit.slope)
        ses.append(fit.slope_se)
        rows.append({"model": "full", "alpha": float(alpha), "n_points": fit.n_points,
                     "slope": fit.slope, "slope_se": fit.slope_se,
                     "passed": cfg.slope_min <= fit.slope <= cfg.slope_max})
    mean = float(np.mean(slopes))
    rows.append({"model": "full_mean", "alpha": math.nan, "n_points": len(slopes), "slope": mean,
                 "slope_se": math.sqrt(sum(s * s for s in ses)) / len(ses),
                 "passed": cfg.slope_min <= mean <= cfg.slope_max})
    return rows


def cmd_markone_check(cfg: ExperimentConfig, out_dir: Path, threads: int = 1):
    rows = markone_rows(cfg, threads)
    paths = write_outputs(out_dir, {"markone.csv": to_csv(MARKONE_COLUMNS, rows)})
    for r in rows:
        print(f"{r['model']:>10} alpha={fmt(r['alpha']):>5} n={r['n_points']:>2} "
              f"slope={r['slope']:.4f} +- {r['slope_se']:.4f} "
              f"{'PASS' if r['passed'] else 'FAIL'}")
    verdict = rows[0]["passed"] and rows[-1]["passed"]
    return paths, verdict


# ---- theory ------------------------------------------------------------------

def theory_rows(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    for n_bar in cfg.n_bars:
        alpha = math.sqrt(n_bar)
        quad = _safe(theory.perturbation_quadrature, alpha)
        for tau in cfg.taus:
            rows.append({
                "n_bar": n_bar, "alpha": alpha, "tau": tau,
                "delay_limit": _safe(theory.delay_limit, tau, n_bar),
                "delay_limit_asymptotic": theory.delay_limit_asymptotic(tau, n_bar),
                "heterodyne_var": theory.heterodyne_var(n_bar),
                "markII_intro_var": theory.markII_intro_var(n_bar),
                "theory_limit_no_delay": theory.theory_limit_no_delay(n_bar),
                "markI_delay_var": _safe(theory.markI_delay_var, alpha, tau),
                "perturbation_quadrature": quad,
            })
    return rows


def cmd_theory(cfg: ExperimentConfig, out_dir: Path) -> list[Path]:
    return write_outputs(out_dir, {"theory.csv": to_csv(THEORY_COLUMNS, theory_rows(cfg))})


# ---- traj --------------------------------------------------------------------

def traj_rows(cfg: ExperimentConfig, index: int) -> list[dict]:
    if len(cfg.schemes) != 1 or len(cfg.alphas) != 1 or len(cfg.delays) != 1:
        raise ConfigError("traj needs exactly one scheme, alpha and delay")
    if not 0 <= index < cfg.n_traj:
        raise ConfigError(f"trajectory index {index} outside [0, {cfg.n_traj})")
    d = cfg.delays[0]
    # same noise as trajectory `index` of the corresponding sweep ensemble
    stream = NoiseStream(sweep_seed(cfg.master_seed, d), index)
    _, steps = simulate_trajectory(cfg.feedback_schemes()[0], SignalModel(cfg.alphas[0]),
                                   TimeGrid(cfg.n_steps), d, stream, keep_rows=True)
    return [{"step": r.step, "v": r.v, "lo_phase": r.lo_phase, "i_dv": r.i_dv,
             "A_re": r.A.real, "A_im": r.A.imag, "B_re": r.B.real, "B_im": r.B.imag,
             "C_re": r.C.real, "C_im": r.C.imag, "eps": r.eps} for r in steps]


def cmd_traj(cfg: ExperimentConfig, out_dir: Path, index: int) -> list[Path]:
    return write_outputs(out_dir, {"traj.csv": to_csv(TRAJ_COLUMNS, traj_rows(cfg, index))})


# ---- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="delaydyne",
                                     description="Adaptive phase measurement with feedback delay")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("sweep", "delay sweep CSV and SVG figures"),
                            ("markone-check", "mark I slope check, full and linearized"),
                            ("theory", "tabulate closed-form curves"),
                            ("traj", "dump one trajectory step by step")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, default=None, help="key = value config file")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads (speed only)")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        if name == "traj":
            p.add_argument("--index", type=int, default=None, help="trajectory index")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, master_seed=args.seed)
        if args.out is not None:
            cfg = replace(cfg, output_dir=str(args.out))
        out_dir = Path(cfg.output_dir)
        if args.command == "sweep":
            paths = cmd_sweep(cfg, out_dir, args.threads)
        elif args.command == "theory":
            paths = cmd_theory(cfg, out_dir)
        elif args.command == "traj":
            index = cfg.trajectory_index if args.index is None else args.index
            paths = cmd_traj(cfg, out_dir, index)
        else:
            paths, ok = cmd_markone_check(cfg, out_dir, args.threads)
            if not ok:
                for p in paths:
                    print(f"wrote {p}")
                print("markone-check: FAIL", file=sys.stderr)
                return EXIT_FAILURE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InsufficientRange as exc:
        print(f"insufficient range: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (RunFailure, RuntimeError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
