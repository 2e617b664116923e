"""Experiment runner: ``lyapflow run --config exp.json [overrides]``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys as _sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, parse_config
from .errors import ConfigError, LyapflowError, NumericalFailure
from .integrator import n_steps
from .lyapunov import (SpectrumSeries, evolve_spectrum, fundamental_matrix, qr_oracle,
                       sample_trajectory, symplectic_defect)
from .varproj import make_context, nve_generator, projected_ve_generator

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2

TRACE_TOL = 1e-3
PAIRING_TOL = 1e-2
ENERGY_TOL = 1e-4
SYMMETRY_TOL = 1e-10
SYMPLECTIC_TOL = 1e-6
NVE_TOL = 1e-10


@dataclass
class InvariantCheck:
    name: str
    value: float
    threshold: float
    passed: bool


@dataclass
class RunReport:
    mode: str
    system: str
    parameters: dict
    initial_state: list
    final_spectrum: list
    invariants: list = field(default_factory=list)
    wall_seconds: float = 0.0
    outputs: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.invariants)

    def to_dict(self) -> dict:
        return asdict(self)

    def render(self) -> str:
        lines = [f"mode={self.mode} system={self.system} params={self.parameters}",
                 f"x0={self.initial_state}"]
        if self.final_spectrum:
            lines.append("final spectrum: " + ", ".join(f"{v:.6e}" for v in self.final_spectrum))
        for c in self.invariants:
            lines.append(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.value:.3e} (threshold {c.threshold:.1e})")
        for k, v in self.details.items():
            lines.append(f"  {k}: {v}")
        for w in self.warnings:
            lines.append(f"  warning: {w}")
        lines.append(f"outputs: {', '.join(self.outputs) if self.outputs else '-'}")
        lines.append(f"wall time: {self.wall_seconds:.2f} s")
        return "\n".join(lines)


def _check(report: RunReport, name: str, value: float, threshold: float):
    report.invariants.append(InvariantCheck(name, float(value), float(threshold), bool(abs(value) <= threshold)))


def write_spectrum_csv(series: SpectrumSeries, path: Path) -> None:
    """CSV with header ``t,inv_t,lambda_1..lambda_N``; ``inv_t`` is empty at ``t = 0``."""
    n = series.spectra.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "inv_t"] + [f"lambda_{i + 1}" for i in range(n)])
        for t, it, row in zip(series.times, series.inv_t, series.spectra):
            w.writerow([repr(float(t)), "" if math.isnan(it) else repr(float(it))]
                       + [repr(float(v)) for v in row])


def _spectrum_checks(report: RunReport, sys, series: SpectrumSeries, cfg: ExperimentConfig):
    _check(report, "symmetry_defect", series.max_symmetry_defect, SYMMETRY_TOL)
    if sys.last_multiplier is not None:
        late = series.times >= 1.0
        tr = float(np.max(np.abs(series.spectra[late].sum(axis=1)))) if np.any(late) else 0.0
        _check(report, "trace_law", tr, TRACE_TOL)
    if sys.symplectic is not None:
        lam = series.final
        _check(report, "pairing", float(np.max(np.abs(lam + lam[::-1]))), PAIRING_TOL)
    if sys.hamiltonian is not None:
        H0 = sys.hamiltonian.value(series.points[0])
        _check(report, "energy_drift", series.energy_drift / max(1.0, abs(H0)), ENERGY_TOL)
    if sys.symplectic is not None:
        t_f = min(cfg.t_max, 10.0)
        dt_f = min(cfg.dt, 1e-3, t_f)
        fs = fundamental_matrix(sys, series.points[0], t_f, dt_f)
        _check(report, "symplectic_defect", symplectic_defect(sys, fs), SYMPLECTIC_TOL)
        report.details["symplectic_window"] = f"t={t_f:g}, dt={dt_f:g}"


def _run_spectrum(cfg: ExperimentConfig, out: Path, tag: str = "") -> RunReport:
    sys = cfg.build_system()
    report = RunReport(cfg.mode, cfg.system, dict(cfg.params), list(cfg.initial_state), [])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        series = evolve_spectrum(sys, np.array(cfg.initial_state), cfg.t_max, cfg.dt, cfg.sample_stride)
        report.final_spectrum = [float(v) for v in series.final]
        _spectrum_checks(report, sys, series, cfg)
        if cfg.mode == "compare":
            qr = qr_oracle(sys, np.array(cfg.initial_state), cfg.t_max, cfg.dt, cfg.renorm_every)
            report.details["qr_spectrum"] = [float(v) for v in qr]
            report.details["qr_delta"] = [float(a - b) for a, b in zip(series.final, qr)]
    report.warnings = [str(w.message) for w in caught]
    csv_path = out / f"spectrum{tag}.csv"
    write_spectrum_csv(series, csv_path)
    report.outputs.append(str(csv_path))
    return report


def _abc_closed_form(x, A, mu):
    s, c = math.sin(x), math.cos(x)
    return 0.5 * A * np.array([[s, -2 * mu, -s], [2 * c, 0.0, -2 * c], [-s, 2 * mu, s]])


def _gn_closed_form(q1, p1):
    s, c = math.sin(q1), math.cos(q1)
    f = 6 * p1 * (6 * c - 1) * s / (p1 * p1 + 36 * s * s) ** 2
    return np.array([
        [-36 * f * s * s, 0.0, -6 * f * p1 * s, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [-6 * f * p1 * s, 0.0, -f * p1 * p1, 0.0],
        [0.0, -2 - 4 * c, 0.0, 0.0],
    ])


def _sample_points(sys, x0, cfg, count):
    nsteps = n_steps(cfg.t_max, cfg.dt)
    stride = max(1, nsteps // max(count - 1, 1))
    _, pts = sample_trajectory(sys, x0, cfg.t_max, cfg.dt, stride)
    idx = np.linspace(0, len(pts) - 1, min(count, len(pts))).round().astype(int)
    return pts[idx]


def _run_nve_check(cfg: ExperimentConfig, out: Path) -> RunReport:
    sys = cfg.build_system()
    report = RunReport(cfg.mode, cfg.system, dict(cfg.params), list(cfg.initial_state), [])
    x0 = np.array(cfg.initial_state)
    errors = []
    if cfg.system == "abc":
        A, B, C = (sys.parameters[k] for k in "ABC")
        if A != B or A == 0:
            raise ConfigError("nve-check for the ABC flow needs A = B != 0 (particular solution)")
        mu = C / (math.sqrt(2.0) * A)
        start = np.array([x0[0], math.pi / 4, x0[0] + math.pi / 2])
        for p in _sample_points(sys, start, cfg, cfg.nve_points):
            # the closed form holds on the invariant line y = pi/4, z = x + pi/2
            q = np.array([p[0], math.pi / 4, p[0] + math.pi / 2])
            G = projected_ve_generator(sys, make_context(sys, q), "time")
            errors.append(float(np.max(np.abs(G - _abc_closed_form(q[0], A, mu)))))
        report.details["closed_form"] = "projected VE on y=pi/4, z=x+pi/2"
    elif cfg.system == "gross-neveu-imaginary":
        start = np.array([x0[0], 0.0, x0[2], 0.0])
        factor6_gap = 0.0
        for p in _sample_points(sys, start, cfg, cfg.nve_points):
            G = nve_generator(sys, make_context(sys, p), 0, "time")
            ref = _gn_closed_form(p[0], p[2])
            errors.append(float(np.max(np.abs(G - ref))))
            factor6_gap = max(factor6_gap, abs(G[2, 2] - 6 * ref[2, 2]))
        report.details["closed_form"] = "NVE on the invariant plane q2=p2=0 (entry (3,3) = -f p1^2)"
        report.details["entry_33_factor6_gap"] = factor6_gap
    else:
        raise ConfigError(f"nve-check has no closed form for system {cfg.system!r} (use abc or gross-neveu-imaginary)")
    report.details["points"] = len(errors)
    _check(report, "nve_closed_form", max(errors), NVE_TOL)
    return report


def _sweep_one(args):
    cfg, i, out = args
    return _run_spectrum(replace(cfg, mode="spectrum"), Path(out), tag=f"_{i:03d}")


def _run_sweep(cfg: ExperimentConfig, out: Path) -> RunReport:
    jobs = [(cfg.with_param(cfg.sweep.param, v), i, str(out)) for i, v in enumerate(cfg.sweep.values)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            reports = list(pool.map(_sweep_one, jobs))
    else:
        reports = [_sweep_one(j) for j in jobs]
    index = []
    for (sub, i, _), rep in zip(jobs, reports):
        rpath = out / f"report_{i:03d}.json"
        rpath.write_text(json.dumps(rep.to_dict(), indent=2))
        index.append({"param": cfg.sweep.param, "value": cfg.sweep.values[i], "initial_state": rep.initial_state,
                      "csv": rep.outputs[0], "report": str(rpath), "final_spectrum": rep.final_spectrum,
                      "passed": rep.passed})
    ipath = out / "index.json"
    ipath.write_text(json.dumps(index, indent=2))
    report = RunReport("sweep", cfg.system, dict(cfg.params), list(cfg.initial_state), [])
    for rep, (_, i, _) in zip(reports, jobs):
        for c in rep.invariants:
            report.invariants.append(InvariantCheck(f"{c.name}[{i}]", c.value, c.threshold, c.passed))
    report.outputs = [r.outputs[0] for r in reports] + [str(ipath)]
    report.details["sweep"] = {"param": cfg.sweep.param, "values": list(cfg.sweep.values)}
    return report


def run(cfg: ExperimentConfig) -> RunReport:
    """Execute one experiment; writes CSV files and ``report.json`` under ``cfg.output_path``."""
    out = Path(cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    if cfg.mode in ("spectrum", "compare"):
        report = _run_spectrum(cfg, out)
    elif cfg.mode == "nve-check":
        report = _run_nve_check(cfg, out)
    else:
        report = _run_sweep(cfg, out)
    report.wall_seconds = time.perf_counter() - t0
    rpath = out / "report.json"
    report.outputs.append(str(rpath))
    rpath.write_text(json.dumps(report.to_dict(), indent=2))
    return report


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"command line: {message}")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lyapflow", description="Lyapunov spectra via the Lyapunov-operator equation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="run an experiment")
    r.add_argument("--config", help="JSON experiment file")
    r.add_argument("--system", help="system id (abc, gross-neveu-imaginary, gross-neveu-real, frw)")
    r.add_argument("--param", action="append", default=[], metavar="K=V", help="system parameter override")
    r.add_argument("--tmax", type=float, help="integration time")
    r.add_argument("--dt", type=float, help="RK4 step")
    r.add_argument("--out", help="output directory")
    r.add_argument("--mode", help="spectrum | compare | nve-check | sweep")
    return parser


def _merge(args) -> str:
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    for key, value in (("system", args.system), ("t_max", args.tmax), ("dt", args.dt),
                       ("output", args.out), ("mode", args.mode)):
        if value is not None:
            doc[key] = value
    if args.param:
        params = dict(doc.get("params", {}))
        for item in args.param:
            k, sep, v = item.partition("=")
            try:
                params[k.strip()] = float(v)
            except ValueError:
                raise ConfigError(f"--param {item!r}: expected name=number") from None
            if not sep:
                raise ConfigError(f"--param {item!r}: expected name=number")
        doc["params"] = params
    return json.dumps(doc)


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        cfg = parse_config(_merge(args))
        report = run(cfg)
    except ConfigError as exc:
        print("configuration error:", file=_sys.stderr)
        for e in exc.errors:
            print(f"  - {e}", file=_sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=_sys.stderr)
        return EXIT_NUMERICAL
    except LyapflowError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    print(report.render())
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
