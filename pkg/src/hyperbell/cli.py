"""Command-line interface.

Wave-plate angles are given in degrees, phases in radians (``pi`` and forms
like ``2pi/3`` are accepted). Every report starts with a header block (tool
and library versions, seed, full configuration) and contains no timestamps,
so equal inputs give byte-identical outputs.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy

from . import __version__
from .apparatus import PORT_OF_DETECTOR, AnalyzerSettings, detector_basis
from .estimation import functional_estimator, monte_carlo, simulate_counts, steering_estimator
from .nonlocality import (
    MeasurementPlan,
    RegistryError,
    builtin_chsh,
    chsh_polarization_plan,
    chsh_time_bin_plan,
    chsh_value,
    correlator_table,
    evaluate_plan,
    i18_optimal_plan,
    plan_outcome_tables,
    resolve_functional,
    reference_plan,
)
from .optimizer import OptimizerConfig, SettingsTable, local_bound_bruteforce, optimize_settings, seesaw_optimize
from .quantum_core import BASIS_LABELS, NoiseSpec, StateSpec, apply_noise, density, ket_to_str, make_state
from .scans import STEERING_COLUMNS, VISIBILITY_COLUMNS, crossing, parse_grid, scan_steering, scan_visibility
from .steering import (
    STEERING_BOUND,
    correlators_from_tables,
    extract_phase,
    lhs_witness_check,
    phase_probabilities,
    port_a_steering,
    steering_from_probabilities,
    steering_tables,
)

REGISTRY_ENV = "HYPERBELL_REGISTRY"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(Exception):
    """Invalid flags or inputs; maps to exit code 2."""


# --- parsing helpers -----------------------------------------------------------

_PHASE_RE = re.compile(r"^\s*([-+]?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?\s*$")


def parse_phase(text: str) -> float:
    """A float, or a multiple of pi such as ``pi``, ``-pi/2``, ``2pi/3``, ``0.5*pi``."""
    try:
        return float(text)
    except ValueError:
        pass
    m = _PHASE_RE.match(text)
    if not m:
        raise argparse.ArgumentTypeError(f"cannot parse phase {text!r}")
    k = m.group(1)
    coeff = 1.0 if k in ("", "+") else -1.0 if k == "-" else float(k)
    den = float(m.group(2)) if m.group(2) else 1.0
    return coeff * math.pi / den


def parse_angles(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"angles must be comma-separated numbers, got {text!r}") from None
    if not 1 <= len(values) <= 6:
        raise argparse.ArgumentTypeError("between 1 and 6 angles (hwp1,qwp1,hwp2,qwp2,hwp3,qwp3)")
    return values


def _grid(text: str) -> np.ndarray:
    try:
        return parse_grid(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


# --- reports -----------------------------------------------------------------


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    return x


def _cell(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


@dataclass
class Report:
    command: str
    config: dict[str, Any]
    seed: int | None = None
    summary: dict[str, Any] = field(default_factory=dict)
    rows: list[dict[str, Any]] = field(default_factory=list)
    columns: Sequence[str] = ()

    def header(self) -> dict[str, Any]:
        return {
            "tool": "hyperbell",
            "version": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "command": self.command,
            "seed": self.seed,
            "config": _jsonable(self.config),
        }

    def _header_lines(self) -> list[str]:
        h = self.header()
        lines = [f"# {k}: {h[k]}" for k in ("tool", "version", "numpy", "scipy", "command", "seed")]
        lines.append("# config: " + json.dumps(h["config"], sort_keys=True))
        return lines

    def render(self, fmt: str) -> str:
        if fmt == "json":
            doc = {"header": self.header(), "summary": _jsonable(self.summary), "rows": _jsonable(self.rows)}
            return json.dumps(doc, indent=2, sort_keys=True) + "\n"
        out = self._header_lines()
        if fmt == "text":
            out += [f"{k} = {_cell(v)}" for k, v in self.summary.items() if not isinstance(v, (dict, list))]
            if self.rows:
                out.append(",".join(self.columns))
                out += [",".join(_cell(r[c]) for c in self.columns) for r in self.rows]
            return "\n".join(out) + "\n"
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if self.rows:
            out.append("# summary: " + json.dumps(_jsonable(self.summary), sort_keys=True))
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([_cell(r[c]) for c in self.columns])
        else:
            w.writerow(["key", "value"])
            for k, v in self.summary.items():
                if not isinstance(v, (dict, list)):
                    w.writerow([k, _cell(v)])
        return "\n".join(out) + "\n" + buf.getvalue()


def read_report(text: str) -> dict[str, Any]:
    """Parse a rendered report back into header, summary and rows (floats restored)."""
    if text.lstrip().startswith("{"):
        return json.loads(text)
    header: dict[str, Any] = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            header[key] = json.loads(value) if key in ("config", "summary") else value
        else:
            body.append(line)
    summary: dict[str, Any] = header.pop("summary", {})
    rows: list[dict[str, Any]] = []
    if body and " = " in body[0]:
        while body and " = " in body[0]:
            k, _, v = body.pop(0).partition(" = ")
            summary[k] = _parse_cell(v)
    if body:
        reader = csv.DictReader(io.StringIO("\n".join(body)))
        parsed = [{k: _parse_cell(v) for k, v in r.items()} for r in reader]
        if reader.fieldnames == ["key", "value"]:
            summary.update({r["key"]: r["value"] for r in parsed})
        else:
            rows = parsed
    return {"header": header, "summary": summary, "rows": rows}


def _parse_cell(v: str) -> Any:
    if v == "":
        return None
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    return v


# --- shared option groups -----------------------------------------------------


def _add_output(p: argparse.ArgumentParser, default: str = "text") -> None:
    p.add_argument("--format", choices=("text", "csv", "json"), default=default)
    p.add_argument("--out", help="write the report here instead of stdout")


def _add_seed(p: argparse.ArgumentParser, default: int = 0) -> None:
    p.add_argument("--seed", type=int, default=default)


def _add_inequality(p: argparse.ArgumentParser, default: str = "i18") -> None:
    p.add_argument("--inequality", default=default, help="builtin name or registry file")
    p.add_argument("--registry", help=f"directory of functional JSON files (default ${REGISTRY_ENV})")


def _add_settings_source(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--settings", choices=("optimal", "reference"), help="builtin settings table (default optimal)")
    g.add_argument("--settings-file", help="JSON plan or settings table written by 'i4422 optimize'")


def _add_hyper_state(p: argparse.ArgumentParser) -> None:
    p.add_argument("--state", choices=("psi4", "hyper"), default="psi4")
    p.add_argument("--lambda-pol", type=float, default=1.0)
    p.add_argument("--vis", type=float, default=1.0, help="temporal visibility (lambda_time)")
    p.add_argument("--phi-p", type=parse_phase, default=0.0)
    p.add_argument("--phi-t", type=parse_phase, default=0.0)


def _functional(args: argparse.Namespace):
    registry = args.registry or os.environ.get(REGISTRY_ENV)
    try:
        return resolve_functional(args.inequality, registry)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    except RegistryError as exc:
        raise ConfigError(f"registry: {exc}") from None


def _load_plan_file(path: str) -> MeasurementPlan:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read settings file {path}: {exc}") from None
    try:
        if "summary" in data:
            data = data["summary"]["settings_table"]
        if "plan" in data:
            return SettingsTable.from_dict(data).plan
        return MeasurementPlan.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"settings file {path} is not a plan: {exc}") from None


def _plan(args: argparse.Namespace) -> MeasurementPlan:
    if args.settings_file:
        return _load_plan_file(args.settings_file)
    return reference_plan() if args.settings == "reference" else i18_optimal_plan()


def _unit(name: str, value: float) -> float:
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"{name} must lie in [0, 1], got {value}")
    return value


def _hyper_state(args: argparse.Namespace) -> np.ndarray:
    spec = StateSpec(args.state, phi_p=args.phi_p, phi_t=args.phi_t)
    noise = NoiseSpec(lambda_pol=_unit("--lambda-pol", args.lambda_pol), lambda_time=_unit("--vis", args.vis))
    return apply_noise(spec, noise, "product_dephase")


def _config(args: argparse.Namespace) -> dict[str, Any]:
    skip = {"func", "out", "format"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# --- commands ------------------------------------------------------------------


def cmd_basis(args: argparse.Namespace) -> Report:
    s = AnalyzerSettings.from_degrees(*args.settings, phi_a=args.phi_a, phi_b=args.phi_b)
    if args.input_polarizer is not None:
        s = s.with_angles(input_polarizer=float(np.deg2rad(args.input_polarizer)))
    basis = detector_basis(s)
    kets = basis.effective_kets()
    rows = []
    for i, name in enumerate(("D1", "D2", "D3", "D4")):
        k = kets[i]
        rows.append(
            {
                "detector": name,
                "port": PORT_OF_DETECTOR[i],
                "ket": ket_to_str(k),
                **{f"re_{lab}": float(k[j].real) for j, lab in enumerate(BASIS_LABELS)},
                **{f"im_{lab}": float(k[j].imag) for j, lab in enumerate(BASIS_LABELS)},
            }
        )
    summary: dict[str, Any] = {r["detector"]: r["ket"] for r in rows}
    summary["orthonormal"] = basis.is_orthonormal() if basis.filter is None else False
    cols = ["detector", "port", "ket"] + [f"re_{lab}" for lab in BASIS_LABELS] + [f"im_{lab}" for lab in BASIS_LABELS]
    return Report("basis", _config(args), summary=summary, rows=rows if args.format != "text" else [], columns=cols)


def cmd_chsh(args: argparse.Namespace) -> Report:
    family = args.state or ("pol_only" if args.dof == "pol" else "time_only")
    rho = density(make_state(StateSpec(family, phi_p=args.phi_p, phi_t=args.phi_t)))
    f = builtin_chsh()
    if args.optimize:
        mode = "portA_vs_portB" if args.dof == "pol" else "pair_D1_D4"
        template = chsh_polarization_plan() if args.dof == "pol" else chsh_time_bin_plan()
        table = optimize_settings(rho, f, OptimizerConfig(starts=args.starts, seed=args.seed), mode=mode, template=template)
        plan = table.plan
    else:
        plan = chsh_polarization_plan() if args.dof == "pol" else chsh_time_bin_plan()
    e = correlator_table(rho, plan)
    rows = [{"alice": x, "bob": y, "E": float(e[x, y])} for x in range(2) for y in range(2)]
    summary = {
        "state": family,
        "dof": args.dof,
        "S": chsh_value(e),
        "S_functional": evaluate_plan(rho, f, plan),
        "local_bound": local_bound_bruteforce(f),
        "tsirelson": 2 * math.sqrt(2),
    }
    return Report("chsh", _config(args), seed=args.seed if args.optimize else None, summary=summary, rows=rows, columns=("alice", "bob", "E"))


def _plan_rows(plan: MeasurementPlan) -> list[dict[str, Any]]:
    rows = []
    for party, settings in (("alice", plan.settings_a), ("bob", plan.settings_b)):
        for k, s in enumerate(settings):
            d = s.to_degrees()
            rows.append({"party": party, "basis": k + 1, **{n: d[n] for n in ("hwp1", "qwp1", "hwp2", "qwp2", "hwp3", "qwp3")}})
    return rows


_PLAN_COLUMNS = ("party", "basis", "hwp1", "qwp1", "hwp2", "qwp2", "hwp3", "qwp3")


def cmd_i4422_evaluate(args: argparse.Namespace) -> Report:
    f = _functional(args)
    plan = _plan(args)
    try:
        plan.check_matches(f)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rho = _hyper_state(args)
    summary = {"inequality": f.name, "value": evaluate_plan(rho, f, plan), **{f"bound_{k}": v for k, v in f.bounds.as_dict().items()}}
    return Report("i4422 evaluate", _config(args), summary=summary, rows=_plan_rows(plan), columns=_PLAN_COLUMNS)


def cmd_i4422_optimize(args: argparse.Namespace) -> Report:
    f = _functional(args)
    rho = _hyper_state(args)
    cfg = OptimizerConfig(starts=args.starts, seed=args.seed, max_fev=args.max_fev)
    table = optimize_settings(rho, f, cfg, fix_qwp=args.fix_qwp)
    summary = {"inequality": f.name, "value": table.value, "starts": args.starts, "settings_table": table.to_dict()}
    return Report("i4422 optimize", _config(args), seed=args.seed, summary=summary, rows=_plan_rows(table.plan), columns=_PLAN_COLUMNS)


def cmd_bound(args: argparse.Namespace) -> Report:
    f = _functional(args)
    if args.kind == "local":
        try:
            value = local_bound_bruteforce(f)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return Report("bound local", _config(args), summary={"inequality": f.name, "local_bound": value})
    if args.dim not in (2, 3, 4):
        raise ConfigError("--dim must be 2, 3 or 4")
    res = seesaw_optimize(f, args.dim, OptimizerConfig(starts=args.starts, seed=args.seed, max_iters=args.max_iters))
    rows = [{"iteration": k, "value": v} for k, v in enumerate(res.history)]
    summary = {"inequality": f.name, "dim": args.dim, "seesaw_value": res.value, "iterations": len(res.history) - 1}
    return Report("bound seesaw", _config(args), seed=args.seed, summary=summary, rows=rows, columns=("iteration", "value"))


def cmd_steer(args: argparse.Namespace) -> Report:
    lam = _unit("--lambda", args.lam)
    spec = StateSpec("phi4_phased", phi_e1=args.phi_e1, phi_e2=args.phi_e2, phi_r=args.phi_r)
    rho = apply_noise(spec, NoiseSpec(lam=lam), "rho4")
    tables = steering_tables(rho)
    e = correlators_from_tables(tables)
    p1, p2 = phase_probabilities(tables)
    s = steering_from_probabilities(tables)
    summary: dict[str, Any] = {
        "lambda": lam,
        "S": s,
        "S_port_a": port_a_steering(tables),
        "E_X": float(e[0]),
        "E_Z": float(e[1]),
        "p1": p1,
        "p2": p2,
        "threshold": STEERING_BOUND,
        "steerable": bool(s > STEERING_BOUND),
    }
    try:
        summary["phi_e2_extracted"] = extract_phase(p1, p2)
    except ValueError:
        summary["phi_e2_extracted"] = None
    if args.lhs_trials:
        rep = lhs_witness_check(trials=args.lhs_trials, seed=args.seed)
        summary.update(lhs_trials=rep.trials, lhs_max=rep.max_value, lhs_violations=rep.violations)
    return Report("steer", _config(args), seed=args.seed if args.lhs_trials else None, summary=summary)


_SCAN_ONLY = {
    "visibility": ("lam", "phi_e2", "estimator"),
    "steering": ("vis", "lambda_pol", "inequality", "registry", "settings", "settings_file"),
}


def cmd_scan(args: argparse.Namespace) -> Report:
    config = {k: v for k, v in _config(args).items() if k not in _SCAN_ONLY[args.kind]}
    if args.kind == "visibility":
        f = _functional(args)
        plan = _plan(args)
        rows = scan_visibility(args.vis, _unit("--lambda-pol", args.lambda_pol), f, plan, workers=args.workers)
        v = [r["visibility"] for r in rows]
        b = [r["bell_value"] for r in rows]
        summary = {
            "crossing_qubit_bound": crossing(v, b, f.bounds.qubit) if f.bounds.qubit is not None else None,
            "crossing_local_bound": crossing(v, b, f.bounds.local) if f.bounds.local is not None else None,
        }
        return Report("scan visibility", config, summary=summary, rows=rows, columns=VISIBILITY_COLUMNS)
    rows = scan_steering(args.lam, args.phi_e2, args.estimator, workers=args.workers)
    lam = [r["lambda"] for r in rows]
    summary = {"crossing_threshold": crossing(lam, [r["steering_value"] for r in rows], STEERING_BOUND)}
    return Report("scan steering", config, summary=summary, rows=rows, columns=STEERING_COLUMNS)


def cmd_counts(args: argparse.Namespace) -> Report:
    if args.n < 0 or args.reps < 1:
        raise ConfigError("--n must be >= 0 and --reps >= 1")
    if args.target == "steering":
        spec = StateSpec("phi4_phased", phi_e2=args.phi_e2)
        rho = apply_noise(spec, NoiseSpec(lam=_unit("--lambda", args.lam)), "rho4")
        probs = steering_tables(rho)
        pairs = ((0, 0), (1, 1))
        est = steering_estimator()
        exact = steering_from_probabilities(probs)
    else:
        f = _functional(args)
        plan = _plan(args)
        rho = _hyper_state(args)
        probs = plan_outcome_tables(rho, plan).reshape(-1, 4, 4)
        pairs = tuple((x, y) for x in range(plan.shape[0]) for y in range(plan.shape[1]))
        est = functional_estimator(f, plan)
        exact = evaluate_plan(rho, f, plan)
    mc = monte_carlo(probs, est, args.n, args.reps, seed=args.seed, pairs=pairs)
    if args.counts_out:
        first = np.random.SeedSequence(args.seed).spawn(1)[0]
        simulate_counts(probs, mc.n_per_basis, first, pairs).save_csv(args.counts_out)
    rows = [{"rep": k, "value": float(v), "sigma": float(s)} for k, (v, s) in enumerate(zip(mc.values, mc.sigmas))]
    summary = {
        "target": est.name,
        "exact_value": exact,
        "n_total": args.n,
        "n_per_basis": float(mc.n_per_basis[0]),
        "reps": args.reps,
        "mean": mc.mean,
        "std": mc.std if args.reps > 1 else 0.0,
        "mean_propagated_sigma": mc.mean_sigma,
    }
    return Report("counts simulate", _config(args), seed=args.seed, summary=summary, rows=rows, columns=("rep", "value", "sigma"))


# --- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hyperbell", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"hyperbell {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("basis", help="detector kets for one analyzer setting")
    b.add_argument("--settings", type=parse_angles, default=[0.0] * 6, help="hwp1,qwp1,hwp2,qwp2,hwp3,qwp3 in degrees")
    b.add_argument("--phi-a", type=parse_phase, default=0.0)
    b.add_argument("--phi-b", type=parse_phase, default=0.0)
    b.add_argument("--input-polarizer", type=float, help="polarizer angle in degrees")
    _add_output(b)
    b.set_defaults(func=cmd_basis)

    c = sub.add_parser("chsh", help="CHSH value on a two-qubit DOF")
    c.add_argument("--dof", choices=("pol", "time"), default="pol")
    c.add_argument("--state", choices=("pol_only", "time_only", "psi4", "hyper"))
    c.add_argument("--phi-p", type=parse_phase, default=0.0)
    c.add_argument("--phi-t", type=parse_phase, default=0.0)
    c.add_argument("--optimize", action="store_true")
    c.add_argument("--starts", type=int, default=16)
    _add_seed(c)
    _add_output(c)
    c.set_defaults(func=cmd_chsh)

    i4 = sub.add_parser("i4422", help="(4,4,2,2) functionals on the hyperentangled state")
    i4sub = i4.add_subparsers(dest="action", required=True)
    ev = i4sub.add_parser("evaluate")
    _add_inequality(ev)
    _add_hyper_state(ev)
    _add_settings_source(ev)
    _add_output(ev)
    ev.set_defaults(func=cmd_i4422_evaluate)
    op = i4sub.add_parser("optimize")
    _add_inequality(op)
    _add_hyper_state(op)
    op.add_argument("--starts", type=int, default=64)
    op.add_argument("--max-fev", type=int, default=20000)
    op.add_argument("--fix-qwp", action="store_true", help="keep all QWPs at 0")
    _add_seed(op)
    _add_output(op, default="json")
    op.set_defaults(func=cmd_i4422_optimize)

    bd = sub.add_parser("bound", help="local or dimension-restricted bounds")
    bd.add_argument("kind", choices=("local", "seesaw"))
    _add_inequality(bd)
    bd.add_argument("--dim", type=int, default=2)
    bd.add_argument("--starts", type=int, default=64)
    bd.add_argument("--max-iters", type=int, default=500)
    _add_seed(bd)
    _add_output(bd)
    bd.set_defaults(func=cmd_bound)

    st = sub.add_parser("steer", help="steering value of the noisy phased state")
    st.add_argument("--lambda", dest="lam", type=float, default=1.0)
    st.add_argument("--phi-e1", type=parse_phase, default=0.0)
    st.add_argument("--phi-e2", type=parse_phase, default=math.pi)
    st.add_argument("--phi-r", type=parse_phase, default=0.0)
    st.add_argument("--lhs-trials", type=int, default=0, help="also sample this many separable states")
    _add_seed(st)
    _add_output(st)
    st.set_defaults(func=cmd_steer)

    sc = sub.add_parser("scan", help="visibility or steering scans")
    sc.add_argument("kind", choices=("visibility", "steering"))
    sc.add_argument("--vis", type=_grid, default=parse_grid("0.40:1.00:0.01"))
    sc.add_argument("--lambda-pol", type=float, default=0.9)
    sc.add_argument("--lambda", dest="lam", type=_grid, default=parse_grid("0:1:0.01"))
    sc.add_argument("--phi-e2", type=parse_phase, default=math.pi)
    sc.add_argument("--estimator", choices=("full", "port_a"), default="full")
    sc.add_argument("--workers", type=int, default=1)
    _add_inequality(sc)
    _add_settings_source(sc)
    _add_output(sc, default="csv")
    sc.set_defaults(func=cmd_scan)

    ct = sub.add_parser("counts", help="finite-count Monte Carlo")
    ctsub = ct.add_subparsers(dest="action", required=True)
    sim = ctsub.add_parser("simulate")
    sim.add_argument("--target", choices=("functional", "steering"), default="functional")
    sim.add_argument("--n", type=float, default=85000, help="total coincidences, split evenly over basis pairs")
    sim.add_argument("--reps", type=int, default=200)
    sim.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sim.add_argument("--phi-e2", type=parse_phase, default=math.pi)
    sim.add_argument("--counts-out", help="also write the first repetition's count table as CSV")
    _add_inequality(sim)
    _add_hyper_state(sim)
    _add_settings_source(sim)
    _add_seed(sim)
    _add_output(sim, default="csv")
    sim.set_defaults(func=cmd_counts)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report = args.func(args)
        text = report.render(args.format)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
