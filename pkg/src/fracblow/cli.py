"""Scenario-driven command line: certify, simulate, ode, audit."""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .audit import audit_published_examples, flagged_examples
from .blowup_ode import solve_comparison_ode
from .capacity import SCHEMA_VERSION, BoundaryFunctional, InitialData, build_certificate
from .expr import ExpressionError
from .fracops import DomainError
from .pde_sim import (
    SOLVER_DIVERGENCE,
    BoundaryError,
    BoundarySet,
    Dirichlet,
    FSeries,
    MemoryBudgetExceeded,
    Neumann,
    Robin,
    SecondDerivative,
    SpatialGrid,
    check_max_principle,
    detect_blowup,
    monitor_capacity,
    simulate_burgers,
    simulate_fbb,
    write_run_csv,
)
from .testfn import Family, FamilySpec, TestFunction

log = logging.getLogger("fracblow")

MODES = ("certify", "simulate", "ode", "audit")

EXIT_OK = 0
EXIT_IO = 2
EXIT_ENGINE = 3
EXIT_HYPOTHESES_FAIL = 10
EXIT_F0_NONPOSITIVE = 11
EXIT_SOLVER_DIVERGENCE = 20
EXIT_ODE_OUTSIDE_WINDOW = 21

ODE_WINDOW_SLACK = 0.05


class ScenarioError(ValueError):
    """Malformed or out-of-range scenario content."""


@dataclass
class Scenario:
    name: str
    mode: str
    family: FamilySpec | None = None
    alpha: float = 1.0
    L: float = 1.0
    phi: str | None = None
    u0: str | None = None
    u0_file: Path | None = None
    boundary: BoundaryFunctional = field(default_factory=BoundaryFunctional)
    bc: BoundarySet | None = None
    simulator: str = "fbb"
    m: int = 64
    dt: float | None = None
    horizon: float | None = None
    adaptive: bool = False
    memory_budget: int = 20_000
    ode_u0: float | None = None
    ode_threshold: float | None = None
    seed: int = 0
    base_dir: Path = Path(".")

    def initial_data(self) -> InitialData:
        if self.u0_file is not None:
            x, u = _read_samples(self.u0_file)
            return InitialData.from_samples(x, u, source=str(self.u0_file))
        return InitialData.parse(self.u0 or "0")


def _read_samples(path: Path):
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(rec[0]), float(rec[1])))
            except ValueError:
                if rows:
                    raise ScenarioError(f"u0 file {path}: non-numeric row {rec!r}") from None
    if len(rows) < 3:
        raise ScenarioError(f"u0 file {path}: need at least 3 samples")
    arr = np.asarray(rows)
    return arr[:, 0], arr[:, 1]


def _num(doc: dict, key: str, default=None, *, positive=False, where="") -> float | None:
    v = doc.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ScenarioError(f"{where}{key}: expected a finite number, got {v!r}")
    if positive and v <= 0:
        raise ScenarioError(f"{where}{key}: must be > 0")
    return float(v)


def _family(doc) -> FamilySpec:
    if not isinstance(doc, dict) or "family" not in doc:
        raise ScenarioError("family: expected an object with a 'family' name")
    try:
        name = Family(str(doc["family"]).upper())
    except ValueError:
        raise ScenarioError(f"family: unknown family {doc['family']!r}") from None
    kw = {k: _num(doc, k, where="family.") for k in ("a", "b", "c", "d", "nu", "M", "kappa") if k in doc}
    unknown = set(doc) - {"family", "a", "b", "c", "d", "nu", "M", "kappa"}
    if unknown:
        raise ScenarioError(f"family: unknown keys {sorted(unknown)}")
    try:
        return FamilySpec(name, **kw)
    except ValueError as exc:
        raise ScenarioError(f"family: {exc}") from None


def _boundary_functional(doc) -> BoundaryFunctional:
    if doc is None:
        return BoundaryFunctional()
    kind = doc.get("kind", "zero")
    if kind == "zero":
        return BoundaryFunctional()
    if kind == "constant":
        return BoundaryFunctional.constant(_num(doc, "value", where="boundary."))
    if kind == "series":
        t, v = doc.get("times"), doc.get("values")
        if not isinstance(t, list) or not isinstance(v, list) or not v or len(t) != len(v):
            raise ScenarioError("boundary: series needs equal-length non-empty 'times' and 'values'")
        return BoundaryFunctional("series", 0.0, tuple(map(float, t)), tuple(map(float, v)))
    raise ScenarioError(f"boundary.kind: expected zero, constant or series, got {kind!r}")


_BC_TYPES = {"dirichlet": Dirichlet, "neumann": Neumann, "second_derivative": SecondDerivative}


def _bc(doc) -> BoundarySet:
    if doc is None:
        return BoundarySet.dirichlet()
    sides = {}
    for side in ("left", "right"):
        items = doc.get(side, [{"type": "dirichlet", "value": 0.0}])
        if isinstance(items, dict):
            items = [items]
        conds = []
        for it in items:
            kind = it.get("type")
            if kind in _BC_TYPES:
                conds.append(_BC_TYPES[kind](_num(it, "value", 0.0, where=f"bc.{side}.")))
            elif kind == "robin":
                conds.append(
                    Robin(
                        _num(it, "kappa", 0.0, where=f"bc.{side}."),
                        _num(it, "quadratic", 0.0, where=f"bc.{side}."),
                        _num(it, "scale", 1.0, where=f"bc.{side}."),
                    )
                )
            else:
                raise ScenarioError(f"bc.{side}: unknown condition type {kind!r}")
        sides[side] = tuple(conds)
    return BoundarySet(sides["left"], sides["right"])


def parse_scenario(text: str, base_dir: Path | str = ".", mode: str | None = None) -> Scenario:
    """Parse and validate a JSON scenario document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    base_dir = Path(base_dir)
    doc_mode = doc.get("mode")
    if mode is not None and doc_mode is not None and doc_mode != mode:
        raise ScenarioError(f"mode: scenario says {doc_mode!r} but the {mode!r} command was used")
    mode = mode or doc_mode
    if mode not in MODES:
        raise ScenarioError(f"mode: expected one of {', '.join(MODES)}, got {mode!r}")
    sc = Scenario(name=str(doc.get("name", "scenario")), mode=mode, base_dir=base_dir)
    if not sc.name.replace("-", "").replace("_", "").replace(".", "").isalnum():
        raise ScenarioError("name: use letters, digits, '-', '_' or '.'")

    alpha = _num(doc, "alpha", 1.0)
    if not (0.0 < alpha <= 1.0):
        raise ScenarioError("alpha out of range: need 0 < alpha <= 1")
    sc.alpha = alpha
    sc.L = _num(doc, "L", 1.0)
    if not sc.L > 0.0:
        raise ScenarioError("L: must be > 0")
    sc.seed = int(doc.get("seed", 0))

    if "family" in doc:
        sc.family = _family(doc["family"])
    sc.phi = doc.get("phi")
    u0 = doc.get("u0")
    if isinstance(u0, dict) and "file" in u0:
        path = (base_dir / u0["file"]).resolve()
        if not path.is_file():
            raise ScenarioError(f"u0.file: {path} does not exist")
        sc.u0_file = path
    elif u0 is not None and not isinstance(u0, str):
        raise ScenarioError("u0: expected an expression string or {\"file\": path}")
    else:
        sc.u0 = u0
    try:
        for label, expr in (("phi", sc.phi), ("u0", sc.u0)):
            if expr is not None:
                TestFunction.parse(expr, sc.L)
    except ExpressionError as exc:
        raise ScenarioError(f"{label}: {exc}") from None
    sc.boundary = _boundary_functional(doc.get("boundary"))

    grid = doc.get("grid", {})
    m = grid.get("m", 64)
    if isinstance(m, bool) or not isinstance(m, int) or m < 8:
        raise ScenarioError("grid.m: need an integer >= 8")
    sc.m = m
    sc.dt = _num(grid, "dt", None, positive=True, where="grid.")
    sc.horizon = _num(grid, "horizon", None, positive=True, where="grid.")
    sc.adaptive = bool(grid.get("adaptive", False))
    sc.memory_budget = int(grid.get("memory_budget", 20_000))
    if sc.memory_budget < 2:
        raise ScenarioError("grid.memory_budget: need at least 2")

    if mode == "certify":
        if sc.family is None:
            raise ScenarioError("family: required in certify mode")
        if sc.phi is None:
            raise ScenarioError("phi: required in certify mode")
    elif mode == "simulate":
        sc.simulator = doc.get("simulator", "fbb")
        if sc.simulator not in ("fbb", "burgers"):
            raise ScenarioError("simulator: expected 'fbb' or 'burgers'")
        if sc.family is None or sc.family.family is not Family.FBB:
            raise ScenarioError("family: simulate mode needs an FBB family")
        if sc.simulator == "burgers" and not sc.family.d > 0.0:
            raise ScenarioError("family.d: the burgers simulator needs d = nu > 0")
        if sc.horizon is None:
            raise ScenarioError("grid.horizon: required in simulate mode")
        sc.bc = _bc(doc.get("bc"))
    elif mode == "ode":
        ode = doc.get("ode", {})
        sc.ode_u0 = _num(ode, "u0", None, positive=True, where="ode.")
        if sc.ode_u0 is None:
            raise ScenarioError("ode.u0: required in ode mode")
        sc.ode_threshold = _num(ode, "threshold", None, positive=True, where="ode.")
    return sc


# -- execution ---------------------------------------------------------------


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _dump(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_plain) + "\n")
    meta = {
        "artifact": path.name,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "fracblow_version": __version__,
    }
    path.with_name(path.name + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _certify(sc: Scenario, out: Path, tol: float) -> int:
    phi = TestFunction.parse(sc.phi, sc.L)
    cert = build_certificate(phi, sc.family, sc.initial_data(), sc.boundary, sc.alpha, tol)
    payload = cert.as_dict()
    payload["scenario"] = sc.name
    _dump(out / f"{sc.name}.certificate.json", payload)
    return {"certified-blowup": EXIT_OK, "hypotheses-fail": EXIT_HYPOTHESES_FAIL}.get(cert.status, EXIT_F0_NONPOSITIVE)


def _simulate(sc: Scenario, out: Path, tol: float) -> int:
    grid = SpatialGrid(sc.L, sc.m)
    data = sc.initial_data()
    u0 = data(grid.x)
    if sc.simulator == "burgers":
        fld = simulate_burgers(sc.family.d, sc.alpha, u0, sc.bc, grid, sc.horizon, sc.dt, sc.adaptive, sc.memory_budget)
    else:
        fld = simulate_fbb(sc.family, sc.alpha, u0, sc.bc, grid, sc.horizon, sc.dt, sc.adaptive, sc.memory_budget)
    cert = None
    if sc.phi is not None:
        phi = TestFunction.parse(sc.phi, sc.L)
        F = monitor_capacity(fld, phi, sc.family)
        cert = build_certificate(phi, sc.family, data, sc.boundary, sc.alpha, tol)
    else:
        F = FSeries(fld.t.copy(), np.full(fld.t.size, np.nan), False, "no test function given")
    report = detect_blowup(fld, F, cert)
    write_run_csv(out / f"{sc.name}.csv", fld, F)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "kind": "blowup-report",
        "scenario": sc.name,
        "simulator": sc.simulator,
        "family": sc.family.as_dict(),
        "alpha": sc.alpha,
        "grid": {"L": sc.L, "m": sc.m, "dt": sc.dt, "horizon": sc.horizon, "adaptive": sc.adaptive},
        "stop_reason": fld.stop_reason,
        "report": report.as_dict(),
        "certificate_status": None if cert is None else cert.status,
        "max_principle": None,
    }
    if sc.simulator == "burgers":
        low, high, mp_tol, mp_ok = check_max_principle(fld)
        payload["max_principle"] = {
            "passed": mp_ok,
            "tol": mp_tol,
            "min_low": float(low.min()),
            "min_high": float(high.min()),
        }
    if not F.valid or np.all(np.isnan(F.values)):
        payload["report"]["F_final"] = None
    _dump(out / f"{sc.name}.report.json", payload)
    return EXIT_SOLVER_DIVERGENCE if fld.stop_reason == SOLVER_DIVERGENCE else EXIT_OK


def _ode(sc: Scenario, out: Path, tol: float) -> int:
    traj = solve_comparison_ode(sc.alpha, sc.ode_u0, threshold=sc.ode_threshold, horizon=sc.horizon)
    with open(out / f"{sc.name}.trajectory.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "u"])
        for t, u in zip(traj.times, traj.values):
            w.writerow([repr(float(t)), repr(float(u))])
    ts = traj.detected_tstar
    contained = ts is not None and traj.window.contains(ts, ODE_WINDOW_SLACK)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "kind": "ode-window",
        "scenario": sc.name,
        "window": traj.window.as_dict(),
        "detected_tstar": ts,
        "detection_reason": traj.detection_reason,
        "contained": contained,
        "relative_slack": ODE_WINDOW_SLACK,
        "steps": int(traj.times.size - 1),
        "rejected_steps": traj.rejected_steps,
    }
    _dump(out / f"{sc.name}.window.json", payload)
    return EXIT_OK if contained else EXIT_ODE_OUTSIDE_WINDOW


def run_audit(out: Path) -> int:
    rows = audit_published_examples()
    payload = {
        "schema_version": SCHEMA_VERSION,
        "kind": "discrepancy-ledger",
        "rows": [r.as_dict() for r in rows],
        "flagged": flagged_examples(rows),
    }
    _dump(out / "audit.json", payload)
    return EXIT_OK


_RUNNERS = {"certify": _certify, "simulate": _simulate, "ode": _ode}


def run(scenario: Scenario, out: Path | str = ".", tol: float = 1e-10) -> int:
    """Execute one scenario and return its exit code."""
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if scenario.mode == "audit":
            return run_audit(out)
        return _RUNNERS[scenario.mode](scenario, out, tol)
    except OSError as exc:
        log.error("%s: I/O failure: %s", scenario.name, exc)
        return EXIT_IO
    except (MemoryBudgetExceeded, BoundaryError, DomainError, ExpressionError, ValueError, ArithmeticError, RuntimeError) as exc:
        log.error("%s: engine error: %s", scenario.name, exc)
        return EXIT_ENGINE


def _load_and_run(path: str, mode: str, out: str, tol: float) -> int:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        log.error("%s: %s", path, exc)
        return EXIT_IO
    try:
        sc = parse_scenario(text, p.parent, mode)
    except ScenarioError as exc:
        log.error("%s: %s", path, exc)
        return EXIT_IO
    return run(sc, out, tol)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracblow", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in MODES:
        p = sub.add_parser(name)
        p.add_argument("--scenario", action="append", default=[], metavar="PATH", help="scenario JSON (repeatable)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--tol", type=float, default=1e-10, help="relative slack on inf Phi >= theta1")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "audit":
        if args.scenario:
            log.warning("audit ignores --scenario")
        return run(Scenario("audit", "audit"), args.out, args.tol)
    if not args.scenario:
        log.error("%s needs at least one --scenario", args.command)
        return EXIT_IO
    if args.jobs < 1 or not (args.tol >= 0.0):
        log.error("--jobs must be >= 1 and --tol >= 0")
        return EXIT_IO
    jobs = [(p, args.command, args.out, args.tol) for p in args.scenario]
    if args.jobs == 1 or len(jobs) == 1:
        codes = [_load_and_run(*j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(_load_and_run, *zip(*jobs)))
    for path, code in zip(args.scenario, codes):
        log.info("%s -> exit %d", path, code)
    failures = [c for c in codes if c in (EXIT_IO, EXIT_ENGINE)]
    return max(failures) if failures else max(codes)


if __name__ == "__main__":
    sys.exit(main())
