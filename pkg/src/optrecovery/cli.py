"""Command-line front-end for building, evaluating and auditing recovery maps.

Every subcommand reads either a JSON run configuration (``--config``) or a
serialized map (``--map``) and writes its artifacts into ``--out``. Runs are
deterministic: the only randomness comes from generators seeded by the
configuration (or ``--seed``).

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
Failures also print a one-line JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import sys
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from optrecovery import __version__
from optrecovery.cheb_core import DET_THRESHOLD, KINDS, SamplingGrid, make_system
from optrecovery.diagnostics import REFINE_TOL, SAMPLES_PER_PIECE, rho_norm_ratio, wce_audit
from optrecovery.exceptions import RecoveryError, SubintervalError
from optrecovery.l1_simplex import CERTIFICATE_TOL, NONZERO_TOL
from optrecovery.recovery import (
    PiecewiseRecoveryMap,
    asharp_matrix,
    build_recovery_map,
    dumps_map,
    insert_point_warm,
    load_map,
)

log = logging.getLogger("optrecovery")

OUTPUTS = ("map", "asharp-samples", "delta-samples", "ratio", "wce-audit")
GENERATORS = ("equispaced", "chebyshev-nodes", "random")
TEST_FUNCTIONS = {
    "runge": lambda x: 1.0 / (1.0 + 25.0 * x**2),
    "abs": np.abs,
    "exp": np.exp,
    "cos3": lambda x: np.cos(3.0 * x),
}
ARTIFACT_NAMES = {
    "map": "map.json",
    "asharp-samples": "asharp_samples.csv",
    "delta-samples": "delta_samples.csv",
    "ratio": "ratio.json",
    "wce-audit": "wce_audit.json",
}


class ConfigError(ValueError):
    pass


@dataclass
class Tolerances:
    certificate: float = CERTIFICATE_TOL
    nonzero: float = NONZERO_TOL
    ratio_samples: int = SAMPLES_PER_PIECE
    ratio_refine: float = REFINE_TOL
    check_samples: int = 100
    det_threshold: float = DET_THRESHOLD


@dataclass
class RunConfig:
    basis: dict
    points: list | dict
    probes: int | list | dict = 1001
    observations: dict | None = None
    outputs: list = field(default_factory=lambda: ["map"])
    tolerances: Tolerances = field(default_factory=Tolerances)
    audit: dict = field(default_factory=lambda: {"epsilons": [0.0, 1e-3, 1e-1], "trials": 1000, "density": 2001})
    seed: int = 0

    @classmethod
    def from_dict(cls, raw: dict) -> RunConfig:
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(raw) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        for key in ("basis", "points"):
            if key not in raw:
                raise ConfigError(f"missing required key {key!r}")
        basis = raw["basis"]
        if not isinstance(basis, dict) or basis.get("kind") not in KINDS[:-1]:
            raise ConfigError(f"basis.kind must be one of {KINDS[:-1]}")
        if not isinstance(basis.get("n"), int) or basis["n"] < 3:
            raise ConfigError("basis.n must be an integer >= 3")
        tol_raw = raw.get("tolerances", {})
        try:
            tolerances = Tolerances(**tol_raw)
        except TypeError as exc:
            raise ConfigError(f"bad tolerances: {exc}") from None
        outputs = list(raw.get("outputs", ["map"]))
        bad = [o for o in outputs if o not in OUTPUTS]
        if bad:
            raise ConfigError(f"unknown outputs {bad}; choose from {OUTPUTS}")
        audit = {"epsilons": [0.0, 1e-3, 1e-1], "trials": 1000, "density": 2001}
        audit.update(raw.get("audit", {}))
        if any(e < 0 for e in audit["epsilons"]):
            raise ConfigError("audit epsilons must be nonnegative")
        seed = raw.get("seed", 0)
        if not isinstance(seed, int):
            raise ConfigError("seed must be an integer")
        return cls(
            basis={"kind": basis["kind"], "n": basis["n"], "params": list(basis.get("params", []))},
            points=raw["points"],
            probes=raw.get("probes", 1001),
            observations=raw.get("observations"),
            outputs=outputs,
            tolerances=tolerances,
            audit=audit,
            seed=seed,
        )

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def make_grid(self) -> SamplingGrid:
        spec = self.points
        if isinstance(spec, list):
            pts = sorted(float(p) for p in spec)
            try:
                return SamplingGrid(pts)
            except ValueError as exc:
                raise ConfigError(f"points: {exc}") from None
        if not isinstance(spec, dict) or spec.get("generator") not in GENERATORS:
            raise ConfigError(f"points must be a list or a generator in {GENERATORS}")
        count = spec.get("count")
        if not isinstance(count, int) or count < 1:
            raise ConfigError("points.count must be a positive integer")
        if spec["generator"] == "equispaced":
            return SamplingGrid.equispaced(count)
        if spec["generator"] == "chebyshev-nodes":
            return SamplingGrid.chebyshev(count)
        return SamplingGrid.random(count, spec.get("seed", self.seed))

    def make_probes(self) -> np.ndarray:
        spec = self.probes
        if isinstance(spec, dict):
            spec = spec.get("points", spec.get("count"))
        if isinstance(spec, int):
            if spec < 2:
                raise ConfigError("probe count must be at least 2")
            return np.linspace(-1.0, 1.0, spec)
        if isinstance(spec, list) and spec:
            return np.sort(np.asarray(spec, dtype=float))
        raise ConfigError("probes must be a count or a nonempty list of points")

    def make_observations(self, grid: SamplingGrid, system) -> np.ndarray | None:
        spec = self.observations
        if spec is None:
            return None
        if "values" in spec:
            y = np.asarray(spec["values"], dtype=float)
            if y.shape != (grid.m,):
                raise ConfigError(f"observations.values needs {grid.m} entries")
            return y
        if "function" in spec:
            func = TEST_FUNCTIONS.get(spec["function"])
            if func is None:
                raise ConfigError(f"unknown test function; choose from {sorted(TEST_FUNCTIONS)}")
            return np.asarray(func(grid.points), dtype=float)
        if "basis" in spec:
            j = spec["basis"]
            if not isinstance(j, int) or not 0 <= j < system.n:
                raise ConfigError("observations.basis must be a basis index")
            return system.basis(grid.points)[j].copy()
        raise ConfigError("observations needs 'values', 'function' or 'basis'")


def load_config(path: str | Path, seed: int | None = None) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if seed is not None and isinstance(raw, dict):
        raw["seed"] = seed
    return RunConfig.from_dict(raw)


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def emit_samples(
    rmap: PiecewiseRecoveryMap,
    probes: Sequence[float],
    y: Sequence[float] | None = None,
    path: str | Path | None = None,
) -> str:
    """Tabulate the weight functions (and the recovered function) at ``probes``.

    Columns are ``x, a_0, ..., a_{m-1}`` plus ``delta`` when ``y`` is given;
    rows are sorted by ``x``; values carry 17 significant digits.
    """
    probes = np.sort(np.asarray(probes, dtype=float).ravel())
    if probes.size and (probes[0] < -1.0 or probes[-1] > 1.0):
        raise ValueError("probes must lie in [-1, 1]")
    weights = asharp_matrix(rmap, probes)
    header = ["x"] + [f"a_{i}" for i in range(rmap.m)]
    if y is not None:
        y = np.asarray(y, dtype=float)
        if y.shape != (rmap.m,):
            raise ValueError(f"expected {rmap.m} observations")
        header.append("delta")
        delta = weights @ y
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for p, x in enumerate(probes):
        row = [x, *weights[p]]
        if y is not None:
            row.append(delta[p])
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _supports_table(rmap: PiecewiseRecoveryMap) -> list[dict]:
    return [
        {"k": p.k, "interval": [p.left, p.right], "support": list(p.support), "pivots": p.pivots}
        for p in rmap.pieces
    ]


class _Run:
    """State shared by the subcommands of one invocation."""

    def __init__(self, args):
        self.args = args
        self.out = Path(args.out)
        self.timing: dict[str, float] = {}
        self.artifacts: dict[str, str] = {}
        self.report: dict = {"tool": "optrecovery", "version": __version__}
        self.config: RunConfig | None = None
        if getattr(args, "config", None):
            self.config = load_config(args.config, args.seed)
            self.report["config_digest"] = self.config.digest()
        self.tolerances = self.config.tolerances if self.config else Tolerances()

    @contextmanager
    def timed(self, phase: str):
        t0 = time.perf_counter()
        yield
        self.timing[phase] = time.perf_counter() - t0
        log.info("%s: %.3fs", phase, self.timing[phase])

    def write(self, kind: str, text: str, name: str | None = None) -> None:
        name = name or ARTIFACT_NAMES[kind]
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / name).write_text(text)
        self.artifacts[kind] = name

    def get_map(self) -> PiecewiseRecoveryMap:
        if getattr(self.args, "map", None):
            with self.timed("load"):
                return load_map(self.args.map)
        if self.config is None:
            raise ConfigError("either --config or --map is required")
        cfg, tol = self.config, self.tolerances
        with self.timed("build"):
            system = make_system(
                cfg.basis["kind"], cfg.basis["n"], cfg.basis["params"],
                check_samples=tol.check_samples, det_threshold=tol.det_threshold,
            )
            grid = cfg.make_grid()
            if grid.m < system.n:
                raise ConfigError(f"need at least n={system.n} points, got {grid.m}")
            return build_recovery_map(
                system, grid, workers=self.args.threads,
                cert_tol=tol.certificate, zero_tol=tol.nonzero,
            )

    def finish(self, rmap: PiecewiseRecoveryMap) -> None:
        self.report["m"] = rmap.m
        self.report["n"] = rmap.n
        self.report["basis"] = rmap.system.descriptor()
        self.report["supports"] = _supports_table(rmap)
        self.report["artifacts"] = dict(sorted(self.artifacts.items()))
        if self.args.timing:
            self.report["timing"] = self.timing
        self.write("report", _dump_json(self.report), "report.json")


def _ratio(run: _Run, rmap: PiecewiseRecoveryMap):
    with run.timed("ratio"):
        rep = rho_norm_ratio(rmap, run.tolerances.ratio_samples, run.tolerances.ratio_refine)
    run.report["ratio"] = {"rho": rep.rho, "mu": rep.mu}
    run.write("ratio", _dump_json(rep.to_dict()))
    return rep


def _audit(run: _Run, rmap: PiecewiseRecoveryMap, mu: float | None = None):
    audit = run.config.audit if run.config else {"epsilons": [0.0, 1e-3, 1e-1], "trials": 1000, "density": 2001}
    if getattr(run.args, "epsilon", None) is not None:
        audit = dict(audit, epsilons=run.args.epsilon)
    if getattr(run.args, "trials", None) is not None:
        audit = dict(audit, trials=run.args.trials)
    if mu is None:
        mu = rho_norm_ratio(rmap, run.tolerances.ratio_samples, run.tolerances.ratio_refine).mu
    seed = run.config.seed if run.config else (run.args.seed or 0)
    with run.timed("audit"):
        results = [
            wce_audit(rmap, eps, audit["trials"], audit["density"], seed=seed, mu=mu).to_dict()
            for eps in audit["epsilons"]
        ]
    run.report["audit"] = results
    run.write("wce-audit", _dump_json({"mu": mu, "audits": results}))
    return results


def _samples(run: _Run, rmap: PiecewiseRecoveryMap, want_delta: bool, want_asharp: bool = True):
    cfg = run.config
    probes = cfg.make_probes() if cfg else np.linspace(-1.0, 1.0, run.args.probes)
    with run.timed("samples"):
        if want_asharp:
            run.write("asharp-samples", emit_samples(rmap, probes))
        if want_delta:
            y = cfg.make_observations(rmap.grid, rmap.system) if cfg else None
            if y is None:
                raise ConfigError("delta-samples requires observations in the configuration")
            run.write("delta-samples", emit_samples(rmap, probes, y))


def cmd_build(run: _Run) -> None:
    if run.config is None:
        raise ConfigError("build requires --config")
    rmap = run.get_map()
    outputs = run.config.outputs
    run.write("map", dumps_map(rmap))
    mu = None
    if "ratio" in outputs:
        mu = _ratio(run, rmap).mu
    if "wce-audit" in outputs:
        _audit(run, rmap, mu)
    if "asharp-samples" in outputs or "delta-samples" in outputs:
        _samples(run, rmap, "delta-samples" in outputs, "asharp-samples" in outputs)
    run.finish(rmap)


def cmd_eval(run: _Run) -> None:
    rmap = run.get_map()
    want_delta = run.config is not None and run.config.observations is not None
    _samples(run, rmap, want_delta)
    run.finish(rmap)


def cmd_ratio(run: _Run) -> None:
    rmap = run.get_map()
    _ratio(run, rmap)
    run.finish(rmap)


def cmd_audit(run: _Run) -> None:
    rmap = run.get_map()
    _audit(run, rmap)
    run.finish(rmap)


def cmd_insert(run: _Run) -> None:
    rmap = run.get_map()
    with run.timed("insert"):
        try:
            new = insert_point_warm(rmap, run.args.point, run.args.strategy, workers=run.args.threads)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    run.report["inserted"] = {"point": run.args.point, "strategy": run.args.strategy, "pivots": new.pivots}
    run.write("map", dumps_map(new))
    run.finish(new)


COMMANDS = {
    "build": cmd_build,
    "eval": cmd_eval,
    "ratio": cmd_ratio,
    "audit": cmd_audit,
    "insert": cmd_insert,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--map", help="serialized recovery map (instead of building one)")
    common.add_argument("--out", default="out", help="artifact directory (default: out)")
    common.add_argument("--seed", type=int, default=None, help="override the configuration seed")
    common.add_argument("--threads", type=int, default=1, help="workers for per-subinterval solves")
    common.add_argument("--timing", action="store_true", help="record phase timings in report.json")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="optrecovery", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("build", parents=[common], help="build a map and the configured outputs")
    p = sub.add_parser("eval", parents=[common], help="tabulate weights / recovered function")
    p.add_argument("--probes", type=int, default=1001, help="probe count when no config is given")
    sub.add_parser("ratio", parents=[common], help="norm ratio rho and mu = 1 + rho")
    p = sub.add_parser("audit", parents=[common], help="randomized worst-case error audit")
    p.add_argument("--epsilon", type=float, action="append", help="repeatable")
    p.add_argument("--trials", type=int)
    p = sub.add_parser("insert", parents=[common], help="insert a sample point into a map")
    p.add_argument("--point", type=float, required=True)
    p.add_argument("--strategy", choices=("warm", "cold"), default="warm")
    return parser


def _fail(code: int, exc: BaseException) -> int:
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, SubintervalError):
        record["subinterval"] = exc.k
    print(json.dumps(record), file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.threads < 1:
        return _fail(2, ConfigError("--threads must be positive"))
    try:
        run = _Run(args)
        COMMANDS[args.command](run)
    except (ConfigError, KeyError) as exc:
        return _fail(2, exc)
    except RecoveryError as exc:
        return _fail(3, exc)
    except OSError as exc:
        return _fail(4, exc)
    except ValueError as exc:
        # invalid grids/bases from the configuration surface here
        return _fail(2, exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
