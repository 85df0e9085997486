"""Command-line front end.

Exit status: 0 success, 1 flagged run (infinite psi bound, failed
certification, axiom violations, non-convergence, invalid declared
triangle or comparison function), 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import extreal
from .config import (
    ConfigError,
    atomic_write,
    json_text,
    load_comparison,
    load_ifs,
    load_map,
    load_point,
    load_points,
    load_space,
    read_json,
)
from .fixpoint import StoppingRule, certify_contraction, picard_iterate
from .hutchinson import DivergentRunError, FractalStop, generate_fractal, stability_run
from .raster import render_pgm
from .semimetric import regularity_probe, validate_axioms
from .sets import PointSet, directed_distance, epsilon_net, hausdorff_distance

COMMANDS = ("probe", "dist", "fix", "fractal", "stability", "validate")

FORMATS = """\
output files (CSV: '.' decimal, shortest round-trip floats, 'inf' for infinity):
  probe      probe.csv       radius,sup_diameter
  dist       dist.json       hausdorff, directed distances; net.json when "eps" is given
  fix        trace.csv       k,x,step,apriori,aposteriori,speed_bound,measured_error
             trace.json      same fields plus convergence flags
  fractal    run.csv         k,points,step,apriori,aposteriori,coarsen_slack
             attractor.json  JSON array of points; attractor.pgm for 2D spaces
  stability  stability.csv   j,distance
  validate   violations.csv  kind,x,y,z,lhs,rhs
every command also writes manifest.json recording the seed and the files written.
environment: SEMIFIX_THREADS caps internal parallelism.
"""


@dataclass
class RunConfig:
    command: str
    config: Optional[Path] = None
    space: Optional[Path] = None
    out: Path = Path(".")
    tol: Optional[float] = None
    max_iter: Optional[int] = None
    cell: Optional[float] = None
    seed: int = 0
    width: int = 512
    height: int = 512


class _Outputs:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.written: list[str] = []

    def write(self, name: str, data) -> None:
        atomic_write(self.cfg.out / name, data)
        self.written.append(name)

    def json(self, name: str, obj: dict) -> None:
        self.write(name, json_text({"seed": self.cfg.seed, **obj}))

    def finish(self, flagged: bool, reason: str = "") -> int:
        manifest = {
            "command": self.cfg.command,
            "seed": self.cfg.seed,
            "flagged": flagged,
            "reason": reason,
            "outputs": sorted(self.written),
        }
        atomic_write(self.cfg.out / "manifest.json", json_text(manifest))
        if flagged:
            print(f"semifix {self.cfg.command}: flagged: {reason}", file=sys.stderr)
        return 1 if flagged else 0


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _text(v) -> str:
    if isinstance(v, float):
        return extreal.fmt(v)
    if isinstance(v, tuple):
        return " ".join(_text(c) for c in v)
    return "" if v is None else str(v)


def _setting(cfg_value, doc, key, default):
    if cfg_value is not None:
        return cfg_value
    return doc.get(key, default) if isinstance(doc, dict) else default


def _doc(cfg: RunConfig):
    path = cfg.config or cfg.space
    if path is None:
        raise ConfigError(f"'{cfg.command}' needs --config PATH")
    return read_json(path)


def _need(doc, key):
    if not isinstance(doc, dict) or key not in doc:
        raise ConfigError(f"configuration needs '{key}'")
    return doc[key]


def _default_start(space):
    if space.is_finite:
        return PointSet(space, [space.domain.labels[0]])
    return PointSet(space, [np.zeros(space.domain.dim)])


# -- commands -----------------------------------------------------------------


def cmd_probe(cfg: RunConfig) -> int:
    doc = _doc(cfg)
    space = load_space(_need(doc, "space"))
    sample_doc = _need(doc, "sample")
    if isinstance(sample_doc, dict) and "grid" in sample_doc:
        g = sample_doc["grid"]
        sample_doc = np.linspace(g["start"], g["stop"], int(g["num"])).tolist()
    sample = load_points(space, sample_doc)
    radii = [extreal.ext(r) for r in _need(doc, "radii")]
    tol = float(_setting(cfg.tol, doc, "tol", 1e-9))
    try:
        report = regularity_probe(space, sample, radii, tol)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    grid = np.concatenate([[0.0], np.geomspace(1e-6, 1e3, 19)])
    phi_problems = space.phi.probe(grid)
    cmp_problems = load_comparison(doc["phi_cmp"]).probe() if "phi_cmp" in doc else []
    out = _Outputs(cfg)
    out.write("probe.csv", _csv(("radius", "sup_diameter"), [(_text(r), _text(v)) for r, v in report.rows]))
    out.json(
        "probe.json",
        {
            "consistent_with_regular": report.consistent,
            "tol": tol,
            "rows": [{"radius": r, "sup_diameter": v} for r, v in report.rows],
            "triangle_function_problems": phi_problems,
            "comparison_function_problems": cmp_problems,
        },
    )
    # the regularity verdict is a finding, not a failure; declared functions that break their contract are
    problems = phi_problems + cmp_problems
    return out.finish(bool(problems), "; ".join(problems[:3]))


def cmd_dist(cfg: RunConfig) -> int:
    doc = _doc(cfg)
    space = load_space(_need(doc, "space"))
    A = load_points(space, _need(doc, "A"), doc.get("dedup_tol"))
    B = load_points(space, _need(doc, "B"), doc.get("dedup_tol"))
    out = _Outputs(cfg)
    out.json(
        "dist.json",
        {
            "hausdorff": extreal.to_json(hausdorff_distance(space, A, B)),
            "directed_ab": extreal.to_json(directed_distance(space, A, B)),
            "directed_ba": extreal.to_json(directed_distance(space, B, A)),
        },
    )
    if "eps" in doc:
        eps = extreal.ext(doc["eps"])
        if eps <= 0:
            raise ConfigError("eps must be > 0")
        out.json("net.json", epsilon_net(space, A, eps).to_json())
    return out.finish(False)


def cmd_fix(cfg: RunConfig) -> int:
    doc = _doc(cfg)
    space = load_space(_need(doc, "space"))
    phi = load_comparison(_need(doc, "phi_cmp"))
    T = load_map(space, _need(doc, "map"), phi)
    x1 = load_point(space, _need(doc, "x1"))
    try:
        stop = StoppingRule(
            float(_setting(cfg.tol, doc, "tol", 1e-12)),
            int(_setting(cfg.max_iter, doc, "max_iter", 100)),
            doc.get("psi_cap"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cert = certify_contraction(space, T, int(doc.get("samples", 1000)), cfg.seed)
    trace = picard_iterate(space, cert.certified_map, x1, stop)
    out = _Outputs(cfg)
    out.write("trace.csv", trace.to_csv())
    out.json("trace.json", {"certification": cert.certification, **trace.to_json()})
    reasons = []
    if not cert.ok:
        reasons.append(f"{len(cert.violations)} contraction violation(s)")
    if trace.diverged:
        reasons.append("psi bound infinite at every step")
    elif not trace.converged:
        reasons.append("tolerance not reached within max_iter")
    return out.finish(bool(reasons), "; ".join(reasons))


def _fractal_stop(cfg, doc):
    try:
        return FractalStop(
            float(_setting(cfg.tol, doc, "tol", 1e-4)),
            int(_setting(cfg.max_iter, doc, "max_iter", 60)),
            doc.get("psi_cap"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _cell(cfg, doc):
    cell = _setting(cfg.cell, doc, "cell", None)
    if cell is not None and not float(cell) > 0:
        raise ConfigError("cell must be > 0")
    return None if cell is None else float(cell)


def cmd_fractal(cfg: RunConfig) -> int:
    doc = _doc(cfg)
    ifs = load_ifs(doc, seed=cfg.seed)
    space = ifs.space
    H1 = load_points(space, doc["H1"]) if "H1" in doc else _default_start(space)
    cell = _cell(cfg, doc)
    if cell is not None and not space.is_euclidean:
        raise ConfigError("--cell needs a Euclidean space")
    run = generate_fractal(space, ifs, H1, _fractal_stop(cfg, doc), cell)
    out = _Outputs(cfg)
    out.write("run.csv", run.to_csv())
    out.write("attractor.json", json_text(run.attractor.to_json()))
    out.json("run.json", run.summary())
    if space.is_euclidean and space.domain.dim == 2:
        out.write("attractor.pgm", render_pgm(run.attractor, cfg.width, cfg.height, comment=f"seed={cfg.seed}"))
    if run.diverged:
        return out.finish(True, "psi bound infinite at every step")
    if not run.converged:
        return out.finish(True, "tolerance not reached within max_iter")
    return out.finish(False)


def cmd_stability(cfg: RunConfig) -> int:
    doc = _doc(cfg)
    space = load_space(_need(doc, "space"))
    phi = load_comparison(_need(doc, "phi_cmp"))
    limit = load_ifs(_need(doc, "limit"), space, phi, cfg.seed)
    seq_doc = _need(doc, "sequence")
    if not isinstance(seq_doc, list) or not seq_doc:
        raise ConfigError("'sequence' must be a nonempty array")
    systems = [load_ifs(entry, space, phi, cfg.seed) for entry in seq_doc]
    indices = [entry.get("j", i + 1) for i, entry in enumerate(seq_doc)]
    H1 = load_points(space, doc["H1"]) if "H1" in doc else _default_start(space)
    cell = _cell(cfg, doc)
    out = _Outputs(cfg)
    try:
        table = stability_run(space, systems, limit, H1, _fractal_stop(cfg, doc), cell, indices)
    except DivergentRunError as exc:
        return out.finish(True, str(exc))
    out.write("stability.csv", table.to_csv())
    out.json(
        "stability.json",
        {
            "rows": [{"j": j, "distance": extreal.to_json(d)} for j, d in table.rows],
            "converged": [r.converged for r in table.runs],
            "limit_converged": table.limit_run.converged,
        },
    )
    return out.finish(False)


def cmd_validate(cfg: RunConfig) -> int:
    doc = _doc(cfg)
    space_doc = doc["space"] if isinstance(doc, dict) and "space" in doc else doc
    space = load_space(space_doc)
    budget = int(doc.get("triple_budget", 1000)) if isinstance(doc, dict) else 1000
    report = validate_axioms(space, budget, cfg.seed)
    rows = [(v.kind, _text(v.x), _text(v.y), _text(v.z), _text(v.lhs), _text(v.rhs)) for v in report.violations]
    out = _Outputs(cfg)
    out.write("violations.csv", _csv(("kind", "x", "y", "z", "lhs", "rhs"), rows))
    out.json(
        "validation.json",
        {
            "exhaustive": report.exhaustive,
            "checked": report.checked,
            "violations": len(report.violations),
            "triangle_function": space.phi.describe(),
        },
    )
    return out.finish(not report.ok, f"{len(report.violations)} violation(s)")


HANDLERS = {
    "probe": cmd_probe,
    "dist": cmd_dist,
    "fix": cmd_fix,
    "fractal": cmd_fractal,
    "stability": cmd_stability,
    "validate": cmd_validate,
}


def run(cfg: RunConfig) -> int:
    """Dispatch one command; returns the process exit status."""
    try:
        if cfg.command not in HANDLERS:
            raise ConfigError(f"unknown command {cfg.command!r}")
        for path in (cfg.config, cfg.space):
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"{path}: no such file")
        if cfg.width < 1 or cfg.height < 1:
            raise ConfigError("--width and --height must be >= 1")
        cfg.out.mkdir(parents=True, exist_ok=True)
        return HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"semifix {cfg.command}: configuration error: {exc}", file=sys.stderr)
        return 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON configuration file")
    common.add_argument("--space", type=Path, help="JSON space description (validate)")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory (default: .)")
    common.add_argument("--tol", type=float, help="stopping / verdict tolerance")
    common.add_argument("--max-iter", type=int, dest="max_iter", help="iteration cap")
    common.add_argument("--cell", type=float, help="coarsening grid cell for fractal runs")
    common.add_argument("--seed", type=int, default=0, help="seed for sampled checks (default: 0)")
    common.add_argument("--width", type=int, default=512, help="PGM width (default: 512)")
    common.add_argument("--height", type=int, default=512, help="PGM height (default: 512)")

    parser = argparse.ArgumentParser(
        prog="semifix",
        description="Fixed points and fractals in semimetric spaces with certified error bounds.",
        epilog=FORMATS,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "probe": "sample ball diameters to check regularity",
        "dist": "Hausdorff-Pompeiu distance of two point sets",
        "fix": "Picard iteration with a priori / a posteriori bounds",
        "fractal": "generate an IFS attractor with certified bounds",
        "stability": "attractor distances for a converging sequence of systems",
        "validate": "check semimetric axioms and the declared triangle function",
    }
    for name in COMMANDS:
        sub.add_parser(
            name,
            parents=[common],
            help=helps[name],
            epilog=FORMATS,
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(**vars(args))
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
