"""Time-stepping loop, CSV output and the command line interface."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import CurveFlowError, InvalidArgumentError, StabilityViolation
from .harness import n_steps, run_convergence
from .manufactured import ManufacturedFamily
from .monitors import scalar_monitors
from .scenarios import REGISTRY, ScenarioSpec
from .stepper import INITIAL_MODES, CurveState, FlowKind, FlowSpec, initial_state, step_with_info

logger = logging.getLogger(__name__)

#: Relative slack allowed in the discrete energy bound of curve diffusion.
STABILITY_SLACK = 1e-12

MONITOR_COLUMNS = ("step", "t", "length", "dirichlet", "area", "ratio", "k_inf", "elastic")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


@dataclass
class RunOutput:
    monitors: list = field(default_factory=list)        # (step, MonitorRecord)
    snapshots: list = field(default_factory=list)       # (requested t, CurveState)
    final: Optional[CurveState] = None
    max_stability_excess: float = -math.inf
    status: int = EXIT_OK


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def snapshot_step(t: float, dt: float) -> int:
    """Index of the last step whose time does not exceed ``t``."""
    return int(math.floor(t / dt + 1e-9))


def sample_steps(M: int, every: int) -> list:
    """Steps at which monitors are recorded: multiples of ``every`` and the final step."""
    out = list(range(0, M + 1, every))
    if out[-1] != M:
        out.append(M)
    return out


def run_simulation(spec: ScenarioSpec, out_dir=None,
                   callback: Optional[Callable[[CurveState], None]] = None) -> RunOutput:
    """Run a scenario from ``t = 0`` until ``t >= T``.

    Monitors are recorded every ``spec.sample_every`` steps and at the final
    step; snapshots are taken at the last step not after each requested time.
    Curve-diffusion steps check the discrete energy bound and abort with
    :class:`StabilityViolation` if it fails by more than ``STABILITY_SLACK``.
    Files are written when ``out_dir`` (or ``spec.out_dir``) is set.
    """
    out_dir = out_dir if out_dir is not None else spec.out_dir
    flow = FlowSpec(spec.flow, spec.dt, lam=spec.lam)
    check = flow.kind is FlowKind.CURVE_DIFFUSION
    lam = spec.lam if flow.elastic else None

    state = initial_state(spec.initial_curve())
    M = n_steps(spec.T, spec.dt)
    samples = set(sample_steps(M, spec.sample_every))
    wanted = {}
    for t in spec.snapshot_times:
        wanted.setdefault(min(snapshot_step(t, spec.dt), M), []).append(t)

    out = RunOutput()

    def record(s: CurveState):
        if s.m in samples:
            out.monitors.append((s.m, scalar_monitors(s, lam)))
        for t in wanted.get(s.m, ()):
            out.snapshots.append((t, s))
        if callback is not None:
            callback(s)

    record(state)
    for _ in range(M):
        state, info = step_with_info(state, flow, stability=check)
        if check:
            excess = info.stability_excess(spec.dt)
            out.max_stability_excess = max(out.max_stability_excess, excess)
            if excess > STABILITY_SLACK:
                raise StabilityViolation(
                    f"energy bound violated at step {state.m} (relative excess {excess:.3e})",
                    step=state.m, excess=excess)
        record(state)
    out.final = state
    if out_dir is not None:
        write_outputs(out, spec, Path(out_dir))
    return out


def write_monitors(records, path: Path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MONITOR_COLUMNS)
        for m, rec in records:
            d = rec.as_dict()
            writer.writerow([_fmt(m)] + [_fmt(d[c]) for c in MONITOR_COLUMNS[1:]])


def write_snapshot(state: CurveState, path: Path):
    d = state.x.d
    header = ["rho"] + [f"x{i + 1}" for i in range(d)] + [f"y{i + 1}" for i in range(d)]
    rho = state.partition.node_points
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for j in range(state.partition.J):
            writer.writerow([_fmt(rho[j])] + [_fmt(v) for v in state.x.values[j]]
                            + [_fmt(v) for v in state.y.values[j]])


def write_outputs(out: RunOutput, spec: ScenarioSpec, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "scenario.json").write_text(json.dumps(spec.to_dict(), indent=2) + "\n")
    write_monitors(out.monitors, out_dir / "monitors.csv")
    with open(out_dir / "snapshots.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["file", "requested_t", "step", "t"])
        for k, (t, s) in enumerate(out.snapshots):
            name = f"snapshot_{k:03d}.csv"
            write_snapshot(s, out_dir / name)
            writer.writerow([name, _fmt(t), _fmt(s.m), _fmt(s.t)])


# ---------------------------------------------------------------------------
# command line

class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with exit status 1."""

    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        v = 0
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory")
    common.add_argument("--init", choices=INITIAL_MODES, help="initial-data mode")
    common.add_argument("--seed", type=int, help="accepted for compatibility; runs are deterministic")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")

    parser = _Parser(prog="curveflow",
                     description="Curve diffusion and elastic flow of closed curves.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", parents=[common], help="run a scenario file")
    run.add_argument("scenario", help="JSON scenario file")
    run.add_argument("--snapshot-times", type=_float_list, help="comma-separated times")
    run.add_argument("--sample-every", type=_positive_int, help="monitor interval in steps")

    conv = sub.add_parser("converge", parents=[common], help="convergence study")
    conv.add_argument("--family", choices=("cd", "el"), required=True)
    conv.add_argument("--levels", type=_int_list, required=True, help="e.g. 32,64,128")
    conv.add_argument("--T", type=float, default=1.0, dest="T")
    conv.add_argument("--jobs", type=_positive_int, default=1, help="levels run in parallel")

    sub.add_parser("list-scenarios", help="print the registered curve names")
    return parser


def _cmd_run(args) -> int:
    spec = ScenarioSpec.load(args.scenario)
    overrides = {}
    if args.snapshot_times is not None:
        overrides["snapshot_times"] = args.snapshot_times
    if args.sample_every is not None:
        overrides["sample_every"] = args.sample_every
    if args.init is not None:
        overrides["init"] = args.init
    if overrides:
        spec = ScenarioSpec.from_dict({**spec.to_dict(), **overrides})
    out_dir = args.out or spec.out_dir or Path(args.scenario).stem
    res = run_simulation(spec, out_dir=out_dir)
    last = res.monitors[-1][1]
    print(f"{spec.name}: {res.final.m} steps to t={res.final.t!r}; "
          f"length={last.length!r} ratio={last.ratio!r}; output in {out_dir}")
    return EXIT_OK


def _cmd_converge(args) -> int:
    if any(J < 3 for J in args.levels):
        raise InvalidArgumentError("levels must be >= 3")
    fam = ManufacturedFamily(args.family)
    table = run_convergence(fam, args.levels, T=args.T, init=args.init or "projected",
                            jobs=args.jobs)
    print(table.format())
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    table.write_csv(out_dir / "table.csv")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list-scenarios":
            for name, gen in REGISTRY.items():
                print(f"{name}\t{gen.description}")
            return EXIT_OK
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_converge(args)
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CurveFlowError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
