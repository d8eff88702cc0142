"""Command-line front end: analytics, simulation, comparison, sweeps and link budgets as CSV.

Exit codes: 0 success, 2 invalid input, 3 unstable configuration without
``--allow-unstable``, 4 numeric or internal failure.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import math
import sys
import warnings
from typing import Iterable

import numpy as np

from . import ctmc, dtmc, npartite
from .config import MEGA, format_buffer, load_config, parse_buffer
from .errors import (
    ConjecturedStabilityWarning,
    InstabilityError,
    InvalidParameterError,
    NumericError,
    ResourceError,
    SwitchError,
    UnsupportedModelError,
)
from .model import LinkConfig, PerformanceMetrics, StabilityBasis, StabilityReport, SwitchConfig, check_stability
from .model import link_rate_from_length, transmissivity
from .sim import SimParams, replicate

EXIT_OK, EXIT_INVALID, EXIT_UNSTABLE, EXIT_NUMERIC = 0, 2, 3, 4
SWEEP_AXES = ("k", "n", "B", "alpha", "p", "mu_scale", "q")
DEFAULT_MAX_GRID = 10_000
DEFAULT_EVENTS = 2_000_000
DEFAULT_SLOTS = 1_000_000

PROVENANCE = ["model", "k", "n", "rates_mega", "buffer", "q", "alpha_mega", "p", "slot_tau_seconds"]
ANALYZE_FIELDS = PROVENANCE + [
    "status", "stable", "stability_basis", "capacity_mega", "expected_queue",
    "per_user_rate_mega", "per_link_queue", "notes",
]
SIM_FIELDS = PROVENANCE + [
    "status", "engine", "seed", "horizon", "replications", "batches",
    "capacity_mega", "capacity_ci_mega", "expected_queue", "expected_queue_ci", "per_user_rate_mega",
    "generated", "consumed", "drops", "decohered", "stored_at_end",
    "measurements_attempted", "measurements_succeeded", "max_occupancy", "max_nonempty",
]
COMPARE_FIELDS = PROVENANCE + [
    "status", "engine", "seed", "horizon", "replications",
    "analytic_capacity_mega", "sim_capacity_mega", "capacity_ci_mega", "rel_err_capacity",
    "analytic_expected_queue", "sim_expected_queue", "expected_queue_ci", "rel_err_expected_queue",
    "within_ci",
]
DTMC_VS_CTMC_FIELDS = ["k", "p_min", "p_max", "points", "max_rel_err", "argmax_p"]
LINK_FIELDS = ["length_km", "attenuation_db_per_km", "loss_db", "eta", "mu_mega"]


def _num(x) -> str:
    return repr(float(x))


def _join(values: Iterable[float], scale: float = 1.0) -> str:
    return ";".join(_num(v / scale) for v in values)


def provenance(config: SwitchConfig, model: str) -> dict:
    return {
        "model": model,
        "k": config.k,
        "n": config.n,
        "rates_mega": _join(config.rates, MEGA),
        "buffer": format_buffer(config.buffer),
        "q": _num(config.q),
        "alpha_mega": _num(config.alpha / MEGA),
        "p": "" if config.success_prob_p is None else _join(config.success_prob_p),
        "slot_tau_seconds": _num(config.slot_tau),
    }


# ---- model dispatch ---------------------------------------------------------

def resolve_model(config: SwitchConfig, model: str) -> str:
    if model == "auto":
        return "ctmc" if config.n == 2 else "npartite"
    return model


def _homogeneous_p(config: SwitchConfig) -> float:
    p = config.success_prob_p
    if p is None:
        raise InvalidParameterError("the slotted model needs p")
    if len(set(p)) != 1:
        raise UnsupportedModelError("slotted analytics cover homogeneous p only")
    return p[0]


def analyze_config(config: SwitchConfig, model: str, tol: float) -> tuple[PerformanceMetrics, StabilityReport]:
    """Analytic metrics in per-second units; raises :class:`InstabilityError` for unstable chains."""
    model = resolve_model(config, model)
    if model == "ctmc":
        report = check_stability(config)
        if not report.stable:
            raise InstabilityError(f"unstable: loads {report.loads}")
        return ctmc.metrics_bipartite(config, tol), report
    if model == "dtmc":
        if config.n != 2 or config.alpha != 0 or config.finite_buffer:
            raise UnsupportedModelError("slotted analytics need n = 2, alpha = 0 and an infinite buffer")
        report = StabilityReport(True, StabilityBasis.PROVEN, (), "slotted chain is positive recurrent for k >= 3")
        return dtmc.dtmc_metrics(_homogeneous_p(config), config.k, config.q, config.slot_tau), report
    if model == "npartite":
        if not config.is_homogeneous or config.alpha != 0 or config.finite_buffer:
            raise UnsupportedModelError("n-partite analytics need homogeneous rates, alpha = 0 and an infinite buffer")
        report = check_stability(config)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConjecturedStabilityWarning)
            metrics = npartite.npartite_metrics(config.k, config.n, config.rates[0], config.q)
        return metrics, report
    raise InvalidParameterError(f"unknown model {model!r}")


# ---- sweeps -----------------------------------------------------------------

def parse_sweep(items: list[str] | None) -> list[tuple[str, list[str]]]:
    axes = []
    for item in items or []:
        name, sep, values = item.partition("=")
        name = name.strip()
        if not sep or not values.strip():
            raise InvalidParameterError(f"sweep must look like AXIS=v1,v2,... (got {item!r})")
        if name == "buffer":
            name = "B"
        if name not in SWEEP_AXES:
            raise InvalidParameterError(f"unknown sweep axis {name!r}; choose from {SWEEP_AXES}")
        if any(name == a for a, _ in axes):
            raise InvalidParameterError(f"sweep axis {name!r} given twice")
        axes.append((name, [v.strip() for v in values.split(",") if v.strip()]))
    return axes


def apply_axis(config: SwitchConfig, axis: str, raw: str) -> SwitchConfig:
    try:
        if axis == "k":
            k = int(raw)
            if k < 2:
                raise InvalidParameterError(f"k must be >= 2, got {k}")
            # heterogeneous rates (and p) are tiled cyclically to the new size
            links = tuple(config.links[i % config.k] for i in range(k))
            p = config.success_prob_p
            p = None if p is None else tuple(p[i % len(p)] for i in range(k))
            return config.replace(links=links, success_prob_p=p)
        if axis == "n":
            return config.replace(n=int(raw))
        if axis == "B":
            return config.replace(buffer=parse_buffer(raw))
        if axis == "alpha":
            return config.replace(alpha=float(raw) * MEGA)
        if axis == "q":
            return config.replace(q=float(raw))
        if axis == "mu_scale":
            factor = float(raw)
            return config.replace(links=tuple(LinkConfig(r * factor) for r in config.rates))
        if axis == "p":
            # the matched continuous model follows p: mu = p / tau
            p = float(raw)
            return config.replace(
                success_prob_p=(p,) * config.k,
                links=tuple(LinkConfig(p / config.slot_tau) for _ in range(config.k)),
            )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SwitchError):
            raise
        raise InvalidParameterError(f"bad value {raw!r} for sweep axis {axis}: {exc}") from exc
    raise InvalidParameterError(f"unknown sweep axis {axis!r}")


def expand_grid(config: SwitchConfig, axes, max_grid: int) -> list[SwitchConfig]:
    size = math.prod(len(values) for _, values in axes) if axes else 1
    if size > max_grid:
        raise ResourceError(f"sweep grid has {size} points, above the cap of {max_grid}")
    grid = []
    for combo in itertools.product(*(values for _, values in axes)):
        point = config
        for (axis, _), raw in zip(axes, combo):
            point = apply_axis(point, axis, raw)
        grid.append(point)
    return grid


# ---- commands ---------------------------------------------------------------

def cmd_analyze(configs, model, args) -> tuple[list[dict], bool]:
    rows, unstable = [], False
    for config in configs:
        row = provenance(config, resolve_model(config, model))
        try:
            metrics, report = analyze_config(config, model, args.tol)
        except InstabilityError as exc:
            unstable = True
            row.update(status="UNSTABLE", stable="false", stability_basis=check_stability(config).basis.value,
                       notes=str(exc))
            rows.append(row)
            continue
        row.update(
            status="OK",
            stable=str(report.stable).lower(),
            stability_basis=report.basis.value,
            capacity_mega=_num(metrics.capacity / MEGA),
            expected_queue=_num(metrics.expected_queue),
            per_user_rate_mega=_join(metrics.per_user_rate, MEGA),
            per_link_queue=_join(metrics.per_link_queue),
            notes="; ".join(metrics.notes),
        )
        rows.append(row)
    return rows, unstable


def _engine(config: SwitchConfig, model: str) -> str:
    return "slotted" if resolve_model(config, model) == "dtmc" else "continuous"


def _sim_params(config: SwitchConfig, engine: str, args) -> SimParams:
    if args.horizon is not None:
        horizon = args.horizon
    elif engine == "slotted":
        horizon = DEFAULT_SLOTS
    else:
        horizon = DEFAULT_EVENTS / config.gamma
    return SimParams(config, horizon, args.seed, args.warmup, args.batches, check_invariants=True)


def _unstable_for_sim(config: SwitchConfig, model: str) -> bool:
    return resolve_model(config, model) != "dtmc" and not check_stability(config).stable


def cmd_simulate(configs, model, args) -> tuple[list[dict], bool]:
    rows, unstable = [], False
    for config in configs:
        engine = _engine(config, model)
        row = provenance(config, resolve_model(config, model))
        row.update(engine=engine, seed=args.seed, replications=args.replications, batches=args.batches)
        if _unstable_for_sim(config, model) and not args.allow_unstable:
            unstable = True
            row.update(status="UNSTABLE")
            rows.append(row)
            continue
        params = _sim_params(config, engine, args)
        st = replicate(params, args.replications, engine)
        row.update(
            status="OK",
            horizon=_num(params.horizon),
            capacity_mega=_num(st.capacity_est / MEGA),
            capacity_ci_mega=_num(st.capacity_ci / MEGA),
            expected_queue=_num(st.eq_est),
            expected_queue_ci=_num(st.eq_ci),
            per_user_rate_mega=_join(st.per_user_rate_est, MEGA),
            generated=st.generated,
            consumed=st.consumed,
            drops=st.drops,
            decohered=st.decohered,
            stored_at_end=st.stored_at_end,
            measurements_attempted=st.measurements_attempted,
            measurements_succeeded=st.measurements_succeeded,
            max_occupancy=st.max_occupancy,
            max_nonempty=st.max_nonempty,
        )
        rows.append(row)
    return rows, unstable


def _rel_err(analytic: float, estimate: float) -> float:
    diff = abs(analytic - estimate)
    return diff / abs(analytic) if analytic != 0 else diff


def cmd_compare(configs, model, args) -> tuple[list[dict], bool]:
    if model == "dtmc-vs-ctmc":
        return cmd_dtmc_vs_ctmc(configs, args), False
    rows, unstable = [], False
    for config in configs:
        engine = _engine(config, model)
        row = provenance(config, resolve_model(config, model))
        row.update(engine=engine, seed=args.seed, replications=args.replications)
        try:
            metrics, _ = analyze_config(config, model, args.tol)
        except InstabilityError:
            unstable = True
            row.update(status="UNSTABLE")
            rows.append(row)
            continue
        params = _sim_params(config, engine, args)
        st = replicate(params, args.replications, engine)
        if replicate(params, args.replications, engine) != st:
            raise NumericError("simulation is not deterministic: rerun with the same seed differs")
        within = (abs(metrics.capacity - st.capacity_est) <= 3 * st.capacity_ci
                  and abs(metrics.expected_queue - st.eq_est) <= 3 * st.eq_ci)
        row.update(
            status="OK",
            horizon=_num(params.horizon),
            analytic_capacity_mega=_num(metrics.capacity / MEGA),
            sim_capacity_mega=_num(st.capacity_est / MEGA),
            capacity_ci_mega=_num(st.capacity_ci / MEGA),
            rel_err_capacity=_num(_rel_err(metrics.capacity, st.capacity_est)),
            analytic_expected_queue=_num(metrics.expected_queue),
            sim_expected_queue=_num(st.eq_est),
            expected_queue_ci=_num(st.eq_ci),
            rel_err_expected_queue=_num(_rel_err(metrics.expected_queue, st.eq_est)),
            within_ci=str(within).lower(),
        )
        rows.append(row)
    return rows, unstable


def parse_p_grid(text: str) -> np.ndarray:
    try:
        lo, hi, num = text.split(":")
        grid = np.linspace(float(lo), float(hi), int(num))
    except ValueError as exc:
        raise InvalidParameterError(f"--p-grid must look like START:STOP:NUM (got {text!r})") from exc
    if len(grid) == 0 or grid.min() <= 0 or grid.max() >= 1:
        raise InvalidParameterError("--p-grid values must lie in (0, 1)")
    return grid


def cmd_dtmc_vs_ctmc(configs, args) -> list[dict]:
    grid = parse_p_grid(args.p_grid)
    rows = []
    for k in dict.fromkeys(config.k for config in configs):
        curve = dtmc.rel_err_curve(k, grid)
        i = int(np.argmax(curve))
        rows.append({
            "k": k,
            "p_min": _num(grid[0]),
            "p_max": _num(grid[-1]),
            "points": len(grid),
            "max_rel_err": _num(curve[i]),
            "argmax_p": _num(grid[i]),
        })
    return rows


def cmd_link_budget(args) -> list[dict]:
    if not args.lengths:
        raise InvalidParameterError("link-budget needs --lengths")
    rows = []
    for raw in args.lengths.split(","):
        length = float(raw)
        mu = link_rate_from_length(length, args.loss, args.efficiency, args.tau)
        rows.append({
            "length_km": _num(length),
            "attenuation_db_per_km": _num(args.loss),
            "loss_db": _num(args.loss * length),
            "eta": _num(transmissivity(length, args.loss)),
            "mu_mega": _num(mu / MEGA),
        })
    return rows


# ---- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qswitch", description=__doc__.splitlines()[0])
    parser.add_argument("--mode", required=True, choices=["analyze", "simulate", "compare", "sweep", "link-budget"])
    parser.add_argument("--config", help="JSON switch configuration")
    parser.add_argument("--model", choices=["auto", "ctmc", "dtmc", "npartite", "dtmc-vs-ctmc"],
                        help="model family (overrides the config's 'model' key)")
    parser.add_argument("--sweep", action="append", metavar="AXIS=v1,v2,...",
                        help=f"grid axis, repeatable; axes: {', '.join(SWEEP_AXES)}")
    parser.add_argument("--max-grid", type=int, default=DEFAULT_MAX_GRID)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--horizon", type=float,
                        help="simulated seconds (continuous) or slots (slotted); default about 2e6 events or 1e6 slots")
    parser.add_argument("--replications", type=int, default=1)
    parser.add_argument("--batches", type=int, default=20)
    parser.add_argument("--warmup", type=float, default=0.1, help="warmup fraction of the horizon")
    parser.add_argument("--out", help="CSV output path (default: stdout)")
    parser.add_argument("--allow-unstable", action="store_true")
    parser.add_argument("--tol", type=float, default=1e-13, help="series truncation tolerance")
    parser.add_argument("--p-grid", default="0.001:0.999:999", help="START:STOP:NUM for dtmc-vs-ctmc")
    parser.add_argument("--lengths", help="comma-separated link lengths in km (link-budget)")
    parser.add_argument("--loss", type=float, default=0.2, help="fibre attenuation, dB/km")
    parser.add_argument("--efficiency", type=float, default=0.1, help="per-attempt efficiency c")
    parser.add_argument("--tau", type=float, default=1e-9, help="attempt period, seconds")
    return parser


def write_csv(rows: list[dict], fields: list[str], path: str | None) -> None:
    def emit(handle):
        writer = csv.DictWriter(handle, fieldnames=fields, extrasaction="raise", restval="")
        writer.writeheader()
        writer.writerows(rows)

    if path:
        with open(path, "w", newline="") as handle:
            emit(handle)
    else:
        emit(sys.stdout)


def run(args) -> int:
    if args.mode == "link-budget":
        write_csv(cmd_link_budget(args), LINK_FIELDS, args.out)
        return EXIT_OK
    if not args.config:
        raise InvalidParameterError(f"--mode {args.mode} needs --config")
    config, model = load_config(args.config)
    model = args.model or model
    if model == "dtmc-vs-ctmc" and args.mode != "compare":
        raise InvalidParameterError("--model dtmc-vs-ctmc only applies to --mode compare")
    configs = expand_grid(config, parse_sweep(args.sweep), args.max_grid)

    if args.mode in ("analyze", "sweep"):
        rows, unstable = cmd_analyze(configs, model, args)
        fields = ANALYZE_FIELDS
    elif args.mode == "simulate":
        rows, unstable = cmd_simulate(configs, model, args)
        fields = SIM_FIELDS
    else:
        rows, unstable = cmd_compare(configs, model, args)
        fields = DTMC_VS_CTMC_FIELDS if model == "dtmc-vs-ctmc" else COMPARE_FIELDS
    write_csv(rows, fields, args.out)
    return EXIT_UNSTABLE if unstable and not args.allow_unstable else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except InstabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ResourceError, KeyError, TypeError, ValueError) as exc:
        # InvalidParameterError and the model-choice errors are ValueErrors
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SwitchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
