"""JSON experiment configuration.

Rates in files are Mega-ebits/second and ``alpha`` is in Mega-events/second;
both are converted to plain per-second units on load.  Recognised keys::

    k                 number of links (optional when rates or links are given)
    n                 entanglement size, default 2
    mu                homogeneous generation rate
    rates             per-link generation rates
    links             per-link fibre description: length_km, attenuation_db_per_km,
                      efficiency_c, slot_tau_seconds (rate = c * eta / tau)
    buffer            integer >= 1 or "inf" (default)
    q                 measurement success probability, default 1
    alpha             decoherence rate, default 0
    p                 per-slot success probability (scalar or list) for the slotted model
    slot_tau_seconds  slot length of the slotted model, default 1
    model             auto | ctmc | dtmc | npartite

When only ``k`` and ``p`` are given the rates default to ``p / slot_tau_seconds``,
the continuous model matched to the slotted one.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

from .errors import InvalidParameterError
from .model import INF, LinkConfig, SwitchConfig

MEGA = 1e6
MODELS = ("auto", "ctmc", "dtmc", "npartite")
_KNOWN = {"k", "n", "mu", "rates", "links", "buffer", "q", "alpha", "p", "slot_tau_seconds", "model"}


def parse_buffer(value) -> float:
    if isinstance(value, str):
        if value.strip().lower() == "inf":
            return INF
        try:
            value = int(value)
        except ValueError:
            raise InvalidParameterError(f"buffer must be an integer or 'inf', got {value!r}") from None
    if isinstance(value, float) and math.isinf(value):
        return INF
    if isinstance(value, bool) or int(value) != value:
        raise InvalidParameterError(f"buffer must be an integer or 'inf', got {value!r}")
    return int(value)


def format_buffer(buffer) -> str:
    return "inf" if buffer == INF else str(int(buffer))


def config_from_dict(data: dict) -> tuple[SwitchConfig, str]:
    """Build ``(SwitchConfig, model)`` from a parsed JSON object."""
    if not isinstance(data, dict):
        raise InvalidParameterError("config must be a JSON object")
    unknown = set(data) - _KNOWN
    if unknown:
        raise InvalidParameterError(f"unknown config keys: {sorted(unknown)}")
    model = data.get("model", "auto")
    if model not in MODELS:
        raise InvalidParameterError(f"model must be one of {MODELS}, got {model!r}")

    tau = float(data.get("slot_tau_seconds", 1.0))
    p = data.get("p")
    sources = [key for key in ("mu", "rates", "links") if key in data]
    if len(sources) > 1:
        raise InvalidParameterError(f"give only one of mu, rates, links (got {sources})")

    k = data.get("k")
    if "links" in data:
        links = tuple(_link_from_dict(entry) for entry in data["links"])
    elif "rates" in data:
        links = tuple(LinkConfig(float(r) * MEGA) for r in data["rates"])
    elif "mu" in data:
        if k is None:
            raise InvalidParameterError("'mu' needs 'k'")
        links = tuple(LinkConfig(float(data["mu"]) * MEGA) for _ in range(int(k)))
    elif p is not None and k is not None:
        probs = [p] * int(k) if isinstance(p, (int, float)) else list(p)
        links = tuple(LinkConfig(float(x) / tau) for x in probs)
    else:
        raise InvalidParameterError("config needs one of mu (with k), rates, links, or k with p")
    if k is not None and int(k) != len(links):
        raise InvalidParameterError(f"k={k} disagrees with {len(links)} link entries")

    try:
        config = SwitchConfig(
            links,
            n=int(data.get("n", 2)),
            buffer=parse_buffer(data.get("buffer", "inf")),
            q=float(data.get("q", 1.0)),
            alpha=float(data.get("alpha", 0.0)) * MEGA,
            success_prob_p=p,
            slot_tau=tau,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidParameterError):
            raise
        raise InvalidParameterError(str(exc)) from exc
    return config, model


def _link_from_dict(entry) -> LinkConfig:
    if isinstance(entry, (int, float)):
        return LinkConfig(float(entry) * MEGA)
    if "rate_mu" in entry:
        return LinkConfig(float(entry["rate_mu"]) * MEGA)
    return LinkConfig.from_length(
        float(entry["length_km"]),
        float(entry.get("attenuation_db_per_km", 0.2)),
        float(entry.get("efficiency_c", 0.1)),
        float(entry.get("slot_tau_seconds", 1e-9)),
    )


def load_config(path) -> tuple[SwitchConfig, str]:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InvalidParameterError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidParameterError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def config_to_dict(config: SwitchConfig, model: str = "auto") -> dict:
    """Inverse of :func:`config_from_dict` (rates in Mega units)."""
    out = {
        "n": config.n,
        "rates": [r / MEGA for r in config.rates],
        "buffer": format_buffer(config.buffer),
        "q": config.q,
        "alpha": config.alpha / MEGA,
        "slot_tau_seconds": config.slot_tau,
        "model": model,
    }
    if config.success_prob_p is not None:
        out["p"] = list(config.success_prob_p)
    return out
