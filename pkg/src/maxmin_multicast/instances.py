"""Instance files and solve reports.

Instance files are JSON documents::

    {
      "format_version": 1,
      "n_antennas": 2, "n_users": 2, "n_groups": 2,
      "membership": [1, 2],
      "channels": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]],
      "noise_vars": [1, 1],
      "budget": {"kind": "per_antenna", "values": [1, 1]}
    }

``membership`` is 1-based in the file and 0-based once loaded. Every complex
number is a ``[re, im]`` pair. ``budget.kind`` is ``"per_antenna"`` (one value
per antenna) or ``"sum_power"`` (a single value).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .model import BudgetKind, ChannelSet, GroupPartition, PowerBudget, PrecoderSet, ValidationError

FORMAT_VERSION = 1


class InstanceFormatError(ValidationError):
    """Malformed instance file; the message names the offending field."""


@dataclass(frozen=True)
class Instance:
    channels: ChannelSet
    groups: GroupPartition
    budget: PowerBudget

    def __post_init__(self):
        if self.channels.n_users != self.groups.n_users:
            raise ValidationError("channel rows and membership length differ")
        self.budget.check_antennas(self.channels.n_antennas)


def _fail(field: str, msg: str):
    raise InstanceFormatError(f"{field}: {msg}")


def _int_field(doc: dict, name: str) -> int:
    if name not in doc:
        _fail(name, "missing")
    value = doc[name]
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        _fail(name, f"expected a positive integer, got {value!r}")
    return value


def _real(value: Any, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        _fail(field, f"expected a finite number, got {value!r}")
    return float(value)


def _real_list(value: Any, length: int, field: str) -> list:
    if not isinstance(value, list) or len(value) != length:
        _fail(field, f"expected a list of {length} numbers")
    return [_real(v, f"{field}[{j}]") for j, v in enumerate(value)]


def instance_from_dict(doc: dict) -> Instance:
    """Validate a decoded instance document and build the domain objects."""
    if not isinstance(doc, dict):
        _fail("<root>", "expected a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        _fail("format_version", f"expected {FORMAT_VERSION}, got {version!r}")
    n_t = _int_field(doc, "n_antennas")
    n_u = _int_field(doc, "n_users")
    n_g = _int_field(doc, "n_groups")

    members = doc.get("membership")
    if not isinstance(members, list) or len(members) != n_u:
        _fail("membership", f"expected a list of {n_u} group numbers")
    zero_based = []
    for i, g in enumerate(members):
        if isinstance(g, bool) or not isinstance(g, int) or not 1 <= g <= n_g:
            _fail(f"membership[{i}]", f"expected an integer in 1..{n_g}, got {g!r}")
        zero_based.append(g - 1)

    rows = doc.get("channels")
    if not isinstance(rows, list) or len(rows) != n_u:
        _fail("channels", f"expected {n_u} rows")
    h = np.empty((n_u, n_t), dtype=complex)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n_t:
            _fail(f"channels[{i}]", f"expected {n_t} [re, im] pairs")
        for n, pair in enumerate(row):
            re, im = _real_list(pair, 2, f"channels[{i}][{n}]")
            h[i, n] = complex(re, im)

    noise = _real_list(doc.get("noise_vars"), n_u, "noise_vars")

    budget = doc.get("budget")
    if not isinstance(budget, dict):
        _fail("budget", "expected an object with 'kind' and 'values'")
    kind = budget.get("kind")
    values = budget.get("values")
    if kind == "per_antenna":
        pb = ("per_antenna", _real_list(values, n_t, "budget.values"))
    elif kind == "sum_power":
        total = values[0] if isinstance(values, list) and len(values) == 1 else values
        pb = ("sum_power", _real(total, "budget.values"))
    else:
        _fail("budget.kind", f"expected 'per_antenna' or 'sum_power', got {kind!r}")

    try:
        channels = ChannelSet(h, np.asarray(noise))
        groups = GroupPartition(n_g, tuple(zero_based))
        power = (PowerBudget.per_antenna_limits(pb[1]) if pb[0] == "per_antenna"
                 else PowerBudget.sum_power(pb[1]))
        return Instance(channels, groups, power)
    except InstanceFormatError:
        raise
    except ValidationError as exc:
        raise InstanceFormatError(f"invalid instance: {exc}") from exc


def load_instance(path) -> Instance:
    """Read and validate an instance file.

    Raises
    ------
    InstanceFormatError
        With the JSON line and column for syntax errors, or the field path
        for schema errors.
    """
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return instance_from_dict(doc)


def complex_pairs(a: np.ndarray) -> list:
    """Nested lists with every complex entry replaced by ``[re, im]``."""
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def instance_to_dict(inst: Instance) -> dict:
    b = inst.budget
    budget = ({"kind": "per_antenna", "values": b.per_antenna.tolist()} if b.kind is BudgetKind.PER_ANTENNA
              else {"kind": "sum_power", "values": [b.total]})
    return {
        "format_version": FORMAT_VERSION,
        "n_antennas": inst.channels.n_antennas,
        "n_users": inst.channels.n_users,
        "n_groups": inst.groups.n_groups,
        "membership": [g + 1 for g in inst.groups.membership],
        "channels": complex_pairs(inst.channels.channels),
        "noise_vars": inst.channels.noise_vars.tolist(),
        "budget": budget,
    }


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=2) + "\n")


def solve_report(result, config: dict, round_trip: Optional[tuple] = None) -> dict:
    """JSON-ready summary of an end-to-end solve.

    Parameters
    ----------
    result
        ``(relaxed, feasible)`` pair from :func:`solve_algorithm1`.
    config
        Everything needed to rerun the solve (seed, tolerances, ``n_rand``);
        echoed verbatim under ``"config"``.
    round_trip
        Optional ``(t_probe, residuals)`` from :func:`verify_claim1`.
    """
    relaxed, feasible = result
    gap = feasible.t_achieved / relaxed.t_star if relaxed.t_star > 0 else None
    report = {
        "config": config,
        "relaxed": {
            "t_star": relaxed.t_star,
            "upper": relaxed.upper,
            "iterations": relaxed.iterations,
            "rank1": [bool(v) for v in relaxed.per_group_rank1],
            "utilization": relaxed.antenna_utilization.tolist(),
        },
        "feasible": {
            "t_achieved": feasible.t_achieved,
            "gap_ratio": gap,
            "source": feasible.source.value,
            "candidate_index": feasible.candidate_index,
            "group_powers": feasible.group_powers.tolist(),
            "utilization": feasible.antenna_utilization.tolist(),
            "precoders": complex_pairs(feasible.precoders.vectors),
            "diagnostic": feasible.diagnostic,
        },
    }
    if round_trip is not None:
        t_probe, res = round_trip
        report["round_trip"] = {"t_probe": t_probe, "lhs_residual": res.lhs_residual,
                            "rhs_residual": res.rhs_residual}
    return report


def write_json(doc: dict, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")


def precoders_from_pairs(pairs) -> PrecoderSet:
    a = np.asarray(pairs, dtype=float)
    return PrecoderSet(a[..., 0] + 1j * a[..., 1])
