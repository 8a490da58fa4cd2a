"""Grid description, shift factors, scheduled changes and contingencies.

Units are MW and $/MWh everywhere. Reactances are in per-unit and only
enter through the susceptance matrix, so the base MVA never matters for
the shift factors themselves.

Devices are indexed by their position in the case lists. A case has at
most one aggregate generator and one load slot per bus; absent devices are
simply not listed.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import CaseError, DisconnectedNetworkError

PROBABILITY_TOL = 1e-12


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    reactance: float
    max_flow: float
    min_flow: float
    in_service: bool = True


@dataclass(frozen=True)
class Generator:
    bus: int
    pmin: float
    pmax: float
    cost: float = 0.0
    quad_cost: float = 0.0


@dataclass(frozen=True)
class Load:
    bus: int
    mw: float
    stochastic: bool = False
    low: float | None = None
    high: float | None = None


@dataclass(frozen=True)
class StochasticUnit:
    """Non-dispatchable unit; its output enters the balance as negative load."""

    bus: int
    capacity: float
    mw: float = 0.0


@dataclass(frozen=True)
class CaseDelta:
    """Override set shared by scheduled changes and contingencies.

    ``line_limits`` maps line index to ``(min_flow, max_flow)``,
    ``gen_limits`` maps generator index to ``(pmin, pmax)``.
    """

    line_limits: Mapping[int, tuple[float, float]] = field(default_factory=dict)
    gen_limits: Mapping[int, tuple[float, float]] = field(default_factory=dict)
    line_outages: tuple[int, ...] = ()

    def is_empty(self) -> bool:
        return not (self.line_limits or self.gen_limits or self.line_outages)


@dataclass(frozen=True)
class ScheduledChange:
    time: int
    delta: CaseDelta


@dataclass(frozen=True)
class ConstraintSchedule:
    changes: tuple[ScheduledChange, ...] = ()

    def __post_init__(self):
        times = [c.time for c in self.changes]
        if any(t < 0 for t in times):
            raise CaseError("schedule times must be nonnegative")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise CaseError("schedule times must be strictly increasing")


@dataclass(frozen=True)
class Contingency:
    name: str
    probability: float
    delta: CaseDelta


@dataclass(frozen=True)
class ContingencyModel:
    """Configurations 1..K; configuration 0 is the unmodified case."""

    contingencies: tuple[Contingency, ...] = ()

    def __post_init__(self):
        p = [c.probability for c in self.contingencies]
        if any(not math.isfinite(x) or x < 0 for x in p):
            raise CaseError("contingency probabilities must be nonnegative")
        if sum(p) > 1 + PROBABILITY_TOL:
            raise CaseError(f"contingency probabilities sum to {sum(p)} > 1")

    @property
    def n_configs(self) -> int:
        return len(self.contingencies) + 1

    @property
    def probabilities(self) -> np.ndarray:
        p = np.array([c.probability for c in self.contingencies], dtype=float)
        return np.concatenate([[max(0.0, 1.0 - p.sum())], p])

    @classmethod
    def from_probabilities(cls, probs: Sequence[float], deltas: Sequence[CaseDelta],
                           names: Sequence[str] | None = None) -> "ContingencyModel":
        """Build from a full vector (p_0, ..., p_K) that must sum to one."""
        probs = [float(p) for p in probs]
        if len(probs) != len(deltas) + 1:
            raise CaseError("need one probability per configuration including the normal one")
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > PROBABILITY_TOL:
            raise CaseError(f"configuration probabilities must sum to 1, got {sum(probs)}")
        names = names or [f"contingency-{k}" for k in range(1, len(probs))]
        return cls(tuple(Contingency(n, p, d) for n, p, d in zip(names, probs[1:], deltas)))


@dataclass(frozen=True)
class GridCase:
    buses: tuple[int, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    loads: tuple[Load, ...]
    stochastic_units: tuple[StochasticUnit, ...]
    reference_bus: int
    name: str = "case"
    base_mva: float = 100.0
    schedule: ConstraintSchedule = ConstraintSchedule()
    contingencies: ContingencyModel = ContingencyModel()

    def __post_init__(self):
        validate_case(self)

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    def bus_index(self, bus: int) -> int:
        return self.buses.index(bus)

    @property
    def is_quadratic(self) -> bool:
        return any(g.quad_cost > 0 for g in self.generators)

    @property
    def parameter_labels(self) -> list[str]:
        labels = [f"load@{ld.bus}" for ld in self.loads if ld.stochastic]
        labels += [f"wind@{u.bus}" for u in self.stochastic_units]
        return labels

    @property
    def n_parameters(self) -> int:
        return len(self.parameter_labels)

    def parameter_box(self) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = [], []
        for ld in self.loads:
            if ld.stochastic:
                lo.append(0.0 if ld.low is None else ld.low)
                hi.append(2.0 * ld.mw if ld.high is None else ld.high)
        for u in self.stochastic_units:
            lo.append(0.0)
            hi.append(u.capacity)
        return np.array(lo, dtype=float), np.array(hi, dtype=float)

    def nominal_parameters(self) -> np.ndarray:
        vals = [ld.mw for ld in self.loads if ld.stochastic]
        vals += [u.mw for u in self.stochastic_units]
        return np.array(vals, dtype=float)

    def withdrawal_map(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(fixed, P)`` with bus withdrawals ``fixed + P @ theta``.

        Stochastic loads contribute +1 columns; stochastic units -1 columns,
        so every parameter is the physical MW of its device.
        """
        n = self.n_buses
        fixed = np.zeros(n)
        cols = []
        for ld in self.loads:
            b = self.bus_index(ld.bus)
            if ld.stochastic:
                col = np.zeros(n)
                col[b] = 1.0
                cols.append(col)
            else:
                fixed[b] += ld.mw
        for u in self.stochastic_units:
            col = np.zeros(n)
            col[self.bus_index(u.bus)] = -1.0
            cols.append(col)
        P = np.column_stack(cols) if cols else np.zeros((n, 0))
        return fixed, P


def validate_case(case: GridCase) -> None:
    if len(set(case.buses)) != len(case.buses) or not case.buses:
        raise CaseError("bus ids must be unique and nonempty")
    if case.reference_bus not in case.buses:
        raise CaseError(f"reference bus {case.reference_bus} is not a bus")
    buses = set(case.buses)
    for i, ln in enumerate(case.lines):
        if ln.from_bus not in buses or ln.to_bus not in buses or ln.from_bus == ln.to_bus:
            raise CaseError(f"line {i} has invalid endpoints")
        if not (math.isfinite(ln.reactance) and ln.reactance > 0):
            raise CaseError(f"line {i} reactance must be strictly positive")
        if not (ln.min_flow <= 0 <= ln.max_flow):
            raise CaseError(f"line {i} limits must satisfy min <= 0 <= max")
    gen_buses = [g.bus for g in case.generators]
    if len(set(gen_buses)) != len(gen_buses):
        raise CaseError("at most one generator per bus")
    for i, g in enumerate(case.generators):
        if g.bus not in buses:
            raise CaseError(f"generator {i} sits on unknown bus {g.bus}")
        if not g.pmin <= g.pmax:
            raise CaseError(f"generator {i} has pmin > pmax")
        if g.quad_cost < 0:
            raise CaseError(f"generator {i} has negative quadratic cost")
    quads = [g.quad_cost > 0 for g in case.generators]
    if any(quads) and not all(quads):
        raise CaseError("quadratic costs must be positive on every generator or on none")
    for i, ld in enumerate(case.loads):
        if ld.bus not in buses:
            raise CaseError(f"load {i} sits on unknown bus {ld.bus}")
        if ld.stochastic and ld.low is not None and ld.high is not None and ld.low > ld.high:
            raise CaseError(f"load {i} has an empty parameter range")
    for i, u in enumerate(case.stochastic_units):
        if u.bus not in buses or u.capacity < 0:
            raise CaseError(f"stochastic unit {i} is invalid")
    _check_connected(case)


def _check_connected(case: GridCase) -> None:
    n = case.n_buses
    if n == 1:
        return
    rows, cols = [], []
    for ln in case.lines:
        if ln.in_service:
            rows.append(case.bus_index(ln.from_bus))
            cols.append(case.bus_index(ln.to_bus))
    adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    n_comp, _ = connected_components(adj, directed=False)
    if n_comp != 1:
        raise DisconnectedNetworkError(f"network splits into {n_comp} islands")


def compute_shift_factors(case: GridCase) -> np.ndarray:
    """Shift factor matrix, lines x buses, withdrawal at the reference bus.

    Out-of-service lines get a zero row.
    """
    _check_connected(case)
    n = case.n_buses
    active = [i for i, ln in enumerate(case.lines) if ln.in_service]
    inc = np.zeros((len(active), n))
    for r, i in enumerate(active):
        ln = case.lines[i]
        inc[r, case.bus_index(ln.from_bus)] = 1.0
        inc[r, case.bus_index(ln.to_bus)] = -1.0
    susc = np.array([1.0 / case.lines[i].reactance for i in active])
    bbus = inc.T @ (susc[:, None] * inc)
    ref = case.bus_index(case.reference_bus)
    keep = [b for b in range(n) if b != ref]
    reduced = bbus[np.ix_(keep, keep)]
    if n > 1 and np.linalg.cond(reduced) > 1e12:
        raise DisconnectedNetworkError("singular susceptance matrix")
    angles = np.zeros((n, n))
    if keep:
        angles[np.ix_(keep, keep)] = np.linalg.inv(reduced)
    S = np.zeros((len(case.lines), n))
    S[active] = (susc[:, None] * inc) @ angles
    S[:, ref] = 0.0
    return S


def apply_delta(case: GridCase, delta: CaseDelta) -> GridCase:
    lines = list(case.lines)
    for i, (lo, hi) in delta.line_limits.items():
        _check_index(i, len(lines), "line")
        lines[i] = replace(lines[i], min_flow=float(lo), max_flow=float(hi))
    for i in delta.line_outages:
        _check_index(i, len(lines), "line")
        lines[i] = replace(lines[i], in_service=False)
    gens = list(case.generators)
    for i, (lo, hi) in delta.gen_limits.items():
        _check_index(i, len(gens), "generator")
        gens[i] = replace(gens[i], pmin=float(lo), pmax=float(hi))
    return replace(case, lines=tuple(lines), generators=tuple(gens))


def _check_index(i: int, n: int, what: str) -> None:
    if not 0 <= i < n:
        raise CaseError(f"{what} index {i} out of range")


@dataclass(frozen=True)
class SystemSnapshot:
    """The case as it stands at one time index, with its shift factors."""

    case: GridCase
    S: np.ndarray
    time: int = 0

    @property
    def line_max(self) -> np.ndarray:
        return np.array([ln.max_flow for ln in self.case.lines])

    @property
    def line_min(self) -> np.ndarray:
        return np.array([ln.min_flow for ln in self.case.lines])

    @property
    def in_service(self) -> np.ndarray:
        return np.array([ln.in_service for ln in self.case.lines], dtype=bool)

    @property
    def gen_max(self) -> np.ndarray:
        return np.array([g.pmax for g in self.case.generators])

    @property
    def gen_min(self) -> np.ndarray:
        return np.array([g.pmin for g in self.case.generators])

    @property
    def linear_cost(self) -> np.ndarray:
        return np.array([g.cost for g in self.case.generators])

    @property
    def quad_cost(self) -> np.ndarray | None:
        if not self.case.is_quadratic:
            return None
        return np.array([g.quad_cost for g in self.case.generators])

    def gen_incidence(self) -> np.ndarray:
        """Buses x generators 0/1 matrix."""
        C = np.zeros((self.case.n_buses, len(self.case.generators)))
        for j, g in enumerate(self.case.generators):
            C[self.case.bus_index(g.bus), j] = 1.0
        return C


def make_snapshot(case: GridCase, time: int = 0) -> SystemSnapshot:
    S = compute_shift_factors(case)
    S.setflags(write=False)
    return SystemSnapshot(case, S, time)


def snapshot_at(case: GridCase, schedule: ConstraintSchedule | None = None,
                t: int = 0) -> SystemSnapshot:
    """Apply every scheduled change with time <= t, in order."""
    if t < 0:
        raise CaseError("time index must be nonnegative")
    schedule = case.schedule if schedule is None else schedule
    current = case
    for change in schedule.changes:
        if change.time > t:
            break
        current = apply_delta(current, change.delta)
    return make_snapshot(current, t)


def apply_contingency(case: GridCase, model: ContingencyModel, k: int) -> GridCase:
    if not 0 <= k < model.n_configs:
        raise CaseError(f"configuration {k} out of range 0..{model.n_configs - 1}")
    if k == 0:
        return case
    return apply_delta(case, model.contingencies[k - 1].delta)


# --- JSON case format -------------------------------------------------------

def _delta_from_json(doc: Mapping[str, Any]) -> CaseDelta:
    line_limits = {}
    for key, val in doc.get("line_limits", {}).items():
        lo, hi = (-float(val), float(val)) if np.isscalar(val) else (float(val[0]), float(val[1]))
        line_limits[int(key)] = (lo, hi)
    gen_limits = {int(k): (float(v[0]), float(v[1])) for k, v in doc.get("gen_limits", {}).items()}
    outages = tuple(int(i) for i in doc.get("line_outages", []))
    return CaseDelta(line_limits, gen_limits, outages)


def _delta_to_json(delta: CaseDelta) -> dict:
    out: dict[str, Any] = {}
    if delta.line_limits:
        out["line_limits"] = {str(k): [v[0], v[1]] for k, v in sorted(delta.line_limits.items())}
    if delta.gen_limits:
        out["gen_limits"] = {str(k): [v[0], v[1]] for k, v in sorted(delta.gen_limits.items())}
    if delta.line_outages:
        out["line_outages"] = sorted(delta.line_outages)
    return out


def _num(doc: Mapping[str, Any], key: str, default=None) -> float:
    if key not in doc:
        if default is None:
            raise CaseError(f"missing field {key!r}")
        return default
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise CaseError(f"field {key!r} must be a finite number")
    return float(val)


def case_from_dict(doc: Mapping[str, Any]) -> GridCase:
    try:
        return _case_from_dict(doc)
    except (KeyError, TypeError, IndexError) as exc:
        raise CaseError(f"schema violation: {exc}") from exc


def _case_from_dict(doc: Mapping[str, Any]) -> GridCase:
    for key in ("buses", "lines", "generators", "reference_bus"):
        if key not in doc:
            raise CaseError(f"case document lacks {key!r}")
    buses = tuple(int(b["id"]) if isinstance(b, Mapping) else int(b) for b in doc["buses"])
    lines = []
    for ln in doc["lines"]:
        if "limit" in ln:
            hi = _num(ln, "limit")
            lo = -hi
        else:
            hi, lo = _num(ln, "max_flow"), _num(ln, "min_flow")
        lines.append(Line(int(ln["from"]), int(ln["to"]), _num(ln, "x"), hi, lo,
                          bool(ln.get("in_service", True))))
    gens = [Generator(int(g["bus"]), _num(g, "pmin", 0.0), _num(g, "pmax"),
                      _num(g, "cost", 0.0), _num(g, "quad_cost", 0.0))
            for g in doc["generators"]]
    loads = []
    for ld in doc.get("loads", []):
        rng = ld.get("range")
        loads.append(Load(int(ld["bus"]), _num(ld, "mw"), bool(ld.get("stochastic", False)),
                          None if rng is None else float(rng[0]),
                          None if rng is None else float(rng[1])))
    units = [StochasticUnit(int(u["bus"]), _num(u, "capacity"), _num(u, "mw", 0.0))
             for u in doc.get("stochastic_units", [])]
    schedule = ConstraintSchedule(tuple(
        ScheduledChange(int(c["time"]), _delta_from_json(c)) for c in doc.get("schedule", [])))
    contingencies = ContingencyModel(tuple(
        Contingency(str(c.get("name", f"contingency-{i + 1}")), _num(c, "probability"),
                    _delta_from_json(c))
        for i, c in enumerate(doc.get("contingencies", []))))
    return GridCase(buses, tuple(lines), tuple(gens), tuple(loads), tuple(units),
                    int(doc["reference_bus"]), str(doc.get("name", "case")),
                    _num(doc, "base_mva", 100.0), schedule, contingencies)


def case_to_dict(case: GridCase) -> dict:
    doc: dict[str, Any] = {
        "name": case.name,
        "base_mva": case.base_mva,
        "buses": list(case.buses),
        "reference_bus": case.reference_bus,
        "lines": [],
        "generators": [],
        "loads": [],
        "stochastic_units": [],
    }
    for ln in case.lines:
        entry: dict[str, Any] = {"from": ln.from_bus, "to": ln.to_bus, "x": ln.reactance,
                                 "max_flow": ln.max_flow, "min_flow": ln.min_flow}
        if not ln.in_service:
            entry["in_service"] = False
        doc["lines"].append(entry)
    for g in case.generators:
        entry = {"bus": g.bus, "pmin": g.pmin, "pmax": g.pmax, "cost": g.cost}
        if g.quad_cost:
            entry["quad_cost"] = g.quad_cost
        doc["generators"].append(entry)
    for ld in case.loads:
        entry = {"bus": ld.bus, "mw": ld.mw}
        if ld.stochastic:
            entry["stochastic"] = True
            if ld.low is not None and ld.high is not None:
                entry["range"] = [ld.low, ld.high]
        doc["loads"].append(entry)
    for u in case.stochastic_units:
        doc["stochastic_units"].append({"bus": u.bus, "capacity": u.capacity, "mw": u.mw})
    if case.schedule.changes:
        doc["schedule"] = [{"time": c.time, **_delta_to_json(c.delta)}
                           for c in case.schedule.changes]
    if case.contingencies.contingencies:
        doc["contingencies"] = [{"name": c.name, "probability": c.probability,
                                 **_delta_to_json(c.delta)}
                                for c in case.contingencies.contingencies]
    return doc


def load_case(text: str) -> GridCase:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseError(f"case is not valid JSON: {exc}") from exc
    if not isinstance(doc, Mapping):
        raise CaseError("case document must be a JSON object")
    return case_from_dict(doc)


def dump_case(case: GridCase) -> str:
    return json.dumps(case_to_dict(case), indent=2, sort_keys=True) + "\n"
