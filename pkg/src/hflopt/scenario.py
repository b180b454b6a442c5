"""Deployment model: users, edge servers, channels and the user-to-edge partition.

All stored quantities are SI (Hz, W, bits, s, J). dB/dBm values only appear in
:class:`GeneratorConfig` and are converted once, at generation time.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError, SchemaError

SCENARIO_SCHEMA = "hflopt.scenario"
SCENARIO_VERSION = 1

SCENARIO_UNITS = {
    "total_bandwidth": "Hz",
    "importance_weight": "J/s",
    "model_size": "bit",
    "capacitance_coeff": "J*s^2/cycle^3",
    "noise_density": "W/Hz",
    "samples": "count",
    "cycles_per_sample": "cycle",
    "f_max": "Hz",
    "p_max": "W",
    "position": "m",
    "cloud_rate": "bit/s",
    "cloud_power": "W",
    "bandwidth": "Hz",
    "gains": "linear",
}

# (min samples, max samples, model size in KB); KB = 1024 bytes.
DATASETS = {
    "fashionmnist": (1000, 1400, 446),
    "cifar10": (800, 1200, 523),
    "imagenette": (150, 220, 881),
}


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def path_loss_db(distance_km):
    """Macro-cell path loss ``128.1 + 37.6 log10(d)`` with ``d`` in km."""
    return 128.1 + 37.6 * np.log10(distance_km)


def noise_density_watt_per_hz(value_dbm: float, unit: str = "dBm/Hz") -> float:
    """Convert a noise PSD given in dBm per ``Hz`` or per ``MHz`` to W/Hz."""
    watts = float(dbm_to_watt(value_dbm))
    if unit == "dBm/Hz":
        return watts
    if unit == "dBm/MHz":
        return watts / 1e6
    raise InvalidInputError(f"unknown noise unit {unit!r}")


@dataclass(frozen=True)
class SystemParams:
    total_bandwidth: float
    importance_weight: float
    global_iters: int
    edge_iters: int
    local_iters: int
    model_size: float
    capacitance_coeff: float
    noise_density: float

    def __post_init__(self):
        for name in ("total_bandwidth", "model_size", "capacitance_coeff", "noise_density"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise InvalidInputError(f"{name} must be positive and finite, got {value!r}")
        # lambda = 0 is allowed: it reduces the objective to pure energy.
        if not (self.importance_weight >= 0 and math.isfinite(self.importance_weight)):
            raise InvalidInputError(f"importance_weight must be >= 0, got {self.importance_weight!r}")
        for name in ("global_iters", "edge_iters", "local_iters"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidInputError(f"{name} must be an integer >= 1, got {value!r}")


@dataclass(frozen=True)
class User:
    id: int
    samples: int
    cycles_per_sample: float
    f_max: float
    p_max: float
    position: tuple[float, float]

    def __post_init__(self):
        if int(self.samples) != self.samples or self.samples < 1:
            raise InvalidInputError(f"user {self.id}: samples must be an integer >= 1")
        if not self.cycles_per_sample > 0:
            raise InvalidInputError(f"user {self.id}: cycles_per_sample must be positive")
        if not self.f_max > 0:
            raise InvalidInputError(f"user {self.id}: f_max must be positive")
        if not self.p_max > 0:
            raise InvalidInputError(f"user {self.id}: p_max must be positive")


@dataclass(frozen=True)
class EdgeServer:
    id: int
    position: tuple[float, float]
    cloud_rate: float
    cloud_power: float
    bandwidth: float = 0.0  # drawn per-edge budget, informational only

    def __post_init__(self):
        if not self.cloud_rate > 0:
            raise InvalidInputError(f"edge {self.id}: cloud_rate must be positive")
        if not self.cloud_power >= 0:
            raise InvalidInputError(f"edge {self.id}: cloud_power must be >= 0")


@dataclass(frozen=True, eq=False)
class Scenario:
    params: SystemParams
    users: tuple[User, ...]
    edges: tuple[EdgeServer, ...]
    gains: np.ndarray
    cloud_position: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "edges", tuple(self.edges))
        if not self.users or not self.edges:
            raise InvalidInputError("scenario needs at least one user and one edge server")
        gains = np.array(self.gains, dtype=float)
        if gains.shape != (len(self.users), len(self.edges)):
            raise InvalidInputError(
                f"gains shape {gains.shape} != ({len(self.users)}, {len(self.edges)})"
            )
        if not np.all(np.isfinite(gains)) or np.any(gains <= 0):
            raise InvalidInputError("channel gains must be positive and finite")
        gains.setflags(write=False)
        object.__setattr__(self, "gains", gains)
        for i, u in enumerate(self.users):
            if u.id != i:
                raise InvalidInputError(f"user ids must be 0..N-1 in order, got {u.id} at {i}")
        for i, e in enumerate(self.edges):
            if e.id != i:
                raise InvalidInputError(f"edge ids must be 0..M-1 in order, got {e.id} at {i}")

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def samples(self) -> np.ndarray:
        return np.array([u.samples for u in self.users], dtype=float)

    @cached_property
    def cycles(self) -> np.ndarray:
        return np.array([u.cycles_per_sample for u in self.users], dtype=float)

    @cached_property
    def f_max(self) -> np.ndarray:
        return np.array([u.f_max for u in self.users], dtype=float)

    @cached_property
    def p_max(self) -> np.ndarray:
        return np.array([u.p_max for u in self.users], dtype=float)

    @cached_property
    def user_xy(self) -> np.ndarray:
        return np.array([u.position for u in self.users], dtype=float)

    @cached_property
    def edge_xy(self) -> np.ndarray:
        return np.array([e.position for e in self.edges], dtype=float)

    @cached_property
    def cloud_delay(self) -> np.ndarray:
        """Per-edge upload time of one edge model to the cloud (s)."""
        rates = np.array([e.cloud_rate for e in self.edges], dtype=float)
        return self.params.model_size / rates

    @cached_property
    def cloud_energy(self) -> np.ndarray:
        powers = np.array([e.cloud_power for e in self.edges], dtype=float)
        return powers * self.cloud_delay

    def with_params(self, **changes) -> "Scenario":
        return dataclasses.replace(self, params=dataclasses.replace(self.params, **changes))

    def to_dict(self) -> dict:
        return scenario_to_dict(self)

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return scenario_to_dict(self) == scenario_to_dict(other)

    __hash__ = None


@dataclass(frozen=True)
class Assignment:
    """Partition of user indices over edge servers; groups may be empty."""

    groups: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        groups = tuple(tuple(sorted(int(n) for n in g)) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        seen: set[int] = set()
        for m, g in enumerate(groups):
            for n in g:
                if n in seen:
                    raise InvalidInputError(f"user {n} appears in more than one group (edge {m})")
                seen.add(n)

    @classmethod
    def from_labels(cls, labels: Sequence[int], n_edges: int) -> "Assignment":
        groups: list[list[int]] = [[] for _ in range(n_edges)]
        for n, m in enumerate(labels):
            if not 0 <= int(m) < n_edges:
                raise InvalidInputError(f"user {n} mapped to unknown edge {m}")
            groups[int(m)].append(n)
        return cls(tuple(tuple(g) for g in groups))

    @property
    def n_edges(self) -> int:
        return len(self.groups)

    def n_users(self) -> int:
        return sum(len(g) for g in self.groups)

    def labels(self, n_users: int | None = None) -> np.ndarray:
        n = self.n_users() if n_users is None else n_users
        out = np.full(n, -1, dtype=int)
        for m, g in enumerate(self.groups):
            out[list(g)] = m
        return out

    def edge_of(self, user: int) -> int:
        for m, g in enumerate(self.groups):
            if user in g:
                return m
        raise KeyError(user)

    def validate(self, n_users: int, n_edges: int | None = None) -> None:
        """Raise unless the groups are disjoint and cover ``range(n_users)``."""
        if n_edges is not None and len(self.groups) != n_edges:
            raise InvalidInputError(f"assignment has {len(self.groups)} groups, expected {n_edges}")
        members = sorted(n for g in self.groups for n in g)
        if members != list(range(n_users)):
            raise InvalidInputError("assignment does not cover every user exactly once")

    def move(self, user: int, src: int, dst: int) -> "Assignment":
        if user not in self.groups[src]:
            raise InvalidInputError(f"user {user} is not on edge {src}")
        groups = [list(g) for g in self.groups]
        groups[src].remove(user)
        groups[dst].append(user)
        return Assignment(tuple(tuple(g) for g in groups))

    def key(self) -> tuple[tuple[int, ...], ...]:
        return self.groups


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs of the random deployment generator (boundary units allowed here)."""

    area_side: float = 500.0
    shadow_std_db: float = 8.0
    min_distance: float = 1.0
    f_max: float = 5e9
    p_max_dbm: float = 23.0
    cycles_range: tuple[float, float] = (1e4, 1e5)
    dataset: str = "imagenette"
    samples_range: tuple[int, int] | None = None
    model_size_kb: float | None = None
    edge_bandwidth_range: tuple[float, float] = (10e3, 1000e3)
    edge_cloud_rate: float = 10e6
    edge_cloud_power: float = 0.5
    noise_dbm: float = -174.0
    noise_unit: str = "dBm/Hz"
    capacitance_coeff: float = 2e-28
    importance_weight: float = 1.0
    global_iters: int = 80
    edge_iters: int = 5
    local_iters: int = 5

    def with_overrides(self, overrides: Mapping[str, Any] | None) -> "GeneratorConfig":
        if not overrides:
            return self
        names = {f.name for f in dataclasses.fields(self)}
        unknown = set(overrides) - names
        if unknown:
            raise InvalidInputError(f"unknown scenario override(s): {sorted(unknown)}")
        clean = {}
        for k, v in overrides.items():
            if k in ("cycles_range", "samples_range", "edge_bandwidth_range") and v is not None:
                v = tuple(v)
            clean[k] = v
        return dataclasses.replace(self, **clean)

    def resolved_samples_range(self) -> tuple[int, int]:
        if self.samples_range is not None:
            return self.samples_range
        try:
            lo, hi, _ = DATASETS[self.dataset]
        except KeyError:
            raise InvalidInputError(f"unknown dataset preset {self.dataset!r}") from None
        return lo, hi

    def model_size_bits(self) -> float:
        kb = self.model_size_kb
        if kb is None:
            try:
                kb = DATASETS[self.dataset][2]
            except KeyError:
                raise InvalidInputError(f"unknown dataset preset {self.dataset!r}") from None
        return float(kb) * 1024 * 8

    def validate(self) -> None:
        if not self.area_side > 0:
            raise InvalidInputError("area_side must be positive")
        if not self.shadow_std_db >= 0:
            raise InvalidInputError("shadow_std_db must be >= 0")
        if not self.min_distance > 0:
            raise InvalidInputError("min_distance must be positive")
        lo, hi = self.cycles_range
        if not 0 < lo <= hi:
            raise InvalidInputError("cycles_range must satisfy 0 < lo <= hi")
        slo, shi = self.resolved_samples_range()
        if not 1 <= slo <= shi:
            raise InvalidInputError("samples_range must satisfy 1 <= lo <= hi")
        blo, bhi = self.edge_bandwidth_range
        if not 0 < blo <= bhi:
            raise InvalidInputError("edge_bandwidth_range must satisfy 0 < lo <= hi")
        noise_density_watt_per_hz(self.noise_dbm, self.noise_unit)


def generate_scenario(
    seed: int,
    n_users: int,
    n_edges: int,
    overrides: Mapping[str, Any] | None = None,
) -> Scenario:
    """Draw a random deployment.

    Users and edge servers are placed uniformly in a square with the cloud at
    its centre. Gains combine the macro-cell path loss with log-normal
    shadowing drawn once per (user, edge) pair. The result is a pure function of
    the arguments.
    """
    if int(n_users) != n_users or n_users < 1:
        raise InvalidInputError(f"n_users must be a positive integer, got {n_users!r}")
    if int(n_edges) != n_edges or n_edges < 1:
        raise InvalidInputError(f"n_edges must be a positive integer, got {n_edges!r}")
    cfg = GeneratorConfig().with_overrides(overrides)
    cfg.validate()

    rng = np.random.default_rng(seed)
    side = cfg.area_side
    user_xy = rng.uniform(0.0, side, size=(n_users, 2))
    edge_xy = rng.uniform(0.0, side, size=(n_edges, 2))
    shadow_db = rng.normal(0.0, 1.0, size=(n_users, n_edges)) * cfg.shadow_std_db
    cycles = rng.uniform(*cfg.cycles_range, size=n_users)
    slo, shi = cfg.resolved_samples_range()
    samples = rng.integers(slo, shi, endpoint=True, size=n_users)
    edge_bw = rng.uniform(*cfg.edge_bandwidth_range, size=n_edges)

    dist_m = np.linalg.norm(user_xy[:, None, :] - edge_xy[None, :, :], axis=-1)
    dist_km = np.maximum(dist_m, cfg.min_distance) / 1000.0
    gains = db_to_linear(-(path_loss_db(dist_km) + shadow_db))

    params = SystemParams(
        total_bandwidth=float(edge_bw.sum()),
        importance_weight=float(cfg.importance_weight),
        global_iters=int(cfg.global_iters),
        edge_iters=int(cfg.edge_iters),
        local_iters=int(cfg.local_iters),
        model_size=cfg.model_size_bits(),
        capacitance_coeff=float(cfg.capacitance_coeff),
        noise_density=noise_density_watt_per_hz(cfg.noise_dbm, cfg.noise_unit),
    )
    p_max = float(dbm_to_watt(cfg.p_max_dbm))
    users = [
        User(
            id=n,
            samples=int(samples[n]),
            cycles_per_sample=float(cycles[n]),
            f_max=float(cfg.f_max),
            p_max=p_max,
            position=(float(user_xy[n, 0]), float(user_xy[n, 1])),
        )
        for n in range(n_users)
    ]
    edges = [
        EdgeServer(
            id=m,
            position=(float(edge_xy[m, 0]), float(edge_xy[m, 1])),
            cloud_rate=float(cfg.edge_cloud_rate),
            cloud_power=float(cfg.edge_cloud_power),
            bandwidth=float(edge_bw[m]),
        )
        for m in range(n_edges)
    ]
    return Scenario(params, users, edges, gains, cloud_position=(side / 2, side / 2))


def geo_initial_assignment(scenario: Scenario) -> Assignment:
    """Attach every user to its Euclidean-nearest edge (lowest index on ties)."""
    diff = scenario.user_xy[:, None, :] - scenario.edge_xy[None, :, :]
    dist2 = np.einsum("nmk,nmk->nm", diff, diff)
    # argmin returns the first occurrence, which is the lowest edge index.
    return Assignment.from_labels(np.argmin(dist2, axis=1), scenario.n_edges)


# -- serialization -----------------------------------------------------------


def check_schema(doc: Mapping[str, Any], schema: str, version: int) -> None:
    if doc.get("schema") != schema:
        raise SchemaError(f"expected schema {schema!r}, got {doc.get('schema')!r}")
    if doc.get("version") != version:
        raise SchemaError(f"{schema}: unsupported version {doc.get('version')!r} (want {version})")


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "schema": SCENARIO_SCHEMA,
        "version": SCENARIO_VERSION,
        "units": dict(SCENARIO_UNITS),
        "params": dataclasses.asdict(scenario.params),
        "cloud_position": list(scenario.cloud_position),
        "users": [
            {**dataclasses.asdict(u), "position": list(u.position)} for u in scenario.users
        ],
        "edges": [
            {**dataclasses.asdict(e), "position": list(e.position)} for e in scenario.edges
        ],
        "gains": [[float(x) for x in row] for row in scenario.gains],
    }


def scenario_from_dict(doc: Mapping[str, Any]) -> Scenario:
    check_schema(doc, SCENARIO_SCHEMA, SCENARIO_VERSION)
    if doc.get("units") != SCENARIO_UNITS:
        raise SchemaError(f"scenario units block mismatch: {doc.get('units')!r}")
    try:
        params = SystemParams(**doc["params"])
        users = [User(**{**u, "position": tuple(u["position"])}) for u in doc["users"]]
        edges = [EdgeServer(**{**e, "position": tuple(e["position"])}) for e in doc["edges"]]
        return Scenario(
            params,
            users,
            edges,
            np.array(doc["gains"], dtype=float),
            cloud_position=tuple(doc.get("cloud_position", (0.0, 0.0))),
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed scenario document: {exc}") from exc


def dumps(doc: Mapping[str, Any]) -> str:
    """Canonical JSON text: sorted keys, shortest round-trip floats."""
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n"


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(scenario_to_dict(scenario)))


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))


def assignment_to_dict(assignment: Assignment) -> dict:
    return {
        "schema": "hflopt.assignment",
        "version": 1,
        "groups": [list(g) for g in assignment.groups],
    }


def assignment_from_dict(doc: Mapping[str, Any]) -> Assignment:
    check_schema(doc, "hflopt.assignment", 1)
    return Assignment(tuple(tuple(g) for g in doc["groups"]))

