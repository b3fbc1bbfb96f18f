"""Switched-system model: modes, domains, and state-dependent switch regions.

A system couples N mode dynamics (continuous vector fields or discrete maps,
given as parsed expressions) with a working domain, an equilibrium, an
exclusion radius around the equilibrium, and a map of pairwise-disjoint
switching boxes. Instances are immutable after loading and safe to share
across threads.

Switching boxes are allowed to overhang the domain boundary; the effective
switching region is always the intersection with the domain, which is how
membership tests, sampling, and verification treat them. A box that misses
the domain entirely is rejected at load time.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex
from . import intervals as iv
from .intervals import Interval

log = logging.getLogger("nmlf")


class ConfigError(ValueError):
    """Configuration rejected; `path` is a JSON-pointer-style location."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class TimeSemantics(str, Enum):
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"


class Membership(str, Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    STRADDLES = "straddles"


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoxRegion:
    """Axis-aligned box, one closed interval per dimension."""

    intervals: tuple[Interval, ...]

    @classmethod
    def from_flat(cls, bounds: Sequence[float]) -> "BoxRegion":
        """Decode [x1min, x1max, x2min, x2max, ...] into a box."""
        if len(bounds) % 2 != 0:
            raise ValueError("flat box bounds must have even length")
        pairs = [(float(bounds[2 * i]), float(bounds[2 * i + 1])) for i in range(len(bounds) // 2)]
        return cls(tuple(Interval(lo, hi) for lo, hi in pairs))

    @property
    def dim(self) -> int:
        return len(self.intervals)

    @property
    def lo(self) -> np.ndarray:
        return np.array([b.lo for b in self.intervals])

    @property
    def hi(self) -> np.ndarray:
        return np.array([b.hi for b in self.intervals])

    def to_flat(self) -> list[float]:
        out: list[float] = []
        for b in self.intervals:
            out.extend((b.lo, b.hi))
        return out

    def contains(self, x: Sequence[float]) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.lo <= x) and np.all(x <= self.hi))

    def contains_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.all((X >= self.lo) & (X <= self.hi), axis=-1)

    def overlaps(self, other: "BoxRegion") -> bool:
        return bool(np.all(self.lo <= other.hi) and np.all(other.lo <= self.hi))

    def intersect(self, other: "BoxRegion") -> "BoxRegion | None":
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(lo > hi):
            return None
        return BoxRegion(tuple(Interval(float(a), float(b)) for a, b in zip(lo, hi)))

    def corners(self) -> np.ndarray:
        n = self.dim
        grid = np.stack(np.meshgrid(*[(b.lo, b.hi) for b in self.intervals], indexing="ij"), axis=-1)
        return grid.reshape(-1, n)


@dataclass(frozen=True)
class Domain:
    """Working domain: a closed ball or a box, minus nothing.

    The exclusion radius ``epsilon_b`` carves the verification region
    D_V = {x in D : ||x - x*|| >= epsilon_b} out around the equilibrium.
    """

    kind: str  # "ball" | "box"
    epsilon_b: float
    radius: float = 0.0
    center: tuple[float, ...] = ()
    box: BoxRegion | None = None

    @classmethod
    def ball(cls, radius: float, epsilon_b: float, center: Sequence[float]) -> "Domain":
        return cls("ball", float(epsilon_b), float(radius), tuple(float(c) for c in center))

    @classmethod
    def from_box(cls, box: BoxRegion, epsilon_b: float) -> "Domain":
        return cls("box", float(epsilon_b), box=box)

    @property
    def dim(self) -> int:
        return len(self.center) if self.kind == "ball" else self.box.dim

    def bounding_box(self) -> BoxRegion:
        if self.kind == "box":
            return self.box
        c = np.asarray(self.center)
        return BoxRegion(tuple(Interval(float(ci - self.radius), float(ci + self.radius)) for ci in c))

    def contains(self, x: Sequence[float]) -> bool:
        x = np.asarray(x, dtype=float)
        if self.kind == "box":
            return self.box.contains(x)
        return float(np.dot(x - self.center, x - self.center)) <= self.radius * self.radius

    def contains_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.kind == "box":
            return self.box.contains_batch(X)
        d = X - np.asarray(self.center)
        return np.sum(d * d, axis=-1) <= self.radius * self.radius

    def inradius(self, point: Sequence[float]) -> float:
        """Largest r with the ball B_r(point) inside the domain."""
        point = np.asarray(point, dtype=float)
        if self.kind == "ball":
            return self.radius - float(np.linalg.norm(point - np.asarray(self.center)))
        gaps = np.concatenate([point - self.box.lo, self.box.hi - point])
        return float(np.min(gaps))


def membership(region: "BoxRegion | Domain", x: Sequence[float]) -> bool:
    """Exact closed-set membership of a point."""
    return region.contains(x)


def interval_membership(region: "BoxRegion | Domain", box: BoxRegion) -> Membership:
    """Conservative three-valued membership of a whole box."""
    if isinstance(region, BoxRegion):
        lo, hi = box.lo, box.hi
        if np.all(lo >= region.lo) and np.all(hi <= region.hi):
            return Membership.INSIDE
        if np.any(hi < region.lo) or np.any(lo > region.hi):
            return Membership.OUTSIDE
        return Membership.STRADDLES
    if region.kind == "box":
        return interval_membership(region.box, box)
    sq_lo, sq_hi = _dist_sq_enclosure(box.lo, box.hi, np.asarray(region.center))
    r_sq_lo, r_sq_hi = iv.outward(region.radius * region.radius, region.radius * region.radius)
    if sq_hi <= r_sq_lo:
        return Membership.INSIDE
    if sq_lo > r_sq_hi:
        return Membership.OUTSIDE
    return Membership.STRADDLES


def _dist_sq_enclosure(lo: np.ndarray, hi: np.ndarray, center: np.ndarray):
    """Enclosure of ||x - center||^2 over a batch of boxes (trailing dim = n)."""
    dl, dh = iv.isub(lo, hi, center, center)
    sl, sh = iv.ipow(dl, dh, 2)
    return iv.isum(sl, sh, axis=-1)


# ---------------------------------------------------------------------------
# System
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Mode:
    id: int
    dynamics: tuple[ex.Expr, ...]


@dataclass(frozen=True)
class SwitchedSystem:
    time_semantics: TimeSemantics
    state_vars: tuple[str, ...]
    constants: tuple[tuple[str, float], ...]
    equilibrium: np.ndarray
    domain: Domain
    modes: tuple[Mode, ...]
    switch_regions: tuple[tuple[tuple[int, int], BoxRegion], ...]

    @property
    def dim(self) -> int:
        return len(self.state_vars)

    @property
    def mode_ids(self) -> tuple[int, ...]:
        return tuple(m.id for m in self.modes)

    @property
    def switch_pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple(pair for pair, _ in self.switch_regions)

    def mode(self, mode_id: int) -> Mode:
        for m in self.modes:
            if m.id == mode_id:
                return m
        raise KeyError(f"no mode {mode_id}")

    def switch_region(self, i: int, j: int) -> BoxRegion:
        for pair, box in self.switch_regions:
            if pair == (i, j):
                return box
        raise KeyError(f"no switching region ({i},{j})")

    def eval_dynamics(self, mode_id: int, x: Sequence[float]) -> np.ndarray:
        """f_i(x): the derivative (continuous) or successor state (discrete)."""
        m = self.mode(mode_id)
        return np.array([ex.eval_point(e, x) for e in m.dynamics])

    def eval_dynamics_batch(self, mode_id: int, X: np.ndarray) -> np.ndarray:
        m = self.mode(mode_id)
        return np.stack([ex.eval_batch(e, X) for e in m.dynamics], axis=-1)

    def eval_dynamics_intervals(self, mode_id: int, lo: np.ndarray, hi: np.ndarray):
        """Component enclosures over boxes; returns ((..., n) lo, (..., n) hi)."""
        m = self.mode(mode_id)
        los, his = [], []
        for e in m.dynamics:
            rl, rh = ex.eval_interval_arrays(e, lo, hi)
            los.append(rl)
            his.append(rh)
        return np.stack(los, axis=-1), np.stack(his, axis=-1)

    def in_verification_region(self, x: Sequence[float]) -> bool:
        x = np.asarray(x, dtype=float)
        d = x - self.equilibrium
        return self.domain.contains(x) and float(np.dot(d, d)) >= self.domain.epsilon_b ** 2

    def in_verification_region_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        d = X - self.equilibrium
        far = np.sum(d * d, axis=-1) >= self.domain.epsilon_b ** 2
        return self.domain.contains_batch(X) & far


def _validate(sys: SwitchedSystem) -> None:
    dom = sys.domain
    if dom.epsilon_b <= 0:
        raise ConfigError("/epsilon_b", "must be > 0")
    inr = dom.inradius(sys.equilibrium)
    if dom.epsilon_b >= inr:
        raise ConfigError("/epsilon_b", f"must be < domain inradius {inr:.6g} about the equilibrium")
    if not dom.contains(sys.equilibrium):
        raise ConfigError("/equilibrium", "must lie inside the domain")
    ids = sorted(m.id for m in sys.modes)
    if ids != list(range(1, len(ids) + 1)):
        raise ConfigError("/modes", f"mode ids must be 1..N, got {ids}")
    for k, (pair, box) in enumerate(sys.switch_regions):
        i, j = pair
        if i == j:
            raise ConfigError(f"/switches/{k}", "self-switch (from == to) not allowed")
        if i not in ids or j not in ids:
            raise ConfigError(f"/switches/{k}", f"unknown mode in pair ({i},{j})")
        if box.dim != sys.dim:
            raise ConfigError(f"/switches/{k}/box", f"dimension {box.dim} != state dimension {sys.dim}")
        if not np.any(dom.contains_batch(_region_probe_points(box))):
            raise ConfigError(f"/switches/{k}/box", "switching box does not intersect the domain")
        if not np.all(dom.contains_batch(box.corners())):
            log.debug("switch region %s overhangs the domain; effective region is the intersection", pair)
    pairs = [pair for pair, _ in sys.switch_regions]
    if len(set(pairs)) != len(pairs):
        raise ConfigError("/switches", "duplicate switching pair")
    for a in range(len(sys.switch_regions)):
        for b in range(a + 1, len(sys.switch_regions)):
            if sys.switch_regions[a][1].overlaps(sys.switch_regions[b][1]):
                raise ConfigError(
                    "/switches",
                    f"regions {pairs[a]} and {pairs[b]} are not disjoint",
                )


def _region_probe_points(box: BoxRegion) -> np.ndarray:
    corners = box.corners()
    mid = 0.5 * (box.lo + box.hi)
    return np.vstack([corners, mid[None, :]])


# ---------------------------------------------------------------------------
# Config I/O
# ---------------------------------------------------------------------------

def _require(cfg: Mapping, key: str, path: str):
    if key not in cfg:
        raise ConfigError(f"{path}/{key}", "missing required field")
    return cfg[key]


def system_from_dict(cfg: Mapping) -> SwitchedSystem:
    time_raw = _require(cfg, "time", "")
    try:
        semantics = TimeSemantics(time_raw)
    except ValueError:
        raise ConfigError("/time", f"expected 'continuous' or 'discrete', got {time_raw!r}") from None

    state = _require(cfg, "state", "")
    if not isinstance(state, list) or not state or not all(isinstance(s, str) for s in state):
        raise ConfigError("/state", "must be a nonempty list of variable names")
    constants = cfg.get("constants", {})
    dim = len(state)

    equilibrium = np.asarray(cfg.get("equilibrium", [0.0] * dim), dtype=float)
    if equilibrium.shape != (dim,):
        raise ConfigError("/equilibrium", f"expected {dim} coordinates")

    dom_cfg = _require(cfg, "domain", "")
    eps_b = float(_require(cfg, "epsilon_b", ""))
    if "ball" in dom_cfg:
        ball = dom_cfg["ball"]
        radius = float(_require(ball, "radius", "/domain/ball"))
        if radius <= 0:
            raise ConfigError("/domain/ball/radius", "must be > 0")
        center = ball.get("center", [0.0] * dim)
        if len(center) != dim:
            raise ConfigError("/domain/ball/center", f"expected {dim} coordinates")
        domain = Domain.ball(radius, eps_b, center)
    elif "box" in dom_cfg:
        try:
            box = BoxRegion.from_flat(dom_cfg["box"])
        except ValueError as err:
            raise ConfigError("/domain/box", str(err)) from None
        if box.dim != dim:
            raise ConfigError("/domain/box", f"dimension {box.dim} != state dimension {dim}")
        domain = Domain.from_box(box, eps_b)
    else:
        raise ConfigError("/domain", "expected a 'ball' or 'box' shape")

    modes = []
    for k, mode_cfg in enumerate(_require(cfg, "modes", "")):
        mid = _require(mode_cfg, "id", f"/modes/{k}")
        fs = _require(mode_cfg, "f", f"/modes/{k}")
        if len(fs) != dim:
            raise ConfigError(f"/modes/{k}/f", f"expected {dim} components, got {len(fs)}")
        exprs = []
        for c, src in enumerate(fs):
            try:
                exprs.append(ex.parse(src, state, constants))
            except ex.ExprError as err:
                raise ConfigError(f"/modes/{k}/f/{c}", str(err)) from None
        modes.append(Mode(int(mid), tuple(exprs)))

    switches = []
    for k, sw in enumerate(cfg.get("switches", [])):
        i = int(_require(sw, "from", f"/switches/{k}"))
        j = int(_require(sw, "to", f"/switches/{k}"))
        try:
            box = BoxRegion.from_flat(_require(sw, "box", f"/switches/{k}"))
        except ValueError as err:
            raise ConfigError(f"/switches/{k}/box", str(err)) from None
        switches.append(((i, j), box))
    switches.sort(key=lambda item: item[0])

    sys = SwitchedSystem(
        time_semantics=semantics,
        state_vars=tuple(state),
        constants=tuple(sorted((str(k), float(v)) for k, v in constants.items())),
        equilibrium=equilibrium,
        domain=domain,
        modes=tuple(sorted(modes, key=lambda m: m.id)),
        switch_regions=tuple(switches),
    )
    _validate(sys)
    return sys


def load_config(path: str | Path) -> SwitchedSystem:
    """Load and validate a system description from a JSON file."""
    with open(path, encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError("/", f"invalid JSON: {err}") from None
    return system_from_dict(cfg)


def serialize(sys: SwitchedSystem) -> dict:
    """Inverse of :func:`system_from_dict` (expressions keep their source text)."""
    if sys.domain.kind == "ball":
        dom = {"ball": {"radius": sys.domain.radius, "center": list(sys.domain.center)}}
    else:
        dom = {"box": sys.domain.box.to_flat()}
    return {
        "time": sys.time_semantics.value,
        "state": list(sys.state_vars),
        "constants": dict(sys.constants),
        "equilibrium": [float(v) for v in sys.equilibrium],
        "domain": dom,
        "epsilon_b": sys.domain.epsilon_b,
        "modes": [{"id": m.id, "f": [e.source for e in m.dynamics]} for m in sys.modes],
        "switches": [
            {"from": i, "to": j, "box": box.to_flat()} for (i, j), box in sys.switch_regions
        ],
    }


def with_arbitrary_switching(sys: SwitchedSystem) -> SwitchedSystem:
    """Replace all switching regions by the whole domain (arbitrary switching).

    Every ordered mode pair gets the domain's bounding box as its region;
    since effective regions are intersected with the domain, this permits a
    switch anywhere. The disjointness invariant obviously cannot hold here,
    so validation is skipped: the result is meant for instability
    demonstrations and falsification, not for certification configs.
    """
    bbox = sys.domain.bounding_box()
    pairs = [
        ((i, j), bbox)
        for i in sys.mode_ids
        for j in sys.mode_ids
        if i != j
    ]
    return replace(sys, switch_regions=tuple(pairs))
