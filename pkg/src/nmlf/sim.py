"""Trajectory simulation under explicit switching policies.

Continuous-time systems integrate with classical fixed-step RK4; discrete
systems apply the active mode's map directly. At every step boundary the
policy may switch modes wherever the state sits inside a switching region
(intersected with the domain); the new mode takes effect from the next
derivative or map evaluation, and `x_{k+1} = f_j(x_k)` holds at discrete
switches since the destination map is applied.

Switching is only examined at step boundaries (no event detection): the
bundled systems all use fat box regions, so a sufficiently small dt cannot
step over them. The greedy-destabilize policy plays adversary, switching
whenever the switch increases d||x||^2/dt (continuous) or the successor
norm (discrete); it is an empirical probe only, the certificate is what
covers all switching choices.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import SwitchedSystem, TimeSemantics

NEVER = "never"
ALWAYS = "always"
RANDOM = "random"
GREEDY_DESTABILIZE = "greedy-destabilize"

POLICY_KINDS = (NEVER, ALWAYS, RANDOM, GREEDY_DESTABILIZE)


@dataclass(frozen=True)
class SwitchPolicy:
    kind: str
    p: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy {self.kind!r}, expected one of {POLICY_KINDS}")

    @classmethod
    def never(cls) -> "SwitchPolicy":
        return cls(NEVER)

    @classmethod
    def always(cls) -> "SwitchPolicy":
        return cls(ALWAYS)

    @classmethod
    def random(cls, p: float = 0.5, seed: int = 0) -> "SwitchPolicy":
        return cls(RANDOM, p=p, seed=seed)

    @classmethod
    def greedy_destabilize(cls) -> "SwitchPolicy":
        return cls(GREEDY_DESTABILIZE)


@dataclass(frozen=True)
class SwitchEvent:
    time: float
    from_mode: int
    to_mode: int
    state: tuple[float, ...]


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (T, n)
    modes: np.ndarray  # (T,)
    events: list[SwitchEvent] = field(default_factory=list)
    exited_domain: bool = False
    nonfinite: bool = False

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


@dataclass
class StabilityReport:
    fraction: float
    n_inits: int
    captured: list[bool]  # per trajectory: some suffix stays in the ball
    any_exited_domain: bool
    horizon: float
    dt: float
    policy: str

    def to_dict(self) -> dict:
        return {
            "fraction": self.fraction,
            "n_inits": self.n_inits,
            "captured": self.captured,
            "any_exited_domain": self.any_exited_domain,
            "horizon": self.horizon,
            "dt": self.dt,
            "policy": self.policy,
        }


def _inflated_contains(sys: SwitchedSystem, X: np.ndarray) -> np.ndarray:
    """Membership in the 2x inflated domain (truncation guard)."""
    dom = sys.domain
    if dom.kind == "ball":
        d = X - np.asarray(dom.center)
        return np.sum(d * d, axis=-1) <= (2.0 * dom.radius) ** 2
    c = 0.5 * (dom.box.lo + dom.box.hi)
    half = dom.box.hi - dom.box.lo  # 2x the original half-width
    return np.all(np.abs(X - c) <= half, axis=-1)


def _growth_metric(sys: SwitchedSystem, mode_id: int, X: np.ndarray) -> np.ndarray:
    """Greedy policy score: d||x||^2/dt (continuous) or successor norm^2 (discrete)."""
    F = sys.eval_dynamics_batch(mode_id, X)
    if sys.time_semantics is TimeSemantics.CONTINUOUS:
        return np.sum(X * F, axis=-1)
    return np.sum(F * F, axis=-1)


def _switch_step(sys: SwitchedSystem, X: np.ndarray, modes: np.ndarray,
                 alive: np.ndarray, policy: SwitchPolicy,
                 rng: np.random.Generator | None):
    """Apply the policy at a step boundary; returns (new_modes, switched_rows).

    The candidate destination is the lexicographically first matching pair,
    except for greedy, which picks the candidate with the largest growth
    metric and switches only when it strictly beats staying.
    """
    # random draws happen every step so the stream stays aligned across rows
    draws = rng.random(len(X)) if rng is not None else None
    new_modes = modes.copy()
    if policy.kind == NEVER or not sys.switch_pairs:
        return new_modes, []

    in_domain = sys.domain.contains_batch(X)
    target = np.full(len(X), -1, dtype=int)
    if policy.kind == GREEDY_DESTABILIZE:
        best = np.full(len(X), -np.inf)
        stay = np.full(len(X), np.nan)
        for (i, j) in sys.switch_pairs:
            mask = alive & in_domain & (modes == i) & sys.switch_region(i, j).contains_batch(X)
            rows = np.nonzero(mask)[0]
            if len(rows) == 0:
                continue
            need = rows[np.isnan(stay[rows])]
            if len(need):
                stay[need] = _growth_metric(sys, i, X[need])
            score = _growth_metric(sys, j, X[rows])
            better = score > best[rows]
            target[rows[better]] = j
            best[rows[better]] = score[better]
        target[~(best > stay)] = -1
    else:
        for (i, j) in sys.switch_pairs:
            mask = (
                alive
                & in_domain
                & (modes == i)
                & (target < 0)
                & sys.switch_region(i, j).contains_batch(X)
            )
            target[mask] = j
        if policy.kind == RANDOM:
            target[draws >= policy.p] = -1

    switched = []
    for row in np.nonzero(target >= 0)[0]:
        switched.append((int(row), int(modes[row]), int(target[row]), X[row].copy()))
        new_modes[row] = target[row]
    return new_modes, switched


def _rk4_step(sys: SwitchedSystem, X: np.ndarray, modes: np.ndarray,
              rows: np.ndarray, dt: float) -> np.ndarray:
    out = X.copy()
    for mid in np.unique(modes[rows]):
        sel = rows[modes[rows] == mid]
        x = X[sel]
        k1 = sys.eval_dynamics_batch(int(mid), x)
        k2 = sys.eval_dynamics_batch(int(mid), x + 0.5 * dt * k1)
        k3 = sys.eval_dynamics_batch(int(mid), x + 0.5 * dt * k2)
        k4 = sys.eval_dynamics_batch(int(mid), x + dt * k3)
        out[sel] = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return out


def _discrete_step(sys: SwitchedSystem, X: np.ndarray, modes: np.ndarray,
                   rows: np.ndarray) -> np.ndarray:
    out = X.copy()
    for mid in np.unique(modes[rows]):
        sel = rows[modes[rows] == mid]
        out[sel] = sys.eval_dynamics_batch(int(mid), X[sel])
    return out


def _simulate_batch(sys: SwitchedSystem, X0: np.ndarray, policy: SwitchPolicy,
                    horizon: float, dt: float, start_mode: int) -> list[Trajectory]:
    continuous = sys.time_semantics is TimeSemantics.CONTINUOUS
    if continuous:
        if dt <= 0:
            raise ValueError("dt must be > 0 for continuous-time simulation")
        steps = int(round(horizon / dt))
        times = np.arange(steps + 1) * dt
    else:
        steps = int(round(horizon))
        times = np.arange(steps + 1, dtype=float)

    M, n = X0.shape
    states = np.full((steps + 1, M, n), np.nan)
    mode_log = np.zeros((steps + 1, M), dtype=int)
    states[0] = X0
    modes = np.full(M, start_mode, dtype=int)
    mode_log[0] = modes
    alive = np.ones(M, dtype=bool)
    end = np.full(M, steps, dtype=int)
    exited = np.zeros(M, dtype=bool)
    nonfinite = np.zeros(M, dtype=bool)
    events: list[list[SwitchEvent]] = [[] for _ in range(M)]
    rng = np.random.default_rng(np.random.SeedSequence([policy.seed & 0xFFFFFFFF, 11])) \
        if policy.kind == RANDOM else None

    X = X0.copy()
    for k in range(steps):
        t = float(times[k])
        modes, switched = _switch_step(sys, X, modes, alive, policy, rng)
        for row, i, j, x in switched:
            events[row].append(SwitchEvent(t, i, j, tuple(x.tolist())))
        rows = np.nonzero(alive)[0]
        if len(rows) == 0:
            break
        if continuous:
            X = _rk4_step(sys, X, modes, rows, dt)
        else:
            X = _discrete_step(sys, X, modes, rows)
        states[k + 1, rows] = X[rows]
        mode_log[k + 1] = modes
        bad = ~np.all(np.isfinite(X[rows]), axis=-1)
        out = ~_inflated_contains(sys, np.where(np.isfinite(X[rows]), X[rows], 0.0))
        for pos, row in enumerate(rows):
            if bad[pos] or out[pos]:
                alive[row] = False
                end[row] = k + 1
                nonfinite[row] = bool(bad[pos])
                exited[row] = bool(out[pos] and not bad[pos])

    result = []
    for m in range(M):
        e = end[m]
        result.append(
            Trajectory(
                times=times[: e + 1].copy(),
                states=states[: e + 1, m].copy(),
                modes=mode_log[: e + 1, m].copy(),
                events=events[m],
                exited_domain=bool(exited[m]),
                nonfinite=bool(nonfinite[m]),
            )
        )
    return result


def simulate(sys: SwitchedSystem, x0, policy: SwitchPolicy, horizon: float,
             dt: float = 0.01, start_mode: int | None = None) -> Trajectory:
    """Simulate one trajectory from x0 under the switching policy.

    horizon is a time span in continuous time and a step count in discrete
    time (dt is ignored there). The trajectory truncates with a flag when
    the state leaves the 2x inflated domain or turns non-finite.
    """
    x0 = np.asarray(x0, dtype=float)
    if not sys.domain.contains(x0):
        raise ValueError(f"initial state {x0.tolist()} is outside the domain")
    start = start_mode if start_mode is not None else sys.mode_ids[0]
    return _simulate_batch(sys, x0[None, :], policy, horizon, dt, start)[0]


def simulate_many(sys: SwitchedSystem, X0: np.ndarray, policy: SwitchPolicy,
                  horizon: float, dt: float = 0.01,
                  start_mode: int | None = None) -> list[Trajectory]:
    """Simulate a batch of trajectories in lock-step.

    Random policies draw from one shared stream, so individual trajectories
    are reproducible only within the same batch composition.
    """
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    start = start_mode if start_mode is not None else sys.mode_ids[0]
    return _simulate_batch(sys, X0, policy, horizon, dt, start)


def sample_initial_states(sys: SwitchedSystem, n: int, seed: int) -> np.ndarray:
    """n uniform initial states over the whole domain, seed-deterministic."""
    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, 7]))
    bbox = sys.domain.bounding_box()
    inits: list[list[float]] = []
    while len(inits) < n:
        draw = rng.uniform(bbox.lo, bbox.hi, size=(max(n, 64), sys.dim))
        inits.extend(draw[sys.domain.contains_batch(draw)].tolist())
    return np.asarray(inits[:n])


def stability_from_trajectories(sys: SwitchedSystem, trajectories: list[Trajectory],
                                horizon: float, dt: float,
                                policy: SwitchPolicy) -> StabilityReport:
    captured = []
    any_exit = False
    eps = sys.domain.epsilon_b
    for traj in trajectories:
        any_exit |= traj.exited_domain or traj.nonfinite
        if traj.exited_domain or traj.nonfinite:
            captured.append(False)
            continue
        d = traj.states - sys.equilibrium
        inside = np.sum(d * d, axis=-1) <= eps * eps
        captured.append(bool(inside[-1]))
    fraction = sum(captured) / max(1, len(captured))
    return StabilityReport(fraction, len(trajectories), captured, any_exit,
                           horizon, dt, policy.kind)


def check_practical_stability(sys: SwitchedSystem, policy: SwitchPolicy,
                              n_inits: int, horizon: float, seed: int,
                              dt: float = 0.01) -> StabilityReport:
    """Fraction of trajectories eventually captured by the epsilon_b ball.

    A trajectory counts as captured when it completes the horizon and some
    suffix of it stays inside B_eps(x*) (it entered and, from its last
    excursion on, remained).
    """
    X0 = sample_initial_states(sys, n_inits, seed)
    trajectories = _simulate_batch(sys, X0, policy, horizon, dt, sys.mode_ids[0])
    return stability_from_trajectories(sys, trajectories, horizon, dt, policy)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def save_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    """CSV with header t,x1,...,xn,mode; switch events go to a JSON sidecar."""
    n = traj.states.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"x{k + 1}" for k in range(n)] + ["mode"])
        for t, x, m in zip(traj.times, traj.states, traj.modes):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in x] + [int(m)])


def save_events_json(traj: Trajectory, path: str | Path) -> None:
    doc = [
        {"t": e.time, "from": e.from_mode, "to": e.to_mode, "state": list(e.state)}
        for e in traj.events
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
