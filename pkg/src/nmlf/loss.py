"""Empirical hinge losses driving the candidate networks toward MLF conditions.

Mode-wise losses penalize failure of the decrease condition (Lie derivative
in continuous time, one-step difference in discrete time) and of positivity,
each with a shared margin. Switching losses penalize candidate pairs whose
values fail to drop across a switching region. Loss values use exact
(fsum) accumulation so they are invariant under sample permutation.

All functions are pure in (bundle, samples, config); gradients are assembled
from the networks' parameter-gradient primitives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import SwitchedSystem, TimeSemantics
from .net import MLFBundle, ParamGrads

SEED_SAMPLE = 0
COUNTEREXAMPLE = 1


@dataclass(frozen=True)
class LossConfig:
    """Margin and weighting of the loss terms.

    epsilon is the single margin shared by the decrease and positivity
    hinges; alpha weights positivity, beta weights the switching terms.
    The default margin leaves the certifier enough headroom between the
    trained strictness and interval slack at practical resolutions.
    """

    epsilon: float = 0.05
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")


@dataclass
class SampleBank:
    """Mutable training sets: S over the domain, S_ij per switching pair."""

    domain_points: np.ndarray  # (N, n)
    domain_tags: np.ndarray  # (N,) SEED_SAMPLE | COUNTEREXAMPLE
    switch_points: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    switch_tags: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)

    def add_domain_points(self, points: np.ndarray, tag: int = COUNTEREXAMPLE) -> None:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        self.domain_points = np.vstack([self.domain_points, points])
        self.domain_tags = np.concatenate([self.domain_tags, np.full(len(points), tag, dtype=np.int8)])

    def add_switch_points(self, pair: tuple[int, int], points: np.ndarray,
                          tag: int = COUNTEREXAMPLE) -> None:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        old = self.switch_points.get(pair)
        if old is None:
            self.switch_points[pair] = points.copy()
            self.switch_tags[pair] = np.full(len(points), tag, dtype=np.int8)
        else:
            self.switch_points[pair] = np.vstack([old, points])
            self.switch_tags[pair] = np.concatenate(
                [self.switch_tags[pair], np.full(len(points), tag, dtype=np.int8)]
            )

    @property
    def n_domain(self) -> int:
        return len(self.domain_points)

    def n_switch(self, pair: tuple[int, int]) -> int:
        pts = self.switch_points.get(pair)
        return 0 if pts is None else len(pts)


def _hinge_mean(margins: np.ndarray) -> float:
    """Mean of max(0, margin) with order-independent accumulation."""
    return math.fsum(np.maximum(0.0, margins).tolist()) / len(margins)


def _require_semantics(sys: SwitchedSystem, wanted: TimeSemantics, what: str) -> None:
    if sys.time_semantics is not wanted:
        raise ValueError(f"{what} requires a {wanted.value}-time system, got {sys.time_semantics.value}")


def _require_samples(S: np.ndarray) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or len(S) == 0:
        raise ValueError("empty sample set")
    return S


# ---------------------------------------------------------------------------
# Mode-wise losses
# ---------------------------------------------------------------------------

def mode_loss_ct(bundle: MLFBundle, sys: SwitchedSystem, S: np.ndarray, cfg: LossConfig) -> float:
    """Sum over modes of mean relu(gradV.f + eps) + alpha * mean relu(eps - V)."""
    _require_semantics(sys, TimeSemantics.CONTINUOUS, "mode_loss_ct")
    S = _require_samples(S)
    total = 0.0
    for mid in sys.mode_ids:
        net = bundle[mid]
        F = sys.eval_dynamics_batch(mid, S)
        lie = net.lie_batch(S, F)
        V = net.value_batch(S)
        total += _hinge_mean(lie + cfg.epsilon)
        total += cfg.alpha * _hinge_mean(cfg.epsilon - V)
    return total


def mode_loss_dt(bundle: MLFBundle, sys: SwitchedSystem, S: np.ndarray, cfg: LossConfig) -> float:
    """Sum over modes of mean relu(V(f(x)) - V(x) + eps) + alpha * mean relu(eps - V)."""
    _require_semantics(sys, TimeSemantics.DISCRETE, "mode_loss_dt")
    S = _require_samples(S)
    total = 0.0
    for mid in sys.mode_ids:
        net = bundle[mid]
        Y = sys.eval_dynamics_batch(mid, S)
        V_x = net.value_batch(S)
        V_y = net.value_batch(Y)
        total += _hinge_mean(V_y - V_x + cfg.epsilon)
        total += cfg.alpha * _hinge_mean(cfg.epsilon - V_x)
    return total


def switch_loss_ct(bundle: MLFBundle, sys: SwitchedSystem,
                   S_pairs: dict[tuple[int, int], np.ndarray], cfg: LossConfig) -> float:
    """Sum over pairs of mean relu(V_j - V_i + eps) over that pair's samples."""
    _require_semantics(sys, TimeSemantics.CONTINUOUS, "switch_loss_ct")
    total = 0.0
    for (i, j) in sys.switch_pairs:
        pts = S_pairs.get((i, j))
        if pts is None or len(pts) == 0:
            continue
        diff = bundle[j].value_batch(pts) - bundle[i].value_batch(pts)
        total += _hinge_mean(diff + cfg.epsilon)
    return total


def switch_loss_dt(bundle: MLFBundle, sys: SwitchedSystem,
                   S_pairs: dict[tuple[int, int], np.ndarray], cfg: LossConfig) -> float:
    """Discrete switching hinge; the successor uses the destination map f_j."""
    _require_semantics(sys, TimeSemantics.DISCRETE, "switch_loss_dt")
    total = 0.0
    for (i, j) in sys.switch_pairs:
        pts = S_pairs.get((i, j))
        if pts is None or len(pts) == 0:
            continue
        Y = sys.eval_dynamics_batch(j, pts)
        diff = bundle[j].value_batch(Y) - bundle[i].value_batch(pts)
        total += _hinge_mean(diff + cfg.epsilon)
    return total


def total_loss(bundle: MLFBundle, sys: SwitchedSystem, bank: SampleBank, cfg: LossConfig) -> float:
    """Overall loss: sum of mode losses plus beta times the switching losses."""
    if sys.time_semantics is TimeSemantics.CONTINUOUS:
        value = mode_loss_ct(bundle, sys, bank.domain_points, cfg)
        if cfg.beta > 0:
            value += cfg.beta * switch_loss_ct(bundle, sys, bank.switch_points, cfg)
    else:
        value = mode_loss_dt(bundle, sys, bank.domain_points, cfg)
        if cfg.beta > 0:
            value += cfg.beta * switch_loss_dt(bundle, sys, bank.switch_points, cfg)
    return value


# ---------------------------------------------------------------------------
# Loss + parameter gradients (training path)
# ---------------------------------------------------------------------------

def _accumulate(target: ParamGrads | None, grads: ParamGrads) -> ParamGrads:
    if target is None:
        return [(gW.copy(), gb.copy()) for gW, gb in grads]
    for (tW, tb), (gW, gb) in zip(target, grads):
        tW += gW
        tb += gb
    return target


def total_loss_and_grads(bundle: MLFBundle, sys: SwitchedSystem, bank: SampleBank,
                         cfg: LossConfig) -> tuple[float, dict[int, ParamGrads]]:
    """Loss value plus exact parameter gradients per mode.

    Hinges use subgradient 0 at exactly zero; the v(x*) shift of every
    candidate contributes its own backward path.
    """
    S = _require_samples(bank.domain_points)
    B = len(S)
    continuous = sys.time_semantics is TimeSemantics.CONTINUOUS
    value = 0.0
    grads: dict[int, ParamGrads] = {}

    for mid in sys.mode_ids:
        net = bundle[mid]
        if continuous:
            F = sys.eval_dynamics_batch(mid, S)
            v_raw, u, cache = net._forward_tangent(S, F)
            V = v_raw - net._v_star
            value += _hinge_mean(u + cfg.epsilon)
            value += cfg.alpha * _hinge_mean(cfg.epsilon - V)
            du = (u + cfg.epsilon > 0).astype(float) / B
            dv = -cfg.alpha * (cfg.epsilon - V > 0).astype(float) / B
            g = net._backward(cache, dv, du)
            total_dv = float(dv.sum())
            if total_dv != 0.0:
                for (gW, gb), (sW, sb) in zip(g, net._origin_grads()):
                    gW -= total_dv * sW
                    gb -= total_dv * sb
            grads[mid] = _accumulate(grads.get(mid), g)
        else:
            Y = sys.eval_dynamics_batch(mid, S)
            V_x = net.value_batch(S)
            V_y = net.value_batch(Y)
            dec = V_y - V_x + cfg.epsilon
            pos = cfg.epsilon - V_x
            value += _hinge_mean(dec)
            value += cfg.alpha * _hinge_mean(pos)
            act_dec = (dec > 0).astype(float) / B
            act_pos = (pos > 0).astype(float) / B
            g = net.grad_params(Y, act_dec)
            grads[mid] = _accumulate(grads.get(mid), g)
            g = net.grad_params(S, -act_dec - cfg.alpha * act_pos)
            grads[mid] = _accumulate(grads.get(mid), g)

    if cfg.beta > 0:
        for (i, j) in sys.switch_pairs:
            pts = bank.switch_points.get((i, j))
            if pts is None or len(pts) == 0:
                continue
            P = len(pts)
            if continuous:
                diff = bundle[j].value_batch(pts) - bundle[i].value_batch(pts)
                value += cfg.beta * _hinge_mean(diff + cfg.epsilon)
                act = cfg.beta * (diff + cfg.epsilon > 0).astype(float) / P
                grads[j] = _accumulate(grads.get(j), bundle[j].grad_params(pts, act))
                grads[i] = _accumulate(grads.get(i), bundle[i].grad_params(pts, -act))
            else:
                Y = sys.eval_dynamics_batch(j, pts)
                diff = bundle[j].value_batch(Y) - bundle[i].value_batch(pts)
                value += cfg.beta * _hinge_mean(diff + cfg.epsilon)
                act = cfg.beta * (diff + cfg.epsilon > 0).astype(float) / P
                grads[j] = _accumulate(grads.get(j), bundle[j].grad_params(Y, act))
                grads[i] = _accumulate(grads.get(i), bundle[i].grad_params(pts, -act))

    return value, grads
