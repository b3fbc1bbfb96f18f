"""Sampling, gradient refinement, and the CEGIS synthesis loop.

Each CEGIS attempt initializes fresh candidates, draws uniform sample banks
over the verification region and the switching regions, then alternates
full-batch gradient rounds with sound certification. Counterexamples (and
resolution-limit points) returned by the certifier are injected back into
the matching sample set together with a small jittered cloud, since a lone
point is invisible in a mean loss. Exhausted attempts restart with a fresh
seed up to the retry budget.

Runs are deterministic for a fixed seed: every random stream is derived
from (seed, attempt, purpose) via SeedSequence.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .loss import COUNTEREXAMPLE, LossConfig, SampleBank, total_loss_and_grads
from .model import SwitchedSystem
from .net import MLFBundle, init_bundle
from .verify import (
    CERTIFIED,
    RESOLUTION_LIMIT,
    SWITCHING,
    VerificationOutcome,
    VerifyConfig,
    Violation,
    certify,
)

log = logging.getLogger("nmlf")


class TrainingError(RuntimeError):
    """Training became numerically unusable (non-finite loss or gradient)."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.03  # first round; later rounds refine at round_learning_rate
    round_learning_rate: float = 0.008
    lr_decay: float = 0.1  # lr multiplier reached by the end of each round
    optimizer: str = "adam"  # "adam" | "sgd"
    steps_per_round: int = 1000
    first_round_steps: int = 2500
    max_rounds: int = 40
    n_samples: int = 3000
    n_switch_samples: int = 500
    delta: float = 0.002
    seed: int = 0
    retries: int = 8  # total attempts, each with a fresh seed
    hidden: tuple[int, ...] = (16, 16)
    workers: int = 1
    cex_per_round: int = 96
    jitter_copies: int = 8
    jitter_rel: float = 0.005  # relative to domain diameter
    train_margin: float = 0.02  # strictness demanded during CEGIS rounds

    def verify_config(self, margin: float = 0.0) -> VerifyConfig:
        return VerifyConfig(
            delta=self.delta,
            margin=margin,
            workers=self.workers,
            max_counterexamples=self.cex_per_round,
        )


@dataclass
class CegisReport:
    outcome: str  # "certified" | "exhausted"
    rounds: int
    attempts: int
    counterexamples_per_round: list[int]
    final_loss: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "rounds": self.rounds,
            "attempts": self.attempts,
            "counterexamples_per_round": self.counterexamples_per_round,
            "final_loss": self.final_loss if math.isfinite(self.final_loss) else None,
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

_MAX_REJECTION_ROUNDS = 200


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *key]))


def _sample_region(sys: SwitchedSystem, lo: np.ndarray, hi: np.ndarray, count: int,
                   rng: np.random.Generator, what: str) -> np.ndarray:
    """Uniform points of box[lo,hi] ∩ D \\ B_eps(x*), by rejection."""
    out = []
    have = 0
    for _ in range(_MAX_REJECTION_ROUNDS):
        draw = rng.uniform(lo, hi, size=(max(count, 64), len(lo)))
        keep = draw[sys.in_verification_region_batch(draw)]
        if len(keep):
            out.append(keep)
            have += len(keep)
        if have >= count:
            break
    if have < count:
        raise ValueError(f"{what}: could not draw {count} points from the verification region")
    return np.vstack(out)[:count]


def sample_bank(sys: SwitchedSystem, n_samples: int, n_switch: int, seed: int) -> SampleBank:
    """Seed-deterministic uniform banks over D_V and each switching region."""
    if n_samples < 1 or n_switch < 1:
        raise ValueError("sample counts must be >= 1")
    bbox = sys.domain.bounding_box()
    rng = _rng(seed, 1)
    S = _sample_region(sys, bbox.lo, bbox.hi, n_samples, rng, "domain")
    bank = SampleBank(S, np.zeros(len(S), dtype=np.int8))
    for (i, j) in sys.switch_pairs:
        region = sys.switch_region(i, j)
        rng_ij = _rng(seed, 2, i, j)
        pts = _sample_region(sys, region.lo, region.hi, n_switch, rng_ij, f"switch ({i},{j})")
        bank.add_switch_points((i, j), pts, tag=0)
    return bank


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------

class _Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params, grads) -> None:
        for p, g in zip(params, grads):
            p -= self.lr * g


class _Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params, grads) -> None:
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _make_optimizer(cfg: TrainConfig):
    if cfg.optimizer == "adam":
        return _Adam(cfg.learning_rate)
    if cfg.optimizer == "sgd":
        return _Sgd(cfg.learning_rate)
    raise ValueError(f"unknown optimizer {cfg.optimizer!r}")


def _flat_params(bundle: MLFBundle):
    params = []
    for _, net in bundle.items():
        params.extend(net.parameters())
    return params


def _flat_grads(bundle: MLFBundle, grads) -> list[np.ndarray]:
    flat = []
    for mid, net in bundle.items():
        for gW, gb in grads[mid]:
            flat.append(gW)
            flat.append(gb)
    return flat


# ---------------------------------------------------------------------------
# Training rounds and the CEGIS loop
# ---------------------------------------------------------------------------

def train_round(bundle: MLFBundle, sys: SwitchedSystem, bank: SampleBank,
                tcfg: TrainConfig, lcfg: LossConfig,
                optimizer=None, steps: int | None = None) -> tuple[MLFBundle, list[float]]:
    """Run full-batch gradient steps on the bank with in-round lr decay.

    Returns the (mutated) bundle and the per-step loss trace; stops early
    once the loss hits exactly zero, where the gradient vanishes too.
    """
    opt = optimizer if optimizer is not None else _make_optimizer(tcfg)
    steps = tcfg.steps_per_round if steps is None else steps
    base_lr = opt.lr
    params = _flat_params(bundle)
    trace: list[float] = []
    for step in range(steps):
        value, grads = total_loss_and_grads(bundle, sys, bank, lcfg)
        if not math.isfinite(value):
            raise TrainingError(f"non-finite loss {value} at step {step}")
        trace.append(value)
        if value == 0.0:
            break
        flat = _flat_grads(bundle, grads)
        if any(not np.all(np.isfinite(g)) for g in flat):
            raise TrainingError(f"non-finite gradient at step {step}")
        opt.lr = base_lr * (tcfg.lr_decay ** (step / max(1, steps)))
        opt.step(params, flat)
        bundle.refresh()
    opt.lr = base_lr
    return bundle, trace


def _inject(bank: SampleBank, sys: SwitchedSystem, violations: list[Violation],
            tcfg: TrainConfig, rng: np.random.Generator,
            concentrated: bool = False) -> tuple[int, int]:
    """Add counterexamples (plus jittered clouds) to the matching sets.

    Resolution-limit points mark thin-margin spots only a few box widths
    across, so their clouds are drawn tighter than true-violation clouds.
    """
    bbox = sys.domain.bounding_box()
    diameter = float(np.linalg.norm(bbox.hi - bbox.lo))
    scale = tcfg.jitter_rel * diameter
    if concentrated:
        scale = max(4.0 * tcfg.delta, 0.2 * scale)
    n_mode = n_switch = 0
    for cex in violations:
        point = np.asarray(cex.point, dtype=float)
        cloud = point + rng.normal(0.0, scale, size=(tcfg.jitter_copies, len(point)))
        if cex.kind == SWITCHING:
            region = sys.switch_region(cex.mode, cex.target)
            keep = cloud[region.contains_batch(cloud) & sys.in_verification_region_batch(cloud)]
            if sys.in_verification_region(point) and region.contains(point):
                bank.add_switch_points((cex.mode, cex.target), np.vstack([point[None, :], keep]),
                                       tag=COUNTEREXAMPLE)
                n_switch += 1
        else:
            keep = cloud[sys.in_verification_region_batch(cloud)]
            if sys.in_verification_region(point):
                bank.add_domain_points(np.vstack([point[None, :], keep]), tag=COUNTEREXAMPLE)
                n_mode += 1
    return n_mode, n_switch


def cegis(sys: SwitchedSystem, tcfg: TrainConfig, lcfg: LossConfig,
          hidden: tuple[int, ...] | None = None) -> tuple[MLFBundle, CegisReport]:
    """Alternate gradient refinement with sound certification (CEGIS).

    Terminates `certified` as soon as the certifier proves the violation
    predicate unsatisfiable at resolution delta; otherwise injects the
    returned counterexamples and continues, restarting from a fresh seed
    after max_rounds, up to the retry budget.
    """
    hidden = tuple(hidden if hidden is not None else tcfg.hidden)
    vcfg = tcfg.verify_config(margin=tcfg.train_margin)
    attempts = max(1, tcfg.retries)
    cex_counts: list[int] = []
    rounds_done = 0
    bundle = None
    final_loss = math.nan

    for attempt in range(attempts):
        net_seed = int(np.random.SeedSequence([tcfg.seed & 0xFFFFFFFF, attempt, 3]).generate_state(1)[0])
        bundle = init_bundle(sys.mode_ids, sys.dim, hidden, net_seed, sys.equilibrium)
        bank = sample_bank(sys, tcfg.n_samples, tcfg.n_switch_samples,
                           int(np.random.SeedSequence([tcfg.seed & 0xFFFFFFFF, attempt, 4]).generate_state(1)[0]))
        for rnd in range(tcfg.max_rounds):
            # each round restarts the optimizer: a hot first round shapes the
            # candidate, later rounds refine around injected counterexamples
            optimizer = _make_optimizer(tcfg)
            if rnd > 0:
                optimizer.lr = tcfg.round_learning_rate
            steps = tcfg.first_round_steps if rnd == 0 else tcfg.steps_per_round
            bundle, trace = train_round(bundle, sys, bank, tcfg, lcfg, optimizer, steps)
            final_loss = trace[-1] if trace else 0.0
            outcome: VerificationOutcome = certify(bundle, sys, vcfg)
            rounds_done += 1
            if outcome.status == CERTIFIED:
                cex_counts.append(0)
                log.info("round=%d loss=%.6g cex_mode=0 cex_switch=0", rounds_done, final_loss)
                report = CegisReport("certified", rounds_done, attempt + 1, cex_counts,
                                     final_loss, tcfg.seed)
                return bundle, report
            rng = _rng(tcfg.seed, attempt, 5, rnd)
            n_mode, n_switch = _inject(bank, sys, outcome.counterexamples, tcfg, rng,
                                       concentrated=outcome.status == RESOLUTION_LIMIT)
            cex_counts.append(n_mode + n_switch)
            log.info("round=%d loss=%.6g cex_mode=%d cex_switch=%d",
                     rounds_done, final_loss, n_mode, n_switch)
            if n_mode + n_switch == 0:
                # certifier gave nothing usable; a fresh seed is the only move
                break

    report = CegisReport("exhausted", rounds_done, attempts, cex_counts, final_loss, tcfg.seed)
    return bundle, report
