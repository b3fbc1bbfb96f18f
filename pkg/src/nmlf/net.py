"""Per-mode neural Lyapunov candidates.

Each candidate is a fully connected network with tanh hidden layers and a
linear scalar output, evaluated as V(x) = v(x) - v(x*) so the candidate
vanishes at the equilibrium by construction. Everything the trainer and the
certifier need is implemented directly on numpy arrays:

* batched forward values and input gradients (reverse mode);
* a forward tangent pass giving the directional derivative grad(v) . f, and
  a reverse pass through the tangent graph, so losses containing the Lie
  derivative get exact parameter gradients;
* sound interval enclosures of V and grad(V) over boxes (interval forward
  pass plus interval reverse pass), used by the branch-and-bound certifier.

Evaluation methods are read-only and may be called concurrently; parameter
updates require exclusive access and must be followed by ``refresh()`` so
the cached v(x*) stays in sync.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from . import intervals as iv
from .intervals import Interval


class WeightFormatError(ValueError):
    """Weight document malformed or inconsistent with its declared shapes."""


ParamGrads = list[tuple[np.ndarray, np.ndarray]]


@dataclass
class LyapunovNet:
    """tanh MLP candidate V(x) = v(x) - v(x*)."""

    weights: list[np.ndarray]  # (out, in) per layer; last layer has out = 1
    biases: list[np.ndarray]
    equilibrium: np.ndarray

    _v_star: float = field(init=False, repr=False, default=0.0)
    _star_grads: ParamGrads | None = field(init=False, repr=False, default=None)
    _star_interval: tuple[float, float] = field(init=False, repr=False, default=(0.0, 0.0))

    def __post_init__(self):
        self.weights = [np.asarray(W, dtype=float) for W in self.weights]
        self.biases = [np.asarray(b, dtype=float) for b in self.biases]
        self.equilibrium = np.asarray(self.equilibrium, dtype=float)
        if self.weights[-1].shape[0] != 1:
            raise ValueError("output layer must be scalar")
        if self.weights[0].shape[1] != self.equilibrium.shape[0]:
            raise ValueError("input width must match state dimension")
        self.refresh()

    # -- architecture ------------------------------------------------------

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def widths(self) -> list[int]:
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    def parameters(self) -> Iterator[np.ndarray]:
        for W, b in zip(self.weights, self.biases):
            yield W
            yield b

    def refresh(self) -> None:
        """Recompute the cached v(x*); call after every parameter update."""
        x_star = self.equilibrium[None, :]
        v_raw, _ = self._forward(x_star)
        self._v_star = float(v_raw[0])
        self._star_grads = None
        lo = hi = self.equilibrium.copy()
        self._star_interval = self._interval_raw(lo, hi)

    # -- point evaluation ----------------------------------------------------

    def _forward(self, X: np.ndarray):
        A = X
        inputs = []
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            inputs.append(A)
            A = np.tanh(A @ W.T + b)
        inputs.append(A)
        v = A @ self.weights[-1][0] + self.biases[-1][0]
        return v, inputs

    def _forward_tangent(self, X: np.ndarray, F: np.ndarray):
        """Primal v(x) plus tangent u(x) = grad(v)(x) . f for each row."""
        A, T = X, F
        inputs, tangents, slopes = [], [], []
        for W in self.weights[:-1]:
            inputs.append(A)
            tangents.append(T)
            b = self.biases[len(inputs) - 1]
            A = np.tanh(A @ W.T + b)
            S = T @ W.T
            T = (1.0 - A * A) * S
            slopes.append(S)
        inputs.append(A)
        tangents.append(T)
        w_out = self.weights[-1][0]
        v = A @ w_out + self.biases[-1][0]
        u = T @ w_out
        return v, u, (inputs, tangents, slopes)

    def value_batch(self, X: np.ndarray) -> np.ndarray:
        """V over an (B, n) batch, shape (B,)."""
        X = np.asarray(X, dtype=float)
        v, _ = self._forward(X)
        return v - self._v_star

    def value(self, x: Sequence[float]) -> float:
        return float(self.value_batch(np.asarray(x, dtype=float)[None, :])[0])

    def grad_batch(self, X: np.ndarray) -> np.ndarray:
        """grad(V) over an (B, n) batch, shape (B, n); the v(x*) shift is constant."""
        X = np.asarray(X, dtype=float)
        _, inputs = self._forward(X)
        A_bar = np.broadcast_to(self.weights[-1][0], inputs[-1].shape)
        for l in range(len(self.weights) - 2, -1, -1):
            A = inputs[l + 1]
            Z_bar = A_bar * (1.0 - A * A)
            A_bar = Z_bar @ self.weights[l]
        return A_bar

    def grad_input(self, x: Sequence[float]) -> np.ndarray:
        return self.grad_batch(np.asarray(x, dtype=float)[None, :])[0]

    def lie_batch(self, X: np.ndarray, F: np.ndarray) -> np.ndarray:
        """grad(V)(x) . f(x) per row, via the forward tangent pass."""
        _, u, _ = self._forward_tangent(np.asarray(X, dtype=float), np.asarray(F, dtype=float))
        return u

    # -- parameter gradients ---------------------------------------------------

    def _zero_grads(self) -> ParamGrads:
        return [(np.zeros_like(W), np.zeros_like(b)) for W, b in zip(self.weights, self.biases)]

    def _backward(self, cache, dv: np.ndarray, du: np.ndarray | None) -> ParamGrads:
        inputs, tangents, slopes = cache
        grads = self._zero_grads()
        w_out = self.weights[-1][0]
        gW_out = dv @ inputs[-1]
        if du is not None:
            gW_out = gW_out + du @ tangents[-1]
        grads[-1] = (gW_out[None, :], np.array([dv.sum()]))
        A_bar = dv[:, None] * w_out
        T_bar = du[:, None] * w_out if du is not None else None
        for l in range(len(self.weights) - 2, -1, -1):
            A = inputs[l + 1]
            D = 1.0 - A * A
            if T_bar is not None:
                S = slopes[l]
                S_bar = T_bar * D
                A_bar = A_bar - 2.0 * T_bar * A * S
            Z_bar = A_bar * D
            gW = Z_bar.T @ inputs[l]
            gb = Z_bar.sum(axis=0)
            if T_bar is not None:
                gW = gW + S_bar.T @ tangents[l]
                T_bar = S_bar @ self.weights[l]
            grads[l] = (gW, gb)
            A_bar = Z_bar @ self.weights[l]
        return grads

    def _origin_grads(self) -> ParamGrads:
        if self._star_grads is None:
            x_star = self.equilibrium[None, :]
            _, _, cache = self._forward_tangent(x_star, np.zeros_like(x_star))
            self._star_grads = self._backward(cache, np.ones(1), None)
        return self._star_grads

    def grad_params(
        self,
        X: np.ndarray,
        dv: np.ndarray,
        F: np.ndarray | None = None,
        du: np.ndarray | None = None,
    ) -> ParamGrads:
        """Parameter gradient of sum_b dv_b V(x_b) + du_b [grad(V)(x_b) . f_b].

        The v(x*) subtraction contributes its own backward path: each unit of
        dv weight pulls -grad_theta v(x*).
        """
        X = np.asarray(X, dtype=float)
        dv = np.asarray(dv, dtype=float)
        if F is None:
            F = np.zeros_like(X)
        _, _, cache = self._forward_tangent(X, np.asarray(F, dtype=float))
        grads = self._backward(cache, dv, du)
        total_dv = float(dv.sum())
        if total_dv != 0.0:
            for (gW, gb), (sW, sb) in zip(grads, self._origin_grads()):
                gW -= total_dv * sW
                gb -= total_dv * sb
        return grads

    # -- interval enclosures ---------------------------------------------------

    def _interval_forward(self, lo: np.ndarray, hi: np.ndarray):
        acts = []
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            lo, hi = iv.affine_enclosure(W, b, lo, hi)
            lo, hi = iv.itanh(lo, hi)
            acts.append((lo, hi))
        vlo, vhi = iv.affine_enclosure(self.weights[-1], self.biases[-1], lo, hi)
        return vlo[..., 0], vhi[..., 0], acts

    def _interval_raw(self, lo: np.ndarray, hi: np.ndarray):
        vlo, vhi, _ = self._interval_forward(lo, hi)
        return vlo, vhi

    def interval_value_arrays(self, lo: np.ndarray, hi: np.ndarray):
        """Enclosure of V over boxes; trailing axis is the state dimension.

        Intersects the plain interval forward pass with a mean-value form
        V(c) + grad(V)(box) . (box - c), which is far tighter on small boxes
        where the naive pass suffers the dependency problem.
        """
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        vlo, vhi, _ = self._interval_forward(lo, hi)
        sl, sh = self._star_interval
        vlo, vhi = iv.isub(vlo, vhi, sl, sh)

        center = 0.5 * (lo + hi)
        c_lo, c_hi = self._interval_forward(center, center)[:2]
        c_lo, c_hi = iv.isub(c_lo, c_hi, sl, sh)
        g_lo, g_hi = self.interval_grad_arrays(lo, hi)
        d_lo, d_hi = iv.isub(lo, hi, center, center)
        off_lo, off_hi = iv.dot_enclosure(g_lo, g_hi, d_lo, d_hi)
        mv_lo, mv_hi = iv.iadd(c_lo, c_hi, off_lo, off_hi)
        return np.maximum(vlo, mv_lo), np.minimum(vhi, mv_hi)

    def interval_grad_arrays(self, lo: np.ndarray, hi: np.ndarray):
        """Component-wise enclosure of grad(V) over boxes, shapes (..., n)."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        _, _, acts = self._interval_forward(lo, hi)
        shape = lo.shape[:-1]
        w_out = self.weights[-1][0]
        t_lo = np.broadcast_to(w_out, shape + w_out.shape).copy()
        t_hi = t_lo.copy()
        for l in range(len(self.weights) - 2, -1, -1):
            d_lo, d_hi = _tanh_slope_interval(*acts[l])
            e_lo, e_hi = iv.imul(d_lo, d_hi, t_lo, t_hi)
            t_lo, t_hi = iv.affine_enclosure(self.weights[l].T, None, e_lo, e_hi)
        return t_lo, t_hi

    def interval_value(self, box: Sequence[Interval]) -> Interval:
        lo = np.array([b.lo for b in box])
        hi = np.array([b.hi for b in box])
        vl, vh = self.interval_value_arrays(lo, hi)
        return Interval(float(vl), float(vh))

    def interval_grad(self, box: Sequence[Interval]) -> list[Interval]:
        lo = np.array([b.lo for b in box])
        hi = np.array([b.hi for b in box])
        gl, gh = self.interval_grad_arrays(lo, hi)
        return [Interval(float(a), float(b)) for a, b in zip(gl, gh)]


def _tanh_slope_interval(a_lo: np.ndarray, a_hi: np.ndarray):
    """Enclosure of tanh' = 1 - y^2 from the activation interval y in [-1, 1]."""
    straddles = (a_lo <= 0.0) & (a_hi >= 0.0)
    m = np.where(straddles, 0.0, np.minimum(np.abs(a_lo), np.abs(a_hi)))
    M = np.maximum(np.abs(a_lo), np.abs(a_hi))
    d_lo = np.maximum(iv._down(1.0 - iv._up(M * M)), 0.0)
    d_hi = np.minimum(iv._up(1.0 - iv._down(m * m)), 1.0)
    return d_lo, d_hi


def init_network(state_dim: int, hidden: Sequence[int], seed: int,
                 equilibrium: Sequence[float] | None = None) -> LyapunovNet:
    """Seed-deterministic Glorot-uniform initialization."""
    if not hidden or any(h < 1 for h in hidden):
        raise ValueError("hidden widths must be a nonempty list of positive ints")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    dims = [state_dim] + list(hidden) + [1]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-s, s, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-1.0, 1.0, size=fan_out) / np.sqrt(fan_in))
    if equilibrium is None:
        equilibrium = np.zeros(state_dim)
    return LyapunovNet(weights, biases, np.asarray(equilibrium, dtype=float))


@dataclass
class MLFBundle:
    """One Lyapunov candidate per mode id."""

    nets: dict[int, LyapunovNet]

    def __getitem__(self, mode_id: int) -> LyapunovNet:
        return self.nets[mode_id]

    def __iter__(self):
        return iter(sorted(self.nets))

    def items(self):
        return sorted(self.nets.items())

    @property
    def mode_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self.nets))

    def refresh(self) -> None:
        for net in self.nets.values():
            net.refresh()


def init_bundle(mode_ids: Sequence[int], state_dim: int, hidden: Sequence[int],
                seed: int, equilibrium: Sequence[float] | None = None) -> MLFBundle:
    """Independent parameters per mode, each with its own derived seed."""
    nets = {}
    for mid in mode_ids:
        child = int(np.random.SeedSequence([seed, mid]).generate_state(1)[0])
        nets[mid] = init_network(state_dim, hidden, child, equilibrium)
    return MLFBundle(nets)


# ---------------------------------------------------------------------------
# Weight serialization
# ---------------------------------------------------------------------------

def encode_weights(bundle: MLFBundle) -> str:
    """Lossless JSON encoding (floats use shortest round-trip repr)."""
    equilibria = {tuple(net.equilibrium.tolist()) for net in bundle.nets.values()}
    if len(equilibria) != 1:
        raise WeightFormatError("all candidates must share the equilibrium")
    doc = {
        "modes": {
            str(mid): {
                "widths": net.widths,
                "layers": [
                    {"W": W.tolist(), "b": b.tolist()}
                    for W, b in zip(net.weights, net.biases)
                ],
            }
            for mid, net in bundle.items()
        },
        "equilibrium": list(equilibria.pop()),
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def decode_weights(text: str) -> MLFBundle:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise WeightFormatError(f"invalid JSON: {err}") from None
    if not isinstance(doc, Mapping) or "modes" not in doc or "equilibrium" not in doc:
        raise WeightFormatError("expected an object with 'modes' and 'equilibrium'")
    equilibrium = np.asarray(doc["equilibrium"], dtype=float)
    nets = {}
    for key, entry in doc["modes"].items():
        try:
            mid = int(key)
        except ValueError:
            raise WeightFormatError(f"mode key {key!r} is not an integer") from None
        widths = entry.get("widths")
        layers = entry.get("layers")
        if not widths or not layers or len(layers) != len(widths) - 1:
            raise WeightFormatError(f"mode {key}: widths and layers are inconsistent")
        weights, biases = [], []
        for k, layer in enumerate(layers):
            W = np.asarray(layer.get("W"), dtype=float)
            b = np.asarray(layer.get("b"), dtype=float)
            if W.ndim != 2 or W.shape != (widths[k + 1], widths[k]) or b.shape != (widths[k + 1],):
                raise WeightFormatError(
                    f"mode {key} layer {k}: shape mismatch, expected "
                    f"({widths[k + 1]}, {widths[k]}) got {W.shape} / {b.shape}"
                )
            weights.append(W)
            biases.append(b)
        if widths[0] != equilibrium.shape[0] or widths[-1] != 1:
            raise WeightFormatError(f"mode {key}: input/output widths inconsistent")
        nets[mid] = LyapunovNet(weights, biases, equilibrium)
    if not nets:
        raise WeightFormatError("no modes in weight document")
    return MLFBundle(nets)


# ---------------------------------------------------------------------------
# Analytic candidate (verification test hook)
# ---------------------------------------------------------------------------

@dataclass
class QuadraticCandidate:
    """V(x) = ||x - x*||^2 with exact gradients and tight enclosures.

    Bypasses the network entirely; used to exercise the certifier against a
    candidate whose behavior is known in closed form.
    """

    equilibrium: np.ndarray

    def __post_init__(self):
        self.equilibrium = np.asarray(self.equilibrium, dtype=float)

    def value_batch(self, X: np.ndarray) -> np.ndarray:
        d = np.asarray(X, dtype=float) - self.equilibrium
        return np.sum(d * d, axis=-1)

    def value(self, x) -> float:
        return float(self.value_batch(np.asarray(x, dtype=float)[None, :])[0])

    def grad_batch(self, X: np.ndarray) -> np.ndarray:
        return 2.0 * (np.asarray(X, dtype=float) - self.equilibrium)

    def grad_input(self, x) -> np.ndarray:
        return self.grad_batch(np.asarray(x, dtype=float)[None, :])[0]

    def lie_batch(self, X: np.ndarray, F: np.ndarray) -> np.ndarray:
        return np.sum(self.grad_batch(X) * np.asarray(F, dtype=float), axis=-1)

    def interval_value_arrays(self, lo, hi):
        dl, dh = iv.isub(np.asarray(lo, float), np.asarray(hi, float),
                         self.equilibrium, self.equilibrium)
        sl, sh = iv.ipow(dl, dh, 2)
        return iv.isum(sl, sh, axis=-1)

    def interval_grad_arrays(self, lo, hi):
        dl, dh = iv.isub(np.asarray(lo, float), np.asarray(hi, float),
                         self.equilibrium, self.equilibrium)
        return iv.iscale(2.0, dl, dh)

    def refresh(self) -> None:
        pass
