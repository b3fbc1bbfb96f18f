"""Sound verification of MLF conditions over the verification region.

The violation predicate collects every way a candidate bundle can fail:
some mode's value dips to zero or below, some mode's decrease condition
fails (Lie derivative >= 0 in continuous time, nonnegative one-step
difference in discrete time), or a candidate pair fails to drop across its
switching region. `phi_point` decides the predicate at a point; `certify`
decides it over the whole region with interval branch-and-bound:

* a box is cleared once enclosures prove every remaining clause strictly
  (clauses cleared on a parent stay cleared on its children);
* uncleared boxes have their centers point-checked, so genuine violations
  surface quickly; boxes shrink by longest-axis bisection until cleared or
  narrower than the resolution delta;
* minimal uncleared boxes are reported as resolution-limit points, which
  the CEGIS loop treats as counterexamples.

Interval comparisons are strict, so certification actually establishes the
open-side conditions (V > margin, sup of the decrease quantity < -margin);
this is the complement of the non-strict violation predicate, which plain
interval arithmetic could never refute at measure-zero equality sets.

`export_smtlib` emits the same existential query as SMT-LIB2 text for
users who prefer an external delta-SAT solver.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import intervals as iv
from .expr import Binary, Num, Power, Unary, Var
from .model import BoxRegion, SwitchedSystem, TimeSemantics
from .net import LyapunovNet, MLFBundle

log = logging.getLogger("nmlf")

POSITIVITY = "positivity"
DECREASE = "decrease"
SWITCHING = "switching"

CERTIFIED = "certified"
VIOLATED = "violated"
RESOLUTION_LIMIT = "resolution-limit"


@dataclass(frozen=True)
class Violation:
    """A labeled counterexample: which clause fails, and where."""

    kind: str  # positivity | decrease | switching
    mode: int
    target: int | None
    point: tuple[float, ...]

    def label(self) -> str:
        if self.kind == SWITCHING:
            return f"switching({self.mode},{self.target})"
        return f"{self.kind}({self.mode})"

    def to_dict(self) -> dict:
        return {"label": self.label(), "point": list(self.point)}


@dataclass(frozen=True)
class VerifyConfig:
    """Certifier knobs.

    delta is the minimal box width before a box is declared
    resolution-limited. margin strengthens the certified conditions to
    V > margin and decrease < -margin (0 keeps the plain strict check).
    check_switch_successor additionally requires the discrete switching
    decrease on the destination-mapped state; such failures can only drive
    refinement, never a violated status, since the printed predicate is
    what point checks confirm.
    """

    delta: float = 0.002
    margin: float = 0.0
    workers: int = 1
    max_counterexamples: int = 16
    check_switch_successor: bool = False
    presweep_resolution: int = 200

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.margin < 0:
            raise ValueError("margin must be >= 0")


@dataclass
class VerificationOutcome:
    status: str
    counterexamples: list[Violation]
    boxes_processed: int = 0
    max_depth: int = 0

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "counterexamples": [v.to_dict() for v in self.counterexamples],
            "boxes_processed": self.boxes_processed,
            "max_depth": self.max_depth,
        }


def _nets(bundle) -> dict:
    return bundle.nets if isinstance(bundle, MLFBundle) else dict(bundle)


# ---------------------------------------------------------------------------
# Point predicate
# ---------------------------------------------------------------------------

def phi_point(bundle, sys: SwitchedSystem, x) -> Violation | None:
    """First violated clause at x, scanning modes ascending then pairs.

    x must lie in the verification region; the predicate uses the paper's
    non-strict comparisons (V <= 0, decrease >= 0, V_j >= V_i).
    """
    x = np.asarray(x, dtype=float)
    if not sys.in_verification_region(x):
        raise ValueError(f"point {x.tolist()} is outside the verification region")
    nets = _nets(bundle)
    X = x[None, :]
    continuous = sys.time_semantics is TimeSemantics.CONTINUOUS
    for mid in sys.mode_ids:
        net = nets[mid]
        if float(net.value_batch(X)[0]) <= 0.0:
            return Violation(POSITIVITY, mid, None, tuple(x.tolist()))
        if continuous:
            F = sys.eval_dynamics_batch(mid, X)
            dec = float(net.lie_batch(X, F)[0])
        else:
            Y = sys.eval_dynamics_batch(mid, X)
            dec = float(net.value_batch(Y)[0] - net.value_batch(X)[0])
        if dec >= 0.0:
            return Violation(DECREASE, mid, None, tuple(x.tolist()))
    for (i, j) in sys.switch_pairs:
        if sys.switch_region(i, j).contains(x):
            if float(nets[j].value_batch(X)[0]) >= float(nets[i].value_batch(X)[0]):
                return Violation(SWITCHING, i, j, tuple(x.tolist()))
    return None


def _violation_mask(bundle, sys: SwitchedSystem, X: np.ndarray) -> np.ndarray:
    """Vectorized phi over points already inside the verification region."""
    nets = _nets(bundle)
    continuous = sys.time_semantics is TimeSemantics.CONTINUOUS
    bad = np.zeros(len(X), dtype=bool)
    for mid in sys.mode_ids:
        net = nets[mid]
        V = net.value_batch(X)
        bad |= V <= 0.0
        if continuous:
            F = sys.eval_dynamics_batch(mid, X)
            bad |= net.lie_batch(X, F) >= 0.0
        else:
            Y = sys.eval_dynamics_batch(mid, X)
            bad |= net.value_batch(Y) - V >= 0.0
    for (i, j) in sys.switch_pairs:
        inside = sys.switch_region(i, j).contains_batch(X)
        if np.any(inside):
            diff = nets[j].value_batch(X) - nets[i].value_batch(X)
            bad |= inside & (diff >= 0.0)
    return bad


# ---------------------------------------------------------------------------
# Grid falsifier (independent oracle)
# ---------------------------------------------------------------------------

def grid_falsify(bundle, sys: SwitchedSystem, resolution: int) -> Violation | None:
    """Exhaustive scan of a uniform lattice over the verification region.

    Returns the first violating lattice point in row-major order, labeled
    via phi_point, or None. Diagnostic tool: a None answer is evidence, not
    a certificate.
    """
    bbox = sys.domain.bounding_box()
    axes = [np.linspace(b.lo, b.hi, resolution) for b in bbox.intervals]
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.stack([m.ravel() for m in mesh], axis=-1)
    feasible = sys.in_verification_region_batch(X)
    idx = np.nonzero(feasible)[0]
    if len(idx) == 0:
        return None
    pts = X[idx]
    bad = np.zeros(len(X), dtype=bool)
    chunk = 200_000
    for start in range(0, len(pts), chunk):
        sel = slice(start, start + chunk)
        bad[idx[sel]] = _violation_mask(bundle, sys, pts[sel])
    for k in np.nonzero(bad)[0]:
        found = phi_point(bundle, sys, X[k])
        if found is not None:  # guards against last-ulp batch/point differences
            return found
    return None


# ---------------------------------------------------------------------------
# Branch-and-bound certifier
# ---------------------------------------------------------------------------

def _clause_list(sys: SwitchedSystem, vcfg: VerifyConfig):
    clauses: list[tuple] = []
    for mid in sys.mode_ids:
        clauses.append(("pos", mid))
        clauses.append(("dec", mid))
    for (i, j) in sys.switch_pairs:
        clauses.append(("sw", i, j))
        if vcfg.check_switch_successor and sys.time_semantics is TimeSemantics.DISCRETE:
            clauses.append(("swsucc", i, j))
    return clauses


def _ball_filters(sys: SwitchedSystem, BL: np.ndarray, BH: np.ndarray):
    """(outside_domain, inside_exclusion) flags for a batch of boxes."""
    dom = sys.domain
    eq = sys.equilibrium
    eps = dom.epsilon_b
    d_lo, d_hi = _dist_sq(BL, BH, eq)
    inside_excl = d_hi < iv._down(eps * eps)
    if dom.kind == "ball":
        c_lo, c_hi = _dist_sq(BL, BH, np.asarray(dom.center))
        outside = c_lo > iv._up(dom.radius * dom.radius)
    else:
        outside = np.zeros(len(BL), dtype=bool)
    return outside, inside_excl


def _dist_sq(BL: np.ndarray, BH: np.ndarray, center: np.ndarray):
    dl, dh = iv.isub(BL, BH, center, center)
    sl, sh = iv.ipow(dl, dh, 2)
    return iv.isum(sl, sh, axis=-1)


def _clause_cleared(bundle, sys: SwitchedSystem, clause: tuple, BL: np.ndarray,
                    BH: np.ndarray, margin: float) -> np.ndarray:
    """Which boxes of the batch provably satisfy the clause's complement."""
    nets = _nets(bundle)
    continuous = sys.time_semantics is TimeSemantics.CONTINUOUS
    kind = clause[0]
    if kind == "pos":
        net = nets[clause[1]]
        v_lo, _ = net.interval_value_arrays(BL, BH)
        return v_lo > margin
    if kind == "dec":
        net = nets[clause[1]]
        if continuous:
            g_lo, g_hi = net.interval_grad_arrays(BL, BH)
            f_lo, f_hi = sys.eval_dynamics_intervals(clause[1], BL, BH)
            _, lie_hi = iv.dot_enclosure(g_lo, g_hi, f_lo, f_hi)
            return lie_hi < -margin
        f_lo, f_hi = sys.eval_dynamics_intervals(clause[1], BL, BH)
        vf_lo, vf_hi = net.interval_value_arrays(f_lo, f_hi)
        v_lo, v_hi = net.interval_value_arrays(BL, BH)
        _, diff_hi = iv.isub(vf_lo, vf_hi, v_lo, v_hi)
        return diff_hi < -margin
    # switching clauses act on the intersection with the pair's region
    i, j = clause[1], clause[2]
    region = sys.switch_region(i, j)
    il = np.maximum(BL, region.lo)
    ih = np.minimum(BH, region.hi)
    empty = np.any(il > ih, axis=-1)
    il = np.where(empty[..., None], BL, il)
    ih = np.where(empty[..., None], BH, ih)
    outside, inside_excl = _ball_filters(sys, il, ih)
    vacuous = empty | outside | inside_excl
    if kind == "sw":
        j_lo, j_hi = nets[j].interval_value_arrays(il, ih)
        i_lo, i_hi = nets[i].interval_value_arrays(il, ih)
    else:  # swsucc: destination-mapped successor (discrete only)
        f_lo, f_hi = sys.eval_dynamics_intervals(j, il, ih)
        j_lo, j_hi = nets[j].interval_value_arrays(f_lo, f_hi)
        i_lo, i_hi = nets[i].interval_value_arrays(il, ih)
    _, diff_hi = iv.isub(j_lo, j_hi, i_lo, i_hi)
    return vacuous | (diff_hi < -margin)


def _process_batch(bundle, sys: SwitchedSystem, clauses, vcfg: VerifyConfig,
                   BL: np.ndarray, BH: np.ndarray, masks: np.ndarray):
    """Evaluate one batch of boxes; returns per-box surviving clause masks.

    A returned mask of 0 means the box is fully cleared.
    """
    outside, inside_excl = _ball_filters(sys, BL, BH)
    alive = ~(outside | inside_excl)
    out = np.zeros(len(BL), dtype=np.int64)
    for c_idx, clause in enumerate(clauses):
        bit = 1 << c_idx
        rows = np.nonzero(alive & ((masks & bit) != 0))[0]
        if len(rows) == 0:
            continue
        cleared = _clause_cleared(bundle, sys, clause, BL[rows], BH[rows], vcfg.margin)
        keep = rows[~cleared]
        out[keep] |= bit
    return out


def certify(bundle, sys: SwitchedSystem, vcfg: VerifyConfig | None = None) -> VerificationOutcome:
    """Decide the violation predicate over the verification region.

    Sound: a certified status means interval enclosures proved every clause
    on every box meeting the region. A fast lattice sweep runs first so
    grossly violated candidates fail without any subdivision work.
    """
    vcfg = vcfg or VerifyConfig()
    clauses = _clause_list(sys, vcfg)
    if any(not hasattr(_nets(bundle)[mid], "interval_value_arrays") for mid in sys.mode_ids):
        raise TypeError("bundle candidates must provide interval enclosures")
    if set(_nets(bundle)) != set(sys.mode_ids):
        raise ValueError(
            f"bundle modes {sorted(_nets(bundle))} do not match system modes {list(sys.mode_ids)}"
        )

    cexs = _presweep(bundle, sys, vcfg)
    if cexs:
        return VerificationOutcome(VIOLATED, cexs)

    bbox = sys.domain.bounding_box()
    full_mask = (1 << len(clauses)) - 1
    stack: list[tuple[np.ndarray, np.ndarray, int, int]] = [
        (bbox.lo.astype(float), bbox.hi.astype(float), full_mask, 0)
    ]
    violations: list[Violation] = []
    limit_points: list[Violation] = []
    boxes_processed = 0
    max_depth = 0
    batch = 256
    pool = ThreadPoolExecutor(max_workers=vcfg.workers) if vcfg.workers > 1 else None
    try:
        while stack:
            take = min(batch, len(stack))
            items = stack[-take:]
            del stack[-take:]
            BL = np.stack([it[0] for it in items])
            BH = np.stack([it[1] for it in items])
            masks = np.array([it[2] for it in items], dtype=np.int64)
            depths = np.array([it[3] for it in items])
            boxes_processed += take
            max_depth = max(max_depth, int(depths.max()))

            if pool is not None:
                chunks = np.array_split(np.arange(take), vcfg.workers)
                parts = list(
                    pool.map(
                        lambda ix: _process_batch(bundle, sys, clauses, vcfg, BL[ix], BH[ix], masks[ix]),
                        [ix for ix in chunks if len(ix)],
                    )
                )
                new_masks = np.concatenate(parts)
            else:
                new_masks = _process_batch(bundle, sys, clauses, vcfg, BL, BH, masks)

            open_rows = np.nonzero(new_masks != 0)[0]
            if len(open_rows) == 0:
                continue

            # Point-check centers of still-open boxes: true violations
            # surface immediately instead of waiting for full refinement.
            centers = 0.5 * (BL[open_rows] + BH[open_rows])
            feasible = sys.in_verification_region_batch(centers)
            if np.any(feasible):
                f_rows = np.nonzero(feasible)[0]
                hits = _violation_mask(bundle, sys, centers[f_rows])
                for r in f_rows[np.nonzero(hits)[0]]:
                    found = phi_point(bundle, sys, centers[r])
                    if found is None:
                        continue
                    violations.append(found)
                    if len(violations) >= vcfg.max_counterexamples:
                        return VerificationOutcome(
                            VIOLATED, violations, boxes_processed, max_depth
                        )

            widths = BH[open_rows] - BL[open_rows]
            for pos, row in enumerate(open_rows):
                lo, hi = BL[row], BH[row]
                w = widths[pos]
                if float(w.max()) < vcfg.delta:
                    point = _feasible_point(sys, lo, hi)
                    if point is not None:
                        limit_points.append(
                            _limit_violation(clauses, int(new_masks[row]), point)
                        )
                        if len(limit_points) >= vcfg.max_counterexamples and not violations:
                            return VerificationOutcome(
                                RESOLUTION_LIMIT, limit_points, boxes_processed, max_depth
                            )
                    continue
                axis = int(np.argmax(w))
                mid = 0.5 * (lo[axis] + hi[axis])
                lo2 = lo.copy()
                lo2[axis] = mid
                hi1 = hi.copy()
                hi1[axis] = mid
                stack.append((lo, hi1, int(new_masks[row]), int(depths[row]) + 1))
                stack.append((lo2, hi, int(new_masks[row]), int(depths[row]) + 1))
    finally:
        if pool is not None:
            pool.shutdown(wait=False)

    if violations:
        return VerificationOutcome(VIOLATED, violations, boxes_processed, max_depth)
    if limit_points:
        return VerificationOutcome(RESOLUTION_LIMIT, limit_points, boxes_processed, max_depth)
    return VerificationOutcome(CERTIFIED, [], boxes_processed, max_depth)


def _presweep(bundle, sys: SwitchedSystem, vcfg: VerifyConfig) -> list[Violation]:
    bbox = sys.domain.bounding_box()
    axes = [np.linspace(b.lo, b.hi, vcfg.presweep_resolution) for b in bbox.intervals]
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.stack([m.ravel() for m in mesh], axis=-1)
    X = X[sys.in_verification_region_batch(X)]
    if len(X) == 0:
        return []
    bad = np.nonzero(_violation_mask(bundle, sys, X))[0]
    found = (phi_point(bundle, sys, X[k]) for k in bad)
    confirmed = [v for v in found if v is not None]
    return confirmed[: vcfg.max_counterexamples]


def _feasible_point(sys: SwitchedSystem, lo: np.ndarray, hi: np.ndarray) -> np.ndarray | None:
    """Some point of the box inside the verification region, if any."""
    center = 0.5 * (lo + hi)
    candidates = [center]
    for k in range(len(lo)):
        for v in (lo[k], hi[k]):
            c = center.copy()
            c[k] = v
            candidates.append(c)
    candidates.extend(np.stack(np.meshgrid(*zip(lo, hi), indexing="ij"), axis=-1).reshape(-1, len(lo)))
    for c in candidates:
        if sys.in_verification_region(c):
            return c
    return None


def _limit_violation(clauses, mask: int, point: np.ndarray) -> Violation:
    for c_idx, clause in enumerate(clauses):
        if mask & (1 << c_idx):
            if clause[0] == "pos":
                return Violation(POSITIVITY, clause[1], None, tuple(point.tolist()))
            if clause[0] == "dec":
                return Violation(DECREASE, clause[1], None, tuple(point.tolist()))
            return Violation(SWITCHING, clause[1], clause[2], tuple(point.tolist()))
    raise AssertionError("limit box with empty clause mask")


# ---------------------------------------------------------------------------
# SMT-LIB export
# ---------------------------------------------------------------------------

def _smt_num(v: float) -> str:
    if v < 0:
        return f"(- {repr(-v)})"
    return repr(float(v))


def _smt_expr(node, var_names) -> str:
    if isinstance(node, Num):
        return _smt_num(node.value)
    if isinstance(node, Var):
        return var_names[node.index]
    if isinstance(node, Unary):
        arg = _smt_expr(node.arg, var_names)
        op = {"neg": "-", "sin": "sin", "cos": "cos", "tan": "tan", "exp": "exp", "abs": "abs"}[node.op]
        return f"({op} {arg})"
    if isinstance(node, Power):
        base = _smt_expr(node.base, var_names)
        if node.exponent == 0:
            return "1.0"
        return "(* " + " ".join([base] * node.exponent) + ")" if node.exponent > 1 else base
    lhs = _smt_expr(node.lhs, var_names)
    rhs = _smt_expr(node.rhs, var_names)
    return f"({node.op} {lhs} {rhs})"


def _smt_affine(W: np.ndarray, b: float, terms: list[str]) -> str:
    parts = [f"(* {_smt_num(w)} {t})" for w, t in zip(W, terms)]
    parts.append(_smt_num(float(b)))
    return "(+ " + " ".join(parts) + ")"


def _smt_net_value(net: LyapunovNet, prefix: str, inputs: list[str], body: str) -> str:
    """Wrap `body` in lets computing {prefix}_v = V(inputs)."""
    acts = inputs
    text_parts = []
    for l, (W, bias) in enumerate(zip(net.weights[:-1], net.biases[:-1])):
        bindings = " ".join(
            f"({prefix}_a{l}_{k} (tanh {_smt_affine(W[k], bias[k], acts)}))"
            for k in range(W.shape[0])
        )
        text_parts.append(f"(let ({bindings})")
        acts = [f"{prefix}_a{l}_{k}" for k in range(W.shape[0])]
    out = _smt_affine(net.weights[-1][0], net.biases[-1][0], acts)
    v_def = f"(- {out} {_smt_num(net._v_star)})"
    text_parts.append(f"(let (({prefix}_v {v_def}))")
    return " ".join(text_parts) + f" {body}" + ")" * (len(net.weights[:-1]) + 1)


def _smt_net_lie(net: LyapunovNet, prefix: str, inputs: list[str],
                 tangent: list[str], body: str) -> str:
    """Wrap `body` in lets computing {prefix}_lie = grad(V)(x) . f(x)."""
    acts, tans = inputs, tangent
    text_parts = []
    for l, (W, bias) in enumerate(zip(net.weights[:-1], net.biases[:-1])):
        a_bind = " ".join(
            f"({prefix}_a{l}_{k} (tanh {_smt_affine(W[k], bias[k], acts)}))"
            for k in range(W.shape[0])
        )
        text_parts.append(f"(let ({a_bind})")
        t_bind = " ".join(
            f"({prefix}_t{l}_{k} (* (- 1.0 (* {prefix}_a{l}_{k} {prefix}_a{l}_{k})) "
            f"{_smt_affine(W[k], 0.0, tans)}))"
            for k in range(W.shape[0])
        )
        text_parts.append(f"(let ({t_bind})")
        acts = [f"{prefix}_a{l}_{k}" for k in range(W.shape[0])]
        tans = [f"{prefix}_t{l}_{k}" for k in range(W.shape[0])]
    lie = _smt_affine(net.weights[-1][0], 0.0, tans)
    text_parts.append(f"(let (({prefix}_lie {lie}))")
    return " ".join(text_parts) + f" {body}" + ")" * (2 * len(net.weights[:-1]) + 1)


def export_smtlib(bundle, sys: SwitchedSystem, vcfg: VerifyConfig | None = None) -> str:
    """SMT-LIB2 query asserting a violation exists in the verification region.

    An `unsat` answer from a (delta-)SAT solver over nonlinear reals is a
    certificate; `sat` yields a counterexample. tanh appears as the
    solver-supported transcendental, so target dReal or a comparable tool.
    """
    nets = _nets(bundle)
    for net in nets.values():
        if not isinstance(net, LyapunovNet):
            raise TypeError("only LyapunovNet bundles can be exported")
    names = list(sys.state_vars)
    continuous = sys.time_semantics is TimeSemantics.CONTINUOUS
    lines = ["(set-logic QF_NRA)"]
    for name in names:
        lines.append(f"(declare-const {name} Real)")

    def dist_sq(center) -> str:
        terms = [
            f"(* (- {names[k]} {_smt_num(center[k])}) (- {names[k]} {_smt_num(center[k])}))"
            for k in range(len(names))
        ]
        return "(+ " + " ".join(terms) + ")" if len(terms) > 1 else terms[0]

    dom = sys.domain
    if dom.kind == "ball":
        lines.append(f"(assert (<= {dist_sq(dom.center)} {_smt_num(dom.radius ** 2)}))")
    else:
        for k, b in enumerate(dom.box.intervals):
            lines.append(f"(assert (and (>= {names[k]} {_smt_num(b.lo)}) (<= {names[k]} {_smt_num(b.hi)})))")
    lines.append(f"(assert (>= {dist_sq(sys.equilibrium)} {_smt_num(dom.epsilon_b ** 2)}))")

    disjuncts = []
    for mid in sys.mode_ids:
        net = nets[mid]
        pfx = f"m{mid}"
        disjuncts.append(_smt_net_value(net, pfx, names, f"(<= {pfx}_v 0.0)"))
        f_terms = [_smt_expr(e.root, names) for e in sys.mode(mid).dynamics]
        if continuous:
            disjuncts.append(_smt_net_lie(net, f"{pfx}d", names, f_terms, f"(>= {pfx}d_lie 0.0)"))
        else:
            inner = _smt_net_value(net, f"{pfx}s", f_terms,
                                   _smt_net_value(net, f"{pfx}c", names,
                                                  f"(>= (- {pfx}s_v {pfx}c_v) 0.0)"))
            disjuncts.append(inner)
    for (i, j) in sys.switch_pairs:
        region = sys.switch_region(i, j)
        guards = [
            f"(and (>= {names[k]} {_smt_num(b.lo)}) (<= {names[k]} {_smt_num(b.hi)}))"
            for k, b in enumerate(region.intervals)
        ]
        body = _smt_net_value(nets[i], f"p{i}_{j}i", names,
                              _smt_net_value(nets[j], f"p{i}_{j}j", names,
                                             f"(>= (- p{i}_{j}j_v p{i}_{j}i_v) 0.0)"))
        disjuncts.append("(and " + " ".join(guards) + " " + body + ")")
    lines.append("(assert (or " + " ".join(disjuncts) + "))")
    lines.append("(check-sat)")
    lines.append("(exit)")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Minimal SMT-LIB reader (syntactic validation)
# ---------------------------------------------------------------------------

def parse_smtlib(text: str) -> list:
    """Parse SMT-LIB text into nested lists of atoms.

    Just enough of the grammar (atoms, parentheses, no strings/comments) to
    validate exported documents structurally.
    """
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0

    def read():
        nonlocal pos
        if pos >= len(tokens):
            raise ValueError("unexpected end of document")
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            items = []
            while tokens[pos] != ")":
                items.append(read())
                if pos >= len(tokens):
                    raise ValueError("unbalanced parentheses")
            pos += 1
            return items
        if tok == ")":
            raise ValueError("unbalanced ')'")
        return tok

    forms = []
    while pos < len(tokens):
        forms.append(read())
    return forms
