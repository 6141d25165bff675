"""Assumption and rate-envelope verification oracles.

All expectation checks enumerate the sampling support exactly, never by
Monte-Carlo, so a failing check is deterministic and reproducible.  Margins
are normalized per probe point; a check passes exactly when its worst
normalized margin is >= -tolerance, and every failing report carries a
witness point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import constants as consts
from .errors import NoEquilibriumError, TooFewSeedsError
from .operators import FiniteSumOperator
from .sampling import SamplingScheme, enumerate_support
from .solvers import RunTrace

DEFAULT_RADIUS = 10.0

# Exact-enumeration identities: slack for accumulated rounding only.
EXACT_TOL = 1e-12

# Inequality checks: inequalities hold exactly, margins carry rounding noise.
INEQUALITY_TOL = 1e-9


@dataclass
class CheckReport:
    """Outcome of one check; self-certifying.

    ``passed`` is always exactly ``worst_margin >= -tolerance``; margins are
    normalized (dimensionless).  ``witness`` is the probe point (or pair)
    attaining the worst margin whenever the check fails.
    """

    name: str
    passed: bool
    worst_margin: float
    tolerance: float
    points: int
    witness: object | None = None
    details: dict = field(default_factory=dict)

    @staticmethod
    def from_margins(name, margins, tolerance, points, witnesses=None, details=None):
        worst = int(np.argmin(margins))
        worst_margin = float(margins[worst])
        passed = worst_margin >= -tolerance
        witness = None
        if not passed and witnesses is not None:
            witness = witnesses[worst]
        return CheckReport(
            name=name,
            passed=passed,
            worst_margin=worst_margin,
            tolerance=tolerance,
            points=points,
            witness=witness,
            details=details or {},
        )


def _equilibrium(op: FiniteSumOperator) -> np.ndarray:
    if not op.has_equilibrium:
        raise NoEquilibriumError(f"{type(op).__name__} has no computable equilibrium")
    return op.equilibrium()


def sample_points(
    center: np.ndarray, count: int, radius: float, rng: np.random.Generator
) -> np.ndarray:
    """Gaussian probe points around ``center``, rescaled into the radius ball.

    Directions are standard normal scaled by radius/sqrt(d); any draw whose
    distance exceeds the radius is pulled back onto the sphere.
    """
    d = center.shape[0]
    pts = center + rng.standard_normal((count, d)) * (radius / np.sqrt(d))
    dist = np.linalg.norm(pts - center, axis=1)
    over = dist > radius
    if np.any(over):
        pts[over] = center + (pts[over] - center) * (radius / dist[over])[:, None]
    return pts


def _support_weights(scheme: SamplingScheme):
    """Support probabilities and the dense estimator-weight matrix: row k
    maps stacked component values straight to the k-th support estimate,
    estimate_k = W[k] @ values (the 1/n is folded into the weights)."""
    support = enumerate_support(scheme)
    probs = np.array([p for p, _ in support])
    w = np.zeros((len(support), scheme.n))
    for k, (_, vec) in enumerate(support):
        w[k] = vec.dense(scheme.n) / scheme.n
    return probs, w


def _component_values(op: FiniteSumOperator, x: np.ndarray) -> np.ndarray:
    fast = getattr(op, "component_values", None)
    if fast is not None:
        return fast(x)
    return np.stack([op.component_value(i, x) for i in range(op.n)])


def check_ec(
    op: FiniteSumOperator,
    scheme: SamplingScheme,
    ell_xi: float,
    points: int = 500,
    radius: float = DEFAULT_RADIUS,
    rng: np.random.Generator | None = None,
) -> CheckReport:
    """Expected co-coercivity with constant ell_xi, by exact enumeration.

    At each probe x the primary margin is

        ell_xi * <value(x), x - x*>  -  E |value_v(x) - value_v(x*)|^2

    and the secondary margin checks the derived second-moment bound
    2 ell_xi <value(x), x - x*> + 2 sigma^2 - E |value_v(x)|^2.  Margins are
    normalized by the magnitude of the terms involved.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    x_star = _equilibrium(op)
    probs, w = _support_weights(scheme)
    vals_star = _component_values(op, x_star)
    est_star = w @ vals_star
    sigma_sq = float(probs @ np.einsum("kj,kj->k", est_star, est_star))

    pts = sample_points(x_star, points, radius, rng)
    margins = np.empty(2 * points)
    witnesses = []
    for idx in range(points):
        x = pts[idx]
        vals = _component_values(op, x)
        inner = float(vals.mean(axis=0) @ (x - x_star))
        est_diff = w @ (vals - vals_star)
        second_diff = float(probs @ np.einsum("kj,kj->k", est_diff, est_diff))
        est = w @ vals
        second = float(probs @ np.einsum("kj,kj->k", est, est))
        scale1 = 1.0 + abs(ell_xi * inner) + second_diff
        scale2 = 1.0 + abs(2.0 * ell_xi * inner) + 2.0 * sigma_sq + second
        margins[2 * idx] = (ell_xi * inner - second_diff) / scale1
        margins[2 * idx + 1] = (
            2.0 * ell_xi * inner + 2.0 * sigma_sq - second
        ) / scale2
        witnesses.extend([x, x])
    return CheckReport.from_margins(
        "expected_cocoercivity",
        margins,
        INEQUALITY_TOL,
        points,
        witnesses,
        details={"ell_xi": ell_xi, "sigma_sq": sigma_sq, "radius": radius},
    )


def check_monotonicity_class(
    op: FiniteSumOperator,
    mu: float,
    ell_star: float,
    points: int = 500,
    radius: float = DEFAULT_RADIUS,
    rng: np.random.Generator | None = None,
) -> CheckReport:
    """Quasi-strong monotonicity and co-coercivity around the equilibrium.

    Sub-checks at random points: (a) <value(x), x-x*> >= mu |x-x*|^2 and
    (b) |value(x) - value(x*)|^2 <= ell_star <value(x) - value(x*), x-x*>.
    A plain monotonicity probe over random pairs is reported as
    informational only (details["monotone_min"]); quasi-strongly monotone
    operators may legitimately fail it.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    x_star = _equilibrium(op)
    val_star = op.full_value(x_star)
    pts = sample_points(x_star, points, radius, rng)
    margins = np.empty(2 * points)
    witnesses = []
    for idx in range(points):
        x = pts[idx]
        val = op.full_value(x)
        diff = x - x_star
        dist_sq = float(diff @ diff)
        inner = float(val @ diff)
        vdiff = val - val_star
        inner_star = float(vdiff @ diff)
        vnorm_sq = float(vdiff @ vdiff)
        scale_a = 1.0 + abs(inner) + mu * dist_sq
        scale_b = 1.0 + vnorm_sq + abs(ell_star * inner_star)
        margins[2 * idx] = (inner - mu * dist_sq) / scale_a
        margins[2 * idx + 1] = (ell_star * inner_star - vnorm_sq) / scale_b
        witnesses.extend([x, x])

    pairs = sample_points(x_star, 2 * points, radius, rng).reshape(points, 2, -1)
    mono_min = np.inf
    mono_witness = None
    for x, y in pairs:
        gap = float((op.full_value(x) - op.full_value(y)) @ (x - y))
        if gap < mono_min:
            mono_min = gap
            mono_witness = (x, y)
    return CheckReport.from_margins(
        "monotonicity_class",
        margins,
        INEQUALITY_TOL,
        points,
        witnesses,
        details={
            "mu": mu,
            "ell_star": ell_star,
            "monotone_min": mono_min,
            "monotone_witness": mono_witness,
        },
    )


def monotonicity_gap(op: FiniteSumOperator, x, y) -> float:
    """<value(x) - value(y), x - y>; negative values witness non-monotonicity."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float((op.full_value(x) - op.full_value(y)) @ (x - y))


def check_unbiasedness(
    op: FiniteSumOperator,
    scheme: SamplingScheme,
    points: int = 50,
    radius: float = DEFAULT_RADIUS,
    rng: np.random.Generator | None = None,
) -> CheckReport:
    """Exact-enumeration means of the two estimators against their targets.

    At each probe x, E[value_v(x)] must match value(x) and the expectation
    of the Hamiltonian-gradient estimator over independent (u, v) pairs must
    match J(x)^T value(x), both to 1e-12 relative.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    center = op.equilibrium() if op.has_equilibrium else np.zeros(op.dim)
    probs, w = _support_weights(scheme)
    # Targets go through the same weighted-contraction code path as the
    # support estimates (uniform weights 1/n), so the noise-free full-batch
    # scheme reproduces them exactly, not merely to rounding.
    w_uniform = np.full((1, scheme.n), 1.0 / scheme.n)
    pts = sample_points(center, points, radius, rng)
    margins = np.empty(2 * points)
    witnesses = []
    for idx in range(points):
        x = pts[idx]
        vals = _component_values(op, x)
        target = (w_uniform @ vals)[0]
        mean_est = probs @ (w @ vals)
        res_val = float(np.linalg.norm(mean_est - target))
        scale_val = 1.0 + float(np.linalg.norm(target))

        jacs = np.stack([op.component_jacobian(i, x) for i in range(op.n)])
        # Literal enumeration over all (v, u) support pairs of the
        # Hamiltonian-gradient estimator (J_v^T val_u + J_u^T val_v) / 2.
        j_est = np.einsum("kn,nij->kij", w, jacs)
        val_est = w @ vals
        cross = np.zeros(op.dim)
        for k in range(probs.size):
            jt = j_est[k].T
            for l in range(probs.size):
                cross += (
                    probs[k]
                    * probs[l]
                    * (0.5 * (jt @ val_est[l] + j_est[l].T @ val_est[k]))
                )
        target_h = np.einsum("kn,nij->kij", w_uniform, jacs)[0].T @ target
        res_h = float(np.linalg.norm(cross - target_h))
        scale_h = 1.0 + float(np.linalg.norm(target_h))

        margins[2 * idx] = EXACT_TOL - res_val / scale_val
        margins[2 * idx + 1] = EXACT_TOL - res_h / scale_h
        witnesses.extend([x, x])
    return CheckReport.from_margins(
        "unbiasedness", margins, 0.0, points, witnesses
    )


def check_bound_envelope(
    traces: list[RunTrace],
    bound: str,
    params: dict,
    slack: float,
    k_range: tuple[int, int] | None = None,
) -> CheckReport:
    """Seed-averaged squared distance against slack * closed-form bound.

    Requires at least 30 traces unless the bound is noiseless (all sigma
    terms zero), in which case a single deterministic trace is a valid
    degenerate set.  Switching bounds are only evaluated from their switch
    point onward.  The margin at iteration k is slack - mean_k / bound_k.
    """
    if not traces:
        raise TooFewSeedsError("no traces supplied")
    noise = params.get("sigma_sq", 0.0) + params.get("sigma_h_sq", 0.0)
    if len(traces) < 30 and noise > 0.0:
        raise TooFewSeedsError(f"need >= 30 traces for noisy bounds, got {len(traces)}")
    if any(t.dist_sq is None for t in traces):
        raise NoEquilibriumError("envelope check needs distance-tracked traces")
    length = min(len(t.dist_sq) for t in traces)
    dists = np.stack([t.dist_sq[:length] for t in traces])
    mean = dists.mean(axis=0)
    r0_sq = float(mean[0])

    k_lo, k_hi = 0, length - 1
    if bound == consts.SGDA_SWITCHING:
        k_lo = consts.sgda_switch_point(params["ell_xi"], params["mu"])
    elif bound == consts.SCO_SWITCHING:
        k_lo = int(
            np.ceil(
                consts.sco_switch_point(
                    params["ell_xi"], params["cal_l_h"], params["mu"], params["mu_h"]
                )
            )
        )
    if k_range is not None:
        k_lo = max(k_lo, k_range[0])
        k_hi = min(k_hi, k_range[1])
    if k_lo < 1:
        k_lo = 1 if bound in (consts.SGDA_SWITCHING, consts.SCO_SWITCHING) else 0
    if k_hi < k_lo:
        raise TooFewSeedsError("no iterations in the requested envelope range")

    ks = np.arange(k_lo, k_hi + 1)
    margins = np.empty(ks.size)
    for j, k in enumerate(ks):
        b = consts.theoretical_bound(bound, int(k), r0_sq, **params)
        margins[j] = slack - mean[k] / b
    worst = int(np.argmin(margins))
    return CheckReport(
        name=f"bound_envelope[{bound}]",
        passed=bool(margins[worst] >= 0.0),
        worst_margin=float(margins[worst]),
        tolerance=0.0,
        points=ks.size,
        witness=int(ks[worst]),
        details={"slack": slack, "k_range": (int(ks[0]), int(ks[-1])), "seeds": len(traces)},
    )
