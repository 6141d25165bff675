"""Every constant the convergence statements consume.

Co-coercivity of a matrix M (the operator x -> Mx) means
|Mx|^2 <= ell * <x, Mx> for all x.  Three routes are implemented:

* ``exact``: the smallest valid ell, computed in closed form as the largest
  generalized eigenvalue of (M^T M, sym(M)) on the positive subspace of
  sym(M).  Valid in any dimension; this is what the game-constant pipeline
  uses, since every downstream inequality (expected co-coercivity, step-size
  ranges, bound envelopes) needs a genuine certificate.
* ``spectral``: 1 / min over nonzero eigenvalues of Re(1/lambda).  Cheap and
  standard for spectral-radius step-size reasoning, and exact for normal
  matrices, but it can undershoot the true constant on non-normal matrices
  (e.g. [[1,1],[-1,2]]: spectral 2, true constant 3), so it is offered for
  comparison, not used to certify.
* ``grid_oracle``: direct maximization of the ratio over random unit vectors
  plus local refinement, for dimensions <= 6.  An independent check of the
  other two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.optimize

from . import numerics
from .errors import (
    ConfigError,
    NoClosedFormError,
    NonSquareError,
    NotCocoerciveError,
    NotStronglyMonotoneError,
    StepSizeOutOfRangeError,
    SwitchNotReachedError,
    UnsupportedSchemeError,
)
from .operators import QuadraticGame
from .sampling import SamplingScheme, enumerate_support, scheme_stats

# Eigenvalues below this fraction of the spectral scale count as zero.
_ZERO_RTOL = 1e-12

# Step sizes may exceed their theoretical ceiling by this relative slop.
_STEP_SLOP = 1e-12


# ---------------------------------------------------------------------------
# matrix co-coercivity
# ---------------------------------------------------------------------------


def _cocoercivity_spectral(m: np.ndarray) -> float:
    lam = numerics.general_spectrum(m)
    scale = max(float(np.abs(lam).max(initial=0.0)), 1.0)
    nonzero = lam[np.abs(lam) > _ZERO_RTOL * scale]
    if nonzero.size == 0:
        if np.abs(m).max() == 0.0:
            return 0.0
        raise NotCocoerciveError("nonzero matrix with all-zero spectrum")
    re_inv = np.real(1.0 / nonzero)
    if re_inv.min() <= _ZERO_RTOL:
        raise NotCocoerciveError(
            f"eigenvalue with Re(1/lambda) = {re_inv.min():.3e} <= 0"
        )
    return float(1.0 / re_inv.min())


def _cocoercivity_exact(m: np.ndarray) -> float:
    sym = 0.5 * (m + m.T)
    evals, evecs = np.linalg.eigh(sym)
    scale = max(float(np.abs(evals).max(initial=0.0)), float(np.abs(m).max(initial=0.0)))
    if scale == 0.0:
        return 0.0
    tol = _ZERO_RTOL * scale
    if evals.min() < -tol:
        # <v, Mv> = v^T sym(M) v < 0 forces Mv != 0, so co-coercivity fails.
        raise NotCocoerciveError(
            f"symmetric part has negative eigenvalue {evals.min():.3e}"
        )
    null = evals <= tol
    if np.any(null):
        null_slice = m @ evecs[:, null]
        if np.abs(null_slice).max() > 1e-9 * scale:
            raise NotCocoerciveError(
                "direction with <x, Mx> = 0 but Mx != 0"
            )
        if np.all(null):
            return 0.0
    w = evecs[:, ~null] / np.sqrt(evals[~null])
    mw = m @ w
    return float(np.linalg.eigvalsh(mw.T @ mw).max())


def _cocoercivity_grid(m: np.ndarray, rng: np.random.Generator, samples: int) -> float:
    d = m.shape[0]
    if d > 6:
        raise ConfigError("grid oracle is limited to dimensions <= 6")
    scale = max(float(np.abs(m).max(initial=0.0)), 1.0)
    if np.abs(m).max() == 0.0:
        return 0.0
    pts = rng.standard_normal((samples, d))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    mx = pts @ m.T
    num = np.einsum("ij,ij->i", mx, mx)
    den = np.einsum("ij,ij->i", pts, mx)
    bad = (den <= 0.0) & (np.sqrt(num) > 1e-9 * scale)
    if np.any(bad):
        raise NotCocoerciveError("grid point with <x, Mx> <= 0 and Mx != 0")
    ok = den > 0.0
    ratios = num[ok] / den[ok]
    best = int(np.argmax(ratios))

    def negative_ratio(x):
        nrm = np.linalg.norm(x)
        if nrm == 0.0:
            return 0.0
        y = x / nrm
        mxv = m @ y
        dv = float(y @ mxv)
        if dv <= 0.0:
            return -np.inf if np.linalg.norm(mxv) > 1e-9 * scale else 0.0
        return -float(mxv @ mxv) / dv

    res = scipy.optimize.minimize(
        negative_ratio, pts[ok][best], method="Nelder-Mead",
        options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 5000},
    )
    if not np.isfinite(res.fun):
        raise NotCocoerciveError("refinement found <x, Mx> <= 0 and Mx != 0")
    return float(max(ratios.max(), -res.fun))


def matrix_cocoercivity(
    m,
    method: str = "exact",
    rng: np.random.Generator | None = None,
    samples: int = 100_000,
) -> float:
    """Co-coercivity constant of the linear operator x -> Mx.

    ``method`` is one of "exact", "spectral", "grid_oracle" (see module
    docstring).  The grid oracle takes an optional generator and sample
    count; it defaults to a fixed seed so results are reproducible.
    """
    a = numerics.as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise NonSquareError(f"expected square matrix, got {a.shape}")
    if method == "spectral":
        return _cocoercivity_spectral(a)
    if method == "exact":
        return _cocoercivity_exact(a)
    if method == "grid_oracle":
        if rng is None:
            rng = numerics.make_rng(20_240_601)
        return _cocoercivity_grid(a, rng, samples)
    raise ConfigError(f"unknown co-coercivity method {method!r}")


# ---------------------------------------------------------------------------
# game-level constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GameConstants:
    """Structural constants of one quadratic game.

    mu is the quasi-strong monotonicity modulus (smallest eigenvalue of the
    symmetric part of the mean Jacobian, positive by requirement); ell_i are
    per-component co-coercivity constants, ell the constant of the mean
    operator; sigma1_sq is the mean squared component norm at the
    equilibrium.  kappa_g = ell_xi / mu is filled in once a sampling scheme
    is chosen.
    """

    n: int
    mu: float
    ell_i: tuple[float, ...]
    ell: float
    ell_max: float
    sigma1_sq: float
    kappa_g: float | None = None


@dataclass(frozen=True)
class ECConstants:
    """Expected co-coercivity constant and operator noise for one scheme."""

    ell_xi: float
    sigma_sq: float


@dataclass(frozen=True)
class HamiltonianConstants:
    """Constants of H(x) = |mean value|^2 / 2 for one quadratic game."""

    mu_h: float
    l_h: float
    cal_l_h: float
    sigma_h_sq: float


def game_constants(game: QuadraticGame, method: str = "exact") -> GameConstants:
    """Structural constants of a quadratic game.

    Requires the symmetric part blkdiag(A, C) of the mean Jacobian to be
    positive definite (strong monotonicity); for affine operators this
    modulus coincides with the quasi-strong one.
    """
    j_mean = game.mean_jacobian()
    sym_eigs = numerics.symmetric_eigenvalues(0.5 * (j_mean + j_mean.T))
    mu = float(sym_eigs[0])
    if mu <= 0.0:
        raise NotStronglyMonotoneError(
            f"lambda_min of the symmetric mean Jacobian is {mu:.3e}"
        )
    ell_i = tuple(
        matrix_cocoercivity(game.component_jacobians[i], method) for i in range(game.n)
    )
    ell = matrix_cocoercivity(j_mean, method)
    x_star = game.equilibrium()
    vals = game.component_values(x_star)
    sigma1_sq = float(np.einsum("ij,ij->i", vals, vals).mean())
    return GameConstants(
        n=game.n,
        mu=mu,
        ell_i=ell_i,
        ell=ell,
        ell_max=max(ell_i),
        sigma1_sq=sigma1_sq,
    )


def minibatch_ell_xi(n: int, b: int, ell: float, ell_max: float) -> float:
    """Expected co-coercivity constant for uniform b-minibatch sampling."""
    if n == 1:
        return ell
    return (n / b) * (b - 1) / (n - 1) * ell + (1.0 / b) * (n - b) / (n - 1) * ell_max


def minibatch_sigma_sq(n: int, b: int, sigma1_sq: float) -> float:
    """Operator noise at the equilibrium for uniform b-minibatch sampling."""
    if n == 1:
        return 0.0
    return (1.0 / b) * (n - b) / (n - 1) * sigma1_sq


def ec_constants(
    gc: GameConstants,
    scheme: SamplingScheme,
    game: QuadraticGame | None = None,
) -> ECConstants:
    """Expected co-coercivity constant and noise for (game, scheme).

    Minibatch-family schemes use the closed forms; other enumerable schemes
    with a pairwise z constant use the general z formula, with the noise
    computed by exact support enumeration (requires ``game``).
    """
    if gc.n != scheme.n:
        raise ConfigError(f"scheme is for n={scheme.n}, constants for n={gc.n}")
    b = scheme.batch_size
    if b is not None:
        return ECConstants(
            ell_xi=minibatch_ell_xi(gc.n, b, gc.ell, gc.ell_max),
            sigma_sq=minibatch_sigma_sq(gc.n, b, gc.sigma1_sq),
        )
    stats = scheme_stats(scheme)
    if stats.z is None:
        raise NoClosedFormError("scheme has no pairwise z constant")
    z = stats.z
    extra = max(
        gc.ell_i[i] / (gc.n * stats.probs[i]) * (1.0 - stats.probs[i] * z)
        for i in range(gc.n)
    )
    ell_xi = z * gc.ell + extra
    if game is None:
        raise NoClosedFormError("noise for a non-minibatch scheme needs the game")
    x_star = game.equilibrium()
    vals = game.component_values(x_star)
    sigma_sq = 0.0
    for prob, vec in enumerate_support(scheme):
        est = vec.dense(gc.n) @ vals / gc.n
        sigma_sq += prob * float(est @ est)
    return ECConstants(ell_xi=ell_xi, sigma_sq=sigma_sq)


def fill_kappa(gc: GameConstants, ec: ECConstants) -> GameConstants:
    """Return a copy of gc with kappa_g = ell_xi / mu for the chosen scheme."""
    return replace(gc, kappa_g=ec.ell_xi / gc.mu)


def hamiltonian_constants(
    game: QuadraticGame, scheme: SamplingScheme
) -> HamiltonianConstants:
    """Quasi-strong convexity, smoothness and noise constants of H.

    Supports full-batch and single-element uniform sampling (the two used in
    the experiments).  mu_h and l_h are the squared extreme singular values
    of the mean Jacobian; the expected-smoothness constant for
    single-element sampling is the largest spectral norm over the n^2 pair
    Hessians (J_i^T J_j + J_j^T J_i)/2, and the gradient noise is the exact
    expectation over the n^2 equally likely index pairs.
    """
    b = scheme.batch_size
    single = b == 1
    full = b == scheme.n
    if scheme.n != game.n or not (single or full):
        raise UnsupportedSchemeError(
            "hamiltonian constants support single-element or full-batch sampling"
        )
    j_mean = game.mean_jacobian()
    svals = numerics.singular_values(j_mean)
    if svals[-1] <= _ZERO_RTOL * max(svals[0], 1.0):
        raise numerics.SingularMatrixError("mean Jacobian is singular")
    l_h = float(svals[0] ** 2)
    mu_h = float(svals[-1] ** 2)
    if full:
        return HamiltonianConstants(mu_h=mu_h, l_h=l_h, cal_l_h=l_h, sigma_h_sq=0.0)
    jacs = game.component_jacobians
    x_star = game.equilibrium()
    vals = game.component_values(x_star)
    cal_l_h = 0.0
    sigma_h_sq = 0.0
    for i in range(game.n):
        jti = jacs[i].T
        for j in range(game.n):
            hess = 0.5 * (jti @ jacs[j] + jacs[j].T @ jacs[i])
            cal_l_h = max(cal_l_h, float(np.abs(np.linalg.eigvalsh(hess)).max()))
            grad = 0.5 * (jti @ vals[j] + jacs[j].T @ vals[i])
            sigma_h_sq += float(grad @ grad)
    return HamiltonianConstants(
        mu_h=mu_h, l_h=l_h, cal_l_h=cal_l_h, sigma_h_sq=sigma_h_sq / game.n**2
    )


# ---------------------------------------------------------------------------
# minibatch-size optimization and closed-form bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OptimalMinibatch:
    b_star_real: float
    b_star: int


def total_complexity(gc: GameConstants, b: int, epsilon: float) -> float:
    """Iteration cost b * max{ell_xi(b), 2 sigma^2(b) / (eps mu)} * 2/mu."""
    ell_xi = minibatch_ell_xi(gc.n, b, gc.ell, gc.ell_max)
    sigma_sq = minibatch_sigma_sq(gc.n, b, gc.sigma1_sq)
    return (2.0 / gc.mu) * b * max(ell_xi, 2.0 * sigma_sq / (epsilon * gc.mu))


def optimal_minibatch(gc: GameConstants, epsilon: float) -> OptimalMinibatch:
    """Minibatch size minimizing total complexity to accuracy epsilon.

    The real-valued optimizer is 1 when sigma1^2 <= ell_max and otherwise
    n * (ell - ell_max + t) / (n ell - ell_max + t) with t = 2 sigma1^2 /
    (eps mu); the integer answer is whichever of its floor/ceil neighbors
    (clamped to [1, n]) has the smaller total complexity.
    """
    if gc.mu <= 0.0:
        raise ConfigError("optimal minibatch size needs mu > 0")
    if gc.n < 2:
        raise ConfigError("optimal minibatch size needs n >= 2")
    if epsilon <= 0.0:
        raise ConfigError("epsilon must be positive")
    if gc.sigma1_sq <= gc.ell_max:
        b_real = 1.0
    else:
        t = 2.0 * gc.sigma1_sq / (epsilon * gc.mu)
        b_real = gc.n * (gc.ell - gc.ell_max + t) / (gc.n * gc.ell - gc.ell_max + t)
    clamped = min(max(b_real, 1.0), float(gc.n))
    lo = int(math.floor(clamped))
    hi = min(int(math.ceil(clamped)), gc.n)
    best = min((lo, hi), key=lambda b: total_complexity(gc, b, epsilon))
    return OptimalMinibatch(b_star_real=b_real, b_star=best)


SGDA_CONSTANT = "sgda_constant"
SGDA_CONSTANT_GENERAL = "sgda_constant_general"
SGDA_SWITCHING = "sgda_switching"
SCO_CONSTANT = "sco_constant"
SHGD_CONSTANT = "shgd_constant"
SCO_SWITCHING = "sco_switching"

BOUND_IDS = (
    SGDA_CONSTANT,
    SGDA_CONSTANT_GENERAL,
    SGDA_SWITCHING,
    SCO_CONSTANT,
    SHGD_CONSTANT,
    SCO_SWITCHING,
)


def sgda_switch_point(ell_xi: float, mu: float) -> int:
    """Iteration 4 * ceil(ell_xi / mu) at which the descent-ascent schedule
    switches from constant to decreasing."""
    if mu <= 0.0:
        raise ConfigError("switching schedule needs mu > 0")
    return 4 * math.ceil(ell_xi / mu)


def sco_switch_point(ell_xi: float, cal_l_h: float, mu: float, mu_h: float) -> float:
    """Real-valued switch point 8 psi / (mu_h + mu), psi = max(ell_xi, cal_l_h)."""
    if mu_h + mu <= 0.0:
        raise ConfigError("switching schedule needs mu_h + mu > 0")
    return 8.0 * max(ell_xi, cal_l_h) / (mu_h + mu)


def theoretical_bound(bound: str, k: int, r0_sq: float, **p) -> float:
    """Closed-form distance bound at iteration k for the given rate statement.

    Required keyword parameters per bound id:

    * sgda_constant:          alpha, mu, ell_xi, sigma_sq
    * sgda_constant_general:  alpha, mu, ell_xi, sigma_sq
    * sgda_switching:         mu, ell_xi, sigma_sq
    * sco_constant:           alpha, gamma, mu, mu_h, ell_xi, cal_l_h,
                              sigma_sq, sigma_h_sq
    * shgd_constant:          gamma, mu_h, cal_l_h, sigma_h_sq
    * sco_switching:          mu, mu_h, ell_xi, cal_l_h, sigma_sq, sigma_h_sq

    Raises StepSizeOutOfRangeError when a step size violates the statement's
    range and SwitchNotReachedError when k lies before a switching rule's
    switch point.
    """
    if k < 0:
        raise ConfigError("iteration index must be >= 0")

    def limit(value, ceiling, what, strict=False):
        if value < 0.0 or (value >= ceiling if strict else value > ceiling * (1.0 + _STEP_SLOP)):
            op = "<" if strict else "<="
            raise StepSizeOutOfRangeError(f"{what} must satisfy {what} {op} {ceiling:.6g}")

    if bound == SGDA_CONSTANT:
        alpha, mu, ell_xi, sigma_sq = p["alpha"], p["mu"], p["ell_xi"], p["sigma_sq"]
        if mu <= 0.0:
            raise ConfigError("this rate needs mu > 0")
        limit(alpha, 1.0 / (2.0 * ell_xi), "alpha")
        return (1.0 - alpha * mu) ** k * r0_sq + 2.0 * alpha * sigma_sq / mu

    if bound == SGDA_CONSTANT_GENERAL:
        alpha, mu, ell_xi, sigma_sq = p["alpha"], p["mu"], p["ell_xi"], p["sigma_sq"]
        if mu <= 0.0:
            raise ConfigError("this rate needs mu > 0")
        limit(alpha, 1.0 / ell_xi, "alpha", strict=True)
        rate = 1.0 - 2.0 * alpha * mu * (1.0 - alpha * ell_xi)
        return rate**k * r0_sq + alpha * sigma_sq / (mu * (1.0 - alpha * ell_xi))

    if bound == SGDA_SWITCHING:
        mu, ell_xi, sigma_sq = p["mu"], p["ell_xi"], p["sigma_sq"]
        switch = sgda_switch_point(ell_xi, mu)
        if k < switch:
            raise SwitchNotReachedError(f"bound valid from iteration {switch}, got {k}")
        ceil_k = math.ceil(ell_xi / mu)
        return 8.0 * sigma_sq / (mu**2 * k) + 16.0 * ceil_k**2 * r0_sq / (math.e**2 * k**2)

    if bound == SCO_CONSTANT:
        alpha, gamma = p["alpha"], p["gamma"]
        mu, mu_h = p["mu"], p["mu_h"]
        sigma_sq, sigma_h_sq = p["sigma_sq"], p["sigma_h_sq"]
        if mu < 0.0 or mu_h <= 0.0:
            raise ConfigError("this rate needs mu >= 0 and mu_h > 0")
        limit(alpha, 1.0 / (4.0 * p["ell_xi"]), "alpha")
        limit(gamma, 1.0 / (4.0 * p["cal_l_h"]), "gamma")
        denom = gamma * mu_h + alpha * mu
        if denom <= 0.0:
            raise StepSizeOutOfRangeError("alpha and gamma may not both vanish")
        rate = 1.0 - denom
        return rate**k * r0_sq + 4.0 * (alpha**2 * sigma_sq + gamma**2 * sigma_h_sq) / denom

    if bound == SHGD_CONSTANT:
        gamma, mu_h, sigma_h_sq = p["gamma"], p["mu_h"], p["sigma_h_sq"]
        if mu_h <= 0.0:
            raise ConfigError("this rate needs mu_h > 0")
        limit(gamma, 1.0 / (2.0 * p["cal_l_h"]), "gamma")
        if gamma <= 0.0:
            raise StepSizeOutOfRangeError("gamma must be positive")
        return (1.0 - gamma * mu_h) ** k * r0_sq + 2.0 * gamma * sigma_h_sq / mu_h

    if bound == SCO_SWITCHING:
        mu, mu_h = p["mu"], p["mu_h"]
        sigma_sq, sigma_h_sq = p["sigma_sq"], p["sigma_h_sq"]
        if mu < 0.0 or mu_h <= 0.0:
            raise ConfigError("this rate needs mu >= 0 and mu_h > 0")
        k_star = sco_switch_point(p["ell_xi"], p["cal_l_h"], mu, mu_h)
        if k < math.ceil(k_star):
            raise SwitchNotReachedError(
                f"bound valid from iteration {math.ceil(k_star)}, got {k}"
            )
        first = 16.0 * (sigma_h_sq + sigma_sq) / ((mu + mu_h) ** 2 * k)
        return first + k_star**2 * r0_sq / (math.e**2 * k**2)

    raise ConfigError(f"unknown bound id {bound!r}; known: {BOUND_IDS}")
