"""Desk-scale experiment protocol: seeded quadratic-game generation,
multi-method multi-seed comparison runs, aggregation with confidence bands,
and deterministic CSV/SVG emission.

Game files are a single self-describing JSON document (format_version 1)
with integer header fields, the generator parameters when the game came from
the generator, and one row-major array per named matrix or vector.  Floats
are serialized as the shortest decimal that round-trips the underlying
64-bit value, so write-then-read reproduces a game bit-exactly.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import constants as consts
from . import numerics
from .errors import ConfigError, InvalidRangeError
from .operators import QuadraticGame
from .sampling import SamplingScheme
from .solvers import (
    CO,
    GDA,
    METHODS,
    SCO,
    SGDA,
    SHGD,
    ConstantSchedule,
    RunConfig,
    RunTrace,
    ScoSwitchingSchedule,
    SgdaSwitchingSchedule,
    run,
)

GAME_FORMAT_VERSION = 1

CSV_HEADER = "method,iteration,mean_rel_dist,ci_low,ci_high,seeds"

# 95% two-sided normal quantile for the confidence bands.
CI_QUANTILE = 1.96


# ---------------------------------------------------------------------------
# game generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GameGenConfig:
    """Seeded generator parameters for one random quadratic game.

    Eigenvalues of every A_i (resp. C_i) are drawn uniformly in
    [mu_a, l_a] (resp. [mu_c, l_c]) with component 0 forced to attain the
    lower end and component n-1 the upper end; singular values of every B_i
    are uniform in [mu_b, l_b]; offsets are standard normal.
    """

    n: int
    d1: int
    d2: int
    mu_a: float
    l_a: float
    mu_b: float
    l_b: float
    mu_c: float
    l_c: float
    seed: int

    def __post_init__(self):
        if self.n < 1 or self.d1 < 1 or self.d2 < 1:
            raise InvalidRangeError("n, d1, d2 must all be >= 1")
        if not 0.0 < self.mu_a <= self.l_a or not 0.0 < self.mu_c <= self.l_c:
            raise InvalidRangeError("need 0 < mu_a <= l_a and 0 < mu_c <= l_c")
        if not 0.0 <= self.mu_b <= self.l_b:
            raise InvalidRangeError("need 0 <= mu_b <= l_b")


def _spread_diagonal(rng, dim, lo, hi, force_min, force_max):
    d = rng.uniform(lo, hi, dim)
    if force_min:
        d[int(np.argmin(d))] = lo
    if force_max:
        d[int(np.argmax(d))] = hi
    return d


def generate_game(cfg: GameGenConfig, rng: np.random.Generator | None = None) -> QuadraticGame:
    """Random strongly monotone quadratic game, deterministic given the seed.

    Per component, in fixed draw order: orthogonal factor and eigenvalues of
    A_i, the same for C_i, the two orthogonal factors and singular values of
    B_i, then the offsets a_i and c_i.
    """
    if rng is None:
        rng = numerics.make_rng(cfg.seed)
    n, d1, d2 = cfg.n, cfg.d1, cfg.d2
    k = min(d1, d2)
    a_mats = np.empty((n, d1, d1))
    b_mats = np.empty((n, d1, d2))
    c_mats = np.empty((n, d2, d2))
    a_vecs = np.empty((n, d1))
    c_vecs = np.empty((n, d2))
    for i in range(n):
        first, last = i == 0, i == n - 1
        q = numerics.random_orthogonal(d1, rng)
        diag = _spread_diagonal(rng, d1, cfg.mu_a, cfg.l_a, first, last)
        a_mats[i] = (q * diag) @ q.T
        a_mats[i] = 0.5 * (a_mats[i] + a_mats[i].T)
        q = numerics.random_orthogonal(d2, rng)
        diag = _spread_diagonal(rng, d2, cfg.mu_c, cfg.l_c, first, last)
        c_mats[i] = (q * diag) @ q.T
        c_mats[i] = 0.5 * (c_mats[i] + c_mats[i].T)
        u = numerics.random_orthogonal(d1, rng)
        v = numerics.random_orthogonal(d2, rng)
        svals = rng.uniform(cfg.mu_b, cfg.l_b, k)
        b_mats[i] = (u[:, :k] * svals) @ v[:, :k].T
        a_vecs[i] = rng.standard_normal(d1)
        c_vecs[i] = rng.standard_normal(d2)
    return QuadraticGame(a_mats, b_mats, c_mats, a_vecs, c_vecs)


# ---------------------------------------------------------------------------
# game files
# ---------------------------------------------------------------------------


def write_game(path, game: QuadraticGame, gen: GameGenConfig | None = None) -> None:
    """Serialize a game (and the generator config that produced it, if any)."""
    doc = {
        "format_version": GAME_FORMAT_VERSION,
        "n": game.n,
        "d1": game.d1,
        "d2": game.d2,
        "seed": gen.seed if gen is not None else None,
        "generator": asdict(gen) if gen is not None else None,
        "A": [game.A[i].reshape(-1).tolist() for i in range(game.n)],
        "B": [game.B[i].reshape(-1).tolist() for i in range(game.n)],
        "C": [game.C[i].reshape(-1).tolist() for i in range(game.n)],
        "a": [game.a[i].tolist() for i in range(game.n)],
        "c": [game.c[i].tolist() for i in range(game.n)],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def read_game(path):
    """Load a game file; returns (game, generator config or None)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != GAME_FORMAT_VERSION:
        raise ConfigError(f"unsupported game file version {version!r}")
    n, d1, d2 = doc["n"], doc["d1"], doc["d2"]
    game = QuadraticGame(
        np.array(doc["A"], dtype=float).reshape(n, d1, d1),
        np.array(doc["B"], dtype=float).reshape(n, d1, d2),
        np.array(doc["C"], dtype=float).reshape(n, d2, d2),
        np.array(doc["a"], dtype=float).reshape(n, d1),
        np.array(doc["c"], dtype=float).reshape(n, d2),
    )
    gen = GameGenConfig(**doc["generator"]) if doc.get("generator") else None
    return game, gen


# ---------------------------------------------------------------------------
# schedules from constants ("theory" step sizes)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GameProfile:
    """All constants of one (game, scheme) pair, computed once."""

    game_constants: consts.GameConstants
    ec: consts.ECConstants
    hamiltonian: consts.HamiltonianConstants | None

    @property
    def kappa_g(self) -> float:
        return self.ec.ell_xi / self.game_constants.mu


def profile(game: QuadraticGame, scheme: SamplingScheme, with_hamiltonian=True) -> GameProfile:
    gc = consts.game_constants(game)
    ec = consts.ec_constants(gc, scheme, game)
    ham = None
    if with_hamiltonian:
        ham = consts.hamiltonian_constants(game, scheme)
    return GameProfile(game_constants=gc, ec=ec, hamiltonian=ham)


def theory_schedule(method: str, prof: GameProfile) -> ConstantSchedule:
    """Constant step sizes at the largest values the rate statements allow:
    descent-ascent 1/(2 ell_xi); consensus 1/(4 ell_xi) and 1/(4 cal_l_h);
    Hamiltonian descent 1/(2 cal_l_h).  Deterministic variants use the same
    forms through the full-batch constants."""
    ell_xi = prof.ec.ell_xi
    ham = prof.hamiltonian
    if method in (SGDA, GDA):
        return ConstantSchedule(alpha=1.0 / (2.0 * ell_xi), gamma=0.0)
    if ham is None:
        raise ConfigError(f"{method} needs Hamiltonian constants")
    if method == SHGD:
        return ConstantSchedule(alpha=0.0, gamma=1.0 / (2.0 * ham.cal_l_h))
    if method in (SCO, CO):
        return ConstantSchedule(
            alpha=1.0 / (4.0 * ell_xi), gamma=1.0 / (4.0 * ham.cal_l_h)
        )
    raise ConfigError(f"unknown method {method!r}")


def switching_schedule(method: str, prof: GameProfile):
    gc = prof.game_constants
    if method == SGDA:
        return SgdaSwitchingSchedule(ell_xi=prof.ec.ell_xi, mu=gc.mu)
    if method == SCO:
        ham = prof.hamiltonian
        if ham is None:
            raise ConfigError("sco switching needs Hamiltonian constants")
        return ScoSwitchingSchedule(
            ell_xi=prof.ec.ell_xi, cal_l_h=ham.cal_l_h, mu=gc.mu, mu_h=ham.mu_h
        )
    raise ConfigError(f"no switching rule for method {method!r}")


# ---------------------------------------------------------------------------
# experiment runner and aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """Multi-method multi-seed comparison on one game.

    ``schedules`` maps method name to "theory", "switching", or a schedule
    object.  Run i of every method uses seed base_seed + i.
    """

    game: QuadraticGame
    methods: tuple[str, ...]
    scheme: SamplingScheme
    schedules: dict
    iterations: int
    seeds: int
    base_seed: int = 0

    def __post_init__(self):
        if not self.methods:
            raise ConfigError("need at least one method")
        if self.seeds < 1:
            raise ConfigError("need at least one seed")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; known: {METHODS}")


@dataclass
class MethodAggregate:
    method: str
    mean: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    seeds: int


@dataclass
class AggregateTable:
    """Per (method, iteration) mean relative squared distance with a 95%
    normal-approximation confidence band (mean +- 1.96 * sd / sqrt(seeds))."""

    iterations: int
    rows: list[MethodAggregate]


def aggregate_traces(method: str, traces: list[RunTrace]) -> MethodAggregate:
    length = min(len(t.dist_sq) for t in traces)
    rel = np.stack([t.dist_sq[:length] / t.dist_sq[0] for t in traces])
    mean = rel.mean(axis=0)
    if rel.shape[0] > 1:
        half = CI_QUANTILE * rel.std(axis=0, ddof=1) / math.sqrt(rel.shape[0])
    else:
        half = np.zeros(length)
    return MethodAggregate(
        method=method,
        mean=mean,
        ci_low=mean - half,
        ci_high=mean + half,
        seeds=rel.shape[0],
    )


def _resolve_schedule(method: str, spec, prof: GameProfile):
    if spec == "theory":
        return theory_schedule(method, prof)
    if spec == "switching":
        return switching_schedule(method, prof)
    return spec


def run_experiment(
    cfg: ExperimentConfig,
    threads: int = 1,
    record_traces: bool = False,
):
    """Run every (method, seed) pair and aggregate.

    Returns (AggregateTable, profile, traces) where traces maps method ->
    list of RunTrace (empty mapping unless ``record_traces``).  Runs are
    independent and may execute on a thread pool; aggregation order is fixed
    by (method, seed) regardless of completion order.
    """
    needs_ham = any(m in (SHGD, SCO, CO) for m in cfg.methods)
    prof = profile(cfg.game, cfg.scheme, with_hamiltonian=needs_ham)
    # Deterministic methods run on the full batch, so their theory steps are
    # taken from the full-batch constants, not from cfg.scheme's.
    prof_full = prof
    if any(m in (GDA, CO) for m in cfg.methods) and not cfg.scheme.is_deterministic:
        prof_full = profile(
            cfg.game, SamplingScheme.full_batch(cfg.game.n), with_hamiltonian=needs_ham
        )
    configs = {}
    for method in cfg.methods:
        deterministic = method in (GDA, CO)
        schedule = _resolve_schedule(
            method,
            cfg.schedules.get(method, "theory"),
            prof_full if deterministic else prof,
        )
        scheme = SamplingScheme.full_batch(cfg.game.n) if deterministic else cfg.scheme
        for s in range(cfg.seeds):
            configs[(method, s)] = RunConfig(
                method=method,
                operator=cfg.game,
                scheme=scheme,
                schedule=schedule,
                iterations=cfg.iterations,
                seed=cfg.base_seed + s,
            )
    keys = sorted(configs)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(zip(keys, pool.map(lambda k: run(configs[k]), keys)))
    else:
        results = {k: run(configs[k]) for k in keys}
    rows = []
    traces: dict[str, list[RunTrace]] = {}
    for method in cfg.methods:
        method_traces = [results[(method, s)] for s in range(cfg.seeds)]
        rows.append(aggregate_traces(method, method_traces))
        if record_traces:
            traces[method] = method_traces
    return AggregateTable(iterations=cfg.iterations, rows=rows), prof, traces


# ---------------------------------------------------------------------------
# CSV / SVG emission
# ---------------------------------------------------------------------------


def emit_csv(table: AggregateTable, path) -> None:
    """CSV per the fixed schema; floats as shortest round-trip decimals."""
    if not table.rows:
        raise ConfigError("refusing to emit an empty table")
    lines = [CSV_HEADER]
    for row in table.rows:
        for k in range(row.mean.size):
            lines.append(
                f"{row.method},{k},{float(row.mean[k])!r},{float(row.ci_low[k])!r},"
                f"{float(row.ci_high[k])!r},{row.seeds}"
            )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path) -> AggregateTable:
    """Inverse of emit_csv."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln]
    if not lines or lines[0] != CSV_HEADER:
        raise ConfigError("not an aggregate CSV (bad header)")
    data: dict[str, list] = {}
    seeds: dict[str, int] = {}
    order = []
    for ln in lines[1:]:
        method, it, mean, lo, hi, s = ln.split(",")
        if method not in data:
            data[method] = []
            order.append(method)
        data[method].append((int(it), float(mean), float(lo), float(hi)))
        seeds[method] = int(s)
    rows = []
    length = 0
    for method in order:
        entries = sorted(data[method])
        arr = np.array([e[1:] for e in entries])
        rows.append(
            MethodAggregate(
                method=method,
                mean=arr[:, 0],
                ci_low=arr[:, 1],
                ci_high=arr[:, 2],
                seeds=seeds[method],
            )
        )
        length = max(length, len(entries))
    return AggregateTable(iterations=length - 1, rows=rows)


def emit_outputs(table: AggregateTable, csv_path, svg_path) -> None:
    """Write both artifacts for an aggregate table."""
    emit_csv(table, csv_path)
    emit_svg(table, svg_path)


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_SVG_W, _SVG_H = 720, 480
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 72, 24, 24, 48
_FLOOR = 1e-300


def _svg_coords(ks, values, k_max, log_lo, log_hi):
    xs = _MARGIN_L + (ks / max(k_max, 1)) * (_SVG_W - _MARGIN_L - _MARGIN_R)
    clipped = np.log10(np.maximum(values, _FLOOR))
    clipped = np.clip(clipped, log_lo, log_hi)
    span = max(log_hi - log_lo, 1e-12)
    ys = _SVG_H - _MARGIN_B - (clipped - log_lo) / span * (_SVG_H - _MARGIN_T - _MARGIN_B)
    return xs, ys


def _path(xs, ys) -> str:
    return " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))


def emit_svg(table: AggregateTable, path) -> None:
    """Log-scale line chart, one line per method plus its shaded band.

    Hand-rolled SVG so the output is a pure function of the table: byte
    identical on re-emission.
    """
    if not table.rows:
        raise ConfigError("refusing to emit an empty table")
    k_max = max(row.mean.size - 1 for row in table.rows)
    positive = [row.mean[row.mean > 0] for row in table.rows]
    lo_val = min((p.min() for p in positive if p.size), default=1e-12)
    hi_val = max(
        max(row.ci_high.max(initial=0.0) for row in table.rows),
        max(row.mean.max(initial=0.0) for row in table.rows),
        lo_val * 10,
    )
    log_lo = math.floor(math.log10(max(lo_val, _FLOOR)))
    log_hi = math.ceil(math.log10(max(hi_val, lo_val * 10)))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}" '
        f'viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{_SVG_W - _MARGIN_L - _MARGIN_R}" '
        f'height="{_SVG_H - _MARGIN_T - _MARGIN_B}" fill="none" stroke="#333"/>',
    ]
    # y grid: one line per decade
    for dec in range(int(log_lo), int(log_hi) + 1):
        _, y = _svg_coords(np.array([0]), np.array([10.0**dec]), k_max, log_lo, log_hi)
        parts.append(
            f'<line x1="{_MARGIN_L}" y1="{y[0]:.2f}" x2="{_SVG_W - _MARGIN_R}" '
            f'y2="{y[0]:.2f}" stroke="#ddd"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_L - 6}" y="{y[0] + 4:.2f}" text-anchor="end" '
            f'font-size="11" font-family="sans-serif">1e{dec}</text>'
        )
    # x ticks: quarters
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        k = frac * k_max
        x = _MARGIN_L + frac * (_SVG_W - _MARGIN_L - _MARGIN_R)
        parts.append(
            f'<text x="{x:.2f}" y="{_SVG_H - _MARGIN_B + 16}" text-anchor="middle" '
            f'font-size="11" font-family="sans-serif">{k:.0f}</text>'
        )
    parts.append(
        f'<text x="{(_SVG_W + _MARGIN_L - _MARGIN_R) / 2:.2f}" y="{_SVG_H - 12}" '
        f'text-anchor="middle" font-size="12" font-family="sans-serif">iteration</text>'
    )
    for idx, row in enumerate(table.rows):
        color = _PALETTE[idx % len(_PALETTE)]
        ks = np.arange(row.mean.size)
        xs, ys_mean = _svg_coords(ks, row.mean, k_max, log_lo, log_hi)
        _, ys_hi = _svg_coords(ks, row.ci_high, k_max, log_lo, log_hi)
        _, ys_lo = _svg_coords(ks, row.ci_low, k_max, log_lo, log_hi)
        band = _path(xs, ys_hi) + " " + _path(xs[::-1], ys_lo[::-1])
        parts.append(f'<polygon points="{band}" fill="{color}" fill-opacity="0.15"/>')
        parts.append(
            f'<polyline points="{_path(xs, ys_mean)}" fill="none" stroke="{color}" '
            f'stroke-width="1.5"/>'
        )
        ly = _MARGIN_T + 16 + 16 * idx
        parts.append(
            f'<line x1="{_MARGIN_L + 8}" y1="{ly - 4}" x2="{_MARGIN_L + 28}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_L + 34}" y="{ly}" font-size="12" '
            f'font-family="sans-serif">{row.method}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")


# ---------------------------------------------------------------------------
# step-size sweep and condition-number targeting
# ---------------------------------------------------------------------------


def sweep_step_sizes(
    game: QuadraticGame,
    scheme: SamplingScheme,
    methods,
    multipliers,
    iterations: int,
    seeds: int,
    base_seed: int = 0,
    threads: int = 1,
) -> AggregateTable:
    """Constant-step study: every method at multiplier x its theory step.

    Rows are labelled "method@multiplier".  Diverging configurations are
    still aggregated (their traces are truncated); callers can spot them by
    the trailing values.
    """
    prof = profile(game, scheme)
    rows = []
    for method in methods:
        base = theory_schedule(method, prof)
        for mult in multipliers:
            schedule = ConstantSchedule(alpha=base.alpha * mult, gamma=base.gamma * mult)
            run_scheme = SamplingScheme.full_batch(game.n) if method in (GDA, CO) else scheme
            traces = [
                run(
                    RunConfig(
                        method=method,
                        operator=game,
                        scheme=run_scheme,
                        schedule=schedule,
                        iterations=iterations,
                        seed=base_seed + s,
                    )
                )
                for s in range(seeds)
            ]
            agg = aggregate_traces(f"{method}@{mult:g}", traces)
            rows.append(agg)
    return AggregateTable(iterations=iterations, rows=rows)


def find_generator_for_kappa(
    target: float,
    n: int,
    d1: int,
    d2: int,
    scheme_name: str = "single_element_uniform",
    b: int | None = None,
    seed: int = 0,
    rel_tol: float = 0.1,
    max_iters: int = 60,
) -> tuple[GameGenConfig, float]:
    """Search generator ranges for a game whose kappa_g = ell_xi / mu is
    within rel_tol of the target, for the named scheme.

    One scalar knob s >= 1 is bisected: eigenvalue ranges [1, s] for the
    diagonal blocks and singular values [0, (s-1)/2] for the coupling.
    kappa grows with s from 1, so plain bracketing works.
    """
    if target < 1.0:
        raise ConfigError("kappa targets below 1 are unattainable")

    def kappa_of(s: float):
        cfg = GameGenConfig(
            n=n, d1=d1, d2=d2,
            mu_a=1.0, l_a=s, mu_b=0.0, l_b=(s - 1.0) / 2.0, mu_c=1.0, l_c=s,
            seed=seed,
        )
        game = generate_game(cfg)
        scheme = _scheme_by_name(scheme_name, n, b)
        gc = consts.game_constants(game)
        ec = consts.ec_constants(gc, scheme, game)
        return ec.ell_xi / gc.mu, cfg

    lo, hi = 1.0, 2.0
    kappa, cfg = kappa_of(hi)
    while kappa < target and hi < 1e9:
        lo, hi = hi, hi * 2.0
        kappa, cfg = kappa_of(hi)
    if kappa < target:
        raise ConfigError(f"could not reach kappa {target}")
    best_cfg, best_kappa = cfg, kappa
    for _ in range(max_iters):
        if abs(best_kappa - target) / target <= rel_tol:
            break
        mid = 0.5 * (lo + hi)
        kappa, cfg = kappa_of(mid)
        if abs(kappa - target) < abs(best_kappa - target):
            best_cfg, best_kappa = cfg, kappa
        if kappa < target:
            lo = mid
        else:
            hi = mid
    if abs(best_kappa - target) / target > rel_tol:
        raise ConfigError(
            f"kappa search stalled at {best_kappa:.3f} for target {target}"
        )
    return best_cfg, best_kappa


def _scheme_by_name(name: str, n: int, b: int | None = None) -> SamplingScheme:
    if name in ("single", "single_element", "single_element_uniform"):
        return SamplingScheme.single_element(n)
    if name in ("full", "full_batch"):
        return SamplingScheme.full_batch(n)
    if name == "minibatch":
        if b is None:
            raise ConfigError("minibatch scheme needs --b")
        return SamplingScheme.minibatch(n, b)
    raise ConfigError(f"unknown scheme {name!r}")
