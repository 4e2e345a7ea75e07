"""
Port-activation strategies.

Each strategy picks ``N`` of the ``M`` fluid-antenna ports and a beamformer
supported on them:

* ``reweighted``: reweighted-l1 SCA, then hard thresholding to ``N`` ports.
* ``sliding_window``: best contiguous window of the leading eigenvector,
  followed by SCA on that window (``sliding_window_no_opt`` skips the SCA).
* ``traverse``: exhaustive search. Both rates increase with the received
  energy ``t = w^H J w`` at full power, so each subset's optimum is the
  restricted leading eigenvector and only ``lambda_max`` per subset is needed.
* ``fa_opt`` / ``fa_mrc``: fixed, uniformly spread ports with SCA or
  per-draw maximum-ratio beamforming.
"""

import functools
import hashlib
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import build_correlation, place_eve, sample_channels
from .errors import ContractError
from .kgr import Beamformer, KgrParams, KgrResult, cc_bits, iid_bits, kgr_cc_closed, kgr_iid_closed
from .numerics import sym_eigvals
from .optimizer import P1, P2, default_init, project_ball_intersection, sca_solve

__all__ = [
    "METHODS",
    "Instance",
    "SelectionResult",
    "build_instance",
    "reweight",
    "reweighted_solve",
    "sliding_window_init",
    "sliding_window_solve",
    "traverse",
    "subset_spectrum",
    "fa_indices",
    "fa_opt_baseline",
    "fa_mrc_baseline",
    "scenario_of",
    "TRAVERSE_LIMIT",
]

METHODS = ("reweighted", "sliding_window", "sliding_window_no_opt", "traverse", "fa_opt", "fa_mrc")
TRAVERSE_LIMIT = 10_000_000
MAX_OUTER = 50
TRAVERSE_CHUNK = 20_000
TIE_RTOL = 1e-12


def scenario_of(kind):
    """Eavesdropping scenario whose rate ``kind`` optimizes."""
    if kind == P1:
        return "iid"
    if kind == P2:
        return "correlated"
    raise ContractError(f"kind must be P1 or P2, got {kind!r}")


@dataclass(frozen=True)
class Instance:
    """A configuration together with one realized Eve position."""

    config: object
    corr: object
    budget: object
    params: KgrParams

    @property
    def M(self):
        return self.config.M

    @property
    def N(self):
        return self.config.N

    @property
    def P_A(self):
        return self.config.P_A


def build_instance(config, rng=None, budget=None):
    """
    Realize Eve's position (``rng`` is required in correlated mode) and
    collect everything the strategies need.
    """
    corr = build_correlation(config.M, config.W)
    if budget is None:
        if rng is None and config.eve_mode == "correlated":
            raise ContractError("a correlated-mode instance needs an rng to place Eve")
        budget = place_eve(config, rng)
    return Instance(config, corr, budget, KgrParams.from_config(config, budget, corr))


@dataclass(frozen=True)
class SelectionResult:
    """Selected ports, beamformer, received energy and rate of one strategy."""

    method: str
    indices: tuple
    w: Beamformer
    objective_t: float
    kgr: KgrResult
    converged: bool = True
    iterations: int = 0
    extra: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if any(i not in self.indices for i in self.w.support):
            raise ContractError("beamformer support leaves the selected ports")


def _rate(kind, w, params, method, iterations=0):
    fn = kgr_iid_closed if kind == P1 else kgr_cc_closed
    res = fn(w, params)
    return KgrResult(res.bits, res.scenario, method, res.degenerate, iterations)


def _finish(method, kind, instance, indices, w, converged=True, iterations=0, extra=None):
    w = w if isinstance(w, Beamformer) else Beamformer(w)
    t = float(np.vdot(w.w, instance.corr.matrix @ w.w).real)
    return SelectionResult(
        method=method,
        indices=tuple(sorted(int(i) for i in indices)),
        w=w,
        objective_t=t,
        kgr=_rate(kind, w, instance.params, method, iterations),
        converged=converged,
        iterations=iterations,
        extra=extra or {},
    )


def reweight(w_prev, gamma_reg):
    """Sparsity weights ``1 / (|w_m| + gamma)``."""
    if not gamma_reg > 0:
        raise ContractError(f"gamma_reg must be positive, got {gamma_reg!r}")
    w = w_prev.w if isinstance(w_prev, Beamformer) else np.asarray(w_prev)
    return 1.0 / (np.abs(w) + gamma_reg)


def _solve_on_support(kind, instance, indices, init_values):
    """
    SCA restricted to ``indices`` with only the power constraint.

    Starts from whichever of ``init_values`` (rescaled to full power) and
    the sub-block's leading eigenvector has the higher rate.
    """
    idx = np.asarray(indices, dtype=int)
    sub = instance.params.restrict(idx)
    scale = math.sqrt(instance.P_A)
    v = sub.corr.u_max.astype(complex) * scale
    given = np.asarray(init_values, dtype=complex)
    norm = np.linalg.norm(given)
    if norm > 0.0 and float(np.vdot(given, sub.corr.matrix @ given).real) > 0.0:
        given = given * (scale / norm)
        rate = kgr_iid_closed if kind == P1 else kgr_cc_closed
        if rate(given, sub).bits > rate(v, sub).bits:
            v = given
    trace = sca_solve(kind, v, None, sub, instance.P_A, eps0=instance.config.eps0)
    return Beamformer.embed(trace.w.w, idx, instance.M), trace


def reweighted_solve(kind, instance, max_outer=MAX_OUTER):
    """
    Reweighted-l1 port selection.

    Starts from unit weights and the l1 budget ``N``; alternates SCA and
    reweighting until the rate moves by at most ``eps0`` (or ``max_outer``
    rounds), keeps the ``N`` largest magnitudes and re-optimizes on them.
    Between rounds the iterate is projected onto the new weighted ball so
    every SCA run starts feasible.
    """
    cfg = instance.config
    M, N, P_A = cfg.M, cfg.N, cfg.P_A
    params = instance.params
    V = np.ones(M)
    w = default_init(instance.corr, P_A, V, N)
    prev = None
    converged = False
    rounds = 0
    for rounds in range(1, max_outer + 1):
        trace = sca_solve(kind, w, V, params, P_A, N, eps0=cfg.eps0)
        w = trace.w
        value = trace.final_objective
        if prev is not None and abs(value - prev) <= cfg.eps0:
            converged = True
            break
        prev = value
        V = reweight(w, cfg.gamma)
        w = Beamformer(project_ball_intersection(w.w, V, P_A, N))
    order = np.argsort(-np.abs(w.w), kind="stable")
    keep = np.sort(order[:N])
    final, trace = _solve_on_support(kind, instance, keep, w.w[keep])
    return _finish(
        "reweighted",
        kind,
        instance,
        keep,
        final,
        converged=converged and trace.converged,
        iterations=rounds,
        extra={"relaxed_w": w},
    )


def sliding_window_init(corr, N, P_A):
    """
    Best contiguous window of the leading eigenvector.

    Every window of ``N`` consecutive ports masks ``u_max(J)`` and is scored
    by ``w^H J w``; the winner (lowest start on ties) is scaled to full power.

    Returns
    -------
    (Beamformer, tuple of int)
    """
    M = corr.M
    if not 1 <= N <= M:
        raise ContractError(f"need 1 <= N <= M, got N={N}, M={M}")
    u = corr.u_max
    best_score = -math.inf
    best_start = 0
    for start in range(M - N + 1):
        masked = np.zeros(M)
        masked[start : start + N] = u[start : start + N]
        score = float(masked @ corr.matrix @ masked)
        if score > best_score:
            best_score = score
            best_start = start
    indices = tuple(range(best_start, best_start + N))
    masked = np.zeros(M, dtype=complex)
    masked[list(indices)] = u[list(indices)]
    masked *= math.sqrt(P_A) / np.linalg.norm(masked)
    return Beamformer(masked), indices


def sliding_window_solve(kind, instance, optimize=True):
    """Sliding-window ports; with ``optimize`` the window beamformer is refined by SCA."""
    w0, indices = sliding_window_init(instance.corr, instance.N, instance.P_A)
    if not optimize:
        return _finish("sliding_window_no_opt", kind, instance, indices, w0)
    idx = list(indices)
    final, trace = _solve_on_support(kind, instance, idx, w0.w[idx])
    return _finish(
        "sliding_window", kind, instance, indices, final, trace.converged, trace.iterations
    )


def _combinations_array(M, N, start, stop):
    it = itertools.islice(itertools.combinations(range(M), N), start, stop)
    flat = np.fromiter(itertools.chain.from_iterable(it), dtype=np.intp, count=(stop - start) * N)
    return flat.reshape(-1, N)


def _chunk_lambda_max(matrix, M, N, start, stop):
    combos = _combinations_array(M, N, start, stop)
    blocks = matrix[combos[:, :, None], combos[:, None, :]]
    return sym_eigvals(blocks)[:, 0]


@functools.lru_cache(maxsize=16)
def _cached_spectrum(key, M, N, workers):
    matrix = _MATRICES[key]
    total = math.comb(M, N)
    bounds = [(s, min(s + TRAVERSE_CHUNK, total)) for s in range(0, total, TRAVERSE_CHUNK)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _chunk_lambda_max(matrix, M, N, *b), bounds))
    else:
        parts = [_chunk_lambda_max(matrix, M, N, *b) for b in bounds]
    out = np.concatenate(parts)
    out.setflags(write=False)
    return out


_MATRICES = {}


def subset_spectrum(corr, N, workers=1):
    """
    ``lambda_max`` of ``J[S, S]`` for every size-``N`` subset ``S`` in
    lexicographic order. Cached per (matrix, N).

    Raises
    ------
    ContractError
        If the number of subsets exceeds ``TRAVERSE_LIMIT``.
    """
    M = corr.M
    if not 1 <= N <= M:
        raise ContractError(f"need 1 <= N <= M, got N={N}, M={M}")
    count = math.comb(M, N)
    if count > TRAVERSE_LIMIT:
        raise ContractError(
            f"traversal over {count} subsets exceeds the limit of {TRAVERSE_LIMIT}"
        )
    key = hashlib.sha1(np.ascontiguousarray(corr.matrix).tobytes()).hexdigest()
    _MATRICES[key] = np.asarray(corr.matrix)
    return _cached_spectrum(key, M, N, max(1, int(workers)))


def _nth_combination(M, N, rank):
    return next(itertools.islice(itertools.combinations(range(M), N), rank, None))


def traverse(kind, instance, workers=1):
    """
    Exhaustive port selection.

    The subset with the largest restricted ``lambda_max`` maximizes both
    rates; values within a relative ``1e-12`` of the best count as ties and
    resolve to the lexicographically smallest subset.
    """
    corr = instance.corr
    N = instance.N
    lam = subset_spectrum(corr, N, workers)
    top = float(np.max(lam))
    rank = int(np.argmax(lam >= top * (1.0 - TIE_RTOL)))
    indices = _nth_combination(corr.M, N, rank)
    sub = corr.restrict(indices)
    values = math.sqrt(instance.P_A) * sub.u_max
    w = Beamformer.embed(values, indices, corr.M)
    return _finish("traverse", kind, instance, indices, w, extra={"lambda_max": float(lam[rank])})


def fa_indices(M, N):
    """Uniformly spread fixed ports: ``round(linspace(1, M, N)) - 1`` (0-based)."""
    if not 1 <= N <= M:
        raise ContractError(f"need 1 <= N <= M, got N={N}, M={M}")
    if N == 1:
        return (0,)
    return tuple(int(i) - 1 for i in np.rint(np.linspace(1, M, N)))


def fa_opt_baseline(kind, instance, N=None):
    """Fixed uniformly spread ports with an SCA-optimized beamformer."""
    N = instance.N if N is None else N
    idx = list(fa_indices(instance.M, N))
    sub = instance.corr.restrict(idx)
    final, trace = _solve_on_support(kind, instance, idx, sub.u_max)
    return _finish("fa_opt", kind, instance, idx, final, trace.converged, trace.iterations)


def fa_mrc_baseline(kind, instance, N=None, draws=10_000, rng=None):
    """
    Fixed ports with per-draw maximum-ratio beamforming.

    For each channel draw ``w = sqrt(P_A) conj(h_S) / ||h_S||``; the
    closed-form rate is averaged over draws. The reported ``w`` is the
    beamformer of the first draw and ``objective_t`` the mean energy.
    """
    if draws < 1000:
        raise ContractError(f"fa_mrc_baseline needs at least 1000 draws, got {draws}")
    if rng is None:
        raise ContractError("fa_mrc_baseline needs an rng")
    N = instance.N if N is None else N
    idx = list(fa_indices(instance.M, N))
    p = instance.params
    h = sample_channels(instance.corr, instance.budget, p.rho, draws, rng).h_ab[:, idx]
    w = np.conj(h) / np.linalg.norm(h, axis=1, keepdims=True) * math.sqrt(instance.P_A)
    J = instance.corr.matrix[np.ix_(idx, idx)]
    t = np.einsum("di,ij,dj->d", np.conj(w), J, w).real
    P_A = instance.P_A
    if kind == P1:
        bits = iid_bits(p.beta_ab * t, P_A, p.P_B, p.sigma2)
    else:
        if p.rho != 1.0:
            raise ContractError("the correlated closed form needs rho = 1")
        bits = cc_bits(t, P_A, p.beta_ab, p.beta_ae, p.P_B, p.sigma2)
    first = Beamformer.embed(w[0], idx, instance.M)
    mean_bits = float(np.mean(bits))
    return SelectionResult(
        method="fa_mrc",
        indices=tuple(idx),
        w=first,
        objective_t=float(np.mean(t)),
        kgr=KgrResult(mean_bits, scenario_of(kind), "fa_mrc"),
        extra={"draws": draws, "std_bits": float(np.std(bits))},
    )
