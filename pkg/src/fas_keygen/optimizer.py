"""
Successive convex approximation (SCA) for the beamformer.

Both design problems maximize an increasing function of the received
quadratic energy ``q(w) = w^H J w``, which is convex in ``w``, over the
power ball intersected with a (weighted) l1 ball. Each SCA step replaces
``q`` by its tangent minorant at the previous iterate and solves the
resulting concave problem exactly:

* P1 (i.i.d. eavesdropper): a linear objective, solved in closed form up
  to a scalar dual variable found by bisection.
* P2 (correlated eavesdropper): ``l - q^2 / (l + kappa)`` with ``l`` the
  tangent minorant and ``kappa = sigma2 / beta_ae``; solved by projected
  gradient ascent with backtracking.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AnchorDegenerateError, ContractError
from .kgr import Beamformer, kgr_cc_closed, kgr_iid_closed

__all__ = [
    "P1",
    "P2",
    "SubproblemSpec",
    "SolveTrace",
    "P2Slacks",
    "linearize_quadratic",
    "tangent_minorant",
    "project_ball_intersection",
    "solve_p1_subproblem",
    "solve_p2_subproblem",
    "p2_surrogate",
    "p2_slacks",
    "default_init",
    "random_init",
    "sca_solve",
    "MAX_SCA_ITERATIONS",
]

P1 = "P1"
P2 = "P2"
KINDS = (P1, P2)

MAX_SCA_ITERATIONS = 200
BISECTION_STEPS = 200
PGA_MAX_STEPS = 5000
PGA_TOL = 1e-7
SAFEGUARD_HALVINGS = 30
TIE_RTOL = 1e-12


def _vec(w):
    if isinstance(w, Beamformer):
        return w.w
    return np.asarray(w, dtype=complex).reshape(-1)


def _weights(V, M):
    if V is None:
        return np.zeros(M)
    arr = np.broadcast_to(np.asarray(V, dtype=float), (M,)).copy()
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ContractError("l1 weights must be finite and nonnegative")
    return arr


@dataclass(frozen=True)
class SubproblemSpec:
    """
    One convex SCA step.

    Parameters
    ----------
    kind : {"P1", "P2"}
    w_prev : array_like
        Anchor (previous iterate).
    weights : array_like or None
        Diagonal of the l1 weighting; zeros (or None) switch the l1
        constraint off.
    P_A : float
        Power budget in watts.
    N_budget : float
        Right-hand side of the weighted l1 constraint (``inf`` disables it).
    params : KgrParams
        Correlation, large-scale gains, noise and Bob's power.
    """

    kind: str
    w_prev: np.ndarray
    weights: np.ndarray
    P_A: float
    N_budget: float
    params: object

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"kind must be one of {KINDS}, got {self.kind!r}")
        w = _vec(self.w_prev).copy()
        object.__setattr__(self, "w_prev", w)
        object.__setattr__(self, "weights", _weights(self.weights, w.shape[0]))
        if w.shape[0] != self.params.corr.M:
            raise ContractError("anchor length does not match the correlation matrix")
        if not self.P_A > 0:
            raise ContractError("P_A must be positive")
        if not self.N_budget > 0:
            raise ContractError("N_budget must be positive")
        power = float(np.vdot(w, w).real)
        l1 = float(self.weights @ np.abs(w))
        if power > self.P_A * (1 + 1e-6) or l1 > self.N_budget + 1e-6 * max(1.0, self.N_budget):
            raise ContractError(
                f"anchor infeasible: power {power:.6g} vs {self.P_A:.6g}, "
                f"weighted l1 {l1:.6g} vs {self.N_budget:.6g}"
            )


@dataclass(frozen=True)
class SolveTrace:
    """History of one SCA run; ``objective[0]`` is the rate at the initial point."""

    objective: tuple
    w: Beamformer
    converged: bool
    iterations: int
    kind: str = P1
    t_history: tuple = field(default=(), repr=False)

    @property
    def final_objective(self):
        return self.objective[-1]


def linearize_quadratic(w_prev, corr, scale=1.0, form="tangent"):
    """
    Coefficient of the affine lower bound of ``w^H J w`` at ``w_prev``.

    ``form="tangent"`` returns ``c = scale * J w_prev`` so that
    ``-q(w_prev) + 2 Re(c^H w)`` (with ``scale=1``) minorizes ``q`` and is
    tight at ``w_prev``. ``form="ratio"`` returns ``J w_prev / ||f_prev||``
    with ``||f_prev||^2 = q(w_prev)``: ``Re(c^H w)`` then lower-bounds
    ``sqrt(q(w))`` by Cauchy-Schwarz.

    Raises
    ------
    AnchorDegenerateError
        If ``q(w_prev) == 0``; the caller has to re-initialize.
    """
    w = _vec(w_prev)
    if not np.all(np.isfinite(w)):
        raise ContractError("anchor has non-finite entries")
    jw = corr.matrix @ w
    q_prev = float(np.vdot(w, jw).real)
    if not q_prev > 0.0:
        raise AnchorDegenerateError("anchor has zero quadratic energy")
    if form == "tangent":
        return scale * jw
    if form == "ratio":
        return scale * jw / math.sqrt(q_prev)
    raise ContractError(f"unknown form {form!r}")


def tangent_minorant(w, w_prev, corr):
    """Value of the tangent lower bound of ``q`` anchored at ``w_prev``, evaluated at ``w``."""
    w, w_prev = _vec(w), _vec(w_prev)
    jw = corr.matrix @ w_prev
    return 2.0 * float(np.vdot(jw, w).real) - float(np.vdot(w_prev, jw).real)


def _shrink(a, V, r, mu, normalize):
    y = np.maximum(a - mu * V, 0.0)
    norm = math.sqrt(float(y @ y))
    if norm == 0.0:
        return y
    if normalize or norm > r:
        y *= r / norm
    return y


def _segment_root(a, V, active, lo, hi, r, N, normalize):
    """Root of ``V . x(mu) = N`` for ``mu`` in ``[lo, hi]`` with a fixed active set."""
    s_a = float(V[active] @ a[active])
    s_v = float(V[active] @ V[active])
    a2 = float(a[active] @ a[active])
    candidates = []
    if not normalize and s_v > 0:
        mu = (s_a - N) / s_v
        if a2 - 2 * mu * s_a + mu * mu * s_v <= r * r * (1 + 1e-12):
            candidates.append(mu)
    # shrunk branch: r (s_a - mu s_v) = N ||y(mu)||, squared into a quadratic
    qa = r * r * s_v * s_v - N * N * s_v
    qb = 2.0 * s_a * s_v * (N * N / s_v - r * r) if s_v > 0 else 0.0
    qc = r * r * s_a * s_a - N * N * a2
    if qa != 0.0:
        disc = qb * qb - 4 * qa * qc
        if disc >= 0:
            root = math.sqrt(disc)
            candidates += [(-qb - root) / (2 * qa), (-qb + root) / (2 * qa)]
    elif qb != 0.0:
        candidates.append(-qc / qb)
    span = max(hi - lo, 1e-300)
    for mu in sorted(candidates):
        if lo - 1e-12 * span <= mu <= hi + 1e-12 * span and s_a - mu * s_v >= 0:
            mu = min(max(mu, lo), hi)
            if abs(float(V @ _shrink(a, V, r, mu, normalize)) - N) <= 1e-9 * max(N, 1.0):
                return mu
    # fall back to bisection on the segment
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if float(V @ _shrink(a, V, r, mid, normalize)) > N:
            lo = mid
        else:
            hi = mid
    return hi


def _l1_threshold(a, V, r, N, normalize, limit=None):
    """
    Magnitudes ``x(mu)`` at the smallest ``mu >= 0`` meeting the l1 budget.

    ``x(mu) = (a - mu V)_+`` shrunk onto the radius-``r`` ball (projection)
    or normalized to it (linear maximization). Breakpoints ``a_i / V_i``
    split ``mu`` into segments with a fixed active set, on which the budget
    equation is at most quadratic. ``limit`` replaces the value at the
    last breakpoint where ``x`` is undefined.
    """
    weighted = (V > 0) & (a > 0)
    free = (V == 0) & (a > 0)
    points = np.unique(np.concatenate(([0.0], a[weighted] / V[weighted])))
    phi = np.empty(points.shape[0])
    for k, mu in enumerate(points):
        phi[k] = float(V @ _shrink(a, V, r, mu, normalize))
    if limit is not None and not np.any(free):
        phi[-1] = limit
    k = int(np.argmax(phi <= N))
    lo, hi = float(points[k - 1]), float(points[k])
    active = free | (weighted & (a / np.where(V > 0, V, 1.0) >= hi))
    mu = _segment_root(a, V, active, lo, hi, r, N, normalize)
    if mu >= points[-1] and limit is not None and not np.any(free):
        return None
    return _fit_l1(_shrink(a, V, r, mu, normalize), V, N)


def _fit_l1(x, V, N_budget):
    # absorb rounding left by the root finder
    l1 = float(V @ x)
    return x * (N_budget / l1) if l1 > N_budget else x


def _phase(v, mag):
    return np.where(mag > 0, v / np.where(mag > 0, mag, 1.0), 0.0)


def project_ball_intersection(v, V, P_A, N_budget):
    """
    Euclidean projection onto ``{||w||^2 <= P_A} ∩ {sum V_i |w_i| <= N_budget}``.

    The projection soft-thresholds magnitudes by ``mu * V``, shrinks onto
    the ball if needed and keeps every phase; ``mu`` is the smallest value
    meeting the l1 constraint. Zero weights leave a port unconstrained by
    the l1 term.
    """
    v = _vec(v)
    V = _weights(V, v.shape[0])
    r = math.sqrt(P_A)
    mag = np.abs(v)
    x = _shrink(mag, V, r, 0.0, normalize=False)
    if not math.isfinite(N_budget) or not np.any(V > 0) or float(V @ x) <= N_budget:
        return _phase(v, mag) * x
    return _phase(v, mag) * _l1_threshold(mag, V, r, N_budget, normalize=False)


def _max_linear(c, V, r, N_budget):
    """Maximize ``Re(c^H w)`` over the ball of radius ``r`` and the weighted l1 ball."""
    mag = np.abs(c)
    phase = _phase(c, mag)
    norm_c = math.sqrt(float(mag @ mag))
    if norm_c == 0.0:
        return np.zeros_like(c)
    x = r * mag / norm_c
    if not math.isfinite(N_budget) or not np.any(V > 0) or float(V @ x) <= N_budget:
        return phase * x
    weighted = V > 0
    ratio = np.where(weighted, mag / np.where(weighted, V, 1.0), 0.0)
    mu_max = float(np.max(ratio))
    tied = weighted & (ratio >= mu_max * (1.0 - TIE_RTOL))
    v_tied = math.sqrt(float(V[tied] @ V[tied]))
    free = ~weighted & (mag > 0)
    if not np.any(free) and r * v_tied >= N_budget:
        # the ball is slack on the l1 face spanned by the best ratio(s)
        return phase * (np.where(tied, V, 0.0) * (N_budget / v_tied**2))
    x = _l1_threshold(mag, V, r, N_budget, normalize=True, limit=r * v_tied)
    if x is None:
        x = _fit_l1(r * np.where(tied, V, 0.0) / v_tied, V, N_budget)
    return phase * x


def solve_p1_subproblem(spec):
    """
    Maximize the tangent minorant of ``q`` over the feasible set.

    Returns
    -------
    Beamformer
    """
    if spec.kind != P1:
        raise ContractError("solve_p1_subproblem needs a P1 spec")
    c = linearize_quadratic(spec.w_prev, spec.params.corr)
    return Beamformer(_max_linear(c, spec.weights, math.sqrt(spec.P_A), spec.N_budget))


def p2_surrogate(w, spec):
    """
    Concave lower bound of ``x0 / beta_ab`` (the conditional gain per unit
    ``beta_ab``) anchored at ``spec.w_prev``.

    ``l(w) - q(w)^2 / (l(w) + kappa)`` with ``l`` the tangent minorant of
    ``q`` and ``kappa = sigma2 / beta_ae``; reduces to ``l(w)`` when
    ``beta_ae = 0``. Returns ``-inf`` where ``l + kappa <= 0``.
    """
    corr = spec.params.corr
    wv = _vec(w)
    ell = tangent_minorant(wv, spec.w_prev, corr)
    if spec.params.beta_ae == 0.0:
        return ell
    kappa = spec.params.sigma2 / spec.params.beta_ae
    den = ell + kappa
    if den <= 0.0:
        return -math.inf
    q = float(np.vdot(wv, corr.matrix @ wv).real)
    return ell - q * q / den


def _p2_value_grad(w, jw_prev, q_prev, J, kappa):
    jw = J @ w
    ell = 2.0 * float(np.vdot(jw_prev, w).real) - q_prev
    grad_ell = 2.0 * jw_prev
    if kappa is None:
        return ell, grad_ell
    den = ell + kappa
    if den <= 0.0:
        return -math.inf, None
    q = float(np.vdot(w, jw).real)
    value = ell - q * q / den
    grad = grad_ell * (1.0 + (q / den) ** 2) - (2.0 * q / den) * (2.0 * jw)
    return value, grad


def solve_p2_subproblem(spec):
    """
    Maximize :func:`p2_surrogate` over the feasible set.

    Accelerated projected gradient ascent from the anchor with
    backtracking; stops once the gradient mapping is below ``1e-7``
    relative to the minorant's gradient (or after 5000 steps).
    """
    if spec.kind != P2:
        raise ContractError("solve_p2_subproblem needs a P2 spec")
    corr = spec.params.corr
    J = corr.matrix
    w = spec.w_prev.copy()
    jw_prev = linearize_quadratic(w, corr)
    q_prev = float(np.vdot(w, jw_prev).real)
    kappa = None if spec.params.beta_ae == 0.0 else spec.params.sigma2 / spec.params.beta_ae

    def project(v):
        return project_ball_intersection(v, spec.weights, spec.P_A, spec.N_budget)

    value, grad = _p2_value_grad(w, jw_prev, q_prev, J, kappa)
    scale = 2.0 * math.sqrt(float(np.vdot(jw_prev, jw_prev).real))
    step = 1.0 / (4.0 * corr.lambda_max)
    # accelerated projected gradient, restarted whenever the objective drops
    y, y_value, y_grad = w, value, grad
    momentum = 1.0
    for _ in range(PGA_MAX_STEPS):
        while True:
            cand = project(y + step * y_grad)
            diff = cand - y
            new_value, new_grad = _p2_value_grad(cand, jw_prev, q_prev, J, kappa)
            sq = float(np.vdot(diff, diff).real)
            if sq == 0.0 or new_value >= y_value + float(np.vdot(y_grad, diff).real) - sq / (2.0 * step):
                break
            step *= 0.5
            if step < 1e-300:
                return Beamformer(w)
        mapping = math.sqrt(sq) / step
        if new_value < value:
            y, y_value, y_grad, momentum = w, value, grad, 1.0
            continue
        nxt = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * momentum * momentum))
        extrapolated = cand + ((momentum - 1.0) / nxt) * (cand - w)
        w, value, grad, momentum = cand, new_value, new_grad, nxt
        if mapping <= PGA_TOL * scale:
            break
        y_value, y_grad = _p2_value_grad(extrapolated, jw_prev, q_prev, J, kappa)
        if y_grad is None:
            y, y_value, y_grad = w, value, grad
        else:
            y = extrapolated
        step *= 1.5
    return Beamformer(w)


@dataclass(frozen=True)
class P2Slacks:
    """Slack variables of the epigraph form at a P2 solution."""

    Y: float
    L: float
    I: float

    @property
    def objective(self):
        return self.Y - self.I**2 / self.L


def p2_slacks(spec, w):
    """
    Recover tight slacks from a P2 solution.

    ``Y = beta_ab l(w)`` and ``L = beta_ae l(w) + sigma2`` sit on their
    minorant constraints and ``I = sqrt(beta_ab beta_ae) q(w)`` on its
    lower bound, so ``Y - I^2 / L = beta_ab * p2_surrogate(w)``.
    """
    p = spec.params
    wv = _vec(w)
    ell = tangent_minorant(wv, spec.w_prev, p.corr)
    q = float(np.vdot(wv, p.corr.matrix @ wv).real)
    return P2Slacks(
        Y=p.beta_ab * ell,
        L=p.beta_ae * ell + p.sigma2,
        I=math.sqrt(p.beta_ab * p.beta_ae) * q,
    )


def default_init(corr, P_A, V=None, N_budget=math.inf):
    """``sqrt(P_A) u_max(J)`` projected onto the current feasible set."""
    w = math.sqrt(P_A) * corr.u_max
    return Beamformer(project_ball_intersection(w, V, P_A, N_budget))


def random_init(M, P_A, rng, V=None, N_budget=math.inf):
    """Seeded complex Gaussian direction at full power, projected onto the feasible set."""
    g = rng.standard_normal(M) + 1j * rng.standard_normal(M)
    g *= math.sqrt(P_A) / np.linalg.norm(g)
    return Beamformer(project_ball_intersection(g, V, P_A, N_budget))


def _objective(kind, w, params):
    if kind == P1:
        return kgr_iid_closed(w, params).bits
    return kgr_cc_closed(w, params).bits


def _safeguard(kind, w_prev, w_new, value_prev, params):
    """
    Keep the rate non-decreasing.

    The surrogates bound the received gain, not the rate itself, so a step
    that also raises ``||w||^2`` can lose rate. Such a step is halved along
    the (feasible) segment from ``w_prev``; if no fraction helps, ``w_prev``
    is kept.
    """
    value = _objective(kind, w_new, params)
    if value >= value_prev:
        return w_new, value
    step = w_new.w - w_prev.w
    for k in range(1, SAFEGUARD_HALVINGS + 1):
        trial = Beamformer(w_prev.w + 0.5**k * step)
        value = _objective(kind, trial, params)
        if value >= value_prev:
            return trial, value
    return w_prev, value_prev


def sca_solve(kind, init, V, params, P_A, N_budget=math.inf, eps0=1e-4, max_iter=MAX_SCA_ITERATIONS):
    """
    Run the SCA loop from ``init``.

    The recorded rate never decreases: a step that loses rate is shortened
    toward the previous iterate (see :func:`_safeguard`).

    Parameters
    ----------
    kind : {"P1", "P2"}
        P1 tracks the i.i.d.-scenario rate, P2 the correlated one (which
        needs ``params.rho == 1``).
    init : Beamformer or array_like
        Feasible starting point with nonzero energy.
    V : array_like or None
        l1 weights; None or zeros disable the constraint.
    params : KgrParams
    P_A, N_budget : float
    eps0 : float
        Stop once consecutive rates differ by at most ``eps0`` bits.
    max_iter : int
        Cap on subproblem solves; hitting it gives ``converged=False``.

    Returns
    -------
    SolveTrace
    """
    if kind not in KINDS:
        raise ContractError(f"kind must be one of {KINDS}, got {kind!r}")
    if kind == P2 and params.rho != 1.0:
        raise ContractError("P2 tracks the fully correlated rate and needs rho = 1")
    w = Beamformer(_vec(init))
    solve = solve_p1_subproblem if kind == P1 else solve_p2_subproblem
    J = params.corr.matrix
    history = [_objective(kind, w, params)]
    t_hist = [float(np.vdot(w.w, J @ w.w).real)]
    converged = False
    iterations = 0
    while iterations < max_iter:
        spec = SubproblemSpec(kind, w.w, V, P_A, N_budget, params)
        w, value = _safeguard(kind, w, solve(spec), history[-1], params)
        iterations += 1
        history.append(value)
        t_hist.append(float(np.vdot(w.w, J @ w.w).real))
        if abs(history[-1] - history[-2]) <= eps0 or math.isinf(eps0):
            converged = True
            break
    return SolveTrace(
        objective=tuple(history),
        w=w,
        converged=converged,
        iterations=iterations,
        kind=kind,
        t_history=tuple(t_hist),
    )
