"""
Key generation rate of the beamformed reciprocal probing scheme.

Alice beamforms a downlink pilot with ``w`` and combines Bob's uplink pilot
with ``w^H``; Bob and Eve read scalar least-squares estimates. All six
covariances of the three estimates depend on ``w`` only through
``t = w^H J w`` and ``||w||^2``, so the KGR has a closed form in both
eavesdropping scenarios. The determinant forms are kept as independent
oracles for the closed forms and for Monte-Carlo validation.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DomainError

__all__ = [
    "Beamformer",
    "CovarianceSet",
    "KgrParams",
    "KgrResult",
    "quad_form",
    "assemble_covariances",
    "iid_bits",
    "cc_bits",
    "kgr_iid_closed",
    "kgr_cc_closed",
    "kgr_iid_oracle",
    "kgr_cc_oracle",
    "conditional_gain",
    "full_power_ratio",
    "full_power_ratio_derivative",
    "kgr_pa_derivative",
    "empirical_kgr",
    "SINGULAR_RTOL",
    "MIN_EMPIRICAL_DRAWS",
]

#: A 2x2/3x3 determinant at or below this fraction of the product of its
#: diagonal is treated as singular (perfect agreement, infinite rate).
SINGULAR_RTOL = 1e-13
MIN_EMPIRICAL_DRAWS = 10_000


class Beamformer:
    """
    Complex beamforming vector with support and power bookkeeping.

    Parameters
    ----------
    w : array_like
        Length-M vector, entries in sqrt(watts).
    """

    __slots__ = ("w",)

    def __init__(self, w):
        arr = np.array(w, dtype=complex).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise DomainError("beamformer has non-finite entries")
        arr.setflags(write=False)
        self.w = arr

    @classmethod
    def embed(cls, values, indices, M):
        """Place ``values`` on ``indices`` of an otherwise zero length-M vector."""
        full = np.zeros(M, dtype=complex)
        full[np.asarray(indices, dtype=int)] = values
        return cls(full)

    @property
    def M(self):
        return self.w.shape[0]

    @property
    def support(self):
        return tuple(int(i) for i in np.flatnonzero(np.abs(self.w) > 0))

    @property
    def power(self):
        return float(np.vdot(self.w, self.w).real)

    def is_feasible(self, P_A, tol=1e-9):
        return self.power <= P_A + tol

    def __repr__(self):
        return f"Beamformer(M={self.M}, support={self.support}, power={self.power:.6g})"


def quad_form(w, matrix):
    """Real part of ``w^H A w`` for a real symmetric ``A``."""
    w = w.w if isinstance(w, Beamformer) else np.asarray(w)
    return float(np.vdot(w, matrix @ w).real)


@dataclass(frozen=True)
class KgrParams:
    """Everything besides ``w`` that the rate depends on."""

    corr: object
    beta_ab: float
    beta_ae: float
    P_B: float
    sigma2: float
    rho: float = 1.0

    @classmethod
    def from_config(cls, config, budget, corr=None):
        from .channel import build_correlation

        if corr is None:
            corr = build_correlation(config.M, config.W)
        return cls(
            corr=corr,
            beta_ab=budget.beta_ab,
            beta_ae=budget.beta_ae,
            P_B=config.P_B,
            sigma2=config.sigma2,
            rho=config.rho,
        )

    def restrict(self, indices):
        return KgrParams(
            corr=self.corr.restrict(indices),
            beta_ab=self.beta_ab,
            beta_ae=self.beta_ae,
            P_B=self.P_B,
            sigma2=self.sigma2,
            rho=self.rho,
        )


@dataclass(frozen=True)
class CovarianceSet:
    """Second moments of Alice's, Bob's and Eve's channel estimates."""

    R_aa: float
    R_bb: float
    R_ee: float
    R_ab: complex
    R_ae: complex
    R_be: complex

    def matrix(self):
        """The 3x3 Hermitian covariance of (a, b, e)."""
        return np.array(
            [
                [self.R_aa, self.R_ab, self.R_ae],
                [np.conj(self.R_ab), self.R_bb, self.R_be],
                [np.conj(self.R_ae), np.conj(self.R_be), self.R_ee],
            ],
            dtype=complex,
        )

    def is_valid(self, tol=1e-9):
        if not (self.R_aa > 0 and self.R_bb > 0 and self.R_ee > 0):
            return False
        m = self.matrix()
        lam_min = float(np.linalg.eigvalsh(m)[0])
        return lam_min >= -tol * float(np.trace(m).real)


@dataclass(frozen=True)
class KgrResult:
    """A rate in bits per coherence interval plus how it was obtained."""

    bits: float
    scenario: str
    method: str
    degenerate: bool = False
    iterations: int = 0
    trace: tuple = field(default=(), repr=False)

    @property
    def infinite(self):
        return math.isinf(self.bits)


def assemble_covariances(w, corr, budget, P_B, sigma2, rho=1.0):
    """
    Covariances of the three scalar channel estimates.

    ``sigma2`` is the common noise power or a ``(sigma2_a, sigma2_b, sigma2_e)``
    triple. ``budget`` needs ``beta_ab`` and ``beta_ae`` attributes.
    """
    wv = w.w if isinstance(w, Beamformer) else np.asarray(w, dtype=complex)
    s_a, s_b, s_e = (sigma2,) * 3 if np.ndim(sigma2) == 0 else tuple(sigma2)
    t = quad_form(wv, corr.matrix)
    power = float(np.vdot(wv, wv).real)
    b_ab, b_ae = budget.beta_ab, budget.beta_ae
    cross = math.sqrt(b_ab * b_ae)
    return CovarianceSet(
        R_aa=P_B * b_ab * t + power * s_a,
        R_bb=b_ab * t + s_b,
        R_ee=b_ae * t + s_e,
        R_ab=complex(math.sqrt(P_B) * b_ab * t),
        R_ae=complex(rho * math.sqrt(P_B) * cross * t),
        R_be=complex(rho * cross * t),
    )


def iid_bits(x, power, P_B, sigma2):
    """
    Closed-form i.i.d.-scenario rate from the received gain ``x = beta_ab * t``.

    Vectorized over numpy arrays. ``power`` is ``||w||^2``.
    """
    s2 = sigma2
    num = (P_B * x + power * s2) * (x + s2)
    den = (power + P_B) * s2 * x + power * s2 * s2
    with np.errstate(divide="ignore"):
        return np.log2(num / den)


def cc_bits(t, power, beta_ab, beta_ae, P_B, sigma2):
    """Closed-form correlated-scenario rate (full small-scale correlation), vectorized."""
    s2 = sigma2
    h_u = beta_ab * t
    h_e = beta_ae * t
    h_ue = math.sqrt(beta_ab * beta_ae) * t
    core = h_u * h_e + (h_u + h_e) * s2 + s2 * s2 - h_ue * h_ue
    first = P_B * h_u * h_e + (P_B * h_u + h_e * power) * s2 + power * s2 * s2 - P_B * h_ue * h_ue
    den = ((P_B + power) * core - P_B * s2 * (h_e + s2)) * (h_e + s2) * s2
    with np.errstate(divide="ignore"):
        return np.log2(first * core / den)


def _weights_of(w):
    return w if isinstance(w, Beamformer) else Beamformer(w)


def kgr_iid_closed(w, params):
    """
    Rate when Eve's estimate is independent of the legitimate ones.

    A zero beamformer returns 0 bits flagged ``degenerate`` (the limit of
    the closed form).
    """
    bf = _weights_of(w)
    power = bf.power
    if power == 0.0:
        return KgrResult(0.0, "iid", "closed", degenerate=True)
    if params.sigma2 == 0.0:
        return KgrResult(math.inf, "iid", "closed")
    x = params.beta_ab * quad_form(bf, params.corr.matrix)
    return KgrResult(float(iid_bits(x, power, params.P_B, params.sigma2)), "iid", "closed")


def kgr_cc_closed(w, params):
    """
    Rate conditioned on Eve's downlink estimate, fully correlated fading.

    Raises
    ------
    ContractError
        If ``params.rho != 1``; use :func:`kgr_cc_oracle` on
        :func:`assemble_covariances` for partial correlation.
    """
    if params.rho != 1.0:
        raise ContractError(
            f"the correlated closed form assumes rho = 1 (got {params.rho}); "
            "use kgr_cc_oracle(assemble_covariances(...)) instead"
        )
    bf = _weights_of(w)
    power = bf.power
    if power == 0.0:
        return KgrResult(0.0, "correlated", "closed", degenerate=True)
    if params.sigma2 == 0.0:
        return KgrResult(math.inf, "correlated", "closed")
    t = quad_form(bf, params.corr.matrix)
    bits = cc_bits(t, power, params.beta_ab, params.beta_ae, params.P_B, params.sigma2)
    return KgrResult(float(bits), "correlated", "closed")


def _det2(d1, d2, off):
    return d1 * d2 - abs(off) ** 2


def kgr_iid_oracle(cov):
    """``log2(R_aa R_bb / det)`` of the Alice/Bob block; ``inf`` when singular."""
    prod = cov.R_aa * cov.R_bb
    det = _det2(cov.R_aa, cov.R_bb, cov.R_ab)
    if det <= SINGULAR_RTOL * prod:
        return math.inf
    return math.log2(prod / det)


def kgr_cc_oracle(cov):
    """
    Gaussian conditional mutual information ``I(a; b | e)`` in bits.

    Computed as ``det(R_ae) det(R_be) / (det(R_abe) R_ee)``; the 3x3
    determinant is pivoted on ``R_ee`` so its double cancellation stays
    accurate at high SNR. Valid for any correlation level.
    """
    if not cov.R_ee > 0:
        raise DomainError("kgr_cc_oracle needs R_ee > 0")
    ree = cov.R_ee
    det_ae = _det2(cov.R_aa, ree, cov.R_ae)
    det_be = _det2(cov.R_bb, ree, cov.R_be)
    c_aa = cov.R_aa - abs(cov.R_ae) ** 2 / ree
    c_bb = cov.R_bb - abs(cov.R_be) ** 2 / ree
    c_ab = cov.R_ab - cov.R_ae * np.conj(cov.R_be) / ree
    det_abe = ree * _det2(c_aa, c_bb, c_ab)
    if det_abe <= SINGULAR_RTOL * cov.R_aa * cov.R_bb * ree or det_ae <= 0 or det_be <= 0:
        return math.inf
    return math.log2(det_ae * det_be / (det_abe * ree))


def conditional_gain(w, params):
    """
    Legitimate gain left after discounting Eve's observation.

    ``beta_ab t - beta_ab beta_ae t^2 / (beta_ae t + sigma2)``; the
    correlated rate is increasing in this quantity at full power.
    """
    t = quad_form(_weights_of(w), params.corr.matrix)
    return _conditional_gain_t(t, params.beta_ab, params.beta_ae, params.sigma2)


def _conditional_gain_t(t, beta_ab, beta_ae, sigma2):
    if t == 0.0:
        return 0.0
    return beta_ab * t - beta_ab * beta_ae * t * t / (beta_ae * t + sigma2)


def full_power_ratio(x, P_A, P_B, sigma2):
    """
    Argument of the logarithm in the i.i.d. rate when ``||w||^2 = P_A``.

    ``((P_B x + P_A s)(x + s)) / ((P_A s + P_B s) x + P_A s^2)`` with
    ``s = sigma2``; strictly increasing for ``x > 0``.
    """
    if np.any(np.asarray(x) < 0):
        raise DomainError("full_power_ratio needs x >= 0")
    s = sigma2
    return (P_B * x + P_A * s) * (x + s) / ((P_A * s + P_B * s) * x + P_A * s * s)


def full_power_ratio_derivative(x, P_A, P_B, sigma2):
    """Analytic d/dx of :func:`full_power_ratio`."""
    s = sigma2
    return (P_B / s) * ((P_A + P_B) * x * x + 2.0 * P_A * s * x) / ((P_A + P_B) * x + P_A * s) ** 2


def kgr_pa_derivative(x0, P_A, P_B, sigma2):
    """
    Sensitivity of the rate's ratio to Alice's power budget.

    For a unit-power beamformer with received gain ``x0`` the ratio
    ``(P_B x0 + s)(P_A x0 + s) / ((P_A s + P_B s) x0 + s^2)`` has
    derivative ``(P_B x0 + s) P_B x0^2 / (s (P_A x0 + P_B x0 + s)^2)``,
    which decays like ``1/P_A^2``.
    """
    s = sigma2
    return (P_B * x0 + s) * P_B * x0 * x0 / (s * (P_A * x0 + P_B * x0 + s) ** 2)


def empirical_kgr(draws, w, params, scenario, rng):
    """
    Monte-Carlo rate from simulated probing rounds.

    For each channel draw, Bob's and Eve's downlink estimates
    ``h^T w + z`` and Alice's combined uplink estimate
    ``sqrt(P_B) w^H h_ab + w^H z_vec`` are generated with fresh noise; the
    sample covariances feed :func:`kgr_iid_oracle` or :func:`kgr_cc_oracle`.

    The closed forms describe this simulation exactly when
    ``|w^T J w| = w^H J w`` (e.g. any real ``w`` up to a global phase).

    Parameters
    ----------
    draws : ChannelDraw or iterable of ChannelDraw
        At least 10^4 realizations in total.
    rng : numpy.random.Generator
        Source of the probing noise.
    """
    if scenario not in ("iid", "correlated"):
        raise ContractError(f"unknown scenario {scenario!r}")
    wv = _weights_of(w).w
    batches = [draws] if hasattr(draws, "h_ab") else draws
    s = math.sqrt(params.sigma2)
    root_pb = math.sqrt(params.P_B)
    acc = np.zeros(6, dtype=complex)
    count = 0
    for batch in batches:
        n, m = batch.h_ab.shape
        noise_b = s * _cn(rng, n)
        noise_e = s * _cn(rng, n)
        noise_a = s * (_cn(rng, (n, m)) @ np.conj(wv))
        est_b = batch.h_ab @ wv + noise_b
        est_e = batch.h_ae @ wv + noise_e
        est_a = root_pb * (batch.h_ab @ np.conj(wv)) + noise_a
        acc += [
            np.vdot(est_a, est_a),
            np.vdot(est_b, est_b),
            np.vdot(est_e, est_e),
            np.vdot(est_b, est_a),
            np.vdot(est_e, est_a),
            np.vdot(est_e, est_b),
        ]
        count += n
    if count < MIN_EMPIRICAL_DRAWS:
        raise ContractError(f"empirical_kgr needs >= {MIN_EMPIRICAL_DRAWS} draws, got {count}")
    m = acc / count
    cov = CovarianceSet(
        R_aa=m[0].real, R_bb=m[1].real, R_ee=m[2].real, R_ab=m[3], R_ae=m[4], R_be=m[5]
    )
    if scenario == "iid":
        return kgr_iid_oracle(cov)
    return kgr_cc_oracle(cov)


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * math.sqrt(0.5)
