"""
Fluid-antenna channel model.

The M ports of the fluid antenna share one linear aperture of ``W``
wavelengths, so the fading seen on ports ``n`` and ``m`` is correlated by
``J0(2*pi*|n-m|*W/(M-1))`` (Jakes model). Channels are drawn as
``sqrt(beta) * J^(1/2) * g`` with ``g`` circularly-symmetric standard
complex Gaussian.

All quantities are linear SI: watts, meters, linear gains.
"""

import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .numerics import EigenDecomposition, bessel_j0, psd_sqrt, sym_eig

__all__ = [
    "SystemConfig",
    "SpatialCorrelation",
    "LinkBudget",
    "ChannelDraw",
    "build_correlation",
    "path_loss",
    "legitimate_budget",
    "place_eve",
    "make_rng",
    "sample_channels",
    "iter_channel_batches",
    "dbm_to_watts",
    "db_to_linear",
]

EVE_MODES = ("iid", "correlated")


def dbm_to_watts(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """
    Scenario parameters, linear SI units.

    The defaults reproduce the reference simulation table: 32 ports on a
    half-wavelength aperture, 5 RF chains, 20 dBm at both ends, -80 dBm
    noise, -30 dB reference gain at 1 m and path-loss exponent 2, Alice at
    the origin and Bob 70 m away.

    ``gamma_reg=None`` selects the reweighting regularizer
    ``0.1 * sqrt(P_A / M)``; ``eve_pos=None`` places an i.i.d. Eve at the
    mirror image of Bob through Alice.
    """

    M: int = 32
    W: float = 0.5
    N: int = 5
    P_A: float = 0.1
    P_B: float = 0.1
    sigma2: float = 1e-11
    gamma0: float = 1e-3
    alpha0: float = 2.0
    alice_pos: tuple = (0.0, 0.0)
    bob_pos: tuple = (70.0, 0.0)
    eve_mode: str = "correlated"
    eve_disk_radius: float = 10.0
    eve_pos: tuple = None
    rho: float = 1.0
    eps0: float = 1e-4
    gamma_reg: float = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "alice_pos", tuple(float(v) for v in self.alice_pos))
        object.__setattr__(self, "bob_pos", tuple(float(v) for v in self.bob_pos))
        if self.eve_pos is not None:
            object.__setattr__(self, "eve_pos", tuple(float(v) for v in self.eve_pos))
        problems = []
        if int(self.M) != self.M or self.M < 1:
            problems.append(f"M must be a positive integer, got {self.M!r}")
        if int(self.N) != self.N or self.N < 1:
            problems.append(f"N must be a positive integer, got {self.N!r}")
        elif self.N > self.M:
            problems.append(f"N={self.N} exceeds M={self.M}")
        if not self.W > 0:
            problems.append(f"W must be positive, got {self.W!r}")
        for name in ("P_A", "P_B", "sigma2", "gamma0"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                problems.append(f"{name} must be a positive finite number, got {value!r}")
        if not math.isfinite(self.alpha0):
            problems.append("alpha0 must be finite")
        if not 0.0 <= self.rho <= 1.0:
            problems.append(f"rho must lie in [0, 1], got {self.rho!r}")
        if not self.eps0 > 0:
            problems.append(f"eps0 must be positive, got {self.eps0!r}")
        if self.gamma_reg is not None and not self.gamma_reg > 0:
            problems.append(f"gamma_reg must be positive, got {self.gamma_reg!r}")
        if self.eve_mode not in EVE_MODES:
            problems.append(f"eve_mode must be one of {EVE_MODES}, got {self.eve_mode!r}")
        elif self.eve_mode == "correlated" and not self.eve_disk_radius > 0:
            problems.append("correlated eve_mode needs eve_disk_radius > 0")
        for name in ("alice_pos", "bob_pos", "eve_pos"):
            pos = getattr(self, name)
            if pos is not None and len(pos) != 2:
                problems.append(f"{name} must have two coordinates")
        if int(self.seed) != self.seed or self.seed < 0:
            problems.append(f"seed must be a non-negative integer, got {self.seed!r}")
        if problems:
            raise ConfigError("; ".join(problems))
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def gamma(self):
        """Effective reweighting regularizer."""
        if self.gamma_reg is not None:
            return self.gamma_reg
        return 0.1 * math.sqrt(self.P_A / self.M)

    @property
    def d_ab(self):
        return math.dist(self.alice_pos, self.bob_pos)

    def replace(self, **changes):
        """Return a copy with some fields changed (re-validated)."""
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return SystemConfig(**values)


class SpatialCorrelation:
    """
    Port correlation matrix with its spectrum and square root.

    The eigendecomposition and square-root factor are computed on first use
    and cached; all exposed arrays are read-only.
    """

    def __init__(self, matrix, W=float("nan")):
        matrix = np.array(matrix, dtype=float)
        matrix.setflags(write=False)
        self.matrix = matrix
        self.W = W

    @functools.cached_property
    def eig(self) -> EigenDecomposition:
        eig = sym_eig(self.matrix)
        eig.values.setflags(write=False)
        eig.vectors.setflags(write=False)
        return eig

    @functools.cached_property
    def sqrt_factor(self) -> np.ndarray:
        root = psd_sqrt(self.matrix, eig=self.eig)
        root.setflags(write=False)
        return root

    @property
    def M(self):
        return self.matrix.shape[0]

    @property
    def lambda_max(self):
        return self.eig.lambda_max

    @property
    def u_max(self):
        return self.eig.vectors[:, 0].copy()

    def restrict(self, indices):
        """Correlation of the sub-array formed by ``indices`` (order kept)."""
        idx = np.asarray(indices, dtype=int)
        return SpatialCorrelation(self.matrix[np.ix_(idx, idx)], self.W)

    def __repr__(self):
        return f"SpatialCorrelation(M={self.M}, W={self.W})"


@functools.lru_cache(maxsize=128)
def _build_correlation(M, W):
    if M == 1:
        return SpatialCorrelation(np.ones((1, 1)), W)
    lags = np.arange(M)
    profile = bessel_j0(2.0 * math.pi * lags * W / (M - 1))
    matrix = profile[np.abs(lags[:, None] - lags[None, :])]
    return SpatialCorrelation(matrix, W)


def build_correlation(M, W):
    """
    Jakes correlation matrix of ``M`` evenly spaced ports over ``W`` wavelengths.

    Parameters
    ----------
    M : int
        Number of ports, at least 1. A single port gives ``[[1]]``.
    W : float
        Normalized aperture, strictly positive.

    Returns
    -------
    SpatialCorrelation
        Cached per ``(M, W)``; its arrays are read-only.
    """
    if int(M) != M or M < 1:
        raise DomainError(f"M must be a positive integer, got {M!r}")
    if not W > 0:
        raise DomainError(f"W must be positive, got {W!r}")
    return _build_correlation(int(M), float(W))


def path_loss(d, gamma0, alpha0):
    """Large-scale gain ``gamma0 * d**-alpha0`` for a link of ``d >= 1`` meters."""
    if not d >= 1.0:
        raise DomainError(f"path-loss model needs d >= 1 m, got {d!r}")
    return gamma0 * d ** (-alpha0)


@dataclass(frozen=True)
class LinkBudget:
    beta_ab: float
    beta_ae: float
    d_ab: float
    d_ae: float
    eve_pos: tuple = None


def legitimate_budget(config, eve_pos):
    alice = config.alice_pos
    d_ab = math.dist(alice, config.bob_pos)
    d_ae = math.dist(alice, eve_pos)
    return LinkBudget(
        beta_ab=path_loss(d_ab, config.gamma0, config.alpha0),
        beta_ae=path_loss(d_ae, config.gamma0, config.alpha0),
        d_ab=d_ab,
        d_ae=d_ae,
        eve_pos=tuple(eve_pos),
    )


def place_eve(config, rng):
    """
    Draw Eve's position and return the resulting link budget.

    In correlated mode Eve is uniform on the disk of radius
    ``eve_disk_radius`` around Bob. In i.i.d. mode she sits at
    ``config.eve_pos`` or, by default, at Bob's mirror image through Alice
    (so ``beta_ae == beta_ab``); ``rng`` is not consumed then.
    """
    if config.eve_mode == "correlated":
        radius = config.eve_disk_radius * math.sqrt(rng.random())
        angle = 2.0 * math.pi * rng.random()
        bx, by = config.bob_pos
        pos = (bx + radius * math.cos(angle), by + radius * math.sin(angle))
    elif config.eve_pos is not None:
        pos = config.eve_pos
    else:
        ax, ay = config.alice_pos
        bx, by = config.bob_pos
        pos = (2.0 * ax - bx, 2.0 * ay - by)
    return legitimate_budget(config, pos)


def make_rng(seed, shard=0):
    """Philox-based generator for ``seed + shard``; bit-reproducible across platforms."""
    return np.random.Generator(np.random.Philox(int(seed) + int(shard)))


@dataclass(frozen=True)
class ChannelDraw:
    """A batch of channel realizations, one row per draw (shape ``(count, M)``)."""

    h_ab: np.ndarray
    h_ae: np.ndarray

    def __len__(self):
        return self.h_ab.shape[0]


def _std_complex(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * math.sqrt(0.5)


def sample_channels(corr, budget, rho, count, rng):
    """
    Draw ``count`` correlated Alice-Bob / Alice-Eve channel pairs.

    ``h_ab = sqrt(beta_ab) S g_b`` and
    ``h_ae = sqrt(beta_ae) S (rho g_b + sqrt(1 - rho^2) g_e)`` with ``S``
    the symmetric square root of the port correlation.
    """
    if int(count) != count or count < 1:
        raise DomainError(f"count must be a positive integer, got {count!r}")
    if not 0.0 <= rho <= 1.0:
        raise DomainError(f"rho must lie in [0, 1], got {rho!r}")
    shape = (int(count), corr.M)
    g_b = _std_complex(rng, shape)
    g_e = _std_complex(rng, shape)
    mix = rho * g_b + math.sqrt(1.0 - rho * rho) * g_e
    root = corr.sqrt_factor
    return ChannelDraw(
        h_ab=math.sqrt(budget.beta_ab) * (g_b @ root),
        h_ae=math.sqrt(budget.beta_ae) * (mix @ root),
    )


def iter_channel_batches(corr, budget, rho, count, seed, batch_size=100_000):
    """Yield ``count`` draws as shards; shard ``i`` uses generator ``seed + i``."""
    shard = 0
    remaining = int(count)
    while remaining > 0:
        size = min(batch_size, remaining)
        yield sample_channels(corr, budget, rho, size, make_rng(seed, shard))
        remaining -= size
        shard += 1
