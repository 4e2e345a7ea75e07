"""
Secret-key generation rate optimization for fluid-antenna transmitters.

Alice has an M-port fluid antenna with N RF chains and beamforms the
reciprocal channel probing with Bob. This package evaluates the resulting
key generation rate (KGR) against an independent or a correlated
eavesdropper, optimizes the beamformer by successive convex approximation
and selects the active ports.
"""

from .channel import (
    SystemConfig,
    build_correlation,
    legitimate_budget,
    make_rng,
    path_loss,
    place_eve,
    sample_channels,
)
from .config import config_from_dict, load_config
from .errors import (
    AnchorDegenerateError,
    ConfigError,
    ContractError,
    DomainError,
    FasKeygenError,
    NotPSDError,
    NumericalError,
)
from .kgr import (
    Beamformer,
    KgrParams,
    KgrResult,
    assemble_covariances,
    conditional_gain,
    empirical_kgr,
    full_power_ratio,
    kgr_cc_closed,
    kgr_cc_oracle,
    kgr_iid_closed,
    kgr_iid_oracle,
    kgr_pa_derivative,
)
from .numerics import bessel_j0, psd_sqrt, sym_eig
from .optimizer import P1, P2, project_ball_intersection, sca_solve
from .ports import (
    build_instance,
    fa_mrc_baseline,
    fa_opt_baseline,
    reweighted_solve,
    sliding_window_init,
    sliding_window_solve,
    traverse,
)
from .sweep import SweepSpec, emit, run_sweep

__version__ = "0.1.0"
