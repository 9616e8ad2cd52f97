"""Expectation-value dynamics of closed spin-bath models under arbitrary
system/environment splits, plus a cosmological mode-classicality toolkit."""

from .core import (
    BALANCED,
    DOWN,
    IDENTITY2,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    UP,
    Decomposition,
    DensityMatrix,
    DiagonalWeights,
    ExpectationSeries,
    LocalObservable,
    ModelSpec,
    PairCouplingHamiltonian,
    RelevantObservable,
    SpinFactor,
    build_hamiltonian,
    embed_observable,
    make_spin_factor,
    traditional_dec1,
)
from .errors import *  # noqa: F401,F403
from .kernels import BACKEND

__version__ = "0.1.0"
