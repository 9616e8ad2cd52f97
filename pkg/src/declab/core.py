"""Domain types shared by the dense and closed-form engines.

Conventions used everywhere in the package:

* hbar = 1, so couplings and times are reciprocal units.
* Sites are indexed A-side first (``0 .. M-1``) and B-side after
  (``M .. M+N-1``).
* Every site is a spin-1/2 in the sigma_z product ("pointer") basis with
  basis index 0 = up and 1 = down.
* In a dense amplitude vector site 0 is the most significant bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DuplicateSite,
    InvalidAmplitudes,
    InvalidDecomposition,
    InvalidDensityMatrix,
    InvalidModel,
    ModelMismatch,
    NotHermitian,
    UnknownSite,
)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY2 = np.eye(2, dtype=complex)

NAMED_MATRICES = {
    "sigma_x": SIGMA_X,
    "sigma_y": SIGMA_Y,
    "sigma_z": SIGMA_Z,
    "identity": IDENTITY2,
}

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12


def _frozen(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpinFactor:
    """One spin-1/2 factor ``up_amp |up> + down_amp |down>`` of a product state."""

    up_amp: complex
    down_amp: complex

    def __post_init__(self):
        object.__setattr__(self, "up_amp", complex(self.up_amp))
        object.__setattr__(self, "down_amp", complex(self.down_amp))
        norm2 = abs(self.up_amp) ** 2 + abs(self.down_amp) ** 2
        if abs(norm2 - 1.0) > NORM_TOL:
            raise InvalidAmplitudes(
                f"|up|^2 + |down|^2 = {norm2!r}, expected 1; use make_spin_factor to normalize"
            )

    @property
    def p_up(self) -> float:
        return abs(self.up_amp) ** 2

    @property
    def p_down(self) -> float:
        return abs(self.down_amp) ** 2

    def vector(self) -> np.ndarray:
        return np.array([self.up_amp, self.down_amp], dtype=complex)


def make_spin_factor(up_amp: complex, down_amp: complex) -> SpinFactor:
    """Normalize ``(up_amp, down_amp)`` and wrap it; the relative phase is kept."""
    up_amp, down_amp = complex(up_amp), complex(down_amp)
    norm = np.hypot(abs(up_amp), abs(down_amp))
    if norm == 0.0 or not np.isfinite(norm):
        raise InvalidAmplitudes("amplitudes must be finite and not both zero")
    return SpinFactor(up_amp / norm, down_amp / norm)


BALANCED = SpinFactor(2 ** -0.5, 2 ** -0.5)
UP = SpinFactor(1.0, 0.0)
DOWN = SpinFactor(0.0, 1.0)


def factor_weights(factors) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(|up|^2, |down|^2)`` arrays for a list of spin factors.

    ``factors`` may also be an ``(n, 2)`` array of amplitudes, which avoids
    building millions of :class:`SpinFactor` objects for huge baths.
    """
    if isinstance(factors, np.ndarray):
        amps = np.asarray(factors, dtype=complex)
        if amps.ndim != 2 or amps.shape[1] != 2:
            raise InvalidModel("amplitude array must have shape (n, 2)")
        p = np.abs(amps[:, 0]) ** 2
        q = np.abs(amps[:, 1]) ** 2
        if np.any(np.abs(p + q - 1.0) > NORM_TOL):
            raise InvalidAmplitudes("amplitude rows must be normalized")
        return p, q
    p = np.fromiter((f.p_up for f in factors), dtype=float)
    q = np.fromiter((f.p_down for f in factors), dtype=float)
    return p, q


@dataclass(frozen=True)
class ModelSpec:
    """Closed spin system: A-side factors, B-side factors and one coupling per B spin."""

    a_side: tuple[SpinFactor, ...]
    b_side: tuple[SpinFactor, ...]
    couplings: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "a_side", tuple(self.a_side))
        object.__setattr__(self, "b_side", tuple(self.b_side))
        object.__setattr__(self, "couplings", tuple(float(g) for g in self.couplings))
        if not self.a_side or not self.b_side:
            raise InvalidModel("a_side and b_side must both be non-empty")
        if len(self.couplings) != len(self.b_side):
            raise InvalidModel(
                f"{len(self.couplings)} couplings for {len(self.b_side)} B-side spins"
            )
        if not all(isinstance(f, SpinFactor) for f in self.a_side + self.b_side):
            raise InvalidModel("factors must be SpinFactor instances")
        if not np.all(np.isfinite(self.couplings)):
            raise InvalidModel("couplings must be finite")

    @property
    def M(self) -> int:
        return len(self.a_side)

    @property
    def N(self) -> int:
        return len(self.b_side)

    @property
    def num_sites(self) -> int:
        return self.M + self.N

    @property
    def factors(self) -> tuple[SpinFactor, ...]:
        return self.a_side + self.b_side

    @cached_property
    def g(self) -> np.ndarray:
        return _frozen(np.array(self.couplings, dtype=float))

    @cached_property
    def a_weights(self) -> tuple[np.ndarray, np.ndarray]:
        return tuple(_frozen(w) for w in factor_weights(self.a_side))

    @cached_property
    def b_weights(self) -> tuple[np.ndarray, np.ndarray]:
        return tuple(_frozen(w) for w in factor_weights(self.b_side))

    def is_a_site(self, site: int) -> bool:
        self.check_site(site)
        return site < self.M

    def check_site(self, site: int) -> int:
        if not isinstance(site, (int, np.integer)) or not 0 <= site < self.num_sites:
            raise UnknownSite(f"site {site!r} not in model with {self.num_sites} sites")
        return int(site)

    def factor(self, site: int) -> SpinFactor:
        self.check_site(site)
        return self.factors[site]

    def with_couplings(self, couplings: Sequence[float]) -> "ModelSpec":
        return ModelSpec(self.a_side, self.b_side, tuple(couplings))


def _spin_sums(values: np.ndarray) -> np.ndarray:
    """``sum_i values[i] * s_i`` for every configuration, s_i = +1 (up) / -1 (down).

    Configuration index uses site 0 as the most significant bit.
    """
    out = np.zeros(1)
    for v in values:
        out = np.stack([out + v, out - v], axis=1).ravel()
    return out


@dataclass(frozen=True)
class PairCouplingHamiltonian:
    """Diagonal Hamiltonian ``E(eps, sigma) = (1/2 sum_i eps_i) (sum_k g_k sigma_k)``.

    Self-Hamiltonians are zero; every product-basis configuration is an
    eigenstate.
    """

    model: ModelSpec

    def energy(self, eps: Sequence[int], sigma: Sequence[int]) -> float:
        eps = np.asarray(eps)
        sigma = np.asarray(sigma)
        if eps.shape != (self.model.M,) or sigma.shape != (self.model.N,):
            raise ModelMismatch("configuration length does not match the model")
        if not (np.all(np.abs(eps) == 1) and np.all(np.abs(sigma) == 1)):
            raise ValueError("spin values must be +1 or -1")
        return 0.5 * float(eps.sum()) * float(np.dot(self.model.g, sigma))

    @cached_property
    def a_magnetizations(self) -> np.ndarray:
        """Sum of eps_i for each A configuration (index ordering as in dense states)."""
        return _frozen(_spin_sums(np.ones(self.model.M)))

    @cached_property
    def b_fields(self) -> np.ndarray:
        """Sum of g_k sigma_k for each B configuration."""
        return _frozen(_spin_sums(self.model.g))

    def energies(self) -> np.ndarray:
        """All ``2**(M+N)`` eigenvalues in dense basis order."""
        return np.outer(0.5 * self.a_magnetizations, self.b_fields).ravel()


def build_hamiltonian(model: ModelSpec) -> PairCouplingHamiltonian:
    return PairCouplingHamiltonian(model)


@dataclass(frozen=True)
class Decomposition:
    """A tensor-product split of the sites into system and environment."""

    system_sites: frozenset
    environment_sites: frozenset

    def __post_init__(self):
        sys_ = frozenset(int(s) for s in self.system_sites)
        env = frozenset(int(s) for s in self.environment_sites)
        object.__setattr__(self, "system_sites", sys_)
        object.__setattr__(self, "environment_sites", env)
        if not sys_:
            raise InvalidDecomposition("system must contain at least one site")
        if sys_ & env:
            raise InvalidDecomposition(f"sites {sorted(sys_ & env)} on both sides")
        allsites = sys_ | env
        if min(allsites) != 0 or max(allsites) != len(allsites) - 1:
            raise InvalidDecomposition("system and environment must cover sites 0..n-1")

    @classmethod
    def from_system(cls, model: ModelSpec, system_sites: Iterable[int]) -> "Decomposition":
        sys_ = {model.check_site(s) for s in system_sites}
        return cls(frozenset(sys_), frozenset(range(model.num_sites)) - sys_)

    @property
    def num_sites(self) -> int:
        return len(self.system_sites) + len(self.environment_sites)

    @property
    def system(self) -> list[int]:
        return sorted(self.system_sites)

    @property
    def environment(self) -> list[int]:
        return sorted(self.environment_sites)

    def check_model(self, model: ModelSpec) -> None:
        if self.num_sites != model.num_sites:
            raise ModelMismatch(
                f"decomposition covers {self.num_sites} sites, model has {model.num_sites}"
            )


def traditional_dec1(model: ModelSpec) -> Decomposition:
    """System = the central spin(s) of the A side."""
    return Decomposition.from_system(model, range(model.M))


def _check_hermitian(matrix) -> np.ndarray:
    m = np.array(matrix, dtype=complex)
    if m.shape != (2, 2):
        raise ValueError(f"local observable must be 2x2, got {m.shape}")
    if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
        raise NotHermitian("local observable is not Hermitian")
    return m


@dataclass(frozen=True)
class LocalObservable:
    site: int
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "site", int(self.site))
        object.__setattr__(self, "matrix", _frozen(_check_hermitian(self.matrix)))


@dataclass(frozen=True, eq=False)
class RelevantObservable:
    """Product observable ``O_S (x) I_E``; sites missing from ``factors`` carry the identity."""

    factors: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for site in sorted(self.factors):
            clean[int(site)] = _frozen(_check_hermitian(self.factors[site]))
        object.__setattr__(self, "factors", clean)

    @property
    def sites(self) -> list[int]:
        return list(self.factors)

    @property
    def is_identity(self) -> bool:
        return not self.factors

    def scaled(self, c: float) -> "RelevantObservable":
        """Multiply the observable by a real constant (applied to the first factor)."""
        if not self.factors:
            raise ValueError("cannot scale the implicit identity")
        items = dict(self.factors)
        first = next(iter(items))
        items[first] = items[first] * float(c)
        return RelevantObservable(items)


def embed_observable(obs, model: ModelSpec) -> RelevantObservable:
    """Turn one or several :class:`LocalObservable` into ``O_S (x) I_E``.

    Identity factors are dropped, so embedding only identities yields the
    global identity (empty factor map).
    """
    if isinstance(obs, LocalObservable):
        obs = [obs]
    factors = {}
    for o in obs:
        model.check_site(o.site)
        if o.site in factors:
            raise DuplicateSite(f"site {o.site} appears twice")
        factors[o.site] = o.matrix
    kept = {s: m for s, m in factors.items() if not np.array_equal(m, IDENTITY2)}
    return RelevantObservable(kept)


@dataclass(frozen=True, eq=False)
class ExpectationSeries:
    """Expectation value split into a constant diagonal part and a time-dependent rest.

    ``nondiag_part`` holds the complex half-contribution ``c(t)``; the
    physical non-diagonal sum is ``2 Re c(t)``.  ``coherence`` optionally
    carries the magnitude of the governing coherence factor.
    """

    times: np.ndarray
    total: np.ndarray
    diag_part: float
    nondiag_part: np.ndarray
    coherence: np.ndarray | None = None

    def __post_init__(self):
        times = _frozen(np.atleast_1d(np.asarray(self.times, dtype=float)))
        total = _frozen(np.atleast_1d(np.asarray(self.total, dtype=float)))
        nd = _frozen(np.atleast_1d(np.asarray(self.nondiag_part, dtype=complex)))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "total", total)
        object.__setattr__(self, "nondiag_part", nd)
        object.__setattr__(self, "diag_part", float(self.diag_part))
        if self.coherence is not None:
            coh = _frozen(np.atleast_1d(np.asarray(self.coherence, dtype=float)))
            object.__setattr__(self, "coherence", coh)
            if coh.shape != times.shape:
                raise ValueError("coherence length differs from times")
        if not (times.shape == total.shape == nd.shape):
            raise ValueError("times, total and nondiag_part must share a length")

    def __len__(self):
        return len(self.times)

    @property
    def sum_nd(self) -> np.ndarray:
        return 2.0 * self.nondiag_part.real

    def consistency_error(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(np.max(np.abs(self.total - (self.diag_part + self.sum_nd))))

    @classmethod
    def from_parts(cls, times, diag_part, nondiag_part, coherence=None):
        nd = np.asarray(nondiag_part, dtype=complex)
        return cls(times, diag_part + 2.0 * nd.real, diag_part, nd, coherence)


@dataclass(frozen=True)
class DiagonalWeights:
    weights: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        w = _frozen(np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(w) != len(self.labels):
            raise ValueError("weights and labels differ in length")
        if np.any(w < -1e-12) or np.any(w > 1 + 1e-12):
            raise ValueError("weights must lie in [0, 1]")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        rho = np.array(self.entries, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] == 0:
            raise InvalidDensityMatrix(f"density matrix must be square, got {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
            raise InvalidDensityMatrix("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > 1e-10:
            raise InvalidDensityMatrix(f"trace {np.trace(rho)!r} != 1")
        if np.linalg.eigvalsh(rho).min() < -1e-10:
            raise InvalidDensityMatrix("density matrix has negative eigenvalues")
        object.__setattr__(self, "entries", _frozen(rho))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]
