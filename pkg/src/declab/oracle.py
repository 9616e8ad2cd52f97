"""Exact dense state-vector engine.

Small instances only (at most 24 sites).  Everything else in the package
is checked against these routines.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import (
    DensityMatrix,
    ExpectationSeries,
    ModelSpec,
    PairCouplingHamiltonian,
    RelevantObservable,
    _spin_sums,
    build_hamiltonian,
)
from .errors import (
    EmptySubsystem,
    InvalidBasis,
    ModelMismatch,
    NonHermitianResult,
    NotDiagonal,
    TooManySites,
    UnknownSite,
)

MAX_SITES = 24
MAX_KEEP = 12


@dataclass(frozen=True, eq=False)
class DenseState:
    """Pure state on ``num_sites`` spins; site 0 is the most significant bit, bit 0 = up."""

    num_sites: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (2 ** self.num_sites,):
            raise ModelMismatch(
                f"{amps.shape[0]} amplitudes for {self.num_sites} sites"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"state norm {norm!r} != 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.num_sites)


def product_state(model: ModelSpec) -> DenseState:
    n = model.num_sites
    if n > MAX_SITES:
        raise TooManySites(f"{n} sites exceeds the dense limit of {MAX_SITES}")
    amps = np.ones(1, dtype=complex)
    for f in model.factors:
        amps = np.outer(amps, f.vector()).ravel()
    return DenseState(n, amps)


def _check_hamiltonian(state: DenseState, H: PairCouplingHamiltonian):
    if H.model.num_sites != state.num_sites:
        raise ModelMismatch(
            f"Hamiltonian acts on {H.model.num_sites} sites, state has {state.num_sites}"
        )


def evolve_dense(state0: DenseState, H: PairCouplingHamiltonian, t: float) -> DenseState:
    _check_hamiltonian(state0, H)
    phases = np.exp(-1j * H.energies() * float(t))
    return DenseState(state0.num_sites, state0.amplitudes * phases)


def _phase_vector(H: PairCouplingHamiltonian, t: float) -> np.ndarray:
    """``exp(-i E t)`` for every basis state.

    Built per distinct A-magnetization as a Kronecker product of single-spin
    B phases, which avoids one complex exponential per basis state.
    """
    model = H.model
    SA = H.a_magnetizations
    out = np.empty((len(SA), 2 ** model.N), dtype=complex)
    for s in np.unique(SA):
        vec = np.ones(1, dtype=complex)
        for g in model.g:
            w = np.exp(-0.5j * s * g * t)
            vec = np.outer(vec, (w, np.conj(w))).ravel()
        out[SA == s] = vec
    return out.ravel()


def _trusted(num_sites: int, amps: np.ndarray) -> DenseState:
    # unit-modulus phases keep the norm; skip the validation copy
    state = object.__new__(DenseState)
    amps.setflags(write=False)
    object.__setattr__(state, "num_sites", num_sites)
    object.__setattr__(state, "amplitudes", amps)
    return state


def evolve_many(state0: DenseState, H: PairCouplingHamiltonian, times: Iterable[float]):
    """Yield the evolved state at each time."""
    _check_hamiltonian(state0, H)
    for t in times:
        yield _trusted(state0.num_sites, state0.amplitudes * _phase_vector(H, float(t)))


def _keep_axes(n: int, keep) -> list[int]:
    keep = sorted({int(s) for s in keep})
    if not keep:
        raise EmptySubsystem("keep must name at least one site")
    for s in keep:
        if not 0 <= s < n:
            raise UnknownSite(f"site {s} not in a {n}-site state")
    if len(keep) > MAX_KEEP:
        raise TooManySites(f"reduced state on {len(keep)} sites exceeds {MAX_KEEP}")
    return keep


def _hermitize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().T)


def reduced_density(state: DenseState, keep: Iterable[int]) -> DensityMatrix:
    """Partial trace of ``|psi><psi|`` over every site not in ``keep``."""
    n = state.num_sites
    keep = _keep_axes(n, keep)
    rest = [s for s in range(n) if s not in keep]
    psi = np.transpose(state.tensor(), keep + rest).reshape(2 ** len(keep), -1)
    return DensityMatrix(_hermitize(psi @ psi.conj().T))


def partial_trace(rho: np.ndarray, dims: list[int], keep: Iterable[int]) -> np.ndarray:
    """Partial trace of a dense operator over the factors not listed in ``keep``."""
    rho = np.asarray(rho)
    k = len(dims)
    keep = sorted(set(keep))
    tens = rho.reshape(tuple(dims) * 2)
    for axis in sorted(set(range(k)) - set(keep), reverse=True):
        cur = tens.ndim // 2
        tens = np.trace(tens, axis1=axis, axis2=axis + cur)
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    return tens.reshape(dk, dk)


def apply_observable(state: DenseState, obs: RelevantObservable) -> np.ndarray:
    """``O_R |psi>`` as a flat amplitude vector."""
    n = state.num_sites
    psi = state.tensor()
    for site, mat in obs.factors.items():
        if not 0 <= site < n:
            raise UnknownSite(f"observable site {site} not in a {n}-site state")
        psi = np.moveaxis(np.tensordot(mat, psi, axes=([1], [site])), 0, site)
    return psi.reshape(-1)


def expectation_dense(state: DenseState, obs: RelevantObservable) -> float:
    val = np.vdot(state.amplitudes, apply_observable(state, obs))
    if abs(val.imag) > 1e-8:
        raise NonHermitianResult(f"expectation has imaginary part {val.imag!r}")
    return float(val.real)


def _check_unitary(basis: np.ndarray) -> np.ndarray:
    U = np.asarray(basis, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise InvalidBasis("basis must be a square matrix")
    if np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))) > 1e-10:
        raise InvalidBasis("basis matrix is not unitary")
    return U


def split_expectation(rho, obs, basis=None) -> tuple[float, float]:
    """Split ``Tr(rho O)`` into the diagonal and non-diagonal sums of a chosen basis.

    The columns of ``basis`` are the basis vectors; ``None`` means the
    computational basis.
    """
    r = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    o = np.asarray(obs, dtype=complex)
    if r.shape != o.shape:
        raise ModelMismatch(f"state {r.shape} and observable {o.shape} differ in shape")
    if basis is not None:
        U = _check_unitary(basis)
        if U.shape != r.shape:
            raise ModelMismatch("basis dimension differs from the state")
        r = U.conj().T @ r @ U
        o = U.conj().T @ o @ U
    prod = r.T * o  # prod[i, j] = rho_ji O_ij
    sum_d = np.trace(prod)
    sum_nd = prod.sum() - sum_d
    return float(sum_d.real), float(sum_nd.real)


def coarse_grained_state(rho_s_diag, env_dim: int) -> DensityMatrix:
    """``rho_S^d (x) I/env_dim``; tracing out the environment gives back ``rho_S^d``."""
    r = rho_s_diag.entries if isinstance(rho_s_diag, DensityMatrix) else np.asarray(rho_s_diag)
    if env_dim < 1:
        raise ValueError("env_dim must be >= 1")
    off = r - np.diag(np.diag(r))
    if np.max(np.abs(off), initial=0.0) > 1e-10:
        raise NotDiagonal("system state must be diagonal in the pointer basis")
    return DensityMatrix(np.kron(np.diag(np.diag(r)), np.eye(env_dim) / env_dim))


def purity(rho) -> float:
    r = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    # Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return float(np.sum(np.abs(r) ** 2))


def system_purity(state: DenseState, sites: Iterable[int]) -> float:
    """Purity of the reduced state on ``sites`` using whichever side is smaller."""
    sites = sorted(set(sites))
    other = [s for s in range(state.num_sites) if s not in sites]
    side = sites if len(sites) <= len(other) or not other else other
    return purity(reduced_density(state, side))


def _support_fields(model: ModelSpec, sites: list[int]):
    """Per-configuration A-magnetization and B-field restricted to ``sites``."""
    a = [s for s in sites if s < model.M]
    b = [s - model.M for s in sites if s >= model.M]
    SA = np.repeat(_spin_sums(np.ones(len(a))), 2 ** len(b))
    GB = np.tile(_spin_sums(model.g[b]), 2 ** len(a))
    return SA, GB


def _local_operator(obs: RelevantObservable, sites: list[int]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for s in sites:
        out = np.kron(out, obs.factors[s])
    return out


def expectation_series_dense(model: ModelSpec, obs: RelevantObservable, times):
    """Expectation series from the dense engine, split like the closed forms.

    The non-diagonal half-contribution keeps the terms whose ket has the
    larger A-magnetization (then the larger B-field), plus half of the
    off-diagonal terms with no field difference; ``2 Re`` of it is the
    exact non-diagonal sum.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    state0 = product_state(model)
    for s in obs.sites:
        model.check_site(s)
    sites = obs.sites
    if not sites:
        return ExpectationSeries.from_parts(times, 1.0, np.zeros(len(times)))
    O = _local_operator(obs, sites)
    SA, GB = _support_fields(model, sites)
    # rho[k, b] O[b, k]: ket k, bra b
    dS = np.subtract.outer(SA, SA)
    dG = np.subtract.outer(GB, GB)
    gzero = np.abs(dG) <= 1e-12
    key_pos = (dS > 0) | ((dS == 0) & ~gzero & (dG > 0))
    key_zero = (dS == 0) & gzero
    np.fill_diagonal(key_zero, False)
    totals = np.empty(len(times))
    nds = np.empty(len(times), dtype=complex)
    diag = None
    for i, st in enumerate(evolve_many(state0, build_hamiltonian(model), times)):
        rho = reduced_density(st, sites).entries
        terms = rho * O.T
        d = float(np.real(np.trace(terms)))
        if diag is None:
            diag = d
        totals[i] = float(np.real(terms.sum()))
        nds[i] = terms[key_pos].sum() + 0.5 * terms[key_zero].sum()
    return ExpectationSeries(times, totals, diag, nds)
