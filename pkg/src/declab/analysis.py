"""Verdicts on expectation-value dynamics: decoherence time, classification,
pointer weights, pointer-basis and dynamical-invariance checks."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from . import closedform, oracle
from .core import (
    SIGMA_X,
    Decomposition,
    DiagonalWeights,
    ExpectationSeries,
    ModelSpec,
    RelevantObservable,
    build_hamiltonian,
)
from .errors import InsufficientData, NoCrossing, TooManySites

E_INV = math.exp(-1.0)
DEFAULT_WINDOW_FACTOR = 20.0
MIN_POINTS = 100
RECURRENCE_LEVEL = 0.5


class Verdict(str, enum.Enum):
    DECOHERING = "DECOHERING"
    OSCILLATORY = "OSCILLATORY"
    FROZEN = "FROZEN"
    INDETERMINATE = "INDETERMINATE"


@dataclass(frozen=True)
class DynamicsVerdict:
    verdict: Verdict
    t_D: float | None = None
    recurrence_time: float | None = None
    envelope_stats: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.t_D is not None) != (self.verdict is Verdict.DECOHERING):
            raise ValueError("t_D is reported exactly when the verdict is DECOHERING")
        if self.t_D is not None and not self.t_D > 0:
            raise ValueError("t_D must be positive")

    def to_dict(self) -> dict:
        return {
            "class": self.verdict.value,
            "t_D": self.t_D,
            "recurrence_time": self.recurrence_time,
            "envelope_stats": dict(self.envelope_stats),
        }


def default_window(gamma: float, couplings, factor: float = DEFAULT_WINDOW_FACTOR):
    """``[0, factor * sqrt(2/gamma)]``, or ``[0, 4 pi / min|g|]`` when nothing decays."""
    if gamma > 0:
        return 0.0, factor * math.sqrt(2.0 / gamma)
    g = np.abs(np.asarray(couplings, dtype=float))
    g = g[g > 0]
    return 0.0, 4.0 * math.pi / (g.min() if len(g) else 1.0)


def envelope(series: ExpectationSeries) -> np.ndarray:
    """``|c(t)| / |c(t_0)|`` for the complex non-diagonal half-contribution ``c``."""
    nd = np.abs(series.nondiag_part)
    if nd[0] == 0:
        return np.zeros_like(nd)
    return nd / nd[0]


def _first_crossing_linear(t, e, threshold):
    idx = np.flatnonzero(e <= threshold)
    if len(idx) == 0:
        return None, None
    i = int(idx[0])
    if i == 0:
        return float(t[0]), 0
    t0, t1, e0, e1 = t[i - 1], t[i], e[i - 1], e[i]
    return float(t0 + (e0 - threshold) * (t1 - t0) / (e0 - e1)), i


def _first_recurrence(t, e, start, level=RECURRENCE_LEVEL):
    """Time of the first local maximum after ``start`` that rises above ``level``."""
    for i in range(max(start, 1), len(e) - 1):
        if e[i] > level and e[i] >= e[i - 1] and e[i] >= e[i + 1]:
            return float(t[i])
    return None


def classify_dynamics(
    series: ExpectationSeries,
    window=None,
    tol_dec: float = 0.01,
    tol_osc: float = 0.1,
    threshold: float = E_INV,
) -> DynamicsVerdict:
    """Classify the normalized non-diagonal envelope over ``window``.

    DECOHERING: tail mean < tol_dec and tail max < 10 tol_dec (tail = last
    quarter of the window).  OSCILLATORY: tail mean > tol_osc.  FROZEN: the
    non-diagonal part is zero or its envelope stays at 1.
    """
    t = series.times
    lo, hi = (t[0], t[-1]) if window is None else (float(window[0]), float(window[1]))
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if sel.sum() < MIN_POINTS:
        raise InsufficientData(f"{int(sel.sum())} points in window, need {MIN_POINTS}")
    tw = t[sel]
    nd = np.abs(series.nondiag_part[sel])
    scale = max(1.0, abs(series.diag_part), float(np.max(np.abs(series.total[sel]))))
    if nd[0] <= 1e-14 * scale:
        return DynamicsVerdict(Verdict.FROZEN, envelope_stats={"mean_tail": 0.0, "max_tail": 0.0})
    e = nd / nd[0]
    tail = e[tw >= lo + 0.75 * (hi - lo)]
    stats = {"mean_tail": float(tail.mean()), "max_tail": float(tail.max())}
    if np.max(np.abs(e - 1.0)) <= 1e-9:
        return DynamicsVerdict(Verdict.FROZEN, envelope_stats=stats)
    if stats["mean_tail"] < tol_dec and stats["max_tail"] < 10 * tol_dec:
        t_D, i = _first_crossing_linear(tw, e, threshold)
        if t_D is None or t_D <= 0:
            return DynamicsVerdict(Verdict.INDETERMINATE, envelope_stats=stats)
        return DynamicsVerdict(Verdict.DECOHERING, t_D, _first_recurrence(tw, e, i), stats)
    if stats["mean_tail"] > tol_osc:
        return DynamicsVerdict(Verdict.OSCILLATORY, envelope_stats=stats)
    return DynamicsVerdict(Verdict.INDETERMINATE, envelope_stats=stats)


def estimate_decoherence_time(
    source,
    threshold: float = E_INV,
    window=None,
    gamma: float | None = None,
    points: int = 4096,
    site: int = 0,
) -> float:
    """First time the coherence magnitude falls to ``threshold``.

    ``source`` is a :class:`ModelSpec` (coherence of ``site``), an
    :class:`ExpectationSeries` (normalized non-diagonal envelope, linearly
    interpolated) or a callable ``t -> coherence``.  A coarse scan brackets
    the first crossing, which is then refined by bisection.
    """
    if isinstance(source, ExpectationSeries):
        t = source.times
        if window is not None:
            sel = (t >= window[0]) & (t <= window[1])
            t, e = t[sel], envelope(source)[sel]
        else:
            e = envelope(source)
        t_D, _ = _first_crossing_linear(t, e, threshold)
        if t_D is None:
            raise NoCrossing(f"envelope never reaches {threshold:g} in the series")
        return t_D
    if isinstance(source, ModelSpec):
        model = source
        gamma = closedform.site_decay_rate(model, site) if gamma is None else gamma
        fn: Callable = lambda tt: closedform.site_coherence(model, site, tt)
        if window is None:
            window = default_window(gamma, model.g)
    else:
        fn = source
        if window is None:
            if not gamma:
                raise ValueError("a window or a positive gamma is required for a callable source")
            window = default_window(gamma, [])
    grid = np.linspace(window[0], window[1], points)
    mag = np.abs(np.asarray(fn(grid)))
    idx = np.flatnonzero(mag <= threshold)
    if len(idx) == 0:
        raise NoCrossing(f"coherence stays above {threshold:g} on [{window[0]:g}, {window[1]:g}]")
    i = int(idx[0])
    if i == 0:
        return float(grid[0])
    f = lambda x: float(np.abs(fn(np.array([x]))[0])) - threshold
    return float(brentq(f, grid[i - 1], grid[i], xtol=1e-14, rtol=4 * np.finfo(float).eps))


def decomposition_gamma(model: ModelSpec, decomposition: Decomposition) -> float:
    """Gaussian rate of the slowest single-spin coherence inside the system.

    Spins already in a pointer state carry no coherence and are skipped.
    """
    decomposition.check_model(model)
    rates = [
        closedform.site_decay_rate(model, s, decomposition.environment_sites)
        for s in decomposition.system
        if model.factors[s].p_up * model.factors[s].p_down > 0
    ]
    return min(rates) if rates else 0.0


def decomposition_window(model, decomposition, factor: float = DEFAULT_WINDOW_FACTOR):
    gamma = decomposition_gamma(model, decomposition)
    g = model.g
    if gamma == 0 and any(s >= model.M for s in decomposition.system):
        g = [model.g[s - model.M] for s in decomposition.system if s >= model.M]
    return default_window(gamma, g, factor)


def _slowest_site(model, decomposition):
    best, best_rate = None, None
    for s in decomposition.system:
        f = model.factors[s]
        if f.p_up * f.p_down == 0:
            continue
        rate = closedform.site_decay_rate(model, s, decomposition.environment_sites)
        if best_rate is None or rate < best_rate:
            best, best_rate = s, rate
    return best, best_rate


def decomposition_decoherence_time(model, decomposition, threshold: float = E_INV) -> float:
    """Decoherence time of the slowest coherent spin of the system."""
    decomposition.check_model(model)
    site, rate = _slowest_site(model, decomposition)
    if site is None or rate == 0:
        raise NoCrossing("no system coherence decays under this decomposition")
    env = decomposition.environment_sites
    fn = lambda tt: closedform.site_coherence(model, site, tt, env_sites=env)
    return estimate_decoherence_time(fn, threshold, gamma=rate)


def default_observable(model: ModelSpec, decomposition: Decomposition) -> RelevantObservable:
    """sigma_x on every system site."""
    return RelevantObservable({s: SIGMA_X for s in decomposition.system})


def _pointer_labels(k: int) -> tuple[str, ...]:
    return tuple(format(i, f"0{k}b") for i in range(2 ** k))


def asymptotic_weights(model: ModelSpec, decomposition: Decomposition, samples) -> DiagonalWeights:
    """Time-averaged pointer-basis diagonal of the system's reduced state.

    Labels are bit strings over the system sites in ascending order, with
    ``0`` = up.
    """
    decomposition.check_model(model)
    k = len(decomposition.system_sites)
    if k > 12:
        raise TooManySites("system dimension above 2**12")
    samples = np.atleast_1d(np.asarray(samples, dtype=float))
    # a system already in a pointer state has nothing to wait for
    if _slowest_site(model, decomposition)[0] is not None:
        t_D = decomposition_decoherence_time(model, decomposition)
        if samples.min() <= t_D:
            raise ValueError(f"sample times must exceed t_D = {t_D:.6g}")
    sys_ = decomposition.system
    acc = np.zeros(2 ** k)
    if model.num_sites <= 20:
        H = build_hamiltonian(model)
        for st in oracle.evolve_many(oracle.product_state(model), H, samples):
            acc += np.real(np.diag(oracle.reduced_density(st, sys_).entries))
    else:
        for t in samples:
            acc += np.real(np.diag(closedform.reduced_density_closed(model, sys_, t).entries))
    w = np.clip(acc / len(samples), 0.0, 1.0)
    return DiagonalWeights(w, _pointer_labels(k))


@dataclass(frozen=True)
class PointerBasisReport:
    diag_drift: float
    offdiag_deviation: float
    is_pointer_basis: bool


def _system_states(model, sites, t_grid):
    if model.num_sites <= oracle.MAX_SITES:
        H = build_hamiltonian(model)
        for st in oracle.evolve_many(oracle.product_state(model), H, t_grid):
            yield oracle.reduced_density(st, sites).entries
    else:
        for t in t_grid:
            yield closedform.reduced_density_closed(model, sites, t).entries


def pointer_basis_check(model, decomposition, t_grid, basis=None, tol: float = 1e-10) -> PointerBasisReport:
    """Check that the reduced state's diagonal is frozen in ``basis``.

    ``basis`` is a unitary whose columns are basis vectors; a 2x2 matrix is
    applied on every system site.  Off-diagonal magnitudes (computational
    basis) are compared with the closed-form coherence kernels.
    """
    decomposition.check_model(model)
    sys_ = decomposition.system
    if len(sys_) > 10:
        raise TooManySites("system dimension above 2**10")
    U = None
    if basis is not None:
        U = np.asarray(basis, dtype=complex)
        if U.shape == (2, 2) and len(sys_) > 1:
            full = np.ones((1, 1), dtype=complex)
            for _ in sys_:
                full = np.kron(full, U)
            U = full
        oracle._check_unitary(U)
    diag0 = None
    drift = 0.0
    offdev = 0.0
    for t, rho in zip(t_grid, _system_states(model, sys_, t_grid)):
        rb = rho if U is None else U.conj().T @ rho @ U
        d = np.real(np.diag(rb))
        if diag0 is None:
            diag0 = d
        drift = max(drift, float(np.max(np.abs(d - diag0))))
        pred = closedform.reduced_density_closed(model, sys_, t).entries
        offdev = max(offdev, float(np.max(np.abs(np.abs(rho) - np.abs(pred)))))
    return PointerBasisReport(drift, offdev, drift <= tol)


@dataclass(frozen=True)
class InvarianceReport:
    invariant: bool
    crossing_pairs: tuple
    purity_spread: float | None = None
    state_drift: float | None = None


def check_dynamical_invariance(model, decomposition, t_grid=None) -> InvarianceReport:
    """True iff no nonzero coupling connects a system spin to an environment spin.

    When invariant and small enough, attaches dense-engine evidence: the
    spread of the subsystem purity and the drift of the system's reduced
    state over ``t_grid``.
    """
    decomposition.check_model(model)
    sys_ = decomposition.system_sites
    pairs = tuple(
        (i, model.M + k)
        for i in range(model.M)
        for k in range(model.N)
        if model.g[k] != 0 and ((i in sys_) != ((model.M + k) in sys_))
    )
    invariant = not pairs
    if not invariant or model.num_sites > oracle.MAX_SITES:
        return InvarianceReport(invariant, pairs)
    if t_grid is None:
        t_grid = np.linspace(0.0, 10.0, 100)
    H = build_hamiltonian(model)
    purities = []
    drift = 0.0
    rho0 = None
    track_state = len(sys_) <= oracle.MAX_KEEP
    for st in oracle.evolve_many(oracle.product_state(model), H, t_grid):
        purities.append(oracle.system_purity(st, sys_))
        if track_state:
            rho = oracle.reduced_density(st, sys_).entries
            rho0 = rho if rho0 is None else rho0
            drift = max(drift, float(np.max(np.abs(rho - rho0))))
    spread = float(np.max(purities) - np.min(purities))
    return InvarianceReport(True, pairs, spread, drift if track_state else None)


def series_for(model, decomposition, times, observable=None, engine: str = "closedform"):
    """Expectation series of ``observable`` (default sigma_x on the system) for one engine."""
    obs = default_observable(model, decomposition) if observable is None else observable
    if engine == "oracle":
        return oracle.expectation_series_dense(model, obs, times)
    return closedform.expectation_closedform(obs, model, times)


def verdict_for(
    model,
    decomposition,
    observable=None,
    window_factor: float = DEFAULT_WINDOW_FACTOR,
    points: int = 2000,
    engine: str = "closedform",
    **tols,
):
    """Build the series on the decomposition's default window and classify it."""
    window = decomposition_window(model, decomposition, window_factor)
    times = np.linspace(window[0], window[1], points)
    series = series_for(model, decomposition, times, observable, engine)
    return classify_dynamics(series, window, **tols), series
