"""Closed-form expectation values for the diagonal pair-coupling Hamiltonian.

Cost is linear in the bath size per time point, so these routines handle
baths far beyond the reach of :mod:`declab.oracle`.

Sign convention
---------------
States evolve as ``exp(-i H t)`` with ``E(eps, sigma) = 1/2 (sum eps)(sum g sigma)``.
The coherence carried by a pair of A-configurations whose total
magnetizations differ by ``2 delta`` (ket minus bra) is multiplied by::

    R_delta(t) = prod_k (|alpha_k|^2 exp(-i g_k delta t) + |beta_k|^2 exp(+i g_k delta t))

so ``R_1 = conj(r)`` with ``r`` the textbook coherence factor.  The
reduced state of a single central spin therefore has
``rho[up, down] = a b* conj(r(t))``.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .core import (
    ExpectationSeries,
    ModelSpec,
    RelevantObservable,
    SpinFactor,
    DensityMatrix,
    _check_hermitian,
    _spin_sums,
    factor_weights,
)
from .errors import ModelMismatch, TooManySites, UnknownSite, UnsupportedSupport

MAX_B_SUPPORT = 10
MAX_REDUCED_SITES = 10
# |Delta| below this counts as an exactly cancelled field difference
_DELTA_ZERO = 1e-12


def _times(t):
    arr = np.asarray(t, dtype=float)
    return np.atleast_1d(arr), arr.ndim == 0


def _ret(values, scalar):
    return values[0] if scalar else values


def _bath(env, g):
    p, q = factor_weights(env)
    g = np.asarray(g, dtype=float)
    if g.shape != p.shape:
        raise ModelMismatch(f"{len(g)} couplings for {len(p)} bath spins")
    return p, q, g


def coherence_factor_r(env, g, t):
    """``r(t) = prod_k (|alpha_k|^2 e^{i g_k t} + |beta_k|^2 e^{-i g_k t})``.

    ``env`` is a sequence of :class:`SpinFactor` or an ``(N, 2)`` amplitude
    array.  Accepts scalar or array ``t``.  Very large baths underflow to 0
    here; use :func:`log_coherence_magnitude` for the magnitude.
    """
    p, q, g = _bath(env, g)
    ts, scalar = _times(t)
    return _ret(kernels.coherence_product(p, q, g, -ts), scalar)


def log_coherence_magnitude(env, g, t):
    """``ln |r(t)|`` accumulated in the log domain (finite for N ~ 1e6)."""
    p, q, g = _bath(env, g)
    ts, scalar = _times(t)
    return _ret(kernels.log_coherence_abs(p, q, g, ts), scalar)


def gaussian_decay_rate(env, g) -> float:
    """``Gamma = 4 sum |alpha_k|^2 |beta_k|^2 g_k^2``, so ``ln|r|^2 ~ -Gamma t^2`` at small t."""
    p, q, g = _bath(env, g)
    return float(4.0 * np.sum(p * q * g * g))


def coherence_kernel_generalized(delta: int, b_side, g, t):
    """``R_delta(t)``; ``R_0 == 1`` and ``R_1 == conj(coherence_factor_r)``."""
    p, q, g = _bath(b_side, g)
    ts, scalar = _times(t)
    if int(delta) != delta:
        raise ValueError("delta must be an integer")
    if delta == 0:
        return _ret(np.ones(len(ts), dtype=complex), scalar)
    return _ret(kernels.coherence_product(p, q, g, int(delta) * ts), scalar)


def expectation_traditional(system: SpinFactor, obs, env, g, t) -> ExpectationSeries:
    """Central-spin expectation value ``|a|^2 s_uu + |b|^2 s_dd + 2 Re[a b* s_du R_1(t)]``."""
    s = _check_hermitian(obs)
    p, q, g = _bath(env, g)
    ts, _ = _times(t)
    a, b = system.up_amp, system.down_amp
    diag = abs(a) ** 2 * s[0, 0].real + abs(b) ** 2 * s[1, 1].real
    R1 = kernels.coherence_product(p, q, g, ts)
    nd = a * np.conj(b) * s[1, 0] * R1
    return ExpectationSeries.from_parts(ts, diag, nd, np.abs(R1))


def _a_kernel(model: ModelSpec, field, ts):
    """Average of ``exp(-i S_A field t / 2)`` over the A-side product state."""
    pa, qa = model.a_weights
    return kernels.coherence_product(pa, qa, np.full(model.M, 0.5 * field), ts)


def expectation_env_particle(j: int, model: ModelSpec, obs, t) -> ExpectationSeries:
    """Expectation of an observable on bath site ``j`` when the A side is one spin.

    The non-diagonal part is ``2 Re[alpha_j beta_j* xi_du kappa_j(t)]`` with
    ``kappa_j(t) = |a|^2 e^{-i g_j t} + |b|^2 e^{+i g_j t}``: periodic, it never
    decays.
    """
    if model.M != 1:
        raise ModelMismatch("expectation_env_particle needs a single A-side spin")
    model.check_site(j)
    if j < model.M:
        raise UnknownSite(f"site {j} is not a B-side site")
    xi = _check_hermitian(obs)
    ts, _ = _times(t)
    f = model.factors[j]
    diag = f.p_up * xi[0, 0].real + f.p_down * xi[1, 1].real
    kappa = _a_kernel(model, 2.0 * model.g[j - model.M], ts)
    nd = f.up_amp * np.conj(f.down_amp) * xi[1, 0] * kappa
    return ExpectationSeries.from_parts(ts, diag, nd, np.abs(kappa))


def _site_laurent(f: SpinFactor, O) -> tuple[complex, complex, complex]:
    """Coefficients of z^-1, z^0, z^+1 for one site; the power is (ket spin - bra spin)/2."""
    u, d = f.up_amp, f.down_amp
    minus = np.conj(u) * d * O[0, 1]
    zero = abs(u) ** 2 * O[0, 0] + abs(d) ** 2 * O[1, 1]
    plus = np.conj(d) * u * O[1, 0]
    return minus, zero, plus


def _check_support(obs: RelevantObservable, model: ModelSpec):
    for s in obs.sites:
        model.check_site(s)


def expectation_generalized_A(obs: RelevantObservable, model: ModelSpec, t) -> ExpectationSeries:
    """Expectation of a product observable supported on A-side sites.

    The pair sum over A configurations is folded by the Laurent product
    ``F(z) = prod_i sum_{e,e'} c_e* c_e' O_ee' z^{(e'-e)/2}``, whose
    coefficient ``F_delta`` multiplies ``R_delta(t)``.  Sites outside the
    support contribute a factor of 1, so the result does not depend on how
    many other A spins exist.
    """
    _check_support(obs, model)
    if any(s >= model.M for s in obs.sites):
        raise UnsupportedSupport("observable touches B-side sites")
    ts, _ = _times(t)
    poly = np.ones(1, dtype=complex)
    diag = 1.0 + 0j
    for site, O in obs.factors.items():
        m, z, pl = _site_laurent(model.factors[site], O)
        poly = np.convolve(poly, np.array([m, z, pl]))
        diag *= z
    span = (len(poly) - 1) // 2
    pb, qb = model.b_weights
    nd = np.full(len(ts), 0.5 * (poly[span] - diag), dtype=complex)
    for delta in range(1, span + 1):
        c = poly[span + delta]
        if c != 0:
            nd += c * kernels.coherence_product(pb, qb, model.g, delta * ts)
    R1 = kernels.coherence_product(pb, qb, model.g, ts)
    return ExpectationSeries.from_parts(ts, diag.real, nd, np.abs(R1))


def expectation_generalized_B(obs: RelevantObservable, model: ModelSpec, t) -> ExpectationSeries:
    """Expectation of a product observable supported on B-side sites.

    Each bra/ket configuration pair shifts the bath field by
    ``Delta = sum_k g_k (sigma'_k - sigma_k)`` and picks up the A-side
    average ``prod_i (|a_i|^2 e^{-i Delta t/2} + |b_i|^2 e^{+i Delta t/2})``.
    Cost grows as ``3**len(support)``.
    """
    _check_support(obs, model)
    if any(s < model.M for s in obs.sites):
        raise UnsupportedSupport("observable touches A-side sites")
    if len(obs.sites) > MAX_B_SUPPORT:
        raise TooManySites(f"B-side support above {MAX_B_SUPPORT} sites")
    ts, _ = _times(t)
    weights = np.ones(1, dtype=complex)
    deltas = np.zeros(1)
    offdiag = np.zeros(1, dtype=bool)
    diag = 1.0 + 0j
    for site, O in obs.factors.items():
        coeffs = _site_laurent(model.factors[site], O)
        gk = model.g[site - model.M]
        diag *= coeffs[1]
        parts_w, parts_d, parts_o = [], [], []
        for power, c in zip((-1, 0, 1), coeffs):
            if c == 0:
                continue
            parts_w.append(weights * c)
            parts_d.append(deltas + 2.0 * gk * power)
            parts_o.append(offdiag | (power != 0))
        weights = np.concatenate(parts_w)
        deltas = np.concatenate(parts_d)
        offdiag = np.concatenate(parts_o)
    zero = np.abs(deltas) <= _DELTA_ZERO
    nd = np.full(len(ts), 0.5 * np.sum(weights[offdiag & zero]), dtype=complex)
    pos = offdiag & ~zero & (deltas > 0)
    if np.any(pos):
        pa, qa = model.a_weights
        s = np.outer(0.5 * deltas[pos], ts).ravel()
        K = kernels.coherence_product(pa, qa, np.ones(model.M), s).reshape(-1, len(ts))
        nd = nd + weights[pos] @ K
    if obs.sites:
        first = obs.sites[0] - model.M
        coh = np.abs(_a_kernel(model, 2.0 * model.g[first], ts))
    else:
        coh = np.ones(len(ts))
    return ExpectationSeries.from_parts(ts, diag.real, nd, coh)


def expectation_closedform(obs: RelevantObservable, model: ModelSpec, t) -> ExpectationSeries:
    """Dispatch to the A-side or B-side closed form; mixed support is not covered."""
    sites = obs.sites
    if all(s < model.M for s in sites):
        return expectation_generalized_A(obs, model, t)
    if all(s >= model.M for s in sites):
        return expectation_generalized_B(obs, model, t)
    raise UnsupportedSupport("no closed form for observables spanning both A and B sites")


def single_particle_coherence(side: str, index: int, model: ModelSpec, t):
    """Off-diagonal suppression factor of one spin's reduced state.

    For ``A_m`` it is ``R_1(t)`` over the B side (no dependence on M); for
    ``B_n`` it is ``prod_i (|a_i|^2 e^{-i g_n t} + |b_i|^2 e^{+i g_n t})`` (no
    dependence on N).  ``rho_site[up, down] = up_amp * conj(down_amp) * factor``.
    """
    ts, scalar = _times(t)
    side = side.upper()
    if side == "A":
        if not 0 <= index < model.M:
            raise UnknownSite(f"A-side index {index} out of range")
        pb, qb = model.b_weights
        return _ret(kernels.coherence_product(pb, qb, model.g, ts), scalar)
    if side == "B":
        if not 0 <= index < model.N:
            raise UnknownSite(f"B-side index {index} out of range")
        return _ret(_a_kernel(model, 2.0 * model.g[index], ts), scalar)
    raise ValueError("side must be 'A' or 'B'")


def site_coherence(model: ModelSpec, site: int, t, env_sites=None):
    """:func:`single_particle_coherence` addressed by global site index.

    With ``env_sites`` only those spins average the phase; the others are
    treated as part of the observed system.
    """
    model.check_site(site)
    if env_sites is None:
        if site < model.M:
            return single_particle_coherence("A", site, model, t)
        return single_particle_coherence("B", site - model.M, model, t)
    env = set(env_sites)
    ts, scalar = _times(t)
    if site < model.M:
        ks = [k for k in range(model.N) if k + model.M in env]
        pb, qb = model.b_weights
        out = kernels.coherence_product(pb[ks], qb[ks], model.g[ks], ts)
    else:
        ii = [i for i in range(model.M) if i in env]
        pa, qa = model.a_weights
        gn = model.g[site - model.M]
        out = kernels.coherence_product(pa[ii], qa[ii], np.full(len(ii), gn), ts)
    return _ret(out, scalar)


def site_decay_rate(model: ModelSpec, site: int, env_sites=None) -> float:
    """Gaussian rate of a single spin's coherence, counting only ``env_sites`` as bath."""
    model.check_site(site)
    env = set(range(model.num_sites)) if env_sites is None else set(env_sites)
    if site < model.M:
        ks = [k for k in range(model.N) if k + model.M in env]
        pb, qb = model.b_weights
        return float(4.0 * np.sum(pb[ks] * qb[ks] * model.g[ks] ** 2))
    ii = [i for i in range(model.M) if i in env]
    pa, qa = model.a_weights
    gn = model.g[site - model.M]
    return float(4.0 * np.sum(pa[ii] * qa[ii]) * gn * gn)


def reduced_density_closed(model: ModelSpec, sites, t: float) -> DensityMatrix:
    """Reduced state on ``sites`` at time ``t`` without building the full state."""
    sites = sorted({model.check_site(s) for s in sites})
    if not sites:
        raise ValueError("sites must be non-empty")
    if len(sites) > MAX_REDUCED_SITES:
        raise TooManySites(f"closed-form reduced state limited to {MAX_REDUCED_SITES} sites")
    t = float(t)
    a_sys = [s for s in sites if s < model.M]
    b_sys = [s for s in sites if s >= model.M]
    env = [s for s in range(model.num_sites) if s not in sites]
    SA = np.repeat(_spin_sums(np.ones(len(a_sys))), 2 ** len(b_sys))
    GB = np.tile(_spin_sums(model.g[[s - model.M for s in b_sys]]), 2 ** len(a_sys))
    amp = np.ones(1, dtype=complex)
    for s in sites:
        amp = np.outer(amp, model.factors[s].vector()).ravel()
    rho = np.outer(amp, amp.conj())
    inner = 0.5 * SA * GB
    rho = rho * np.exp(-1j * np.subtract.outer(inner, inner) * t)
    dS = np.subtract.outer(SA, SA)
    dG = np.subtract.outer(GB, GB)
    env_b = [s - model.M for s in env if s >= model.M]
    env_a = [s for s in env if s < model.M]
    if env_b:
        pb, qb = model.b_weights
        vals, inv = np.unique(0.5 * dS, return_inverse=True)
        K = kernels.coherence_product(pb[env_b], qb[env_b], model.g[env_b], vals * t)
        rho = rho * K[inv].reshape(rho.shape)
    if env_a:
        pa, qa = model.a_weights
        vals, inv = np.unique(0.5 * dG, return_inverse=True)
        K = kernels.coherence_product(pa[env_a], qa[env_a], np.ones(len(env_a)), vals * t)
        rho = rho * K[inv].reshape(rho.shape)
    return DensityMatrix(0.5 * (rho + rho.conj().T))
