"""Perturbation mode functions on a conformally flat background.

A mode ``f_k`` obeys ``f'' + (k^2 - a''/a) f = 0`` in conformal time.  With
the momentum taken as ``p = y'``, the real mode components are

    f1 = Re f,  f2 = Im f,  g1 = -Im f',  g2 = Re f'

so that ``y = sqrt(2k) f1 y_k - sqrt(2/k) f2 p_k`` and
``p = sqrt(2/k) g1 p_k + sqrt(2k) g2 y_k``.  The combination
``f1 g1 + f2 g2`` is the Wronskian and equals 1/2 for all time.

Integration uses the two-stage Gauss-Legendre scheme (order 4).  For a
linear equation each step is a 2x2 real matrix with unit determinant, so
the Wronskian is conserved up to round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from . import kernels
from .errors import IntegrationFailure, InvalidSampleCount, OutOfDomain

_SQ3_6 = math.sqrt(3.0) / 6.0
_GL_C = (0.5 - _SQ3_6, 0.5 + _SQ3_6)
_GL_A = ((0.25, 0.25 - _SQ3_6), (0.25 + _SQ3_6, 0.25))

WRONSKIAN_FAIL = 1e-6


@dataclass(frozen=True, eq=False)
class ScaleFactorModel:
    """Background scale factor ``a(eta)``.

    Use :meth:`minkowski`, :meth:`de_sitter` or :meth:`tabulated`.
    """

    kind: str
    hubble: float | None = None
    etas: np.ndarray | None = None
    a_values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("minkowski", "desitter", "tabulated"):
            raise ValueError(f"unknown scale factor kind {self.kind!r}")
        if self.kind == "desitter" and not (self.hubble and self.hubble > 0):
            raise ValueError("de Sitter needs H > 0")
        if self.kind == "tabulated":
            etas = np.asarray(self.etas, dtype=float)
            a = np.asarray(self.a_values, dtype=float)
            if etas.ndim != 1 or etas.shape != a.shape or len(etas) < 4:
                raise ValueError("tabulated a(eta) needs matching 1-d arrays of >= 4 samples")
            if np.any(np.diff(etas) <= 0) or np.any(a <= 0):
                raise ValueError("etas must increase and a must be positive")
            spline = CubicSpline(etas, a)
            object.__setattr__(self, "etas", etas)
            object.__setattr__(self, "a_values", a)
            object.__setattr__(self, "_spline", spline)
            object.__setattr__(self, "_spline_dd", spline.derivative(2))

    @classmethod
    def minkowski(cls) -> "ScaleFactorModel":
        return cls("minkowski")

    @classmethod
    def de_sitter(cls, hubble: float) -> "ScaleFactorModel":
        return cls("desitter", hubble=float(hubble))

    @classmethod
    def tabulated(cls, etas, a_values) -> "ScaleFactorModel":
        return cls("tabulated", etas=etas, a_values=a_values)

    @property
    def domain(self) -> tuple[float, float]:
        if self.kind == "minkowski":
            return -math.inf, math.inf
        if self.kind == "desitter":
            return -math.inf, 0.0
        return float(self.etas[0]), float(self.etas[-1])

    def contains(self, eta) -> bool:
        eta = np.asarray(eta, dtype=float)
        lo, hi = self.domain
        if self.kind == "desitter":
            return bool(np.all(eta < 0) and np.all(np.isfinite(eta)))
        return bool(np.all((eta >= lo) & (eta <= hi)) and np.all(np.isfinite(eta)))


def scale_factor_terms(model: ScaleFactorModel, eta):
    """``(a, a''/a)`` at ``eta`` (scalar or array)."""
    if not model.contains(eta):
        raise OutOfDomain(f"eta outside the domain {model.domain}")
    eta = np.asarray(eta, dtype=float)
    if model.kind == "minkowski":
        a, app = np.ones_like(eta), np.zeros_like(eta)
    elif model.kind == "desitter":
        a = -1.0 / (model.hubble * eta)
        app = 2.0 / (eta * eta)
    else:
        a = model._spline(eta)
        app = model._spline_dd(eta) / a
    if a.ndim == 0:
        return float(a), float(app)
    return a, app


@dataclass(frozen=True)
class ModeState:
    f1: float
    f2: float
    g1: float
    g2: float
    eta: float
    k: float

    @property
    def wronskian(self) -> float:
        return self.f1 * self.g1 + self.f2 * self.g2


@dataclass(frozen=True, eq=False)
class ModeTrajectory:
    """Mode function ``f`` and its derivative ``fp`` on a conformal-time grid."""

    k: float
    model: ScaleFactorModel
    etas: np.ndarray
    f: np.ndarray
    fp: np.ndarray
    phase: float = 0.0

    def __post_init__(self):
        for name in ("etas", "f", "fp"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return len(self.etas)

    @property
    def f1(self):
        return self.f.real

    @property
    def f2(self):
        return self.f.imag

    @property
    def g1(self):
        return -self.fp.imag

    @property
    def g2(self):
        return self.fp.real

    def wronskian_residual(self) -> np.ndarray:
        return self.f1 * self.g1 + self.f2 * self.g2 - 0.5

    def state(self, i: int) -> ModeState:
        return ModeState(
            float(self.f1[i]), float(self.f2[i]), float(self.g1[i]), float(self.g2[i]),
            float(self.etas[i]), self.k,
        )

    def index_of(self, eta: float) -> int:
        i = int(np.argmin(np.abs(self.etas - eta)))
        if abs(self.etas[i] - eta) > 1e-9 * max(1.0, abs(eta)):
            raise ValueError(f"eta={eta} is not on the trajectory grid")
        return i

    def rotated(self, theta: float) -> "ModeTrajectory":
        z = np.exp(1j * theta)
        return ModeTrajectory(
            self.k, self.model, self.etas, self.f * z, self.fp * z,
            (self.phase + theta) % (2 * math.pi),
        )


def vacuum_initial(k: float) -> tuple[complex, complex]:
    """``f = 1/sqrt(2k)``, ``f' = -i k / sqrt(2k)``."""
    n = 1.0 / math.sqrt(2.0 * k)
    return complex(n, 0.0), complex(0.0, -k * n)


def gauss_legendre_steps(omega2_nodes: np.ndarray, h: float) -> np.ndarray:
    """Step matrices of the 2-stage Gauss-Legendre scheme for ``u'' = -w(eta) u``.

    ``omega2_nodes`` has shape ``(steps, 2)``: ``w`` at the two stage nodes.
    Returns ``(steps, 2, 2)`` matrices acting on ``(u, u')``.
    """
    w = np.asarray(omega2_nodes, dtype=float)
    n = w.shape[0]
    (a11, a12), (a21, a22) = _GL_A
    w1, w2 = w[:, 0], w[:, 1]
    lhs = np.zeros((n, 4, 4))
    lhs[:, 0, 0] = 1.0
    lhs[:, 0, 1] = -h * a11
    lhs[:, 0, 3] = -h * a12
    lhs[:, 1, 0] = h * a11 * w1
    lhs[:, 1, 1] = 1.0
    lhs[:, 1, 2] = h * a12 * w2
    lhs[:, 2, 1] = -h * a21
    lhs[:, 2, 2] = 1.0
    lhs[:, 2, 3] = -h * a22
    lhs[:, 3, 0] = h * a21 * w1
    lhs[:, 3, 2] = h * a22 * w2
    lhs[:, 3, 3] = 1.0
    rhs = np.broadcast_to(np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]]), (n, 4, 2))
    stages = np.linalg.solve(lhs, rhs)  # rows: u1, v1, u2, v2
    steps = np.empty((n, 2, 2))
    steps[:, 0, :] = np.array([1.0, 0.0]) + 0.5 * h * (stages[:, 1, :] + stages[:, 3, :])
    steps[:, 1, :] = np.array([0.0, 1.0]) - 0.5 * h * (
        w1[:, None] * stages[:, 0, :] + w2[:, None] * stages[:, 2, :]
    )
    return steps


def default_end(k: float, model: ScaleFactorModel) -> float:
    """``-0.01/k`` for de Sitter, which keeps clear of the ``eta -> 0`` singularity."""
    if model.kind != "desitter":
        raise ValueError("a default end time is only defined for de Sitter")
    return -0.01 / k


def evolve_mode(
    k: float, model: ScaleFactorModel, eta0: float, eta1: float | None, steps: int
) -> ModeTrajectory:
    """Integrate the mode equation from vacuum initial data at ``eta0`` to ``eta1``.

    ``eta1=None`` means :func:`default_end`.
    """
    if not k > 0:
        raise ValueError("k must be positive")
    if eta1 is None:
        eta1 = default_end(k, model)
    if steps < 100:
        raise ValueError("steps must be >= 100")
    if not (model.contains(eta0) and model.contains(eta1)):
        raise OutOfDomain(f"[{eta0}, {eta1}] not inside {model.domain}")
    etas = np.linspace(eta0, eta1, steps + 1)
    h = (eta1 - eta0) / steps
    nodes = etas[:-1, None] + h * np.array(_GL_C)[None, :]
    _, app = scale_factor_terms(model, nodes)
    mats = gauss_legendre_steps(k * k - app, h)
    ys = kernels.propagate_linear2(mats, np.array(vacuum_initial(k)))
    traj = ModeTrajectory(float(k), model, etas, ys[:, 0], ys[:, 1])
    worst = float(np.max(np.abs(traj.wronskian_residual())))
    if not worst <= WRONSKIAN_FAIL:
        raise IntegrationFailure(f"Wronskian drifted by {worst:.3g}; increase steps")
    return traj


def analytic_mode(k: float, model: ScaleFactorModel, etas, eta0: float):
    """Exact ``(f, f')`` for vacuum initial data at ``eta0`` (Minkowski and de Sitter).

    For de Sitter the solution is the combination ``A u + B conj(u)`` of the
    Bunch-Davies mode ``u = e^{-ik eta} (1 - i/(k eta)) / sqrt(2k)`` that
    matches the initial data.
    """
    etas = np.asarray(etas, dtype=float)
    f0, fp0 = vacuum_initial(k)
    if model.kind == "minkowski":
        f = f0 * np.exp(-1j * k * (etas - eta0))
        return f, -1j * k * f
    if model.kind != "desitter":
        raise ValueError("no analytic mode for a tabulated background")

    def bd(eta):
        e = np.exp(-1j * k * eta) / math.sqrt(2.0 * k)
        return e * (1.0 - 1j / (k * eta)), e * (-1j * k - 1.0 / eta + 1j / (k * eta * eta))

    u0, up0 = bd(eta0)
    A, B = np.linalg.solve(np.array([[u0, np.conj(u0)], [up0, np.conj(up0)]]), np.array([f0, fp0]))
    u, up = bd(etas)
    return A * u + B * np.conj(u), A * up + B * np.conj(up)


def commutator_coefficient(state: ModeState) -> float:
    """``2 (f1 g1 + f2 g2)``; stays 1 whatever the size of the decaying mode."""
    return 2.0 * state.wronskian


def commutator_violation(state: ModeState, tol: float = 2e-9) -> bool:
    return abs(commutator_coefficient(state) - 1.0) > tol


def _decaying(f: complex, fp: complex, theta: float) -> float:
    z = np.exp(1j * theta)
    return abs((z * f).imag) + abs((z * fp).imag)


def fix_phase(traj: ModeTrajectory, reference_eta: float) -> ModeTrajectory:
    """Rotate the global phase to minimize ``|f2| + |g1|`` at ``reference_eta``.

    The objective is piecewise concave in the angle, so its minimum sits
    where either ``f`` or ``f'`` is real.  Ties prefer a real ``f``; the sign
    is then fixed so that ``f1 > 0`` (or ``g2 > 0`` if ``f1`` vanishes).
    """
    i = traj.index_of(reference_eta)
    f, fp = complex(traj.f[i]), complex(traj.fp[i])
    cands = []
    if f != 0:
        cands.append(-np.angle(f))
    if fp != 0:
        cands.append(-np.angle(fp))
    if not cands:
        return traj
    best = cands[0]
    if len(cands) == 2:
        d0, d1 = _decaying(f, fp, cands[0]), _decaying(f, fp, cands[1])
        if d1 < d0 * (1 - 1e-12) - 1e-300:
            best = cands[1]
    z = np.exp(1j * best)
    f_rot, fp_rot = z * f, z * fp
    if f_rot.real < 0 or (abs(f_rot.real) <= 1e-300 and fp_rot.real < 0):
        best += math.pi
    if abs(math.remainder(best, 2 * math.pi)) < 1e-15:
        return traj
    return traj.rotated(best)


def phase_fixed_ratios(traj: ModeTrajectory) -> np.ndarray:
    """Decaying/growing ratio with the phase fixed independently at every grid point.

    Applies the same candidate choice as :func:`fix_phase` pointwise.
    """
    f, fp = traj.f, traj.fp

    def branches(theta):
        z = np.exp(1j * theta)
        a, b = z * f, z * fp
        return np.abs(a.imag) + np.abs(b.imag), np.abs(a.real) + np.abs(b.real)

    dec_a, grow_a = branches(-np.angle(f))
    dec_b, grow_b = branches(-np.angle(fp))
    use_b = (dec_b < dec_a * (1 - 1e-12)) | (f == 0)
    return np.where(use_b, dec_b / grow_b, dec_a / grow_a)


@dataclass(frozen=True)
class ClassicalityReport:
    decaying_branch: float
    growing_branch: float
    ratio: float
    p_over_y: float | None


def classicality_diagnostics(state: ModeState) -> ClassicalityReport:
    decaying = abs(state.f2) + abs(state.g1)
    growing = abs(state.f1) + abs(state.g2)
    ratio = decaying / growing if growing > 0 else math.inf
    slope = state.g2 / state.f1 if abs(state.f1) > 1e-12 else None
    return ClassicalityReport(decaying, growing, ratio, slope)


def transfer_matrix(state: ModeState) -> np.ndarray:
    """Maps initial ``(y_k, p_k)`` to ``(y, p)`` at the state's time."""
    k = state.k
    return np.array(
        [
            [math.sqrt(2 * k) * state.f1, -math.sqrt(2 / k) * state.f2],
            [math.sqrt(2 * k) * state.g2, math.sqrt(2 / k) * state.g1],
        ]
    )


@dataclass(frozen=True)
class EnsembleReport:
    k: float
    eta: float
    n_samples: int
    seed: int
    var_y_sample: float
    var_y_quantum: float
    var_y_propagated: float
    var_y_stderr: float
    var_y_zscore: float
    corr_sample: float
    corr_predicted: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def classical_ensemble_compare(
    k: float,
    model: ScaleFactorModel,
    eta: float,
    n_samples: int = 100_000,
    seed: int = 0,
    *,
    eta0: float,
    steps: int = 10_000,
    trajectory: ModeTrajectory | None = None,
) -> EnsembleReport:
    """Propagate a Gaussian ensemble of classical initial data with the mode transfer matrix.

    Initial ``(y, p)`` have the vacuum second moments ``Var y = 1/(2k)``,
    ``Var p = k/2``; the resulting ``Var y`` is compared with ``|f_k|^2``.
    """
    if int(n_samples) != n_samples or n_samples < 10_000:
        raise InvalidSampleCount("n_samples must be an integer >= 10000")
    n_samples = int(n_samples)
    if trajectory is not None:
        state = trajectory.state(trajectory.index_of(eta))
    elif eta == eta0:
        f0, fp0 = vacuum_initial(k)
        state = ModeState(f0.real, f0.imag, -fp0.imag, fp0.real, eta, k)
    else:
        traj = evolve_mode(k, model, eta0, eta, steps)
        state = traj.state(len(traj) - 1)
    T = transfer_matrix(state)
    cov0 = np.diag([1.0 / (2 * k), k / 2.0])
    cov = T @ cov0 @ T.T
    rng = np.random.default_rng(seed)
    initial = rng.standard_normal((2, n_samples)) * np.sqrt(np.diag(cov0))[:, None]
    y, p = T @ initial
    var_y = float(np.var(y, ddof=1))
    var_q = state.f1 ** 2 + state.f2 ** 2
    stderr = var_q * math.sqrt(2.0 / (n_samples - 1))
    cov_yp = state.f1 * state.g2 - state.f2 * state.g1
    corr_pred = cov_yp / math.sqrt(var_q * (state.g1 ** 2 + state.g2 ** 2))
    return EnsembleReport(
        float(k), float(eta), n_samples, int(seed), var_y, var_q, float(cov[0, 0]), stderr,
        (var_y - var_q) / stderr, float(np.corrcoef(y, p)[0, 1]), float(corr_pred),
    )
