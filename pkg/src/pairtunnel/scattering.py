"""Stationary scattering of the pair by transfer matrices.

Transfer-matrix state vectors
-----------------------------
one-state     ``(psi_{l}, psi_{l-1})``
two-state     ``(Psi2_l, Psi1_l)``            split, onsite
three-state   ``(Psi2_l, Psi1_l, Psi3_{l-1})`` split, onsite, gap (shifted)

A step labelled ``l`` maps the vector at site ``l`` to site ``l + 1``.
Energies are absolute, as in :mod:`pairtunnel.model`.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .model import ModelParams, PotentialProfile
from .spectral import lower_band, one_state_hopping

SQRT2 = math.sqrt(2.0)
TM_MODELS = ("one-state", "two-state", "three-state")
RENORM_EVERY = 8
BAND_EDGE = 1e-3


class NearSingularStep(ArithmeticError):
    """The three-state step matrix A cannot be inverted reliably."""


class TransferStep(NamedTuple):
    matrix: np.ndarray
    site: int
    model: str


def tm_one_state(E: float, I: float, eps: float) -> np.ndarray:
    if I == 0:
        raise ValueError("one-state transfer matrix needs I != 0")
    return np.array([[2 * (2 * eps - E) / I, -1.0], [1.0, 0.0]])


def tm_two_state(params: ModelParams, E: float, eps_l: float, eps_next: float) -> np.ndarray:
    """Step ``[[ab - 1, -b], [a, -1]]`` with absolute-energy a and b.

    ``a = sqrt2 (U1 + eps_l + eps_{l+1} - E) / J`` comes from the split row at
    ``l``, ``b = sqrt2 (U0 + 2 eps_{l+1} - E) / J`` from the onsite row at
    ``l + 1``.
    """
    J = params.J
    if J == 0:
        raise ValueError("two-state transfer matrix needs J != 0")
    a = SQRT2 * (params.U1 + eps_l + eps_next - E) / J
    b = SQRT2 * (params.U0 + 2 * eps_next - E) / J
    return np.array([[a * b - 1, -b], [a, -1.0]])


def three_state_blocks(params: ModelParams, E: float, e0: float, e1: float, e2: float):
    """Matrices A and B of the step relation ``A x_{l+1} = B x_l``."""
    J, r2 = params.J, 1 / SQRT2
    A = np.array(
        [
            [-r2, (params.U0 + 2 * e1 - E) / J, 0.0],
            [-0.5, 0.0, (e0 + e2 - E) / J],
            [0.0, -r2, -0.5],
        ]
    )
    B = np.array(
        [
            [r2, 0.0, 0.0],
            [0.5, 0.0, 0.0],
            [(E - params.U1 - e0 - e1) / J, r2, 0.5],
        ]
    )
    return A, B


def tm_three_state(params: ModelParams, E: float, e0: float, e1: float, e2: float) -> np.ndarray:
    """Step ``A^{-1} B``; rows 1 and 2 of B are parallel so det T = 0."""
    A, B = three_state_blocks(params, E, e0, e1, e2)
    scale = np.linalg.norm(A, 2)
    if abs(np.linalg.det(A)) < 1e-12 * scale**3:
        raise NearSingularStep(f"det A = {np.linalg.det(A):.3e} at E = {E}")
    return np.linalg.solve(A, B)


@dataclass(frozen=True)
class ScatterSolution:
    """Outcome of one stationary scattering calculation.

    ``a`` and ``b`` are the left-side coefficients of ``e^{+i kappa l}`` and
    ``e^{-i kappa l}`` for the solution that is a pure ``e^{i kappa l}`` wave
    on the right, so ``t = 1/a`` and ``r = b/a``.
    """

    model: str
    kappa: float
    energy: float
    a: complex
    b: complex
    t: complex
    r: complex
    P_t: float
    P_r: float
    cutoff: tuple[int, int]
    flag: str | None = None

    @property
    def smatrix(self) -> np.ndarray:
        t, r = self.t, self.r
        return np.array([[r, -np.conj(t)], [t, np.conj(r)]])


def _channel_vectors(model: str, params: ModelParams, kappa: float, I: float | None):
    """Energy and transfer-space Bloch vectors for e^{+i kappa l}, e^{-i kappa l} at l = 0."""
    z = np.exp(1j * kappa)
    if model == "one-state":
        E = -I * math.cos(kappa)
        return E, np.array([1.0, 1 / z]), np.array([1.0, z])
    if model == "two-state":
        E, C = lower_band(params, [kappa, -kappa], "two-state")
        return float(E[0]), C[0], C[1]
    E, C = lower_band(params, [kappa, -kappa], "three-state")
    # model slots (gap, split, onsite) -> transfer order (split, onsite, gap_{l-1})
    vp = np.array([C[0, 1], C[0, 2], C[0, 0] / z])
    vm = np.array([C[1, 1], C[1, 2], C[1, 0] * z])
    return float(E[0]), vp, vm


def transfer_steps(model: str, params: ModelParams, profile: PotentialProfile, E: float, lo: int, hi: int, I=None):
    """Ordered steps for sites ``lo .. hi-1``."""
    steps = []
    for l in range(lo, hi):
        e = profile(np.arange(l, l + 3))
        if model == "one-state":
            T = tm_one_state(E, I, e[0])
        elif model == "two-state":
            T = tm_two_state(params, E, e[0], e[1])
        else:
            T = tm_three_state(params, E, e[0], e[1], e[2])
        steps.append(TransferStep(T, l, model))
    return steps


def propagate_steps(steps, X: np.ndarray, renorm_every: int = RENORM_EVERY):
    """Apply steps in order to the columns of X; returns ``(X_scaled, log_scale)``."""
    X = np.array(X, dtype=complex)
    log_scale = 0.0
    for i, step in enumerate(steps, 1):
        X = step.matrix @ X
        if i % renorm_every == 0:
            s = np.linalg.norm(X)
            X /= s
            log_scale += math.log(s)
    return X, log_scale


def scattering_range(profile: PotentialProfile, margin: int = 2) -> tuple[int, int]:
    """Sites between which the whole potential acts, padded by ``margin``."""
    if profile.is_zero:
        return profile.center - margin, profile.center + margin
    lo, hi = profile.support
    if profile.shape == "gaussian":
        half = max(int(math.ceil(profile.center + 6 * profile.sigma)) - profile.center, profile.support_cutoff)
        lo, hi = profile.center - half, profile.center + half
    return lo - margin, hi + margin


def solve_scattering(
    model: str,
    params: ModelParams,
    profile: PotentialProfile,
    kappa: float,
    hopping: float | None = None,
) -> ScatterSolution:
    """Transmission of a lower-band plane wave incident from the left.

    Both free solutions ``e^{+-i kappa l}`` are propagated from the left
    asymptotic site to the right one; the right-hand state is then
    decomposed on the same two channels by least squares.  This forward
    matching also works for the singular three-state steps.
    """
    if model not in TM_MODELS:
        raise ValueError(f"transfer matrices exist for {TM_MODELS}, not {model!r}")
    kappa = float(kappa)
    I = None
    if model == "one-state":
        I = one_state_hopping(params) if hopping is None else float(hopping)
    lo, hi = scattering_range(profile)
    E, vp, vm = _channel_vectors(model, params, kappa, I)

    flag = None
    if min(abs(kappa), abs(abs(kappa) - math.pi)) < BAND_EDGE or not 0 < kappa < math.pi:
        flag = "band-edge" if 0 <= kappa <= math.pi else "kappa-out-of-range"
        nan = complex("nan")
        return ScatterSolution(model, kappa, E, nan, nan, nan, nan, math.nan, math.nan, (lo, hi), flag)

    def basis(l):
        return np.column_stack([vp * np.exp(1j * kappa * l), vm * np.exp(-1j * kappa * l)])

    try:
        steps = transfer_steps(model, params, profile, E, lo, hi, I)
    except NearSingularStep as exc:
        nan = complex("nan")
        return ScatterSolution(model, kappa, E, nan, nan, nan, nan, math.nan, math.nan, (lo, hi), f"singular: {exc}")

    X, log_scale = propagate_steps(steps, basis(lo))
    W = basis(hi)
    M, *_ = np.linalg.lstsq(W, X, rcond=None)
    resid = np.linalg.norm(W @ M - X) / np.linalg.norm(X)
    if resid > 1e-8:
        flag = f"channel-residual {resid:.1e}"

    # left (1, r) -> right (t, 0)
    r = -M[1, 0] / M[1, 1]
    t = math.exp(log_scale) * np.linalg.det(M) / M[1, 1]
    a = 1 / t
    b = r / t
    return ScatterSolution(model, kappa, E, a, b, t, r, float(abs(t) ** 2), float(abs(r) ** 2), (lo, hi), flag)


@dataclass
class SweepTable:
    """Tunneling probabilities on a (kappa, V) grid."""

    model: str
    kappa: np.ndarray
    V: np.ndarray
    P_t: np.ndarray
    P_r: np.ndarray
    flags: list = field(default_factory=list)

    def rows(self):
        for i, k in enumerate(self.kappa):
            for j, v in enumerate(self.V):
                yield self.model, float(k), float(v), float(self.P_t[i, j]), float(self.P_r[i, j]), self.flags[i][j]


def sweep_tunneling(
    model: str,
    params: ModelParams,
    profile_template: PotentialProfile,
    kappa_grid,
    V_grid,
    hopping: float | None = None,
    threads: int = 1,
) -> SweepTable:
    """Run :func:`solve_scattering` over every grid point; flags never abort."""
    kappa_grid = np.atleast_1d(np.asarray(kappa_grid, dtype=float))
    V_grid = np.atleast_1d(np.asarray(V_grid, dtype=float))
    if kappa_grid.size == 0 or V_grid.size == 0:
        raise ValueError("sweep grids must be non-empty")
    points = [(k, v) for k in kappa_grid for v in V_grid]

    def one(point):
        k, v = point
        try:
            return solve_scattering(model, params, profile_template.with_amplitude(v), k, hopping)
        except (ArithmeticError, np.linalg.LinAlgError) as exc:
            return exc

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, points))
    else:
        results = [one(p) for p in points]

    shape = (kappa_grid.size, V_grid.size)
    P_t = np.full(shape, np.nan)
    P_r = np.full(shape, np.nan)
    flags = [[None] * V_grid.size for _ in kappa_grid]
    for n, res in enumerate(results):
        i, j = divmod(n, V_grid.size)
        if isinstance(res, Exception):
            flags[i][j] = f"error: {res}"
            continue
        P_t[i, j], P_r[i, j], flags[i][j] = res.P_t, res.P_r, res.flag
    return SweepTable(model, kappa_grid, V_grid, P_t, P_r, flags)
