"""Band structure, Bloch vectors, Wannier states and effective hoppings."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .model import (
    EffectiveHoppings,
    ModelParams,
    build_full_hamiltonian,
    build_two_state_hamiltonian,
)

SQRT2 = math.sqrt(2.0)
DEFAULT_KAPPA_POINTS = 512


def dispersion_two_state(params: ModelParams, kappa, branch: int = -1):
    """Bands of the two-state model in absolute energies.

    ``(U0 + U1)/2 +- sqrt(((U0 - U1)/2)**2 + 2 J**2 cos(kappa/2)**2)``, which
    is ``U0 + Delta/2 +- ...`` whenever ``U0 <= U1``.
    """
    kappa = np.asarray(kappa, dtype=float)
    mean = 0.5 * (params.U0 + params.U1)
    root = np.sqrt((0.5 * params.delta) ** 2 + 2 * params.J**2 * np.cos(kappa / 2) ** 2)
    return mean + np.sign(branch) * root


def dispersion_exact(params: ModelParams, kappa):
    """Exact bound-pair band for U1 = 0: ``-sqrt(U0**2 + 4 J**2 cos(kappa/2)**2)``."""
    kappa = np.asarray(kappa, dtype=float)
    return -np.sqrt(params.U0**2 + 4 * params.J**2 * np.cos(kappa / 2) ** 2)


@dataclass(frozen=True)
class BlochSolution:
    """Two-state Bloch bands; vectors are ordered (split, onsite)."""

    kappa: np.ndarray
    E_minus: np.ndarray
    E_plus: np.ndarray
    C_minus: np.ndarray
    C_plus: np.ndarray


def bloch_matrix(params: ModelParams, kappa, ncomp: int = 2) -> np.ndarray:
    """Plane-wave block H(kappa) of the two- or three-state model.

    Slot order matches the real-space models: (split, onsite) or
    (gap, split, onsite).  Vectorized over ``kappa``.
    """
    kappa = np.asarray(kappa, dtype=float)
    J = params.J
    z = np.exp(1j * kappa)
    M = np.zeros(kappa.shape + (ncomp, ncomp), dtype=complex)
    s, o = ncomp - 2, ncomp - 1
    M[..., s, s] = params.U1
    M[..., o, o] = params.U0
    M[..., s, o] = -J * (1 + z) / SQRT2
    M[..., o, s] = np.conj(M[..., s, o])
    if ncomp == 3:
        M[..., 0, s] = -0.5 * J * (1 + z)
        M[..., s, 0] = np.conj(M[..., 0, s])
    return M


def _fix_gauge(C: np.ndarray) -> np.ndarray:
    """Make the onsite (last) slot real >= 0; fall back to the split slot."""
    onsite = C[..., -1]
    split = C[..., -2]
    ref = np.where(np.abs(onsite) > 1e-12, onsite, split)
    phase = np.where(np.abs(ref) > 0, np.conj(ref) / np.abs(ref), 1.0)
    return C * phase[..., None]


def bloch_eigenproblem(params: ModelParams, kappa) -> BlochSolution:
    """Closed-form eigenpairs of the 2x2 plane-wave problem.

    For the lower branch the eigenvector is proportional to
    ``(J (1 + e^{i kappa}) / sqrt(2), U1 - E_minus)``.  Where that vanishes
    (kappa = pi) the branches are assigned by the diagonal energies, ties
    going to the onsite state for the lower branch.
    """
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    J = params.J
    Em = dispersion_two_state(params, kappa, -1)
    Ep = dispersion_two_state(params, kappa, +1)
    hop = J * (1 + np.exp(1j * kappa)) / SQRT2

    def vec(E, sign):
        C = np.stack([sign * hop, sign * (params.U1 - E) + 0j], axis=-1)
        nrm = np.linalg.norm(C, axis=-1)
        degenerate = nrm < 1e-13
        if np.any(degenerate):
            # off-diagonal vanishes: pure basis states
            onsite_lower = params.U0 <= params.U1
            pick_onsite = onsite_lower if sign > 0 else not onsite_lower
            C[degenerate] = [0, 1] if pick_onsite else [1, 0]
            nrm = np.where(degenerate, 1.0, nrm)
        return _fix_gauge(C / nrm[:, None])

    return BlochSolution(kappa, Em, Ep, vec(Em, +1), vec(Ep, -1))


def lower_band(params: ModelParams, kappa, model: str = "two-state"):
    """Lower-band energy and Bloch vector for a truncated model."""
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    if model == "two-state":
        sol = bloch_eigenproblem(params, kappa)
        return sol.E_minus, sol.C_minus
    if model == "three-state":
        w, v = np.linalg.eigh(bloch_matrix(params, kappa, 3))
        return w[:, 0], _fix_gauge(v[:, :, 0])
    raise ValueError(f"no Bloch problem for model {model!r}")


def pair_bound_state(params: ModelParams, kappa, r_max: int = 200):
    """Lowest bound-pair state of the full model at total quasimomentum kappa.

    Uses the relative-coordinate chain ``r = m - l = 0..r_max`` of the
    infinite clean lattice: the Fock amplitude is
    ``exp(i kappa (l + m) / 2) f(m - l)``.  Returns ``(E, f)`` with
    ``f[..., 0] >= 0`` and ``sum |f|**2 = 1``.
    """
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    J = params.J
    n = r_max + 1
    diag = np.zeros(n)
    diag[0], diag[1] = params.U0, params.U1
    E = np.empty(kappa.size)
    f = np.empty((kappa.size, n))
    for i, k in enumerate(kappa):
        c = math.cos(k / 2)
        off = np.full(n - 1, -J * c)
        off[0] *= SQRT2
        w, v = eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))
        vec = v[:, 0]
        if vec[np.argmax(np.abs(vec))] < 0:
            vec = -vec
        E[i], f[i] = w[0], vec
    return E, f


def truncation_admixture(params: ModelParams, kappa) -> np.ndarray:
    """Weight of the exact bound pair outside the same-site/neighbor families.

    Reported as ``1 - sum_{r<=1} |f(r)|**2`` of the normalized exact state.
    """
    _, f = pair_bound_state(params, kappa)
    return 1.0 - np.sum(np.abs(f[:, :2]) ** 2, axis=1)


def band_structure_full(params: ModelParams, theta_grid) -> np.ndarray:
    """All eigenvalues of the clean full model for each Peierls phase.

    Returns an array of shape ``(len(theta_grid), L(L+1)/2)``.
    """
    if not params.periodic:
        raise ValueError("band sampling by flux threading needs a periodic lattice")
    theta_grid = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    if theta_grid.size == 0:
        raise ValueError("empty theta grid")
    out = []
    for th in theta_grid:
        H = build_full_hamiltonian(params.with_(theta=float(th))).H.toarray()
        out.append(np.linalg.eigvalsh(H))
    return np.array(out)


def kappa_grid(n: int = DEFAULT_KAPPA_POINTS) -> np.ndarray:
    """Uniform grid on (-pi, pi]."""
    return -math.pi + 2 * math.pi * (np.arange(n) + 1) / n


@dataclass(frozen=True)
class WannierState:
    """Lower-band Wannier function centered at site 0.

    ``amplitudes[k]`` is ``(split, onsite)`` at ``offsets[k]``; the split slot
    at offset ``d`` means bosons on ``(d, d+1)``.
    """

    offsets: np.ndarray
    amplitudes: np.ndarray
    center: int
    decay_length: float

    def at(self, offset: int) -> np.ndarray:
        return self.amplitudes[np.searchsorted(self.offsets, offset)]

    def shifted(self, m: int) -> "WannierState":
        return WannierState(self.offsets + m, self.amplitudes, self.center + m, self.decay_length)


def wannier_states(params: ModelParams, kappa_resolution: int = DEFAULT_KAPPA_POINTS) -> WannierState:
    """Wannier state of the two-state lower band by a discrete Bloch sum."""
    n = int(kappa_resolution)
    k = kappa_grid(n)
    C = bloch_eigenproblem(params, k).C_minus
    offsets = np.arange(-(n // 2), n - n // 2)
    phase = np.exp(1j * np.outer(offsets, k))
    amp = phase @ C / n
    if np.max(np.abs(amp.imag)) > 1e-10:
        warnings.warn("Wannier amplitudes are not real; gauge is not smooth", RuntimeWarning)
    amp = amp.real
    edge = np.max(np.abs(amp[[0, -1]]))
    if edge > 1e-10:
        warnings.warn(
            f"Wannier tail {edge:.2e} reaches the grid edge; raise kappa_resolution",
            RuntimeWarning,
        )
    onsite = np.abs(amp[:, 1])
    sel = (offsets >= 0) & (onsite > 1e-12)
    if sel.sum() >= 3:
        slope = np.polyfit(offsets[sel][:8], np.log(onsite[sel][:8]), 1)[0]
        decay = -1.0 / slope if slope < 0 else math.inf
    else:
        decay = 0.0
    return WannierState(offsets, amp, 0, decay)


def hopping_integrals(
    params: ModelParams,
    method: str = "fitted-from-band",
    m_max: int | None = None,
    kappa_resolution: int = DEFAULT_KAPPA_POINTS,
) -> EffectiveHoppings:
    """Hopping integrals I_m of the point-particle model for the lower band.

    Normalized so that the one-state band is ``-sum_m I_m cos(m kappa)``;
    I_0 is minus the band average.  ``wannier-matrix-elements`` converts the
    Wannier overlaps ``h_m = <Phi_{l+m}|H0|Phi_l>`` as ``I_0 = -h_0`` and
    ``I_m = -2 h_m``.  Without ``m_max`` the list is cut where
    ``|I_m| < 1e-8 |I_1|``.
    """
    n = int(kappa_resolution)
    m_all = np.arange(n // 2)
    if method == "fitted-from-band":
        k = kappa_grid(n)
        E = dispersion_two_state(params, k, -1)
        I = -2.0 * (np.cos(np.outer(m_all, k)) @ E) / n
        I[0] *= 0.5
    elif method == "wannier-matrix-elements":
        W = wannier_states(params, n)
        ring = params.with_(num_sites=n, boundary="periodic", theta=0.0)
        H = build_two_state_hamiltonian(ring).H
        # ring index = offset mod n, two slots per site
        phi = np.zeros((n, 2))
        phi[W.offsets % n] = W.amplitudes
        Hphi = (H @ phi.ravel()).reshape(n, 2)
        h = np.array([np.sum(np.roll(phi, m, axis=0) * Hphi) for m in m_all])
        I = -2.0 * h
        I[0] = -h[0]
    else:
        raise ValueError(f"unknown hopping method {method!r}")
    if m_max is None:
        small = np.flatnonzero(np.abs(I[1:]) < 1e-8 * abs(I[1]))
        m_max = int(small[0]) if small.size else m_all[-1]
        m_max = max(m_max, 1)
    return EffectiveHoppings(I[: m_max + 1].copy(), method)


def one_state_hopping(params: ModelParams) -> float:
    """Nearest-neighbor I matching the two-state lower-band width (half of it)."""
    E = dispersion_two_state(params, np.array([0.0, math.pi]), -1)
    return 0.5 * float(E[1] - E[0])


def _band(params: ModelParams, kappa, model: str, hoppings=None):
    if model == "two-state":
        return dispersion_two_state(params, kappa, -1)
    if model == "exact":
        return dispersion_exact(params, kappa)
    if model == "three-state":
        return lower_band(params, kappa, "three-state")[0]
    if model == "full":
        return pair_bound_state(params, kappa)[0]
    if model == "one-state":
        if hoppings is None:
            hoppings = EffectiveHoppings.nearest(one_state_hopping(params))
        return hoppings.dispersion(kappa)
    raise ValueError(f"unknown dispersion model {model!r}")


def group_velocity(params: ModelParams, kappa, model: str = "two-state", hoppings=None, dk: float = 1e-6):
    """Lower-band group velocity dE/dkappa by centered difference."""
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    plus = _band(params, kappa + dk, model, hoppings)
    minus = _band(params, kappa - dk, model, hoppings)
    v = (np.asarray(plus) - np.asarray(minus)) / (2 * dk)
    return v if v.size > 1 else float(v[0])
