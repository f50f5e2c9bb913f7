"""Two-boson lattice models: the full Bose-Hubbard pair and its reductions.

All models share one energy convention: absolute energies, with diagonal
``U0`` for both bosons on one site, ``U1`` for bosons on neighboring sites
and ``0`` for larger separations.

Basis ordering
--------------
full
    Ordered pairs ``(l, m)`` with ``l <= m``, row-major over lattice
    indices (``numpy.triu_indices``).
two-state
    Site-major, two slots per site: ``(split, onsite)`` where ``split`` holds
    the bosons at ``(l, l+1)`` and ``onsite`` both bosons at ``l``.
three-state
    Site-major, ``(gap, split, onsite)`` where ``gap`` holds ``(l, l+2)``.
one-state
    One slot per site (the pair as a point particle).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp

BOUNDARIES = ("periodic", "open")
MODELS = ("one-state", "two-state", "three-state", "full")

# |eps_l| < SUPPORT_TOL * |V| outside the Gaussian support
SUPPORT_TOL = 1e-14


@dataclass(frozen=True)
class ModelParams:
    """Couplings and lattice geometry of the Bose-Hubbard pair.

    Lattice indices run ``0 .. num_sites-1``; site coordinates are
    ``index - num_sites // 2`` so that coordinate 0 sits in the middle.
    """

    J: float = 1.0
    U0: float = -2.0
    U1: float = 0.0
    theta: float = 0.0
    num_sites: int = 201
    boundary: str = "open"

    def __post_init__(self):
        if not self.J > 0:
            raise ValueError(f"J must be positive, got {self.J}")
        if int(self.num_sites) != self.num_sites or self.num_sites < 3:
            raise ValueError(f"num_sites must be an integer >= 3, got {self.num_sites}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        object.__setattr__(self, "num_sites", int(self.num_sites))

    @property
    def delta(self) -> float:
        return abs(self.U0 - self.U1)

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    @property
    def origin(self) -> int:
        return self.num_sites // 2

    def sites(self) -> np.ndarray:
        """Site coordinates in lattice-index order."""
        return np.arange(self.num_sites) - self.origin

    def index(self, site):
        return np.asarray(site) + self.origin

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


def gaussian_cutoff(sigma: float) -> int:
    """Half-width beyond which a unit Gaussian drops below SUPPORT_TOL."""
    return int(math.ceil(sigma * math.sqrt(2.0 * math.log(1.0 / SUPPORT_TOL))))


@dataclass(frozen=True)
class PotentialProfile:
    """Single-boson scattering potential eps_l.

    ``center`` is the Gaussian center, the impurity site, the first box site,
    or the coordinate of the first tabulated value.  Tabulated values are
    multiplied by ``V`` (default 1) so that amplitude scans work uniformly.
    """

    shape: str = "none"
    V: float = 0.0
    sigma: float = 1.0
    center: int = 0
    site_end: int = 0
    values: tuple = ()

    def __post_init__(self):
        if self.shape not in ("none", "gaussian", "impurity", "box", "tabulated"):
            raise ValueError(f"unknown potential shape {self.shape!r}")
        if self.shape == "gaussian" and not self.sigma > 0:
            raise ValueError("Gaussian width must be positive")
        if self.shape == "box" and self.site_end < self.center:
            raise ValueError("box site_end precedes site_start")
        if self.shape == "tabulated":
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
            if not self.values:
                raise ValueError("tabulated potential needs at least one value")

    @classmethod
    def none(cls) -> "PotentialProfile":
        return cls()

    @classmethod
    def gaussian(cls, V: float, sigma: float, center: int = 0) -> "PotentialProfile":
        return cls("gaussian", V=V, sigma=sigma, center=center)

    @classmethod
    def impurity(cls, V: float, site: int = 0) -> "PotentialProfile":
        return cls("impurity", V=V, center=site)

    @classmethod
    def box(cls, V: float, site_start: int = 0, site_end: int = 1) -> "PotentialProfile":
        return cls("box", V=V, center=site_start, site_end=site_end)

    @classmethod
    def tabulated(cls, values: Sequence[float], start: int = 0, V: float = 1.0) -> "PotentialProfile":
        return cls("tabulated", V=V, center=start, values=tuple(values))

    def with_amplitude(self, V: float) -> "PotentialProfile":
        return replace(self, V=float(V))

    @property
    def support_cutoff(self) -> int:
        """Half-width of the support measured from ``center``."""
        lo, hi = self.support
        return max(self.center - lo, hi - self.center)

    @property
    def support(self) -> tuple[int, int]:
        """Inclusive coordinate range outside of which eps_l is exactly 0."""
        if self.shape == "gaussian":
            c = gaussian_cutoff(self.sigma)
            return self.center - c, self.center + c
        if self.shape == "box":
            return self.center, self.site_end
        if self.shape == "tabulated":
            return self.center, self.center + len(self.values) - 1
        return self.center, self.center

    def window(self) -> tuple[int, int]:
        """Barrier region used to classify scattering outcomes."""
        if self.shape == "gaussian":
            half = int(math.ceil(6 * self.sigma)) + 2
            return self.center - half, self.center + half
        lo, hi = self.support
        return lo - 2, hi + 2

    @property
    def is_zero(self) -> bool:
        return self.shape == "none" or self.V == 0

    def __call__(self, l):
        l = np.asarray(l)
        out = np.zeros(l.shape, dtype=float)
        if self.shape == "none" or self.V == 0:
            return out if out.ndim else float(out)
        lo, hi = self.support
        inside = (l >= lo) & (l <= hi)
        x = l[inside]
        if self.shape == "gaussian":
            out[inside] = self.V * np.exp(-((x - self.center) ** 2) / (2.0 * self.sigma**2))
        elif self.shape in ("impurity", "box"):
            out[inside] = self.V
        else:
            out[inside] = self.V * np.asarray(self.values)[x - self.center]
        return out if out.ndim else float(out)


def eval_potential(profile: PotentialProfile, l):
    return profile(l)


@dataclass(frozen=True)
class EffectiveHoppings:
    """Hopping integrals I_0..I_mmax of the point-particle pair model."""

    values: np.ndarray
    provenance: str = "user"

    def __post_init__(self):
        vals = np.atleast_1d(np.asarray(self.values, dtype=float))
        if vals.size == 0:
            raise ValueError("hopping list is empty")
        object.__setattr__(self, "values", vals)

    @classmethod
    def nearest(cls, I: float) -> "EffectiveHoppings":
        return cls(np.array([0.0, I]), "user")

    @property
    def m_max(self) -> int:
        return self.values.size - 1

    def dispersion(self, kappa):
        kappa = np.asarray(kappa, dtype=float)
        m = np.arange(self.values.size)
        return -np.cos(np.multiply.outer(kappa, m)) @ self.values


@dataclass(frozen=True, eq=False)
class LatticeOperator:
    """A model Hamiltonian together with its basis bookkeeping.

    ``pairs[i]`` holds the lattice indices ``(l, m)``, ``l <= m``, of the two
    bosons in basis slot ``i`` (for the one-state model ``l == m`` is the
    pair position).  ``family[i]`` is the separation class: 0 same site,
    1 neighbors, 2 one empty site between them, 3 more.
    """

    model: str
    params: ModelParams
    profile: PotentialProfile
    H: sp.csr_matrix
    pairs: np.ndarray
    family: np.ndarray
    hoppings: EffectiveHoppings | None = None

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    def positions(self) -> np.ndarray:
        """Center-of-mass coordinate of each basis slot."""
        sites = self.params.sites()
        l, m = self.pairs[:, 0], self.pairs[:, 1]
        com = 0.5 * (sites[l] + sites[m])
        if self.params.periodic:
            L = self.params.num_sites
            wrap = (m - l) > L // 2
            com = np.where(wrap, com + 0.5 * L, com)
            com = (com + self.params.origin) % L - self.params.origin
        return com

    def energy(self, psi: np.ndarray) -> float:
        return float(np.vdot(psi, self.H @ psi).real)


def _sep(l, m, params: ModelParams):
    d = m - l
    if params.periodic:
        d = np.minimum(d, params.num_sites - d)
    return d


def _check_support(params: ModelParams, profile: PotentialProfile | None):
    if profile is None or profile.is_zero:
        return
    lo, hi = profile.support
    sites = params.sites()
    if lo < sites[0] or hi > sites[-1]:
        raise ValueError(
            f"potential support [{lo}, {hi}] extends beyond lattice [{sites[0]}, {sites[-1]}]"
        )


def _eps(params: ModelParams, profile: PotentialProfile | None) -> np.ndarray:
    if profile is None:
        return np.zeros(params.num_sites)
    return np.asarray(profile(params.sites()), dtype=float)


def pair_index(l, m, L: int):
    """Position of the sorted pair ``(l, m)`` in the full basis."""
    l, m = np.minimum(l, m), np.maximum(l, m)
    return l * L - l * (l - 1) // 2 + (m - l)


def build_full_hamiltonian(params: ModelParams, profile: PotentialProfile | None = None) -> LatticeOperator:
    """Exact Bose-Hubbard Hamiltonian for two bosons.

    Hopping carries ``-(J/2) exp(i theta)`` per bond in the forward direction;
    moves into or out of a doubly occupied site pick up the bosonic factor
    sqrt(2).
    """
    _check_support(params, profile)
    profile = profile or PotentialProfile.none()
    L = params.num_sites
    l, m = np.triu_indices(L)
    n = l.size

    rows, cols, amps = [], [], []
    # forward hop of the boson at l (both share the site if l == m), then of the one at m
    moves = (
        (l, m, np.where(l == m, 2.0, 1.0), np.ones(n, dtype=bool)),
        (m, l, np.ones(n), m != l),
    )
    for src, other, nsrc, movable in moves:
        movable = movable.copy()
        dest = src + 1
        if params.periodic:
            dest = dest % L
        else:
            movable &= dest < L
        s, o, d, ns = src[movable], other[movable], dest[movable], nsrc[movable]
        amp = np.sqrt(ns) * np.sqrt(1.0 + (o == d))
        rows.append(pair_index(o, d, L))
        cols.append(np.flatnonzero(movable))
        amps.append(amp)
    F = sp.coo_matrix(
        (np.concatenate(amps), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()

    eps = _eps(params, profile)
    sep = m - l
    bonds = (sep == 1).astype(float)
    if params.periodic:
        bonds += (sep == L - 1)
    diag = params.U0 * (l == m) + params.U1 * bonds + eps[l] + eps[m]

    phase = np.exp(1j * params.theta)
    if params.theta == 0.0:
        H = -0.5 * params.J * (F + F.T) + sp.diags(diag)
    else:
        H = -0.5 * params.J * (phase * F + np.conj(phase) * F.T) + sp.diags(diag.astype(complex))
    H = sp.csr_matrix(H)
    H.sort_indices()

    pairs = np.column_stack([l, m])
    fam = np.minimum(_sep(l, m, params), 3)
    return LatticeOperator("full", params, profile, H, pairs, fam)


def _truncated(params: ModelParams, profile: PotentialProfile | None, ncomp: int) -> LatticeOperator:
    _check_support(params, profile)
    profile = profile or PotentialProfile.none()
    L, J = params.num_sites, params.J
    if params.periodic and L < 2 * ncomp - 1:
        raise ValueError(f"periodic {ncomp}-component model needs at least {2 * ncomp - 1} sites")
    eps = _eps(params, profile)
    idx = np.arange(L)

    def nxt(k):
        return (idx + k) % L if params.periodic else idx + k

    # slot layout per site: (..., split, onsite); gap goes first for ncomp=3
    onsite, split = ncomp - 1, ncomp - 2
    gap = 0 if ncomp == 3 else None
    valid = np.ones((L, ncomp), dtype=bool)
    partner = np.zeros((L, ncomp), dtype=int)
    partner[:, onsite] = idx
    partner[:, split] = nxt(1)
    if gap is not None:
        partner[:, gap] = nxt(2)
    if not params.periodic:
        valid &= partner < L
        partner = np.where(valid, partner, 0)

    diag = np.zeros((L, ncomp))
    diag[:, onsite] = params.U0 + 2 * eps
    e_next = eps[np.where(valid[:, split], partner[:, split], 0)]
    diag[:, split] = params.U1 + eps + e_next
    if gap is not None:
        diag[:, gap] = eps + eps[np.where(valid[:, gap], partner[:, gap], 0)]

    def slot(site, comp):
        return site * ncomp + comp

    rows, cols, vals = [], [], []

    def couple(a_site, a_comp, b_site, b_comp, amp, mask):
        rows.append(slot(a_site[mask], a_comp))
        cols.append(slot(b_site[mask], b_comp))
        vals.append(np.full(mask.sum(), amp))

    s_ok = valid[:, split]
    # split (l, l+1) <-> onsite l and onsite l+1
    couple(idx, split, idx, onsite, -J / math.sqrt(2), s_ok)
    couple(idx, split, partner[:, split], onsite, -J / math.sqrt(2), s_ok)
    if gap is not None:
        g_ok = valid[:, gap]
        # gap (l, l+2) <-> split (l, l+1) and split (l+1, l+2)
        couple(idx, gap, idx, split, -J / 2, g_ok)
        couple(idx, gap, partner[:, split], split, -J / 2, g_ok)

    n = L * ncomp
    r, c, v = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    off = sp.coo_matrix((v, (r, c)), shape=(n, n))
    H = (off + off.T + sp.diags(diag.ravel())).tocsr()

    keep = np.flatnonzero(valid.ravel())
    H = H[keep][:, keep].tocsr()
    H.sort_indices()
    site_of = np.repeat(idx, ncomp)[keep]
    part = partner.ravel()[keep]
    pairs = np.column_stack([np.minimum(site_of, part), np.maximum(site_of, part)])
    comp_sep = {onsite: 0, split: 1}
    if gap is not None:
        comp_sep[gap] = 2
    fam = np.array([comp_sep[k] for k in range(ncomp)])[np.tile(np.arange(ncomp), L)[keep]]
    model = "two-state" if ncomp == 2 else "three-state"
    return LatticeOperator(model, params, profile, H, pairs, fam)


def build_two_state_hamiltonian(params: ModelParams, profile: PotentialProfile | None = None) -> LatticeOperator:
    """Pair truncated to same-site and neighboring-site Fock states.

    Off-diagonal blocks carry -J/sqrt(2); the diagonal per site is
    ``(U1 + eps_l + eps_{l+1}, U0 + 2 eps_l)`` in slot order (split, onsite).
    The Peierls phase is ignored here.
    """
    return _truncated(params, profile, 2)


def build_three_state_hamiltonian(params: ModelParams, profile: PotentialProfile | None = None) -> LatticeOperator:
    """Two-state model plus the family with one empty site between the bosons.

    The extra family has diagonal ``eps_l + eps_{l+2}`` and couples to the
    split family by single-boson hops of amplitude -J/2.
    """
    return _truncated(params, profile, 3)


def build_one_state_hamiltonian(
    hoppings: EffectiveHoppings | Sequence[float],
    profile: PotentialProfile | None = None,
    params: ModelParams | None = None,
) -> LatticeOperator:
    """Point-particle pair: ``-(1/2) sum_m I_m (psi_{l+m} + psi_{l-m}) + 2 eps_l psi_l``.

    ``params`` only supplies the lattice geometry; the couplings enter
    through ``hoppings``.
    """
    if not isinstance(hoppings, EffectiveHoppings):
        hoppings = EffectiveHoppings(np.asarray(hoppings, dtype=float))
    params = params or ModelParams()
    _check_support(params, profile)
    profile = profile or PotentialProfile.none()
    L = params.num_sites
    idx = np.arange(L)
    I = hoppings.values
    H = sp.diags(2 * _eps(params, profile) - I[0])
    for m in range(1, I.size):
        if I[m] == 0:
            continue
        if params.periodic:
            src, dst = idx, (idx + m) % L
        else:
            src = idx[: max(L - m, 0)]
            dst = src + m
        hop = sp.coo_matrix((np.full(src.size, -0.5 * I[m]), (dst, src)), shape=(L, L))
        H = H + hop + hop.T
    H = sp.csr_matrix(H)
    H.sort_indices()
    pairs = np.column_stack([idx, idx])
    return LatticeOperator("one-state", params, profile, H, pairs, np.zeros(L, dtype=int), hoppings)


def build_model(
    model: str,
    params: ModelParams,
    profile: PotentialProfile | None = None,
    hoppings: EffectiveHoppings | Sequence[float] | None = None,
) -> LatticeOperator:
    if model == "full":
        return build_full_hamiltonian(params, profile)
    if model == "two-state":
        return build_two_state_hamiltonian(params, profile)
    if model == "three-state":
        return build_three_state_hamiltonian(params, profile)
    if model == "one-state":
        if hoppings is None:
            raise ValueError("one-state model needs hopping integrals")
        return build_one_state_hamiltonian(hoppings, profile, params)
    raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
