"""Wave-packet dynamics of the pair and classification of scattering outcomes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import jv

from .model import (
    EffectiveHoppings,
    LatticeOperator,
    ModelParams,
    PotentialProfile,
    build_model,
)
from .spectral import group_velocity, lower_band, one_state_hopping, pair_bound_state

NORM_DRIFT_PER_TIME = 1e-8
UNCLASSIFIED_MAX = 1e-3
CHEB_TOL = 1e-15


class PropagationError(RuntimeError):
    """Norm drift exceeded the integrator budget."""


class RejectedRun(RuntimeError):
    """Outcome classification left too much probability unclassified."""

    def __init__(self, message, outcome=None):
        super().__init__(message)
        self.outcome = outcome


@dataclass(frozen=True)
class WavePacketSpec:
    """Incoming packet: Gaussian envelope ``exp(-(x - center)**2 / (2 width**2))``.

    ``width`` is the amplitude width in sites; the quasimomentum width is
    ``1 / width``.
    """

    kappa0: float = math.pi / 2
    center: float = -60.0
    width: float = 10.0
    construction: str = "bloch-superposition"

    def __post_init__(self):
        if self.width < 5:
            raise ValueError("packet width must be at least 5 sites")
        if self.construction not in ("bloch-superposition", "spatial-gaussian"):
            raise ValueError(f"unknown packet construction {self.construction!r}")

    @property
    def sigma_kappa(self) -> float:
        return 1.0 / self.width


def check_packet_margins(params: ModelParams, profile: PotentialProfile, spec: WavePacketSpec):
    sites = params.sites()
    margin = 4 * spec.width
    if spec.center - margin < sites[0] or spec.center + margin > sites[-1]:
        raise ValueError(
            f"packet at {spec.center} +- {margin:g} does not fit lattice [{sites[0]}, {sites[-1]}]"
        )
    if not profile.is_zero:
        lo, hi = profile.support
        if spec.center + margin > lo and spec.center - margin < hi:
            raise ValueError("packet overlaps the potential support")


def _kappa_samples(spec: WavePacketSpec, span: int):
    # grid fine enough that periodic images lie beyond the lattice
    dk = 2 * math.pi / (4 * span)
    half = 8 * spec.sigma_kappa
    n = int(math.ceil(2 * half / dk)) + 1
    k = spec.kappa0 + np.linspace(-half, half, n)
    w = np.exp(-((k - spec.kappa0) ** 2) / (2 * spec.sigma_kappa**2) - 1j * k * spec.center)
    return k, w


def make_packet(op: LatticeOperator, spec: WavePacketSpec) -> np.ndarray:
    """Normalized lower-band packet on the model's basis.

    The one-state packet (and any ``spatial-gaussian`` packet) is a Gaussian
    times a plane wave in the pair coordinate.  Otherwise the packet is a
    Gaussian-weighted superposition of clean lower-band eigenstates: Bloch
    vectors for the truncated models and exact bound-pair states for the
    full model.
    """
    check_packet_margins(op.params, op.profile, spec)
    params = op.params
    sites = params.sites()
    l_idx, m_idx = op.pairs[:, 0], op.pairs[:, 1]
    if op.model == "one-state" or spec.construction == "spatial-gaussian":
        x = op.positions()
        psi = np.exp(-((x - spec.center) ** 2) / (2 * spec.width**2) + 1j * spec.kappa0 * x)
        if op.model not in ("one-state",):
            # keep only the bound-pair families for truncated/full models
            psi = np.where(op.family == 0, psi, 0)
        return psi / np.linalg.norm(psi)

    k, w = _kappa_samples(spec, params.num_sites)
    if op.model in ("two-state", "three-state"):
        _, C = lower_band(params, k, op.model)
        ncomp = C.shape[1]
        # slot component from family: onsite is the last slot, gap the first
        comp = ncomp - 1 - op.family
        x = sites[l_idx].astype(float)
        psi = np.einsum("k,sk,ks->s", w, np.exp(1j * np.outer(x, k)), C[:, comp])
    elif op.model == "full":
        r = m_idx - l_idx
        if params.periodic:
            raise ValueError("full-model packets are built on open lattices")
        _, f = pair_bound_state(params, k, r_max=params.num_sites - 1)
        X = 0.5 * (sites[l_idx] + sites[m_idx])
        psi = np.zeros(op.dim, dtype=complex)
        near = np.flatnonzero(np.max(np.abs(f), axis=0) > 1e-16)
        for rr in near:
            sel = r == rr
            psi[sel] = np.exp(1j * np.outer(X[sel], k)) @ (w * f[:, rr])
    else:
        raise ValueError(f"unknown model {op.model!r}")
    return psi / np.linalg.norm(psi)


def spectral_bounds(H: sp.spmatrix) -> tuple[float, float]:
    """Gershgorin enclosure of the spectrum of a Hermitian matrix."""
    H = sp.csr_matrix(H)
    d = H.diagonal().real
    radius = np.asarray(abs(H).sum(axis=1)).ravel() - np.abs(d)
    return float(np.min(d - radius)), float(np.max(d + radius))


class ChebyshevPropagator:
    """Applies ``exp(-i H dt)`` by a Chebyshev series with Bessel coefficients."""

    def __init__(self, H: sp.spmatrix, bounds: tuple[float, float] | None = None):
        self.H = sp.csr_matrix(H)
        lo, hi = bounds or spectral_bounds(self.H)
        pad = 1e-3 * max(hi - lo, 1.0)
        self.center = 0.5 * (hi + lo)
        self.half_width = 0.5 * (hi - lo) + pad
        self._coeffs = {}

    def _coefficients(self, dt: float) -> np.ndarray:
        if dt not in self._coeffs:
            x = self.half_width * abs(dt)
            n = int(x + 10 * x ** (1 / 3) + 30)
            c = jv(np.arange(n), x)
            while abs(c[-1]) > CHEB_TOL or abs(c[-2]) > CHEB_TOL:
                n = int(1.5 * n)
                c = jv(np.arange(n), x)
            last = np.flatnonzero(np.abs(c) > CHEB_TOL)[-1] + 2
            c = c[:last] * 2.0
            c[0] *= 0.5
            self._coeffs[dt] = c
        return self._coeffs[dt]

    def step(self, psi: np.ndarray, dt: float) -> np.ndarray:
        c = self._coefficients(dt)
        sign = 1.0 if dt >= 0 else -1.0
        a, b = self.center, self.half_width

        def Hn(v):
            return (self.H @ v - a * v) / b

        # T_k(Hn) psi with factors (-i sign)^k
        phase = -1j * sign
        t0 = psi
        t1 = Hn(psi)
        out = c[0] * t0 + c[1] * phase * t1
        pk = phase
        for k in range(2, c.size):
            t0, t1 = t1, 2 * Hn(t1) - t0
            pk *= phase
            out += c[k] * pk * t1
        return out * np.exp(-1j * a * dt)


@dataclass
class Trajectory:
    times: np.ndarray
    norms: np.ndarray
    energies: np.ndarray
    states: np.ndarray | None = None
    observations: list = field(default_factory=list)
    final: np.ndarray | None = None

    @property
    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.norms - self.norms[0])))

    @property
    def energy_drift(self) -> float:
        e0 = self.energies[0]
        return float(np.max(np.abs(self.energies - e0)) / max(abs(e0), 1e-300))


def propagate(
    H: sp.spmatrix,
    state: np.ndarray,
    t_final: float,
    sample_every: float = 1.0,
    observer=None,
    keep_states: bool = False,
    drift_budget: float = NORM_DRIFT_PER_TIME,
) -> Trajectory:
    """Solve ``i d/dt psi = H psi`` from 0 to ``t_final`` (may be negative).

    Samples are taken every ``sample_every`` time units and at ``t_final``;
    ``observer(t, psi)`` results are collected in ``observations``.
    """
    psi = np.asarray(state, dtype=complex).copy()
    n0 = np.linalg.norm(psi)
    if abs(n0 - 1) > 1e-10:
        raise ValueError(f"initial state is not normalized (norm {n0})")
    prop = ChebyshevPropagator(H)
    sign = 1.0 if t_final >= 0 else -1.0
    total = abs(t_final)
    n_full = int(math.floor(total / sample_every + 1e-12))
    steps = [sample_every] * n_full
    rest = total - n_full * sample_every
    if rest > 1e-12:
        steps.append(rest)

    times, norms, energies, states, obs = [0.0], [1.0], [float(np.vdot(psi, H @ psi).real)], [], []
    if keep_states:
        states.append(psi.copy())
    if observer is not None:
        obs.append(observer(0.0, psi))
    t = 0.0
    for dt in steps:
        psi = prop.step(psi, sign * dt)
        t += sign * dt
        nrm = np.linalg.norm(psi)
        if abs(nrm - 1) > drift_budget * max(abs(t), 1.0):
            raise PropagationError(f"norm drift {abs(nrm - 1):.2e} at t = {t:g}")
        times.append(t)
        norms.append(nrm)
        energies.append(float(np.vdot(psi, H @ psi).real))
        if keep_states:
            states.append(psi.copy())
        if observer is not None:
            obs.append(observer(t, psi))
    return Trajectory(
        np.array(times),
        np.array(norms),
        np.array(energies),
        np.array(states) if keep_states else None,
        obs,
        psi,
    )


@dataclass(frozen=True)
class OccupationTraces:
    """Probability per Fock family over time.

    ``gap`` is one empty site between the bosons, ``far`` more than one (full
    model only).
    """

    times: np.ndarray
    same_site: np.ndarray
    neighbor: np.ndarray
    gap: np.ndarray
    far: np.ndarray

    @property
    def separated(self) -> np.ndarray:
        return self.gap + self.far

    def total(self) -> np.ndarray:
        return self.same_site + self.neighbor + self.gap + self.far


def family_weights(op: LatticeOperator, psi: np.ndarray) -> np.ndarray:
    return np.bincount(op.family, weights=np.abs(psi) ** 2, minlength=4)


def occupation_families(op: LatticeOperator, trajectory: Trajectory) -> OccupationTraces:
    """Family sums for stored states or for observations made with ``family_weights``."""
    if trajectory.states is not None:
        w = np.array([family_weights(op, s) for s in trajectory.states])
    else:
        w = np.array(trajectory.observations)
    return OccupationTraces(trajectory.times, w[:, 0], w[:, 1], w[:, 2], w[:, 3])


@dataclass(frozen=True)
class OutcomeProbs:
    P_t: float
    P_r: float
    P_d: float
    unclassified: float
    region: dict

    def as_dict(self) -> dict:
        return {"P_t": self.P_t, "P_r": self.P_r, "P_d": self.P_d, "unclassified": self.unclassified}


def default_bound_cutoff(params: ModelParams, kappa: float, tail: float = 1e-6, minimum: int = 2) -> int:
    """Smallest separation beyond which the clean bound pair has weight < ``tail``."""
    _, f = pair_bound_state(params, kappa, r_max=max(params.num_sites - 1, 60))
    w = np.abs(f[0]) ** 2
    beyond = np.cumsum(w[::-1])[::-1]
    d = int(np.flatnonzero(beyond < tail)[0]) - 1
    return max(d, minimum)


def classify_outcomes(
    op: LatticeOperator,
    psi: np.ndarray,
    d_bound: int = 2,
    window: tuple[int, int] | None = None,
    strict: bool = True,
) -> OutcomeProbs:
    """Partition final-state probability into transmitted/reflected/dissociated.

    Full model: pairs with ``|l - m| <= d_bound`` are bound; bound mass is
    transmitted when both bosons are right of the barrier window and
    reflected when both are left of it.  Unbound mass counts as dissociated
    when one boson is inside the window and the other outside, or when both
    are outside.  Everything else is unclassified.  Truncated models sort by
    the pair center of mass.
    """
    lo, hi = window or op.profile.window()
    prob = np.abs(psi) ** 2
    sites = op.params.sites()
    if op.model == "full":
        xl = sites[op.pairs[:, 0]]
        xm = sites[op.pairs[:, 1]]
        bound = (xm - xl) <= d_bound
        inside_l = (xl >= lo) & (xl <= hi)
        inside_m = (xm >= lo) & (xm <= hi)
        trans = bound & (xl > hi)
        refl = bound & (xm < lo)
        diss = ~bound & ((inside_l ^ inside_m) | (~inside_l & ~inside_m))
    else:
        x = op.positions()
        trans = x > hi
        refl = x < lo
        diss = np.zeros(prob.size, dtype=bool)
    P_t, P_r, P_d = prob[trans].sum(), prob[refl].sum(), prob[diss].sum()
    rest = prob[~(trans | refl | diss)].sum()
    out = OutcomeProbs(
        float(P_t),
        float(P_r),
        float(P_d),
        float(rest),
        {"window": [int(lo), int(hi)], "d_bound": int(d_bound) if op.model == "full" else None},
    )
    if strict and out.unclassified > UNCLASSIFIED_MAX:
        raise RejectedRun(f"unclassified probability {out.unclassified:.2e} exceeds {UNCLASSIFIED_MAX}", out)
    return out


def transit_time(params: ModelParams, profile: PotentialProfile, spec: WavePacketSpec, model: str, hoppings=None) -> float:
    """About twice the time the packet center needs to reach the barrier."""
    band = {"full": "full", "two-state": "two-state", "three-state": "three-state", "one-state": "one-state"}[model]
    v = abs(group_velocity(params, spec.kappa0, band, hoppings))
    sigma = profile.sigma if profile.shape == "gaussian" else 0.5 * (profile.support[1] - profile.support[0])
    distance = abs(profile.center - spec.center) - 3 * sigma
    return 2 * distance / v


@dataclass
class ExperimentResult:
    outcome: OutcomeProbs
    traces: OccupationTraces
    trajectory: Trajectory
    operator: LatticeOperator
    metadata: dict


def run_scattering_experiment(
    model: str,
    params: ModelParams,
    profile: PotentialProfile,
    spec: WavePacketSpec | None = None,
    hoppings: EffectiveHoppings | None = None,
    t_final: float | None = None,
    sample_every: float = 1.0,
    d_bound: int | None = None,
    strict: bool = True,
) -> ExperimentResult:
    """Packet -> propagation -> classification for one model and potential."""
    spec = spec or WavePacketSpec()
    if model == "one-state" and hoppings is None:
        hoppings = EffectiveHoppings.nearest(one_state_hopping(params))
    op = build_model(model, params, profile, hoppings)
    psi0 = make_packet(op, spec)
    if t_final is None:
        t_final = transit_time(params, profile, spec, model, hoppings)
    if d_bound is None:
        d_bound = default_bound_cutoff(params, spec.kappa0) if model == "full" else 0

    traj = propagate(op.H, psi0, t_final, sample_every, observer=lambda t, v: family_weights(op, v))
    traces = occupation_families(op, traj)
    outcome = classify_outcomes(op, traj.final, d_bound=d_bound, strict=strict)
    meta = {
        "model": model,
        "kappa0": spec.kappa0,
        "packet_center": spec.center,
        "packet_width": spec.width,
        "num_sites": params.num_sites,
        "t_final": t_final,
        "d_bound": d_bound,
        "norm_drift": traj.norm_drift,
        "energy_drift": traj.energy_drift,
    }
    if hoppings is not None:
        meta["hoppings"] = hoppings.values.tolist()
    return ExperimentResult(outcome, traces, traj, op, meta)
