"""Acceptance checks, shared by ``pairtunnel verify`` and the test suite.

Every check returns a :class:`CheckResult`; tolerances are fixed here.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dynamics import UNCLASSIFIED_MAX, WavePacketSpec, run_scattering_experiment
from .model import ModelParams, PotentialProfile, build_full_hamiltonian, build_two_state_hamiltonian
from .scattering import scattering_range, solve_scattering, sweep_tunneling, transfer_steps
from .spectral import (
    band_structure_full,
    dispersion_exact,
    dispersion_two_state,
    hopping_integrals,
    one_state_hopping,
    wannier_states,
)

SIGMA = 0.65
KAPPA = math.pi / 2

# regression pins from the first derived runs
RESONANCE_V = -2.29
RESONANCE_PT = 0.9999191
FIG3_PINS = {"P_t": 0.0342760, "P_r": 0.5085677, "P_d": 0.4568902}
PIN_TOL = 1e-4


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d} {self.name} ({self.seconds:.2f} s)"

    def as_dict(self) -> dict:
        return {
            "number": self.number,
            "name": self.name,
            "passed": bool(self.passed),
            "seconds": round(self.seconds, 3),
            "details": self.details,
        }


def _timed(number, name, fn, runtime_limit=None):
    t0 = time.perf_counter()
    passed, details = fn()
    elapsed = time.perf_counter() - t0
    if runtime_limit is not None:
        details["runtime_limit_s"] = runtime_limit
        passed = passed and elapsed < runtime_limit
    return CheckResult(number, name, bool(passed), details, elapsed)


def check_two_state_closed_form(J: float = 1.0) -> CheckResult:
    def run():
        p = ModelParams(J=J, U0=-5, U1=-3, num_sites=64, boundary="periodic")
        w = np.linalg.eigvalsh(build_two_state_hamiltonian(p).H.toarray())
        k = 2 * np.pi * np.arange(64) / 64
        ref = np.sort(np.concatenate([dispersion_two_state(p, k, -1), dispersion_two_state(p, k, +1)]))
        err = float(np.max(np.abs(w - ref)))
        return err <= 1e-12, {"max_abs_error": err, "tolerance": 1e-12}

    return _timed(1, "two-state spectrum equals closed-form bands", run, 1.0)


def check_exact_band(J: float = 1.0) -> CheckResult:
    def run():
        p = ModelParams(J=J, U0=-2, U1=0, num_sites=11, boundary="periodic")
        w = np.linalg.eigvalsh(build_full_hamiltonian(p).H.toarray())[:11]
        k = 2 * np.pi * np.arange(11) / 11
        ref = np.sort(dispersion_exact(p, k))
        err = float(np.max(np.abs(w - ref)))
        return err <= 1e-2, {"max_abs_error": err, "tolerance": 1e-2}

    return _timed(2, "exact bound-pair band on 11 sites", run, 1.0)


def check_wannier(J: float = 1.0) -> CheckResult:
    def run():
        W = wannier_states(ModelParams(J=J, U0=-4, U1=0))
        onsite = float(W.at(0)[1])
        left, right = float(W.at(-1)[0]), float(W.at(0)[0])
        errs = [abs(onsite - 0.975), abs(left - 0.157), abs(right - 0.157)]
        return max(errs) <= 5e-3, {"onsite": onsite, "neighbors": [left, right], "tolerance": 5e-3}

    return _timed(3, "Wannier amplitudes 0.975 / 0.157", run, 1.0)


def check_bandwidth() -> CheckResult:
    def run():
        p = ModelParams(J=1, U0=-4, U1=-2)
        E = dispersion_two_state(p, np.array([0.0, math.pi]), -1)
        width = float(E[1] - E[0])
        I1 = float(hopping_integrals(p).values[1])
        ok = abs(width - (math.sqrt(3) - 1)) <= 1e-4 and abs(I1 - 0.36603) <= 0.15 * 0.36603
        return ok, {"bandwidth": width, "I_1": I1}

    return _timed(4, "lower-band width and dominant I_1 at Delta=2", run)


def det2(T: np.ndarray) -> float:
    """Cofactor determinant of a 2x2 step; LU cancels badly when |T| is large."""
    return float(T[0, 0] * T[1, 1] - T[0, 1] * T[1, 0])


def check_transfer_sanity() -> CheckResult:
    def run():
        p = ModelParams(J=1, U0=-4, U1=-2)
        I = one_state_hopping(p)
        V = np.linspace(-4, 4, 100)
        g = PotentialProfile.gaussian(1, SIGMA)
        det_err, flux, pt0 = {}, {}, {}
        for model in ("one-state", "two-state", "three-state"):
            E = solve_scattering(model, p, g, KAPPA, I if model == "one-state" else None).energy
            worst = 0.0
            for v in V:
                prof = g.with_amplitude(v)
                lo, hi = scattering_range(prof)
                for step in transfer_steps(model, p, prof, E, lo, hi, I):
                    T = step.matrix
                    if model == "three-state":
                        worst = max(worst, abs(np.linalg.det(T)) / max(1.0, np.linalg.norm(T, 2)) ** 3)
                    else:
                        worst = max(worst, abs(det2(T) - 1))
            det_err[model] = worst
            tab = sweep_tunneling(model, p, g, [KAPPA], V, hopping=I if model == "one-state" else None)
            good = np.array([f is None for f in tab.flags[0]])
            flux[model] = float(np.max(np.abs(tab.P_t[0][good] + tab.P_r[0][good] - 1)))
            pt0[model] = solve_scattering(model, p, g.with_amplitude(0.0), KAPPA).P_t
        ok = (
            det_err["one-state"] <= 1e-14
            and det_err["two-state"] <= 1e-14
            and det_err["three-state"] <= 1e-12
            and max(flux.values()) <= 1e-10
            and all(abs(v - 1) <= 1e-10 for v in pt0.values())
        )
        return ok, {"det_error": det_err, "flux_error": flux, "P_t_at_V0": pt0}

    return _timed(5, "transfer-matrix determinants and flux conservation", run)


def check_barrier_well_symmetry() -> CheckResult:
    def run():
        p = ModelParams(J=1, U0=-4, U1=-2)
        I = one_state_hopping(p)
        V = np.linspace(0, 3, 61)
        g = PotentialProfile.gaussian(1, SIGMA)
        plus = sweep_tunneling("one-state", p, g, [KAPPA], V, hopping=I).P_t[0]
        minus = sweep_tunneling("one-state", p, g, [KAPPA], -V, hopping=I).P_t[0]
        err = float(np.max(np.abs(plus - minus)))
        return err <= 1e-10, {"max_asymmetry": err, "tolerance": 1e-10}

    return _timed(6, "one-state P_t(V) = P_t(-V) at kappa=pi/2", run)


def check_stationary_dynamic() -> CheckResult:
    def run():
        p = ModelParams(J=1, U0=-4, U1=-2, num_sites=201)
        diffs = {}
        for model in ("one-state", "two-state"):
            for V in (-2.0, -1.0, 0.5, 1.0):
                g = PotentialProfile.gaussian(V, SIGMA)
                dyn = run_scattering_experiment(model, p, g, WavePacketSpec(KAPPA), sample_every=5.0).outcome.P_t
                tm = solve_scattering(model, p, g, KAPPA).P_t
                diffs[f"{model} V={V:g}"] = abs(dyn - tm)
        worst = max(diffs.values())
        return worst <= 0.02, {"abs_differences": diffs, "tolerance": 0.02}

    return _timed(7, "wave-packet P_t matches transfer matrices", run, 120.0)


def check_resonance() -> CheckResult:
    def run():
        p = ModelParams(J=1, U0=-4, U1=-2)
        g = PotentialProfile.gaussian(1, SIGMA)
        V = np.round(np.arange(-3.99, -1.0 + 1e-9, 0.01), 2)
        two = sweep_tunneling("two-state", p, g, [KAPPA], V).P_t[0]
        one = sweep_tunneling("one-state", p, g, [KAPPA], V).P_t[0]
        three = sweep_tunneling("three-state", p, g, [KAPPA], V).P_t[0]
        peaks = [
            i for i in range(1, V.size - 1) if two[i] > two[i - 1] and two[i] > two[i + 1] and two[i] > one[i]
        ]
        if not peaks:
            return False, {"peaks": []}
        i = max(peaks, key=lambda j: two[j])
        ok = (
            three[i] < two[i]
            and abs(V[i] - RESONANCE_V) <= 0.01 + 1e-9
            and abs(two[i] - RESONANCE_PT) <= PIN_TOL
        )
        return ok, {
            "peak_V": float(V[i]),
            "P_t_two": float(two[i]),
            "P_t_one": float(one[i]),
            "P_t_three": float(three[i]),
            "all_peaks_V": [float(V[j]) for j in peaks],
        }

    return _timed(8, "two-state resonance above one-state, suppressed in three-state", run)


def check_full_sum_rules() -> CheckResult:
    def run():
        p = ModelParams(J=1, U0=-2, U1=0, num_sites=201)
        res = run_scattering_experiment("full", p, PotentialProfile.gaussian(-2, SIGMA), WavePacketSpec(KAPPA), strict=False)
        o, traj = res.outcome, res.trajectory
        t_final = abs(traj.times[-1])
        norm_rate = float(np.max(np.abs(traj.norms - 1)) / t_final)
        total = o.P_t + o.P_r + o.P_d + o.unclassified
        pins = {k: abs(getattr(o, k) - v) for k, v in FIG3_PINS.items()}
        ok = (
            norm_rate <= 1e-8
            and traj.energy_drift <= 1e-8
            and abs(total - 1) <= 1e-12
            and o.unclassified <= UNCLASSIFIED_MAX
            and o.P_d > 1e-2
            and max(pins.values()) <= PIN_TOL
        )
        return ok, {
            **o.as_dict(),
            "norm_drift_per_time": norm_rate,
            "energy_drift": traj.energy_drift,
            "sum_minus_one": total - 1,
            "pin_deviation": pins,
        }

    return _timed(9, "full-model sum rules for the dissociating configuration", run, 180.0)


def local_peak(values: np.ndarray) -> int | None:
    """Index of the highest interior strict local maximum."""
    idx = [i for i in range(1, values.size - 1) if values[i] > values[i - 1] and values[i] > values[i + 1]]
    return max(idx, key=lambda i: values[i]) if idx else None


def resolved_dips(values: np.ndarray, floor: float = UNCLASSIFIED_MAX) -> list[int]:
    """Interior local minima deeper than ``floor`` on both sides."""
    return [
        i
        for i in range(1, values.size - 1)
        if values[i - 1] - values[i] > floor and values[i + 1] - values[i] > floor
    ]


def dissociation_scan(U0: float, U1: float, V_grid, threads: int = 1):
    p = ModelParams(J=1, U0=U0, U1=U1, num_sites=201)

    def one(V):
        o = run_scattering_experiment(
            "full", p, PotentialProfile.gaussian(V, SIGMA), WavePacketSpec(KAPPA), sample_every=5.0, strict=False
        ).outcome
        return o.P_t, o.P_d

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as pool:
            out = list(pool.map(one, V_grid))
    else:
        out = [one(V) for V in V_grid]
    P_t, P_d = map(np.array, zip(*out))
    return P_t, P_d


def check_dissociation_dip(U0: float = -4.0, U1: float = -2.0, step: float = 0.1) -> CheckResult:
    def run():
        V = np.round(np.arange(-4.0, -1.0 + 1e-9, step), 3)
        P_t, P_d = dissociation_scan(U0, U1, V)
        peak = local_peak(P_t)
        dips = resolved_dips(P_d)
        near = [i for i in dips if peak is not None and abs(i - peak) <= 1]
        return bool(near), {
            "U0": U0,
            "U1": U1,
            "P_t_peak_V": None if peak is None else float(V[peak]),
            "P_d_dips_V": [float(V[i]) for i in dips],
            "max_P_d_within_one_step_of_peak": None
            if peak is None
            else float(np.max(P_d[max(peak - 1, 0) : peak + 2])),
            "dip_floor": UNCLASSIFIED_MAX,
        }

    return _timed(10, "dissociation dip at the full-model resonance", run)


def check_fig7_traces() -> CheckResult:
    def run():
        p = ModelParams(J=1, U0=-4, U1=-2, num_sites=201)
        g = PotentialProfile.gaussian(-2.2, SIGMA)
        full = run_scattering_experiment("full", p, g, WavePacketSpec(KAPPA), strict=False)
        t_final = full.metadata["t_final"]
        three = run_scattering_experiment("three-state", p, g, WavePacketSpec(KAPPA), t_final=t_final, strict=False)
        a, b = three.traces, full.traces
        dev = {
            name: float(np.max(np.abs(getattr(a, name) - getattr(b, name))))
            for name in ("same_site", "neighbor", "separated")
        }
        gap_max = float(np.max(a.gap))
        ok = max(dev.values()) <= 0.05 and gap_max < 0.05
        return ok, {"max_deviation": dev, "three_state_gap_max": gap_max, "tolerance": 0.05}

    return _timed(11, "three-state family traces follow the full model", run)


def check_gauge_invariance() -> CheckResult:
    def run():
        p = ModelParams(J=1, U0=-2, U1=0, num_sites=11, boundary="periodic")
        thetas = np.linspace(0, 2 * np.pi / 11, 5)
        a = band_structure_full(p, thetas)
        b = band_structure_full(p, thetas + 2 * np.pi / 11)
        err = float(np.max(np.abs(a - b)))
        return err <= 1e-10, {"max_abs_difference": err, "tolerance": 1e-10}

    return _timed(12, "flux-quantum gauge invariance of the full spectrum", run)


CHECKS = {
    1: check_two_state_closed_form,
    2: check_exact_band,
    3: check_wannier,
    4: check_bandwidth,
    5: check_transfer_sanity,
    6: check_barrier_well_symmetry,
    7: check_stationary_dynamic,
    8: check_resonance,
    9: check_full_sum_rules,
    10: check_dissociation_dip,
    11: check_fig7_traces,
    12: check_gauge_invariance,
}


def run_all(only=None) -> list[CheckResult]:
    numbers = sorted(only) if only else sorted(CHECKS)
    return [CHECKS[n]() for n in numbers]
