"""``pairtunnel`` command-line interface.

Exit codes: 0 success, 1 physics or acceptance failure, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import PRESETS, ConfigError, RunConfig, build_config, load_config
from .dynamics import PropagationError, RejectedRun, run_scattering_experiment
from .spectral import band_structure_full, dispersion_exact, dispersion_two_state

EXIT_OK, EXIT_PHYSICS, EXIT_USAGE = 0, 1, 2


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.12g" % x
    return str(x)


def _clean(x):
    """JSON-ready copy with floats rounded to 12 significant digits."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (float, np.floating)):
        return float("%.12g" % x)
    if isinstance(x, np.integer):
        return int(x)
    return x


class Table:
    def __init__(self, name: str, columns: list[str]):
        self.name = name
        self.columns = columns
        self.rows: list[list] = []

    def add(self, *row):
        assert len(row) == len(self.columns)
        self.rows.append(list(row))

    def csv(self, cfg: RunConfig) -> str:
        buf = io.StringIO()
        buf.write(f"# config-sha256: {cfg.sha256()}\n")
        buf.write(f"# pairtunnel {__version__} {cfg.command} {self.name}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(fmt(v) for v in row) + "\n")
        return buf.getvalue()

    def records(self) -> list[dict]:
        return [_clean(dict(zip(self.columns, r))) for r in self.rows]


def write_outputs(cfg: RunConfig, tables: list[Table], summary: dict | None = None, stdout=None):
    """Main table to ``cfg.out`` (or stdout); extra tables beside it."""
    stdout = stdout or sys.stdout
    if cfg.format == "json":
        doc = {
            "software_version": __version__,
            "config_sha256": cfg.sha256(),
            "config": cfg.to_dict(),
            "tables": {t.name: t.records() for t in tables},
        }
        if summary is not None:
            doc["summary"] = _clean(summary)
        text = json.dumps(doc, indent=1) + "\n"
        if cfg.out:
            Path(cfg.out).write_text(text)
        else:
            stdout.write(text)
        return
    main, extra = tables[0], tables[1:]
    if cfg.out:
        out = Path(cfg.out)
        out.write_text(main.csv(cfg))
        for t in extra:
            out.with_name(f"{out.stem}_{t.name}{out.suffix or '.csv'}").write_text(t.csv(cfg))
    else:
        for t in tables:
            stdout.write(t.csv(cfg))


def _slug(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-." else "_" for c in label) or "run"


def cmd_bands(cfg: RunConfig) -> tuple[list[Table], dict]:
    if not cfg.theta_grid:
        raise ConfigError("bands needs a non-empty theta_grid")
    num = Table("bands", ["label", "J", "U0", "U1", "num_sites", "theta", "eigenvalue_index", "E"])
    ana = Table("analytic", ["label", "J", "U0", "U1", "curve", "kappa", "E_analytic"])
    kappa = np.asarray(cfg.kappa or np.linspace(-np.pi, np.pi, 201))
    for run in cfg.runs():
        p = run.model_params(11, "periodic")
        spec = band_structure_full(p, np.asarray(run.theta_grid))
        for i, th in enumerate(run.theta_grid):
            for n, E in enumerate(spec[i]):
                num.add(run.label, p.J, p.U0, p.U1, p.num_sites, th, n, E)
        curves = {
            "exact-bound": dispersion_exact(p, kappa),
            "two-state-lower": dispersion_two_state(p, kappa, -1),
            "two-state-upper": dispersion_two_state(p, kappa, +1),
        }
        for name, E in curves.items():
            for k, e in zip(kappa, E):
                ana.add(run.label, p.J, p.U0, p.U1, name, k, e)
    return [num, ana], {"rows": len(num.rows)}


def cmd_scatter(cfg: RunConfig, threads: int = 1) -> tuple[list[Table], dict]:
    from .scattering import sweep_tunneling

    table = Table(
        "scatter",
        ["label", "method", "model", "J", "U0", "U1", "shape", "sigma", "hopping", "kappa", "V", "P_t", "P_r", "flag"],
    )
    flagged = 0
    for run in cfg.runs():
        if not run.kappa or not (run.V_grid or run.V is not None):
            raise ConfigError("scatter needs kappa and V grids")
        p = run.model_params(201, "open")
        V = run.V_grid or (run.V,)
        for model in run.models:
            if model == "full":
                raise ConfigError("transfer matrices exist only for one-, two- and three-state models")
            tab = sweep_tunneling(model, p, run.profile(), run.kappa, V, hopping=run.hopping, threads=threads)
            for m, k, v, pt, pr, flag in tab.rows():
                flagged += flag is not None
                hop = run.hopping if model == "one-state" else None
                if model == "one-state" and hop is None:
                    from .spectral import one_state_hopping

                    hop = one_state_hopping(p)
                table.add(run.label, "tm", m, p.J, p.U0, p.U1, run.shape, run.sigma, hop, k, v, pt, pr, flag or "")
    total = len(table.rows)
    if total and flagged == total:
        raise PropagationError("every sweep point was flagged")
    return [table], {"rows": total, "flagged": flagged}


def _one_packet(run: RunConfig, model: str, V: float):
    p = run.model_params(201, "open")
    hop = None
    if model == "one-state" and run.hopping is not None:
        from .model import EffectiveHoppings

        hop = EffectiveHoppings.nearest(run.hopping)
    return run_scattering_experiment(
        model,
        p,
        run.profile(V),
        run.packet(),
        hoppings=hop,
        t_final=run.t_final,
        sample_every=run.sample_every,
        d_bound=run.d_bound,
    )


def cmd_wavepacket(cfg: RunConfig, threads: int = 1) -> tuple[list[Table], dict]:
    cols = [
        "label", "method", "model", "J", "U0", "U1", "shape", "V", "sigma", "kappa0", "packet_center",
        "packet_width", "num_sites", "t_final", "d_bound", "P_t", "P_r", "P_d", "unclassified",
        "norm_drift", "energy_drift",
    ]
    table = Table("wavepacket", cols)
    extra: list[Table] = []
    jobs = []
    for run in cfg.runs():
        for model in run.models:
            for V in run.V_grid or (run.V,):
                jobs.append((run, model, V))

    def work(job):
        run, model, V = job
        return _one_packet(run, model, V)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]

    for (run, model, V), res in zip(jobs, results):
        o, md, p = res.outcome, res.metadata, res.operator.params
        table.add(
            run.label, "dynamics", model, p.J, p.U0, p.U1, run.shape, V, run.sigma, run.kappa0,
            run.packet_center, run.packet_width, p.num_sites, md["t_final"], md["d_bound"],
            o.P_t, o.P_r, o.P_d, o.unclassified, md["norm_drift"], md["energy_drift"],
        )
        tag = _slug(f"{run.label or model}" + (f"_V{V:g}" if len(run.V_grid) > 1 else ""))
        if run.traces:
            tr = Table(f"traces_{tag}", ["t", "fam1", "fam2", "fam3", "far"])
            t = res.traces
            for row in zip(t.times, t.same_site, t.neighbor, t.gap, t.far):
                tr.add(*row)
            extra.append(tr)
        if run.snapshot:
            snap = Table(f"snapshot_{tag}", ["l", "m", "probability"])
            prob = np.abs(res.trajectory.final) ** 2
            sites = p.sites()
            for (i, j), w in zip(res.operator.pairs, prob):
                if res.operator.model == "one-state":
                    snap.add(int(sites[i]), int(sites[i]), w)
                else:
                    snap.add(int(sites[i]), int(sites[j]), w)
            extra.append(snap)
    return [table] + extra, {"runs": len(jobs)}


def cmd_verify(cfg: RunConfig, stdout=None) -> tuple[list[Table], dict, bool]:
    from .acceptance import run_all

    stdout = stdout or sys.stdout
    results = run_all(cfg.checks or None)
    table = Table("verify", ["number", "name", "passed", "seconds"])
    for r in results:
        stdout.write(r.line() + "\n")
        stdout.flush()
        table.add(r.number, r.name, r.passed, r.seconds)
    ok = all(r.passed for r in results)
    summary = {"all_passed": ok, "checks": [r.as_dict() for r in results]}
    stdout.write(json.dumps(_clean(summary), default=str) + "\n")
    return [table], summary, ok


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pairtunnel", description="Bound-pair tunneling in the Bose-Hubbard model.")
    ap.add_argument("--version", action="version", version=f"pairtunnel {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("bands", "full-model spectrum under Peierls flux, with analytic bands"),
        ("scatter", "transfer-matrix tunneling sweeps"),
        ("wavepacket", "wave-packet scattering runs"),
        ("verify", "run the acceptance checks"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--preset", choices=sorted(PRESETS), help="figure preset")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--threads", type=int, default=1)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        file_data = load_config(args.config) if args.config else None
        cfg = build_config(args.command, args.preset, file_data, out=args.out, format=args.format)
        if args.command in ("bands", "scatter", "wavepacket") and not (args.config or args.preset):
            raise ConfigError(f"`{args.command}` needs --config or --preset")
        if args.command == "bands":
            tables, summary = cmd_bands(cfg)
        elif args.command == "scatter":
            tables, summary = cmd_scatter(cfg, args.threads)
        elif args.command == "wavepacket":
            tables, summary = cmd_wavepacket(cfg, args.threads)
        else:
            tables, summary, ok = cmd_verify(cfg)
            if cfg.out:
                write_outputs(cfg, tables, summary)
            return EXIT_OK if ok else EXIT_PHYSICS
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RejectedRun as exc:
        print(f"rejected run: {exc}\n{json.dumps(_clean(exc.outcome.as_dict()))}", file=sys.stderr)
        return EXIT_PHYSICS
    except (PropagationError, ArithmeticError) as exc:
        print(f"physics failure: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    write_outputs(cfg, tables, summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
