"""Command-line front end: ``corrocrack run | campaign | fit | mesh``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 I/O failure.  ``CORROCRACK_THREADS`` caps the number of worker processes
of a campaign and the BLAS/OpenMP threads inside each worker.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from .errors import ConfigError, CorroCrackError, FitError, OutputError

log = logging.getLogger("corrocrack")

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _prepare_out(out: Path, force: bool) -> Path:
    try:
        if out.exists() and not out.is_dir():
            raise OutputError(f"{out} exists and is not a directory")
        if out.exists() and any(out.iterdir()) and not force:
            raise OutputError(f"{out} is not empty; use --force to overwrite")
        out.mkdir(parents=True, exist_ok=True)
    except OutputError:
        raise
    except OSError as exc:
        raise OutputError(f"cannot create {out}: {exc.strerror or exc}") from exc
    if force:
        for old in out.glob("fields_*.vtk"):
            old.unlink()
    return out


def _run_one(cfg, out: Path, vtk_every: int = 0):
    """Run one case and write its outputs; returns the RunResult and slope."""
    from .analysis import crack_width_slope
    from .io import write_series_csv, write_summary, write_vtk
    from .solver import run_case

    def on_record(sim, step):
        if vtk_every and step % vtk_every == 0:
            write_vtk(out / f"fields_{step:06d}.vtk", sim)

    result = run_case(cfg, on_record=on_record)
    write_series_csv(result.series, out / "series.csv", cfg.i_a)
    write_vtk(out / f"fields_{result.accepted:06d}.vtk", result.sim)
    slope, err = None, None
    try:
        slope = crack_width_slope(result.series.column("t_cor"), result.series.column("w"), cfg.w_min)
    except FitError as exc:
        err = str(exc)
    write_summary(out / "summary.txt", result, slope, err)
    return result, slope, err


def _campaign_worker(args):
    """Process-pool entry point; never raises so one failure cannot stop the campaign."""
    cfg, out, vtk_every = args
    try:
        result, slope, err = _run_one(cfg, Path(out), vtk_every)
        return cfg.i_a, result.series.column("t_cor"), result.series.column("w"), slope, err
    except CorroCrackError as exc:
        return cfg.i_a, None, None, None, f"{type(exc).__name__}: {exc}"


def case_dir_name(i_a: float) -> str:
    return f"case_{i_a / 1e-2:g}uA_cm2"


# -- subcommands ----------------------------------------------------------
def cmd_run(args) -> int:
    from .config import CampaignConfig, load_any

    cfg = load_any(args.config)
    if isinstance(cfg, CampaignConfig):
        raise ConfigError("run expects a single case; this file has a [campaign] section")
    out = _prepare_out(Path(args.output), args.force)
    result, slope, err = _run_one(cfg, out, args.vtk_every)
    msg = f"beta = {slope.beta:.4g}" if slope else f"beta unavailable ({err})"
    print(f"run finished: {result.accepted} steps, {msg}; outputs in {out}")
    return 0


def cmd_campaign(args) -> int:
    from .analysis import CaseResult, analyse_campaign
    from .config import CampaignConfig, load_any
    from .io import campaign_report, write_campaign_csv, write_text

    camp = load_any(args.config)
    if not isinstance(camp, CampaignConfig):
        raise ConfigError("campaign expects a [campaign] section")
    if args.jobs is not None:
        if args.jobs < 1:
            raise ConfigError("-j must be >= 1")
        camp = CampaignConfig(camp.base, camp.i_a, args.jobs, camp.i_ref)
    out = _prepare_out(Path(args.output), args.force)
    tasks = []
    for cfg in camp.cases():
        d = out / case_dir_name(cfg.i_a)
        _prepare_out(d, True)
        tasks.append((cfg, str(d), args.vtk_every))
    jobs = camp.effective_jobs()
    if jobs == 1:
        results = [_campaign_worker(t) for t in tasks]
    else:
        threads = os.environ.get("CORROCRACK_THREADS")
        for var in THREAD_VARS:
            os.environ.setdefault(var, "1" if not threads else str(max(1, int(threads) // jobs)))
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_campaign_worker, tasks))
    cases = [CaseResult(i_a, t, w, slope, err) if err is None or t is not None else
             CaseResult(i_a, None, None, None, err) for i_a, t, w, slope, err in results]
    campaign = analyse_campaign(cases, camp.i_ref, camp.base.w_min)
    write_campaign_csv(out / "campaign.csv", campaign)
    report = campaign_report(campaign)
    write_text(out / "report.txt", report)
    print(report, end="")
    failed = [c for c in campaign.cases if c.error is not None]
    return 2 if failed else 0


def cmd_fit(args) -> int:
    from .analysis import CaseResult, analyse_campaign
    from .chemistry import UA_CM2
    from .io import campaign_report, read_series_csv

    cases = []
    for path in args.series:
        i_a, cols = read_series_csv(path)
        if i_a is None:
            raise ConfigError(f"{path}: no i_a header line")
        cases.append(CaseResult(i_a, cols["t_cor"], cols["w"]))
    if len({c.i_a for c in cases}) != len(cases):
        raise ConfigError("fit: series files must have distinct current densities")
    campaign = analyse_campaign(cases, args.i_ref * UA_CM2, args.w_min)
    print(campaign_report(campaign), end="")
    return 0 if all(c.slope is not None for c in campaign.cases) else 2


def cmd_mesh(args) -> int:
    from .config import CampaignConfig, load_any
    from .mesh import build_specimen_mesh, save_mesh

    cfg = load_any(args.config)
    if isinstance(cfg, CampaignConfig):
        cfg = cfg.base
    mesh = build_specimen_mesh(cfg.geometry, cfg.h_fine, cfg.h_coarse, ell=cfg.materials.ell)
    try:
        save_mesh(mesh, args.output)
    except OSError as exc:
        raise OutputError(str(exc)) from exc
    print(f"mesh: {mesh.n_nodes} nodes, {mesh.n_elements} elements -> {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="corrocrack",
                                description="Corrosion-induced cracking of reinforced concrete.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one case")
    r.add_argument("config")
    r.add_argument("-o", "--output", required=True, help="output directory")
    r.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")
    r.add_argument("--vtk-every", type=int, default=0, metavar="N",
                   help="also write a VTK snapshot every N accepted steps")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("campaign", help="run a current-density sweep and fit the power law")
    c.add_argument("config")
    c.add_argument("-o", "--output", required=True)
    c.add_argument("-j", "--jobs", type=int, default=None, help="parallel cases")
    c.add_argument("--force", action="store_true")
    c.add_argument("--vtk-every", type=int, default=0, metavar="N")
    c.set_defaults(func=cmd_campaign)

    f = sub.add_parser("fit", help="re-run the crack width analysis on series.csv files")
    f.add_argument("series", nargs="+")
    f.add_argument("--i-ref", type=float, default=1.0, help="reference current density [uA/cm2]")
    f.add_argument("--w-min", type=float, default=1e-6, help="fitting threshold [m]")
    f.set_defaults(func=cmd_fit)

    m = sub.add_parser("mesh", help="generate and save the specimen mesh")
    m.add_argument("config")
    m.add_argument("-o", "--output", required=True)
    m.set_defaults(func=cmd_mesh)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CorroCrackError as exc:
        print(f"corrocrack: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"corrocrack: I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
