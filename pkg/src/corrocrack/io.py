"""Writers and readers for run outputs.

File formats
------------
``series.csv``
    One comment line ``# corrocrack series i_a=<A/m2>`` followed by a header
    row and one row per record with the columns of
    :data:`corrocrack.solver.RECORD_COLUMNS` (SI units, moles per metre of
    bar length for the iron totals).
``fields_<step>.vtk``
    Legacy ASCII VTK unstructured grid with nodal ``phi``, ``c_II``,
    ``c_III``, ``theta_o``, ``theta_h``, nodal vector ``displacement`` and
    element scalar ``H``.
``campaign.csv``
    Columns :data:`CAMPAIGN_COLUMNS` (``i_a`` in A/m2, ``zeta`` in m), one
    row per current density; ``status`` is ``ok`` or the failure reason.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, OutputError
from .solver import RECORD_COLUMNS, RunResult, TimeSeries

CAMPAIGN_COLUMNS = ("i_a", "beta", "zeta", "r2", "gamma1", "gamma2", "k_beta", "status")
SERIES_TAG = "# corrocrack series"


def _guard(fn):
    def wrapped(*args, **kw):
        try:
            return fn(*args, **kw)
        except OutputError:
            raise
        except OSError as exc:
            raise OutputError(f"cannot write {exc.filename or ''}: {exc.strerror or exc}") from exc
    wrapped.__doc__ = fn.__doc__
    wrapped.__name__ = fn.__name__
    return wrapped


@_guard
def write_series_csv(series: TimeSeries, path, i_a: float) -> None:
    with Path(path).open("w", newline="") as f:
        f.write(f"{SERIES_TAG} i_a={float(i_a)!r}\n")
        w = csv.writer(f)
        w.writerow(RECORD_COLUMNS)
        for row in series.rows:
            w.writerow([repr(float(v)) for v in row])


def read_series_csv(path):
    """Return ``(i_a or None, {column: array})`` from a ``series.csv`` file."""
    p = Path(path)
    try:
        lines = p.read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc.strerror or exc}") from None
    i_a = None
    if lines and lines[0].startswith(SERIES_TAG):
        try:
            i_a = float(lines[0].split("i_a=")[1])
        except (IndexError, ValueError):
            raise ConfigError(f"{p}: malformed header line") from None
        lines = lines[1:]
    rows = list(csv.reader(lines))
    if not rows:
        raise ConfigError(f"{p}: empty series file")
    header = rows[0]
    missing = {"t_cor", "w"} - set(header)
    if missing:
        raise ConfigError(f"{p}: missing columns {sorted(missing)}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float).reshape(-1, len(header))
    except ValueError:
        raise ConfigError(f"{p}: non-numeric entry") from None
    return i_a, {name: data[:, k] for k, name in enumerate(header)}


@_guard
def write_vtk(path, sim, title: str = "corrocrack fields") -> None:
    """Snapshot of the current simulation fields as legacy ASCII VTK."""
    mesh, tr, mech = sim.mesh, sim.transport, sim.mech
    n, m = mesh.n_nodes, mesh.n_elements
    with Path(path).open("w") as f:
        f.write("# vtk DataFile Version 2.0\n")
        f.write(f"{title[:250]}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {n} double\n")
        np.savetxt(f, np.column_stack([mesh.nodes, np.zeros(n)]), fmt="%.10e")
        f.write(f"CELLS {m} {4 * m}\n")
        np.savetxt(f, np.column_stack([np.full(m, 3), mesh.elements]), fmt="%d")
        f.write(f"CELL_TYPES {m}\n")
        np.savetxt(f, np.full(m, 5), fmt="%d")      # VTK_TRIANGLE
        f.write(f"POINT_DATA {n}\n")
        for name, arr in (("phi", mech.phi), ("c_II", tr.c_II), ("c_III", tr.c_III),
                          ("theta_o", tr.theta_o), ("theta_h", tr.theta_h)):
            f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            np.savetxt(f, arr, fmt="%.10e")
        f.write("VECTORS displacement double\n")
        np.savetxt(f, np.column_stack([mech.u.reshape(-1, 2), np.zeros(n)]), fmt="%.10e")
        f.write(f"CELL_DATA {m}\nSCALARS H double 1\nLOOKUP_TABLE default\n")
        np.savetxt(f, mech.H, fmt="%.10e")


@_guard
def write_summary(path, result: RunResult, slope=None, slope_error: Optional[str] = None) -> None:
    s = result.series
    cfg = result.sim.cfg
    last = dict(zip(RECORD_COLUMNS, s.rows[-1])) if len(s) else {}
    lines = [
        "corrocrack run summary",
        f"i_a [A/m2]            {float(cfg.i_a)!r}",
        f"i_a [uA/cm2]          {float(cfg.i_a) / 1e-2!r}",
        f"kappa                 {result.sim.kappa:.6g}",
        f"mesh nodes/elements   {result.sim.mesh.n_nodes} / {result.sim.mesh.n_elements}",
        f"steps accepted        {result.accepted}",
        f"steps rejected        {result.rejected}",
        f"steps forced          {result.forced}",
        f"records               {len(s)}",
    ]
    if last:
        lines += [f"final t [s]           {last['t']:.6g}",
                  f"final t_cor [m]       {last['t_cor']:.6g}",
                  f"final w [m]           {last['w']:.6g}",
                  f"max mass error        {max(s.column('mass_error')):.3e}"]
    if slope is not None:
        lines += [f"beta [-]              {slope.beta:.6g}",
                  f"zeta [m]              {slope.zeta:.6g}",
                  f"fit r2                {slope.r2:.6g}",
                  f"fit points            {slope.n}"]
    elif slope_error:
        lines.append(f"beta                  unavailable ({slope_error})")
    Path(path).write_text("\n".join(lines) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return repr(v) if isinstance(v, float) else str(v)


@_guard
def write_campaign_csv(path, campaign) -> None:
    """Per-case slopes and the campaign power law (``campaign`` is a CampaignResult)."""
    status = {c.i_a: ("ok" if c.slope is not None else f"failed: {c.error}") for c in campaign.cases}
    with Path(path).open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CAMPAIGN_COLUMNS)
        for i_a, beta, zeta, r2, g1, g2, kb in campaign.table():
            w.writerow([_fmt(float(i_a)), _fmt(beta), _fmt(zeta), _fmt(r2),
                        _fmt(g1), _fmt(g2), _fmt(kb), status[i_a]])


def campaign_report(campaign) -> str:
    lines = ["corrocrack campaign report", ""]
    for c in sorted(campaign.cases, key=lambda c: c.i_a):
        head = f"i_a = {c.i_a / 1e-2:g} uA/cm2"
        if c.slope is not None:
            lines.append(f"{head}: beta = {c.slope.beta:.4g}, zeta = {c.slope.zeta:.4g} m, "
                         f"r2 = {c.slope.r2:.4f} ({c.slope.n} points)")
        else:
            lines.append(f"{head}: FAILED ({c.error})")
    lines.append("")
    law = campaign.law
    if law is None:
        lines.append(f"power fit: {campaign.note or 'insufficient points'}")
    else:
        lines.append(f"power law: beta = {law.gamma1:.4g} (i_a / {law.i_ref / 1e-2:g} uA/cm2)^({law.gamma2:.4g}), "
                     f"r2 = {law.r2:.4f}")
        lines.append(f"correction factor: k_beta = (i_a / {law.i_ref / 1e-2:g} uA/cm2)^({law.gamma2:.4g})")
        for c in sorted(campaign.cases, key=lambda c: c.i_a):
            lines.append(f"  k_beta({c.i_a / 1e-2:g} uA/cm2) = {float(law.k_beta(c.i_a)):.4f}")
    return "\n".join(lines) + "\n"


@_guard
def write_text(path, text: str) -> None:
    Path(path).write_text(text)
