"""Post-processing: surface crack width, crack width slope and correction factor."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ConfigError, FitError
from .mesh import Mesh, Tag
from .numerics import FitResult, linear_fit, power_fit

log = logging.getLogger(__name__)

W_TOL = 1e-9


def surface_crack_width(model, u: np.ndarray, phi: np.ndarray, eps_star: np.ndarray) -> float:
    """Integral over the top surface of the inelastic strain ``(1 - g)(eps_x - eps*_x)``.

    Each TOP edge uses the constant strain of its element and ``g`` at the
    edge midpoint.

    Parameters
    ----------
    model : MechanicsModel
    u : (2N,) displacements
    phi : (N,) phase field
    eps_star : (M,) eigenstrain magnitude per element
    """
    from .mechanics import degradation

    mesh = model.mesh
    edges = mesh.edges(Tag.TOP)
    if len(edges) == 0:
        raise ConfigError("mesh has no TOP boundary")
    owner = mesh.edge_element(Tag.TOP)
    L = mesh.edge_lengths(Tag.TOP)
    eps_x = model.strains(u)[owner, 0] - eps_star[owner]
    g, _ = degradation(phi[edges].mean(axis=1), model.sp)
    w = float(np.sum((1.0 - g) * eps_x * L))
    if w < -W_TOL:
        log.warning("negative surface crack width %.3e m clamped to 0", w)
    return max(w, 0.0)


@dataclass(frozen=True)
class SlopeFit:
    beta: float
    zeta: float
    r2: float
    n: int
    cracked: bool = True


def crack_width_slope(t_cor: Sequence[float], w: Sequence[float], w_min: float = 1e-6) -> SlopeFit:
    """Fit ``w = beta t_cor + zeta`` over records with ``w >= w_min``.

    Raises
    ------
    FitError
        ("not cracked") when fewer than two distinct records pass the filter.
    """
    t_cor = np.asarray(t_cor, dtype=float)
    w = np.asarray(w, dtype=float)
    keep = w >= w_min
    pts = np.unique(np.column_stack([t_cor[keep], w[keep]]), axis=0)
    if np.unique(pts[:, 0]).size < 2:
        raise FitError("not cracked: fewer than two records with w >= w_min")
    fit = linear_fit(pts)
    return SlopeFit(fit.coefficients[0], fit.coefficients[1], fit.r2, fit.n)


@dataclass(frozen=True)
class PowerLaw:
    gamma1: float
    gamma2: float
    r2: float
    i_ref: float

    def k_beta(self, i_a) -> np.ndarray:
        return (np.asarray(i_a, dtype=float) / self.i_ref) ** self.gamma2

    def beta(self, i_a) -> np.ndarray:
        return self.gamma1 * self.k_beta(i_a)


def correction_factor(campaign: Sequence[Sequence[float]], i_ref: float) -> PowerLaw:
    """Power law ``beta = gamma1 (i_a / i_ref)^gamma2`` and ``k_beta = (i_a / i_ref)^gamma2``."""
    fit: FitResult = power_fit(campaign, i_ref)
    g1, g2 = fit.coefficients
    return PowerLaw(g1, g2, fit.r2, i_ref)


@dataclass
class CaseResult:
    i_a: float
    t_cor: np.ndarray
    w: np.ndarray
    slope: Optional[SlopeFit] = None
    error: Optional[str] = None


@dataclass
class CampaignResult:
    cases: list = field(default_factory=list)
    law: Optional[PowerLaw] = None
    note: str = ""

    def table(self) -> list:
        """Rows ``(i_a, beta, zeta, r2, gamma1, gamma2, k_beta)``; NaN when unavailable."""
        nan = float("nan")
        rows = []
        for c in sorted(self.cases, key=lambda c: c.i_a):
            s = c.slope
            law = self.law
            rows.append((c.i_a,
                         s.beta if s else nan, s.zeta if s else nan, s.r2 if s else nan,
                         law.gamma1 if law else nan, law.gamma2 if law else nan,
                         float(law.k_beta(c.i_a)) if law else nan))
        return rows


def analyse_campaign(cases: Sequence[CaseResult], i_ref: float, w_min: float = 1e-6) -> CampaignResult:
    """Slopes per case and the campaign power law (needs two cracked cases)."""
    out = CampaignResult(list(cases))
    for c in out.cases:
        if c.error is None and c.slope is None:
            try:
                c.slope = crack_width_slope(c.t_cor, c.w, w_min)
            except FitError as exc:
                c.error = str(exc)
    pts = [(c.i_a, c.slope.beta) for c in out.cases if c.slope is not None and c.slope.beta > 0.0]
    if len(pts) >= 2:
        out.law = correction_factor(pts, i_ref)
    else:
        out.note = "insufficient points for the power fit"
    return out


def crack_band(mesh: Mesh, phi: np.ndarray, threshold: float = 0.95):
    """Connected band of nodes with ``phi >= threshold`` joining REBAR to TOP.

    Returns
    -------
    connected : bool
    top_x : numpy.ndarray
        x coordinates of the TOP nodes reached by a connecting component.
    """
    on = phi >= threshold
    el = mesh.elements
    e = np.vstack([el[:, [0, 1]], el[:, [1, 2]], el[:, [2, 0]]])
    e = e[on[e[:, 0]] & on[e[:, 1]]]
    n = mesh.n_nodes
    adj = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    _, lab = connected_components(adj, directed=False)
    rebar = mesh.boundary_nodes(Tag.REBAR)
    top = mesh.boundary_nodes(Tag.TOP)
    labels = set(lab[rebar[on[rebar]]]) & set(lab[top[on[top]]])
    reached = np.array([t for t in top if on[t] and lab[t] in labels], dtype=int)
    return bool(labels), mesh.nodes[reached, 0]
