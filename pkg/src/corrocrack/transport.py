"""Reactive transport of dissolved iron in the concrete pore space.

Fe2+ enters through the rebar boundary, oxidises to Fe3+ and both species
precipitate into immobile rust (oxides from Fe2+, hydroxy-oxides from
Fe3+) which progressively clogs the capillary pores.  Concentrations are
in mol per m3 of pore solution; precipitates are tracked as volume
fractions of the concrete.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .chemistry import ChemistryConstants, RustComposition, faraday_flux, flux_reduction
from .errors import ConfigError, DomainError, NumericalError
from .fe import Assembler, P1Geometry, edge_nodal_loads
from .mesh import Mesh, Tag
from .numerics import SparseSystem, solve_spd

log = logging.getLogger(__name__)

NEG_CLIP = 1e-12


@dataclass(frozen=True)
class TransportProps:
    """Pore-space and diffusivity data.

    ``theta_D_m`` is the product of liquid fraction and matrix diffusivity of
    the virgin concrete; ``D_m = theta_D_m / p0``.
    """

    p0: float = 0.26
    theta_D_m: float = 1e-11
    D_crack: float = 7e-10
    floor_fraction: float = 0.01

    def __post_init__(self):
        if not (0.0 < self.p0 < 1.0):
            raise ConfigError("p0 must lie in (0, 1)")
        if self.theta_D_m <= 0.0 or self.D_crack <= 0.0:
            raise ConfigError("diffusivities must be > 0")
        if not (0.0 < self.floor_fraction < 1.0):
            raise ConfigError("floor_fraction must lie in (0, 1)")

    @property
    def D_m(self) -> float:
        return self.theta_D_m / self.p0

    @property
    def theta_floor(self) -> float:
        return self.floor_fraction * self.p0


@dataclass(frozen=True)
class TransportState:
    """Nodal transport unknowns.

    The representative volume ``V`` splits into solid ``V_s`` and pores
    ``V - V_s = p0 V``; the pores hold liquid ``V_l`` and rust ``V_r``, so
    ``theta_l = V_l / V = p0 - theta_o - theta_h`` and ``theta_r = V_r / V``.
    """

    c_II: np.ndarray
    c_III: np.ndarray
    theta_o: np.ndarray
    theta_h: np.ndarray
    p0: float
    theta_floor: float
    t: float = 0.0

    @classmethod
    def initial(cls, n_nodes: int, props: TransportProps) -> "TransportState":
        z = np.zeros(n_nodes)
        return cls(z, z.copy(), z.copy(), z.copy(), props.p0, props.theta_floor)

    @property
    def theta_r(self) -> np.ndarray:
        return self.theta_o + self.theta_h

    @property
    def theta_l(self) -> np.ndarray:
        return np.maximum(self.p0 - self.theta_r, self.theta_floor)

    @property
    def S_l(self) -> np.ndarray:
        return self.theta_l / self.p0

    @property
    def S_r(self) -> np.ndarray:
        return np.minimum(self.theta_r / self.p0, 1.0)


@dataclass(frozen=True)
class ReactionRates:
    """Volumetric reaction rates per unit volume of pore solution."""

    R_II: np.ndarray
    R_o: np.ndarray
    R_h: np.ndarray


def reaction_rates(state: TransportState, comp: RustComposition,
                   consts: ChemistryConstants) -> ReactionRates:
    return ReactionRates(consts.k_II_III * consts.c_ox * state.c_II,
                         comp.k_II_o * state.c_II,
                         consts.k_III_h * state.c_III)


def effective_diffusivity(phi, theta_l, D_m: float, D_crack: float):
    """Coefficient multiplying ``grad c`` in the flux, ``theta_l (1-phi) D_m + phi D_crack``."""
    return theta_l * (1.0 - phi) * D_m + phi * D_crack


@dataclass(frozen=True)
class TransportStepInfo:
    influx: float        # Fe2+ moles entering the pores per unit depth
    released: float      # Fe moles dissolved from steel (Faraday) per unit depth
    k_f: float
    clogged_nodes: int
    max_dtheta_l: float  # largest nodal drop of theta_l over the step


def inventory(model: "TransportModel", state: TransportState) -> float:
    """Total iron in the pores (dissolved + precipitated), mol per unit depth."""
    c = model.consts
    m = model.mass
    dissolved = m @ (state.theta_l * (state.c_II + state.c_III))
    solid = m @ (state.theta_o * c.rho_o / c.M_o + state.theta_h * c.rho_h / c.M_h)
    return float(dissolved + solid)


def pore_clogging_guard(state: TransportState, d_theta_o: np.ndarray, d_theta_h: np.ndarray):
    """Apply precipitation increments without pushing ``theta_l`` below its floor.

    Where the requested increments would overfill the pores both are scaled
    by the same factor so that ``theta_l`` lands exactly on the floor.

    Returns
    -------
    new_state : TransportState
        State with updated ``theta_o``, ``theta_h`` (concentrations untouched).
    factor : numpy.ndarray
        Nodal scaling applied to the increments, 1 where unrestricted.
    """
    avail = np.maximum(state.p0 - state.theta_r - state.theta_floor, 0.0)
    req = d_theta_o + d_theta_h
    factor = np.ones_like(req)
    over = req > avail
    factor[over] = avail[over] / req[over]
    th_o = state.theta_o + factor * d_theta_o
    th_h = state.theta_h + factor * d_theta_h
    if np.any(over):
        # land exactly on the floor, shifting the round-off into the hydroxy-oxide share
        th_h[over] = state.p0 - state.theta_floor - th_o[over]
        th_h[over] = np.maximum(th_h[over], state.theta_h[over])
    return replace(state, theta_o=th_o, theta_h=th_h), factor


def _m_matrix(K: sp.csr_matrix) -> sp.csr_matrix:
    """Drop positive off-diagonal couplings, preserving symmetry and row sums."""
    coo = K.tocoo()
    pos = (coo.row != coo.col) & (coo.data > 0.0)
    if not np.any(pos):
        return K
    P = sp.csr_matrix((coo.data[pos], (coo.row[pos], coo.col[pos])), shape=K.shape)
    return (K - P + sp.diags(np.asarray(P.sum(axis=1)).ravel())).tocsr()


class TransportModel:
    """Precomputed mesh data for repeated transport steps on one mesh."""

    def __init__(self, mesh: Mesh, props: TransportProps, consts: ChemistryConstants):
        self.mesh = mesh
        self.props = props
        self.consts = consts
        self.geo = P1Geometry.from_mesh(mesh)
        self.asm = Assembler(mesh.elements, mesh.n_nodes)
        self.lap = self.geo.laplacian_blocks()
        self.mass = self.geo.lumped_mass(mesh.elements, mesh.n_nodes)
        self.rebar_edges = mesh.edges(Tag.REBAR)
        self.rebar_lengths = mesh.edge_lengths(Tag.REBAR)
        self.rebar_nodes = mesh.boundary_nodes(Tag.REBAR)
        self.perimeter = float(self.rebar_lengths.sum())
        self._unit_influx = edge_nodal_loads(self.rebar_edges, self.rebar_lengths, mesh.n_nodes)

    def diffusion_matrix(self, phi: np.ndarray, theta_l: np.ndarray) -> sp.csr_matrix:
        el = self.mesh.elements
        d = effective_diffusivity(phi[el].mean(axis=1), theta_l[el].mean(axis=1),
                                  self.props.D_m, self.props.D_crack)
        return _m_matrix(self.asm.matrix(d[:, None, None] * self.lap))

    def k_f(self, state: TransportState, comp: RustComposition, t_cor: float) -> float:
        S_l = float(np.mean(state.S_l[self.rebar_nodes]))
        return flux_reduction(t_cor, min(S_l, 1.0), comp, self.consts, self.props.D_m)


def step_transport(model: TransportModel, state: TransportState, phi: np.ndarray, dt: float,
                   i_a: float, comp: RustComposition, t_cor: float):
    """Advance the transport state by one backward-Euler step.

    Coefficients (liquid fraction, diffusivity, ``k_f``) are frozen at the
    start of the step.  Precipitation uses the new concentrations, so moles
    are conserved exactly: influx = change of dissolved + precipitated iron.

    Returns
    -------
    TransportState, TransportStepInfo
    """
    if not dt > 0.0:
        raise DomainError("dt must be > 0")
    c = model.consts
    m = model.mass
    th_l = state.theta_l
    floor = state.theta_floor
    # nodes already at the floor cannot take more precipitate
    s = (th_l > floor * (1.0 + 1e-9)).astype(float)
    k_ox = c.k_II_III * c.c_ox
    k_f = model.k_f(state, comp, t_cor) if i_a > 0.0 else 1.0
    J = k_f * faraday_flux(i_a, c)
    K = model.diffusion_matrix(phi, th_l)
    mt = m * th_l

    f2 = mt * state.c_II / dt + J * model._unit_influx
    A2 = K + sp.diags(mt / dt + mt * (s * comp.k_II_o + k_ox))
    c2 = solve_spd(SparseSystem(A2, f2)) if np.any(f2) else np.zeros_like(f2)
    f3 = mt * state.c_III / dt + mt * k_ox * c2
    A3 = K + sp.diags(mt / dt + mt * s * c.k_III_h)
    c3 = solve_spd(SparseSystem(A3, f3)) if np.any(f3) else np.zeros_like(f3)
    for name, arr in (("c_II", c2), ("c_III", c3)):
        tol = NEG_CLIP * max(1.0, float(np.abs(arr).max()))
        if arr.min() < -tol:
            raise NumericalError(f"negative {name} concentration {arr.min():.3e}")
    c2 = np.maximum(c2, 0.0)
    c3 = np.maximum(c3, 0.0)

    dn_o = dt * mt * s * comp.k_II_o * c2
    dn_h = dt * mt * s * c.k_III_h * c3
    safe_m = np.where(m > 0.0, m, 1.0)
    new, factor = pore_clogging_guard(state, dn_o * c.M_o / (c.rho_o * safe_m),
                                      dn_h * c.M_h / (c.rho_h * safe_m))
    # precipitate that did not fit stays dissolved at its node
    n2 = mt * c2 + (1.0 - factor) * dn_o
    n3 = mt * c3 + (1.0 - factor) * dn_h
    th_l_new = new.theta_l
    new = replace(new, c_II=n2 / (m * th_l_new), c_III=n3 / (m * th_l_new), t=state.t + dt)

    info = TransportStepInfo(
        influx=dt * J * model.perimeter,
        released=dt * faraday_flux(i_a, c) * model.perimeter,
        k_f=k_f,
        clogged_nodes=int(np.count_nonzero(factor < 1.0)),
        max_dtheta_l=float(np.max(th_l - th_l_new)) if th_l.size else 0.0,
    )
    return new, info
