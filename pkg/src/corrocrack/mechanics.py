"""Phase-field cohesive-zone fracture of concrete loaded by expanding rust.

Plane-strain linear elasticity degraded by ``g(phi)``, an isotropic
precipitation eigenstrain from rust in the pores, a pressure on the rebar
boundary from the dense rust layer, the history field of the principal
effective stress and the bound-constrained phase-field problem.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, DomainError, SolverError, StepRejected
from .fe import Assembler, P1Geometry
from .mesh import Mesh, SpecimenGeometry, Tag
from .numerics import SparseSystem, lambert_w0, lambert_w0_log, solve_spd

log = logging.getLogger(__name__)

# Hordijk-Cornelissen softening: ratios of ultimate opening and initial slope
# to those of linear softening
BETA_W = 5.1361 / 2.0
BETA_K = 1.3546 / 0.5
E_DAMAGED_FLOOR = 1e-4


@dataclass(frozen=True)
class MaterialSet:
    E_c: float = 33e9
    nu_c: float = 0.2
    f_t: float = 2.2e6
    G_f: float = 95.0
    E_r: float = 500e6
    nu_r: float = 0.4
    ell: float = 3e-3

    def __post_init__(self):
        for name in ("E_c", "f_t", "G_f", "E_r", "ell"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"{name} must be > 0")
        for name in ("nu_c", "nu_r"):
            if not (0.0 < getattr(self, name) < 0.5):
                raise ConfigError(f"{name} must lie in (0, 0.5)")

    @property
    def K_r(self) -> float:
        return self.E_r / (3.0 * (1.0 - 2.0 * self.nu_r))


MATERIAL_PRESETS = {
    "pedrosa-28d": MaterialSet(E_c=33e9, nu_c=0.2, f_t=2.2e6, G_f=95.0),
    "pedrosa-147d": MaterialSet(E_c=36e9, nu_c=0.2, f_t=3.9e6, G_f=114.0),
}


@dataclass(frozen=True)
class SofteningParams:
    p_exp: float
    a1: float
    a2: float
    a3: float
    ell_irw: float
    H_threshold: float
    E_tilde: float
    beta_w: float = BETA_W
    beta_k: float = BETA_K


def calibrate_pfczm(mat: MaterialSet) -> SofteningParams:
    """Degradation-function parameters reproducing Hordijk-Cornelissen softening."""
    nu = mat.nu_c
    E_t = mat.E_c * (1.0 - nu) / ((1.0 + nu) * (1.0 - 2.0 * nu))
    ell_irw = E_t * mat.G_f / mat.f_t ** 2
    p = 2.0
    a1 = 4.0 / math.pi * ell_irw / mat.ell
    a2 = 2.0 * BETA_K ** (2.0 / 3.0) - p - 0.5
    a3 = BETA_W ** 2 / 2.0 - a2 - 1.0
    if mat.ell > 8.0 * ell_irw / (3.0 * math.pi):
        warnings.warn(f"length scale {mat.ell} m exceeds 8 l_irw / (3 pi); softening is distorted",
                      RuntimeWarning, stacklevel=2)
    return SofteningParams(p, a1, a2, a3, ell_irw, mat.f_t ** 2 / (2.0 * E_t), E_t)


def _g_parts(phi, sp_: SofteningParams):
    phi = np.asarray(phi, dtype=float)
    p, a1, a2, a3 = sp_.p_exp, sp_.a1, sp_.a2, sp_.a3
    q = 1.0 - phi
    P = q ** p
    dP = -p * q ** (p - 1.0)
    d2P = p * (p - 1.0) * q ** (p - 2.0)
    Q = a1 * phi * (1.0 + a2 * phi + a3 * phi ** 2)
    dQ = a1 * (1.0 + 2.0 * a2 * phi + 3.0 * a3 * phi ** 2)
    d2Q = a1 * (2.0 * a2 + 6.0 * a3 * phi)
    return P, dP, d2P, Q, dQ, d2Q


def degradation(phi, sp_: SofteningParams):
    """``g(phi)`` and ``dg/dphi`` of the rational PF-CZM degradation function."""
    if np.any(np.asarray(phi) < 0.0) or np.any(np.asarray(phi) > 1.0):
        raise DomainError("phase field outside [0, 1]")
    P, dP, _, Q, dQ, _ = _g_parts(phi, sp_)
    S = P + Q
    return P / S, (dP * Q - P * dQ) / S ** 2


def degradation_curvature(phi, sp_: SofteningParams):
    P, dP, d2P, Q, dQ, d2Q = _g_parts(phi, sp_)
    S = P + Q
    N = dP * Q - P * dQ
    return (d2P * Q - P * d2Q) / S ** 2 - 2.0 * N * (dP + dQ) / S ** 3


def compliance(a: float, alpha: float, nu_c: float, E_damaged):
    """Radial compliance of a thick-walled cylinder, inner radius ``a``, ``b = alpha a``."""
    if not alpha > 1.0:
        raise DomainError("shape factor alpha must be > 1")
    E_d = np.asarray(E_damaged, dtype=float)
    if np.any(E_d <= 0.0):
        raise DomainError("damaged modulus must be > 0")
    return a * (alpha ** 2 + 1.0 - 2.0 * nu_c) * (1.0 + nu_c) / (E_d * (alpha ** 2 - 1.0))


def rust_layer_pressure(t_cor, kappa: float, C_c, K_r: float):
    """Inner displacement ``u_c`` and pressure ``p`` of a compressible rust layer.

    Closed-form solution of ``p = K_r ln(kappa t / (t + u_c))`` with
    ``u_c = C_c p``:  ``u_c = X W(kappa t / X exp(t / X)) - t`` with
    ``X = C_c K_r``.
    """
    t = np.asarray(t_cor, dtype=float)
    C = np.asarray(C_c, dtype=float)
    if np.any(t < 0.0) or kappa < 1.0 or np.any(C <= 0.0) or K_r <= 0.0:
        raise DomainError("rust_layer_pressure needs t_cor >= 0, kappa >= 1, C_c > 0, K_r > 0")
    t, C = np.broadcast_arrays(t, C)
    X = C * K_r
    u = np.zeros(t.shape)
    pos = t > 0.0
    if np.any(pos):
        r = t[pos] / X[pos]
        logF = math.log(kappa) + np.log(r) + r
        W = np.empty_like(r)
        small = logF < 700.0
        if np.any(small):
            W[small] = lambert_w0(np.exp(logF[small]))
        if np.any(~small):
            W[~small] = lambert_w0_log(logF[~small])
        # u_c = X d with d = W - r; polish d on d + log1p(d / r) = ln(kappa),
        # which avoids the cancellation in X W - t when t >> X
        d = np.maximum(W - r, 0.0)
        for _ in range(3):
            d -= (d + np.log1p(d / r) - math.log(kappa)) / (1.0 + 1.0 / (r + d))
        u[pos] = np.maximum(X[pos] * d, 0.0)
    p = u / C
    if u.ndim == 0:
        return float(u), float(p)
    return u, p


def bulk_modulus_mixture(theta_r, mat: MaterialSet):
    E = (1.0 - theta_r) * mat.E_c + theta_r * mat.E_r
    return E / (3.0 * (1.0 - 2.0 * mat.nu_c))


def precipitation_eigenstrain(S_r, mat: MaterialSet, theta_r, kappa: float):
    """Magnitude ``C S_r`` of the isotropic in-plane eigenstrain ``eps* = C S_r 1``."""
    S_r = np.asarray(S_r, dtype=float)
    if np.any(S_r < 0.0) or np.any(S_r > 1.0):
        raise DomainError("S_r outside [0, 1]")
    K = bulk_modulus_mixture(np.asarray(theta_r, dtype=float), mat)
    nu, K_r = mat.nu_c, mat.K_r
    C = (1.0 - nu) * K_r * (kappa - 1.0) / ((1.0 + nu) * K_r + (2.0 - 4.0 * nu) * K)
    return C * S_r


@dataclass
class BoundaryConditions:
    """Displacement constraints, surface loads and body force.

    ``fixed`` rows are ``(node, component, value)``; ``tractions`` maps
    boundary edges to a constant traction vector; ``pressure_edges`` are
    loaded by the per-edge pressure passed to :func:`solve_elasticity`,
    acting away from ``pressure_center``.
    """

    fixed: np.ndarray
    pressure_edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))
    pressure_center: tuple = (0.0, 0.0)
    traction_edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))
    tractions: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    body_force: tuple = (0.0, 0.0)

    def __post_init__(self):
        self.fixed = np.asarray(self.fixed, dtype=float).reshape(-1, 3)
        if self.fixed.shape[0] < 3:
            raise ConfigError("at least three displacement constraints are needed in 2D")

    @property
    def fixed_dofs(self) -> np.ndarray:
        return (2 * self.fixed[:, 0] + self.fixed[:, 1]).astype(int)


def specimen_bcs(mesh: Mesh, geom: SpecimenGeometry) -> BoundaryConditions:
    """Bottom edge held vertically, bottom-centre node held horizontally."""
    bottom = mesh.boundary_nodes(Tag.BOTTOM)
    if bottom.size < 2:
        raise ConfigError("mesh has no BOTTOM boundary")
    centre = bottom[np.argmin(np.abs(mesh.nodes[bottom, 0] - 0.5 * geom.width))]
    fixed = [(n, 1, 0.0) for n in bottom] + [(centre, 0, 0.0)]
    return BoundaryConditions(np.array(fixed), pressure_edges=mesh.edges(Tag.REBAR),
                              pressure_center=geom.rebar_center)


def annulus_bcs(mesh: Mesh, center=(0.0, 0.0)) -> BoundaryConditions:
    """Symmetry constraints on the axes through the annulus centre."""
    x = mesh.nodes - np.asarray(center)
    tol = 1e-9 * np.abs(x).max()
    on_x = np.flatnonzero(np.abs(x[:, 1]) <= tol)
    on_y = np.flatnonzero(np.abs(x[:, 0]) <= tol)
    fixed = [(n, 1, 0.0) for n in on_x] + [(n, 0, 0.0) for n in on_y]
    return BoundaryConditions(np.array(fixed), pressure_edges=mesh.edges(Tag.INNER),
                              pressure_center=tuple(center))


def plane_strain_matrix(E: float, nu: float) -> np.ndarray:
    f = E / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return f * np.array([[1.0 - nu, nu, 0.0],
                         [nu, 1.0 - nu, 0.0],
                         [0.0, 0.0, 0.5 - nu]])


@dataclass
class MechState:
    u: np.ndarray          # (2N,) interleaved displacements
    phi: np.ndarray        # (N,)
    H: np.ndarray          # (M,)
    p_rebar: np.ndarray    # per REBAR edge
    u_c: np.ndarray        # per REBAR edge
    t_cor: float
    eps_star: np.ndarray   # (M,) isotropic eigenstrain magnitude
    u_steel: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def copy(self) -> "MechState":
        return MechState(self.u.copy(), self.phi.copy(), self.H.copy(), self.p_rebar.copy(),
                         self.u_c.copy(), self.t_cor, self.eps_star.copy(), self.u_steel.copy())


class MechanicsModel:
    """Precomputed element data for elasticity and phase-field solves."""

    def __init__(self, mesh: Mesh, mat: MaterialSet, residual_stiffness: float = 1e-6):
        self.mesh = mesh
        self.mat = mat
        self.sp = calibrate_pfczm(mat)
        self.k_res = residual_stiffness
        self.geo = P1Geometry.from_mesh(mesh)
        self.B = self.geo.strain_operator()
        self.D = plane_strain_matrix(mat.E_c, mat.nu_c)
        self.Ke0 = self.geo.area[:, None, None] * np.einsum("eki,kl,elj->eij", self.B, self.D, self.B)
        self.asm2 = Assembler(mesh.elements, mesh.n_nodes, ndof=2)
        self.asm1 = Assembler(mesh.elements, mesh.n_nodes)
        self.lap = self.asm1.matrix(self.geo.laplacian_blocks())
        self.mass = self.geo.lumped_mass(mesh.elements, mesh.n_nodes)

    def initial_state(self, n_pressure_edges: int = 0) -> MechState:
        M, N = self.mesh.n_elements, self.mesh.n_nodes
        z = np.zeros(n_pressure_edges)
        return MechState(np.zeros(2 * N), np.zeros(N), np.full(M, self.sp.H_threshold),
                         z, z.copy(), 0.0, np.zeros(M))

    def element_phi(self, phi: np.ndarray) -> np.ndarray:
        return phi[self.mesh.elements].mean(axis=1)

    def strains(self, u: np.ndarray) -> np.ndarray:
        """Element Voigt strains (M, 3)."""
        ue = u[self.asm2.dofs]
        return np.einsum("eij,ej->ei", self.B, ue)


def pressure_loads(mesh: Mesh, edges: np.ndarray, p: np.ndarray, center) -> np.ndarray:
    """Nodal forces from a pressure acting on ``edges`` away from ``center``."""
    x0, x1 = mesh.nodes[edges[:, 0]], mesh.nodes[edges[:, 1]]
    d = x1 - x0
    n = np.column_stack([d[:, 1], -d[:, 0]])   # |n| = edge length
    mid = 0.5 * (x0 + x1) - np.asarray(center)
    n *= np.sign(np.einsum("ij,ij->i", n, mid))[:, None]
    f = np.zeros(2 * mesh.n_nodes)
    half = 0.5 * p[:, None] * n
    for k in (0, 1):
        np.add.at(f, 2 * edges[:, k], half[:, 0])
        np.add.at(f, 2 * edges[:, k] + 1, half[:, 1])
    return f


def _elasticity_system(model: MechanicsModel, phi: np.ndarray, eps_star: np.ndarray,
                       bc: BoundaryConditions, p_rebar: Optional[np.ndarray]):
    mesh = model.mesh
    g, _ = degradation(model.element_phi(phi), model.sp)
    stiff = g + model.k_res
    K = model.asm2.matrix(stiff[:, None, None] * model.Ke0)
    # eigenstrain load: A B^T D eps*, eps* = e (1, 1, 0)
    sig_star = np.outer(stiff * eps_star, model.D @ np.array([1.0, 1.0, 0.0]))
    f_loc = model.geo.area[:, None] * np.einsum("eki,ek->ei", model.B, sig_star)
    f = model.asm2.vector(f_loc)
    if p_rebar is not None and len(bc.pressure_edges):
        f += pressure_loads(mesh, bc.pressure_edges, np.asarray(p_rebar, float), bc.pressure_center)
    if len(bc.traction_edges):
        L = np.linalg.norm(mesh.nodes[bc.traction_edges[:, 1]] - mesh.nodes[bc.traction_edges[:, 0]], axis=1)
        for comp in (0, 1):
            for k in (0, 1):
                np.add.at(f, 2 * bc.traction_edges[:, k] + comp, 0.5 * L * bc.tractions[:, comp])
    if any(bc.body_force):
        for comp in (0, 1):
            f[comp::2] += model.mass * bc.body_force[comp]
    return K, f


def solve_elasticity(model: MechanicsModel, phi: np.ndarray, eps_star: np.ndarray,
                     bc: BoundaryConditions, p_rebar: Optional[np.ndarray] = None,
                     method: str = "direct") -> np.ndarray:
    """Displacements of the degraded body under eigenstrain and boundary loads."""
    K, f = _elasticity_system(model, phi, eps_star, bc, p_rebar)
    return solve_spd(SparseSystem(K, f, bc.fixed_dofs, bc.fixed[:, 2]), method=method)


def wall_normals(mesh: Mesh, edges: np.ndarray, center) -> tuple:
    """Unit outward normals (away from ``center``) and lengths of ``edges``."""
    x0, x1 = mesh.nodes[edges[:, 0]], mesh.nodes[edges[:, 1]]
    d = x1 - x0
    L = np.linalg.norm(d, axis=1)
    n = np.column_stack([d[:, 1], -d[:, 0]]) / L[:, None]
    mid = 0.5 * (x0 + x1) - np.asarray(center)
    n *= np.sign(np.einsum("ij,ij->i", n, mid))[:, None]
    return n, L


def wall_opening(mesh: Mesh, edges: np.ndarray, center, u: np.ndarray,
                 u_steel=(0.0, 0.0)) -> np.ndarray:
    """Normal opening of each wall edge midpoint relative to the steel translation."""
    n, _ = wall_normals(mesh, edges, center)
    uv = u[: 2 * mesh.n_nodes].reshape(-1, 2)
    um = 0.5 * (uv[edges[:, 0]] + uv[edges[:, 1]]) - np.asarray(u_steel)
    return np.einsum("ij,ij->i", um, n)


def solve_elasticity_rust_layer(model: MechanicsModel, phi: np.ndarray, eps_star: np.ndarray,
                                bc: BoundaryConditions, p_rebar: np.ndarray, u_c: np.ndarray,
                                k_wall: np.ndarray, method: str = "direct"):
    """Elasticity with the rust layer acting as a normal spring around its equilibrium.

    Each REBAR edge carries the traction ``p + k (u_c - u_n)`` where ``u_n`` is
    the wall opening relative to a rigid, freely translating steel core,
    ``p`` and ``u_c`` come from the rust-layer pressure model and ``k`` is
    its tangent stiffness ``dp/du``.  When the wall opens exactly by ``u_c``
    the traction equals ``p``.  The two steel translations are extra
    unknowns kept in equilibrium with the rust-layer tractions.

    Returns
    -------
    u : (2N,) concrete displacements
    u_steel : (2,) steel core translation
    """
    if not np.any(k_wall > 0.0):
        return solve_elasticity(model, phi, eps_star, bc, p_rebar, method), np.zeros(2)
    K, f = _elasticity_system(model, phi, eps_star, bc, None)
    edges = bc.pressure_edges
    n, L = wall_normals(model.mesh, edges, bc.pressure_center)
    p_rebar = np.asarray(p_rebar, float)
    ndof = K.shape[0]
    nn = np.einsum("ei,ej->eij", n, n)
    rows, cols, vals = [], [], []
    steel = np.array([ndof, ndof + 1])
    for k in (0, 1):
        c = (0.5 * L * k_wall)[:, None, None] * nn          # (E, 2, 2)
        node = np.column_stack([2 * edges[:, k], 2 * edges[:, k] + 1])
        for a in range(2):
            for b in range(2):
                for ra, ca, sgn in ((node[:, a], node[:, b], 1.0), (node[:, a], np.full(len(edges), steel[b]), -1.0),
                                    (np.full(len(edges), steel[a]), node[:, b], -1.0),
                                    (np.full(len(edges), steel[a]), np.full(len(edges), steel[b]), 1.0)):
                    rows.append(ra)
                    cols.append(ca)
                    vals.append(sgn * c[:, a, b])
    K_w = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(ndof + 2, ndof + 2))
    K_ext = sp.bmat([[K, None], [None, sp.csr_matrix((2, 2))]], format="csr") + K_w
    load = (0.5 * L * (p_rebar + k_wall * u_c))[:, None] * n
    f_ext = np.concatenate([f, np.zeros(2)])
    for k in (0, 1):
        np.add.at(f_ext, 2 * edges[:, k], load[:, 0])
        np.add.at(f_ext, 2 * edges[:, k] + 1, load[:, 1])
    f_ext[ndof:] -= 2.0 * load.sum(axis=0)
    x = solve_spd(SparseSystem(K_ext, f_ext, bc.fixed_dofs, bc.fixed[:, 2]), method=method)
    return x[:ndof], x[ndof:]


def effective_stress(model: MechanicsModel, u: np.ndarray, eps_star: np.ndarray) -> np.ndarray:
    eps = model.strains(u)
    eps[:, 0] -= eps_star
    eps[:, 1] -= eps_star
    return eps @ model.D.T


def principal_max(sig: np.ndarray) -> np.ndarray:
    c = 0.5 * (sig[:, 0] + sig[:, 1])
    r = np.hypot(0.5 * (sig[:, 0] - sig[:, 1]), sig[:, 2])
    return c + r


def update_history(model: MechanicsModel, u: np.ndarray, eps_star: np.ndarray,
                   H_old: np.ndarray) -> np.ndarray:
    """``H = max(H_old, H~, <sigma_1>^2 / (2 E~))`` per element."""
    s1 = np.maximum(principal_max(effective_stress(model, u, eps_star)), 0.0)
    drive = s1 ** 2 / (2.0 * model.sp.E_tilde)
    return np.maximum(np.maximum(H_old, model.sp.H_threshold), drive)


@dataclass(frozen=True)
class PhaseFieldResult:
    phi: np.ndarray
    iterations: int
    residual: float


def phase_field_energy(phi, W, model: MechanicsModel, c0: float, L: sp.csr_matrix) -> float:
    g, _ = degradation(phi, model.sp)
    return float(0.5 * g @ W + c0 * model.mass @ (phi - 0.5 * phi ** 2) + 0.5 * phi @ (L @ phi))


def solve_phase_field(model: MechanicsModel, H: np.ndarray, phi_old: np.ndarray,
                      tol: float = 1e-8, max_iter: int = 60) -> PhaseFieldResult:
    """Bound-constrained Newton solve of the phase-field equation.

    Minimises the discrete functional whose stationarity condition is
    ``1/2 g'(phi) H + G_f/(pi l) (1 - phi) - G_f l/pi lap(phi) = 0`` (lumped
    local terms), subject to ``phi_old <= phi <= 1``.
    """
    mat, sp_ = model.mat, model.sp
    if np.any(H < sp_.H_threshold * (1.0 - 1e-12)):
        raise DomainError("history field below its threshold")
    c0 = mat.G_f / (math.pi * mat.ell)
    L = (mat.ell * mat.G_f / math.pi) * model.lap
    W = model.geo.lumped_mass(model.mesh.elements, model.mesh.n_nodes, weight=H)
    cM = c0 * model.mass
    c_ref = float(np.linalg.norm(cM))
    lb = np.clip(phi_old, 0.0, 1.0)
    x = lb.copy()

    def gradient(x):
        _, dg = degradation(x, sp_)
        drive, resist, diff = 0.5 * dg * W, cM * (1.0 - x), L @ x
        # residual is measured relative to the largest of its three terms
        scale = max(np.linalg.norm(drive), np.linalg.norm(resist), np.linalg.norm(diff), c_ref)
        return drive + resist + diff, scale

    def blocked(x, gr):
        return ((x <= lb) & (gr > 0.0)) | ((x >= 1.0) & (gr < 0.0))

    def proj_grad(x, gr):
        return np.where(blocked(x, gr), 0.0, gr)

    gr, scale = gradient(x)
    pg = proj_grad(x, gr)
    res = np.linalg.norm(pg) / scale
    energy = phase_field_energy(x, W, model, c0, L)
    for it in range(1, max_iter + 1):
        if res <= tol:
            return PhaseFieldResult(x, it - 1, res)
        free = ~blocked(x, gr)
        h = 0.5 * degradation_curvature(x, sp_) * W - cM
        Hess = L + sp.diags(np.maximum(h, 0.0) + 1e-10 * cM)
        d = np.zeros_like(x)
        idx = np.flatnonzero(free)
        if idx.size:
            Hf = Hess[idx][:, idx].tocsc()
            try:
                d[idx] = spla.splu(Hf, permc_spec="MMD_AT_PLUS_A").solve(-gr[idx])
            except RuntimeError as exc:
                raise StepRejected(f"phase-field Newton matrix is singular: {exc}") from exc
        alpha = 1.0
        accepted = False
        for _ in range(40):
            xn = np.clip(x + alpha * d, lb, 1.0)
            en = phase_field_energy(xn, W, model, c0, L)
            grn, scale_n = gradient(xn)
            pgn = proj_grad(xn, grn)
            resn = np.linalg.norm(pgn) / scale_n
            if en <= energy + 1e-4 * gr @ (xn - x) or resn < 0.5 * res:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            raise StepRejected("phase-field line search failed")
        x, gr, energy, res = xn, grn, en, resn
        log.debug("phase field iteration %d: residual %.3e, step %.3g", it, res, alpha)
    if res <= tol:
        return PhaseFieldResult(x, max_iter, res)
    raise StepRejected(f"phase-field Newton did not converge (residual {res:.2e})")
