"""Staggered time integration of transport, rust pressure and fracture."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields
from typing import Callable, Optional

import numpy as np

from .analysis import surface_crack_width
from .chemistry import ChemistryConstants, composition, faraday_penetration_rate
from .errors import ConfigError, NumericalError, StepRejected
from .mechanics import (E_DAMAGED_FLOOR, MaterialSet, MechanicsModel, MechState, compliance,
                        degradation, precipitation_eigenstrain, rust_layer_pressure,
                        solve_elasticity_rust_layer, solve_phase_field, specimen_bcs,
                        update_history, wall_opening)
from .mesh import Mesh, SpecimenGeometry, Tag, build_specimen_mesh
from .transport import (TransportModel, TransportProps, TransportState, inventory,
                        step_transport)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CaseConfig:
    """Everything needed to run one impressed-current simulation.

    Time steps may be given in seconds (``dt_*``) or, more conveniently for
    comparing current densities, as corrosion-penetration increments
    (``dtcor_*``, metres of steel loss per step); seconds win when both are
    set.  Exactly one of ``t_cor_end`` and ``t_end`` stops the run.
    """

    geometry: SpecimenGeometry = field(default_factory=SpecimenGeometry)
    materials: MaterialSet = field(default_factory=MaterialSet)
    chemistry: ChemistryConstants = field(default_factory=ChemistryConstants)
    transport: TransportProps = field(default_factory=TransportProps)
    i_a: float = 1.0                     # A/m2
    t_cor_end: Optional[float] = None    # m
    t_end: Optional[float] = None        # s
    dt_init: Optional[float] = None
    dt_min: Optional[float] = None
    dt_max: Optional[float] = None
    dtcor_init: float = 0.025e-6
    dtcor_min: float = 0.025e-6 / 16.0
    dtcor_max: float = 0.1e-6
    h_fine: float = 0.6e-3
    h_coarse: float = 5e-3
    dphi_max: float = 0.05
    dtheta_max: float = 0.05
    grow_after: int = 5
    grow_factor: float = 1.2
    max_steps: int = 100000
    record_every: int = 1
    residual_stiffness: float = 1e-6
    kappa_override: Optional[float] = None
    w_min: float = 1e-6
    rust_contact: bool = True
    phi_predictor: str = "extrapolate"
    deterministic: bool = True

    def __post_init__(self):
        if self.i_a < 0.0:
            raise ConfigError("i_a must be >= 0")
        if (self.t_cor_end is None) == (self.t_end is None):
            raise ConfigError("set exactly one of t_cor_end and t_end")
        if self.t_cor_end is not None:
            if self.t_cor_end < 0.0:
                raise ConfigError("t_cor_end must be >= 0")
            if self.i_a == 0.0 and self.t_cor_end > 0.0:
                raise ConfigError("t_cor_end cannot be reached with i_a = 0; set t_end")
        if self.t_end is not None and self.t_end < 0.0:
            raise ConfigError("t_end must be >= 0")
        if not (0.0 < self.dtcor_min <= self.dtcor_init <= self.dtcor_max):
            raise ConfigError("need 0 < dtcor_min <= dtcor_init <= dtcor_max")
        lo, mid, hi = self.time_steps()
        if not (0.0 < lo <= mid <= hi):
            raise ConfigError("need 0 < dt_min <= dt_init <= dt_max")
        if self.kappa_override is not None and self.kappa_override < 1.0:
            raise ConfigError("kappa_override must be >= 1")
        if self.phi_predictor not in ("extrapolate", "lagged"):
            raise ConfigError("phi_predictor must be 'extrapolate' or 'lagged'")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")

    @property
    def penetration_rate(self) -> float:
        return faraday_penetration_rate(self.i_a, self.chemistry)

    def time_steps(self):
        """``(dt_min, dt_init, dt_max)`` in seconds."""
        rate = faraday_penetration_rate(self.i_a, self.chemistry)
        if rate > 0.0:
            derived = (self.dtcor_min / rate, self.dtcor_init / rate, self.dtcor_max / rate)
        else:
            span = self.t_end or 1.0
            derived = (span / 1600.0, span / 100.0, span / 25.0)
        given = (self.dt_min, self.dt_init, self.dt_max)
        return tuple(g if g is not None else d for g, d in zip(given, derived))

    def with_(self, **kw) -> "CaseConfig":
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        vals.update(kw)
        return CaseConfig(**vals)


RECORD_COLUMNS = ("t", "t_cor", "w", "p_max", "phi_max", "fe_released", "fe_influx",
                  "mass_error", "k_f", "dt")


@dataclass
class TimeSeries:
    """Accepted-step records; one row per output, columns ``RECORD_COLUMNS``."""

    rows: list = field(default_factory=list)

    def append(self, **rec) -> None:
        self.rows.append(tuple(float(rec[c]) for c in RECORD_COLUMNS))

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        i = RECORD_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows])

    def as_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float).reshape(-1, len(RECORD_COLUMNS))


@dataclass
class StepOutcome:
    transport: TransportState
    mech: MechState
    k_f: float
    influx: float
    released: float
    dphi: float
    dtheta: float
    newton_iterations: int


class Simulation:
    """Mesh, precomputed operators and evolving state of one case."""

    def __init__(self, cfg: CaseConfig, mesh: Optional[Mesh] = None):
        self.cfg = cfg
        g = cfg.geometry
        self.mesh = mesh if mesh is not None else build_specimen_mesh(
            g, cfg.h_fine, cfg.h_coarse, ell=cfg.materials.ell)
        self.tm = TransportModel(self.mesh, cfg.transport, cfg.chemistry)
        self.mm = MechanicsModel(self.mesh, cfg.materials, cfg.residual_stiffness)
        self.bc = specimen_bcs(self.mesh, g)
        self.rebar_edges = self.mesh.edges(Tag.REBAR)
        self.comp = composition(cfg.i_a, cfg.chemistry) if cfg.i_a > 0.0 else \
            composition(cfg.chemistry.i_a_ref, cfg.chemistry)
        self.kappa = cfg.kappa_override if cfg.kappa_override is not None else self.comp.kappa
        self.alpha = g.shape_factor
        self.transport = TransportState.initial(self.mesh.n_nodes, cfg.transport)
        self.mech = self.mm.initial_state(len(self.rebar_edges))
        self.t = 0.0
        self.fe_released = 0.0
        self.fe_influx = 0.0
        self.k_f = 1.0
        self.phi_prev: Optional[np.ndarray] = None
        self.dt_prev = 0.0

    # -- physics ----------------------------------------------------------
    def edge_pressure(self, phi: np.ndarray, t_cor: float):
        """Per-edge rust-layer wall displacement ``u_c`` and pressure ``p``."""
        mat = self.cfg.materials
        phi_mid = phi[self.rebar_edges].mean(axis=1)
        g, _ = degradation(phi_mid, self.mm.sp)
        E_d = np.maximum(g, E_DAMAGED_FLOOR) * mat.E_c
        C_c = compliance(self.cfg.geometry.rebar_radius, self.alpha, mat.nu_c, E_d)
        return rust_layer_pressure(np.full(C_c.shape, t_cor), self.kappa, C_c, mat.K_r)

    def wall_stiffness(self, t_cor: float, u_c: np.ndarray, p: np.ndarray,
                       mech: MechState) -> np.ndarray:
        """Tangent stiffness ``K_r / (t_cor + u_c)`` of the rust layer on each REBAR edge.

        Edges where the previous wall position already leaves the rust
        layer in tension have lost contact and get no spring.
        """
        if not self.cfg.rust_contact or t_cor <= 0.0:
            return np.zeros_like(u_c)
        k = self.cfg.materials.K_r / (t_cor + u_c)
        u_n = wall_opening(self.mesh, self.rebar_edges, self.bc.pressure_center, mech.u, mech.u_steel)
        return np.where(p + k * (u_c - u_n) > 0.0, k, 0.0)

    def eigenstrain(self, tr: TransportState) -> np.ndarray:
        el = self.mesh.elements
        S_r = tr.S_r[el].mean(axis=1)
        th_r = tr.theta_r[el].mean(axis=1)
        return precipitation_eigenstrain(S_r, self.cfg.materials, th_r, self.kappa)

    def crack_width(self, mech: Optional[MechState] = None) -> float:
        mech = mech or self.mech
        return surface_crack_width(self.mm, mech.u, mech.phi, mech.eps_star)


def predicted_phase_field(sim: Simulation, dt: float) -> np.ndarray:
    """Phase field used by the elasticity solve of the next step.

    ``"lagged"`` takes the last accepted field; ``"extrapolate"`` extends the
    last increment linearly in time, clipped to ``[phi, 1]``, which removes
    the first-order lag of the staggered coupling.
    """
    phi = sim.mech.phi
    if sim.cfg.phi_predictor == "lagged" or sim.phi_prev is None or sim.dt_prev <= 0.0:
        return phi
    return np.clip(phi + (dt / sim.dt_prev) * (phi - sim.phi_prev), phi, 1.0)


def staggered_step(sim: Simulation, dt: float) -> StepOutcome:
    """One staggered pass; raises :class:`StepRejected` if the step is unusable.

    Order: corrosion penetration, transport, rust-layer pressure,
    eigenstrain, elasticity, history, phase field.
    """
    cfg = sim.cfg
    old = sim.mech
    t_cor = old.t_cor + cfg.penetration_rate * dt
    tr, info = step_transport(sim.tm, sim.transport, old.phi, dt, cfg.i_a, sim.comp, t_cor)
    phi_m = predicted_phase_field(sim, dt)
    u_c, p = sim.edge_pressure(phi_m, t_cor)
    eps_star = sim.eigenstrain(tr)
    k_wall = sim.wall_stiffness(t_cor, u_c, p, old)
    u, u_steel = solve_elasticity_rust_layer(sim.mm, phi_m, eps_star, sim.bc, p, u_c, k_wall)
    H = update_history(sim.mm, u, eps_star, old.H)
    pf = solve_phase_field(sim.mm, H, old.phi)
    mech = MechState(u, pf.phi, H, p, u_c, t_cor, eps_star, u_steel)
    return StepOutcome(tr, mech, info.k_f, info.influx, info.released,
                       float(np.max(pf.phi - old.phi, initial=0.0)),
                       info.max_dtheta_l / cfg.transport.p0, pf.iterations)


@dataclass
class RunResult:
    series: TimeSeries
    sim: Simulation
    accepted: int
    rejected: int
    forced: int


def run_case(cfg: CaseConfig, mesh: Optional[Mesh] = None,
             on_record: Optional[Callable[[Simulation, int], None]] = None) -> RunResult:
    """March a case to its stopping criterion with adaptive time steps.

    A rejected step is retried with half the step.  If the phase-field
    increment is still too large at ``dt_min`` the step is accepted anyway
    (crack growth beyond that point is unstable and not resolvable in time);
    a phase-field solver failure at ``dt_min`` is fatal.
    """
    sim = Simulation(cfg, mesh)
    dt_min, dt, dt_max = cfg.time_steps()
    series = TimeSeries()
    rate = cfg.penetration_rate

    def finished() -> bool:
        if cfg.t_cor_end is not None:
            return sim.mech.t_cor >= cfg.t_cor_end * (1.0 - 1e-12)
        return sim.t >= cfg.t_end * (1.0 - 1e-12)

    def remaining() -> float:
        if cfg.t_cor_end is not None:
            return (cfg.t_cor_end - sim.mech.t_cor) / rate
        return cfg.t_end - sim.t

    def record(out_dt: float) -> None:
        inv = inventory(sim.tm, sim.transport)
        err = abs(inv - sim.fe_influx) / sim.fe_influx if sim.fe_influx > 0.0 else 0.0
        series.append(t=sim.t, t_cor=sim.mech.t_cor, w=sim.crack_width(),
                      p_max=float(sim.mech.p_rebar.max(initial=0.0)),
                      phi_max=float(sim.mech.phi.max(initial=0.0)),
                      fe_released=sim.fe_released, fe_influx=sim.fe_influx,
                      mass_error=err, k_f=sim.k_f, dt=out_dt)

    record(0.0)
    if on_record:
        on_record(sim, 0)
    accepted = rejected = forced = streak = 0
    while not finished():
        if accepted >= cfg.max_steps:
            raise NumericalError(f"step limit {cfg.max_steps} reached")
        step = min(dt, remaining())
        last = step >= remaining() * (1.0 - 1e-12)
        try:
            out = staggered_step(sim, step)
            bad = out.dphi > cfg.dphi_max or out.dtheta > cfg.dtheta_max
            if bad and step > dt_min * (1.0 + 1e-9):
                raise StepRejected(f"dphi={out.dphi:.3f} dtheta={out.dtheta:.3f}")
            if bad:
                forced += 1
        except StepRejected as exc:
            if step <= dt_min * (1.0 + 1e-9):
                raise NumericalError(f"no convergence at dt_min={dt_min:.3e} s: {exc}") from exc
            rejected += 1
            streak = 0
            dt = max(0.5 * step, dt_min)
            log.debug("step rejected at t=%.4g (%s); dt -> %.3g", sim.t, exc, dt)
            continue
        sim.phi_prev, sim.dt_prev = sim.mech.phi, step
        sim.transport, sim.mech = out.transport, out.mech
        sim.t += step
        if last and cfg.t_cor_end is not None:
            sim.mech.t_cor = cfg.t_cor_end
        sim.fe_released += out.released
        sim.fe_influx += out.influx
        sim.k_f = out.k_f
        accepted += 1
        streak += 1
        if streak >= cfg.grow_after:
            dt = min(dt * cfg.grow_factor, dt_max)
            streak = 0
        if accepted % cfg.record_every == 0 or finished():
            record(step)
            if series.rows[-1][RECORD_COLUMNS.index("mass_error")] > 0.01:
                raise NumericalError("iron mass balance error exceeds 1%")
            if on_record:
                on_record(sim, accepted)
    return RunResult(series, sim, accepted, rejected, forced)
