"""Shared fixtures: structured strip meshes and small, fast case configurations."""
import numpy as np
import pytest

from corrocrack.chemistry import UA_CM2
from corrocrack.mechanics import MaterialSet
from corrocrack.mesh import Mesh, SpecimenGeometry, Tag
from corrocrack.solver import CaseConfig


def strip_mesh(nx: int, length: float, width: float, left=Tag.REBAR) -> Mesh:
    """One row of ``nx`` square-ish cells split into two triangles each.

    The left end is tagged ``left``; the right end RIGHT, the long sides
    BOTTOM and TOP.
    """
    x = np.linspace(0.0, length, nx + 1)
    nodes = np.vstack([np.column_stack([x, np.zeros_like(x)]),
                       np.column_stack([x, np.full_like(x, width)])])
    b = np.arange(nx)
    t = b + nx + 1
    elements = np.vstack([np.column_stack([b, b + 1, t + 1]),
                          np.column_stack([b, t + 1, t])])
    edges = np.vstack([np.column_stack([b, b + 1]),
                       np.column_stack([t, t + 1]),
                       [[0, nx + 1]], [[nx, 2 * nx + 1]]])
    tags = np.concatenate([np.full(nx, int(Tag.BOTTOM)), np.full(nx, int(Tag.TOP)),
                           [int(left)], [int(Tag.RIGHT)]])
    return Mesh(nodes, elements, edges, tags, length / nx)


@pytest.fixture
def strip():
    return strip_mesh


COARSE = dict(h_fine=2e-3, h_coarse=1e-2)


def coarse_case(i_uA=100.0, t_cor_end=2e-6, **kw) -> CaseConfig:
    """A quick case on a coarse mesh (ell enlarged to keep the h <= ell/5 rule)."""
    mat = kw.pop("materials", MaterialSet(ell=1e-2))
    return CaseConfig(geometry=SpecimenGeometry(), materials=mat, i_a=i_uA * UA_CM2,
                      t_cor_end=t_cor_end, **{**COARSE, **kw})


@pytest.fixture
def coarse():
    return coarse_case


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
