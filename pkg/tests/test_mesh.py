import math

import numpy as np
import pytest

from corrocrack.errors import ConfigError, MeshError
from corrocrack.mesh import (Mesh, SpecimenGeometry, Tag, build_annulus_mesh, build_specimen_mesh,
                             load_mesh, save_mesh)


@pytest.fixture(scope="module")
def specimen():
    return build_specimen_mesh(SpecimenGeometry(), 2e-3, 1e-2, ell=1e-2)


class TestGeometry:
    def test_center_default(self):
        assert SpecimenGeometry().rebar_center == pytest.approx((0.075, 0.122))

    def test_center_thick_cover(self):
        assert SpecimenGeometry(cover=0.04).rebar_center == pytest.approx((0.075, 0.102))

    def test_shape_factor(self):
        assert SpecimenGeometry().shape_factor == pytest.approx(3.5)

    def test_negative_cover_rejected(self):
        with pytest.raises(ConfigError, match="cover"):
            SpecimenGeometry(cover=-0.01)

    def test_bar_must_fit(self):
        with pytest.raises(ConfigError):
            SpecimenGeometry(cover=0.14)


class TestSpecimenMesh:
    def test_area(self, specimen):
        expected = 0.15 * 0.15 - math.pi * 0.008 ** 2
        assert specimen.signed_areas().sum() == pytest.approx(expected, rel=1e-3)

    def test_positive_orientation(self, specimen):
        assert np.all(specimen.signed_areas() > 0.0)

    def test_rebar_perimeter(self, specimen):
        assert specimen.edge_lengths(Tag.REBAR).sum() == pytest.approx(2 * math.pi * 0.008, rel=2e-3)

    def test_outer_edges_tagged(self, specimen):
        assert specimen.edge_lengths(Tag.TOP).sum() == pytest.approx(0.15, rel=1e-12)
        assert specimen.edge_lengths(Tag.BOTTOM).sum() == pytest.approx(0.15, rel=1e-12)
        assert specimen.edge_lengths(Tag.LEFT).sum() == pytest.approx(0.15, rel=1e-12)

    def test_rebar_nodes_on_circle(self, specimen):
        xc, yc = SpecimenGeometry().rebar_center
        p = specimen.nodes[specimen.boundary_nodes(Tag.REBAR)]
        assert np.allclose(np.hypot(p[:, 0] - xc, p[:, 1] - yc), 0.008, rtol=1e-9)

    def test_quality(self, specimen):
        specimen.validate()
        assert specimen.min_angles().min() >= 20.0

    def test_fine_zone_above_bar(self, specimen):
        xc, yc = SpecimenGeometry().rebar_center
        mid = specimen.nodes[specimen.elements].mean(axis=1)
        cover_strip = (np.abs(mid[:, 0] - xc) < 0.006) & (mid[:, 1] > yc + 0.009)
        assert specimen.element_edge_lengths()[cover_strip].max() <= 2e-3 * 1.5

    def test_deterministic(self):
        a = build_specimen_mesh(SpecimenGeometry(), 2e-3, 1e-2)
        b = build_specimen_mesh(SpecimenGeometry(), 2e-3, 1e-2)
        assert np.array_equal(a.nodes, b.nodes) and np.array_equal(a.elements, b.elements)

    def test_length_scale_rule(self):
        with pytest.raises(ConfigError, match="ell"):
            build_specimen_mesh(SpecimenGeometry(), 2e-3, 1e-2, ell=5e-3)

    def test_bad_sizes(self):
        with pytest.raises(ConfigError):
            build_specimen_mesh(SpecimenGeometry(), 1e-2, 2e-3)

    def test_round_trip(self, specimen, tmp_path):
        path = tmp_path / "m.npz"
        save_mesh(specimen, path)
        back = load_mesh(path)
        assert np.array_equal(back.nodes, specimen.nodes)
        assert np.array_equal(back.edge_tags, specimen.edge_tags)


class TestAnnulus:
    def test_area_and_tags(self):
        m = build_annulus_mesh(0.008, 0.016, 0.008 / 16)
        assert m.signed_areas().sum() == pytest.approx(math.pi * (0.016 ** 2 - 0.008 ** 2), rel=1e-3)
        assert m.edge_lengths(Tag.INNER).sum() == pytest.approx(2 * math.pi * 0.008, rel=1e-3)
        assert m.edge_lengths(Tag.OUTER).sum() == pytest.approx(2 * math.pi * 0.016, rel=1e-3)

    def test_invalid_radii(self):
        with pytest.raises(ConfigError):
            build_annulus_mesh(0.02, 0.01, 1e-3)


class TestValidation:
    def test_strip_is_valid(self, strip):
        m = strip(10, 1.0, 0.1)
        m.validate(min_angle=None)
        assert m.signed_areas().sum() == pytest.approx(0.1)

    def test_inverted_element_detected(self, strip):
        m = strip(4, 1.0, 0.25)
        bad = Mesh(m.nodes, m.elements[:, ::-1].copy(), m.boundary_edges, m.edge_tags, m.target_h)
        with pytest.raises(MeshError):
            bad.validate(min_angle=None)
