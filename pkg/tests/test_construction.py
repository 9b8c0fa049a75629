import numpy as np
import pytest
import scipy.ndimage as ndi

from ifslab.construction import (
    ConstructionParams,
    attractor,
    build_construction,
    check_absorbing,
    construction_report,
    hutchinson_step,
)
from ifslab.errors import ConstructionError, ValidationError
from ifslab.geometry import (
    Disk,
    GridSet,
    diameter,
    rasterize_disk,
    sample_cells,
    volume,
)
from ifslab.maps import SystemSpec, complex_eigenvalue_check
from ifslab.seeding import rng_from

RES = 512


@pytest.fixture(scope="module")
def reference():
    params = ConstructionParams(kappa=0.76, theta_deg=179.0, delta=1.0)
    return build_construction(params, resolution=RES)


@pytest.fixture(scope="module")
def reference_attractor(reference):
    cell = 2 * reference.absorbing_ball.radius * (1 + 8 / RES) / RES
    return attractor(reference.system, reference.absorbing_ball, tol=2 * cell, resolution=RES)


def test_params_validation():
    with pytest.raises(ValidationError):
        ConstructionParams(kappa=0.7)
    with pytest.raises(ValidationError):
        ConstructionParams(kappa=0.76, delta=-1.0)


def test_reference_cover(reference):
    # anchor count found by the rasterized cover check at this resolution
    assert reference.cover_verified
    assert reference.k == 8
    assert reference.uncovered_fraction == 0.0


def test_larger_kappa_needs_fewer_anchors(reference):
    res = build_construction(ConstructionParams(kappa=0.999), resolution=RES)
    assert res.cover_verified
    assert res.k < reference.k


def test_scale_equivariance(reference):
    doubled = build_construction(
        ConstructionParams(kappa=0.76, theta_deg=179.0, delta=2.0), resolution=RES
    )
    assert doubled.k == reference.k
    # the construction commutes with dilation, exactly at the bit level
    anchors = np.array(reference.anchors)
    assert np.array_equal(np.array(doubled.anchors), 2.0 * anchors)


def test_cover_failure_reports_uncovered():
    params = ConstructionParams(kappa=0.76, theta_deg=179.0, delta=1.0)
    with pytest.raises(ConstructionError) as exc:
        build_construction(params, resolution=RES, max_anchors=2)
    assert exc.value.uncovered_fraction > 0


def test_absorbing_reference(reference):
    chk = check_absorbing(reference.system, reference.absorbing_ball, RES)
    assert chk.absorbed
    assert chk.escape_distance == 0.0


def test_absorbing_single_contraction():
    from ifslab.maps import AffineSimilarity

    sys = SystemSpec((AffineSimilarity(0.76, 179.0, (0.0, 0.0)),))
    chk = check_absorbing(sys, Disk((0.0, 0.0), 3.0), RES)
    assert chk.absorbed


def test_absorbing_fails_for_tiny_ball(reference):
    chk = check_absorbing(reference.system, Disk((0.0, 0.0), 0.1), RES)
    assert not chk.absorbed
    assert chk.escape_distance > 0


def test_hutchinson_fixed_point_of_single_map():
    # anchor the contraction exactly at a cell center so its fixed point is
    # a grid point; the single-cell set is then a fixed point of the operator
    from ifslab.geometry import Domain
    from ifslab.maps import AffineSimilarity

    dom = Domain.planar((0.0, 1.0, 0.0, 1.0), 256)
    c = (128 + 0.5) / 256
    single = SystemSpec((AffineSimilarity(0.76, 179.0, (c, c)),))
    bits = np.zeros(dom.shape, bool)
    bits[128, 128] = True
    fixed = GridSet(dom, bits)
    stepped = hutchinson_step(single, fixed)
    assert stepped.equals(fixed)


def _ball_dom(reference, res):
    from ifslab.construction import _ball_domain

    return _ball_domain(reference.absorbing_ball, res)


def test_hutchinson_absorbing_subset(reference):
    dom = _ball_dom(reference, RES)
    u = rasterize_disk(dom, reference.absorbing_ball)
    stepped = hutchinson_step(reference.system, u)
    assert stepped.minus(u).is_empty()


def test_hutchinson_volume_bound(reference):
    dom = _ball_dom(reference, RES)
    a = rasterize_disk(dom, Disk((0.0, 0.0), 4.0))
    stepped = hutchinson_step(reference.system, a)
    s = len(reference.system.maps())
    kappa = reference.params.kappa
    ring = 2 * np.pi * 4.0 / dom.cell_sizes[0] * dom.cell_volume
    assert volume(stepped) <= s * kappa**2 * volume(a) + s * 2 * ring


def test_attractor_single_map_collapses(reference):
    single = SystemSpec((reference.system.generators[0],))
    cell = 2 * reference.absorbing_ball.radius * (1 + 8 / RES) / RES
    res = attractor(single, reference.absorbing_ball, tol=0.25 * cell, resolution=RES, max_iter=400)
    pts = res.attractor.included_points()
    assert len(pts) >= 1
    assert np.sqrt((pts**2).sum(-1)).max() <= 3 * cell


def test_attractor_iteration_count_bound(reference):
    cell = 2 * reference.absorbing_ball.radius * (1 + 8 / RES) / RES
    res = attractor(reference.system, reference.absorbing_ball, tol=cell, resolution=RES)
    u_diam = 2 * reference.absorbing_ball.radius
    bound = int(np.ceil(np.log(cell / u_diam) / np.log(reference.params.kappa))) + 5
    assert res.iterations <= bound


def test_attractor_contains_interior_disk(reference, reference_attractor):
    cell = reference_attractor.attractor.domain.max_cell_size
    probe = rasterize_disk(reference_attractor.attractor.domain, Disk((0.0, 0.0), 4 * cell))
    assert probe.minus(reference_attractor.attractor).is_empty()


def test_attractor_forward_invariant_up_to_one_cell(reference, reference_attractor):
    a = reference_attractor.attractor
    stepped = hutchinson_step(reference.system, a)
    dilated = GridSet(a.domain, ndi.binary_dilation(a.bitmap))
    assert stepped.minus(dilated).is_empty()


def test_attractor_scale_equivariance(reference, reference_attractor):
    params2 = ConstructionParams(kappa=0.76, theta_deg=179.0, delta=2.0)
    res2 = build_construction(params2, resolution=RES)
    cell2 = 2 * res2.absorbing_ball.radius * (1 + 8 / RES) / RES
    attr2 = attractor(res2.system, res2.absorbing_ball, tol=2 * cell2, resolution=RES)
    # doubling delta doubles every coordinate, so the bitmaps agree exactly
    assert np.array_equal(attr2.attractor.bitmap, reference_attractor.attractor.bitmap)


def test_generators_have_complex_eigenvalues_on_attractor(reference, reference_attractor):
    rng = rng_from(31)
    pts = sample_cells(reference_attractor.attractor, 100, rng)
    for g in reference.system.maps():
        assert complex_eigenvalue_check(g, pts)


def test_similarity_diameter_recurrence(reference):
    # for {T} alone the iterate diameters follow kappa^n exactly, up to cells
    single = SystemSpec((reference.system.generators[0],))
    dom = _ball_dom(reference, RES)
    current = rasterize_disk(dom, reference.absorbing_ball)
    kappa = reference.params.kappa
    d0 = diameter(current)
    cell_diag = dom.max_cell_size * np.sqrt(2)
    for n in range(1, 8):
        current = hutchinson_step(single, current)
        assert diameter(current) == pytest.approx(d0 * kappa**n, abs=3 * cell_diag)


def test_construction_report_fields(reference, reference_attractor):
    chk = check_absorbing(reference.system, reference.absorbing_ball, RES)
    report = construction_report(reference, chk, reference_attractor)
    assert set(report) == {
        "kappa",
        "theta",
        "delta",
        "k",
        "cover_verified",
        "absorbing_verified",
        "iterations",
        "final_hausdorff",
    }
    assert report["k"] == 8
    assert report["cover_verified"] and report["absorbing_verified"]
