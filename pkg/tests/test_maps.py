import numpy as np
import pytest

from ifslab.errors import (
    AlphabetError,
    DimensionError,
    ValidationError,
)
from ifslab.maps import (
    AffineSimilarity,
    CircleNorthSouth,
    CircleRotation,
    Composed,
    Perturbed,
    SystemSpec,
    Word,
    apply_word,
    complex_eigenvalue_check,
    format_system,
    parse_system,
    word_jacobian_det,
    word_map,
)
from ifslab.seeding import rng_from


def fd_jacobian(m, x, h=1e-5):
    """Central-difference Jacobian, wrap-aware on the circle."""
    if m.kind == "circle":
        d = (m.eval(x + h) - m.eval(x - h) + 0.5) % 1.0 - 0.5
        return d / (2 * h)
    x = np.asarray(x, dtype=float)
    cols = []
    for axis in range(2):
        e = np.zeros(2)
        e[axis] = h
        cols.append((m.eval(x + e) - m.eval(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def sample_maps():
    return [
        AffineSimilarity(0.76, 179.0, (0.0, 0.0)),
        AffineSimilarity(0.9, 45.0, (0.3, -0.2)),
        CircleRotation(0.6180339887498949),
        CircleNorthSouth(0.7, 0.0),
        CircleNorthSouth(0.6, 0.37),
        Perturbed(AffineSimilarity(0.8, 120.0, (0.1, 0.1)), 0.02, seed=3),
        Perturbed(CircleNorthSouth(0.7, 0.0), 0.01, seed=4),
    ]


@pytest.mark.parametrize("m", sample_maps(), ids=lambda m: type(m).__name__)
def test_jacobian_matches_finite_differences(m):
    rng = rng_from(11)
    for _ in range(100):
        if m.kind == "circle":
            x = float(rng.uniform(0, 1))
        else:
            x = rng.uniform(-2, 2, size=2)
        j = m.jacobian(x)
        fd = fd_jacobian(m, x)
        scale = max(float(np.max(np.abs(j))), 1e-6)
        assert np.max(np.abs(j - fd)) <= 1e-4 * scale


@pytest.mark.parametrize("m", sample_maps(), ids=lambda m: type(m).__name__)
def test_inverse_roundtrip(m):
    rng = rng_from(12)
    if m.kind == "circle":
        xs = rng.uniform(0, 1, size=200)
        back = m.inverse().eval(m.eval(xs))
        err = np.abs((back - xs + 0.5) % 1.0 - 0.5)
    else:
        xs = rng.uniform(-2, 2, size=(200, 2))
        err = np.abs(m.inverse().eval(m.eval(xs)) - xs)
    assert err.max() < 1e-9


def test_affine_fixed_point_and_anchor():
    t = AffineSimilarity(0.76, 179.0, (0.0, 0.0))
    assert np.allclose(t.eval(np.zeros(2)), np.zeros(2))
    rng = rng_from(3)
    for _ in range(10):
        y = tuple(rng.uniform(-1, 1, size=2))
        s = AffineSimilarity(0.76, 179.0, y)
        assert np.allclose(s.eval(np.array(y)), np.array(y))


def test_affine_jacobian_is_scaled_rotation():
    t = AffineSimilarity(0.5, 90.0)
    j = t.jacobian(np.zeros(2))
    assert np.allclose(j, [[0.0, -0.5], [0.5, 0.0]], atol=1e-15)
    det = j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0]
    assert det == pytest.approx(0.25)


def test_rotation_translation_mod_one():
    r = CircleRotation(0.25)
    assert r.eval(0.5) == pytest.approx(0.75)
    assert r.eval(0.9) == pytest.approx(0.15)
    assert np.all(r.jacobian(np.linspace(0, 1, 50)) == 1.0)


def test_north_south_multipliers():
    ns = CircleNorthSouth(0.7, 0.0)
    assert ns.eval(0.0) == pytest.approx(0.0, abs=1e-15)
    assert ns.eval(0.5) == pytest.approx(0.5, abs=1e-15)
    assert ns.jacobian(0.0) == pytest.approx(0.7)
    assert ns.jacobian(0.5) == pytest.approx(1 / 0.7)
    inv = ns.inverse()
    assert inv.jacobian(0.5) == pytest.approx(0.7)
    # derivative product at the two fixed points is 1 for the conjugated model
    assert ns.jacobian(0.0) * ns.jacobian(0.5) == pytest.approx(1.0, abs=1e-6)


def test_north_south_monotone_degree_one():
    ns = CircleNorthSouth(0.7, 0.2)
    xs = np.linspace(0, 1, 2000, endpoint=False)
    vals = ns.eval(xs)
    lifted = np.unwrap(vals * 2 * np.pi) / (2 * np.pi)
    assert np.all(np.diff(lifted) > 0)
    assert lifted[-1] - lifted[0] < 1.0


def test_complex_eigenvalue_check():
    x = np.array([0.3, 0.4])
    assert complex_eigenvalue_check(AffineSimilarity(0.76, 179.0), x)
    assert not complex_eigenvalue_check(AffineSimilarity(0.76, 180.0), x)
    assert not complex_eigenvalue_check(AffineSimilarity(0.76, 0.0), x)
    with pytest.raises(DimensionError):
        complex_eigenvalue_check(CircleRotation(0.25), 0.1)


def test_perturbed_c1_contract():
    # sup|f - base| <= amplitude and sup|Df - Dbase| <= amplitude on 1e4 points
    rng = rng_from(9)
    amp = 0.03
    base = AffineSimilarity(0.8, 150.0, (0.2, 0.0))
    p = Perturbed(base, amp, seed=21)
    pts = rng.uniform(-3, 3, size=(10_000, 2))
    val_gap = np.sqrt(((p.eval(pts) - base.eval(pts)) ** 2).sum(-1))
    assert val_gap.max() <= amp + 1e-12
    jac_gap = p.jacobian(pts) - base.jacobian(pts)
    frob = np.sqrt((jac_gap**2).sum(axis=(-2, -1)))
    assert frob.max() <= amp + 1e-12

    ns = CircleNorthSouth(0.7, 0.0)
    pc = Perturbed(ns, amp, seed=22)
    xs = rng.uniform(0, 1, size=10_000)
    vg = np.abs((pc.eval(xs) - ns.eval(xs) + 0.5) % 1.0 - 0.5)
    assert vg.max() <= amp + 1e-12
    assert np.abs(pc.jacobian(xs) - ns.jacobian(xs)).max() <= amp + 1e-12


def test_perturbed_amplitude_zero_is_identity_perturbation():
    base = CircleNorthSouth(0.7, 0.0)
    p = Perturbed(base, 0.0, seed=5)
    xs = np.linspace(0, 1, 100, endpoint=False)
    assert np.allclose(p.eval(xs), base.eval(xs))


def test_word_validation():
    with pytest.raises(ValidationError):
        Word((1, 2), "sideways")
    with pytest.raises(AlphabetError):
        Word((0, 1))


@pytest.fixture
def two_gen():
    return SystemSpec(
        (
            AffineSimilarity(0.76, 179.0, (0.0, 0.0)),
            AffineSimilarity(0.76, 179.0, (0.75, 0.0)),
        )
    )


def test_apply_word_identity_and_single(two_gen):
    x = np.array([0.3, -0.2])
    assert np.allclose(apply_word(two_gen, Word(()), x), x)
    for direction in ("forward", "reverse"):
        got = apply_word(two_gen, Word((1,), direction), x)
        assert np.allclose(got, two_gen.maps()[0].eval(x))


def test_apply_word_directions(two_gen):
    x = np.array([0.3, -0.2])
    g1, g2 = two_gen.maps()
    fwd = apply_word(two_gen, Word((1, 2), "forward"), x)
    rev = apply_word(two_gen, Word((1, 2), "reverse"), x)
    assert np.allclose(fwd, g2.eval(g1.eval(x)))
    assert np.allclose(rev, g1.eval(g2.eval(x)))


def test_apply_word_palindrome_agrees(two_gen):
    x = np.array([0.1, 0.4])
    w = (1, 2, 1)
    fwd = apply_word(two_gen, Word(w, "forward"), x)
    rev = apply_word(two_gen, Word(w, "reverse"), x)
    assert np.allclose(fwd, rev)


def test_apply_word_concatenation_is_composition(two_gen):
    rng = rng_from(17)
    for _ in range(20):
        x = rng.uniform(-1, 1, size=2)
        w = tuple(rng.integers(1, 3, size=rng.integers(0, 8)))
        v = tuple(rng.integers(1, 3, size=rng.integers(0, 8)))
        lhs = apply_word(two_gen, Word(w + v, "forward"), x)
        rhs = apply_word(two_gen, Word(v, "forward"), apply_word(two_gen, Word(w, "forward"), x))
        assert np.allclose(lhs, rhs)


def test_apply_word_alphabet_error(two_gen):
    with pytest.raises(AlphabetError):
        apply_word(two_gen, Word((3,)), np.zeros(2))


def test_word_jacobian_det_product(two_gen):
    x = np.array([0.2, 0.1])
    assert word_jacobian_det(two_gen, Word(()), x) == 1.0
    w = Word(tuple(rng_from(8).integers(1, 3, size=12)), "forward")
    assert word_jacobian_det(two_gen, w, x) == pytest.approx(0.76**24, rel=1e-12)
    # affine: value independent of the base point
    y = np.array([-0.4, 0.9])
    assert word_jacobian_det(two_gen, w, x) == word_jacobian_det(two_gen, w, y)


def test_word_jacobian_det_chain_rule(two_gen):
    rng = rng_from(23)
    for _ in range(20):
        x = rng.uniform(-1, 1, size=2)
        n = int(rng.integers(1, 21))
        w = tuple(int(s) for s in rng.integers(1, 3, size=n))
        head, tail = w[0], w[1:]
        lhs = word_jacobian_det(two_gen, Word(w, "forward"), x)
        step = two_gen.maps()[head - 1].eval(x)
        rhs = word_jacobian_det(two_gen, Word((head,), "forward"), x) * word_jacobian_det(
            two_gen, Word(tail, "forward"), step
        )
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_word_map_matches_apply(two_gen):
    x = np.array([0.05, -0.3])
    w = Word((2, 1, 1, 2), "reverse")
    assert np.allclose(word_map(two_gen, w).eval(x), apply_word(two_gen, w, x))


def test_composed_jacobian_chain():
    a = AffineSimilarity(0.76, 179.0)
    b = AffineSimilarity(0.9, 30.0, (0.5, 0.5))
    comp = Composed((a, b))
    x = np.array([0.3, 0.2])
    expected = b.jacobian(a.eval(x)) @ a.jacobian(x)
    assert np.allclose(comp.jacobian(x), expected)
    assert np.allclose(comp.inverse().eval(comp.eval(x)), x)


def test_newton_inverse_jacobian_matches_finite_differences():
    rng = rng_from(19)
    for base, planar in (
        (Perturbed(AffineSimilarity(0.8, 120.0, (0.1, 0.1)), 0.02, seed=3), True),
        (Perturbed(CircleNorthSouth(0.7, 0.0), 0.01, seed=4), False),
    ):
        inv = base.inverse()
        for _ in range(30):
            w = rng.uniform(-1, 1, size=2) if planar else float(rng.uniform(0, 1))
            j = inv.jacobian(w)
            fd = fd_jacobian(inv, w)
            scale = max(float(np.max(np.abs(j))), 1e-6)
            assert np.max(np.abs(j - fd)) <= 1e-4 * scale


def test_word_det_matches_composed_log_det():
    gens = (
        Perturbed(AffineSimilarity(0.8, 150.0, (0.2, 0.0)), 0.05, seed=31),
        AffineSimilarity(0.76, 179.0),
    )
    sys = SystemSpec(gens)
    rng = rng_from(37)
    for direction in ("forward", "reverse"):
        w = Word(tuple(rng.integers(1, 3, size=9)), direction)
        x = rng.uniform(-1, 1, size=2)
        via_chain = word_jacobian_det(sys, w, x)
        via_map = word_map(sys, w).log_abs_det(x)
        assert np.log(abs(via_chain)) == pytest.approx(float(via_map), rel=1e-10)


def test_system_include_inverses():
    sys = SystemSpec((CircleRotation(0.3),), include_inverses=True)
    assert sys.alphabet_size == 2
    x = 0.7
    assert sys.maps()[1].eval(sys.maps()[0].eval(x)) == pytest.approx(x)


def test_parse_and_format_roundtrip():
    text = (
        "affine kappa=0.76 theta=179.0 anchor=0.0,0.0\n"
        "affine kappa=0.76 theta=179.0 anchor=0.75,0.0\n"
        "inverses=false\n"
    )
    sys = parse_system(text)
    assert sys.alphabet_size == 2
    again = parse_system(format_system(sys))
    assert again == sys


def test_parse_perturb_consumes_base():
    text = (
        "moebius lambda=0.7 pole=0.0\n"
        "rotation angle=0.618\n"
        "perturb base=1 amp=0.01 seed=42\n"
        "perturb base=2 amp=0.01 seed=43\n"
    )
    sys = parse_system(text)
    assert sys.alphabet_size == 2
    assert all(type(g).__name__ == "Perturbed" for g in sys.generators)
    again = parse_system(format_system(sys))
    assert again == sys


def test_parse_validation_errors():
    with pytest.raises(ValidationError):
        parse_system("affine kappa=1.2 theta=10\n")
    with pytest.raises(ValidationError):
        parse_system("moebius lambda=0.4\n")
    with pytest.raises(ValidationError):
        parse_system("perturb base=1 amp=0.01\n")
    with pytest.raises(ValidationError):
        parse_system("waffle size=9\n")
    with pytest.raises(ValidationError):
        parse_system("rotation angle=0.1\nmoebius lambda=0.7\ninverses=maybe\n")
