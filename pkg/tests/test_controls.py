import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from galerkin_bilinear.controls import (
    Control, absolute_integral, concatenate, constant, control_from_json, control_to_json,
    density_part, mollify_atom, random_control_family, sample_bv, signed_integral,
    total_mass, total_variation,
)


@st.composite
def controls(draw, with_atoms=True):
    pieces = draw(st.integers(1, 6))
    T = draw(st.floats(0.1, 5.0))
    cuts = sorted(set(draw(st.lists(st.integers(1, 99), min_size=pieces - 1,
                                    max_size=pieces - 1))))
    bp = (0.0, *[T * c / 100 for c in cuts], T)
    values = draw(st.lists(st.floats(-5, 5), min_size=len(bp) - 1, max_size=len(bp) - 1))
    atoms = ()
    if with_atoms:
        times = sorted(set(draw(st.lists(st.integers(1, 100), max_size=3))))
        atoms = tuple((T if t == 100 else T * t / 100, draw(st.floats(-3, 3))) for t in times)
    return Control(T, bp, tuple(values), atoms)


def test_invariants_enforced():
    with pytest.raises(ValueError):
        Control(1.0, (0.0, 0.5, 0.5, 1.0), (1, 2, 3))
    with pytest.raises(ValueError):
        Control(1.0, (0.1, 1.0), (1,))
    with pytest.raises(ValueError):
        Control(1.0, (0.0, 1.0), (1,), ((0.0, 1.0),))
    with pytest.raises(ValueError):
        Control(1.0, (0.0, 1.0), (1,), ((0.5, 1.0), (0.5, 2.0)))
    with pytest.raises(ValueError):
        Control(1.0, (0.0, 1.0), (1, 2))
    Control(1.0, (0.0, 1.0), (1,), ((1.0, 1.0),))


def test_total_variation_examples():
    assert total_variation(constant(3.0, 1.0)) == 0
    assert total_variation(Control(1.0, (0, 0.5, 1), (0, 1))) == 1
    assert total_variation(Control(1.0, (0, 0.3, 0.6, 1), (0, 2, -1))) == 5
    with pytest.raises(ValueError):
        total_variation(Control(1.0, (0, 1), (0,), ((0.5, 1.0),)))


def test_signed_integral_examples():
    assert signed_integral(constant(1.0, 2.0), 2.0) == 2
    assert signed_integral(Control(1.0, (0, 1), (0,), ((0.5, -2.0),)), 1.0) == -2
    assert signed_integral(Control(1.0, (0, 0.5, 1), (1, -1)), 1.0) == 0
    c = Control(1.0, (0, 1), (0,), ((0.5, -2.0),))
    assert signed_integral(c, 0.49) == 0
    assert signed_integral(c, 0.5) == -2
    with pytest.raises(ValueError):
        signed_integral(c, 1.5)


def test_total_mass_examples():
    assert total_mass(constant(-2.0, 3.0)) == 6
    assert total_mass(Control(1.0, (0, 1), (0,), ((0.2, 1.0), (0.7, -1.0)))) == 2
    assert total_mass(Control(1.0, (0, 0.5, 1), (1, -1), ((0.8, 0.5),))) == 1.5


def test_value_at_is_right_continuous():
    c = Control(1.0, (0, 0.5, 1), (1, -1))
    assert c.value_at(0.0) == 1
    assert c.value_at(0.4999) == 1
    assert c.value_at(0.5) == -1
    assert c.value_at(1.0) == -1


def test_sample_bv_examples():
    c = sample_bv(lambda t: 2.5, np.linspace(0, 1, 6))
    assert set(c.values) == {2.5} and total_variation(c) == 0
    c = sample_bv(lambda t: t, [0, 0.25, 0.5, 0.75, 1.0])
    assert c.values == (0, 0.25, 0.5, 0.75)
    assert total_variation(c) == 0.75
    with pytest.raises(ValueError):
        sample_bv(lambda t: t, [0, 0.5, 0.4, 1.0])


def test_sample_bv_sine_tv_increases_to_four():
    u = lambda t: math.sin(2 * math.pi * t)
    sizes = [2**j for j in range(2, 12)]
    tvs = [total_variation(sample_bv(u, np.linspace(0, 1, m + 1))) for m in sizes]
    assert all(b >= a - 1e-12 for a, b in zip(tvs, tvs[1:]))
    assert all(tv <= 4 + 1e-12 for tv in tvs)
    # u(T) is never sampled: the last branch misses about |u'| / m = 2 pi / m
    for m, tv in zip(sizes, tvs):
        assert 4 - tv <= 2 * math.pi / m


@given(st.lists(st.floats(0.001, 0.999), min_size=1, max_size=20, unique=True),
       st.lists(st.floats(0.001, 0.999), max_size=20, unique=True))
def test_sample_bv_refinement_monotone(coarse, extra):
    u = lambda t: math.sin(7 * t) + 0.3 * math.cos(19 * t)
    p = sorted({0.0, 1.0, *coarse})
    q = sorted(set(p) | set(extra))
    assert total_variation(sample_bv(u, q)) >= total_variation(sample_bv(u, p)) - 1e-12


def test_mollify_atom_examples():
    z = mollify_atom((0.5, 0.0), 0.1, horizon=1.0)
    assert all(v == 0 for v in z.values)
    c = mollify_atom((0.5, 1.0), 0.1, horizon=1.0)
    assert c.value_at(0.45) == pytest.approx(10.0)
    assert c.value_at(0.39) == 0 and c.value_at(0.5) == 0
    assert c.breakpoints[1] == pytest.approx(0.4)
    for h in (0.5, 0.1, 0.05, 0.025, 1e-3):
        c = mollify_atom((0.5, -1.7), h, horizon=1.0)
        # one rounding in the pulse height and one in its length
        assert total_mass(c) == pytest.approx(1.7, rel=4e-16 * 4)
        assert signed_integral(c, 1.0) == pytest.approx(-1.7, rel=4e-16 * 4)
    with pytest.raises(ValueError):
        mollify_atom((0.05, 1.0), 0.1, horizon=1.0)
    with pytest.raises(ValueError):
        mollify_atom((0.5, 1.0), 0.0, horizon=1.0)


def test_random_family_contract():
    a = random_control_family(3, 2.0, 1.5, 7, 10)
    b = random_control_family(3, 2.0, 1.5, 7, 10)
    assert a == b
    assert random_control_family(4, 2.0, 1.5, 7, 10) != a
    for c in a:
        assert c.pieces == 7 and c.horizon == 1.5
        assert total_variation(c) <= 2.0 + 1e-12
        assert total_mass(c) <= 2.0 * 1.5 + 1e-12
    for c in random_control_family(3, 0.0, 1.0, 5, 4):
        assert len(set(c.values)) == 1
    # members depend on (seed, index) only
    assert random_control_family(3, 2.0, 1.5, 7, 3) == a[:3]
    capped = random_control_family(3, 5.0, 1.0, 7, 10, amplitude_cap=0.5)
    assert all(c.sup_norm() <= 0.5 for c in capped)


@given(controls())
def test_signed_integral_bounded_by_mass(c):
    for t in np.linspace(0, c.horizon, 9):
        assert abs(signed_integral(c, t)) <= total_mass(c) + 1e-12
        assert absolute_integral(c, t) <= total_mass(c) + 1e-12


@given(controls(), controls())
def test_signed_integral_additive_under_concatenation(a, b):
    ab = concatenate(a, b)
    total = signed_integral(a) + signed_integral(b)
    assert signed_integral(ab) == pytest.approx(total, abs=1e-12)
    assert total_mass(ab) == pytest.approx(total_mass(a) + total_mass(b), abs=1e-12)


@given(controls(with_atoms=False))
def test_total_variation_is_sup_over_partitions(c):
    # no partition of [0, T] beats the breakpoint sum
    rng = np.random.default_rng(0)
    pts = np.sort(rng.uniform(0, c.horizon, 15))
    vals = [c.value_at(t) for t in pts]
    assert np.sum(np.abs(np.diff(vals))) <= total_variation(c) + 1e-12


@given(controls())
def test_json_round_trip(c):
    assert control_from_json(control_to_json(c)) == c
    assert density_part(c).atoms == ()
