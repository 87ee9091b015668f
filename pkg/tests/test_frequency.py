from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from isotorus import frequency as fq
from isotorus.errors import ConfigError, NotFoundError


def test_parse_keeps_expressions(two_freq):
    assert two_freq.nu == 2
    assert two_freq.vector == pytest.approx([(5 ** 0.5 - 1) / 2, 2 ** 0.5 - 1], abs=1e-15)
    assert fq.Frequency.from_dict(two_freq.to_dict()) == two_freq


@pytest.mark.parametrize("kw", [{"a0": 1.5}, {"b0": 1.0}, {"c": 0.0}, {"beta": 1.0}])
def test_bad_constants(kw):
    with pytest.raises(ConfigError):
        fq.Frequency.parse(["sqrt(2)-1"], **kw)


def test_zero_component_rejected():
    with pytest.raises(ConfigError):
        fq.Frequency((0.0, 0.5))


# frozen from exact continued fractions of (sqrt5-1)/2 = [0;1,1,1,...] and sqrt2-1 = [0;2,2,...]
@pytest.mark.parametrize("r,fracs,T,weights", [
    (10, ("8/13", "5/12"), 156, (96, 65)),
    (20, ("13/21", "12/29"), 609, (377, 252)),
    (50, ("34/55", "29/70"), 770, (476, 319)),
])
def test_rational_approximation_table(two_freq, r, fracs, T, weights):
    rf = fq.rational_approximation(two_freq, r)
    assert rf.fractions == tuple(Fraction(f) for f in fracs)
    lat = fq.build_lattice(rf)
    assert lat.T == T and lat.weights == weights
    assert all(b["close"] and b["denominator"] for b in fq.lemma_bounds(two_freq, rf))


def test_rational_component_exact():
    f = fq.Frequency.parse(["3/5"], b0=2.0)
    rf = fq.rational_approximation(f, 10)
    assert rf.fractions == (Fraction(3, 5),)
    assert fq.build_lattice(rf).tau0 == Fraction(3, 5)


def test_tau0_of_three_fifths():
    lat = fq.build_lattice(fq.RationalFrequency((3,), (5,), 10))
    # inf over n != 0 of |3n/5| (no reduction mod 1) is attained at n = 1
    assert lat.tau0 == Fraction(3, 5)
    assert lat.T == Fraction(5, 3)


def test_quotient_norm_half_third():
    lat = fq.build_lattice(fq.RationalFrequency((1, 1), (2, 3), 2))
    assert lat.T == 6 and lat.weights == (3, 2)
    norm, rep = fq.quotient_norm(1, lat)
    assert norm == 2
    assert np.dot(rep, lat.weights) == 1


def test_quotient_norm_not_found():
    lat = fq.build_lattice(fq.RationalFrequency((1, 1), (2, 3), 2))
    with pytest.raises(NotFoundError):
        fq.quotient_norm(1, lat, radius=1)


def test_coset_table_sorted(desk_lattice):
    ells, reps, norms = desk_lattice.coset_table(4)
    assert ells[0] == 0 and norms[0] == 0
    assert np.all(np.diff(norms) >= 0)
    assert len(set(ells.tolist())) == len(ells)
    assert np.array_equal(reps @ np.array(desk_lattice.weights), ells)


def test_shell_counts():
    for s in range(5):
        assert len(fq.shell(2, s)) == fq.shell_count(2, s)
    assert fq.shell_count(2, 3) == 12


def test_diophantine_report(two_freq):
    rep = fq.check_diophantine(two_freq, 15)
    assert rep.passed and rep.ratio >= two_freq.a0


def test_box_condition(two_freq):
    box = fq.box_condition(two_freq, fq.rational_approximation(two_freq, 50))
    assert box.passed


def test_certified_convergents_sqrt2():
    conv, exact = fq.certified_convergents(fq.Frequency.parse(["sqrt(2)-1"]).interval(0), 100)
    assert not exact
    assert (12, 29) in conv and (29, 70) in conv


@given(st.integers(min_value=-30, max_value=30), st.integers(min_value=-30, max_value=30))
def test_coset_index_linear(a, b):
    lat = fq.build_lattice(fq.RationalFrequency((8, 5), (13, 12), 10))
    assert fq.coset_index((a, b), lat) == 96 * a + 65 * b
    assert fq.lattice_indices(np.array([[a, b]]), lat)[0] == 96 * a + 65 * b


@given(st.integers(min_value=-40, max_value=40))
def test_quotient_norm_representative(ell):
    lat = fq.build_lattice(fq.RationalFrequency((1, 1), (2, 3), 2))
    norm, rep = fq.quotient_norm(ell, lat)
    assert int(np.dot(rep, lat.weights)) == ell
    assert sum(map(abs, rep)) == norm
    # minimality against every shorter vector
    for s in range(norm):
        assert not np.any(fq.shell(2, s) @ np.array(lat.weights) == ell)
