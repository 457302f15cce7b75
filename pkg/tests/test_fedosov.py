"""Fedosov engine: recursion, derivation, Taylor series, star products."""

from fractions import Fraction

import pytest

from wickstar import weyl
from wickstar.chart import FormSeries, TwoForm
from wickstar.expr import ChartExpr, GaussianRational, parse
from wickstar.fedosov import (
    ContractViolation,
    FedosovData,
    FedosovError,
    closed_form_flat,
    compute_r_via_fixed_point,
    fedosov_D,
    fixed_point,
    star,
    star_series,
    tau,
)
from wickstar.sampling import Lcg, random_polynomial
from wickstar.weyl import NuSeries, WeylElement


@pytest.fixture(scope="module")
def d_flat(c1_flat):
    return FedosovData("wick", c1_flat, K=8)


@pytest.fixture(scope="module")
def d_disk(disk):
    return FedosovData("wick", disk, K=8)


# -- fixed point utility -------------------------------------------------------


def test_fixed_point_constant_map():
    const = WeylElement.scalar(parse("z1", 1), truncation=6)
    assert fixed_point(lambda a: const, WeylElement.zero(1, 6), 6) == const


def test_fixed_point_taylor_map(c1_flat):
    conn = c1_flat.connection
    source = WeylElement.sym_generator(1, 0, truncation=6)

    def step(a):
        return (weyl.delta_inv(weyl.nabla(a, c1_flat, conn)) + source).truncate(6)

    got = fixed_point(step, WeylElement.zero(1, 6), 6)
    # two hand iterations: dz is already stationary on a flat chart
    assert got == source


def test_fixed_point_identity_rejected():
    with pytest.raises(ContractViolation):
        fixed_point(lambda a: a, WeylElement.zero(1, 6), 6)


def test_fixed_point_non_stationary_rejected():
    one = WeylElement.unit(1, 6)
    with pytest.raises(ContractViolation):
        fixed_point(lambda a: a + one, WeylElement.zero(1, 6), 6)


# -- the connection element ------------------------------------------------------


def test_r_vanishes_flat(d_flat):
    assert d_flat.r.is_zero()


def test_r_disk_lowest_component(disk, d_disk):
    R = disk.curvature_data.curvature_element
    assert d_disk.r.min_deg() == 3
    assert d_disk.r.component(3) == weyl.delta_inv(R.truncate(8))


def test_r_c2_closed_form(c2_flat_omega20):
    data = FedosovData("wick", c2_flat_omega20, K=6)
    half = GaussianRational(Fraction(1, 2))
    want = WeylElement.from_terms(2, [
        (1, (1, 0, 0, 0), 2, ChartExpr.constant(2, half)),
        (1, (0, 1, 0, 0), 1, ChartExpr.constant(2, -half)),
    ], 6)
    assert data.r == want
    assert not weyl.project(data.r, "pi_z").is_zero()


def test_r_seed_independence(d_disk, disk):
    R = disk.curvature_data.curvature_element
    assert compute_r_via_fixed_point(d_disk) == d_disk.r
    assert compute_r_via_fixed_point(d_disk, seed=weyl.delta_inv(R.truncate(8))) == d_disk.r


def test_s_validation(c1_flat):
    bad = WeylElement.scalar(parse("z1", 1))  # scalar part nonzero
    with pytest.raises(FedosovError):
        FedosovData("wick", c1_flat, K=6, s=bad)
    low = WeylElement.sym_generator(1, 0)  # total degree 1
    with pytest.raises(FedosovError):
        FedosovData("wick", c1_flat, K=6, s=low)
    sym1 = WeylElement.sym_generator(1, 0).mul_nu(1)  # Deg 3 but deg_s = 1
    with pytest.raises(FedosovError):
        FedosovData("wick", c1_flat, K=6, s=sym1)
    FedosovData("wick", c1_flat, K=6, s=sym1, allow_sym_degree_one=True)


def test_omega_validation(c2_flat):
    not_closed = FormSeries(2, [(1, TwoForm(2, hm={(0, 1): parse("zb1", 2)}))])
    with pytest.raises(FedosovError):
        FedosovData("wick", c2_flat, K=6, omega=not_closed)


# -- derivation and Taylor series ---------------------------------------------------


def test_D_examples(d_flat, p1):
    one = WeylElement.unit(1, 8)
    assert fedosov_D(d_flat, one).is_zero()
    tz = tau(d_flat, p1("z1"))
    assert fedosov_D(d_flat, tz).is_zero()


def test_D_squares_to_zero(d_disk, disk):
    rng = Lcg(5)
    from wickstar.sampling import random_weyl_element

    for i in range(4):
        e = random_weyl_element(disk, rng.split(i), max_degree=5, truncation=8)
        assert fedosov_D(d_disk, fedosov_D(d_disk, e)).is_zero()


def test_tau_examples(d_flat, p1):
    assert tau(d_flat, p1("1")) == WeylElement.unit(1, 8)
    z = p1("z1")
    assert tau(d_flat, z) == WeylElement.scalar(z, truncation=8) + \
        WeylElement.sym_generator(1, 0, truncation=8)
    zzb = p1("z1*zb1")
    want = WeylElement.from_terms(1, [
        (0, (0, 0), 0, zzb),
        (0, (1, 0), 0, p1("zb1")),
        (0, (0, 1), 0, p1("z1")),
        (0, (1, 1), 0, ChartExpr.one(1)),
    ], 8)
    assert tau(d_flat, zzb) == want


def test_tau_properties(d_disk, p1):
    for text in ("z1", "zb1^2", "z1^2*zb1 + i*z1"):
        f = p1(text)
        tf = tau(d_disk, f)
        assert weyl.to_nu_series(weyl.sigma(tf), 0)[0] == f
        assert fedosov_D(d_disk, tf).is_zero()


def test_tau_cached(d_disk, p1):
    f = p1("z1 + zb1")
    assert tau(d_disk, f) is tau(d_disk, f)


# -- the star product -----------------------------------------------------------


def test_star_flat_examples(d_flat, p1):
    z, zb = p1("z1"), p1("zb1")
    assert star(d_flat, z, zb, 2) == NuSeries([z * zb, p1("-2*i"), ChartExpr.zero(1)])
    assert star(d_flat, zb, z, 2) == NuSeries.from_function(z * zb, 2)
    got = star(d_flat, z ** 2, zb ** 2, 3)
    want = NuSeries([(z ** 2) * (zb ** 2), p1("-8*i*z1*zb1"), p1("-8"), ChartExpr.zero(1)])
    assert got == want


def test_star_truncation_guard(d_flat, p1):
    with pytest.raises(FedosovError):
        star(d_flat, p1("z1"), p1("zb1"), 4)  # needs K >= 10


def test_star_unital_and_bilinear(d_disk, p1):
    one = ChartExpr.one(1)
    f = p1("z1^2*zb1 - i")
    assert star(d_disk, one, f, 3) == NuSeries.from_function(f, 3)
    assert star(d_disk, f, one, 3) == NuSeries.from_function(f, 3)
    g, h = p1("zb1"), p1("z1*zb1")
    lhs = star(d_disk, f, g + h, 3)
    assert lhs == star(d_disk, f, g, 3) + star(d_disk, f, h, 3)
    scaled = star(d_disk, f.scale(GaussianRational(0, 2)), g, 3)
    assert scaled == star(d_disk, f, g, 3).scale(GaussianRational(0, 2))


def test_closed_form_examples(c1_flat, p1):
    z, zb = p1("z1"), p1("zb1")
    assert closed_form_flat(c1_flat, z, zb, "wick", 1) == NuSeries([z * zb, p1("-2*i")])
    assert closed_form_flat(c1_flat, zb, z, "antiwick", 1) == NuSeries([z * zb, p1("2*i")])
    f = p1("z1^2*zb1 + 3*z1")
    assert closed_form_flat(c1_flat, f, ChartExpr.one(1), "wick", 2) == \
        NuSeries.from_function(f, 2)


def test_closed_form_requires_flat(disk, p1):
    with pytest.raises(FedosovError):
        closed_form_flat(disk, p1("z1"), p1("zb1"), "wick", 1)


def test_star_matches_oracle_samples(c1_flat, c2_flat):
    rng = Lcg(17)
    for chart in (c1_flat, c2_flat):
        for kind in ("wick", "antiwick"):
            data = FedosovData(kind, chart, K=8)
            for i in range(4):
                f = random_polynomial(chart.n, rng.split(i))
                g = random_polynomial(chart.n, rng.split(100 + i))
                assert star(data, f, g, 3) == closed_form_flat(chart, f, g, kind, 3)


def test_star_series_bilinear_extension(d_disk, p1):
    """The series extension agrees with the subalgebra product: tau
    applied to f*g reproduces tau(f).tau(g) coefficient-wise."""
    f, g, h = p1("z1"), p1("zb1 + z1"), p1("z1*zb1")
    N = 3
    fg = star(d_disk, f, g, N)
    lhs = star_series(d_disk, fg, NuSeries.from_function(h, N), N)
    inner = weyl.circ(tau(d_disk, f), tau(d_disk, g), "wick", d_disk.chart, trunc=2 * N)
    rhs = weyl.to_nu_series(
        weyl.sigma_circ(inner, tau(d_disk, h), "wick", d_disk.chart, N), N)
    assert lhs == rhs


def test_tau_of_star_is_product(d_disk, p1):
    """tau intertwines the star product with the fibrewise product: the
    elementwise product of two Taylor series is the Taylor series of their
    star product, degree by degree up to the truncation margin."""
    f, g = p1("z1"), p1("z1*zb1")
    K = d_disk.K
    prod = weyl.circ(tau(d_disk, f), tau(d_disk, g), "wick", d_disk.chart)
    fg = star(d_disk, f, g, (K - 2) // 2)
    rebuilt = WeylElement.zero(1, K)
    for p, c in enumerate(fg.coeffs):
        if not c.is_zero():
            rebuilt = rebuilt + tau(d_disk, c).mul_nu(p)
    assert rebuilt.truncate(K - 2) == prod.truncate(K - 2)


def test_first_order_commutator_is_poisson(d_disk, disk, p1):
    from wickstar.chart import poisson_bracket

    rng = Lcg(23)
    for i in range(3):
        f = random_polynomial(1, rng.split(i), max_degree=2, terms=3)
        g = random_polynomial(1, rng.split(50 + i), max_degree=2, terms=3)
        s1 = star(d_disk, f, g, 1)
        s2 = star(d_disk, g, f, 1)
        assert s1.coeffs[1] - s2.coeffs[1] == poisson_bracket(disk, f, g)
        assert s1.coeffs[0] == f * g
