"""Chart loading, derived connection and curvature, fundamental form."""

import pytest

from wickstar import weyl
from wickstar.chart import ChartError, load_chart, omega_form, poisson_bracket
from wickstar.expr import parse


def test_flat_chart_loads(c1_flat):
    assert c1_flat.n == 1
    assert c1_flat.is_flat()


def test_non_hermitian_metric_rejected():
    doc = {"dimension": 1, "metric": [["z1"]], "inverse_metric": [["1/z1"]]}
    with pytest.raises(ChartError, match="Hermitian"):
        load_chart(doc)


def test_inverse_mismatch_rejected():
    doc = {"dimension": 1, "metric": [["1"]], "inverse_metric": [["2"]]}
    with pytest.raises(ChartError, match="inverse"):
        load_chart(doc)


def test_non_closed_omega_rejected():
    doc = {
        "dimension": 2,
        "metric": [["1", "0"], ["0", "1"]],
        "inverse_metric": [["1", "0"], ["0", "1"]],
        "omega_series": [{"nu_power": 1, "form": {"dz1^dzb2": "zb1"}}],
    }
    with pytest.raises(ChartError, match="not closed"):
        load_chart(doc)


def test_bad_potential_gradient_rejected():
    doc = {
        "dimension": 1,
        "metric": [["1"]],
        "inverse_metric": [["1"]],
        "potential_gradient": ["zb1"],
    }
    with pytest.raises(ChartError, match="potential gradient"):
        load_chart(doc)


def test_omega_power_zero_rejected(c1_flat):
    doc = {
        "dimension": 1,
        "metric": [["1"]],
        "inverse_metric": [["1"]],
        "omega_series": [{"nu_power": 0, "form": {"dz1^dzb1": "1"}}],
    }
    with pytest.raises(ChartError, match="nu\\^1"):
        load_chart(doc)


def test_christoffel_flat(c2_flat):
    conn = c2_flat.connection
    assert all(
        conn.christoffel[m][k][l].is_zero()
        for m in range(2) for k in range(2) for l in range(2)
    )


def test_christoffel_disk(disk):
    assert disk.connection.christoffel[0][0][0] == parse("2*zb1/(1 - z1*zb1)", 1)


def test_christoffel_cp1(cp1):
    assert cp1.connection.christoffel[0][0][0] == parse("-2*zb1/(1 + z1*zb1)", 1)


def test_curvature_flat(c1_flat):
    curv = c1_flat.curvature_data
    assert curv.curvature_element.is_zero()
    assert curv.ricci_form.is_zero()


def test_curvature_disk_value(disk):
    # the single lowered coefficient, pinned by nabla^2 = -(1/nu) ad(R)
    assert disk.curvature_data.rho[(0, 0, 0, 0)] == parse("2*i/(1 - z1*zb1)^4", 1)


def test_curvature_bianchi_and_ricci(disk, cp1):
    for chart in (disk, cp1):
        curv = chart.curvature_data
        R = curv.curvature_element
        assert weyl.delta(R).is_zero()
        assert weyl.nabla(R, chart, chart.connection).is_zero()
        assert weyl.delta_fib(R, chart) == curv.ricci_form.to_weyl()
        assert curv.ricci_form.is_closed()


def test_ricci_proportional_to_omega(disk, cp1):
    assert disk.curvature_data.ricci_form == disk.omega
    assert cp1.curvature_data.ricci_form == cp1.omega.scale(-2)


def test_omega_form_values(c1_flat, disk):
    flat_omega = omega_form(c1_flat)
    assert flat_omega.hm[(0, 0)] == parse("i/2", 1)
    disk_omega = omega_form(disk)
    assert disk_omega.hm[(0, 0)] == parse("i/(1 - z1*zb1)^2", 1)


def test_omega_closed_cp1(cp1):
    assert omega_form(cp1).is_closed()


def test_poisson_bracket_flat(c1_flat, p1):
    z, zb = p1("z1"), p1("zb1")
    assert poisson_bracket(c1_flat, z, zb) == p1("-2*i")
    assert poisson_bracket(c1_flat, z, z).is_zero()


def test_poisson_bracket_properties(disk, p1):
    f = p1("z1^2*zb1 + z1")
    g = p1("zb1^2 - i*z1")
    h = p1("z1*zb1")
    assert poisson_bracket(disk, f, g) == -poisson_bracket(disk, g, f)
    assert poisson_bracket(disk, f, f).is_zero()
    # Leibniz in the second argument
    assert poisson_bracket(disk, f, g * h) == \
        poisson_bracket(disk, f, g) * h + g * poisson_bracket(disk, f, h)


def test_omega_series_scalar_reference(disk_omega_nu, disk_omega_inu, disk):
    assert disk_omega_nu.omega_series.items()[0][1] == disk.omega
    assert disk_omega_inu.omega_series.items()[0][1] == disk.omega.scale(parse("i", 1).constant_value())


def test_omega_series_type(c2_flat_omega20):
    series = c2_flat_omega20.omega_series
    assert series.is_closed()
    assert not series.is_type_11()


def test_with_omega_shares_geometry(disk, disk_omega_nu):
    clone = disk.with_omega(disk_omega_nu.omega_series)
    assert clone.omega_series == disk_omega_nu.omega_series
    assert clone.connection is disk.connection
