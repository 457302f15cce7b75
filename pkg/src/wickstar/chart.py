"""Pseudo-Kähler coordinate charts and their derived geometry.

A chart supplies the metric g_{kl} = 2g(Z_k, Zb_l) and its inverse as exact
rational functions, a factor base used to keep coefficients reduced, an
optional holomorphic potential gradient and a formal series of closed
two-forms.  From the metric the module derives the Kähler connection, the
curvature element of the Weyl algebra and the Ricci form, and validates
every structural identity exactly at load time; a failed identity is an
error, never a warning.
"""

from __future__ import annotations

import json
from fractions import Fraction

from . import weyl
from .expr import (
    ChartExpr,
    ExprError,
    GaussianRational,
    parse,
)

GR_HALF_I = GaussianRational(0, Fraction(1, 2))
GR_MINUS_HALF_I = GaussianRational(0, Fraction(-1, 2))


class ChartError(Exception):
    """Schema violation or failed structural invariant in a chart document."""


# -- differential forms --------------------------------------------------------


class OneForm:
    """b_k dz^k + c_l dzb^l with ChartExpr coefficients."""

    __slots__ = ("n", "hol", "ahol")

    def __init__(self, n, hol=None, ahol=None):
        self.n = n
        self.hol = {k: v for k, v in (hol or {}).items() if not v.is_zero()}
        self.ahol = {k: v for k, v in (ahol or {}).items() if not v.is_zero()}

    def is_zero(self):
        return not self.hol and not self.ahol

    def __add__(self, other):
        hol = dict(self.hol)
        for k, v in other.hol.items():
            hol[k] = hol.get(k, ChartExpr.zero(self.n)) + v
        ahol = dict(self.ahol)
        for k, v in other.ahol.items():
            ahol[k] = ahol.get(k, ChartExpr.zero(self.n)) + v
        return OneForm(self.n, hol, ahol)

    def __neg__(self):
        return OneForm(self.n, {k: -v for k, v in self.hol.items()}, {k: -v for k, v in self.ahol.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, factor):
        if isinstance(factor, (int, Fraction, GaussianRational)):
            factor = GaussianRational.coerce(factor)
            return OneForm(
                self.n,
                {k: v.scale(factor) for k, v in self.hol.items()},
                {k: v.scale(factor) for k, v in self.ahol.items()},
            )
        return OneForm(
            self.n,
            {k: v * factor for k, v in self.hol.items()},
            {k: v * factor for k, v in self.ahol.items()},
        )

    def __eq__(self, other):
        return (self - other).is_zero() if isinstance(other, OneForm) else NotImplemented

    def d(self):
        """Exterior derivative."""
        n = self.n
        out = TwoForm(n)
        zero = ChartExpr.zero(n)
        for k, b in self.hol.items():
            for i in range(n):
                if i != k:
                    lo, hi, sgn = (i, k, 1) if i < k else (k, i, -1)
                    cur = out.hh.get((lo, hi), zero)
                    out.hh[(lo, hi)] = cur + (b.differentiate(i).scale(sgn))
                # dzb^j ^ dz^k = -dz^k ^ dzb^j
                db = b.differentiate(n + i)
                if not db.is_zero():
                    cur = out.hm.get((k, i), zero)
                    out.hm[(k, i)] = cur - db
        for l, c in self.ahol.items():
            for i in range(n):
                dc = c.differentiate(i)
                if not dc.is_zero():
                    cur = out.hm.get((i, l), zero)
                    out.hm[(i, l)] = cur + dc
                if i != l:
                    lo, hi, sgn = (i, l, 1) if i < l else (l, i, -1)
                    cur = out.aa.get((lo, hi), zero)
                    out.aa[(lo, hi)] = cur + (c.differentiate(n + i).scale(sgn))
        out._drop_zeros()
        return out

    def to_weyl(self, n_power=0, truncation=None):
        """The central element (one-form) x 1: symmetric degree 1, no wedge part."""
        items = []
        for k, v in self.hol.items():
            sym = [0] * (2 * self.n)
            sym[k] = 1
            items.append((n_power, tuple(sym), 0, v))
        for l, v in self.ahol.items():
            sym = [0] * (2 * self.n)
            sym[self.n + l] = 1
            items.append((n_power, tuple(sym), 0, v))
        return weyl.WeylElement.from_terms(self.n, items, truncation)

    def to_weyl_form(self, n_power=0, truncation=None):
        """The element 1 x (one-form): antisymmetric degree 1."""
        items = []
        for k, v in self.hol.items():
            items.append((n_power, (0,) * (2 * self.n), 1 << k, v))
        for l, v in self.ahol.items():
            items.append((n_power, (0,) * (2 * self.n), 1 << (self.n + l), v))
        return weyl.WeylElement.from_terms(self.n, items, truncation)


class TwoForm:
    """Two-form split by type: hh (2,0), hm (1,1), aa (0,2).

    hh[(k,l)] with k<l is the coefficient of dz^k ^ dz^l, hm[(k,l)] the
    coefficient of dz^k ^ dzb^l, aa[(k,l)] with k<l that of dzb^k ^ dzb^l.
    """

    __slots__ = ("n", "hh", "hm", "aa")

    def __init__(self, n, hh=None, hm=None, aa=None):
        self.n = n
        self.hh = dict(hh or {})
        self.hm = dict(hm or {})
        self.aa = dict(aa or {})
        self._drop_zeros()

    def _drop_zeros(self):
        self.hh = {k: v for k, v in self.hh.items() if not v.is_zero()}
        self.hm = {k: v for k, v in self.hm.items() if not v.is_zero()}
        self.aa = {k: v for k, v in self.aa.items() if not v.is_zero()}

    def is_zero(self):
        return not self.hh and not self.hm and not self.aa

    def is_type_11(self):
        return not self.hh and not self.aa

    def __add__(self, other):
        def merge(d1, d2):
            out = dict(d1)
            for k, v in d2.items():
                out[k] = out.get(k, ChartExpr.zero(self.n)) + v
            return out

        return TwoForm(self.n, merge(self.hh, other.hh), merge(self.hm, other.hm), merge(self.aa, other.aa))

    def __neg__(self):
        return TwoForm(
            self.n,
            {k: -v for k, v in self.hh.items()},
            {k: -v for k, v in self.hm.items()},
            {k: -v for k, v in self.aa.items()},
        )

    def __sub__(self, other):
        return self + (-other)

    def scale(self, factor):
        if isinstance(factor, (int, Fraction, GaussianRational)):
            factor = GaussianRational.coerce(factor)
            return TwoForm(
                self.n,
                {k: v.scale(factor) for k, v in self.hh.items()},
                {k: v.scale(factor) for k, v in self.hm.items()},
                {k: v.scale(factor) for k, v in self.aa.items()},
            )
        return TwoForm(
            self.n,
            {k: v * factor for k, v in self.hh.items()},
            {k: v * factor for k, v in self.hm.items()},
            {k: v * factor for k, v in self.aa.items()},
        )

    def __eq__(self, other):
        return (self - other).is_zero() if isinstance(other, TwoForm) else NotImplemented

    def conjugate(self):
        """Complex conjugation of the form (coefficients and index types)."""
        n = self.n
        hh = {}
        aa = {}
        hm = {}
        for (k, l), v in self.hh.items():
            aa[(k, l)] = v.conjugate()
        for (k, l), v in self.aa.items():
            hh[(k, l)] = v.conjugate()
        for (k, l), v in self.hm.items():
            # conj(w dz^k ^ dzb^l) = conj(w) dzb^k ^ dz^l = -conj(w) dz^l ^ dzb^k
            cur = hm.get((l, k), ChartExpr.zero(n))
            hm[(l, k)] = cur - v.conjugate()
        return TwoForm(n, hh, hm, aa)

    def insert_hol(self, k):
        """Contraction i_{Z_k} of the two-form; a one-form."""
        n = self.n
        hol = {}
        ahol = {}
        zero = ChartExpr.zero(n)
        for (a, b), v in self.hh.items():
            if a == k:
                hol[b] = hol.get(b, zero) + v
            if b == k:
                hol[a] = hol.get(a, zero) - v
        for (a, b), v in self.hm.items():
            if a == k:
                ahol[b] = ahol.get(b, zero) + v
        return OneForm(n, hol, ahol)

    def insert_ahol(self, l):
        """Contraction i_{Zb_l} of the two-form; a one-form."""
        n = self.n
        hol = {}
        ahol = {}
        zero = ChartExpr.zero(n)
        for (a, b), v in self.hm.items():
            if b == l:
                hol[a] = hol.get(a, zero) - v
        for (a, b), v in self.aa.items():
            if a == l:
                ahol[b] = ahol.get(b, zero) + v
            if b == l:
                ahol[a] = ahol.get(a, zero) - v
        return OneForm(n, hol, ahol)

    def exterior_derivative_components(self):
        """Coefficients of the exterior derivative, keyed by form type.

        Returns a dict with keys '30', '21', '12', '03'; closedness means
        every stored coefficient vanishes (they are dropped when zero, so a
        closed form yields empty dicts throughout).
        """
        n = self.n
        zero = ChartExpr.zero(n)
        out = {"30": {}, "21": {}, "12": {}, "03": {}}

        def bump(kind, key, value):
            if value.is_zero():
                return
            cur = out[kind].get(key, zero)
            s = cur + value
            if s.is_zero():
                out[kind].pop(key, None)
            else:
                out[kind][key] = s

        for (j, k), v in self.hh.items():
            for i in range(n):
                if i != j and i != k:
                    trio = tuple(sorted((i, j, k)))
                    perm = [i, j, k]
                    sign = _perm_sign(perm)
                    bump("30", trio, v.differentiate(i).scale(sign))
                bump("21", (j, k, i), v.differentiate(n + i))
        for (k, l), v in self.hm.items():
            for i in range(n):
                if i != k:
                    lo, hi, sgn = (i, k, 1) if i < k else (k, i, -1)
                    bump("21", (lo, hi, l), v.differentiate(i).scale(sgn))
                if i != l:
                    lo, hi, sgn = (l, i, 1) if l < i else (i, l, -1)
                    bump("12", (k, lo, hi), v.differentiate(n + i).scale(sgn))
        for (k, l), v in self.aa.items():
            for i in range(n):
                bump("12", (i, k, l), v.differentiate(i))
                if i != k and i != l:
                    trio = tuple(sorted((i, k, l)))
                    sign = _perm_sign([i, k, l])
                    bump("03", trio, v.differentiate(n + i).scale(sign))
        return out

    def is_closed(self):
        comps = self.exterior_derivative_components()
        return all(not d for d in comps.values())

    def to_weyl(self, nu_power=0, truncation=None):
        """The central element 1 x (two-form) at the given nu power."""
        n = self.n
        items = []
        for (k, l), v in self.hh.items():
            items.append((nu_power, (0,) * (2 * n), (1 << k) | (1 << l), v))
        for (k, l), v in self.hm.items():
            items.append((nu_power, (0,) * (2 * n), (1 << k) | (1 << (n + l)), v))
        for (k, l), v in self.aa.items():
            items.append((nu_power, (0,) * (2 * n), (1 << (n + k)) | (1 << (n + l)), v))
        return weyl.WeylElement.from_terms(n, items, truncation)

    def render(self):
        if self.is_zero():
            return "0"
        pieces = []
        for (k, l) in sorted(self.hh):
            pieces.append(f"({self.hh[(k, l)].pretty()}) dz{k+1}^dz{l+1}")
        for (k, l) in sorted(self.hm):
            pieces.append(f"({self.hm[(k, l)].pretty()}) dz{k+1}^dzb{l+1}")
        for (k, l) in sorted(self.aa):
            pieces.append(f"({self.aa[(k, l)].pretty()}) dzb{k+1}^dzb{l+1}")
        return " + ".join(pieces)

    def __repr__(self):
        return f"<TwoForm {self.render()}>"


def _perm_sign(values):
    sign = 1
    for i in range(len(values)):
        for j in range(i + 1, len(values)):
            if values[i] > values[j]:
                sign = -sign
    return sign


class FormSeries:
    """Formal series sum_i nu^i * (two-form)_i; normalized and sparse."""

    __slots__ = ("n", "forms")

    def __init__(self, n, forms=()):
        self.n = n
        merged = {}
        for power, form in forms:
            if form.is_zero():
                continue
            if power in merged:
                merged[power] = merged[power] + form
            else:
                merged[power] = form
        self.forms = {p: f for p, f in sorted(merged.items()) if not f.is_zero()}

    @staticmethod
    def zero(n):
        return FormSeries(n)

    def items(self):
        return list(self.forms.items())

    def is_zero(self):
        return not self.forms

    def min_power(self):
        return min(self.forms, default=None)

    def __add__(self, other):
        return FormSeries(self.n, list(self.forms.items()) + list(other.forms.items()))

    def __neg__(self):
        return FormSeries(self.n, [(p, -f) for p, f in self.forms.items()])

    def __sub__(self, other):
        return self + (-other)

    def __eq__(self, other):
        return (self - other).is_zero() if isinstance(other, FormSeries) else NotImplemented

    def scale(self, factor):
        return FormSeries(self.n, [(p, f.scale(factor)) for p, f in self.forms.items()])

    def parity(self):
        """nu -> -nu on the series."""
        return FormSeries(
            self.n,
            [(p, f.scale(-1) if p & 1 else f) for p, f in self.forms.items()],
        )

    def conjugate(self):
        """Conjugation with nu -> -nu (the formal parameter is imaginary)."""
        return FormSeries(
            self.n,
            [
                (p, f.conjugate().scale(-1) if p & 1 else f.conjugate())
                for p, f in self.forms.items()
            ],
        )

    def is_closed(self):
        return all(f.is_closed() for f in self.forms.values())

    def is_type_11(self):
        return all(f.is_type_11() for f in self.forms.values())

    def to_weyl(self, truncation=None):
        n = self.n
        el = weyl.WeylElement.zero(n, truncation)
        for p, f in self.forms.items():
            el = el + f.to_weyl(nu_power=p, truncation=truncation)
        return el

    def render(self):
        if not self.forms:
            return "0"
        return " + ".join(f"nu^{p} * [{f.render()}]" for p, f in self.forms.items())

    def __repr__(self):
        return f"<FormSeries {self.render()}>"


class OneFormSeries:
    """Formal series sum_i nu^i * (one-form)_i with i >= 1."""

    __slots__ = ("n", "forms")

    def __init__(self, n, forms=()):
        self.n = n
        merged = {}
        for power, form in forms:
            if form.is_zero():
                continue
            merged[power] = merged.get(power, OneForm(n)) + form
        self.forms = {p: f for p, f in sorted(merged.items()) if not f.is_zero()}

    @staticmethod
    def zero(n):
        return OneFormSeries(n)

    def is_zero(self):
        return not self.forms

    def items(self):
        return list(self.forms.items())

    def d(self):
        return FormSeries(self.n, [(p, f.d()) for p, f in self.forms.items()])

    def to_weyl(self, truncation=None):
        """The series (one-form) x 1 as a Weyl element (sym degree 1)."""
        el = weyl.WeylElement.zero(self.n, truncation)
        for p, f in self.forms.items():
            el = el + f.to_weyl(n_power=p, truncation=truncation)
        return el

    def to_weyl_form(self, truncation=None):
        """The series 1 x (one-form) as a Weyl element (asym degree 1)."""
        el = weyl.WeylElement.zero(self.n, truncation)
        for p, f in self.forms.items():
            el = el + f.to_weyl_form(n_power=p, truncation=truncation)
        return el


# -- connection and curvature ----------------------------------------------------


class ConnectionData:
    """Christoffel symbols of the Kähler connection (holomorphic block).

    christoffel[m][k][l] = Gamma^m_{kl} = g^{mn} Z_k(g_{ln}); the barred
    block is the entrywise conjugate.
    """

    __slots__ = ("n", "christoffel", "christoffel_bar")

    def __init__(self, n, christoffel, christoffel_bar):
        self.n = n
        self.christoffel = christoffel
        self.christoffel_bar = christoffel_bar


class CurvatureData:
    """Curvature element of the Weyl algebra plus the Ricci form.

    The lowered curvature coefficients rho[(p, nb, i, jb)] multiply
    dz^p v dzb^nb x dz^i ^ dzb^jb; the sign convention is pinned by the
    two identities  nabla^2 = -(1/nu) ad(R)  and  Delta_fib R = 1 x ricci,
    both of which are verified exactly on every chart.
    """

    __slots__ = ("n", "rho", "curvature_element", "ricci_form", "ricci_tensor")

    def __init__(self, n, rho, curvature_element, ricci_form, ricci_tensor):
        self.n = n
        self.rho = rho
        self.curvature_element = curvature_element
        self.ricci_form = ricci_form
        self.ricci_tensor = ricci_tensor


def christoffel(chart):
    """Kähler connection coefficients Gamma^m_{kl} = g^{mn} Z_k(g_{ln})."""
    n = chart.n
    zero = ChartExpr.zero(n)
    gamma = [[[zero for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for m in range(n):
        for k in range(n):
            for l in range(n):
                total = zero
                for nn in range(n):
                    total = total + chart.inverse_metric[m][nn] * chart.metric[l][nn].differentiate(k)
                gamma[m][k][l] = total
    gamma_bar = [
        [[gamma[m][k][l].conjugate() for l in range(n)] for k in range(n)]
        for m in range(n)
    ]
    conn = ConnectionData(n, gamma, gamma_bar)
    _validate_connection(chart, conn)
    return conn


def _validate_connection(chart, conn):
    n = chart.n
    for m in range(n):
        for k in range(n):
            for l in range(n):
                if conn.christoffel[m][k][l] != conn.christoffel[m][l][k]:
                    raise ChartError(f"connection is not torsion-free at ({m},{k},{l})")
    # metric compatibility: Z_k g_{ln} = Gamma^m_{kl} g_{mn}
    for k in range(n):
        for l in range(n):
            for nn in range(n):
                lhs = chart.metric[l][nn].differentiate(k)
                rhs = ChartExpr.zero(n)
                for m in range(n):
                    rhs = rhs + conn.christoffel[m][k][l] * chart.metric[m][nn]
                if lhs != rhs:
                    raise ChartError(f"connection is not metric at ({k},{l},{nn})")


def curvature(chart, conn=None, verify=True):
    """Curvature element and Ricci form of the chart's connection."""
    n = chart.n
    conn = conn or chart.connection
    zero = ChartExpr.zero(n)
    rho = {}
    items = []
    for p in range(n):
        for nb in range(n):
            for i in range(n):
                for jb in range(n):
                    total = zero
                    for m in range(n):
                        total = total + chart.metric[m][nb] * conn.christoffel[m][i][p].differentiate(n + jb)
                    total = total.scale(GR_HALF_I)
                    if total.is_zero():
                        continue
                    rho[(p, nb, i, jb)] = total
                    sym = [0] * (2 * n)
                    sym[p] += 1
                    sym[n + nb] += 1
                    items.append((0, tuple(sym), (1 << i) | (1 << (n + jb)), total))
    element = weyl.WeylElement.from_terms(n, items, None)
    # Ricci tensor R_{ij} as the trace of R^m_{pij} = -Zb_j Gamma^m_{ip}
    ricci = {}
    for i in range(n):
        for jb in range(n):
            total = zero
            for m in range(n):
                total = total - conn.christoffel[m][i][m].differentiate(n + jb)
            if not total.is_zero():
                ricci[(i, jb)] = total
    ricci_form = TwoForm(
        n, hm={(i, jb): v.scale(GR_MINUS_HALF_I) for (i, jb), v in ricci.items()}
    )
    data = CurvatureData(n, rho, element, ricci_form, ricci)
    if verify:
        _validate_curvature(chart, conn, data)
    return data


def _validate_curvature(chart, conn, curv):
    n = chart.n
    R = curv.curvature_element
    if not weyl.delta(R).is_zero():
        raise ChartError("curvature element fails delta R = 0")
    if not weyl.nabla(R, chart, conn).is_zero():
        raise ChartError("curvature element fails nabla R = 0")
    fib = weyl.delta_fib(R, chart)
    expected = curv.ricci_form.to_weyl()
    if not (fib - expected).is_zero():
        raise ChartError("Delta_fib R does not reproduce the Ricci form")
    if not curv.ricci_form.is_closed():
        raise ChartError("Ricci form is not closed")


def omega_form(chart):
    """The fundamental form (i/2) g_{kl} dz^k ^ dzb^l; closed by construction
    of a valid chart, and re-verified here."""
    n = chart.n
    form = TwoForm(
        n,
        hm={
            (k, l): chart.metric[k][l].scale(GR_HALF_I)
            for k in range(n)
            for l in range(n)
            if not chart.metric[k][l].is_zero()
        },
    )
    if not form.is_closed():
        raise ChartError("fundamental form is not closed")
    return form


def poisson_bracket(chart, f, g):
    """{f, g} = (2/i) g^{kl} (Z_k f Zb_l g - Zb_l f Z_k g)."""
    n = chart.n
    total = ChartExpr.zero(n)
    for k in range(n):
        df_k = f.differentiate(k)
        dg_k = g.differentiate(k)
        for l in range(n):
            term = df_k * g.differentiate(n + l) - f.differentiate(n + l) * dg_k
            if term.is_zero():
                continue
            total = total + chart.inverse_metric[k][l] * term
    return total.scale(GaussianRational(0, -2))


# -- the chart -------------------------------------------------------------------


class Chart:
    """Immutable chart data with lazily derived geometry.

    The tau cache of the Fedosov layer and the contraction memo here are
    the only mutable attachments; both are memo tables whose entries are
    value-determined, so concurrent recomputation is harmless.
    """

    def __init__(self, n, metric, inverse_metric, factor_base=(),
                 potential_gradient=None, omega_series=None, name=""):
        self.n = n
        self.metric = metric
        self.inverse_metric = inverse_metric
        self.factor_base = tuple(factor_base)
        self.potential_gradient = potential_gradient
        self.omega_series = omega_series if omega_series is not None else FormSeries.zero(n)
        self.name = name
        self._connection = None
        self._curvature = None
        self._omega = None
        self._memo = {}

    # geometry, derived once
    @property
    def connection(self):
        if self._connection is None:
            self._connection = christoffel(self)
        return self._connection

    @property
    def curvature_data(self):
        if self._curvature is None:
            self._curvature = curvature(self, self.connection)
        return self._curvature

    @property
    def omega(self):
        if self._omega is None:
            self._omega = omega_form(self)
        return self._omega

    def contraction_memo(self, kind):
        return self._memo.setdefault(kind, {})

    def is_flat(self):
        n = self.n
        return all(
            self.connection.christoffel[m][k][l].is_zero()
            for m in range(n)
            for k in range(n)
            for l in range(n)
        ) and all(
            self.metric[k][l].is_constant() for k in range(n) for l in range(n)
        )

    def with_omega(self, omega_series, name_suffix=""):
        """A copy of the chart with a different two-form series; geometry
        caches are shared since the metric is unchanged."""
        out = Chart(
            self.n,
            self.metric,
            self.inverse_metric,
            self.factor_base,
            self.potential_gradient,
            omega_series,
            self.name + name_suffix,
        )
        out._connection = self._connection
        out._curvature = self._curvature
        out._omega = self._omega
        out._memo = self._memo
        return out

    def omega_scaled_series(self, scaled_powers):
        """Series sum nu^i c_i * omega from (power, scalar) pairs."""
        return FormSeries(self.n, [(p, self.omega.scale(c)) for p, c in scaled_powers])

    def validate(self):
        n = self.n
        for k in range(n):
            for l in range(n):
                if self.metric[k][l].conjugate() != self.metric[l][k]:
                    raise ChartError(f"metric is not Hermitian at ({k},{l})")
        for k in range(n):
            for m in range(n):
                total = ChartExpr.zero(n)
                for l in range(n):
                    total = total + self.inverse_metric[k][l] * self.metric[m][l]
                expected = ChartExpr.one(n) if k == m else ChartExpr.zero(n)
                if total != expected:
                    raise ChartError(f"inverse metric mismatch at ({k},{m})")
        for power, form in self.omega_series.items():
            if power < 1:
                raise ChartError("two-form series must start at nu^1")
            if not form.is_closed():
                raise ChartError(f"two-form at nu^{power} is not closed")
        if self.potential_gradient is not None:
            grads = self.potential_gradient
            if len(grads) != n:
                raise ChartError("potential gradient needs one entry per holomorphic coordinate")
            for k in range(n):
                for l in range(n):
                    if grads[k].differentiate(n + l) != self.metric[k][l].scale(GR_HALF_I):
                        raise ChartError(
                            f"potential gradient fails Zb_{l+1} u_{k+1} = (i/2) g_{{{k+1}{l+1}}}"
                        )
            for k in range(n):
                for l in range(k + 1, n):
                    if grads[l].differentiate(k) != grads[k].differentiate(l):
                        raise ChartError("potential gradient is not a gradient (mixed derivatives differ)")
        return self


# -- chart documents ----------------------------------------------------------------


def _parse_form_component_key(key, n):
    parts = key.split("^")
    if len(parts) != 2:
        raise ChartError(f"malformed form component {key!r}")

    def classify(token):
        token = token.strip()
        if token.startswith("dzb"):
            idx = token[3:]
            bar = True
        elif token.startswith("dz"):
            idx = token[2:]
            bar = False
        else:
            raise ChartError(f"malformed form symbol {token!r}")
        if not idx.isdigit() or not 1 <= int(idx) <= n:
            raise ChartError(f"form symbol {token!r} out of range")
        return bar, int(idx) - 1

    return classify(parts[0]), classify(parts[1])


def _parse_two_form(doc, n, base, omega=None):
    """A two-form from either an `omega` reference or explicit components."""
    if isinstance(doc, str):
        text = doc.strip()
        if text == "omega":
            scalar = GaussianRational(1)
        elif text.endswith("*omega"):
            scalar_expr = parse(text[: -len("*omega")].rstrip(" *"), n)
            if not scalar_expr.is_constant():
                raise ChartError("omega may only be scaled by constants")
            scalar = scalar_expr.constant_value()
        else:
            raise ChartError(f"unrecognized form spec {text!r}")
        if omega is None:
            raise ChartError("omega reference without a metric")
        return omega.scale(scalar)
    if not isinstance(doc, dict):
        raise ChartError("form spec must be a string or an object")
    hh, hm, aa = {}, {}, {}
    for key, text in doc.items():
        (bar1, i1), (bar2, i2) = _parse_form_component_key(key, n)
        coeff = parse(text, n, base)
        if coeff.is_zero():
            continue
        if not bar1 and not bar2:
            if i1 == i2:
                raise ChartError(f"repeated symbol in {key!r}")
            if i1 > i2:
                i1, i2, coeff = i2, i1, -coeff
            hh[(i1, i2)] = hh.get((i1, i2), ChartExpr.zero(n)) + coeff
        elif not bar1 and bar2:
            hm[(i1, i2)] = hm.get((i1, i2), ChartExpr.zero(n)) + coeff
        elif bar1 and bar2:
            if i1 == i2:
                raise ChartError(f"repeated symbol in {key!r}")
            if i1 > i2:
                i1, i2, coeff = i2, i1, -coeff
            aa[(i1, i2)] = aa.get((i1, i2), ChartExpr.zero(n)) + coeff
        else:
            raise ChartError(f"component {key!r} must be ordered dz before dzb")
    return TwoForm(n, hh, hm, aa)


def load_chart(source):
    """Load and fully validate a chart document (path, JSON text, or dict)."""
    if isinstance(source, dict):
        doc = source
        name = doc.get("name", "")
    else:
        text = source
        name = ""
        try:
            if "\n" not in str(source) and str(source).endswith(".json"):
                with open(source) as fh:
                    text = fh.read()
                name = str(source)
        except OSError as exc:
            raise ChartError(f"cannot read chart file: {exc}") from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ChartError(f"chart document is not valid JSON: {exc}") from exc
        name = doc.get("name", name)

    try:
        n = int(doc["dimension"])
    except (KeyError, TypeError, ValueError):
        raise ChartError("chart document needs an integer `dimension`")
    if n < 1:
        raise ChartError("dimension must be positive")

    for field in ("metric", "inverse_metric"):
        if field not in doc:
            raise ChartError(f"chart document is missing `{field}`")

    base = []
    for text in doc.get("factor_base", []):
        poly_expr = parse(text, n)
        if not poly_expr.is_polynomial():
            raise ChartError(f"factor base entry {text!r} is not a polynomial")
        poly = poly_expr.num
        if poly.is_constant():
            raise ChartError(f"factor base entry {text!r} is constant")
        base.append(poly)
    base = tuple(base)

    def load_matrix(field):
        rows = doc[field]
        if rows and isinstance(rows[0], str):
            if len(rows) != n * n:
                raise ChartError(f"`{field}` must hold n*n entries (row-major)")
            flat = [parse(t, n, base) for t in rows]
            return [flat[i * n : (i + 1) * n] for i in range(n)]
        if len(rows) != n:
            raise ChartError(f"`{field}` must be an n x n matrix (row-major)")
        out = []
        for row in rows:
            if len(row) != n:
                raise ChartError(f"`{field}` must be an n x n matrix (row-major)")
            out.append([parse(t, n, base) for t in row])
        return out

    try:
        metric = load_matrix("metric")
        inverse = load_matrix("inverse_metric")
    except ExprError as exc:
        raise ChartError(f"bad expression in chart document: {exc}") from exc

    gradient = None
    if doc.get("potential_gradient") is not None:
        gradient = tuple(parse(t, n, base) for t in doc["potential_gradient"])

    chart = Chart(n, metric, inverse, base, gradient, None, name=name)
    chart.validate()

    if doc.get("omega_series"):
        omega = omega_form(chart)
        entries = []
        for entry in doc["omega_series"]:
            try:
                power = int(entry["nu_power"])
            except (KeyError, TypeError, ValueError):
                raise ChartError("omega_series entries need an integer `nu_power`")
            entries.append((power, _parse_two_form(entry["form"], n, base, omega)))
        chart.omega_series = FormSeries(n, entries)
        chart.validate()
    return chart
