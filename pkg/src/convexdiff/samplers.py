"""Seeded generators of random fields, elements and jets for property checks."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .diffeo import from_field
from .fields import make_field
from .jets import JetPoly, jet_is_unit, multi_indices

__all__ = ["random_field", "random_element", "random_jet", "random_unit_jet"]

_TEMPLATES = (
    "{a}+{b}*x{i}",
    "{a}*sin({b}*x{i}+{c}*t)",
    "{a}*cos({b}*x{j})+{c}*x{i}",
    "{a}*tanh({b}*x{i}-{c})",
    "{a}*exp({c}*x{j})",
    "{a}*x{i}*x{j}+{b}*t",
)


def _num(rng, lo=-1.0, hi=1.0):
    v = round(float(rng.uniform(lo, hi)), 3)
    return f"({v})" if v < 0 else f"{v}"


def random_field(body, rng, theta=0.3, weight="slack", alpha=1.0, autonomous=False):
    """Random field on ``body`` rescaled so that its certificate is about ``theta``."""
    n = body.dim
    base = []
    for _ in range(n):
        terms = []
        for _ in range(2):
            tpl = _TEMPLATES[rng.integers(len(_TEMPLATES))]
            if autonomous:
                tpl = tpl.replace("+{c}*t", "").replace("+{b}*t", "")
            terms.append(tpl.format(a=_num(rng), b=_num(rng), c=_num(rng, 0.0, 1.0),
                                    i=rng.integers(n) + 1, j=rng.integers(n) + 1))
        base.append("+".join(terms))
    f = make_field(body, base, weight, alpha=alpha)
    lip = f.theta_bound
    if lip == 0:
        return f
    return f.scaled(0.99 * theta / lip)


def random_element(body, rng, theta=0.3, weight="slack"):
    """Analytic element ``id + gamma`` with ``Lip(gamma)`` about ``theta``."""
    return from_field(random_field(body, rng, theta, weight, autonomous=True))


def random_jet(rng, n, k, density=0.5, max_num=5, max_den=4):
    coeffs = {}
    for d in range(1, k + 1):
        for alpha in multi_indices(n, d):
            for i in range(n):
                if d == 1 or rng.random() < density:
                    num = int(rng.integers(-max_num, max_num + 1))
                    den = int(rng.integers(1, max_den + 1))
                    coeffs[(i, alpha)] = Fraction(num, den)
    return JetPoly(n, k, coeffs, exact=True)


def random_unit_jet(rng, n, k, **kw):
    while True:
        p = random_jet(rng, n, k, **kw)
        if jet_is_unit(p):
            return p
