"""Empirical friction coefficients kappa(h, v) and their level bounds."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable
import math

import numpy as np

from .errors import DomainError, NotHCompliantError


class FrictionModel:
    """Base class.  Subclasses implement `kappa` (vectorised in h and v)."""

    name = "base"

    def kappa(self, h, v, mu):
        raise NotImplementedError

    def h_bar(self, omega, mu):
        """Kbar(omega) with h^-2 kappa(h, v) <= Kbar(omega) on [omega, H_max] x R."""
        raise NotHCompliantError(f"friction model '{self.name}' grows with |v| and admits no level-only bound")

    @property
    def is_zero(self) -> bool:
        return False

    def to_dict(self) -> dict:
        d = {"model": self.name}
        d.update({k: v for k, v in self.__dict__.items() if not callable(v)})
        return d


@dataclass(frozen=True)
class Zero(FrictionModel):
    name = "zero"

    def kappa(self, h, v, mu):
        return np.zeros(np.broadcast(np.asarray(h), np.asarray(v)).shape)[()]

    def h_bar(self, omega, mu):
        return 0.0

    @property
    def is_zero(self):
        return True


@dataclass(frozen=True)
class CfAbsV(FrictionModel):
    """kappa = c_f |v|."""

    cf: float
    name = "cf_abs_v"

    def __post_init__(self):
        if not self.cf > 0:
            raise DomainError("cf must be positive")

    def kappa(self, h, v, mu):
        return self.cf * np.abs(v) + 0.0 * np.asarray(h)


@dataclass(frozen=True)
class LinearPlusHV(FrictionModel):
    """kappa = r0 + r1 h |v|."""

    r0: float
    r1: float = 0.0
    name = "linear_plus_hv"

    def __post_init__(self):
        if not (self.r0 > 0 and self.r1 >= 0):
            raise DomainError("need r0 > 0 and r1 >= 0")

    def kappa(self, h, v, mu):
        return self.r0 + self.r1 * np.asarray(h) * np.abs(v)

    def h_bar(self, omega, mu):
        # with r1 = 0 the law is a constant and therefore bounded
        if self.r1 == 0:
            return self.r0 / omega**2
        return super().h_bar(omega, mu)


@dataclass(frozen=True)
class DosSantos(FrictionModel):
    """kappa = r2 h^(-1/3) (b2 + 2h)^(4/3) |v|."""

    r2: float
    b2: float
    name = "dos_santos"

    def __post_init__(self):
        if not (self.r2 > 0 and self.b2 > 0):
            raise DomainError("need r2 > 0 and b2 > 0")

    def kappa(self, h, v, mu):
        h = np.asarray(h)
        return self.r2 * h ** (-1.0 / 3.0) * (self.b2 + 2.0 * h) ** (4.0 / 3.0) * np.abs(v)


@dataclass(frozen=True)
class GerbeauPerthame(FrictionModel):
    """Velocity-independent law kappa = 3 mu b3 / (3 mu + 4 b3 h)."""

    b3: float
    name = "gerbeau_perthame"

    def __post_init__(self):
        if not self.b3 > 0:
            raise DomainError("b3 must be positive")

    def kappa(self, h, v, mu):
        h = np.asarray(h)
        return 3.0 * mu * self.b3 / (3.0 * mu + 4.0 * self.b3 * h) + 0.0 * np.asarray(v)

    def h_bar(self, omega, mu):
        return 3.0 * mu * self.b3 / (omega**2 * (3.0 * mu + 4.0 * self.b3 * omega))


@dataclass(frozen=True)
class BoundedCustom(FrictionModel):
    """User law with a declared bound kappa <= kappa_max."""

    kappa_max: float
    func: Callable
    name = "bounded_custom"

    def __post_init__(self):
        if not self.kappa_max > 0:
            raise DomainError("kappa_max must be positive")

    def kappa(self, h, v, mu):
        k = np.asarray(self.func(h, v), dtype=float)
        if np.any(k < 0) or np.any(k > self.kappa_max * (1 + 1e-12)):
            raise DomainError("custom friction law leaves [0, kappa_max]")
        return k[()]

    def h_bar(self, omega, mu):
        return self.kappa_max / omega**2


MODELS = {cls.name: cls for cls in (Zero, CfAbsV, LinearPlusHV, DosSantos, GerbeauPerthame)}


def make_friction(name: str, **kw) -> FrictionModel:
    try:
        cls = MODELS[name]
    except KeyError:
        raise DomainError(f"unknown friction model '{name}', expected one of {sorted(MODELS)}") from None
    return cls(**kw)


def kappa_eval(model: FrictionModel, h, v, mu):
    """kappa(h, v) >= 0; raises DomainError for non-positive h."""
    if np.any(np.asarray(h) <= 0):
        raise DomainError("friction coefficient needs h > 0")
    return model.kappa(h, v, mu)


def h_bar_bound(model: FrictionModel, omega: float, params) -> float:
    """Kbar(omega) of the level-only bound; NotHCompliantError for |v|-growing laws."""
    if not 0 < omega <= params.h_star:
        raise DomainError(f"omega must lie in (0, h*], got {omega}")
    return float(model.h_bar(omega, params.mu))


def _golden_max(fun, a, b, tol=1e-10, maxit=200):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(maxit):
        if abs(b - a) <= tol * (1.0 + abs(a) + abs(b)):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    # include the ends: maxima of these laws often sit on the box boundary
    cands = [(fun(x), x) for x in (a, b, 0.5 * (a + b))]
    return max(cands)


def k_tilde_max(model: FrictionModel, omega1: float, omega2: float, H_max: float, mu: float,
                n_scan: int = 512) -> float:
    """max of h^-2 kappa(h, v) over [omega1, H_max] x [-omega2, omega2]."""
    if not (0 < omega1 <= H_max and omega2 > 0):
        raise DomainError("invalid box for the friction maximum")
    n_scan = max(int(n_scan), 512)
    hs = np.linspace(omega1, H_max, n_scan)
    vs = np.linspace(-omega2, omega2, n_scan)
    H, Vv = np.meshgrid(hs, vs, indexing="ij")
    F = np.asarray(model.kappa(H, Vv, mu), dtype=float) / H**2
    i, j = np.unravel_index(np.argmax(F), F.shape)
    best = float(F[i, j])
    h0, v0 = hs[i], vs[j]
    hlo, hhi = hs[max(i - 1, 0)], hs[min(i + 1, n_scan - 1)]
    vlo, vhi = vs[max(j - 1, 0)], vs[min(j + 1, n_scan - 1)]

    def obj(h, v):
        return float(model.kappa(h, v, mu)) / h**2

    # coordinate-wise golden-section refinement inside the neighbouring cells
    for _ in range(3):
        val, h0 = _golden_max(lambda h: obj(h, v0), hlo, hhi)
        best = max(best, val)
        val, v0 = _golden_max(lambda v: obj(h0, v), vlo, vhi)
        best = max(best, val)
    return best
