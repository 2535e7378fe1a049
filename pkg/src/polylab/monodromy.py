"""Monodromy maps of a hyperbolic polycycle in the log chart.

The canonical return map along a saddle connection is x -> C x^nu, which
the log chart y = -ln x turns into the affine map y -> nu y - ln C.  A
perturbed family f_eps(x) = C x^Lambda(eps) + eps (1 + psi(x^Lambda, eps))
stays computable here for parameter values eps far below underflow: the
additive term enters through stable log-sum arithmetic.
"""

from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

from mpmath import mp, mpf

from .errors import (
    DegenerateExponentError,
    DomainError,
    InvalidInputError,
    ModelViolationError,
)
from .numerics import DoubleLogValue, LogValue, Precision, _neg_log_add_raw, to_mpf


@dataclass(frozen=True)
class PowerMap:
    """x -> C x^nu with C > 0, nu > 0."""

    C: Any
    nu: Any

    def __post_init__(self):
        if not (mpf(self.C) > 0):
            raise InvalidInputError(f"C must be positive, got {self.C}")
        if not (mpf(self.nu) > 0):
            raise InvalidInputError(f"nu must be positive, got {self.nu}")


def apply_log(pm: PowerMap, y: LogValue, prec: Precision) -> LogValue:
    """One application in the log chart: y -> nu y - ln C."""
    with prec.work():
        if y.is_endpoint:
            return LogValue(mp.inf)
        return LogValue(mpf(pm.nu) * mpf(y.y) - mp.log(mpf(pm.C)))


def closed_iterate(pm: PowerMap, y: LogValue, n: int, prec: Precision) -> LogValue:
    """n-th iterate in closed form: nu^n y - ((1 - nu^n)/(1 - nu)) ln C.

    Requires nu != 1 (otherwise the geometric sum degenerates) and n >= 0.
    """
    if n < 0:
        raise InvalidInputError(f"iterate count must be >= 0, got {n}")
    with prec.work():
        nu = mpf(pm.nu)
        if nu == 1:
            raise DegenerateExponentError("closed iterate undefined for nu == 1")
        if n == 0:
            return LogValue(mpf(y.y))
        if y.is_endpoint:
            return LogValue(mp.inf)
        nun = nu ** n
        return LogValue(nun * mpf(y.y) - (1 - nun) / (1 - nu) * mp.log(mpf(pm.C)))


@dataclass(frozen=True)
class PerturbedPowerFamily:
    """f_eps(x) = C x^Lambda(eps) + eps (1 + psi(x^Lambda(eps), eps)).

    Lambda(eps) = Lambda0 + Lambda1 * eps is affine in the parameter;
    psi(u, eps) is a user-supplied correction with psi(0, 0) = 0 and
    values > -1 on the working domain (declared, checked on evaluation).
    psi = None means the exactly solvable model psi == 0.
    """

    C: Any
    Lambda0: Any
    Lambda1: Any = 0
    psi: Optional[Callable[[Any, Any], Any]] = None

    def __post_init__(self):
        if not (mpf(self.C) > 0):
            raise InvalidInputError(f"C must be positive, got {self.C}")
        if not (0 < mpf(self.Lambda0) < 1):
            raise InvalidInputError(f"Lambda0 must lie in (0, 1), got {self.Lambda0}")

    def exponent(self, eps, prec: Precision):
        """Lambda(eps); must stay positive on the sampled parameter range."""
        with prec.work():
            lam = mpf(self.Lambda0) + mpf(self.Lambda1) * mpf(eps)
            if lam <= 0:
                raise DomainError(f"Lambda(eps) = {lam} <= 0 at eps = {mpf(eps)}")
            return lam

    def frozen(self) -> PowerMap:
        """The unperturbed map x -> C x^Lambda0."""
        return PowerMap(C=self.C, nu=self.Lambda0)


def check_psi_origin(fam: PerturbedPowerFamily, prec: Precision, tol=None) -> bool:
    """Evaluate the declared normalization psi(0, 0) = 0."""
    if fam.psi is None:
        return True
    with prec.work():
        val = mpf(fam.psi(mpf(0), mpf(0)))
        return abs(val) <= (tol if tol is not None else prec.tol)


def apply_family_log(
    fam: PerturbedPowerFamily,
    eps_z: Optional[DoubleLogValue],
    y: LogValue,
    prec: Precision,
) -> LogValue:
    """One application of f_eps in the log chart.

    eps enters only through z = ln(-ln eps); eps_z = None is the eps = 0
    flag, reducing to the unperturbed power map.  The two additive terms
    of f_eps are combined by stable log-sum arithmetic, so the result is
    finite even when both x and eps underflow linear scale.
    """
    if eps_z is None or eps_z.z == mp.inf:
        return apply_log(fam.frozen(), y, prec)
    with prec.work():
        E = mp.exp(mpf(eps_z.z))          # -ln eps > 0
        eps = mp.exp(-E)
        lam = fam.exponent(eps, prec)
        ya = mp.inf if y.is_endpoint else lam * mpf(y.y) - mp.log(mpf(fam.C))
        if fam.psi is None:
            yb = E
        else:
            u = mpf(0) if y.is_endpoint else mp.exp(-lam * mpf(y.y))
            psival = mpf(fam.psi(u, eps))
            if psival <= -1:
                raise ModelViolationError(
                    f"psi(u, eps) = {psival} <= -1 makes the perturbation nonpositive"
                )
            yb = E - mp.log(1 + psival)
        return LogValue(_neg_log_add_raw(ya, yb, prec))


@dataclass(frozen=True)
class SandwichBounds:
    """Envelope constants: (C - k eps^(1-L)) x^L < f_eps(x) < (C + k eps^(1-L)) x^L.

    Valid on eps < x < x0 (or eps/2 < x when halved_domain is set on the
    grid); L is the frozen exponent Lambda(0).
    """

    k: Any
    x0: Any

    def __post_init__(self):
        if not (mpf(self.k) > 0):
            raise InvalidInputError(f"k must be positive, got {self.k}")
        if not (0 < mpf(self.x0) < 1):
            raise InvalidInputError(f"x0 must lie in (0, 1), got {self.x0}")


@dataclass(frozen=True)
class SandwichGrid:
    """Sampling plan: for each eps, x runs log-spaced over (lower, x0)."""

    eps_values: Sequence[Any]
    x_count: int = 32
    halved_domain: bool = False

    def __post_init__(self):
        if self.x_count < 1:
            raise InvalidInputError("x_count must be >= 1")
        if not self.eps_values:
            raise InvalidInputError("grid needs at least one eps sample")


@dataclass(frozen=True)
class SandwichReport:
    passed: bool
    max_violation: Any          # max over grid of deviation - k eps^(1-L); <= 0 passes
    max_normalized_violation: Any
    empirical_k: Any            # smallest constant that would have passed this grid


def _deviation(fam: PerturbedPowerFamily, eps, x, L0, prec: Precision):
    """|f_eps(x) / x^L0 - C| computed through the log chart."""
    y = LogValue.from_x(x, prec)
    z = DoubleLogValue.from_eps(eps, prec)
    yf = apply_family_log(fam, z, y, prec)
    with prec.work():
        # ln(f / (C x^L0)) = L0 * y - yf - ln C ... then C*(ratio - 1)
        lnratio = L0 * mpf(y.y) - mpf(yf.y) - mp.log(mpf(fam.C))
        return abs(mpf(fam.C) * mp.expm1(lnratio))


def _grid_points(eps, x0, count, halved, prec: Precision):
    with prec.work():
        lower = mpf(eps) / 2 if halved else mpf(eps)
        if lower >= mpf(x0):
            raise InvalidInputError(f"eps = {mpf(eps)} leaves empty domain below x0 = {mpf(x0)}")
        llo, lhi = mp.log(lower), mp.log(mpf(x0))
        return [mp.exp(llo + (lhi - llo) * mpf(j + 1) / (count + 1)) for j in range(count)]


def sandwich_check(
    fam: PerturbedPowerFamily,
    bounds: SandwichBounds,
    grid: SandwichGrid,
    prec: Precision,
) -> SandwichReport:
    """Verify the power-map envelope on the sampling grid.

    Reports the worst signed violation (negative means the bound held
    with room to spare) and the empirical minimal k for this grid.
    """
    with prec.work():
        L0 = mpf(fam.Lambda0)
        k = to_mpf(bounds.k, prec)
        worst = mp.ninf
        worst_norm = mp.ninf
        emp_k = mpf(0)
        for eps in grid.eps_values:
            ev = to_mpf(eps, prec)
            if not (0 < ev < mpf(bounds.x0)):
                raise InvalidInputError(f"eps = {ev} outside (0, x0)")
            scale = ev ** (1 - L0)
            allowance = k * scale
            for x in _grid_points(ev, bounds.x0, grid.x_count, grid.halved_domain, prec):
                dev = _deviation(fam, ev, x, L0, prec)
                worst = max(worst, dev - allowance)
                worst_norm = max(worst_norm, (dev - allowance) / allowance)
                emp_k = max(emp_k, dev / scale)
        return SandwichReport(
            passed=bool(worst < 0),
            max_violation=worst,
            max_normalized_violation=worst_norm,
            empirical_k=emp_k,
        )


def envelope_profile(
    fam: PerturbedPowerFamily,
    eps_values: Sequence[Any],
    x0,
    prec: Precision,
    x_count: int = 32,
    halved_domain: bool = False,
):
    """Per-eps minimal envelope constants.

    Returns [(eps, k_hat, k_hat / eps^(1-L0))]; the third entry staying
    bounded as eps shrinks is the O(eps^(1-Lambda)) envelope scaling.
    """
    out = []
    with prec.work():
        L0 = mpf(fam.Lambda0)
        for eps in eps_values:
            ev = to_mpf(eps, prec)
            if not (0 < ev < mpf(x0)):
                raise InvalidInputError(f"eps = {ev} outside (0, x0)")
            khat = mpf(0)
            for x in _grid_points(ev, x0, x_count, halved_domain, prec):
                khat = max(khat, _deviation(fam, ev, x, L0, prec))
            out.append((ev, khat, khat / ev ** (1 - L0)))
    return out
