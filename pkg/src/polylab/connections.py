"""Sparkling-connection parameter sequences and their asymptotics.

A separatrix connection that a perturbation re-creates repeatedly shows
up as a parameter sequence eps_n -> 0 solving f_eps^(n+1)(0) = B(eps),
where B marks the incoming separatrix.  In double-log coordinates
z = ln(-ln eps) the sequence is asymptotically affine in n:

    z_n = -n ln L + beta + theta L^n + o(L^n),      L = Lambda(0),

with explicit beta and theta.  This module solves the connection
equations at arbitrary precision, generates sequences, and fits the
asymptotic model back out of data.
"""

from dataclasses import dataclass
from statistics import median
from typing import Any, Callable, Optional, Tuple

from mpmath import mp, mpf

from .errors import (
    BracketError,
    DegenerateExponentError,
    DomainError,
    FitFailureError,
    InvalidInputError,
    ModelViolationError,
)
from .monodromy import PerturbedPowerFamily
from .numerics import DoubleLogValue, Precision


def beta(C, nu, B, prec: Precision):
    """Free term of the double-log asymptotics: ln(ln C / (1 - nu) - ln B).

    Defined when the argument is positive; nu == 1 is degenerate.
    """
    with prec.work():
        Cv, nuv, Bv = mpf(C), mpf(nu), mpf(B)
        if nuv == 1:
            raise DegenerateExponentError("beta undefined for nu == 1")
        if Cv <= 0 or Bv <= 0:
            raise DomainError("beta needs C > 0 and B > 0")
        arg = mp.log(Cv) / (1 - nuv) - mp.log(Bv)
        if arg <= 0:
            raise DomainError(
                f"ln C/(1-nu) - ln B = {arg} <= 0: mark B inadmissible for these constants"
            )
        return mp.log(arg)


def theta(C, Lambda, B, prec: Precision):
    """Coefficient of the geometric correction L^n in the double-log asymptotics.

    theta = -(ln C/(1-L) - ln B)^(-1) * ln C/(1-L); equivalently
    -exp(-beta) * ln C/(1-L).  C = 1 gives theta = 0.
    """
    with prec.work():
        Cv, Lv, Bv = mpf(C), mpf(Lambda), mpf(B)
        if Lv == 1:
            raise DegenerateExponentError("theta undefined for Lambda == 1")
        if Cv <= 0 or Bv <= 0:
            raise DomainError("theta needs C > 0 and B > 0")
        t = mp.log(Cv) / (1 - Lv)
        arg = t - mp.log(Bv)
        if arg <= 0:
            raise DomainError(f"ln C/(1-L) - ln B = {arg} <= 0")
        return -t / arg


@dataclass(frozen=True)
class ConnectionProblem:
    """Connection equation f_eps^(n+1)(0) = B(eps) with B(eps) = B0 + B1 eps."""

    family: PerturbedPowerFamily
    B0: Any
    B1: Any = 0

    def __post_init__(self):
        if not (0 < mpf(self.B0) < 1):
            raise DomainError(f"B0 must lie in (0, 1), got {self.B0}")


@dataclass(frozen=True)
class AsymptoticModel:
    """z_n = -n ln Lambda + beta + theta Lambda^n."""

    Lambda: Any
    beta: Any
    theta: Any

    def __post_init__(self):
        if not (0 < mpf(self.Lambda) < 1):
            raise InvalidInputError(f"Lambda must lie in (0, 1), got {self.Lambda}")

    def predict(self, n: int, prec: Precision):
        with prec.work():
            L = mpf(self.Lambda)
            return -n * mp.log(L) + mpf(self.beta) + mpf(self.theta) * L ** n


def asymptotic_model(prob: ConnectionProblem, prec: Precision) -> AsymptoticModel:
    """Model induced by the frozen constants (C, Lambda(0), B(0))."""
    fam = prob.family
    with prec.work():
        return AsymptoticModel(
            Lambda=mpf(fam.Lambda0),
            beta=beta(fam.C, fam.Lambda0, prob.B0, prec),
            theta=theta(fam.C, fam.Lambda0, prob.B0, prec),
        )


@dataclass(frozen=True)
class ConnectionEntry:
    n: int
    z: Any
    bracket_width: Any


@dataclass(frozen=True)
class ConnectionSequence:
    entries: Tuple[ConnectionEntry, ...]

    def __len__(self):
        return len(self.entries)

    def z_values(self):
        return [e.z for e in self.entries]


@dataclass(frozen=True)
class SolverConfig:
    tol_w: Optional[Any] = None       # None: use prec.tol
    bracket_radius: Any = 1
    max_doublings: int = 60


def _orbit_gap_fn(prob: ConnectionProblem, n: int, prec: Precision) -> Callable[[Any], Any]:
    """Residual g(w) = y_final - (-ln B(eps)) at w = ln(-ln eps).

    g is increasing in w for admissible data: smaller eps pushes the
    whole orbit toward the polycycle (larger y).
    """
    fam = prob.family
    lnC = mp.log(mpf(fam.C))
    L0, L1 = mpf(fam.Lambda0), mpf(fam.Lambda1)
    B0, B1 = mpf(prob.B0), mpf(prob.B1)
    psi = fam.psi
    ln2cap = prec.bits * mp.log(2) + 2

    def gap(w):
        E = mp.exp(w)                 # -ln eps
        eps = mp.exp(-E)
        lam = L0 + L1 * eps
        if lam <= 0:
            raise DomainError(f"Lambda(eps) = {lam} <= 0 during solve")
        mark = B0 + B1 * eps
        if not (0 < mark < 1):
            raise DomainError(f"B(eps) = {mark} left (0, 1) during solve")
        if psi is None:
            y = E
            for _ in range(n):
                ya = lam * y - lnC
                lo, hi2 = (ya, E) if ya <= E else (E, ya)
                d = hi2 - lo
                if d > ln2cap:
                    y = lo
                else:
                    with mp.extraprec(16):
                        y = lo - mp.log(1 + mp.exp(-d))
        else:
            p0 = mpf(psi(mpf(0), eps))
            if p0 <= -1:
                raise ModelViolationError(f"psi(0, eps) = {p0} <= -1")
            y = E - mp.log(1 + p0)
            for _ in range(n):
                ya = lam * y - lnC
                u = mp.exp(-lam * y)
                pv = mpf(psi(u, eps))
                if pv <= -1:
                    raise ModelViolationError(f"psi(u, eps) = {pv} <= -1")
                yb = E - mp.log(1 + pv)
                lo, hi2 = (ya, yb) if ya <= yb else (yb, ya)
                d = hi2 - lo
                if d > ln2cap:
                    y = lo
                else:
                    with mp.extraprec(16):
                        y = lo - mp.log(1 + mp.exp(-d))
        return y + mp.log(mark)

    return gap


def _bisect_connection(prob: ConnectionProblem, n: int, prec: Precision, cfg: SolverConfig):
    """Returns (w_root, final_bracket_width)."""
    with prec.work():
        model = asymptotic_model(prob, prec)
        center = model.predict(n, prec)
        tol = mpf(cfg.tol_w) if cfg.tol_w is not None else mpf(prec.tol)
        gap = _orbit_gap_fn(prob, n, prec)
        r = mpf(cfg.bracket_radius)
        lo, hi = center - r, center + r
        glo, ghi = gap(lo), gap(hi)
        if glo > 0 and ghi < 0:
            raise ModelViolationError(
                f"residual decreases across initial bracket at n = {n}; "
                "family violates monotonicity in eps"
            )
        doublings = 0
        while not (glo <= 0 <= ghi):
            if doublings >= cfg.max_doublings:
                raise BracketError(
                    f"no sign change after {cfg.max_doublings} doublings at n = {n}"
                )
            r *= 2
            if glo > 0:               # root lies to the left
                hi, ghi = lo, glo
                lo = center - r
                glo = gap(lo)
            else:                     # root lies to the right
                lo, glo = hi, ghi
                hi = center + r
                ghi = gap(hi)
            doublings += 1
        while hi - lo > tol:
            mid = (lo + hi) / 2
            if mid == lo or mid == hi:
                break                 # mantissa exhausted
            if gap(mid) < 0:
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2, hi - lo


def solve_connection(
    prob: ConnectionProblem, n: int, prec: Precision, cfg: Optional[SolverConfig] = None
) -> DoubleLogValue:
    """Solve the n-th connection equation; returns z_n = ln(-ln eps_n).

    The equation f_eps^(n+1)(0) = B(eps) is solved as
    f_eps^n(f_eps(0)) = B(eps) with f_eps(0) = eps (1 + psi(0, eps)),
    by monotone bisection in w = ln(-ln eps) started from the
    asymptotic-model prediction.
    """
    if n < 0:
        raise InvalidInputError(f"index must be >= 0, got {n}")
    w, _ = _bisect_connection(prob, n, prec, cfg or SolverConfig())
    return DoubleLogValue(w)


def generate_sequence(
    prob: ConnectionProblem, N: int, prec: Precision, cfg: Optional[SolverConfig] = None
) -> ConnectionSequence:
    """Solve for n = 0..N; the resulting z_n must be strictly increasing."""
    if N < 0:
        raise InvalidInputError(f"N must be >= 0, got {N}")
    cfg = cfg or SolverConfig()
    entries = []
    prev = None
    for n in range(N + 1):
        w, width = _bisect_connection(prob, n, prec, cfg)
        if prev is not None and not (w > prev):
            raise ModelViolationError(f"z_{n} = {w} does not exceed z_{n-1} = {prev}")
        prev = w
        entries.append(ConnectionEntry(n=n, z=w, bracket_width=width))
    return ConnectionSequence(entries=tuple(entries))


def synthetic_sequence(
    model: AsymptoticModel,
    N: int,
    prec: Precision,
    extra: Optional[Callable[[int], Any]] = None,
    n_start: int = 0,
) -> ConnectionSequence:
    """Exact model data (plus an optional injected term) for fitting tests."""
    entries = []
    with prec.work():
        for n in range(n_start, n_start + N + 1):
            z = model.predict(n, prec)
            if extra is not None:
                z = z + mpf(extra(n))
            entries.append(ConnectionEntry(n=n, z=z, bracket_width=mpf(0)))
    return ConnectionSequence(entries=tuple(entries))


def bracket_double_logs(prob: ConnectionProblem, n: int, z_n, k, prec: Precision):
    """Closed-form straddle of z_n from the envelope maps.

    The comparison maps (C -+ k eps^(1-L)) x^L solve their connection
    equations in closed form; transposed to double-log scale the lower
    one sits below z_n and the upper one above:

        z_lo = -n ln L + ln(-ln B(eps_n) + (1-L^n)/(1-L) ln(C - k eps_n^(1-L)))

    and symmetrically with + for z_hi.  Uses the frozen exponent L =
    Lambda(0); meaningful for the model case Lambda1 = 0, psi = 0.
    """
    with prec.work():
        L = mpf(prob.family.Lambda0)
        C = mpf(prob.family.C)
        zv = mpf(z_n.z if isinstance(z_n, DoubleLogValue) else z_n)
        eps = mp.exp(-mp.exp(zv))
        mark = mpf(prob.B0) + mpf(prob.B1) * eps
        if not (0 < mark < 1):
            raise DomainError(f"B(eps_n) = {mark} outside (0, 1)")
        kk = mpf(k) * eps ** (1 - L)
        out = []
        for sign in (-1, 1):
            Cs = C + sign * kk
            if Cs <= 0:
                raise DomainError(f"envelope constant C {'-' if sign < 0 else '+'} k eps^(1-L) = {Cs} <= 0")
            arg = -mp.log(mark) + (1 - L ** n) / (1 - L) * mp.log(Cs)
            if arg <= 0:
                raise DomainError("double-log argument nonpositive in closed-form bracket")
            out.append(-n * mp.log(L) + mp.log(arg))
        return out[0], out[1]


@dataclass(frozen=True)
class ResidualReport:
    residuals: Tuple[Any, ...]
    normalized: Tuple[Any, ...]
    tail_start: int
    verdict: str                     # "consistent" | "inconsistent"


def residual_analysis(
    seq: ConnectionSequence, model: AsymptoticModel, prec: Precision
) -> ResidualReport:
    """Residuals R_n = z_n - prediction and the o(L^n) consistency verdict.

    Verdict is "consistent" iff the normalized residuals |R_n| / L^n do
    not grow over the last third of the sequence (values at solver noise
    level count as zero).
    """
    if len(seq) < 8:
        raise InvalidInputError(f"need at least 8 entries, got {len(seq)}")
    with prec.work():
        L = mpf(model.Lambda)
        ulp = mpf(2) ** (4 - prec.bits)
        resid, norm = [], []
        for e in seq.entries:
            r = mpf(e.z) - model.predict(e.n, prec)
            scale = L ** e.n
            floor = (mpf(e.bracket_width) + abs(mpf(e.z)) * ulp) / scale
            v = abs(r) / scale
            resid.append(r)
            norm.append(mpf(0) if v <= floor else v)
        k = len(norm)
        tail_start = k - max(2, k // 3)
        tail = norm[tail_start:]
        ok = all(tail[i + 1] <= tail[i] * mpf("1.05") for i in range(len(tail) - 1))
        if ok and tail[0] > 0:
            ok = tail[-1] <= tail[0]
        return ResidualReport(
            residuals=tuple(resid),
            normalized=tuple(norm),
            tail_start=tail_start,
            verdict="consistent" if ok else "inconsistent",
        )


@dataclass(frozen=True)
class RecoveryReport:
    model: AsymptoticModel
    theta_flagged_zero: bool
    ratio_spread: Any


def recover_parameters(seq: ConnectionSequence, prec: Precision) -> RecoveryReport:
    """Fit (Lambda, beta, theta) back out of a sequence.

    Second differences of z_n kill both the linear part and the free
    term and leave theta L^n (1-L)^2, an exactly geometric tail; ratios
    of consecutive second differences estimate L, then theta, then beta
    by extrapolated intercept.  A tail below the noise floor flags
    theta = 0 (no geometric correction resolvable).
    """
    if len(seq) < 10:
        raise InvalidInputError(f"need at least 10 entries, got {len(seq)}")
    with prec.work():
        ns = [e.n for e in seq.entries]
        if any(ns[i + 1] - ns[i] != 1 for i in range(len(ns) - 1)):
            raise InvalidInputError("entries must have consecutive indices")
        zs = [mpf(e.z) for e in seq.entries]
        d1 = [zs[i + 1] - zs[i] for i in range(len(zs) - 1)]
        d2 = [d1[i + 1] - d1[i] for i in range(len(d1) - 1)]
        zmax = max(abs(z) for z in zs)
        floor = 16 * (max(mpf(e.bracket_width) for e in seq.entries) + zmax * mpf(2) ** (4 - prec.bits))

        usable = [i for i in range(len(d2)) if abs(d2[i]) > 4 * floor]
        if len(usable) < 3:
            half = d1[len(d1) // 2:]
            step = sum(half) / len(half)
            L = mp.exp(-step)
            if not (0 < L < 1):
                raise FitFailureError(f"step estimate exp(-{step}) outside (0, 1)")
            b = sum(zs[i] + ns[i] * mp.log(L) for i in range(len(zs))) / len(zs)
            return RecoveryReport(
                model=AsymptoticModel(Lambda=L, beta=b, theta=mpf(0)),
                theta_flagged_zero=True,
                ratio_spread=mpf(0),
            )

        pairs = [(i, i + 1) for i in usable if i + 1 in set(usable)]
        if len(pairs) < 2:
            raise FitFailureError("resolvable second differences are too sparse")
        ratios = [d2[j] / d2[i] for i, j in pairs]
        tail = ratios[-max(3, len(ratios) // 3):]
        if any(r <= 0 for r in tail):
            raise FitFailureError("second differences alternate in sign; residuals not geometric")
        med = mpf(median(tail))
        spread = max(abs(r / med - 1) for r in tail)
        if spread > mpf("0.3"):
            raise FitFailureError(
                f"second-difference ratios vary by {spread}; residuals not geometric"
            )
        L = med
        if not (0 < L < 1):
            raise FitFailureError(f"geometric ratio {L} outside (0, 1)")
        window = usable[-max(3, len(usable) // 3):]
        th = sum(d2[i] / (L ** ns[i] * (1 - L) ** 2) for i in window) / len(window)
        half = range(len(zs) // 2, len(zs))
        b = sum(zs[i] + ns[i] * mp.log(L) - th * L ** ns[i] for i in half) / len(half)
        return RecoveryReport(
            model=AsymptoticModel(Lambda=L, beta=b, theta=th),
            theta_flagged_zero=False,
            ratio_spread=spread,
        )
