"""Invariants and comparison pipeline for heart-shaped two-saddle families.

A family with a saddle loop (hyperbolicity ratio nu1 = lam < 1) and an
outer boundary whose full monodromy expands (lam^2 mu > 1, so the
contraction-side exponent is nu2 = 1/(lam^2 mu)) generates two sparkling
connection sequences.  In double-log scale they are perturbed arithmetic
progressions; the classifying data is

    A    = -ln lam / ln(lam^2 mu)        relative density,
    tau  = (beta1 - beta2) / gamma       offset, invariant mod (1, A),
    Xi   = (t2 - t1) / a1                relative window scale,

with t_j = ln C_j / (1 - nu_j), a_j = t_j - ln B_j, beta_j = ln a_j,
gamma = -ln nu2.  Changing the cross-section mark B_j by whole turns of
its monodromy shifts tau along the lattice (1, A) and rescales Xi by
powers of nu_j, so only the stated residues are intrinsic.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from mpmath import mp, mpf

from . import connections as conn
from .errors import DomainError, InvalidInputError, RangeError, SolverError, TieError
from .monodromy import PerturbedPowerFamily
from .numerics import Precision
from .progressions import (
    InterleavingWord,
    PairInvariants,
    PerturbedProgression,
    ShiftPair,
    SearchBounds,
    equivalent_pairs,
    interleaving_word,
    irrationality_report,
    words_equivalent_up_to_shift,
)

# Rational window scales used when probing order obstructions.
Q_GRID = ("1/2", "2/3", "3/4", "4/3", "3/2", "2")

JOINT_SHIFT_BOUND = 64


@dataclass(frozen=True)
class HeartFamily:
    """Constants (lam, mu, C1, C2, B1, B2) of a heart-shaped unfolding.

    Hard requirements: 0 < lam < 1 < lam^2 mu, C_j > 0, B_j in (0, 1).
    Admissibility of the marks (positive double-log arguments) is the
    softer condition checked where invariants are actually formed.
    """

    lam: Any
    mu: Any
    C1: Any
    C2: Any
    B1: Any
    B2: Any

    def __post_init__(self):
        lam, mu = mpf(self.lam), mpf(self.mu)
        if not (0 < lam < 1):
            raise InvalidInputError(f"lam must lie in (0, 1), got {lam}")
        if not (lam ** 2 * mu > 1):
            raise InvalidInputError(f"need lam^2 mu > 1, got {lam ** 2 * mu}")
        for name in ("C1", "C2"):
            if not (mpf(getattr(self, name)) > 0):
                raise InvalidInputError(f"{name} must be positive")
        for name in ("B1", "B2"):
            if not (0 < mpf(getattr(self, name)) < 1):
                raise InvalidInputError(f"{name} must lie in (0, 1)")

    def nu(self, j: int, prec: Precision):
        with prec.work():
            if j == 1:
                return mpf(self.lam)
            if j == 2:
                return 1 / (mpf(self.lam) ** 2 * mpf(self.mu))
            raise InvalidInputError(f"side must be 1 or 2, got {j}")


@dataclass(frozen=True)
class InvariantReport:
    nu1: Any
    nu2: Any
    alpha: Any                # step of the loop progression, -ln nu1
    gamma: Any                # step of the outer progression, -ln nu2
    A: Any
    beta1: Any
    beta2: Any
    tau_prog: Any             # (beta1 - beta2)/gamma, the progression offset
    tau_paper: Any            # (beta1 - beta2)/ln nu2 = -tau_prog
    Xi: Any
    Theta: Any
    xi_coeff: Any             # t1/a1, positive-form window coefficient
    psi_coeff: Any            # t2/a2
    theta1: Any               # -xi_coeff: geometric coefficient of the loop progression
    theta2: Any               # -psi_coeff
    xi_nonzero: bool
    ln_abs_Xi: Optional[Any]
    res_mod_step2: Optional[Any]        # ln|Xi| reduced mod |ln nu2|, in [0, |ln nu2|)
    res_mod_step1: Optional[Any]        # ln|Xi| reduced mod |ln nu1|
    res_joint: Optional[Any]            # min |ln|Xi| - s ln nu2 - k ln nu1|, |k| bounded
    res_joint_shift: Optional[Tuple[int, int]]   # the achieving (s, k)
    joint_bound: int = JOINT_SHIFT_BOUND
    # The joint lattice {s ln nu2 + k ln nu1} is dense when A is irrational,
    # so res_joint is a bounded-search representative, not a canonical residue.


def _mod_pos(x, L):
    r = x - L * mp.floor(x / L)
    if r < 0:
        r += L
    if r >= L:
        r -= L
    return r


def _admissible_pieces(fam: HeartFamily, prec: Precision):
    with prec.work():
        nu1 = fam.nu(1, prec)
        nu2 = fam.nu(2, prec)
        t1 = mp.log(mpf(fam.C1)) / (1 - nu1)
        t2 = mp.log(mpf(fam.C2)) / (1 - nu2)
        a1 = t1 - mp.log(mpf(fam.B1))
        a2 = t2 - mp.log(mpf(fam.B2))
        for j, a in ((1, a1), (2, a2)):
            if a <= 0:
                raise DomainError(
                    f"mark B{j} is inadmissible (double-log argument {a} <= 0); "
                    "move it toward the polycycle, e.g. with re_mark"
                )
        return nu1, nu2, t1, t2, a1, a2


def invariants(fam: HeartFamily, prec: Precision) -> InvariantReport:
    """All classifying data of the family's progression pair."""
    nu1, nu2, t1, t2, a1, a2 = _admissible_pieces(fam, prec)
    with prec.work():
        alpha = -mp.log(nu1)
        gamma = -mp.log(nu2)
        A = alpha / gamma
        beta1, beta2 = mp.log(a1), mp.log(a2)
        tau_prog = (beta1 - beta2) / gamma
        Xi = (t2 - t1) / a1
        Theta = (t1 - t2) / a2
        xi_coeff = t1 / a1
        psi_coeff = t2 / a2
        xi_nonzero = abs(Xi) > prec.tol
        if xi_nonzero:
            lnXi = mp.log(abs(Xi))
            r2 = _mod_pos(lnXi, gamma)
            r1 = _mod_pos(lnXi, alpha)
            best = None
            for k in range(-JOINT_SHIFT_BOUND, JOINT_SHIFT_BOUND + 1):
                x = lnXi - k * mp.log(nu1)
                s = int(mp.nint(x / mp.log(nu2)))
                r = abs(x - s * mp.log(nu2))
                if best is None or r < best[0]:
                    best = (r, s, k)
            res_joint, js, jk = best
            joint_shift = (js, jk)
        else:
            lnXi = r2 = r1 = res_joint = joint_shift = None
        return InvariantReport(
            nu1=nu1, nu2=nu2, alpha=alpha, gamma=gamma, A=A,
            beta1=beta1, beta2=beta2,
            tau_prog=tau_prog, tau_paper=-tau_prog,
            Xi=Xi, Theta=Theta,
            xi_coeff=xi_coeff, psi_coeff=psi_coeff,
            theta1=-xi_coeff, theta2=-psi_coeff,
            xi_nonzero=xi_nonzero,
            ln_abs_Xi=lnXi,
            res_mod_step2=r2, res_mod_step1=r1,
            res_joint=res_joint, res_joint_shift=joint_shift,
        )


def progression_model(
    fam: HeartFamily, prec: Precision
) -> Tuple[PerturbedProgression, PerturbedProgression]:
    """The two connection sequences as perturbed progressions.

    Loop side: step -ln nu1, free beta1, geometric term theta1 nu1^n;
    outer side: step -ln nu2, free beta2, term theta2 nu2^m.  These are
    the exact two-term asymptotics of the solver sequences.
    """
    inv = invariants(fam, prec)
    loop = PerturbedProgression(step=inv.alpha, free=inv.beta1, coeff=inv.theta1, base=inv.nu1)
    outer = PerturbedProgression(step=inv.gamma, free=inv.beta2, coeff=inv.theta2, base=inv.nu2)
    return loop, outer


def connection_problems(fam: HeartFamily, prec: Precision):
    """Model connection problems whose sequences realize the two progressions."""
    nu1 = fam.nu(1, prec)
    nu2 = fam.nu(2, prec)
    loop = conn.ConnectionProblem(family=PerturbedPowerFamily(C=fam.C1, Lambda0=nu1), B0=fam.B1)
    outer = conn.ConnectionProblem(family=PerturbedPowerFamily(C=fam.C2, Lambda0=nu2), B0=fam.B2)
    return loop, outer


def re_mark(fam: HeartFamily, j: int, k: int, prec: Precision) -> HeartFamily:
    """Move mark B_j by k whole turns of its monodromy: B -> C^((1-nu^k)/(1-nu)) B^(nu^k).

    k may be negative.  Covariance: beta_j shifts by k ln nu_j, so
    tau_paper changes by kA (j = 1) or -k (j = 2), and Xi rescales by
    nu1^(-k) for j = 1 and is untouched for j = 2.
    """
    if j not in (1, 2):
        raise InvalidInputError(f"side must be 1 or 2, got {j}")
    if not isinstance(k, int):
        raise InvalidInputError(f"turn count must be an integer, got {k!r}")
    with prec.work():
        with mp.extraprec(64):
            nu = fam.nu(j, prec)
            C = mpf(fam.C1 if j == 1 else fam.C2)
            B = mpf(fam.B1 if j == 1 else fam.B2)
            nuk = nu ** k
            lnB_new = (1 - nuk) / (1 - nu) * mp.log(C) + nuk * mp.log(B)
            if lnB_new >= 0:
                raise RangeError(
                    f"re-marked B{j} = exp({lnB_new}) leaves (0, 1); fewer turns needed"
                )
            B_new = mp.exp(lnB_new)
        if B_new == 0:
            raise RangeError(f"re-marked B{j} underflows to 0 at {prec.bits} bits")
    kwargs = dict(lam=fam.lam, mu=fam.mu, C1=fam.C1, C2=fam.C2, B1=fam.B1, B2=fam.B2)
    kwargs["B1" if j == 1 else "B2"] = B_new
    return HeartFamily(**kwargs)


@dataclass(frozen=True)
class ObstructionReport:
    verdict: str                       # "possibly-equivalent" | "inequivalent"
    reason: Optional[str]
    shift: Optional[ShiftPair]
    witness: Optional[Dict[str, Any]]
    margins: Dict[str, Any]
    xi_congruence: Optional[Dict[str, Any]]
    irrationality: Optional[Any]
    checked_depth: int
    undecided: int = 0

    @property
    def inequivalent(self) -> bool:
        return self.verdict == "inequivalent"


def _sign_with_floor(v, floor):
    if abs(v) <= floor:
        return 0
    return 1 if v > 0 else -1


def _xi_congruence(inv1: InvariantReport, inv2: InvariantReport, prec: Precision):
    """Residues of ln|Xi2| - ln|Xi1| under the three candidate lattices.

    Which lattice makes the window scale marker-independent is left
    open; all three bounded-search residues are reported and none feeds
    the verdict.
    """
    if not (inv1.xi_nonzero and inv2.xi_nonzero):
        return {
            "Xi1": inv1.Xi, "Xi2": inv2.Xi,
            "defined": False,
            "note": "Xi vanishes for at least one family (non-generic)",
        }
    with prec.work():
        d = inv2.ln_abs_Xi - inv1.ln_abs_Xi
        out = {"Xi1": inv1.Xi, "Xi2": inv2.Xi, "defined": True,
               "ln_ratio": d, "ratio": mp.exp(d) * mp.sign(inv2.Xi) * mp.sign(inv1.Xi)}
        for label, step in (("step2", inv1.gamma), ("step1", inv1.alpha)):
            s = int(mp.nint(d / step))
            r = d - s * step
            out[f"res_{label}"] = r
            out[f"res_{label}_turns"] = s
            out[f"match_{label}"] = bool(abs(r) <= prec.tol * max(1, abs(d)))
        best = None
        for k in range(-JOINT_SHIFT_BOUND, JOINT_SHIFT_BOUND + 1):
            x = d - k * (-inv1.alpha)
            s = int(mp.nint(x / (-inv1.gamma)))
            r = abs(x - s * (-inv1.gamma))
            if best is None or r < best[0]:
                best = (r, s, k)
        out["res_joint"] = best[0]
        out["res_joint_turns"] = (best[1], best[2])
        out["note"] = "joint lattice is dense for irrational A; residues are reported, not adjudicated"
        return out


def compare(
    f1: HeartFamily,
    f2: HeartFamily,
    prec: Precision,
    depth: int = 10 ** 4,
    bounds: Optional[SearchBounds] = None,
    word_len: int = 2000,
    use_solver: bool = False,
    solver_N: int = 24,
) -> ObstructionReport:
    """Decide what obstructs an order-preserving identification of two families.

    Pipeline: (a) relative densities A must agree; (b) offsets tau must
    agree modulo (1, A) via an integer shift (s, p); (c) the interleaving
    order of the two progression pairs, sampled at good pairs
    |A n + tau - m| < 1/n up to n = depth, must coincide under the shift;
    (d) truncated interleaving words must agree under the shift.  A
    verdict of "inequivalent" always carries a concrete failed congruence
    or an order witness; "possibly-equivalent" is not a proof.

    With use_solver the progression values are taken from the connection
    solver (indices up to solver_N) instead of the closed model, closing
    the loop between the two routes.
    """
    bounds = bounds or SearchBounds()
    inv1 = invariants(f1, prec)
    inv2 = invariants(f2, prec)
    with prec.work():
        tol = mpf(bounds.tol) if bounds.tol is not None else mpf(prec.tol)
        irr = irrationality_report((inv1.A + inv2.A) / 2, prec)
        margins: Dict[str, Any] = {
            "A1": inv1.A, "A2": inv2.A, "A_gap": abs(inv1.A - inv2.A),
            "tau1": inv1.tau_prog, "tau2": inv2.tau_prog,
            "nu1_pair": (inv1.nu1, inv2.nu1), "nu2_pair": (inv1.nu2, inv2.nu2),
        }
        xicon = _xi_congruence(inv1, inv2, prec)
        if margins["A_gap"] > tol * max(1, abs(inv1.A), abs(inv2.A)):
            return ObstructionReport(
                verdict="inequivalent",
                reason="relative densities A differ (letter-frequency obstruction)",
                shift=None, witness=None, margins=margins,
                xi_congruence=xicon, irrationality=irr, checked_depth=0,
            )
        shift = equivalent_pairs(
            PairInvariants(A=inv1.A, tau=inv1.tau_prog),
            PairInvariants(A=inv2.A, tau=inv2.tau_prog),
            prec, bounds,
        )
        if shift is None:
            A = (inv1.A + inv2.A) / 2
            dtau = inv1.tau_prog - inv2.tau_prog
            best = min(
                abs(dtau - A * s - mp.nint(dtau - A * s))
                for s in range(-bounds.s_max, bounds.s_max + 1)
            )
            margins["tau_best_residual"] = best
            return ObstructionReport(
                verdict="inequivalent",
                reason="offsets tau incongruent modulo (1, A) within the shift box",
                shift=None, witness=None, margins=margins,
                xi_congruence=xicon, irrationality=irr, checked_depth=0,
            )
        margins["shift_residual"] = shift.residual

        if use_solver:
            loop1, outer1 = connection_problems(f1, prec)
            loop2, outer2 = connection_problems(f2, prec)
            A = inv1.A
            m_cap = int(mp.nint(A * solver_N + inv1.tau_prog)) + abs(shift.p) + 4
            iv1 = {e.n: e.z for e in conn.generate_sequence(loop1, solver_N, prec).entries}
            ev1 = {e.n: e.z for e in conn.generate_sequence(outer1, m_cap, prec).entries}
            iv2 = {e.n: e.z for e in conn.generate_sequence(loop2, solver_N + abs(shift.s) + 1, prec).entries}
            ev2 = {e.n: e.z for e in conn.generate_sequence(outer2, m_cap, prec).entries}
            val_i1 = lambda n: iv1[n]
            val_e1 = lambda m: ev1[m]
            val_i2 = lambda n: iv2[n]
            val_e2 = lambda m: ev2[m]
            scan_depth = min(depth, solver_N)
        else:
            i1, e1 = progression_model(f1, prec)
            i2, e2 = progression_model(f2, prec)
            val_i1 = lambda n: i1.value(n, prec)
            val_e1 = lambda m: e1.value(m, prec)
            val_i2 = lambda n: i2.value(n, prec)
            val_e2 = lambda m: e2.value(m, prec)
            scan_depth = depth

        A = inv1.A
        tau = inv1.tau_prog
        # Solver values carry bisection error ~ tol; model values only rounding.
        floor = mpf(prec.tol) * 64 if use_solver else mpf(2) ** (10 - prec.bits)
        undecided = 0
        witness = None
        for n in range(1, scan_depth + 1):
            pos = A * n + tau
            m = int(mp.nint(pos))
            if m < 1:
                continue
            D = pos - m
            if abs(D) * n >= 1:
                continue
            n2, m2 = n + shift.s, m - shift.p
            if n2 < 1 or m2 < 1:
                continue
            if use_solver and (n2 not in iv2 or m2 not in ev2 or m not in ev1):
                continue
            v1 = val_i1(n) - val_e1(m)
            v2 = val_i2(n2) - val_e2(m2)
            sfloor = floor * max(1, abs(v1), abs(v2))
            s1 = _sign_with_floor(v1, sfloor)
            s2 = _sign_with_floor(v2, sfloor)
            if s1 == 0 or s2 == 0:
                undecided += 1
                continue
            if s1 != s2:
                scale = (inv1.theta2 * inv1.nu2 ** tau - inv1.theta1) * inv1.nu1 ** n / inv1.gamma
                q_hits = []
                for q_str in Q_GRID:
                    q = mpf(q_str.split("/")[0]) / mpf(q_str.split("/")[1]) if "/" in q_str else mpf(q_str)
                    lo, hi = sorted((q * q * scale, q * scale))
                    if lo < D < hi:
                        q_hits.append(q_str)
                witness = {
                    "n": n, "m": m, "n2": n2, "m2": m2,
                    "D": D,
                    "order1": s1, "order2": s2,
                    "gap1": v1, "gap2": v2,
                    "window1": (val_e1(m) - val_i1(n)),
                    "q_hits": q_hits,
                }
                break
        if witness is not None:
            return ObstructionReport(
                verdict="inequivalent",
                reason="interleaving order disagrees at a good pair (window/base obstruction)",
                shift=shift, witness=witness, margins=margins,
                xi_congruence=xicon, irrationality=irr,
                checked_depth=scan_depth, undecided=undecided,
            )

        wl = min(word_len, 2 * scan_depth) if use_solver else word_len
        w1 = _merge_word(val_i1, val_e1, wl, prec)
        w2 = _merge_word(val_i2, val_e2, wl, prec)
        wv = words_equivalent_up_to_shift(w1, w2, shift)
        margins["word_overlap"] = wv.overlap_letters
        if not wv.equivalent:
            return ObstructionReport(
                verdict="inequivalent",
                reason="interleaving words disagree under the matched shift",
                shift=shift,
                witness={"word_disagreement": wv.first_disagreement},
                margins=margins, xi_congruence=xicon, irrationality=irr,
                checked_depth=scan_depth, undecided=undecided,
            )
        return ObstructionReport(
            verdict="possibly-equivalent",
            reason=None, shift=shift, witness=None,
            margins=margins, xi_congruence=xicon, irrationality=irr,
            checked_depth=scan_depth, undecided=undecided,
        )


def _merge_word(val_x, val_y, count: int, prec: Precision) -> InterleavingWord:
    """Ascending merge by direct value comparison (callable-backed)."""
    letters = []
    n, m = 1, 1
    xv, yv = val_x(1), val_y(1)
    with prec.work():
        tol = mpf(prec.tol) * mpf(2) ** (-prec.bits // 4)
        for _ in range(count):
            if abs(xv - yv) <= tol:
                raise TieError(f"values collide at (n={n}, m={m})", n=n, m=m)
            if xv < yv:
                letters.append("X")
                n += 1
                try:
                    xv = val_x(n)
                except KeyError:
                    break
            else:
                letters.append("Y")
                m += 1
                try:
                    yv = val_y(m)
                except KeyError:
                    break
    return InterleavingWord(letters="".join(letters))


def engineer_base_mismatch(
    fam: HeartFamily,
    new_lambda,
    n_star: int,
    prec: Precision,
) -> Tuple[HeartFamily, HeartFamily, Dict[str, Any]]:
    """Construct a pair with equal (A, tau) but different bases and a
    guaranteed order disagreement at a prescribed good pair.

    The second family takes lam = new_lambda with mu adjusted to keep A;
    both B1 marks are then solved so the two offsets coincide exactly and
    the fractional position at n = n_star lands strictly between the two
    families' order-flip thresholds.  Returns (f1', f2', meta) with the
    engineered witness location in meta.
    """
    if n_star < 5:
        raise InvalidInputError("n_star must be >= 5")
    inv0 = invariants(fam, prec)
    with prec.work():
        lam2 = mpf(new_lambda)
        if not (0 < lam2 < 1) or lam2 == mpf(fam.lam):
            raise InvalidInputError("new_lambda must lie in (0, 1) and differ from lam")
        A = inv0.A
        mu2 = mp.exp(-mp.log(lam2) / A) / lam2 ** 2
        nu1b, nu2b = lam2, mp.exp(mp.log(lam2) / A)
        gamma_b = -mp.log(nu2b)
        t1b = mp.log(mpf(fam.C1)) / (1 - nu1b)
        t2b = mp.log(mpf(fam.C2)) / (1 - nu2b)
        a2b = t2b - mp.log(mpf(fam.B2))
        if a2b <= 0:
            raise DomainError("outer mark of the engineered family is inadmissible")
        beta2b = mp.log(a2b)

        nu1, nu2 = inv0.nu1, inv0.nu2
        gamma = inv0.gamma
        t1 = mp.log(mpf(fam.C1)) / (1 - nu1)
        beta2 = inv0.beta2
        theta2 = inv0.theta2
        theta2b = -t2b / a2b

        tau = inv0.tau_prog
        m_star = int(mp.nint(A * n_star + tau))
        for _ in range(8):
            a1 = mp.exp(beta2 + gamma * tau)
            theta1 = -t1 / a1
            a1b = mp.exp(beta2b + gamma_b * tau)
            theta1b = -t1b / a1b
            w1 = (theta2 * nu2 ** m_star - theta1 * nu1 ** n_star) / gamma
            w2 = (theta2b * nu2b ** m_star - theta1b * nu1b ** n_star) / gamma_b
            d = (w1 + w2) / 2
            tau = m_star - A * n_star + d
        if abs(d) * n_star >= 1:
            raise SolverError("engineered position is not a good pair; pick larger n_star")
        sep = abs(w1 - w2)
        if sep <= mpf(2) ** (16 - prec.bits) * max(1, abs(w1), abs(w2)):
            raise SolverError("order-flip thresholds coincide; engineering failed")
        a1 = mp.exp(beta2 + gamma * tau)
        if a1 <= max(t1, 0):
            raise SolverError("engineered B1 inadmissible for the first family")
        B1n = mp.exp(t1 - a1)
        if not (0 < B1n < 1):
            raise SolverError("engineered B1 outside (0, 1)")
        a1b = mp.exp(beta2b + gamma_b * tau)
        if a1b <= max(t1b, 0):
            raise SolverError("engineered B1 inadmissible for the second family")
        B1b = mp.exp(t1b - a1b)
        if not (0 < B1b < 1):
            raise SolverError("engineered B1 outside (0, 1) for the second family")
        f1n = HeartFamily(lam=fam.lam, mu=fam.mu, C1=fam.C1, C2=fam.C2, B1=B1n, B2=fam.B2)
        f2n = HeartFamily(lam=lam2, mu=mu2, C1=fam.C1, C2=fam.C2, B1=B1b, B2=fam.B2)
        meta = {"n_star": n_star, "m_star": m_star, "D": d,
                "threshold1": w1, "threshold2": w2, "separation": sep}
        return f1n, f2n, meta
