"""Named runtime checks of the library's structural identities.

Each check exercises one invariant that must hold at any adequate
working precision: dual-route identities, round trips, solver-vs-model
agreement, shift recovery, nesting of certified windows.  The registry
is keyed by module so the CLI can run a filtered subset.  Checks assert
with informative messages; tight fixed tolerances (1e-20, 1e-30) are
deliberate so that running at very low precision surfaces as named
failures instead of silent degradation.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

from mpmath import mp, mpf

from . import connections as conn
from . import heart, liouville, monodromy, progressions
from .errors import InvalidInputError, PolylabError
from .numerics import LogValue, Precision, neg_log_add


def _rel(a, b):
    return abs(a - b) / max(1, abs(a), abs(b))


# --- numerics ---------------------------------------------------------------

def _check_log_roundtrip(prec: Precision):
    with prec.work():
        for x in (mpf("1e-9"), mpf("0.5"), mpf("0.999")):
            back = LogValue.from_x(x, prec).to_x(prec)
            assert _rel(back, x) < prec.tol, f"log roundtrip off at x={x}: {back}"


def _check_neg_log_add(prec: Precision):
    with prec.work():
        a, b = LogValue(mpf(2)), LogValue(mpf(100))
        got = neg_log_add(a, b, prec).y
        want = -mp.log(mp.exp(-2) + mp.exp(-100))
        assert _rel(got, want) < prec.tol, f"merge mismatch: {got} vs {want}"
        far = neg_log_add(LogValue(mpf(2)), LogValue(mpf(4 * prec.bits)), prec).y
        assert far == mpf(2), "short-circuit must return the dominant term exactly"


def _check_double_log_roundtrip(prec: Precision):
    from .numerics import DoubleLogValue
    with prec.work():
        for z in (mpf("-2"), mpf("0.5"), mpf("3")):
            back = DoubleLogValue.from_eps(DoubleLogValue(z).to_eps(prec), prec).z
            assert _rel(back, z) < prec.tol * 10, f"double-log roundtrip off at z={z}"


# --- monodromy --------------------------------------------------------------

def _check_closed_vs_composed(prec: Precision):
    with prec.work():
        pm = monodromy.PowerMap(C=mpf(3), nu=mpf("0.7"))
        y = LogValue(mpf(5))
        stepped = y
        for _ in range(30):
            stepped = monodromy.apply_log(pm, stepped, prec)
        closed = monodromy.closed_iterate(pm, y, 30, prec)
        assert abs(closed.y - stepped.y) <= mpf(2) ** (-(prec.bits // 2)), (
            f"closed iterate deviates: {closed.y - stepped.y}"
        )


def _check_model_envelope(prec: Precision):
    fam = monodromy.PerturbedPowerFamily(C=2, Lambda0="0.6")
    grid = monodromy.SandwichGrid(eps_values=("1e-8", "1e-6", "1e-4"), x_count=16)
    rep = monodromy.sandwich_check(fam, monodromy.SandwichBounds(k=1, x0="0.1"), grid, prec)
    assert rep.passed, f"envelope violated by {rep.max_violation}"


def _check_frozen_limit(prec: Precision):
    with prec.work():
        fam = monodromy.PerturbedPowerFamily(C=2, Lambda0="0.6")
        y = LogValue(mpf(7))
        via_family = monodromy.apply_family_log(fam, None, y, prec)
        via_frozen = monodromy.apply_log(fam.frozen(), y, prec)
        assert via_family.y == via_frozen.y, "eps = 0 must reduce to the frozen power map"


# --- connections ------------------------------------------------------------

def _model_problem():
    return conn.ConnectionProblem(
        family=monodromy.PerturbedPowerFamily(C=2, Lambda0="0.6"), B0="0.1"
    )


def _check_beta_theta_dual(prec: Precision):
    with prec.work():
        C, L, B = mpf(2), mpf("0.6"), mpf("0.1")
        b = conn.beta(C, L, B, prec)
        t = conn.theta(C, L, B, prec)
        dual = -mp.exp(-b) * mp.log(C) / (1 - L)
        assert _rel(t, dual) < mpf("1e-30"), (
            f"theta routes disagree by {_rel(t, dual)} (raise precision)"
        )


def _check_solver_matches_model(prec: Precision):
    prob = _model_problem()
    model = conn.asymptotic_model(prob, prec)
    with prec.work():
        z = conn.solve_connection(prob, 6, prec).z
        gap = abs(z - model.predict(6, prec))
        bound = mpf("0.6") ** 11
        assert gap < bound, f"solver strays from two-term model: {gap} >= {bound}"


def _check_recover_roundtrip(prec: Precision):
    prob = _model_problem()
    model = conn.asymptotic_model(prob, prec)
    seq = conn.synthetic_sequence(model, 14, prec)
    rec = conn.recover_parameters(seq, prec)
    with prec.work():
        assert _rel(rec.model.Lambda, model.Lambda) < mpf("1e-20"), (
            f"base recovery off by {_rel(rec.model.Lambda, model.Lambda)} (raise precision)"
        )
        assert _rel(rec.model.beta, model.beta) < mpf("1e-15"), "free-term recovery off"


# --- progressions -----------------------------------------------------------

def _fixed_pair(prec: Precision, s: int = 3, p: int = -2):
    with prec.work():
        A, tau = mp.sqrt(2), mpf("0.3")
        i1 = progressions.PairInvariants(A=A, tau=tau)
        i2 = progressions.PairInvariants(A=A, tau=tau - (A * s + p))
        return i1, i2


def _check_shift_roundtrip(prec: Precision):
    i1, i2 = _fixed_pair(prec)
    got = progressions.equivalent_pairs(i1, i2, prec)
    assert got is not None and (got.s, got.p) == (3, -2), f"recovered {got}"


def _check_word_shift(prec: Precision):
    with prec.work():
        A, tau = mp.sqrt(2), mpf("0.3")
        p1x = progressions.ArithmeticProgression(step=A, free=tau)
        p1y = progressions.ArithmeticProgression(step=1, free=0)
        s, p = 2, -1
        p2x = progressions.ArithmeticProgression(step=A, free=tau - (A * s + p))
        w1 = progressions.interleaving_word(p1x, p1y, 400, prec)
        w2 = progressions.interleaving_word(p2x, p1y, 400, prec)
        v = progressions.words_equivalent_up_to_shift(
            w1, w2, progressions.ShiftPair(s=s, p=p)
        )
        assert v.equivalent, f"shifted words disagree at {v.first_disagreement}"
        bad = progressions.words_equivalent_up_to_shift(
            w1, w2, progressions.ShiftPair(s=s, p=p + 1)
        )
        assert not bad.equivalent, "wrong shift must be rejected"


def _check_staircase(prec: Precision):
    w = progressions.InterleavingWord(letters="XXYXYYXY")
    assert w.staircase() == [2, 3, 3, 4], f"staircase {w.staircase()}"
    assert w.x_count == 4 and w.y_count == 4


def _check_reconstruct_contains_truth(prec: Precision):
    with prec.work():
        A, tau = mp.sqrt(2), mpf("0.3")
        px = progressions.ArithmeticProgression(step=A, free=tau)
        py = progressions.ArithmeticProgression(step=1, free=0)
        w = progressions.interleaving_word(px, py, 3000, prec)
        rec = progressions.reconstruct_invariants(w, prec)
        lo, hi = rec.tau_interval
        assert lo <= tau <= hi, f"tau {tau} outside [{lo}, {hi}]"
        assert abs(rec.invariants.A - A) < mpf("0.01"), "density estimate off"


# --- heart ------------------------------------------------------------------

_FAMILIES = (
    dict(lam="0.5", mu="5", C1="2", C2="3", B1="0.1", B2="0.2"),
    dict(lam="0.7", mu="3", C1="1.5", C2="0.8", B1="0.3", B2="0.05"),
    dict(lam="0.62", mu="4.1", C1="2.2", C2="1.1", B1="0.12", B2="0.33"),
)


def _check_scale_identities(prec: Precision):
    for kw in _FAMILIES:
        inv = heart.invariants(heart.HeartFamily(**kw), prec)
        with prec.work():
            lhs = mp.log(abs(inv.Xi)) - mp.log(abs(inv.Theta))
            assert _rel(lhs, inv.beta2 - inv.beta1) < mpf("1e-30"), (
                f"scale identity off for {kw} (raise precision)"
            )


def _check_window_bracket_identity(prec: Precision):
    for kw in _FAMILIES:
        inv = heart.invariants(heart.HeartFamily(**kw), prec)
        got = progressions.relative_scale_from_progressions(
            inv.xi_coeff, inv.psi_coeff, inv.nu2, inv.tau_prog, prec
        )
        assert _rel(got, inv.Xi) < mpf("1e-30"), f"window combination off for {kw}"


def _check_re_mark_covariance(prec: Precision):
    fam = heart.HeartFamily(**_FAMILIES[0])
    inv = heart.invariants(fam, prec)
    with prec.work():
        # Forward turns converge to the fixed point C^(1/(1-nu)), which
        # exceeds 1 for this family; keep k within the admissible range.
        for j, k in ((1, 1), (1, -2), (2, -3)):
            inv2 = heart.invariants(heart.re_mark(fam, j, k, prec), prec)
            if j == 1:
                want_tau = inv.tau_paper + k * inv.A
                want_Xi = inv.Xi * inv.nu1 ** (-k)
            else:
                want_tau = inv.tau_paper - k
                want_Xi = inv.Xi
            assert _rel(inv2.tau_paper, want_tau) < mpf("1e-25"), f"offset shift off (j={j}, k={k})"
            assert _rel(inv2.Xi, want_Xi) < mpf("1e-25"), f"scale covariance off (j={j}, k={k})"


def _check_self_compare(prec: Precision):
    fam = heart.HeartFamily(**_FAMILIES[0])
    rep = heart.compare(fam, fam, prec, depth=1500, word_len=600)
    assert rep.verdict == "possibly-equivalent", rep.reason
    assert (rep.shift.s, rep.shift.p) == (0, 0), f"self shift {rep.shift}"


# --- liouville --------------------------------------------------------------

def _toy_spec():
    return liouville.LiouvilleSpec(
        gamma=1, u="0.3", Xi="0.7", lam="0.6",
        q_list=("1/2", "2"), N_schedule=(10, 100),
    )


def _check_window_arithmetic(prec: Precision):
    spec = liouville.LiouvilleSpec(gamma=1, u=0, Xi=1, lam="0.5",
                                   q_list=("1/2",), N_schedule=(1,))
    lo, hi = liouville.q_window(spec, 3, 2, "1/2", prec)
    with prec.work():
        want_lo = mpf(2) / 3 + mpf("0.03125") / 3
        want_hi = mpf(2) / 3 + mpf("0.0625") / 3
        assert _rel(lo, want_lo) < prec.tol and _rel(hi, want_hi) < prec.tol, (
            f"window [{lo}, {hi}] vs [{want_lo}, {want_hi}]"
        )


def _check_depth1_verify(prec: Precision):
    spec = _toy_spec()
    A, ws = liouville.construct_A(spec, 1, prec)
    assert len(ws) == 1 and ws[0].n > 10, f"witness {ws[0]}"
    rep = liouville.verify(A, spec, ws, prec)
    assert rep.ok, f"verification failed: {rep.failures}"


def _check_perturb_detect(prec: Precision):
    spec = _toy_spec()
    A, ws = liouville.construct_A(spec, 1, prec)
    with prec.work():
        width = ws[0].interval[1] - ws[0].interval[0]
        rep = liouville.verify(A + 2 * width, spec, ws, prec)
        assert not rep.ok, "perturbed A must leave the window"


Check = Tuple[str, Callable[[Precision], None]]

CHECKS: Dict[str, List[Check]] = {
    "numerics": [
        ("log-roundtrip", _check_log_roundtrip),
        ("neg-log-add-merge", _check_neg_log_add),
        ("double-log-roundtrip", _check_double_log_roundtrip),
    ],
    "monodromy": [
        ("closed-vs-composed", _check_closed_vs_composed),
        ("model-envelope", _check_model_envelope),
        ("frozen-limit", _check_frozen_limit),
    ],
    "connections": [
        ("beta-theta-dual-route", _check_beta_theta_dual),
        ("solver-matches-model", _check_solver_matches_model),
        ("recover-roundtrip", _check_recover_roundtrip),
    ],
    "progressions": [
        ("shift-roundtrip", _check_shift_roundtrip),
        ("word-shift-consistency", _check_word_shift),
        ("staircase-definition", _check_staircase),
        ("reconstruct-contains-truth", _check_reconstruct_contains_truth),
    ],
    "heart": [
        ("scale-identities", _check_scale_identities),
        ("window-bracket-identity", _check_window_bracket_identity),
        ("re-mark-covariance", _check_re_mark_covariance),
        ("self-compare", _check_self_compare),
    ],
    "liouville": [
        ("window-arithmetic", _check_window_arithmetic),
        ("depth1-nest-verify", _check_depth1_verify),
        ("perturbation-detect", _check_perturb_detect),
    ],
}


@dataclass(frozen=True)
class CheckResult:
    module: str
    name: str
    passed: bool
    detail: str = ""


def run_selftests(prec: Precision, only: Optional[str] = None) -> List[CheckResult]:
    """Run the registered checks (optionally one module) and collect results."""
    if only is not None and only not in CHECKS:
        raise InvalidInputError(
            f"unknown module {only!r}; choose from {', '.join(sorted(CHECKS))}"
        )
    results: List[CheckResult] = []
    for module in sorted(CHECKS):
        if only is not None and module != only:
            continue
        for name, fn in CHECKS[module]:
            try:
                fn(prec)
            except AssertionError as exc:
                results.append(CheckResult(module, name, False, str(exc) or "assertion failed"))
            except PolylabError as exc:
                results.append(CheckResult(module, name, False, f"{type(exc).__name__}: {exc}"))
            else:
                results.append(CheckResult(module, name, True))
    return results
