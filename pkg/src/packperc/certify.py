"""Machine-checkable evaluation of the explicit inequalities behind the decay bounds.

Every certificate entry stores its left-hand side as a Python expression in
the names ``p, d, eps, m0, C, exp, T, Tpoly``; :func:`evaluate_formula`
recomputes it from the formula text alone.  A fixed slack of 1e-12 is added
to every left-hand side before it is compared with the right-hand side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SLACK = 1e-12
M0_CAP = 1000


class CertificationError(ValueError):
    pass


class InfeasibleError(CertificationError):
    """No admissible m0 up to the search cap."""


def tail_sum_linear(x: float, m0: int) -> float:
    """Sum over m >= m0 of m * x**m in closed form."""
    if not 0.0 < x < 1.0:
        raise ValueError(f"tail sum needs 0 < x < 1, got {x}")
    if m0 < 1:
        raise ValueError("m0 must be at least 1")
    return x**m0 * (m0 - (m0 - 1) * x) / (1.0 - x) ** 2


def tail_sum_poly(x: float, m0: int, d: int, a: float, b: float, rel: float = 1e-16,
                  max_terms: int = 1_000_000) -> tuple[float, float]:
    """Sum over m >= m0 of (a*m + b)**d * x**m.

    Terms are summed until the geometric bound on the remainder falls below
    ``rel`` times the partial sum (or the terms underflow).  Returns
    ``(partial sum, remainder bound)``.
    """
    if not 0.0 < x < 1.0:
        raise ValueError(f"tail sum needs 0 < x < 1, got {x}")
    if a < 0 or b < 0 or d < 1 or int(d) != d:
        raise ValueError("need a, b >= 0 and an integer d >= 1")
    lx = math.log(x)

    def log_term(m):
        base = a * m + b
        return -math.inf if base <= 0 else d * math.log(base) + m * lx

    def ratio(m):
        # bound on term(j+1)/term(j) for all j >= m (the ratio decreases in m)
        base = a * m + b
        if base <= 0:
            return x
        return ((a * (m + 1) + b) / base) ** d * x

    total = 0.0
    m = m0
    for _ in range(max_terms):
        lt = log_term(m)
        if lt > 700.0:
            return math.inf, math.inf
        total += math.exp(lt)
        q = ratio(m + 1)
        if q < 1.0:
            nxt = math.exp(min(log_term(m + 1), 700.0))
            rem = nxt / (1.0 - q)
            if rem <= rel * total or rem == 0.0:
                return total, rem
        m += 1
    raise CertificationError("tail sum did not converge within the term cap")


def Tpoly(x, m0, d, a, b) -> float:
    """Value plus remainder bound of :func:`tail_sum_poly` (an upper bound)."""
    v, r = tail_sum_poly(x, int(m0), int(d), a, b)
    return v + r


_NAMESPACE = {"exp": math.exp, "T": tail_sum_linear, "Tpoly": Tpoly, "max": max, "min": min, "pi": math.pi}


def evaluate_formula(formula: str, **values) -> float:
    return float(eval(formula, {"__builtins__": {}}, {**_NAMESPACE, **values}))


@dataclass
class Entry:
    name: str
    formula: str
    lhs: float
    rhs: float
    strict: bool = False
    note: str = ""

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        v = self.lhs + SLACK
        ok = v < self.rhs if self.strict else v <= self.rhs
        return bool(ok and math.isfinite(self.margin))

    def to_dict(self) -> dict:
        return {"name": self.name, "formula": self.formula, "lhs": self.lhs, "rhs": self.rhs,
                "margin": self.margin, "pass": self.passed, "strict": self.strict, "note": self.note}


@dataclass
class Certificate:
    entries: list[Entry]
    p: float
    d: int | None = None
    epsilon: float | None = None
    m0: int | None = None
    C: float = 1.0

    @property
    def overall(self) -> bool:
        return all(e.passed for e in self.entries)

    def variables(self) -> dict:
        return {"p": self.p, "d": self.d, "eps": self.epsilon, "m0": self.m0, "C": self.C}

    def recheck(self) -> bool:
        """Recompute every lhs from its formula and compare with the stored value."""
        env = self.variables()
        return all(math.isclose(evaluate_formula(e.formula, **env), e.lhs, rel_tol=1e-12, abs_tol=1e-300)
                   for e in self.entries)

    def to_dict(self) -> dict:
        return {"entries": [e.to_dict() for e in self.entries], "overall": self.overall, "p": self.p,
                "d": self.d, "epsilon": self.epsilon, "m0": self.m0, "C": self.C}


def _entry(name, formula, rhs, env, strict=False, note=""):
    return Entry(name, formula, evaluate_formula(formula, **env), rhs, strict, note)


# ---------------------------------------------------------------------------
# square packings

SQUARE_FORMULAS = {
    "a_base_case": ("max(8*p*exp(2), 8*p**2)", 1.0, False,
                    "k = 0: 8p <= e^-2 and 8p^2 <= 1 give p(8p)^(ceil(r)+1) <= e^(-2r) for all r > 0"),
    "b_small_r": ("p", math.exp(-2.0), False, "0 < r <= 2^k: P(s0 open) = p <= e^-2"),
    "c_induction": ("4*exp(-2) + 544*p*exp(18) + 80*exp(4)*T(exp(-2), 8)", 1.0, False,
                    "induction closure with shell counts 136 and 20m"),
    "d_infinity": ("361*p + 24*T(exp(-1), 8)", 1.0, True,
                   "unbounded sizes: |S(0)| <= 19^2, |S(m)| <= 24m"),
}


def certify_square_theorem(p: float) -> Certificate:
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    env = {"p": p}
    entries = [_entry(name, f, rhs, env, strict, note) for name, (f, rhs, strict, note) in SQUARE_FORMULAS.items()]
    return Certificate(entries, p)


def max_certified_p(rel: float = 1e-3) -> float:
    """Largest p (to ``rel`` relative) passing :func:`certify_square_theorem`.

    Bisection in log p between e^-26 (passes) and 1/2 (fails); the lower end
    of the final bracket is returned, so the result always passes.
    """
    lo, hi = math.exp(-26.0), 0.5
    if not certify_square_theorem(lo).overall:
        raise CertificationError("the square certificate fails at e^-26")
    while hi / lo > 1.0 + rel:
        mid = math.sqrt(lo * hi)
        if certify_square_theorem(mid).overall:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# general epsilon-regular packings

GENERAL_FORMULAS = {
    "a_degree": ("max(p*3**d/eps, p*exp(C*d))", 1.0, True,
                 "p < eps 3^-d and p < e^-d"),
    "b_closure": ("2**d*exp(-C*d) + (4*m0+8)**d*exp(C*(2*m0+2))*p/eps "
                  "+ exp(4*C)/eps*Tpoly(exp(-2*C), m0, d, 4, 12)", 1.0, True,
                  "induction closure with counts (2m+6)^d/eps"),
    "c_infinity": ("(2*m0+4)**d*p/eps + Tpoly(exp(-C), m0, d, 2, 6)/eps", 1.0, True,
                   "reconstruction: the square-case infinity step with counts (2m+4)^d/eps and (2m+6)^d/eps"),
}


def _general_fixed_parts(d, eps, m0, C):
    b = 2**d * math.exp(-C * d) + math.exp(4 * C) / eps * Tpoly(math.exp(-2 * C), m0, d, 4, 12)
    c = Tpoly(math.exp(-C), m0, d, 2, 6) / eps
    return b, c


def _general_p_bound(d, eps, m0, C):
    """Supremum of admissible p for a given m0 (every constraint is linear in p)."""
    b, c = _general_fixed_parts(d, eps, m0, C)
    caps = [eps * 3.0**-d, math.exp(-C * d),
            (1.0 - b - SLACK) * eps / ((4 * m0 + 8) ** d * math.exp(C * (2 * m0 + 2))),
            (1.0 - c - SLACK) * eps / (2 * m0 + 4) ** d]
    return min(caps)


def certify_general(p: float, d: int, eps: float, m0: int, C: float = 1.0) -> Certificate:
    env = {"p": p, "d": d, "eps": eps, "m0": m0, "C": C}
    entries = [_entry(name, f, rhs, env, strict, note) for name, (f, rhs, strict, note) in GENERAL_FORMULAS.items()]
    return Certificate(entries, p, d, eps, m0, C)


def certify_general_theorem(d: int, eps: float, C: float = 1.0, m0: int | None = None,
                            rel: float = 1e-9) -> tuple[int, float, Certificate]:
    """Smallest m0 <= 1000 whose p-independent parts are below 1, then the largest
    certified p for that m0 (bisection in log p)."""
    if int(d) != d or d < 2:
        raise ValueError("d must be an integer >= 2")
    if not 0.0 < eps <= 1.0:
        raise ValueError("epsilon must lie in (0, 1]")
    if not C >= 1.0:
        raise ValueError("C must be at least 1")
    d = int(d)
    if m0 is None:
        for cand in range(1, M0_CAP + 1):
            b, c = _general_fixed_parts(d, eps, cand, C)
            if b + SLACK < 1.0 and c + SLACK < 1.0:
                m0 = cand
                break
        else:
            raise InfeasibleError(f"no m0 <= {M0_CAP} closes the bounds for d={d}, eps={eps}, C={C}")
    hi = _general_p_bound(d, eps, m0, C)
    if not hi > 0:
        raise InfeasibleError(f"m0={m0} leaves no admissible p")
    lo = hi * 1e-6
    if not certify_general(lo, d, eps, m0, C).overall:
        raise InfeasibleError(f"m0={m0} leaves no admissible p")
    while hi / lo > 1.0 + rel:
        mid = math.sqrt(lo * hi)
        if certify_general(mid, d, eps, m0, C).overall:
            lo = mid
        else:
            hi = mid
    cert = certify_general(lo, d, eps, m0, C)
    return m0, lo, cert


# ---------------------------------------------------------------------------
# numerical refinement of alpha(k, r)

@dataclass
class AlphaTable:
    """Upper bounds ``values[k, j]`` for alpha(k, r_j) on the grid ``r_j = j * step``."""

    p: float
    step: float
    values: np.ndarray
    iterations: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def k_max(self) -> int:
        return self.values.shape[0] - 1

    @property
    def r(self) -> np.ndarray:
        return self.step * np.arange(self.values.shape[1])

    def closed_form(self) -> np.ndarray:
        k = np.arange(self.k_max + 1)[:, None]
        return np.minimum(1.0, np.exp(-self.r[None, :] / 2.0 ** (k - 1)))

    def lookup(self, k: int, x) -> np.ndarray:
        return _lookup(self.values[k], self.step, k, x)


def _lookup(row, step, k, x):
    """Upper bound for alpha(k, x) from a non-increasing grid row (1 for x <= 0)."""
    x = np.asarray(x, float)
    idx = np.floor(x / step + 1e-9).astype(np.int64)
    inside = np.clip(idx, 0, len(row) - 1)
    out = row[inside]
    beyond = idx >= len(row)
    if beyond.any():
        out = np.where(beyond, np.minimum(row[-1], np.exp(-x / 2.0 ** (k - 1))), out)
    return np.where(x <= 0, 1.0, out)


def refine_alpha_table(p: float, k_max: int = 4, r_max: float = 64.0, step: float = 0.25,
                       tol: float = 1e-12, max_iter: int = 10_000) -> AlphaTable:
    """Iterate the union bound for alpha(k, r) downward from the closed form.

    For ``r > 2^k`` the update is
    ``4 [A(k-1, r) + 136 p A(k, r - 9*2^k) + sum_m 20 m sup_d min(p, A(k-1, d - 2^(k-1))) A(k, r - d - 2^k)]``
    with the sup over grid pieces of each shell ``m 2^k < d <= (m+1) 2^k``.
    Shells that lie wholly beyond the grid are bounded by ``20 e^2 T(e^-4, M)``.
    """
    if not certify_square_theorem(p).overall:
        raise CertificationError(f"p={p:g} does not pass the square certificate")
    if step <= 0 or r_max <= 0:
        raise ValueError("step and r_max must be positive")
    J = int(round(r_max / step))
    r = step * np.arange(J + 1)
    K = np.arange(k_max + 1)
    seed = np.minimum(1.0, np.exp(-r[None, :] / 2.0 ** (K[:, None] - 1)))
    A = seed.copy()
    # k = 0: paths of length ceil(r) + 1 in a graph of degree <= 8
    base = p * (8.0 * p) ** (np.ceil(r) + 1)
    A[0, 1:] = np.minimum(A[0, 1:], base[1:])
    # r = 0 only asks for s0 to be open
    A[:, 0] = p
    for k in range(1, k_max + 1):
        A[k, r <= 2.0**k] = np.minimum(A[k, r <= 2.0**k], p)
    A = np.minimum.accumulate(A, axis=1)

    it = 0
    for it in range(1, max_iter + 1):
        new = A.copy()
        for k in range(1, k_max + 1):
            h = 2.0**k
            mask = r > h
            rr = r[mask]
            total = A[k - 1, mask] + 136.0 * p * _lookup(A[k], step, k, rr - 9 * h)
            M = max(8, int(math.ceil((r_max + h) / h)) + 2)
            pieces = max(1, int(math.ceil(h / step)))
            for m in range(8, M):
                da = m * h + (h / pieces) * np.arange(pieces)
                db = da + h / pieces
                first = np.minimum(p, _lookup(A[k - 1], step, k - 1, da - h / 2))
                second = _lookup(A[k], step, k, rr[:, None] - db[None, :] - h)
                total = total + 20.0 * m * np.max(first[None, :] * second, axis=1)
            total = total + 20.0 * math.exp(2.0) * tail_sum_linear(math.exp(-4.0), M)
            new[k, mask] = np.minimum(A[k, mask], 4.0 * total)
        new = np.minimum.accumulate(new, axis=1)
        change = float(np.max(np.abs(new - A)))
        A = new
        if change < tol:
            break
    return AlphaTable(p, step, A, it, {"r_max": r_max, "k_max": k_max})
