"""Limit laws for eigenvector statistics and the tests run against them."""

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.special
import scipy.stats

from .divdiff import log_divdiff_expneg

__all__ = [
    "SampleSet",
    "LimitLaw",
    "GaussianSquareLaw",
    "TestResult",
    "limit_law_cdf",
    "ecdf",
    "ks_distance",
    "ks_test",
    "mgf_compare",
    "det_mgf_compare",
    "independence_check",
    "ginue_correlation",
]


@dataclass
class SampleSet:
    """Real samples (or pairs) with metadata; persisted as CSV with a JSON header."""

    label: str
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim not in (1, 2):
            raise ValueError("values must be 1-d or a 2-d array of pairs")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite sample value")
        self.values = v

    @property
    def count(self):
        return int(self.values.shape[0])

    def to_csv(self, path):
        head = {"label": self.label, "count": self.count, "metadata": self.metadata}
        with open(path, "w", newline="") as fh:
            fh.write("# " + json.dumps(head, sort_keys=True) + "\n")
            wr = csv.writer(fh)
            v = self.values if self.values.ndim == 2 else self.values[:, None]
            wr.writerow([f"x{k}" for k in range(v.shape[1])])
            for row in v:
                wr.writerow([repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            first = fh.readline()
            if not first.startswith("# "):
                raise ValueError("missing JSON header line")
            head = json.loads(first[2:])
            rows = list(csv.reader(io.StringIO(fh.read())))
        data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
        if data.size == 0:
            data = np.zeros(0)
        elif data.shape[1] == 1:
            data = data[:, 0]
        return cls(head["label"], data, head.get("metadata", {}))


@dataclass(frozen=True)
class LimitLaw:
    """Law of ``sum_k q_k E_k`` with independent standard exponentials ``E_k``.

    ``kind`` is ``"exponential"`` for a single weight, ``"hypoexponential"``
    otherwise.
    """

    weights: tuple
    kind: str = None

    def __post_init__(self):
        q = tuple(float(x) for x in np.atleast_1d(self.weights))
        if not q or any(x <= 0 for x in q):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "weights", q)
        kind = self.kind or ("exponential" if len(q) == 1 else "hypoexponential")
        if kind not in ("exponential", "hypoexponential"):
            raise ValueError(f"unknown kind {kind!r}")
        if kind == "exponential" and len(q) != 1:
            raise ValueError("exponential law has a single weight")
        object.__setattr__(self, "kind", kind)

    @classmethod
    def from_observable(cls, T):
        return cls(tuple(T.weights))

    @property
    def mean(self):
        return float(sum(self.weights))

    def mgf(self, s):
        q = np.asarray(self.weights)
        s = np.asarray(s, dtype=float)
        if np.any(s * q.max() >= 1):
            raise ValueError("MGF diverges for s >= 1/max q")
        return np.prod(1.0 / (1.0 - np.multiply.outer(s, q)), axis=-1)

    def cdf(self, x):
        return limit_law_cdf(self, x)

    def sample(self, n, rng):
        E = rng.standard_exponential((int(n), len(self.weights)))
        return E @ np.asarray(self.weights)

    def to_dict(self):
        return {"kind": self.kind, "weights": list(self.weights)}


@dataclass(frozen=True)
class GaussianSquareLaw:
    """``Z^2`` with ``Z ~ N(0, sigma2)`` real: ``sigma2 * chi^2_1``."""

    sigma2: float

    kind = "real-gaussian-square"

    @classmethod
    def from_observable(cls, T):
        return cls(float(T.frobenius_sq))

    @property
    def mean(self):
        return self.sigma2

    def mgf(self, s):
        s = np.asarray(s, dtype=float)
        return (1.0 - 2.0 * s * self.sigma2) ** -0.5

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return scipy.stats.chi2.cdf(np.maximum(x, 0.0) / self.sigma2, df=1)

    def sample(self, n, rng):
        return self.sigma2 * rng.standard_normal(int(n)) ** 2

    def to_dict(self):
        return {"kind": self.kind, "sigma2": self.sigma2}


def _cdf_scalar(rates, x):
    if x <= 0:
        return 0.0
    nodes = np.concatenate([[0.0], x * rates])
    log_dd, _ = log_divdiff_expneg(nodes)
    val = np.exp(np.sum(np.log(x * rates)) + log_dd)
    return float(min(max(val, 0.0), 1.0))


def limit_law_cdf(law, x):
    """CDF of ``law`` at ``x``.

    With rates ``r_k = 1/q_k`` the hypoexponential CDF is
    ``(prod_k x r_k) |exp(-y)[0, x r_1, ..., x r_n]|``, a divided difference
    that stays accurate when weights coincide or cluster (the partial
    fraction form ``1 - sum c_k exp(-x/q_k)`` does not).
    """
    if not isinstance(law, LimitLaw):
        return law.cdf(x)
    rates = 1.0 / np.asarray(law.weights)
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise ValueError("x must be nonnegative")
    out = np.array([_cdf_scalar(rates, float(v)) for v in xa.ravel()])
    return out.reshape(xa.shape) if xa.ndim else float(out[0])


def ecdf(values):
    """Sorted sample and ECDF heights ``0, 1/n, ..., 1`` (``n + 1`` steps)."""
    x = np.sort(np.asarray(values, dtype=float))
    return x, np.arange(x.size + 1) / max(x.size, 1)


def ks_distance(values, cdf):
    x = np.sort(np.asarray(values, dtype=float))
    n = x.size
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


@dataclass
class TestResult:
    name: str
    statistic: float
    threshold: float
    passed: bool
    n: int
    se: float = float("nan")
    p_value: float = float("nan")
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


KS_C_1PCT = 1.63


def ks_test(samples, law, threshold=None, name="ks"):
    """Two-sided KS distance to ``law`` with the asymptotic p-value.

    The default threshold is the 1% critical value ``1.63 / sqrt(n)``.
    """
    v = samples.values if isinstance(samples, SampleSet) else np.asarray(samples, float)
    n = v.size
    if n < 100:
        raise ValueError("ks_test needs at least 100 samples")
    D = ks_distance(v, law.cdf)
    thr = KS_C_1PCT / np.sqrt(n) if threshold is None else float(threshold)
    p = float(scipy.special.kolmogorov(np.sqrt(n) * D))
    return TestResult(name, D, thr, bool(D <= thr), int(n), p_value=p,
                      extra={"law": law.to_dict()})


def mgf_compare(samples, law, s_grid=(-1.0,), n_se=3.0, name="mgf"):
    """Empirical ``mean exp(s x)`` against the law's MGF for ``s <= 0``.

    The statistic is the largest gap in standard-error units over ``s_grid``.
    """
    v = samples.values if isinstance(samples, SampleSet) else np.asarray(samples, float)
    s_grid = np.atleast_1d(np.asarray(s_grid, float))
    if np.any(s_grid > 0):
        raise ValueError("s must be nonpositive")
    rows = []
    worst = 0.0
    for s in s_grid:
        e = np.exp(s * v)
        m = float(e.mean())
        se = float(e.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
        pred = float(law.mgf(s))
        gap = abs(m - pred)
        z = gap / se if se > 0 else (0.0 if gap == 0 else np.inf)
        worst = max(worst, z)
        rows.append({"s": float(s), "empirical": m, "predicted": pred, "se": se, "gap_se": z})
    return TestResult(name, float(worst), n_se, bool(worst <= n_se), int(v.size),
                      extra={"rows": rows})


def det_mgf_compare(mgf_values, det_values, n_se=3.0, name="mgf-det"):
    """Compare sample means of ``exp(N q ||Tu||^2)`` and ``det[I - tqHT*T]^-1``.

    The gap is measured in pooled standard errors
    ``sqrt(se_1^2 + se_2^2)``.
    """
    a = np.asarray(mgf_values, float)
    b = np.asarray(det_values, float)
    se = float(np.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size))
    gap = abs(float(a.mean()) - float(b.mean()))
    return TestResult(name, gap, n_se * se, bool(gap <= n_se * se), int(a.size), se=se,
                      extra={"mean_mgf": float(a.mean()), "mean_det": float(b.mean()),
                             "gap_se": gap / se if se > 0 else float("inf")})


def independence_check(x, y, corr_threshold=None, alpha=0.01, name="independence"):
    """Pearson correlation plus a 2x2 median-split chi-square test.

    Passes when ``|r| <= corr_threshold`` (default ``3/sqrt(n)``) and the
    chi-square p-value is at least ``alpha``.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d of equal length")
    n = x.size
    thr = 3.0 / np.sqrt(n) if corr_threshold is None else float(corr_threshold)
    if np.std(x) == 0 or np.std(y) == 0:
        r = 1.0 if np.array_equal(x, y) else 0.0
    else:
        r = float(np.corrcoef(x, y)[0, 1])
    bx = x > np.median(x)
    by = y > np.median(y)
    table = np.array([[np.sum(~bx & ~by), np.sum(~bx & by)],
                      [np.sum(bx & ~by), np.sum(bx & by)]])
    if np.any(table.sum(axis=0) == 0) or np.any(table.sum(axis=1) == 0):
        chi2, p = float("inf"), 0.0
    else:
        chi2, p, _, _ = scipy.stats.chi2_contingency(table, correction=False)
    passed = bool(abs(r) <= thr and p >= alpha)
    return TestResult(name, abs(r), thr, passed, int(n), p_value=float(p),
                      extra={"pearson": r, "chi2": float(chi2), "table": table.tolist(),
                             "alpha": alpha})


def ginue_correlation(points):
    """Limiting GinUE ``m``-point correlation ``det[K(w_j, w_l)]``.

    ``K(w, w') = pi^-1 exp(-(|w|^2 + |w'|^2)/2 + w conj(w'))``.
    """
    w = np.atleast_1d(np.asarray(points, dtype=np.complex128))
    if w.size > 6:
        raise ValueError("at most 6 points")
    a = np.abs(w) ** 2
    K = np.exp(-(a[:, None] + a[None, :]) / 2 + w[:, None] * w.conj()[None, :]) / np.pi
    return float(np.linalg.det(K).real)
