"""Experiment configuration, deterministic sweeps and report emission.

Each experiment kind is a pair of functions: a per-sample kernel that is a
pure function of ``(config, N, sample_index)`` and an aggregator that reads
the per-sample results in index order.  Workers may finish in any order;
``ThreadPoolExecutor.map`` hands the results back by index, so aggregates do
not depend on the number of threads.
"""

import copy
import hashlib
import json
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .changevar import deflate, jacobian_fd_check, kq_ratio_check
from .dse import eta_zt, quantiles, solve_mz, write_quantiles_csv, write_rho_csv
from .ensemble import EnsembleSpec, sample_iid, sample_pair, write_cmat
from .errors import (
    DefectivePair,
    EigenvalueCollision,
    FDInstability,
    IllConditioned,
    RunFailed,
    SeparationViolated,
)
from .hermitization import sym_spectrum
from .locallaw import (
    a1_reports,
    a1_values,
    a2_reports,
    a2_values,
    a3_reports,
    a3_values,
    a3_vector_set,
    eth_check,
    level_repulsion_summary,
    rigidity_deloc,
    second_singular,
)
from .spectral import (
    ProjectionObservable,
    eig_near,
    eig_pairs,
    matrix_digest,
    overlap_matrix,
    projection_stat,
    schur_form,
)
from .stats import (
    GaussianSquareLaw,
    LimitLaw,
    det_mgf_compare,
    ecdf,
    independence_check,
    ks_test,
    mgf_compare,
)

__all__ = [
    "KINDS",
    "ExperimentConfig",
    "RunRecord",
    "default_config",
    "run_experiment",
    "emit_report",
    "to_jsonable",
]

KINDS = (
    "sample",
    "spectrum",
    "verify-a1",
    "verify-a2",
    "verify-a3",
    "rigidity",
    "eth",
    "level-repulsion",
    "jacobian-check",
    "kq-ratio",
    "evec-stats",
    "mgf",
    "independence",
    "dse-table",
)

# per-sample failures that are counted and excluded rather than fatal
DISCARDABLE = (SeparationViolated, DefectivePair, EigenvalueCollision, IllConditioned, FDInstability)

DEFAULT_PARAMS = {
    "epsilon": 0.1,
    "tau": 0.05,
    "delta_V": 0.1,
    "deltas": [0.05, 0.1, 0.2],
    "kappa": 1e-3,
    "q": -1.0,
    "s_grid": [-1.0],
    "eta_grid": {"n": 12, "lo_exp": -1.0 / 3.0, "hi": 1.0},
    "m_R": 1,
    "m_L": 0,
    "h": 1e-5,
    "degenerate": True,
}

DEFAULT_THRESHOLDS = {
    "ks": 0.05,
    "ks_gaussian_min": 0.1,
    "corr": 0.05,
    "chi2_alpha": 0.01,
    "mgf_se": 3.0,
    "slope_tol": 0.15,
    "C_bound": 10.0,
    "c_bound": 0.01,
    "jac_rel": 1e-4,
    "jac_abs": 1e-6,
    "kq_gap": 0.1,
    "pass_fraction": 0.95,
}


@dataclass
class ExperimentConfig:
    """Reproducible description of one sweep.

    ``targets`` entries are ``{"z": [re, im], "side": "right"|"left",
    "weights": [q_1, ...]}``; the observable of a target is
    ``sum_k q_k e_k e_k*`` on the first coordinate vectors.  ``t_rule`` is
    ``{"mode": "fixed", "value": t}`` or ``{"mode": "power", "exponent": a,
    "eps0": e}`` meaning ``t = N^(a + e)``.
    """

    kind: str = "evec-stats"
    ensemble: EnsembleSpec = field(default_factory=EnsembleSpec)
    N_list: list = field(default_factory=lambda: [256])
    t_rule: dict = field(default_factory=lambda: {"mode": "fixed", "value": 0.0})
    targets: list = field(default_factory=lambda: [{"z": [0.0, 0.0], "side": "right", "weights": [1.0]}])
    params: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_PARAMS))
    thresholds: dict = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))
    n_samples: int = 100
    discard_cap: float = 0.05
    out_dir: str = "out"
    master_seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if isinstance(self.ensemble, dict):
            self.ensemble = EnsembleSpec.from_dict(self.ensemble)
        self.N_list = [int(n) for n in self.N_list]
        if any(n < 1 for n in self.N_list):
            raise ValueError("N must be positive")
        if int(self.n_samples) < 0:
            raise ValueError("n_samples must be nonnegative")
        if not 0 <= self.discard_cap <= 1:
            raise ValueError("discard_cap must lie in [0, 1]")
        mode = self.t_rule.get("mode")
        if mode not in ("fixed", "power"):
            raise ValueError("t_rule mode must be 'fixed' or 'power'")
        for tg in self.targets:
            if tg.get("side", "right") not in ("right", "left"):
                raise ValueError("target side must be 'right' or 'left'")
        merged = copy.deepcopy(DEFAULT_PARAMS)
        merged.update(self.params)
        self.params = merged
        th = dict(DEFAULT_THRESHOLDS)
        th.update(self.thresholds)
        self.thresholds = th

    def t_for(self, n):
        if self.t_rule["mode"] == "fixed":
            return float(self.t_rule["value"])
        return float(n ** (self.t_rule["exponent"] + self.t_rule.get("eps0", 0.0)))

    def spec_for(self, n):
        return replace(self.ensemble, dim=int(n), master_seed=int(self.master_seed), t=self.t_for(n))

    def z(self, k=0):
        re_, im_ = self.targets[k]["z"]
        return complex(re_, im_)

    def observable(self, k, n):
        return ProjectionObservable.basis(n, self.targets[k].get("weights", [1.0]))

    def eta_grid(self, n):
        g = self.params["eta_grid"]
        if isinstance(g, (list, tuple)):
            return np.sort(np.asarray(g, float))
        return np.geomspace(n ** g["lo_exp"], g["hi"], int(g["n"]))

    def to_dict(self):
        d = asdict(self)
        d["ensemble"] = self.ensemble.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**copy.deepcopy(d))

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def digest(self):
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


@dataclass
class RunRecord:
    config: dict
    config_digest: str
    per_sample: dict
    discarded: list
    aggregates: dict
    wall_clock: float = 0.0
    code_version: str = __version__

    def aggregate_json(self):
        """Canonical JSON of the aggregates (no timing, no per-sample data)."""
        return json.dumps(to_jsonable(self.aggregates), sort_keys=True, indent=1)


def to_jsonable(x):
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return to_jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    return x


# --- per-sample kernels ----------------------------------------------------


def _matrix(cfg, n, i):
    """The matrix a kernel studies: ``M`` when ``t > 0``, otherwise ``A``."""
    A, M = sample_pair(cfg.spec_for(n), i)
    return M


def _k_sample(cfg, n, i, ctx):
    M = _matrix(cfg, n, i)
    if ctx.get("write"):
        write_cmat(os.path.join(ctx["write"], f"sample_N{n}_{i:06d}.cmat"), M)
    return {"digest": matrix_digest(M), "fro2_over_N": float(np.linalg.norm(M) ** 2 / n)}


def _k_spectrum(cfg, n, i, ctx):
    S = eig_pairs(_matrix(cfg, n, i))
    lam = S.eigenvalues
    O = overlap_matrix(S)
    return {
        "spectral_radius": float(np.max(np.abs(lam))),
        "mean_abs2": float(np.mean(np.abs(lam) ** 2)),
        "mean_diag_overlap_over_N": float(np.mean(np.diag(O).real) / n),
        "min_biorth": float(min(t.biorth for t in S.triples)),
    }


def _k_a1(cfg, n, i, ctx):
    return {"rows": a1_values(_matrix(cfg, n, i), cfg.z(0), cfg.eta_grid(n))}


def _k_a2(cfg, n, i, ctx):
    g = cfg.eta_grid(n)
    return {"rows": a2_values(_matrix(cfg, n, i), cfg.z(0), cfg.z(1), g, g)}


def _k_a3(cfg, n, i, ctx):
    vecs = a3_vector_set(cfg.observable(0, n).vectors)
    return {"rows": a3_values(_matrix(cfg, n, i), cfg.z(0), cfg.eta_grid(n), vecs)}


def _k_rigidity(cfg, n, i, ctx):
    S = sym_spectrum(_matrix(cfg, n, i), cfg.z(0))
    r = rigidity_deloc(S, ctx["profile"][n], cfg.params["kappa"])
    return {k: r[k] for k in ("rigidity", "deloc", "pass", "n_bulk")}


def _eth_Y(n):
    Y = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    Y[:n, n:] = np.eye(n)
    return Y


def _k_eth(cfg, n, i, ctx):
    S = sym_spectrum(_matrix(cfg, n, i), cfg.z(0))
    r = eth_check(S, _eth_Y(n), ctx["profile"][n], cfg.params["kappa"])
    return {k: r[k] for k in ("max_dev", "max_offdiag", "diag_near_pass", "pass", "n_bulk")}


def _k_level(cfg, n, i, ctx):
    return {"xi2": second_singular(_matrix(cfg, n, i), cfg.z(0))}


def _k_jacobian(cfg, n, i, ctx):
    m_R, m_L = int(cfg.params["m_R"]), int(cfg.params["m_L"])
    m = m_R + m_L
    if not 1 <= m <= n:
        raise ValueError("need 1 <= m_R + m_L <= N")
    A = sample_iid(cfg.spec_for(n), i)
    S = eig_pairs(A)
    chain = deflate(A, [S[k] for k in range(m)], ["right"] * m_R + ["left"] * m_L)
    num, formula, rel = jacobian_fd_check(chain, h=cfg.params["h"])
    out = {"numeric": num, "formula": formula, "rel_err": rel}
    if cfg.params.get("degenerate") and m >= 2:
        steps = list(chain.steps)
        steps[1] = replace(steps[1], lam=steps[0].lam)
        dchain = replace(chain, steps=tuple(steps))
        dn, df, _ = jacobian_fd_check(dchain, h=cfg.params["h"])
        out.update({"degenerate_numeric": dn, "degenerate_formula": df})
    return out


def _k_kq(cfg, n, i, ctx):
    A, M = sample_pair(cfg.spec_for(n), i)
    lam = eig_near(M, [cfg.z(0)], cfg.params["epsilon"])[0].lam
    lhs, rhs, gap = kq_ratio_check(A, lam, cfg.t_for(n), cfg.params["q"], cfg.observable(0, n))
    return {"lhs": lhs, "rhs": rhs, "gap": gap}


def _stat(T, tr, side):
    return projection_stat(T, tr.u if side == "right" else tr.v)


def _k_evec(cfg, n, i, ctx):
    M = _matrix(cfg, n, i)
    sch = schur_form(M)
    vals = []
    for k, tg in enumerate(cfg.targets):
        tr = eig_near(M, [cfg.z(k)], cfg.params["epsilon"], cfg.params["tau"], schur=sch)[0]
        vals.append(_stat(cfg.observable(k, n), tr, tg["side"]))
    return {"values": vals}


def _k_independence(cfg, n, i, ctx):
    if len(cfg.targets) != 2:
        raise ValueError("independence needs exactly two targets")
    M = _matrix(cfg, n, i)
    trs = eig_near(M, [cfg.z(0), cfg.z(1)], cfg.params["epsilon"], cfg.params["tau"])
    return {"pair": [_stat(cfg.observable(k, n), trs[k], cfg.targets[k]["side"]) for k in range(2)]}


def _k_mgf(cfg, n, i, ctx):
    t = cfg.t_for(n)
    if t <= 0:
        raise ValueError("mgf experiment needs t > 0")
    A, M = sample_pair(cfg.spec_for(n), i)
    tg = cfg.targets[0]
    T = cfg.observable(0, n)
    tr = eig_near(M, [cfg.z(0)], cfg.params["epsilon"], cfg.params["tau"])[0]
    x = _stat(T, tr, tg["side"])
    q = float(cfg.params["q"])
    S = sym_spectrum(A, tr.lam)
    eta = eta_zt(S, t)
    # H = V diag(1/(s^2+eta^2)) V*, V the right singular vectors of A - lam
    V = S.vecs[n:, n:] * np.sqrt(2.0)
    if tg["side"] == "left":
        V = S.vecs[:n, n:] * np.sqrt(2.0)  # left case: Htilde
    W = T.vectors * np.sqrt(T.weights)
    P = V.conj().T @ W
    C = (P.conj().T * (1.0 / (S.positive**2 + eta * eta))) @ P
    det = np.linalg.det(np.eye(T.rank) - t * q * C).real
    return {"value": x, "mgf": float(np.exp(q * x)), "det": float(1.0 / det), "eta": eta}


KERNELS = {
    "sample": _k_sample,
    "spectrum": _k_spectrum,
    "verify-a1": _k_a1,
    "verify-a2": _k_a2,
    "verify-a3": _k_a3,
    "rigidity": _k_rigidity,
    "eth": _k_eth,
    "level-repulsion": _k_level,
    "jacobian-check": _k_jacobian,
    "kq-ratio": _k_kq,
    "evec-stats": _k_evec,
    "mgf": _k_mgf,
    "independence": _k_independence,
}


# --- aggregators ----------------------------------------------------------


def _mean_field(res, key):
    return float(np.mean([r[key] for r in res])) if res else float("nan")


def _a_sample(cfg, n, res, ctx):
    return {"digests": [r["digest"] for r in res], "mean_fro2_over_N": _mean_field(res, "fro2_over_N")}


def _a_spectrum(cfg, n, res, ctx):
    return {k: _mean_field(res, k) for k in
            ("spectral_radius", "mean_abs2", "mean_diag_overlap_over_N", "min_biorth")}


def _rows(res):
    return np.stack([np.asarray(r["rows"], float) for r in res])


def _a_a1(cfg, n, res, ctx):
    reps = a1_reports(cfg.eta_grid(n), _rows(res).mean(axis=0),
                      cfg.thresholds["C_bound"], cfg.thresholds["slope_tol"])
    return {"reports": [r.to_dict() for r in reps], "pass": all(r.passed for r in reps)}


def _a_a2(cfg, n, res, ctx):
    g = cfg.eta_grid(n)
    reps = a2_reports(cfg.z(0), cfg.z(1), g, g, _rows(res).mean(axis=0), cfg.thresholds["c_bound"])
    return {"reports": [r.to_dict() for r in reps], "pass": all(r.passed for r in reps)}


def _a_a3(cfg, n, res, ctx):
    reps = a3_reports(cfg.eta_grid(n), _rows(res).max(axis=0), n, cfg.thresholds["C_bound"])
    return {"reports": [r.to_dict() for r in reps], "pass": all(r.passed for r in reps)}


def _a_rigidity(cfg, n, res, ctx):
    frac = float(np.mean([bool(r["pass"]) for r in res]))
    return {
        "fraction_pass": frac,
        "max_rigidity": float(max(r["rigidity"] for r in res)),
        "max_deloc": float(max(r["deloc"] for r in res)),
        "rigidity_bound": float(np.log(n) ** 2),
        "deloc_bound": float(np.log(n)),
        "pass": frac >= cfg.thresholds["pass_fraction"],
    }


def _a_eth(cfg, n, res, ctx):
    frac = float(np.mean([bool(r["pass"]) for r in res]))
    return {
        "fraction_pass": frac,
        "max_offdiag": float(max(r["max_offdiag"] for r in res)),
        "max_dev": float(max(r["max_dev"] for r in res)),
        "diag_near_fraction": float(np.mean([bool(r["diag_near_pass"]) for r in res])),
        "bound": float(np.log(n)),
        "pass": frac >= cfg.thresholds["pass_fraction"],
    }


def _a_level(cfg, n, res, ctx):
    s = level_repulsion_summary([r["xi2"] for r in res], n, cfg.params["deltas"])
    s["pass"] = bool(s["monotone"] and all(r["pass"] for r in s["rows"]))
    return s


def _a_jacobian(cfg, n, res, ctx):
    out = {"max_rel_err": float(max(r["rel_err"] for r in res)), "rel_tol": cfg.thresholds["jac_rel"]}
    ok = out["max_rel_err"] <= cfg.thresholds["jac_rel"]
    deg = [r["degenerate_numeric"] for r in res if "degenerate_numeric" in r]
    if deg:
        out["max_degenerate_numeric"] = float(max(deg))
        out["abs_tol"] = cfg.thresholds["jac_abs"]
        ok = ok and out["max_degenerate_numeric"] <= cfg.thresholds["jac_abs"]
    out["pass"] = bool(ok)
    return out


def _a_kq(cfg, n, res, ctx):
    gaps = np.array([abs(r["gap"]) for r in res])
    return {"median_abs_gap": float(np.median(gaps)), "mean_abs_gap": float(gaps.mean()),
            "max_abs_gap": float(gaps.max())}


def _a_evec(cfg, n, res, ctx):
    vals = np.array([r["values"] for r in res], float)
    if vals.shape[0] < 100:
        return {"targets": [{"target": tg, "n": int(vals.shape[0]), "mean": float(vals[:, k].mean())}
                            for k, tg in enumerate(cfg.targets)],
                "warning": "fewer than 100 samples: KS tests skipped", "pass": False}
    out = []
    for k, tg in enumerate(cfg.targets):
        T = cfg.observable(k, n)
        law = LimitLaw.from_observable(T)
        gsq = GaussianSquareLaw.from_observable(T)
        x = vals[:, k]
        ks = ks_test(x, law, threshold=cfg.thresholds["ks"], name="ks-product-law")
        ksg = ks_test(x, gsq, threshold=cfg.thresholds["ks"], name="ks-real-gaussian-square")
        mg = mgf_compare(x, law, cfg.params["s_grid"], cfg.thresholds["mgf_se"])
        better = "product-law" if ks.statistic < ksg.statistic else "real-gaussian-square"
        entry = {
            "target": tg, "n": int(x.size), "mean": float(x.mean()),
            "ks_product": ks.to_dict(), "ks_gaussian_square": ksg.to_dict(), "mgf": mg.to_dict(),
            "better_fit": better,
            "pass": bool(ks.passed),
        }
        if len(T.weights) > 1:
            entry["discrimination_pass"] = bool(ksg.statistic >= cfg.thresholds["ks_gaussian_min"])
            entry["pass"] = bool(entry["pass"] and entry["discrimination_pass"])
        out.append(entry)
    return {"targets": out, "pass": all(e["pass"] for e in out)}


def _a_independence(cfg, n, res, ctx):
    P = np.array([r["pair"] for r in res], float)
    tr = independence_check(P[:, 0], P[:, 1], cfg.thresholds["corr"], cfg.thresholds["chi2_alpha"])
    d = tr.to_dict()
    return {"test": d, "pass": d["pass"]}


def _a_mgf(cfg, n, res, ctx):
    tr = det_mgf_compare([r["mgf"] for r in res], [r["det"] for r in res], cfg.thresholds["mgf_se"])
    d = tr.to_dict()
    d["t"] = cfg.t_for(n)
    d["mean_value"] = _mean_field(res, "value")
    return {"test": d, "pass": d["pass"]}


AGGREGATORS = {
    "sample": _a_sample,
    "spectrum": _a_spectrum,
    "verify-a1": _a_a1,
    "verify-a2": _a_a2,
    "verify-a3": _a_a3,
    "rigidity": _a_rigidity,
    "eth": _a_eth,
    "level-repulsion": _a_level,
    "jacobian-check": _a_jacobian,
    "kq-ratio": _a_kq,
    "evec-stats": _a_evec,
    "mgf": _a_mgf,
    "independence": _a_independence,
}


def _dse_table(cfg):
    out = {}
    profiles = {}
    for k in range(len(cfg.targets)):
        z = cfg.z(k)
        for n in cfg.N_list:
            p = quantiles(z, n, tau=cfg.params["tau"], kappa=cfg.params["kappa"])
            profiles[(k, n)] = p
            m0 = solve_mz(z, 0.0).m
            out[f"target{k}_N{n}"] = {
                "z": z, "N": n, "mass": p.mass, "support": p.intervals, "bulk": p.bulk,
                "Im_m0": float(m0.imag), "sqrt_1_minus_abs_z2": float(np.sqrt(1 - abs(z) ** 2)),
                "gamma_1": p.quantile(1) if n >= 1 else None, "gamma_N": p.quantile(n),
            }
    return out, profiles


def _parallel_map(fn, items, threads):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def run_experiment(config, threads=1, write_samples=None):
    """Run ``config`` and return a :class:`RunRecord`.

    Per-sample failures listed in ``DISCARDABLE`` are recorded and excluded;
    if more than ``discard_cap * n_samples`` samples are discarded for some
    ``N`` the run fails with :class:`RunFailed`.
    """
    cfg = config
    start = time.perf_counter()
    per_sample, discarded, aggregates = {}, [], {}
    ctx = {"write": write_samples}
    if write_samples:
        os.makedirs(write_samples, exist_ok=True)
    if cfg.kind == "dse-table":
        aggregates, profiles = _dse_table(cfg)
        ctx["profiles"] = profiles
        aggregates = {"kind": cfg.kind, "results": aggregates, "pass": True}
        rec = RunRecord(cfg.to_dict(), cfg.digest(), {}, [], to_jsonable(aggregates),
                        time.perf_counter() - start)
        rec._profiles = profiles
        return rec
    if cfg.kind in ("rigidity", "eth"):
        ctx["profile"] = {n: quantiles(cfg.z(0), n, tau=cfg.params["tau"], kappa=cfg.params["kappa"])
                          for n in cfg.N_list}
    kernel = KERNELS[cfg.kind]
    agg = AGGREGATORS[cfg.kind]
    results_by_n = {}
    for n in cfg.N_list:

        def work(i, n=n):
            try:
                return ("ok", to_jsonable(kernel(cfg, n, i, ctx)))
            except DISCARDABLE as exc:
                return ("discard", f"{type(exc).__name__}: {exc}")

        out = _parallel_map(work, range(int(cfg.n_samples)), threads)
        used = []
        rows = []
        for i, (status, payload) in enumerate(out):
            if status == "ok":
                used.append(payload)
                rows.append({"index": i, **payload})
            else:
                discarded.append({"N": n, "index": i, "error": payload})
        n_disc = int(cfg.n_samples) - len(used)
        if cfg.n_samples and n_disc > cfg.discard_cap * cfg.n_samples:
            raise RunFailed(f"N={n}: {n_disc} of {cfg.n_samples} samples discarded "
                            f"(cap {cfg.discard_cap:.0%})")
        per_sample[str(n)] = rows
        results_by_n[n] = used
        entry = {"n_samples": int(cfg.n_samples), "n_used": len(used), "n_discarded": n_disc}
        if used:
            entry.update(agg(cfg, n, used, ctx))
        else:
            entry.update({"warning": "no samples", "pass": True})
        aggregates[str(n)] = entry
    summary = {"kind": cfg.kind, "by_N": aggregates}
    if cfg.kind == "kq-ratio" and len(cfg.N_list) > 1:
        med = [aggregates[str(n)].get("median_abs_gap", float("nan")) for n in cfg.N_list]
        decreasing = all(b < a for a, b in zip(med[:-1], med[1:]))
        summary["median_gaps"] = med
        summary["decreasing"] = bool(decreasing)
        summary["pass"] = bool(decreasing and med[-1] <= cfg.thresholds["kq_gap"])
    else:
        summary["pass"] = bool(all(a.get("pass", True) for a in aggregates.values()))
    if not cfg.n_samples:
        summary["warning"] = "empty run"
    rec = RunRecord(cfg.to_dict(), cfg.digest(), per_sample, discarded, to_jsonable(summary),
                    time.perf_counter() - start)
    return rec


# --- report emission ------------------------------------------------------


def _safe(name):
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name).strip("_") or "q"


def _write_dat(path, cols, header):
    with open(path, "w") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for row in zip(*cols):
            fh.write(" ".join(f"{float(v):.17g}" for v in row) + "\n")


def emit_report(record, out_dir):
    """Write ``summary.json``, ``aggregates.json``, ``samples.csv`` and ``.dat`` tables.

    Returns the list of written paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    summary = {
        "config": record.config,
        "config_digest": record.config_digest,
        "code_version": record.code_version,
        "wall_clock_s": record.wall_clock,
        "discarded": record.discarded,
        "aggregates": record.aggregates,
    }
    p = os.path.join(out_dir, "summary.json")
    with open(p, "w") as fh:
        json.dump(to_jsonable(summary), fh, sort_keys=True, indent=1)
    written.append(p)
    p = os.path.join(out_dir, "aggregates.json")
    with open(p, "w") as fh:
        fh.write(record.aggregate_json())
    written.append(p)

    # flat per-sample CSV: scalar fields only
    p = os.path.join(out_dir, "samples.csv")
    with open(p, "w") as fh:
        keys = None
        for n, rows in sorted(record.per_sample.items(), key=lambda kv: int(kv[0])):
            for r in rows:
                flat = {"N": n}
                for k, v in r.items():
                    if isinstance(v, list) and all(isinstance(x, (int, float)) for x in v):
                        for j, x in enumerate(v):
                            flat[f"{k}{j}"] = x
                    elif isinstance(v, (int, float, str, bool)):
                        flat[k] = v
                if keys is None:
                    keys = list(flat)
                    fh.write(",".join(keys) + "\n")
                fh.write(",".join(str(flat.get(k, "")) for k in keys) + "\n")
        if keys is None:
            fh.write("N,index\n")
    written.append(p)

    kind = record.config["kind"]
    by_n = record.aggregates.get("by_N", {})
    for n, entry in by_n.items():
        for rep in entry.get("reports", []):
            p = os.path.join(out_dir, f"{_safe(rep['quantity'])}_N{n}.dat")
            _write_dat(p, [rep["grid"], rep["values"]], ["x", "y"])
            written.append(p)
        if kind == "evec-stats" and "targets" in entry:
            vals = np.array([r["values"] for r in record.per_sample[n]], float)
            for k, tg in enumerate(entry["targets"]):
                law = LimitLaw(tuple(tg["target"].get("weights", [1.0])))
                x, F = ecdf(vals[:, k])
                xs = np.concatenate([[0.0 if x.size == 0 else min(0.0, x[0])], x])
                p = os.path.join(out_dir, f"ecdf_target{k}_N{n}.dat")
                _write_dat(p, [xs, F, law.cdf(np.maximum(xs, 0.0))], ["x", "ecdf", "limit_cdf"])
                written.append(p)
    if kind == "dse-table" and hasattr(record, "_profiles"):
        for (k, n), prof in record._profiles.items():
            p1 = os.path.join(out_dir, f"rho_target{k}_N{n}.csv")
            p2 = os.path.join(out_dir, f"quantiles_target{k}_N{n}.csv")
            write_rho_csv(p1, prof)
            write_quantiles_csv(p2, prof)
            p3 = os.path.join(out_dir, f"rho_target{k}_N{n}.dat")
            _write_dat(p3, [prof.grid, prof.rho], ["E", "rho"])
            written += [p1, p2, p3]
    return written


# --- defaults -------------------------------------------------------------


def _tg(z, side="right", weights=(1.0,)):
    return {"z": [float(np.real(z)), float(np.imag(z))], "side": side, "weights": list(weights)}


def default_config(kind):
    """Default configuration of each experiment kind (the desk-scale protocols)."""
    base = ExperimentConfig(kind=kind)
    d = base.to_dict()
    upd = {
        "sample": {"N_list": [64], "n_samples": 4},
        "spectrum": {"N_list": [128], "n_samples": 20},
        "verify-a1": {"N_list": [256], "n_samples": 20, "targets": [_tg(0.3)]},
        "verify-a2": {"N_list": [256], "n_samples": 20, "targets": [_tg(0.0), _tg(0.5)],
                      "params": {"eta_grid": {"n": 6, "lo_exp": -1.0 / 3.0 + 0.1, "hi": 1.0}}},
        "verify-a3": {"N_list": [256], "n_samples": 20, "targets": [_tg(0.3, weights=(1.0, 0.5))]},
        "rigidity": {"N_list": [512], "n_samples": 50, "targets": [_tg(0.3 + 0.1j)]},
        "eth": {"N_list": [256], "n_samples": 20, "targets": [_tg(0.0)]},
        "level-repulsion": {"N_list": [256], "n_samples": 4000, "targets": [_tg(0.0)]},
        "jacobian-check": {"N_list": [2, 3], "n_samples": 20, "params": {"m_R": 1, "m_L": 1}},
        "kq-ratio": {"N_list": [16, 32], "n_samples": 20, "t_rule": {"mode": "fixed", "value": 0.4},
                     "targets": [_tg(0.0)]},
        "evec-stats": {"N_list": [256], "n_samples": 2000,
                       "targets": [_tg(0.0, "right"), _tg(0.4, "left"), _tg(0.0, "right", (1.0, 0.5))]},
        "mgf": {"N_list": [256], "n_samples": 2000,
                "t_rule": {"mode": "power", "exponent": -1.0 / 3.0, "eps0": 0.05}, "targets": [_tg(0.0)]},
        "independence": {"N_list": [256], "n_samples": 2000,
                         "targets": [_tg(0.0, "right"), _tg(0.5, "left")]},
        "dse-table": {"N_list": [64], "n_samples": 0, "targets": [_tg(0.0), _tg(0.3 + 0.1j)]},
    }[kind]
    params = upd.pop("params", {})
    d.update(upd)
    d["params"].update(params)
    return ExperimentConfig.from_dict(d)
