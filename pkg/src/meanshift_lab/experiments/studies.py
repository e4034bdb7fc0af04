"""The simulation studies: QQ normality, MSE comparison, consistency, identity and CLT checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .. import _kernels
from ..empirical import Sample
from ..errors import InvalidParam, MeanShiftLabError
from ..population import (
    BlurringMap,
    PopulationDistribution,
    clt_variance_blurring,
    clt_variance_nonblurring,
    default_quadrature,
    eta_population,
    kernel_H_blurring,
    kernel_H_nonblurring,
    lemma3_identity_check,
    population_chain,
)
from ..population.kernels import T_MAX
from ..process import ProcessState, blurring_step, nonblurring_step, run_to_convergence
from .config import ExperimentConfig, Study
from .output import base_metadata, plot_mse, plot_qq, write_table
from .runner import replicate_seed, run_replicates


# ------------------------------------------------------------------ replicates

@dataclass(frozen=True)
class ReplicateRecord:
    """Estimates of every configured kind on one sample (NaN where a run failed)."""

    m: int
    estimates: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    spread: np.ndarray
    violations: np.ndarray
    failed: np.ndarray


def replicate_estimates(cfg: ExperimentConfig, n: int, block: int, m: int) -> ReplicateRecord:
    x = cfg.distribution.sample(replicate_seed(cfg.seed, m, block).generator(), n)
    k = len(cfg.kinds)
    est = np.full(k, np.nan)
    conv = np.ones(k, dtype=bool)
    iters = np.zeros(k, dtype=np.int64)
    spread = np.zeros(k)
    viol = np.zeros(k, dtype=np.int64)
    failed = np.zeros(k, dtype=bool)
    for i, kind in enumerate(cfg.kinds):
        if kind == "mean":
            est[i] = float(np.mean(x))
        elif kind == "median":
            est[i] = float(np.median(x))
        else:
            try:
                r = run_to_convergence(x, cfg.weight, kind, cfg.convergence)
            except MeanShiftLabError:
                failed[i] = True
                conv[i] = False
                continue
            est[i], conv[i], iters[i] = r.estimate, r.converged, r.iterations_used
            spread[i], viol[i] = r.spread, r.order_violations
    return ReplicateRecord(m, est, conv, iters, spread, viol, failed)


def _records(cfg: ExperimentConfig, n: int, block: int, threads) -> list[ReplicateRecord]:
    return run_replicates(lambda m: replicate_estimates(cfg, n, block, m), cfg.replicates, threads)


def _stack(records, attr):
    return np.array([getattr(r, attr) for r in records])


# ------------------------------------------------------------------------- MSE

@dataclass(frozen=True)
class MseRow:
    kind: str
    n: int
    mse: float
    n_mse: float
    se: float
    mean_estimate: float
    replicates: int
    nonconverged: int
    failed: int


@dataclass(frozen=True)
class MseGap:
    """MSE(lower) < MSE(upper) at sample size n, with paired and independent standard errors."""

    n: int
    lower: str
    upper: str
    difference: float
    paired_se: float
    independent_se: float

    @property
    def z_paired(self) -> float:
        return self.difference / self.paired_se if self.paired_se > 0 else math.inf

    @property
    def z_independent(self) -> float:
        return self.difference / self.independent_se if self.independent_se > 0 else math.inf


@dataclass
class MseStudy:
    config: ExperimentConfig
    rows: list[MseRow]
    squared_errors: dict = field(repr=False)  # (kind, n) -> per-replicate squared errors
    records: dict = field(repr=False)  # n -> list[ReplicateRecord]

    def row(self, kind: str, n: int | None = None) -> MseRow:
        n = self.config.n_list[0] if n is None else n
        return next(r for r in self.rows if r.kind == kind and r.n == n)

    def gaps(self, n: int | None = None, order=None) -> list[MseGap]:
        """Adjacent differences MSE(b) - MSE(a) along ``order`` (default: configured kinds)."""
        n = self.config.n_list[0] if n is None else n
        order = tuple(order or self.config.kinds)
        out = []
        for a, b in zip(order, order[1:]):
            ea, eb = self.squared_errors[(a, n)], self.squared_errors[(b, n)]
            ok = np.isfinite(ea) & np.isfinite(eb)
            d = eb[ok] - ea[ok]
            M = d.size
            paired = float(np.std(d, ddof=1) / math.sqrt(M)) if M > 1 else math.nan
            indep = math.hypot(self.row(a, n).se, self.row(b, n).se)
            out.append(MseGap(n, a, b, float(d.mean()), paired, indep))
        return out

    def metadata(self) -> dict:
        meta = base_metadata(self.config)
        for n in self.config.n_list:
            for g in self.gaps(n):
                meta[f"gap[n={n}] {g.lower}<{g.upper}"] = (
                    f"diff={g.difference!r} paired_se={g.paired_se!r} independent_se={g.independent_se!r}")
        return meta

    def write(self, out_dir: str | Path, stem: str = "mse", plots: bool = True) -> list[Path]:
        out_dir = Path(out_dir)
        cols = ["kind", "n", "mse", "n_mse", "se_mse", "mean_estimate", "replicates", "nonconverged", "failed"]
        rows = [[r.kind, r.n, r.mse, r.n_mse, r.se, r.mean_estimate, r.replicates, r.nonconverged, r.failed]
                for r in self.rows]
        paths = [write_table(out_dir / f"{stem}.csv", cols, rows, self.metadata())]
        if plots:
            paths.append(plot_mse(out_dir / f"{stem}.svg", self.rows,
                                  f"{self.config.distribution.spec()}  w={self.config.weight.spec()}"))
        return paths


def run_mse_study(cfg: ExperimentConfig, threads: int | None = None) -> MseStudy:
    if cfg.study is not Study.MSE:
        raise InvalidParam("run_mse_study needs an MSE config")
    rows, sq, recs = [], {}, {}
    for block, n in enumerate(cfg.n_list):
        records = _records(cfg, n, block, threads)
        recs[n] = records
        est = _stack(records, "estimates")
        conv = _stack(records, "converged")
        failed = _stack(records, "failed")
        for i, kind in enumerate(cfg.kinds):
            e = est[:, i] - cfg.target
            e2 = e * e
            sq[(kind, n)] = e2
            ok = np.isfinite(e2)
            M = int(ok.sum())
            mse = float(e2[ok].mean()) if M else math.nan
            se = float(np.std(e2[ok], ddof=1) / math.sqrt(M)) if M > 1 else math.nan
            rows.append(MseRow(kind, n, mse, n * mse, se, float(np.nanmean(est[:, i])) if M else math.nan,
                               M, int((~conv[:, i] & ~failed[:, i]).sum()), int(failed[:, i].sum())))
    return MseStudy(cfg, rows, sq, recs)


# -------------------------------------------------------------------------- QQ

def normal_scores(m: int) -> np.ndarray:
    """Blom plotting positions mapped through the standard normal quantile."""
    i = np.arange(1, m + 1)
    return stats.norm.ppf((i - 0.375) / (m + 0.25))


def qq_correlation(estimates) -> float:
    est = np.sort(np.asarray(estimates, dtype=float))
    est = est[np.isfinite(est)]
    if est.size < 2 or np.ptp(est) == 0:
        return math.nan
    return float(np.corrcoef(est, normal_scores(est.size))[0, 1])


@dataclass(frozen=True)
class QqRow:
    kind: str
    sorted_estimates: np.ndarray
    normal_quantiles: np.ndarray
    correlation: float
    nonconverged: int = 0


@dataclass
class QqStudy:
    config: ExperimentConfig
    rows: list[QqRow]
    records: list = field(repr=False)

    def row(self, kind: str) -> QqRow:
        return next(r for r in self.rows if r.kind == kind)

    def write(self, out_dir: str | Path, stem: str = "qq", plots: bool = True) -> list[Path]:
        out_dir = Path(out_dir)
        meta = base_metadata(self.config)
        for r in self.rows:
            meta[f"qq_correlation[{r.kind}]"] = repr(r.correlation)
            meta[f"nonconverged[{r.kind}]"] = r.nonconverged
        rows = []
        for r in self.rows:
            for rank, (e, q) in enumerate(zip(r.sorted_estimates, r.normal_quantiles), start=1):
                rows.append([r.kind, rank, e, q])
        paths = [write_table(out_dir / f"{stem}.csv", ["kind", "rank", "estimate", "normal_quantile"], rows, meta)]
        if plots:
            paths.append(plot_qq(out_dir / f"{stem}.svg", self.rows,
                                 f"{self.config.distribution.spec()}  w={self.config.weight.spec()}"))
        return paths


def run_qq_study(cfg: ExperimentConfig, threads: int | None = None) -> QqStudy:
    """Median-at-stopping estimates per replicate, summarised by QQ correlation."""
    if cfg.study is not Study.QQ:
        raise InvalidParam("run_qq_study needs a QQ config")
    n = cfg.n_list[0]
    records = _records(cfg, n, 0, threads)
    est = _stack(records, "estimates")
    conv = _stack(records, "converged")
    rows = []
    for i, kind in enumerate(cfg.kinds):
        e = np.sort(est[:, i][np.isfinite(est[:, i])])
        rows.append(QqRow(kind, e, normal_scores(e.size), qq_correlation(e), int((~conv[:, i]).sum())))
    return QqStudy(cfg, rows, records)


# ----------------------------------------------------------------- consistency

@dataclass(frozen=True)
class ConsistencyRow:
    kind: str
    n: int
    mean_abs_error: float
    se_abs_error: float
    mse: float
    se_mse: float


@dataclass
class ConsistencyStudy:
    config: ExperimentConfig
    rows: list[ConsistencyRow]
    probe_errors: dict = field(repr=False)  # n -> per-replicate max |eta_n - eta| on the probes
    probes: np.ndarray = field(repr=False)

    def dominance(self, n_small: int | None = None, n_large: int | None = None) -> float:
        """Fraction of replicates whose probe error at ``n_large`` is below that at ``n_small``."""
        n_small = self.config.n_list[0] if n_small is None else n_small
        n_large = self.config.n_list[-1] if n_large is None else n_large
        return float(np.mean(self.probe_errors[n_large] < self.probe_errors[n_small]))

    def write(self, out_dir: str | Path, stem: str = "consistency") -> list[Path]:
        meta = base_metadata(self.config)
        meta["probe_points"] = " ".join(repr(float(p)) for p in self.probes)
        rows = [[r.kind, r.n, r.mean_abs_error, r.se_abs_error, r.mse, r.se_mse] for r in self.rows]
        for n, errs in self.probe_errors.items():
            rows.append(["eta-probe", n, float(errs.mean()), float(errs.std(ddof=1) / math.sqrt(errs.size))
                         if errs.size > 1 else math.nan, math.nan, math.nan])
        cols = ["kind", "n", "mean_abs_error", "se_abs_error", "mse", "se_mse"]
        return [write_table(Path(out_dir) / f"{stem}.csv", cols, rows, meta)]


def run_consistency_study(cfg: ExperimentConfig, threads: int | None = None,
                          F_0: PopulationDistribution | None = None) -> ConsistencyStudy:
    if cfg.study is not Study.CONSISTENCY:
        raise InvalidParam("run_consistency_study needs a consistency config")
    w, dist = cfg.weight, cfg.distribution
    F_0 = F_0 or PopulationDistribution.from_base(dist, w=w)
    probes = np.asarray(dist.ppf(np.linspace(0.05, 0.95, 41)), dtype=float)
    eta_pop = eta_population(F_0, w, probes)

    def one(n, block, m):
        rec = replicate_estimates(cfg, n, block, m)
        x = dist.sample(replicate_seed(cfg.seed, m, block).generator(), n)
        eta_n = _kernels.nonblurring_update(probes, np.ascontiguousarray(x), w.code, w.scale)
        return rec, float(np.max(np.abs(eta_n - eta_pop)))

    rows, probe_err = [], {}
    for block, n in enumerate(cfg.n_list):
        out = run_replicates(lambda m: one(n, block, m), cfg.replicates, threads)
        est = np.array([o[0].estimates for o in out])
        probe_err[n] = np.array([o[1] for o in out])
        for i, kind in enumerate(cfg.kinds):
            e = np.abs(est[:, i] - cfg.target)
            e = e[np.isfinite(e)]
            M = e.size
            rows.append(ConsistencyRow(kind, n, float(e.mean()), float(e.std(ddof=1) / math.sqrt(M)),
                                       float((e * e).mean()), float((e * e).std(ddof=1) / math.sqrt(M))))
    return ConsistencyStudy(cfg, rows, probe_err, probes)


# -------------------------------------------------------------------- collapse

@dataclass
class CollapseStudy:
    """Spread of the converged blurring configuration per replicate.

    Replicates whose spread stays at or above ``threshold`` are listed in
    ``flagged`` rather than folded into a summary.
    """

    config: ExperimentConfig
    threshold: float
    spreads: dict = field(repr=False)  # n -> per-replicate spread
    converged: dict = field(repr=False)  # n -> per-replicate convergence flags

    def collapsed_fraction(self, n: int | None = None) -> float:
        ns = self.config.n_list if n is None else (n,)
        s = np.concatenate([self.spreads[k] for k in ns])
        return float(np.mean(s < self.threshold))

    @property
    def flagged(self) -> list[tuple[int, int]]:
        """(n, replicate) pairs that did not collapse."""
        return [(n, int(m)) for n in self.config.n_list
                for m in np.nonzero(~(self.spreads[n] < self.threshold))[0]]

    def write(self, out_dir: str | Path, stem: str = "collapse") -> list[Path]:
        meta = base_metadata(self.config)
        meta["spread_threshold"] = repr(self.threshold)
        rows = [[n, m, self.spreads[n][m], self.converged[n][m], not self.spreads[n][m] < self.threshold]
                for n in self.config.n_list for m in range(self.spreads[n].size)]
        cols = ["n", "replicate", "spread", "converged", "flagged"]
        return [write_table(Path(out_dir) / f"{stem}.csv", cols, rows, meta)]


def run_collapse_check(cfg: ExperimentConfig, threads: int | None = None,
                       threshold: float = 1e-6) -> CollapseStudy:
    """Run the blurring process on every replicate and record the final spread."""
    cfg = cfg.with_(kinds=("blurring",))
    spreads, conv = {}, {}
    for block, n in enumerate(cfg.n_list):
        records = _records(cfg, n, block, threads)
        failed = _stack(records, "failed")[:, 0]
        spreads[n] = np.where(failed, np.inf, _stack(records, "spread")[:, 0])
        conv[n] = _stack(records, "converged")[:, 0]
    return CollapseStudy(cfg, threshold, spreads, conv)


# ------------------------------------------------------- finite-sample identity

@dataclass(frozen=True)
class Lemma3Row:
    n: int
    panels: int
    probes: int
    max_residual: float


@dataclass
class Lemma3Study:
    config: ExperimentConfig
    rows: list[Lemma3Row]

    @property
    def max_residual(self) -> float:
        return max(r.max_residual for r in self.rows)

    def refinement_ok(self, floor: float = 1e-12) -> bool:
        """Residual does not grow when the quadrature panels are doubled (up to a roundoff floor)."""
        ok = True
        for n in self.config.n_list:
            rs = sorted((r for r in self.rows if r.n == n), key=lambda r: r.panels)
            for a, b in zip(rs, rs[1:]):
                ok &= b.max_residual <= max(a.max_residual, floor)
        return bool(ok)

    def write(self, out_dir: str | Path, stem: str = "lemma3") -> list[Path]:
        rows = [[r.n, r.panels, r.probes, r.max_residual] for r in self.rows]
        return [write_table(Path(out_dir) / f"{stem}.csv", ["n", "panels", "probes", "max_residual"], rows,
                            base_metadata(self.config))]


def run_lemma3_check(cfg: ExperimentConfig, threads: int | None = None, refinements: int = 1) -> Lemma3Study:
    """Max identity residual over random probes, at the default quadrature and refined ones."""
    if cfg.study is not Study.LEMMA3:
        raise InvalidParam("run_lemma3_check needs a lemma3 config")
    w, dist = cfg.weight, cfg.distribution
    quad, center = default_quadrature(dist, w)
    pops = []
    for _ in range(refinements + 1):
        F = PopulationDistribution.from_base(dist, quad, center, w)
        pops.append((F, BlurringMap(F.nodes, F.masses, w, 1, F.positions)))
        quad = quad.refined()
    lo, hi = (float(v) for v in dist.ppf([0.01, 0.99]))
    rows = []
    for block, n in enumerate(cfg.n_list):
        def one(m):
            gen = replicate_seed(cfg.seed, m, block).generator()
            x = dist.sample(gen, n)
            probes = lo + (hi - lo) * gen.random(cfg.probes)
            return [max(lemma3_identity_check(x, F, w, p, bm) for p in probes) for F, bm in pops]
        res = np.array(run_replicates(one, cfg.replicates, threads))
        for j, (F, _) in enumerate(pops):
            rows.append(Lemma3Row(n, F.quad.panels, cfg.probes * cfg.replicates, float(res[:, j].max())))
    return Lemma3Study(cfg, rows)


# ------------------------------------------------------------------------- CLT

@dataclass(frozen=True)
class CltRow:
    t: int
    kind: str
    quadrature_variance: float
    textbook_variance: float
    mc_variance: float
    mc_se: float

    @property
    def relative_gap(self) -> float:
        return abs(self.mc_variance - self.quadrature_variance) / self.quadrature_variance


@dataclass(frozen=True)
class CovarianceRow:
    u: float
    v: float
    quadrature: float
    mc: float
    mc_se: float

    @property
    def z(self) -> float:
        return (self.mc - self.quadrature) / self.mc_se


@dataclass
class CltStudy:
    config: ExperimentConfig
    rows: list[CltRow]
    covariance_rows: list[CovarianceRow]
    sums: dict = field(repr=False)  # (t, kind) -> per-replicate S_n^(t)
    z_values: np.ndarray = field(repr=False)  # replicates x len(u_points)

    def row(self, t: int, kind: str) -> CltRow:
        return next(r for r in self.rows if r.t == t and r.kind == kind)

    def write(self, out_dir: str | Path, stem: str = "clt") -> list[Path]:
        meta = base_metadata(self.config)
        meta["index_convention"] = "t is the iteration of S_n^(t) = n^-1/2 sum_i (x_i^(t) - mu)"
        rows = [["variance", r.t, r.kind, "", "", r.quadrature_variance, r.textbook_variance, r.mc_variance,
                 r.mc_se, r.relative_gap] for r in self.rows]
        rows += [["covariance", 1, "blurring", c.u, c.v, c.quadrature, math.nan, c.mc, c.mc_se, c.z]
                 for c in self.covariance_rows]
        cols = ["quantity", "t", "kind", "u", "v", "quadrature", "textbook_form", "monte_carlo", "mc_se", "gap"]
        return [write_table(Path(out_dir) / f"{stem}.csv", cols, rows, meta)]


def _variance_se(s: np.ndarray) -> tuple[float, float]:
    c = s - s.mean()
    var = float(c @ c / (s.size - 1))
    m4 = float(np.mean(c ** 4))
    return var, math.sqrt(max(m4 - var * var, 0.0) / s.size)


def run_clt_cross_check(cfg: ExperimentConfig, threads: int | None = None,
                        u_points=(0.25, 0.5, 0.75)) -> CltStudy:
    """Monte Carlo Var(S_n^(t)), Var(S_n^[t]) and Cov(Z_n^(1)) against the quadrature limits.

    Step 1 is shared: both processes take the same first step.
    """
    if cfg.study is not Study.CLT:
        raise InvalidParam("run_clt_cross_check needs a CLT config")
    T = max(cfg.t_list)
    if T - 1 > T_MAX:
        from ..errors import CostGuard
        raise CostGuard(f"S_n^({T}) needs kernels up to t={T - 1} > {T_MAX}")
    w, dist, n, mu = cfg.weight, cfg.distribution, cfg.n_list[0], cfg.target
    F_0 = PopulationDistribution.from_base(dist, w=w)
    chain_b = population_chain(F_0, w, max(T - 1, 1), "blurring")
    q1 = np.asarray(chain_b[1].quantile(np.asarray(u_points)), dtype=float)
    root = math.sqrt(n)

    def one(m):
        x = dist.sample(replicate_seed(cfg.seed, m).generator(), n)
        s_b, s_nb = [], []
        st = blurring_step(ProcessState.initial(x), w)
        z = root * (np.searchsorted(np.sort(st.points), q1, side="right") / n - np.asarray(u_points))
        nb = st
        s_b.append(st.points.sum())
        s_nb.append(st.points.sum())
        for _ in range(1, T):
            st = blurring_step(st, w)
            nb = nonblurring_step(nb, w)
            s_b.append(st.points.sum())
            s_nb.append(nb.points.sum())
        return (np.array(s_b) - n * mu) / root, (np.array(s_nb) - n * mu) / root, z

    out = run_replicates(one, cfg.replicates, threads)
    SB = np.array([o[0] for o in out])
    SN = np.array([o[1] for o in out])
    Z = np.array([o[2] for o in out])

    levels = max(T - 1, 0)
    Hb = kernel_H_blurring(levels, F_0, w) if levels else []
    Hn = kernel_H_nonblurring(levels, F_0, w) if levels else []
    Fb = [chain_b[0]] + [H.population for H in Hb]
    Fn = [chain_b[0]] + [H.population for H in Hn]
    rows, sums = [], {}
    for t in cfg.t_list:
        for kind, S, fn, Fl, Hl in (("blurring", SB, clt_variance_blurring, Fb, Hb),
                                    ("nonblurring", SN, clt_variance_nonblurring, Fn, Hn)):
            s = S[:, t - 1]
            sums[(t, kind)] = s
            var, se = _variance_se(s)
            rows.append(CltRow(t, kind, fn(t - 1, Fl, Hl, w), fn(t - 1, Fl, Hl, w, "textbook"), var, se))

    H1 = Hb[0] if Hb else kernel_H_blurring(1, F_0, w)[0]
    Zc = Z - Z.mean(axis=0)
    cov_rows = []
    for a, ua in enumerate(u_points):
        for b, vb in enumerate(u_points):
            prod = Zc[:, a] * Zc[:, b]
            M = prod.size
            cov_rows.append(CovarianceRow(float(ua), float(vb), H1.covariance(ua, vb),
                                          float(prod.sum() / (M - 1)), float(prod.std(ddof=1) / math.sqrt(M))))
    return CltStudy(cfg, rows, cov_rows, sums, Z)


def run_study(cfg: ExperimentConfig, threads: int | None = None):
    return {
        Study.MSE: run_mse_study,
        Study.QQ: run_qq_study,
        Study.CONSISTENCY: run_consistency_study,
        Study.LEMMA3: run_lemma3_check,
        Study.CLT: run_clt_cross_check,
    }[cfg.study](cfg, threads=threads)
