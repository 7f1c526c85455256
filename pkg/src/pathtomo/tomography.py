"""Density-matrix reconstruction from correlation records.

Two estimators share one forward model:

* :class:`LinearInversionTomography` inverts the 9x9 transfer matrix of the
  minimal complete set ``(R00, R01, R11, R33, R34, R45 at phi1, same at phi2)``.
* :class:`MaximumLikelihoodTomography` fits ``rho = T^dag T / Tr(T^dag T)``
  with ``T`` lower triangular to any number of records by minimizing
  ``sum ((model - measured) / sigma)^2`` with restarted Nelder-Mead and a
  closing Levenberg-Marquardt polish.

Records hold side-peak normalized rates by default (coincidences over the
product of singles). Pass ``rates="raw"`` when the values are plain
coincidence probabilities, e.g. straight from :func:`predict_R_comp`.

The 9-vector form of ``rho`` is ``(rho_00, rho_11, rho_22, Re rho_01,
Im rho_01, Re rho_02, Im rho_02, Re rho_12, Im rho_12)`` in the basis
``|2,0>, |1,1>, |0,2>``.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import least_squares, minimize
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .correlations import COMP_LAYOUT, KIND_PAIRS, PHASE_KINDS, STATIC_KINDS, rate_observables
from .exceptions import (
    ConvergenceWarning,
    InsufficientDesign,
    MissingPhaseBin,
    NonConvergence,
    OutOfRange,
    SingularTransferMatrix,
)
from .records import MeasurementRecord
from .states import PSI_2002, PathDensityMatrix, random_density
from .validation import RecordArrays, check_config, check_random_state, check_rates_mode, check_records

SINGULAR_CONDITION = 1e10
DENOM_FLOOR = 1e-12
_OFFDIAG = ((0, 1), (0, 2), (1, 2))


def _hermitian_basis(dim: int) -> np.ndarray:
    basis = []
    for k in range(dim):
        b = np.zeros((dim, dim), dtype=complex)
        b[k, k] = 1.0
        basis.append(b)
    for a, c in ((a, c) for a in range(dim) for c in range(a + 1, dim)):
        re = np.zeros((dim, dim), dtype=complex)
        re[a, c] = re[c, a] = 1.0
        im = np.zeros((dim, dim), dtype=complex)
        im[a, c], im[c, a] = 1j, -1j
        basis += [re, im]
    return np.array(basis)


HERMITIAN_BASIS = _hermitian_basis(3)


def vectorize(rho) -> np.ndarray:
    m = np.asarray(getattr(rho, "matrix", rho), dtype=complex)
    out = [m[0, 0].real, m[1, 1].real, m[2, 2].real]
    for a, c in _OFFDIAG:
        out += [m[a, c].real, m[a, c].imag]
    return np.array(out)


def unvectorize(x) -> np.ndarray:
    return np.einsum("k,kij->ij", np.asarray(x, dtype=float), HERMITIAN_BASIS)


def observable_rows(observables: np.ndarray) -> np.ndarray:
    """Rows ``Re Tr[B_k W]`` so that ``Tr[rho W] = row @ vectorize(rho)``."""
    return np.real(np.einsum("kij,nji->nk", HERMITIAN_BASIS, observables))


class RecordModel:
    """Linear functionals of a fixed record layout.

    ``coinc @ x`` gives raw coincidence rates (auto rates with the tap factor);
    the normalized rate divides by ``tap * (singles_a @ x) * (singles_b @ x)``.
    """

    def __init__(self, coinc, singles_a, singles_b, tap):
        self.coinc = np.asarray(coinc, dtype=float)
        self.singles_a = np.asarray(singles_a, dtype=float)
        self.singles_b = np.asarray(singles_b, dtype=float)
        self.tap = np.asarray(tap, dtype=float)

    @classmethod
    def for_paths(cls, cfg, kinds, phases) -> "RecordModel":
        kinds = np.asarray(kinds)
        phases = np.nan_to_num(np.asarray(phases, dtype=float), nan=0.0)
        n = len(kinds)
        rows = {part: np.zeros((n, 9)) for part in ("coincidence", "singles_a", "singles_b")}
        for kind in np.unique(kinds):
            sel = np.flatnonzero(kinds == kind)
            for part, arr in rows.items():
                arr[sel] = observable_rows(rate_observables(cfg, kind, phases[sel], part))
        return cls(rows["coincidence"], rows["singles_a"], rows["singles_b"], _tap_factors(kinds))

    def raw(self, x) -> np.ndarray:
        return self.coinc @ x

    def denominators(self, x) -> np.ndarray:
        return self.tap * (self.singles_a @ x) * (self.singles_b @ x)

    def normalized(self, x) -> np.ndarray:
        return self.raw(x) / np.maximum(self.denominators(x), DENOM_FLOOR)

    def predict(self, x, rates: str) -> np.ndarray:
        return self.normalized(x) if rates == "normalized" else self.raw(x)

    def condition_number(self) -> float:
        s = np.linalg.svd(self.coinc, compute_uv=False)
        return math.inf if s[-1] <= 0 else float(s[0] / s[-1])


def _tap_factors(kinds) -> np.ndarray:
    return np.array([0.5 if KIND_PAIRS[k][0] == KIND_PAIRS[k][1] else 1.0 for k in kinds])


def comp_layout(phi1: float, phi2: float) -> tuple[list[str], np.ndarray]:
    phis = (phi1, phi2)
    kinds = [k for k, _ in COMP_LAYOUT]
    phases = np.array([np.nan if s is None else phis[s] for _, s in COMP_LAYOUT])
    return kinds, phases


def build_transfer_matrix(cfg, phi1: float, phi2: float) -> tuple[np.ndarray, float]:
    """9x9 matrix ``M`` with ``predict_R_comp(rho) = M @ vectorize(rho)``, and its condition number."""
    cfg = check_config(cfg)
    model = RecordModel.for_paths(cfg, *comp_layout(phi1, phi2))
    return model.coinc, model.condition_number()


def _path_starts(rng, n):
    return [vectorize(np.eye(3) / 3)] + [vectorize(random_density(rng)) for _ in range(n)]


def _path_negativity(x) -> float:
    return -float(np.linalg.eigvalsh(unvectorize(x)).min())


def _solve_linear(model: RecordModel, values, sigmas, rates: str, n_starts: int = 16,
                  starts=_path_starts, negativity=_path_negativity) -> np.ndarray:
    """Weighted least-squares inversion of the linear model.

    Raw rates give an ordinary linear solve. With normalized rates the singles
    products depend on the unknown state, the equations become rational and a
    minimal set can have several exact roots. Levenberg-Marquardt is started
    from the maximally mixed state and from seeded random states; roots are
    ranked by residual, then by how nearly positive they are.
    """
    w = 1.0 / np.asarray(sigmas)
    a = model.coinc * w[:, None]
    if rates == "raw":
        return np.linalg.lstsq(a, np.asarray(values) * w, rcond=None)[0]

    def resid(v):
        d = model.denominators(v)
        d = np.where(np.abs(d) < DENOM_FLOOR, DENOM_FLOOR, d)
        return (model.coinc @ v / d - values) * w

    best_key, best_x = None, None
    for s in starts(np.random.default_rng(0), n_starts):
        res = least_squares(resid, s, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        cost = 2 * res.cost
        neg = negativity(res.x)
        # costs within ~0.2% of each other (or all below 1e-20) tie; positivity breaks the tie
        key = (round(math.log10(cost + 1e-30) * 1e3) if cost > 1e-20 else -math.inf, neg)
        if best_key is None or key < best_key:
            best_key, best_x = key, res.x
    return best_x


def linear_reconstruct(records, cfg, phi1: float, phi2: float, rates: str = "normalized"):
    """Linear inversion of the minimal complete set.

    ``records`` are nine records in the minimal-set order. Returns the raw
    Hermitian estimate, which may be unphysical, and its trace-normalized
    version.
    """
    cfg = check_config(cfg)
    rates = check_rates_mode(rates)
    arr = check_records(records)
    kinds, _ = comp_layout(phi1, phi2)
    if list(arr.kinds) != kinds:
        raise ValueError(f"records must follow the minimal-set layout {kinds}")
    model = RecordModel.for_paths(cfg, *comp_layout(phi1, phi2))
    cond = model.condition_number()
    if cond >= SINGULAR_CONDITION:
        raise SingularTransferMatrix(f"condition number {cond:.3g} at phases ({phi1:.4g}, {phi2:.4g})")
    x = _solve_linear(model, arr.values, np.ones(len(arr)), rates)
    raw = PathDensityMatrix(unvectorize(x))
    return raw, raw.normalized()


def project_physical(rho) -> np.ndarray:
    """Clamp negative eigenvalues to zero and renormalize the trace."""
    m = np.asarray(getattr(rho, "matrix", rho), dtype=complex)
    vals, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    vals = np.clip(vals, 0.0, None)
    if vals.sum() <= 0:
        return np.eye(m.shape[0]) / m.shape[0]
    out = (vecs * vals) @ vecs.conj().T
    return out / np.trace(out).real


def cholesky_factor(t) -> np.ndarray:
    """Lower-triangular ``T`` from nine reals: diagonal first, then complex sub-diagonal."""
    t = np.asarray(t, dtype=float)
    return np.array([
        [t[0], 0, 0],
        [t[3] + 1j * t[4], t[1], 0],
        [t[5] + 1j * t[6], t[7] + 1j * t[8], t[2]],
    ])


def cholesky_density(t) -> np.ndarray:
    tm = cholesky_factor(t)
    m = tm.conj().T @ tm
    return m / np.trace(m).real


def cholesky_params(rho, jitter: float = 1e-9) -> np.ndarray:
    """Inverse of :func:`cholesky_density` for a physical ``rho``."""
    m = np.asarray(getattr(rho, "matrix", rho), dtype=complex)
    m = m + jitter * np.eye(3)
    # rho = T^dag T with T lower  <=>  J rho J = L L^dag with L = J T^dag J lower
    j = np.eye(3)[::-1]
    low = np.linalg.cholesky(j @ m @ j)
    tm = (j @ low @ j).conj().T
    return np.array([
        tm[0, 0].real, tm[1, 1].real, tm[2, 2].real,
        tm[1, 0].real, tm[1, 0].imag, tm[2, 0].real, tm[2, 0].imag, tm[2, 1].real, tm[2, 1].imag,
    ])


_TRI = np.tril_indices(3, -1)
_IU = np.triu_indices(3, 1)


def _vec_from_params(t) -> np.ndarray:
    # hot path of the optimizer: vectorize(cholesky_density(t)) written out.
    # T = [[a, 0, 0], [b, c, 0], [d, e, f]] with b, d, e complex; rho = T^H T.
    a, c, f, br, bi, dr, di, er, ei = t
    r00 = a * a + br * br + bi * bi + dr * dr + di * di
    r11 = c * c + er * er + ei * ei
    r22 = f * f
    norm = r00 + r11 + r22
    return np.array((
        r00, r11, r22,
        br * c + dr * er + di * ei, -bi * c + dr * ei - di * er,
        dr * f, -di * f,
        er * f, -ei * f,
    )) / norm


@dataclass
class MLEResult:
    x: np.ndarray
    params: np.ndarray
    objective: float
    converged: bool
    n_evals: int
    starts: list = field(default_factory=list)


def fit_mle(
    model: RecordModel,
    values,
    sigmas,
    to_vector,
    warm_params,
    n_params: int,
    *,
    rates: str = "normalized",
    n_restarts: int = 8,
    max_evals: int = 100_000,
    tol: float = 1e-12,
    random_state=None,
) -> MLEResult:
    """Minimize the weighted squared residual over an unconstrained parameterization."""
    rng = check_random_state(random_state)
    values = np.asarray(values, dtype=float)
    inv_sigma = 1.0 / np.asarray(sigmas, dtype=float)
    evals = 0

    def residual(p):
        return (model.predict(to_vector(p), rates) - values) * inv_sigma

    def objective(p):
        nonlocal evals
        evals += 1
        r = residual(p)
        return float(r @ r)

    starts = [] if warm_params is None else [np.asarray(warm_params, dtype=float)]
    starts += [rng.standard_normal(n_params) for _ in range(n_restarts)]
    # exploratory starts get a short leash; the incumbent is refined below
    per_start = 200 * n_params
    opts = dict(xatol=1e-7, fatol=tol, adaptive=True)

    best, history = None, []
    for s in starts:
        if evals >= max_evals:
            break
        res = minimize(objective, s, method="Nelder-Mead",
                       options=dict(opts, maxfev=min(per_start, max_evals - evals)))
        history.append(float(res.fun))
        if best is None or res.fun < best.fun:
            best = res

    # restart the simplex from the incumbent until a full round gains nothing
    converged = False
    while evals < max_evals:
        res = minimize(objective, best.x, method="Nelder-Mead",
                       options=dict(opts, maxfev=min(per_start, max_evals - evals)))
        gain = best.fun - res.fun
        if res.fun < best.fun:
            best = res
        if gain <= tol * max(1.0, abs(best.fun)):
            converged = True
            break

    # Gauss-Newton polish: near the boundary of the cone the objective is
    # quartic in the parameters and the simplex crawls
    if evals < max_evals:
        ls = least_squares(residual, best.x, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                           max_nfev=max(100, min(50 * n_params, max_evals - evals)))
        evals += ls.nfev
        cost = float(ls.fun @ ls.fun)
        if cost < best.fun:
            best.x, best.fun = ls.x, cost
    return MLEResult(to_vector(best.x), np.asarray(best.x), float(best.fun), converged, evals, history)


def _check_design(model: RecordModel, n_params: int):
    if model.coinc.shape[0] < n_params:
        raise InsufficientDesign(f"{model.coinc.shape[0]} records for {n_params} parameters")
    cond = model.condition_number()
    if cond >= SINGULAR_CONDITION:
        raise InsufficientDesign(f"record phases do not fix every parameter (condition number {cond:.3g})")


def mle_reconstruct(
    records,
    cfg,
    *,
    rates: str = "normalized",
    n_restarts: int = 8,
    max_evals: int = 100_000,
    tol: float = 1e-12,
    random_state=None,
    strict: bool = False,
) -> MLEResult:
    """Maximum-likelihood path density matrix from any informative record set.

    The warm start is the projected linear-inversion estimate. On budget
    exhaustion a :class:`ConvergenceWarning` is issued and the best point is
    returned, or :class:`NonConvergence` is raised when ``strict``.
    """
    cfg = check_config(cfg)
    rates = check_rates_mode(rates)
    arr = check_records(records)
    model = RecordModel.for_paths(cfg, arr.kinds, arr.phases)
    _check_design(model, 9)
    x_lin = _solve_linear(model, arr.values, arr.sigmas, rates)
    warm = cholesky_params(project_physical(unvectorize(x_lin)))
    result = fit_mle(model, arr.values, arr.sigmas, _vec_from_params, warm, 9, rates=rates,
                     n_restarts=n_restarts, max_evals=max_evals, tol=tol, random_state=random_state)
    _report_convergence(result, strict)
    return result


def _report_convergence(result: MLEResult, strict: bool):
    if result.converged:
        return
    msg = f"optimizer stopped after {result.n_evals} evaluations at objective {result.objective:.6g}"
    if strict:
        err = NonConvergence(msg)
        err.result = result
        raise err
    warnings.warn(msg, ConvergenceWarning, stacklevel=3)


def fidelity(rho, target=PSI_2002) -> float:
    """``<target| rho |target>`` for a pure target."""
    m = np.asarray(getattr(rho, "matrix", rho), dtype=complex)
    t = np.asarray(target, dtype=complex)
    return float(np.real(t.conj() @ m @ t))


def state_fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`` between two mixed states."""
    a = np.asarray(getattr(rho, "matrix", rho), dtype=complex)
    b = np.asarray(getattr(sigma, "matrix", sigma), dtype=complex)
    ra = scipy.linalg.sqrtm(a)
    val = np.trace(scipy.linalg.sqrtm(ra @ b @ ra)).real
    return float(val**2)


def source_metrics(r01_normalized: float, g2: float) -> tuple[float, float]:
    """HOM visibility ``1 - 2 R01`` and the overlap corrected additively for ``g2``."""
    if not 0.0 <= r01_normalized <= 1.0:
        raise OutOfRange(f"normalized R01 {r01_normalized} outside [0, 1]")
    if not 0.0 <= g2 < 1.0:
        raise OutOfRange(f"g2 {g2} outside [0, 1)")
    visibility = 1.0 - 2.0 * r01_normalized
    return visibility, visibility + g2


class _TomographyBase(BaseEstimator):
    def _model(self, arr: RecordArrays) -> RecordModel:
        return RecordModel.for_paths(check_config(self.config), arr.kinds, arr.phases)

    def predict(self, X) -> np.ndarray:
        """Model rates of the fitted state for the kinds and phases in ``X``."""
        check_is_fitted(self, "density_")
        arr = check_records(X, require_sigma=False)
        return self._model(arr).predict(vectorize(self.density_), check_rates_mode(self.rates))

    def score(self, X, y=None) -> float:
        """Negative weighted squared residual of ``X`` under the fitted state."""
        arr = check_records(X)
        r = (self.predict(arr) - arr.values) / arr.sigmas
        return -float(r @ r)

    def fidelity(self, target=PSI_2002) -> float:
        check_is_fitted(self, "density_")
        return fidelity(self.density_, target)


class LinearInversionTomography(_TomographyBase):
    """Linear inversion of the nine-record minimal set.

    ``phi1`` and ``phi2`` default to the phases carried by the records.
    After fitting, ``raw_density_`` is the direct inversion and
    ``density_`` its trace-normalized version.
    """

    def __init__(self, config=None, phi1=None, phi2=None, rates="normalized"):
        self.config = config
        self.phi1 = phi1
        self.phi2 = phi2
        self.rates = rates

    def fit(self, X, y=None):
        arr = check_records(X)
        phases = arr.phases[~np.isnan(arr.phases)]
        phi1 = self.phi1 if self.phi1 is not None else float(phases[0])
        phi2 = self.phi2 if self.phi2 is not None else float(phases[-1])
        cfg = check_config(self.config)
        raw, norm = linear_reconstruct(arr, cfg, phi1, phi2, rates=self.rates)
        _, self.condition_number_ = build_transfer_matrix(cfg, phi1, phi2)
        self.raw_density_ = raw.matrix
        self.density_ = norm.matrix
        self.phases_ = (phi1, phi2)
        return self


class MaximumLikelihoodTomography(_TomographyBase):
    """Physical density matrix by weighted least squares over a Cholesky factor."""

    def __init__(self, config=None, rates="normalized", n_restarts=8, max_evals=100_000,
                 tol=1e-12, random_state=None):
        self.config = config
        self.rates = rates
        self.n_restarts = n_restarts
        self.max_evals = max_evals
        self.tol = tol
        self.random_state = random_state

    def fit(self, X, y=None):
        result = mle_reconstruct(
            X, self.config, rates=self.rates, n_restarts=self.n_restarts,
            max_evals=self.max_evals, tol=self.tol, random_state=self.random_state,
        )
        self.density_ = unvectorize(result.x)
        self.params_ = result.params
        self.objective_ = result.objective
        self.converged_ = result.converged
        self.n_evals_ = result.n_evals
        return self


# --- fidelity scan ---------------------------------------------------------

def _circ_dist(a, b):
    d = np.abs(np.asarray(a) - b) % (2 * np.pi)
    return np.minimum(d, 2 * np.pi - d)


def select_minimal_set(arr: RecordArrays, phi1: float, phi2: float, bin_width: float) -> RecordArrays:
    """Nearest-bin minimal set ``(R00, R01, R11, R33, R34, R45 at phi1 and phi2)``."""
    idx = []
    for kind, slot in COMP_LAYOUT:
        cand = np.flatnonzero(arr.kinds == kind)
        if len(cand) == 0:
            raise MissingPhaseBin(f"no {kind} record")
        if slot is None:
            idx.append(cand[0])
            continue
        phi = (phi1, phi2)[slot]
        d = _circ_dist(arr.phases[cand], phi)
        k = int(np.argmin(d))
        if d[k] > 0.5 * bin_width + 1e-9:
            raise MissingPhaseBin(f"no {kind} record within half a bin of phi={phi:.4g}")
        idx.append(cand[k])
    return arr.subset(idx)


def _infer_bin_width(arr: RecordArrays) -> float:
    ph = np.unique(np.round(arr.phases[np.isin(arr.kinds, PHASE_KINDS)], 12))
    if len(ph) < 2:
        return 2 * np.pi
    return float(np.min(np.diff(ph)))


@dataclass
class ScanResult:
    phi1: np.ndarray
    phi2: np.ndarray
    fidelity: np.ndarray
    converged: np.ndarray
    singular: np.ndarray
    separation: np.ndarray = field(default=None)
    mean: np.ndarray = field(default=None)
    std: np.ndarray = field(default=None)
    count: np.ndarray = field(default=None)

    def rows(self):
        for a in range(len(self.phi1)):
            for b in range(len(self.phi2)):
                yield (float(self.phi1[a]), float(self.phi2[b]), float(self.fidelity[a, b]),
                       bool(self.converged[a, b]), bool(self.singular[a, b]))


def _scan_cell(args):
    arr, cfg, p1, p2, width, target, kwargs = args
    sub = select_minimal_set(arr, p1, p2, width)
    model = RecordModel.for_paths(cfg, sub.kinds, sub.phases)
    if model.condition_number() >= SINGULAR_CONDITION:
        return math.nan, False, True
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        res = mle_reconstruct(sub, cfg, **kwargs)
    return fidelity(unvectorize(res.x), target), res.converged, False


def scan_grid(n1: int, n2: int | None = None, span: float = np.pi) -> list[tuple[float, float]]:
    """Bin-centred grid over ``[0, span)`` for each phase."""
    n2 = n1 if n2 is None else n2
    g1 = (np.arange(n1) + 0.5) * span / n1
    g2 = (np.arange(n2) + 0.5) * span / n2
    return [(a, b) for a in g1 for b in g2]


def fidelity_scan(records, cfg, grid, *, n_jobs: int = 1, bin_width: float | None = None,
                  target=PSI_2002, **mle_kwargs) -> ScanResult:
    """Minimal-set MLE fidelity over a grid of phase pairs.

    Cells whose selected phases give a singular transfer matrix are flagged
    and left as ``nan``. Summary statistics are grouped by ``|phi2 - phi1|``.
    """
    cfg = check_config(cfg)
    arr = check_records(records)
    grid = [(float(a), float(b)) for a, b in grid]
    p1 = np.unique([g[0] for g in grid])
    p2 = np.unique([g[1] for g in grid])
    fid = np.full((len(p1), len(p2)), np.nan)
    conv = np.zeros_like(fid, dtype=bool)
    sing = np.zeros_like(fid, dtype=bool)
    if not grid:
        return ScanResult(p1, p2, fid, conv, sing, np.array([]), np.array([]), np.array([]), np.array([]))
    width = _infer_bin_width(arr) if bin_width is None else bin_width
    mle_kwargs.setdefault("random_state", 0)
    tasks = [(arr, cfg, a, b, width, target, mle_kwargs) for a, b in grid]
    if n_jobs == 1:
        results = list(map(_scan_cell, tasks))
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_scan_cell, tasks))
    for (a, b), (f, c, s) in zip(grid, results):
        ia, ib = np.searchsorted(p1, a), np.searchsorted(p2, b)
        fid[ia, ib], conv[ia, ib], sing[ia, ib] = f, c, s
    sep = np.round(np.abs(p2[None, :] - p1[:, None]), 9)
    ok = ~sing & np.isfinite(fid)
    seps = np.unique(sep[ok])
    mean = np.array([fid[ok & (sep == s)].mean() for s in seps])
    std = np.array([fid[ok & (sep == s)].std() for s in seps])
    count = np.array([np.count_nonzero(ok & (sep == s)) for s in seps])
    return ScanResult(p1, p2, fid, conv, sing, seps, mean, std, count)
