"""Two photons with a hidden label: symmetric and antisymmetric parts.

Photons ``a`` and ``b`` are tracked separately, so a two-photon state over
``M`` modes is an ``M x M`` amplitude array ``psi[p, q]`` (``a`` in mode
``p``, ``b`` in mode ``q``) and a mode transform acts as ``kron(U, U)``.
The visible basis embeds as

* ``|2,0>`` -> ``a, b`` both in path 0
* ``psi+ / psi-`` -> ``(|0,1> +/- |1,0>) / sqrt(2)``
* ``|0,2>`` -> both in path 1

Coincidences sum over both label assignments. The optics and detectors are
blind to the label, so every rate observable commutes with the label swap
and has no matrix element between the symmetric block and ``psi-``.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from sklearn.utils.validation import check_is_fitted

from .correlations import (
    DIRECT_LABELS,
    KIND_PAIRS,
    STAGE_LABELS,
    _stage,
    evaluate_harmonics,
    fourier_harmonics,
)
from .exceptions import OutOfRange
from .optics import SetupConfig, build_analysis_setup, splitter_matrix
from .states import PSI_2002, VisDensityMatrix, random_density
from .tomography import (
    HERMITIAN_BASIS,
    RecordModel,
    _check_design,
    _report_convergence,
    _solve_linear,
    _TomographyBase,
    cholesky_params,
    fidelity,
    fit_mle,
    project_physical,
    unvectorize,
    vectorize,
)
from .validation import check_config, check_rates_mode, check_records

SQRT_HALF = 1.0 / math.sqrt(2.0)


def vis_embedding(mode_count: int) -> np.ndarray:
    """``(M*M) x 4`` isometry from the visible basis into the labelled space."""
    e = np.zeros((mode_count * mode_count, 4))
    ab = lambda p, q: p * mode_count + q  # noqa: E731
    e[ab(0, 0), 0] = 1.0
    e[ab(0, 1), 1] = e[ab(1, 0), 1] = SQRT_HALF
    e[ab(1, 1), 2] = 1.0
    e[ab(0, 1), 3], e[ab(1, 0), 3] = SQRT_HALF, -SQRT_HALF
    return e


def labelled_detector(mode_count: int, i: int, j: int | None) -> np.ndarray:
    """Diagonal label-resolved detector operator.

    Pairs ``i != j`` count ``a``-in-``i``/``b``-in-``j`` plus the swap; ``i == j``
    is the tap-split auto rate, which is half of both assignments; ``j`` None
    counts singles on ``i``.
    """
    p, q = np.divmod(np.arange(mode_count * mode_count), mode_count)
    if j is None:
        diag = (p == i).astype(float) + (q == i)
    elif i == j:
        diag = ((p == i) & (q == i)).astype(float)
    else:
        diag = ((p == i) & (q == j)).astype(float) + ((p == j) & (q == i))
    return np.diag(diag)


def vis_observable_for(u: np.ndarray, i: int, j: int | None) -> np.ndarray:
    """4x4 observable of a detector pair behind the mode transform ``u``."""
    u = np.asarray(getattr(u, "matrix", u), dtype=complex)
    m = u.shape[0]
    ul = np.kron(u, u)
    e = vis_embedding(m)
    w = e.T @ ul.conj().T @ labelled_detector(m, i, j) @ ul @ e
    return 0.5 * (w + w.conj().T)


def _vis_observable(cfg: SetupConfig, phi: float, i: str, j: str | None) -> np.ndarray:
    stage = _stage(i, i if j is None else j)
    if stage == "direct":
        return vis_observable_for(np.eye(2), DIRECT_LABELS[i], None if j is None else DIRECT_LABELS[j])
    u = build_analysis_setup(cfg, phi).matrix
    return vis_observable_for(u, STAGE_LABELS[i], None if j is None else STAGE_LABELS[j])


@lru_cache(maxsize=4096)
def _vis_harmonics(cfg: SetupConfig, i: str, j: str | None) -> np.ndarray:
    return fourier_harmonics(lambda p: _vis_observable(cfg, p, i, j))


def vis_observable(cfg: SetupConfig, phi, i: str, j: str | None) -> np.ndarray:
    """4x4 observable(s) at ``phi``; ``i == j`` is the auto rate, ``j`` None singles."""
    out = evaluate_harmonics(_vis_harmonics(cfg, i, j), phi)
    return out[0] if np.ndim(phi) == 0 else out


def _as_vis_matrix(rho) -> np.ndarray:
    if isinstance(rho, VisDensityMatrix):
        return rho.matrix
    m = np.asarray(getattr(rho, "matrix", rho), dtype=complex)
    if m.shape == (3, 3):
        return VisDensityMatrix(m, 0.0).matrix
    if m.shape != (4, 4):
        raise ValueError(f"expected a 4x4 visible density matrix, got {m.shape}")
    return m


def predict_rate_vis(rho_vis, cfg: SetupConfig, phi: float, i: str, j: str, part: str = "pair") -> float:
    """Label-summed rate of a visible density matrix.

    ``part`` is ``"pair"`` for the coincidence (auto when ``i == j``) or
    ``"singles"`` for the singles rate on ``i``. A full 4x4 matrix with
    cross-block coherences is accepted; those coherences never contribute.
    """
    w = vis_observable(cfg, phi, i, None if part == "singles" else j)
    value = float(np.real(np.trace(_as_vis_matrix(rho_vis) @ w)))
    if value < 0:
        if value < -1e-9:
            raise ValueError(f"negative rate {value:.3g}: input state is not physical")
        value = 0.0
    return value


def normalized_rate_vis(rho_vis, cfg: SetupConfig, phi: float, i: str, j: str) -> float:
    si = predict_rate_vis(rho_vis, cfg, phi, i, i, "singles")
    sj = predict_rate_vis(rho_vis, cfg, phi, j, j, "singles")
    tap = 0.5 if i == j else 1.0
    return predict_rate_vis(rho_vis, cfg, phi, i, j) / (tap * si * sj)


def hom_source_vis(hom_reflectivity: float, overlap: float) -> VisDensityMatrix:
    """Two photons of mean wavepacket overlap ``overlap`` after the HOM splitter.

    The input pair, one photon per path, splits into ``psi+`` with weight
    ``(1 + overlap) / 2`` and ``psi-`` with weight ``(1 - overlap) / 2``.
    """
    if not 0.0 < hom_reflectivity < 1.0:
        raise OutOfRange(f"reflectivity {hom_reflectivity} outside (0, 1)")
    if not 0.0 <= overlap <= 1.0:
        raise OutOfRange(f"overlap {overlap} outside [0, 1]")
    rho_in = np.diag([0.0, (1 + overlap) / 2, 0.0, (1 - overlap) / 2])
    e = vis_embedding(2)
    ul = np.kron(splitter_matrix(hom_reflectivity), splitter_matrix(hom_reflectivity))
    t = e.T @ ul @ e  # the visible span is invariant under kron(U, U)
    out = t @ rho_in @ t.conj().T
    return VisDensityMatrix(out[:3, :3], out[3, 3].real)


# --- reconstruction -------------------------------------------------------

def vis_vectorize(rho) -> np.ndarray:
    m = _as_vis_matrix(rho)
    return np.append(vectorize(m[:3, :3]), m[3, 3].real)


def vis_unvectorize(x) -> VisDensityMatrix:
    return VisDensityMatrix(unvectorize(x[:9]), float(x[9]))


def vis_observable_rows(observables: np.ndarray) -> np.ndarray:
    sym = np.real(np.einsum("kij,nji->nk", HERMITIAN_BASIS, observables[:, :3, :3]))
    return np.column_stack([sym, observables[:, 3, 3].real])


def vis_record_model(cfg: SetupConfig, kinds, phases) -> RecordModel:
    kinds = np.asarray(kinds)
    phases = np.nan_to_num(np.asarray(phases, dtype=float), nan=0.0)
    n = len(kinds)
    coinc, sa, sb = np.zeros((n, 10)), np.zeros((n, 10)), np.zeros((n, 10))
    tap = np.ones(n)
    for kind in np.unique(kinds):
        sel = np.flatnonzero(kinds == kind)
        a, b = KIND_PAIRS[kind]
        ph = phases[sel]
        coinc[sel] = vis_observable_rows(np.atleast_3d(vis_observable(cfg, ph, a, b)))
        sa[sel] = vis_observable_rows(np.atleast_3d(vis_observable(cfg, ph, a, None)))
        sb[sel] = vis_observable_rows(np.atleast_3d(vis_observable(cfg, ph, b, None)))
        if a == b:
            tap[sel] = 0.5
    return RecordModel(coinc, sa, sb, tap)


def _vis_vec_from_params(t) -> np.ndarray:
    a, c, f, br, bi, dr, di, er, ei, w = t
    r00 = a * a + br * br + bi * bi + dr * dr + di * di
    r11 = c * c + er * er + ei * ei
    r22 = f * f
    anti = w * w
    return np.array((
        r00, r11, r22,
        br * c + dr * er + di * ei, -bi * c + dr * ei - di * er,
        dr * f, -di * f,
        er * f, -ei * f,
        anti,
    )) / (r00 + r11 + r22 + anti)


def _vis_starts(rng, n):
    out = [np.append(vectorize(np.eye(3) / 4), 0.25)]
    for _ in range(n):
        a = rng.uniform(0, 0.5)
        out.append(np.append((1 - a) * vectorize(random_density(rng)), a))
    return out


def _vis_negativity(x) -> float:
    return -min(float(np.linalg.eigvalsh(unvectorize(x[:9])).min()), float(x[9]))


def _vis_warm_params(x) -> np.ndarray:
    sym = project_physical(unvectorize(x[:9])) * max(1.0 - max(x[9], 0.0), 1e-6)
    return np.append(cholesky_params(sym), math.sqrt(max(x[9], 0.0)) + 1e-6)


def mle_reconstruct_vis(
    records,
    cfg,
    *,
    rates: str = "normalized",
    n_restarts: int = 8,
    max_evals: int = 100_000,
    tol: float = 1e-12,
    random_state=None,
    strict: bool = False,
):
    """Ten-parameter fit of the visible density matrix (nine for the symmetric block, one for psi-)."""
    cfg = check_config(cfg)
    rates = check_rates_mode(rates)
    arr = check_records(records)
    model = vis_record_model(cfg, arr.kinds, arr.phases)
    _check_design(model, 10)
    x_lin = _solve_linear(model, arr.values, arr.sigmas, rates, starts=_vis_starts, negativity=_vis_negativity)
    result = fit_mle(model, arr.values, arr.sigmas, _vis_vec_from_params, _vis_warm_params(x_lin), 10,
                     rates=rates, n_restarts=n_restarts, max_evals=max_evals, tol=tol,
                     random_state=random_state)
    _report_convergence(result, strict)
    return result


class VisibleStateTomography(_TomographyBase):
    """MLE of the block-diagonal 4x4 visible density matrix.

    After fitting, ``vis_density_`` is the :class:`VisDensityMatrix`,
    ``antisym_population_`` its ``psi-`` weight and ``density_`` the 4x4 array.
    """

    def __init__(self, config=None, rates="normalized", n_restarts=8, max_evals=100_000,
                 tol=1e-12, random_state=None):
        self.config = config
        self.rates = rates
        self.n_restarts = n_restarts
        self.max_evals = max_evals
        self.tol = tol
        self.random_state = random_state

    def _model(self, arr):
        return vis_record_model(check_config(self.config), arr.kinds, arr.phases)

    def fit(self, X, y=None):
        result = mle_reconstruct_vis(
            X, self.config, rates=self.rates, n_restarts=self.n_restarts,
            max_evals=self.max_evals, tol=self.tol, random_state=self.random_state,
        )
        self.vis_density_ = vis_unvectorize(result.x)
        self.density_ = self.vis_density_.matrix
        self.antisym_population_ = self.vis_density_.antisym_pop
        self.params_ = result.params
        self.objective_ = result.objective
        self.converged_ = result.converged
        self.n_evals_ = result.n_evals
        return self

    def predict(self, X):
        check_is_fitted(self, "density_")
        arr = check_records(X, require_sigma=False)
        return self._model(arr).predict(vis_vectorize(self.density_), check_rates_mode(self.rates))

    def fidelity(self, target=PSI_2002) -> float:
        """Overlap of the symmetric block with a pure path target (psi+ read as |1,1>)."""
        check_is_fitted(self, "density_")
        return fidelity(self.vis_density_.sym_block, target)
