"""Sparse simplex-constrained spectrum estimation.

``dictse_solve`` minimizes ``0.5 * ||y - FD w||^2_W`` over coefficient
vectors ``w`` on the probability simplex with at most ``C`` nonzeros. The
support is grown greedily: each new atom ``k`` is blended in as
``beta * w + (1 - beta) * e_k`` with the closed-form optimal ``beta``, then
weight is shuffled between the new atom and each older one by pairwise
coordinate descent, which keeps the coefficient sum fixed.

``lsse_solve`` is the per-bin baseline: projected gradient descent on the
spectrum itself, started from a user-supplied guess.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .dictionary import Dictionary
from .errors import (
    BadInitialization,
    DegenerateCandidate,
    DimensionMismatch,
    IdenticalColumns,
    NoViableCandidate,
)
from .physics import ForwardMatrix, TransmissionSet

BETA_CAP = 1e-12

# observer(event, omega, support, loss); event is "init", "select" or "pairwise"
Observer = Callable[[str, np.ndarray, tuple, float], None]


@dataclass(frozen=True)
class SolverConfig:
    """Settings for :func:`dictse_solve`.

    Attributes
    ----------
    max_support : int
        Sparsity budget ``C``.
    icd_tolerance : float
        Pairwise coordinate descent stops once the summed absolute update
        over one sweep drops below this value.
    max_icd_sweeps : int
        Hard cap on sweeps per coordinate-descent stage.
    early_stop_loss : float
        Stop growing the support once the loss is at or below this value.
    max_outer_iters : int or None
        Cap on support-selection rounds; defaults to ``10 * max_support``.
        Needed because coordinate descent may prune atoms and keep the
        support below ``C``.
    beta_cap : float
        The blend weight is limited to ``[0, 1 - beta_cap]``.
    """

    max_support: int = 5
    icd_tolerance: float = 1e-6
    max_icd_sweeps: int = 1000
    early_stop_loss: float = 0.0
    max_outer_iters: Optional[int] = None
    beta_cap: float = BETA_CAP

    def __post_init__(self):
        if int(self.max_support) < 1:
            raise ValueError("max_support must be >= 1")
        if self.icd_tolerance < 0 or self.early_stop_loss < 0:
            raise ValueError("tolerances must be nonnegative")
        if int(self.max_icd_sweeps) < 1:
            raise ValueError("max_icd_sweeps must be >= 1")
        if not 0 < self.beta_cap < 1:
            raise ValueError("beta_cap must lie in (0, 1)")

    @property
    def outer_limit(self) -> int:
        if self.max_outer_iters is None:
            return 10 * int(self.max_support)
        return int(self.max_outer_iters)


@dataclass(frozen=True)
class SparseCoefficients:
    omega: np.ndarray
    support: tuple

    @classmethod
    def from_omega(cls, omega) -> SparseCoefficients:
        omega = np.asarray(omega, dtype=float)
        return cls(omega, tuple(int(k) for k in np.flatnonzero(omega > 0)))

    @classmethod
    def one_hot(cls, k: int, n_atoms: int) -> SparseCoefficients:
        omega = np.zeros(n_atoms)
        omega[k] = 1.0
        return cls(omega, (int(k),))

    def __len__(self):
        return len(self.support)


class IterationRecord(NamedTuple):
    iteration: int
    k_star: int
    beta_star: float
    loss_after_select: float
    loss_after_icd: float
    sweeps: int


TRACE_HEADER = ("iter", "k_star", "beta_star", "loss_after_select", "loss_after_icd", "sweeps")


@dataclass
class SolveTrace:
    """Diagnostics of one solve.

    ``records`` has one row per support-selection round (round 0 is the
    initial single-atom pick, whose ``beta_star`` is NaN). ``step_losses``
    holds the loss after every individual step, selections and pairwise
    updates alike.
    """

    records: list = field(default_factory=list)
    step_losses: list = field(default_factory=list)
    stop_reason: str = ""

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_HEADER)
            for rec in self.records:
                w.writerow([rec.iteration, rec.k_star, repr(float(rec.beta_star)),
                            repr(float(rec.loss_after_select)), repr(float(rec.loss_after_icd)),
                            rec.sweeps])


def effective_matrix(F, D) -> np.ndarray:
    """The product ``F @ D`` mapping coefficients to transmissions."""
    F = F.matrix if isinstance(F, ForwardMatrix) else np.asarray(F, dtype=float)
    D = D.columns if isinstance(D, Dictionary) else np.asarray(D, dtype=float)
    if F.ndim != 2 or D.ndim != 2 or F.shape[1] != D.shape[0]:
        raise DimensionMismatch(f"cannot multiply {F.shape} by {D.shape}")
    return F @ D


def _check_data(FD, data):
    if FD.ndim != 2 or FD.shape[0] != len(data):
        raise DimensionMismatch(f"matrix has {FD.shape[0]} rows, data has {len(data)} entries")
    if FD.shape[1] < 1:
        raise DimensionMismatch("dictionary has no atoms")


def _loss(residual, weights) -> float:
    return 0.5 * float(np.dot(weights, residual * residual))


def _residual(omega, support, FD, y):
    idx = list(support)
    return y - FD[:, idx] @ omega[idx]


def select_initial(FD: np.ndarray, data: TransmissionSet):
    """Best single atom ``argmin_k loss(e_k)``; the first index wins ties."""
    FD = np.asarray(FD, dtype=float)
    _check_data(FD, data)
    R = data.y[:, None] - FD
    losses = 0.5 * (data.weights @ (R * R))
    k = int(np.argmin(losses))
    return k, SparseCoefficients.one_hot(k, FD.shape[1])


def _blend_scores(prediction, FD, data, beta_cap, candidates=None):
    """Optimal blend weights and losses for every candidate column.

    Degenerate candidates (column prediction equal to ``prediction``) get
    NaN beta and infinite loss.
    """
    cols = FD if candidates is None else FD[:, candidates]
    w = data.weights[:, None]
    E = prediction[:, None] - cols
    R = data.y[:, None] - cols
    den = np.sum(w * E * E, axis=0)
    num = np.sum(w * E * R, axis=0)
    ok = den > 0
    beta = np.full(cols.shape[1], np.nan)
    beta[ok] = np.clip(num[ok] / den[ok], 0.0, 1.0 - beta_cap)
    resid = R - np.where(ok, beta, 0.0) * E
    losses = np.where(ok, 0.5 * np.sum(w * resid * resid, axis=0), np.inf)
    return beta, losses


def score_candidate(k: int, omega_hat: SparseCoefficients, FD: np.ndarray,
                    data: TransmissionSet, beta_cap: float = BETA_CAP):
    """Closed-form blend weight for adding atom ``k`` to the current fit.

    Returns ``(beta, loss)`` where ``beta`` minimizes
    ``loss(beta * omega_hat + (1 - beta) * e_k)`` over ``[0, 1 - beta_cap]``.
    """
    FD = np.asarray(FD, dtype=float)
    _check_data(FD, data)
    if k in omega_hat.support:
        raise ValueError(f"atom {k} is already in the support")
    prediction = FD @ omega_hat.omega
    beta, losses = _blend_scores(prediction, FD, data, beta_cap, [k])
    if not np.isfinite(losses[0]):
        raise DegenerateCandidate(f"atom {k} reproduces the current prediction")
    return float(beta[0]), float(losses[0])


def select_next(omega_hat: SparseCoefficients, FD: np.ndarray, data: TransmissionSet,
                beta_cap: float = BETA_CAP):
    """Add the atom whose optimal blend with the current fit scores best.

    Returns ``(k_star, beta_star, new_coefficients)``. Coefficients scaled
    to exactly zero by ``beta_star == 0`` leave the support.
    """
    FD = np.asarray(FD, dtype=float)
    _check_data(FD, data)
    n_atoms = FD.shape[1]
    in_support = np.zeros(n_atoms, dtype=bool)
    in_support[list(omega_hat.support)] = True
    candidates = np.flatnonzero(~in_support)
    if candidates.size == 0:
        raise NoViableCandidate("every atom is already in the support")
    prediction = FD[:, list(omega_hat.support)] @ omega_hat.omega[list(omega_hat.support)]
    beta, losses = _blend_scores(prediction, FD, data, beta_cap, candidates)
    best = int(np.argmin(losses))
    if not np.isfinite(losses[best]):
        raise NoViableCandidate("all candidate atoms are degenerate")
    k_star, beta_star = int(candidates[best]), float(beta[best])
    omega = beta_star * omega_hat.omega
    omega[k_star] = 1.0 - beta_star
    return k_star, beta_star, SparseCoefficients.from_omega(omega)


def pairwise_step(omega: np.ndarray, k: int, g: int, FD: np.ndarray,
                  data: TransmissionSet, residual=None) -> float:
    """Optimal shift ``alpha`` of weight from atom ``g`` to atom ``k``.

    Minimizes ``loss(omega + alpha * (e_k - e_g))`` over
    ``alpha in [-omega[k], omega[g]]``. ``omega`` is not modified.
    """
    if residual is None:
        residual = data.y - FD @ omega
    d = FD[:, k] - FD[:, g]
    wd = data.weights * d
    den = float(np.dot(wd, d))
    if den <= 0:
        raise IdenticalColumns(f"atoms {k} and {g} have identical predictions")
    alpha = float(np.dot(wd, residual)) / den
    return min(max(alpha, -float(omega[k])), float(omega[g]))


def pairwise_icd(coeffs: SparseCoefficients, g: int, FD: np.ndarray, data: TransmissionSet,
                 config: SolverConfig = SolverConfig(), observer: Observer | None = None,
                 step_losses: list | None = None):
    """Rebalance weight between pivot ``g`` and the other support atoms.

    Sweeps ``k`` over the support in ascending order (excluding ``g``)
    applying :func:`pairwise_step`, until the summed ``|alpha|`` of a sweep
    falls below ``config.icd_tolerance`` or ``config.max_icd_sweeps`` is
    reached. Atoms left at exactly zero are dropped from the support at the
    end. Returns ``(coefficients, n_sweeps)``.
    """
    FD = np.asarray(FD, dtype=float)
    if g not in coeffs.support:
        raise ValueError(f"pivot {g} is not in the support")
    working = tuple(sorted(coeffs.support))
    partners = [k for k in working if k != g]
    omega = coeffs.omega.copy()
    if not partners:
        return SparseCoefficients(omega, coeffs.support), 0

    cols = {k: FD[:, k] for k in working}
    sweeps = 0
    while sweeps < config.max_icd_sweeps:
        sweeps += 1
        residual = _residual(omega, working, FD, data.y)
        total = 0.0
        for k in partners:
            try:
                alpha = pairwise_step(omega, k, g, FD, data, residual)
            except IdenticalColumns:
                continue
            if alpha != 0.0:
                omega[k] += alpha
                omega[g] -= alpha
                residual -= alpha * (cols[k] - cols[g])
                total += abs(alpha)
            if observer is not None or step_losses is not None:
                loss = _loss(residual, data.weights)
                if step_losses is not None:
                    step_losses.append(loss)
                if observer is not None:
                    observer("pairwise", omega, working, loss)
        if total < config.icd_tolerance:
            break
    support = tuple(k for k in working if omega[k] > 0)
    omega[[k for k in working if omega[k] <= 0]] = 0.0
    return SparseCoefficients(omega, support), sweeps


def dictse_solve(FD: np.ndarray, data: TransmissionSet, config: SolverConfig = SolverConfig(),
                 observer: Observer | None = None):
    """Greedy sparse simplex fit of ``data`` by the columns of ``FD``.

    Returns ``(SparseCoefficients, SolveTrace)``.
    """
    FD = np.asarray(FD, dtype=float)
    _check_data(FD, data)
    trace = SolveTrace()

    k0, coeffs = select_initial(FD, data)
    loss = _loss(_residual(coeffs.omega, coeffs.support, FD, data.y), data.weights)
    trace.records.append(IterationRecord(0, k0, math.nan, loss, loss, 0))
    trace.step_losses.append(loss)
    if observer is not None:
        observer("init", coeffs.omega, coeffs.support, loss)

    outer = 0
    while True:
        if len(coeffs) >= config.max_support:
            trace.stop_reason = "max_support"
            break
        if loss <= config.early_stop_loss:
            trace.stop_reason = "early_stop_loss"
            break
        if outer >= config.outer_limit:
            trace.stop_reason = "max_outer_iters"
            break
        outer += 1
        try:
            k_star, beta_star, coeffs = select_next(coeffs, FD, data, config.beta_cap)
        except NoViableCandidate:
            trace.stop_reason = "no_viable_candidate"
            break
        loss_sel = _loss(_residual(coeffs.omega, coeffs.support, FD, data.y), data.weights)
        trace.step_losses.append(loss_sel)
        if observer is not None:
            observer("select", coeffs.omega, coeffs.support, loss_sel)

        coeffs, sweeps = pairwise_icd(coeffs, k_star, FD, data, config, observer, trace.step_losses)
        loss = _loss(_residual(coeffs.omega, coeffs.support, FD, data.y), data.weights)
        trace.records.append(IterationRecord(outer, k_star, beta_star, loss_sel, loss, sweeps))
    return coeffs, trace


def spectrum_from_coefficients(coeffs, D) -> np.ndarray:
    """Spectrum ``x = D @ omega``."""
    omega = coeffs.omega if isinstance(coeffs, SparseCoefficients) else np.asarray(coeffs, float)
    D = D.columns if isinstance(D, Dictionary) else np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[1] != omega.size:
        raise DimensionMismatch(f"dictionary has {D.shape[-1]} atoms, omega has {omega.size}")
    return D @ omega


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto ``{x : x >= 0, sum(x) = 1}``."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / ind > 0)[-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def lsse_solve(F, data: TransmissionSet, x_init, iterations: int = 500,
               step: float | None = None, callback=None) -> np.ndarray:
    """Constrained weighted least squares on the per-bin spectrum.

    Projected gradient descent on ``0.5 * ||y - F x||^2_W`` over the
    simplex, started at ``x_init``. ``step`` is the initial step length of
    each backtracking search (default ``1 / L`` with ``L`` the gradient's
    Lipschitz constant). ``callback(iteration, x, loss)`` is called after
    every accepted step.
    """
    F = F.matrix if isinstance(F, ForwardMatrix) else np.asarray(F, dtype=float)
    x = np.array(x_init, dtype=float)
    if x.ndim != 1 or x.size != F.shape[1]:
        raise DimensionMismatch(f"x_init has {x.size} bins, F has {F.shape[1]} columns")
    if F.shape[0] != len(data):
        raise DimensionMismatch("F rows and data length differ")
    if np.any(x < -1e-6) or abs(x.sum() - 1.0) > 1e-6:
        raise BadInitialization("initial spectrum is not on the simplex")
    x = project_simplex(x)
    if x.size == 1:
        return x

    w, y = data.weights, data.y
    if step is None:
        lipschitz = np.linalg.norm(np.sqrt(w)[:, None] * F, 2) ** 2
        step = 1.0 / lipschitz if lipschitz > 0 else 1.0

    r = y - F @ x
    loss = _loss(r, w)
    for it in range(int(iterations)):
        grad = -F.T @ (w * r)
        t = step
        while True:
            x_new = project_simplex(x - t * grad)
            diff = x_new - x
            r_new = y - F @ x_new
            loss_new = _loss(r_new, w)
            bound = loss + float(grad @ diff) + float(diff @ diff) / (2.0 * t)
            if loss_new <= bound or t < 1e-30:
                break
            t *= 0.5
        if not np.any(diff) or loss_new > loss:
            break
        x, r, loss = x_new, r_new, loss_new
        if callback is not None:
            callback(it, x, loss)
    return x
