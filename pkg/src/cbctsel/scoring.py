"""View scores: edge alignment, pairwise view distance, and angle dispersion.

The edge alignment score of a candidate angle is the softmax-weighted mean
of the forward projection of a binary edge volume; rays running along long
edges produce large projection values, and the softmax (sharpness ``beta``)
concentrates the mean on them.  The dispersion score penalizes candidates
whose unfiltered backprojection is close, in mean absolute difference, to
the backprojections of already-selected views, which captures the
geometry-dependent inequivalence of opposing cone-beam views.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .edges import EdgeVolume
from .geometry import AngleGrid, ConeBeamGeometry
from .projector import Volume, back_project_each, forward_project_stack

__all__ = [
    "SoftmaxParams",
    "DispersionParams",
    "DistanceMatrix",
    "ScoreBreakdown",
    "ObjectiveParams",
    "softmax_weights",
    "alignment_from_projection",
    "alignment_scores_from_stack",
    "edge_alignment_score",
    "pairwise_view_distance",
    "build_distance_matrix",
    "median_offdiagonal",
    "suggest_dispersion_params",
    "dispersion_score",
    "lambda_schedule",
    "objective",
]


@dataclass(frozen=True)
class SoftmaxParams:
    """Sharpness of the alignment-score weighting; 0 gives a plain mean."""

    beta: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.beta) or self.beta < 0.0:
            raise ValueError("beta must be finite and non-negative")


@dataclass(frozen=True)
class DispersionParams:
    """Decay rate and distance floor for the dispersion score."""

    gamma: float
    epsilon_d: float

    def __post_init__(self):
        if self.gamma <= 0.0 or not math.isfinite(self.gamma):
            raise ValueError("gamma must be positive and finite")
        if self.epsilon_d <= 0.0 or not math.isfinite(self.epsilon_d):
            raise ValueError("epsilon_d must be positive and finite")


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Pairwise view distances over a candidate grid (symmetric, zero diagonal)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("distance matrix must be square")
        if not np.all(np.isfinite(v)):
            raise ValueError("distance matrix contains non-finite entries")
        if np.any(v < 0.0):
            raise ValueError("distances must be non-negative")
        if np.any(np.diagonal(v) != 0.0):
            raise ValueError("distance matrix diagonal must be zero")
        scale = v.max(initial=0.0)
        if np.abs(v - v.T).max(initial=0.0) > 1e-12 * max(scale, 1.0):
            raise ValueError("distance matrix must be symmetric")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class ScoreBreakdown:
    """Per-candidate record of the greedy objective and its terms.

    ``total == lam * i_cad + (1 - lam) * i_recon + dispersion`` by
    construction (use :meth:`compute`).
    """

    i_cad: float
    i_recon: float
    dispersion: float
    lam: float
    total: float

    @classmethod
    def compute(cls, i_cad: float, i_recon: float, dispersion: float, lam: float) -> "ScoreBreakdown":
        total = lam * i_cad + (1.0 - lam) * i_recon + dispersion
        return cls(i_cad=i_cad, i_recon=i_recon, dispersion=dispersion, lam=lam, total=total)


@dataclass(frozen=True)
class ObjectiveParams:
    """Everything the objective needs besides the selection state.

    ``i_norm`` rescales both alignment terms so they are commensurate with
    the dispersion term; callers set it to the maximum nominal-model
    alignment score over the candidate grid at initialization.
    """

    softmax: SoftmaxParams
    dispersion: DispersionParams
    lam: float
    i_norm: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.lam <= 1.0):
            raise ValueError("lambda weight must lie in [0, 1]")
        if self.i_norm <= 0.0 or not math.isfinite(self.i_norm):
            raise ValueError("i_norm must be positive and finite")


def softmax_weights(y, params: SoftmaxParams) -> np.ndarray:
    """Softmax weights of a projection (or array), overflow-safe, summing to 1."""
    data = np.asarray(getattr(y, "data", y), dtype=np.float64)
    if not np.all(np.isfinite(data)):
        raise ValueError("projection contains non-finite values")
    if params.beta == 0.0:
        return np.full_like(data, 1.0 / data.size)
    z = params.beta * data
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def alignment_from_projection(y: np.ndarray, beta: float) -> float:
    """Softmax-weighted mean of one edge projection."""
    w = softmax_weights(y, SoftmaxParams(beta))
    return float(np.sum(w * np.asarray(getattr(y, "data", y), dtype=np.float64)))


def alignment_scores_from_stack(stack: np.ndarray, beta: float) -> np.ndarray:
    """Vector of alignment scores for a (n_views, rows, cols) projection stack."""
    flat = stack.reshape(stack.shape[0], -1)
    if beta == 0.0:
        return flat.mean(axis=1)
    z = beta * flat
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    w = e / e.sum(axis=1, keepdims=True)
    return np.sum(w * flat, axis=1)


def edge_alignment_score(edge_vol: EdgeVolume, geom: ConeBeamGeometry,
                         angle: float, params: SoftmaxParams) -> float:
    """Alignment of one candidate view with the edges in ``edge_vol``."""
    stack = forward_project_stack(edge_vol.to_volume(), geom,
                                  np.array([angle], dtype=np.float64))
    return alignment_from_projection(stack[0], params.beta)


def _distance_between(bp_i: np.ndarray, bp_j: np.ndarray) -> float:
    stack = np.stack([bp_i.ravel(), bp_j.ravel()])
    out = np.zeros((2, 2), dtype=np.float64)
    _kernels.pairwise_l1_kernel(stack, out)
    return float(out[0, 1])


def pairwise_view_distance(cad: Volume, geom: ConeBeamGeometry,
                           theta_i: float, theta_j: float) -> float:
    """Mean absolute difference per voxel between two unfiltered backprojections.

    Both views are projected from the nominal part model and smeared back
    through the same adjoint operator, so the value reflects how
    differently the two views cover the volume for this scan geometry.
    """
    angles = np.array([theta_i, theta_j], dtype=np.float64)
    projs = forward_project_stack(cad, geom, angles)
    bps = back_project_each(projs, geom, angles)
    return _distance_between(bps[0], bps[1])


def build_distance_matrix(cad: Volume, geom: ConeBeamGeometry,
                          grid: AngleGrid) -> DistanceMatrix:
    """All pairwise view distances; each backprojection is computed once.

    Memory: holds one backprojected volume per grid angle
    (``len(grid) * nx * ny * nz`` float64 values).
    """
    angles = grid.angles
    projs = forward_project_stack(cad, geom, angles)
    bps = back_project_each(projs, geom, angles).reshape(len(grid), -1)
    values = np.zeros((len(grid), len(grid)), dtype=np.float64)
    _kernels.pairwise_l1_kernel(bps, values)
    return DistanceMatrix(values)


def median_offdiagonal(dmat: DistanceMatrix) -> float:
    """Median of the off-diagonal distances."""
    v = dmat.values
    mask = ~np.eye(v.shape[0], dtype=bool)
    return float(np.median(v[mask]))


def suggest_dispersion_params(dmat: DistanceMatrix, gamma_scale: float = 0.1) -> DispersionParams:
    """Scale-aware defaults: gamma from the typical distance, floor from the max.

    With ``gamma = gamma_scale * median`` the first selected view at a
    typical distance costs a candidate about ``exp(-gamma_scale)`` of its
    dispersion score, keeping the term comparable to the normalized
    alignment scores.
    """
    med = median_offdiagonal(dmat)
    mx = float(dmat.values.max(initial=0.0))
    gamma = gamma_scale * med if med > 0.0 else 1.0
    eps = 1e-12 * mx if mx > 0.0 else 1e-30
    return DispersionParams(gamma=gamma, epsilon_d=eps)


def dispersion_score(theta_index: int, selected, dmat: DistanceMatrix,
                     params: DispersionParams) -> float:
    """Diversity score in (0, 1]; decreases as selected views crowd the candidate."""
    sel = list(selected)
    if theta_index in sel:
        raise ValueError(f"candidate index {theta_index} is already selected")
    if not sel:
        return 1.0
    d = dmat.values[theta_index, sel]
    inv = 1.0 / np.maximum(d, params.epsilon_d)
    return float(np.exp(-params.gamma * inv.sum()))


def lambda_schedule(n: int, n_init: int, n_budget: int) -> float:
    """Linear decay of the nominal-model weight from 1 (at ``n_init``) to 0 (at ``n_budget``)."""
    if n_budget <= n_init:
        raise ValueError("n_budget must exceed n_init")
    if not (n_init <= n <= n_budget):
        raise ValueError(f"step {n} outside [{n_init}, {n_budget}]")
    lam = (n_budget - n) / (n_budget - n_init)
    return float(min(1.0, max(0.0, lam)))


def objective(theta_index: int, state, edge_cad: EdgeVolume,
              edge_recon: EdgeVolume | None, params: ObjectiveParams) -> ScoreBreakdown:
    """Greedy objective of one candidate given the current selection state.

    ``state`` provides ``grid``, ``selected``, ``dmat`` and ``geom`` (see
    :class:`cbctsel.selection.SelectionState`).  ``edge_recon`` may be None
    while ``params.lam == 1`` (nominal-model-only phase); its term then
    contributes nothing.
    """
    if theta_index in state.selected:
        raise ValueError(f"candidate index {theta_index} is already selected")
    angle = float(state.grid.angles[theta_index])
    i_cad = edge_alignment_score(edge_cad, state.geom, angle, params.softmax) / params.i_norm
    if edge_recon is None:
        if params.lam != 1.0:
            raise ValueError("edge_recon is required when lambda < 1")
        i_recon = 0.0
    else:
        i_recon = edge_alignment_score(edge_recon, state.geom, angle,
                                       params.softmax) / params.i_norm
    disp = dispersion_score(theta_index, state.selected, state.dmat, params.dispersion)
    return ScoreBreakdown.compute(i_cad=i_cad, i_recon=i_recon, dispersion=disp, lam=params.lam)
