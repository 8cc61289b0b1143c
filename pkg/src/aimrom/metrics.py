"""Error metrics and the four-term truncation/closure error decomposition."""

from dataclasses import dataclass, field

import numpy as np

from .spectral import SpectralState, basis_for_grid, grid_l2_norm, reconstruct

__all__ = [
    "mape",
    "mse",
    "mape_series",
    "MetricsBundle",
    "ErrorDecomposition",
    "decompose_errors",
    "ensemble_histogram",
    "EnsembleResult",
]

_MAPE_FLOOR = 1e-8


def mape(predicted, truth):
    """Mean absolute percent error with a 1e-8 denominator floor."""
    p = np.asarray(predicted, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.shape != t.shape:
        raise ValueError("predicted and truth must have the same shape")
    if p.size == 0:
        raise ValueError("cannot average over an empty array")
    denom = np.maximum(np.abs(t), _MAPE_FLOOR)
    return float(np.mean(100.0 * np.abs(p - t) / denom))


def mse(predicted, truth):
    p = np.asarray(predicted, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.shape != t.shape:
        raise ValueError("predicted and truth must have the same shape")
    if p.size == 0:
        raise ValueError("cannot average over an empty array")
    return float(np.mean((p - t) ** 2))


def mape_series(pred_rows, truth_rows):
    """Row-wise percent error: one value per time step of a field history."""
    p = np.asarray(pred_rows, dtype=float)
    t = np.asarray(truth_rows, dtype=float)
    if p.shape != t.shape or p.ndim != 2:
        raise ValueError("pred_rows and truth_rows must be matching 2d arrays")
    denom = np.maximum(np.abs(t), _MAPE_FLOOR)
    return np.mean(100.0 * np.abs(p - t) / denom, axis=1)


@dataclass(frozen=True)
class MetricsBundle:
    """Final-time scores plus the raw-truncation percent error over time."""

    mape_final: float
    mse_final: float
    percent_error_series: np.ndarray = field(repr=False)
    times: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class ErrorDecomposition:
    """Four grid-L2 error components at the final time.

    delta_low: coefficient-space gap between the reduced run and the
        leading block of the truth.
    delta_closure_mass: size of the appended closure output (physical
        space field of the tail modes alone).
    delta_truncated: field error of the zero-padded reduced state.
    delta_corrected: field error after post-processing.
    """

    delta_low: float
    delta_closure_mass: float
    delta_truncated: float
    delta_corrected: float


def decompose_errors(full_state, reduced_state, closure, grid):
    """Split the final-time error of a reduced run with a closure.

    full_state and reduced_state are coefficient vectors (truth and
    reduced run at the same final time); the closure supplies the
    appended tail.  Field norms use trapezoid quadrature on the grid.
    """
    full = np.asarray(full_state, dtype=float)
    red = np.asarray(reduced_state, dtype=float)
    if red.shape[0] != closure.n_low:
        raise ValueError("reduced state width does not match the closure")
    if full.shape[0] != closure.n_low + closure.n_high:
        raise ValueError("full state width does not match the closure")

    basis_full = basis_for_grid(grid, full.shape[0])
    tail = closure(red)

    delta_low = float(np.linalg.norm(full[: closure.n_low] - red))

    tail_only = np.concatenate([np.zeros(closure.n_low), tail])
    delta_mass = grid_l2_norm(reconstruct(SpectralState(basis_full, tail_only), grid), grid)

    u_full = reconstruct(SpectralState(basis_full, full), grid)
    padded = np.concatenate([red, np.zeros(closure.n_high)])
    u_trunc = reconstruct(SpectralState(basis_full, padded), grid)
    corrected = np.concatenate([red, tail])
    u_corr = reconstruct(SpectralState(basis_full, corrected), grid)

    return ErrorDecomposition(
        delta_low=delta_low,
        delta_closure_mass=float(delta_mass),
        delta_truncated=float(grid_l2_norm(u_full - u_trunc, grid)),
        delta_corrected=float(grid_l2_norm(u_full - u_corr, grid)),
    )


@dataclass(frozen=True)
class EnsembleResult:
    """Final-time percent errors across a seeded set of initial conditions."""

    labels: tuple
    samples: tuple = field(repr=False)
    bin_edges: np.ndarray = field(repr=False)
    counts: tuple = field(repr=False)
    failed: tuple = ()


def ensemble_histogram(configs, artifacts, ic_box, n_ic, seed, bins=20, final_time=None):
    """Run each pipeline over one shared set of seeded initial conditions.

    Returns per-config final percent errors binned on a common grid.
    Initial conditions are drawn uniformly in ic_box; a run that blows up
    is recorded under failed and skipped in the histogram.
    """
    # local import: the pipeline runner builds MetricsBundles from this module
    from .integrate import BlowUpError
    from .rom import run_pipeline

    if n_ic < 1:
        raise ValueError("n_ic must be positive")
    box = np.asarray(ic_box, dtype=float)
    rng = np.random.default_rng(seed)
    ics = box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random((n_ic, box.shape[0]))

    labels, samples, failures = [], [], []
    for cfg in configs:
        errs = []
        failed = 0
        for ic in ics:
            run_cfg = cfg.with_ic(ic) if final_time is None else cfg.with_ic(ic, final_time)
            try:
                result = run_pipeline(run_cfg, artifacts)
            except BlowUpError:
                failed += 1
                continue
            errs.append(result.corrected_metrics.mape_final)
        labels.append(cfg.label())
        samples.append(np.array(errs))
        failures.append(failed)

    finite = np.concatenate([s for s in samples if s.size] or [np.array([0.0])])
    hi = float(finite.max()) if finite.size else 1.0
    edges = np.linspace(0.0, max(hi, 1e-12), bins + 1)
    counts = tuple(np.histogram(s, bins=edges)[0] for s in samples)
    return EnsembleResult(
        labels=tuple(labels),
        samples=tuple(samples),
        bin_edges=edges,
        counts=counts,
        failed=tuple(failures),
    )
