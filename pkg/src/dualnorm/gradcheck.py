"""Finite-difference gradient checking.

The harness compares analytic gradients against central differences with a
configurable step (default 1e-5). Run it in float64: switch the engine with
``ops.precision("float64")`` and build the layer under test in that mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_STEP = 1e-5


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """Elementwise |a - n| / max(|a|, |n|); elements where both magnitudes are
    below 1e-6 count the absolute difference instead (avoids 0/0 noise).
    A sign-flipped gradient scores ~2 under this metric."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.abs(a), np.abs(n))
    err = np.abs(a - n)
    small = denom < 1e-6
    out = np.where(small, err, err / np.where(small, 1.0, denom))
    return out


@dataclass
class GradCheckReport:
    op_name: str
    tolerance: float
    max_rel_error: float = 0.0
    n_checked: int = 0
    worst: tuple = ()  # (array name, flat index, analytic, numeric)
    per_array: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def summary(self) -> str:
        status = "pass" if self.passed else "FAIL"
        msg = (f"[{status}] {self.op_name}: max rel err {self.max_rel_error:.3e} "
               f"(tol {self.tolerance:.1e}, {self.n_checked} coords)")
        if not self.passed and self.worst:
            name, idx, a, n = self.worst
            msg += f"; worst at {name}[{idx}]: analytic {a:.6e} vs numeric {n:.6e}"
        return msg


def central_difference(loss_fn, arr: np.ndarray, flat_idx: int,
                       step: float = DEFAULT_STEP) -> float:
    flat = arr.reshape(-1)
    saved = flat[flat_idx]
    flat[flat_idx] = saved + step
    f_plus = float(loss_fn())
    flat[flat_idx] = saved - step
    f_minus = float(loss_fn())
    flat[flat_idx] = saved
    return (f_plus - f_minus) / (2.0 * step)


def check_gradients(op_name: str, loss_fn, arrays: dict, analytic: dict,
                    tolerance: float, step: float = DEFAULT_STEP,
                    max_coords_per_array: int | None = None,
                    rng: np.random.Generator | None = None) -> GradCheckReport:
    """Compare analytic gradients against central differences.

    ``loss_fn`` recomputes the scalar loss from the current contents of the
    ``arrays`` (which are perturbed in place and restored). ``analytic`` maps
    the same names to the gradients produced by the backward pass. When
    ``max_coords_per_array`` is set, a random coordinate subset is checked
    (used for whole-model checks where the full sweep would be too slow).
    """
    report = GradCheckReport(op_name=op_name, tolerance=tolerance)
    for name, arr in arrays.items():
        grad = np.asarray(analytic[name])
        n_elem = arr.size
        if max_coords_per_array is not None and n_elem > max_coords_per_array:
            if rng is None:
                rng = np.random.default_rng(0)
            coords = rng.choice(n_elem, size=max_coords_per_array, replace=False)
        else:
            coords = range(n_elem)
        worst_here = 0.0
        for idx in coords:
            numeric = central_difference(loss_fn, arr, int(idx), step)
            a = float(grad.reshape(-1)[int(idx)])
            err = float(relative_error(np.array(a), np.array(numeric)))
            report.n_checked += 1
            if err > worst_here:
                worst_here = err
            if err > report.max_rel_error:
                report.max_rel_error = err
                report.worst = (name, int(idx), a, numeric)
        report.per_array[name] = worst_here
    return report


def sample_away_from_kinks(rng: np.random.Generator, shape: tuple,
                           kinks=(0.0, 6.0), margin: float = 1e-3,
                           low: float = -1.0, high: float = 7.0,
                           dtype=np.float64) -> np.ndarray:
    """Uniform samples that keep a safety margin from the given kink points,
    so finite differences of piecewise-linear activations stay valid."""
    x = rng.uniform(low, high, size=shape)
    for k in kinks:
        close = np.abs(x - k) < margin
        while np.any(close):
            x[close] = rng.uniform(low, high, size=int(close.sum()))
            close = np.abs(x - k) < margin
    return x.astype(dtype)
