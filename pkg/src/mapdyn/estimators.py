"""Weighted ensemble estimators and the CSV series container.

The raw estimator for an observable B with initial density |n><n| is the
ensemble mean of

    s_i = weight_i * A0_i * B_i(t),

where weight_i is the (signed) gamma-branch weight, A0_i = F * K_nn(x0, p0)
is the initial kernel weight of the trajectory, and B_i(t) the per-trajectory
estimate (for populations, the diagonal inverse-kernel entry).  Estimates are
quasi-probabilities: individual terms may be negative.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .phasespace import MappingState

__all__ = [
    "ObservableSpec",
    "EnsembleSeries",
    "EnsembleRecord",
    "initial_electronic_weight",
    "population_estimate",
    "reduce_ensemble",
    "scattering_channels",
    "scattering_channels_from_records",
    "combine_moments",
]


@dataclass
class ObservableSpec:
    kind: str  # populations | population_difference | total_population | scattering_channels
    states: tuple = ()
    basis: str = "diabatic"
    divide_R: float = 0.0

    def column_names(self, F: int) -> list[str]:
        if self.kind == "populations":
            return [f"pop{n}" for n in range(F)]
        if self.kind == "population_difference":
            n1, n0 = self.states
            return [f"D_{n1}_{n0}"]
        if self.kind == "total_population":
            return ["total"]
        if self.kind == "scattering_channels":
            return ["T1", "T2", "R1", "R2"]
        raise ValueError(f"unknown observable kind {self.kind!r}")

    def validate(self, F: int) -> None:
        if self.kind == "population_difference":
            if len(self.states) != 2:
                raise ValueError("population_difference needs two state indices")
            if not all(0 <= s < F for s in self.states):
                raise ValueError("state index out of range")
        elif self.kind not in (
            "populations",
            "total_population",
            "scattering_channels",
        ):
            raise ValueError(f"unknown observable kind {self.kind!r}")

    def evaluate(self, populations: np.ndarray) -> np.ndarray:
        """Map per-trajectory state populations (..., F) to observable columns."""
        if self.kind == "populations":
            return populations
        if self.kind == "population_difference":
            n1, n0 = self.states
            return (populations[..., n1] - populations[..., n0])[..., None]
        if self.kind == "total_population":
            return np.sum(populations, axis=-1, keepdims=True)
        raise ValueError(f"{self.kind} is not a time-series observable")


def initial_electronic_weight(state0: MappingState, init_state: int) -> float:
    """F * K_nn of the initial mapping point: the kernel weight of |n><n|."""
    F = state0.F
    n = init_state
    return F * (0.5 * (state0.x[n] ** 2 + state0.p[n] ** 2) - state0.gamma)


def population_estimate(state: MappingState, n: int) -> float:
    """Diagonal inverse-kernel entry (x_n^2 + p_n^2)/2 - gamma (may be negative)."""
    return 0.5 * (state.x[n] ** 2 + state.p[n] ** 2) - state.gamma


@dataclass
class EnsembleRecord:
    """Per-trajectory contribution to an ensemble estimate."""

    times: np.ndarray
    estimates: np.ndarray  # (n_times, n_obs)
    weight: float = 1.0
    init_weight: float = 1.0
    failed: bool = False


@dataclass
class EnsembleSeries:
    times: np.ndarray
    values: np.ndarray  # (n_obs, n_times)
    stderr: np.ndarray
    columns: list
    n_trajectories: int = 0
    n_failed: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0) and self.times.size > 1:
            raise ValueError("times must be strictly increasing")
        if np.any(self.stderr < 0):
            raise ValueError("stderr must be non-negative")

    def to_csv(self, path_or_buf) -> None:
        buf = io.StringIO()
        for key in sorted(self.metadata):
            buf.write(f"# {key} = {self.metadata[key]}\n")
        buf.write(f"# n_trajectories = {self.n_trajectories}\n")
        buf.write(f"# n_failed = {self.n_failed}\n")
        header = ["t"]
        for name in self.columns:
            header += [name, f"{name}_err"]
        buf.write(",".join(header) + "\n")
        for j, t in enumerate(self.times):
            row = [repr(float(t))]
            for k in range(len(self.columns)):
                row += [repr(float(self.values[k, j])), repr(float(self.stderr[k, j]))]
            buf.write(",".join(row) + "\n")
        text = buf.getvalue()
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w") as fh:
                fh.write(text)

    @classmethod
    def from_csv(cls, path) -> "EnsembleSeries":
        metadata = {}
        rows = []
        header = None
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    if "=" in line:
                        key, _, val = line[1:].partition("=")
                        metadata[key.strip()] = val.strip()
                    continue
                if header is None:
                    header = line.split(",")
                    continue
                rows.append([float(v) for v in line.split(",")])
        data = np.asarray(rows)
        columns = [c for c in header[1:] if not c.endswith("_err")]
        values = data[:, 1::2].T
        stderr = data[:, 2::2].T
        return cls(
            times=data[:, 0],
            values=values,
            stderr=stderr,
            columns=columns,
            n_trajectories=int(metadata.pop("n_trajectories", 0)),
            n_failed=int(metadata.pop("n_failed", 0)),
            metadata=metadata,
        )


def combine_moments(
    sum_s: np.ndarray, sum_s2: np.ndarray, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error of the mean from accumulated first/second moments."""
    if n < 1:
        raise ValueError("empty ensemble")
    mean = sum_s / n
    if n == 1:
        return mean, np.zeros_like(mean)
    var = np.maximum(sum_s2 - sum_s * sum_s / n, 0.0) / (n - 1)
    return mean, np.sqrt(var / n)


def reduce_ensemble(
    records: Sequence[EnsembleRecord],
    spec: ObservableSpec,
    metadata: Optional[dict] = None,
    columns: Optional[list] = None,
    normalize: bool = False,
    total_records: Optional[Sequence[EnsembleRecord]] = None,
) -> EnsembleSeries:
    """Fold per-trajectory records into a weighted-mean series with errors.

    Failed trajectories are excluded from both the numerator and the count.
    With normalize=True the series is divided by the instantaneous
    total-population estimate built from total_records.
    """
    live = [r for r in records if not r.failed]
    n_failed = len(records) - len(live)
    if not live:
        raise ValueError("empty ensemble: no surviving trajectories")
    times = live[0].times
    for r in live:
        if r.times.shape != times.shape or not np.allclose(r.times, times):
            raise ValueError("trajectory records do not share a time grid")
    n_obs = live[0].estimates.shape[1]
    sum_s = np.zeros((n_obs, times.shape[0]))
    sum_s2 = np.zeros_like(sum_s)
    for r in live:
        s = (r.weight * r.init_weight) * r.estimates.T
        sum_s += s
        sum_s2 += s * s
    values, stderr = combine_moments(sum_s, sum_s2, len(live))
    if normalize:
        if total_records is None:
            raise ValueError("normalize=True requires total_records")
        tot = reduce_ensemble(total_records, ObservableSpec("total_population"))
        values = values / tot.values
        stderr = stderr / np.abs(tot.values)
    meta = dict(metadata or {})
    meta.setdefault("observable", spec.kind)
    return EnsembleSeries(
        times=times,
        values=values,
        stderr=stderr,
        columns=columns or spec.column_names(n_obs),
        n_trajectories=len(live),
        n_failed=n_failed,
        metadata=meta,
    )


def scattering_channels(
    final_states: Sequence,
    model,
    basis: str = "diabatic",
    divide_R: float = 0.0,
    init_state: Optional[int] = None,
    warn_threshold: Optional[float] = None,
) -> tuple[np.ndarray, np.ndarray, int, int]:
    """Channel coefficients (T1, T2, R1, R2) from final trajectory states.

    final_states hold mapping electronic states (TrajectoryState); each
    trajectory contributes weight * initial-kernel-weight * population in the
    requested basis, binned by the sign of R_final - divide_R.  Returns
    (values, stderr, n, n_inside) where n_inside counts trajectories still
    within |R| <= warn_threshold (when given).
    """
    from .models import adiabatize

    if model.N != 1:
        raise ValueError("channel binning needs a 1-D nuclear model")
    n_state = model.init_state if init_state is None else init_state
    finals = []
    n_inside = 0
    for ts in final_states:
        es = ts.electronic
        g = es.x + 1j * es.p
        if basis == "adiabatic":
            ad = adiabatize(model.potential(ts.R), model.potential_gradient(ts.R))
            g = ad.U.T @ g
        pops = 0.5 * np.abs(g) ** 2 - es.gamma
        finals.append((float(ts.R[0]), pops, es.weight))
        if warn_threshold is not None and abs(float(ts.R[0])) <= warn_threshold:
            n_inside += 1
    values, stderr, n = scattering_channels_from_records(finals, divide_R)
    return values, stderr, n, n_inside


def scattering_channels_from_records(
    finals: Sequence[tuple[float, np.ndarray, float]],
    divide_R: float,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Channel coefficients (T1, T2, R1, R2) with errors from final states.

    finals: per-trajectory (R_final, weighted populations (F,), total_weight)
    where the populations are already in the requested basis. Returns
    (values, stderr, n).  Trajectory contributions are signed quasi-weights.
    """
    n = len(finals)
    if n == 0:
        raise ValueError("empty ensemble")
    F = finals[0][1].shape[0]
    if F != 2:
        raise ValueError("channel coefficients are defined for two-state models")
    sum_s = np.zeros(4)
    sum_s2 = np.zeros(4)
    for R_f, pops, w in finals:
        s = np.zeros(4)
        if R_f > divide_R:
            s[0:2] = w * pops
        else:
            s[2:4] = w * pops
        sum_s += s
        sum_s2 += s * s
    values, stderr = combine_moments(sum_s, sum_s2, n)
    return values, stderr, n
