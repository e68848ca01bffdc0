"""Reference points: the textbook phase-estimation baseline (modeled at the
outcome-distribution level, which is all the comparison depends on) and
order-of-magnitude cost rows for the competing methods."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hamiltonian import SpectralMeasure, StateVector


class BaselineError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class QpeOutcomeDistribution:
    """Measurement law of T-step phase estimation on the rescaled spectrum."""

    n_steps: int
    grid: np.ndarray = field(repr=False)
    probabilities: np.ndarray = field(repr=False)
    tau: float = 1.0


def _dirichlet_kernel_sq(theta: np.ndarray, n_steps: int) -> np.ndarray:
    """|(1/T) sum_t e^{i t theta}|^2 with the removable singularity filled."""
    half = theta / 2.0
    s = np.sin(half)
    near_zero = np.isclose(np.mod(theta, 2.0 * math.pi), 0.0, atol=1e-12) | np.isclose(
        np.mod(theta, 2.0 * math.pi), 2.0 * math.pi, atol=1e-12
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = (np.sin(n_steps * half) / (n_steps * s)) ** 2
    return np.where(near_zero, 1.0, vals)


def qpe_distribution(measure: SpectralMeasure, n_steps: int, tau: float = 1.0) -> QpeOutcomeDistribution:
    """Outcome probabilities over the T phase grid points -pi + 2pi*m/T."""
    if n_steps < 2:
        raise BaselineError(f"need at least 2 steps, got {n_steps}")
    grid = -math.pi + 2.0 * math.pi * np.arange(n_steps) / n_steps
    theta = grid[:, None] - measure.positions[None, :]
    kernel = _dirichlet_kernel_sq(theta, n_steps)
    probs = kernel @ measure.weights
    total = probs.sum()
    if abs(total - 1.0) > 1e-10:
        raise BaselineError(f"outcome law sums to {total!r}")
    return QpeOutcomeDistribution(n_steps, grid, probs, tau)


def qpe_min_estimate(dist: QpeOutcomeDistribution, repeats: int, rng: np.random.Generator) -> float:
    """Minimum of `repeats` energy readouts, in original energy units."""
    draws = rng.choice(dist.grid.shape[0], size=repeats, p=dist.probabilities)
    return float(np.min(dist.grid[draws]) / dist.tau)


def tune_overlap(state: StateVector, ground_vector: np.ndarray, p0: float) -> StateVector:
    """Mix a reference state with the exact ground state so the ground-state
    overlap becomes exactly p0 (our construction for overlap sweeps)."""
    if not 0.0 < p0 < 1.0:
        raise BaselineError(f"p0 must lie in (0, 1), got {p0}")
    ground = ground_vector / np.linalg.norm(ground_vector)
    c0 = np.vdot(ground, state.amplitudes)
    perp = state.amplitudes - c0 * ground
    perp_norm = np.linalg.norm(perp)
    if perp_norm < 1e-12:
        raise BaselineError("state is (numerically) the ground state; cannot lower its overlap")
    mixed = math.sqrt(p0) * ground + math.sqrt(1.0 - p0) * perp / perp_norm
    return StateVector(mixed)


# ---------------------------------------------------------------------------
# Cost model rows.  Pure power laws with unit constants; poly-logarithmic
# factors are dropped, and nothing here is a certified bound.
# ---------------------------------------------------------------------------

COST_METHODS = ("this-work", "qpe-semiclassical", "qeea", "this-work-trotter", "qpe-trotter")


@dataclass(frozen=True)
class CostReport:
    method: str
    max_evolution_time: float
    repetitions: float
    total_evolution_time: float
    circuit_depth: float | None = None
    total_runtime: float | None = None
    certified: bool = False

    def key_values(self) -> dict:
        out = {
            "method": self.method,
            "max_evolution_time": self.max_evolution_time,
            "repetitions": self.repetitions,
            "total_evolution_time": self.total_evolution_time,
            "certified": self.certified,
        }
        if self.circuit_depth is not None:
            out["circuit_depth"] = self.circuit_depth
        if self.total_runtime is not None:
            out["total_runtime"] = self.total_runtime
        return out

    def format_block(self) -> str:
        return "\n".join(
            f"{k}={v if isinstance(v, str) else v!r}" for k, v in self.key_values().items()
        ) + "\n"


def cost_model(method: str, epsilon: float, eta: float, tau: float, extras: dict | None = None) -> CostReport:
    """Evaluate one method's scaling row at a concrete (epsilon, eta, tau).

    Trotter variants additionally report circuit depth and total runtime and
    require extras = {"order": p, "c_trotter": C}.
    """
    if min(epsilon, eta, tau) <= 0:
        raise BaselineError("epsilon, eta, tau must be positive")
    extras = extras or {}
    if method == "this-work":
        max_time = 1.0 / epsilon
        reps = 1.0 / eta**2
        return CostReport(method, max_time, reps, max_time * reps)
    if method == "qpe-semiclassical":
        max_time = 1.0 / (epsilon * eta)
        reps = 1.0 / eta
        return CostReport(method, max_time, reps, max_time * reps)
    if method == "qeea":
        max_time = 1.0 / epsilon
        reps = 1.0 / (epsilon**3 * eta**2)
        return CostReport(method, max_time, reps, max_time * reps)
    if method in ("this-work-trotter", "qpe-trotter"):
        try:
            p = float(extras["order"])
            c = float(extras["c_trotter"])
        except KeyError as missing:
            raise BaselineError(f"{method} needs extras[{missing.args[0]!r}]") from None
        if method == "this-work-trotter":
            base = cost_model("this-work", epsilon, eta, tau)
            depth = max(1.0 / (tau * epsilon), epsilon ** (-1.0 - 1.0 / p) * eta ** (-1.0 / p) * c ** (1.0 / p))
            runtime = max(
                1.0 / (tau * epsilon * eta**2),
                epsilon ** (-1.0 - 1.0 / p) * eta ** (-2.0 - 1.0 / p) * c ** (1.0 / p),
            )
        else:
            base = cost_model("qpe-semiclassical", epsilon, eta, tau)
            depth = max(
                1.0 / (tau * epsilon * eta),
                epsilon ** (-1.0 - 1.0 / p) * eta ** (-1.0 - 2.0 / p) * c ** (1.0 / p),
            )
            runtime = max(
                1.0 / (tau * epsilon * eta**2),
                epsilon ** (-1.0 - 1.0 / p) * eta ** (-2.0 - 2.0 / p) * c ** (1.0 / p),
            )
        return CostReport(
            method,
            base.max_evolution_time,
            base.repetitions,
            base.total_evolution_time,
            circuit_depth=depth,
            total_runtime=runtime,
        )
    raise BaselineError(f"unknown method {method!r}; expected one of {COST_METHODS}")
