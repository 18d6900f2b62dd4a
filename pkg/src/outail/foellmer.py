"""Simulation of the drift process whose time-1 law is f d(gamma_n).

The process solves dX = dB + v(t, X) dt on [0, 1] from X_0 = 0, with drift
v(t, x) = grad log P_{1-t} f(x).  Alongside each path we track the value
process K_t = log P_{1-t} f(X_t), its Ito reconstruction from the stochastic
integral and drift energy, the first passage of K over log r, and the
perturbed endpoint / Girsanov weight obtained by stretching the drift by
(1 + delta) up to the passage time.

Discrete conventions (uniform grid, m steps):
  * Euler-Maruyama with left-endpoint (Ito) sums for all integrals;
  * the stopping index T is the first node whose K value strictly exceeds
    log r, else m; integrals "up to T" sum steps i < T, so they reconstruct
    K at node T and may overshoot log r by one step;
  * at the final node the bandwidth is 0 and K, v are evaluated exactly as
    log f(X_1), grad log f(X_1).

Per-path randomness comes from a counter-based stream keyed by (seed, path
index), so batches are reproducible under any chunk layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import ClosedFormUnavailableError, NonFiniteValueError
from .measures import DensityModel
from .quadrature import QuadratureRule
from .rng import path_normals
from .semigroup import S_MIN

DEFAULT_STEPS = 2048
DRIFT_QUAD_NODES = 24
MIN_STEPS = 100


@dataclass(frozen=True)
class PathConfig:
    """Simulation parameters for one family of paths."""

    dim: int = 1
    steps: int = DEFAULT_STEPS
    r: float = float(np.e)
    delta: float = 0.0
    beta: float = 0.0
    seed: int = 0
    drift_method: str = "closed_form"
    quad_nodes: int = DRIFT_QUAD_NODES
    # Spatial tabulation of the drift per time step (1-D only, 0 = off).
    # Tables make dense batches cheap; the final node is always exact.
    drift_grid_points: int = 0
    grid_halfwidth: float = 12.0

    def __post_init__(self):
        if self.steps < MIN_STEPS:
            raise ValueError(f"need at least {MIN_STEPS} time steps, got {self.steps}")
        if self.r <= 1.0:
            raise ValueError("threshold r must exceed 1")
        if self.delta < 0.0:
            raise ValueError("perturbation delta must be >= 0")
        if self.beta < 0.0:
            raise ValueError("convexity certificate beta must be >= 0")
        if self.drift_method not in ("closed_form", "quadrature"):
            raise ValueError(f"unknown drift method {self.drift_method!r}")


def default_drift_method(density: DensityModel) -> str:
    return "closed_form" if density.has_closed_heat else "quadrature"


class DriftField:
    """Evaluates (K, v)(s, x) = (log P_s f(x), grad log P_s f(x)).

    Closed forms are used when the family has them; otherwise Gauss-Hermite
    quadrature with the kernel-score gradient, switching to the exact
    s -> 0 limit (log f, grad log f) below the bandwidth floor.  With
    ``drift_grid_points`` > 0 (1-D), each bandwidth's field is tabulated on
    a fixed spatial grid and evaluated by linear interpolation; the table
    depends only on s, so results are independent of batch layout.
    """

    def __init__(self, density: DensityModel, cfg: PathConfig):
        if cfg.dim != density.dim:
            raise ValueError(f"config dim {cfg.dim} != density dim {density.dim}")
        if cfg.drift_method == "closed_form" and not density.has_closed_heat:
            raise ClosedFormUnavailableError(
                f"{density.name} has no closed heat transform; use quadrature"
            )
        self.density = density
        self.method = cfg.drift_method
        self.rule = (
            QuadratureRule.gauss_hermite(density.dim, cfg.quad_nodes)
            if cfg.drift_method == "quadrature"
            else None
        )
        self.grid = None
        if cfg.drift_grid_points > 0 and density.dim == 1:
            self.grid = np.linspace(
                -cfg.grid_halfwidth, cfg.grid_halfwidth, cfg.drift_grid_points
            )
            self._grid_lo = float(self.grid[0])
            self._grid_inv_h = (len(self.grid) - 1) / (self.grid[-1] - self.grid[0])
        self._tables: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def raw(self, s: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(K, v) without tabulation; x has shape (..., dim)."""
        d = self.density
        if s <= 0.0:
            return d.log_f(x), d.grad_log_f(x)
        if self.method == "closed_form":
            return d.closed_heat_log(s, x), d.closed_heat_grad_log(s, x)
        rule = self.rule
        sqrt_s = np.sqrt(s)
        pts = x[..., None, :] + sqrt_s * rule.nodes
        logs = rule.log_weights + d.log_f(pts)
        k = logsumexp(logs, axis=-1)
        if s >= S_MIN:
            peak = logs.max(axis=-1, keepdims=True)
            w = np.exp(logs - peak)
            den = w.sum(-1)
            num = np.einsum("...m,mn->...n", w, rule.nodes)
            v = num / (sqrt_s * den[..., None])
        else:
            v = d.grad_log_f(x)
        return k, v

    def _table(self, s: float) -> tuple[np.ndarray, np.ndarray]:
        tab = self._tables.get(s)
        if tab is None:
            k, v = self.raw(s, self.grid[:, None])
            tab = (k, v[:, 0])
            self._tables[s] = tab
        return tab

    def eval(self, s: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(K, v) at bandwidth s for points x of shape (..., dim)."""
        if self.grid is None or s <= 0.0:
            return self.raw(s, x)
        k_tab, v_tab = self._table(s)
        # uniform grid: fused linear interpolation, one index computation
        # for both tables; points beyond the grid clamp to the edge value
        pos = (x[..., 0] - self._grid_lo) * self._grid_inv_h
        pos = np.clip(pos, 0.0, len(self.grid) - 1.000001)
        idx = pos.astype(np.int64)
        frac = pos - idx
        k = k_tab[idx] * (1.0 - frac) + k_tab[idx + 1] * frac
        v = (v_tab[idx] * (1.0 - frac) + v_tab[idx + 1] * frac)[..., None]
        return k, v


@dataclass(frozen=True)
class Trajectory:
    """One simulated path with its drift, value process, and Ito sums.

    ``stoch_int[i]`` and ``energy[i]`` are the running left-endpoint sums
    over steps j < i, so index m holds the full-horizon integrals.
    """

    times: np.ndarray      # (m+1,)
    x: np.ndarray          # (m+1, n)
    db: np.ndarray         # (m, n)
    v: np.ndarray          # (m+1, n)
    k: np.ndarray          # (m+1,)
    stoch_int: np.ndarray  # (m+1,)
    energy: np.ndarray     # (m+1,)
    density: DensityModel
    config: PathConfig
    path_index: int = 0

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def k0(self) -> float:
        return float(self.k[0])

    def reconstruction_residual(self) -> np.ndarray:
        """K_i - K_0 - stoch_int_i - energy_i/2 along the grid."""
        return self.k - self.k[0] - self.stoch_int - 0.5 * self.energy

    def to_csv(self, path) -> None:
        """Dump the path as CSV with columns i, t, x*, v*, k."""
        n = self.x.shape[1]
        header = ["i", "t"] + [f"x{c}" for c in range(n)] + [f"v{c}" for c in range(n)] + ["k"]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(header) + "\n")
            for i in range(len(self.times)):
                row = [str(i), repr(float(self.times[i]))]
                row += [repr(float(val)) for val in self.x[i]]
                row += [repr(float(val)) for val in self.v[i]]
                row.append(repr(float(self.k[i])))
                fh.write(",".join(row) + "\n")


@dataclass(frozen=True)
class PerturbationRecord:
    """Stopped-integral summary of one path under a delta perturbation."""

    t_index: int
    x_delta_1: np.ndarray
    d_delta_1: float
    y: float
    z: float
    f_x1: float
    f_x_delta: float
    log_d_delta_1: float
    log_f_x1: float
    log_f_x_delta: float
    stoch_stopped: float
    energy_stopped: float
    vds_stopped: np.ndarray


@dataclass(frozen=True)
class StoppedSlice:
    """Per-path integrals frozen at the passage time of one threshold."""

    r: float
    t_index: np.ndarray   # (N,) int
    stoch: np.ndarray     # (N,) sum_{i<T} <v_i, dB_i>
    energy: np.ndarray    # (N,) sum_{i<T} |v_i|^2 dt
    vds: np.ndarray       # (N, n) sum_{i<T} v_i dt
    k_at_stop: np.ndarray  # (N,) K at node T

    def overshoot(self) -> np.ndarray:
        return np.maximum(0.0, self.k_at_stop - np.log(self.r))


@dataclass(frozen=True)
class BatchStats:
    """Endpoint and stopped-integral statistics for a batch of paths."""

    family: str
    dim: int
    n_paths: int
    steps: int
    seed: int
    drift_method: str
    k0: float
    x1: np.ndarray          # (N, n)
    v1: np.ndarray          # (N, n)
    k_final: np.ndarray     # (N,) = log f(X_1), exact evaluation
    stoch_full: np.ndarray  # (N,)
    energy_full: np.ndarray  # (N,)
    vds_full: np.ndarray    # (N, n)
    checkpoints: dict[float, np.ndarray] = field(default_factory=dict)
    checkpoint_indices: dict[float, int] = field(default_factory=dict)
    stopped: dict[float, StoppedSlice] = field(default_factory=dict)

    def fvt_residual(self) -> np.ndarray:
        """Endpoint reconstruction error of the exponential representation."""
        return self.k_final - self.k0 - self.stoch_full - 0.5 * self.energy_full

    def slice_for(self, r: float) -> StoppedSlice:
        if r not in self.stopped:
            raise KeyError(f"no stopped integrals for r={r}; simulated {sorted(self.stopped)}")
        return self.stopped[r]


def _chunk_size(n_paths: int, steps: int, dim: int) -> int:
    return int(min(n_paths, max(256, (1 << 25) // (steps * dim))))


def simulate_batch(
    density: DensityModel,
    cfg: PathConfig,
    n_paths: int,
    r_values: Optional[Sequence[float]] = None,
    checkpoint_times: Sequence[float] = (0.25, 0.5, 0.75),
    chunk_paths: Optional[int] = None,
) -> BatchStats:
    """Simulate ``n_paths`` trajectories and reduce them to BatchStats.

    Stopped integrals are frozen for every threshold in ``r_values``
    (default: just cfg.r), so one simulation serves all (r, delta) analyses.
    Results are bit-identical for any ``chunk_paths``.
    """
    if r_values is None:
        r_values = (cfg.r,)
    r_values = tuple(float(r) for r in r_values)
    if any(r <= 1.0 for r in r_values):
        raise ValueError("all thresholds must exceed 1")
    m, n = cfg.steps, cfg.dim
    drift = DriftField(density, cfg)
    log_rs = [float(np.log(r)) for r in r_values]
    cp_idx = {float(tc): int(round(tc * m)) for tc in checkpoint_times}
    if any(not 0 < i < m for i in cp_idx.values()):
        raise ValueError("checkpoint times must fall strictly inside (0, 1)")

    x1 = np.empty((n_paths, n))
    v1 = np.empty((n_paths, n))
    k_final = np.empty(n_paths)
    stoch_full = np.empty(n_paths)
    energy_full = np.empty(n_paths)
    vds_full = np.empty((n_paths, n))
    cps = {tc: np.empty((n_paths, n)) for tc in cp_idx}
    st = {
        r: dict(
            t_index=np.empty(n_paths, np.int64),
            stoch=np.empty(n_paths),
            energy=np.empty(n_paths),
            vds=np.empty((n_paths, n)),
            k_at_stop=np.empty(n_paths),
        )
        for r in r_values
    }

    chunk = chunk_paths or _chunk_size(n_paths, m, n)
    k0 = None
    for start in range(0, n_paths, chunk):
        stop = min(start + chunk, n_paths)
        out = _run_paths(density, cfg, drift, start, stop - start, log_rs, cp_idx)
        sl = slice(start, stop)
        x1[sl] = out["x1"]
        v1[sl] = out["v1"]
        k_final[sl] = out["k_final"]
        stoch_full[sl] = out["stoch"]
        energy_full[sl] = out["energy"]
        vds_full[sl] = out["vds"]
        for tc in cp_idx:
            cps[tc][sl] = out["checkpoints"][tc]
        for j, r in enumerate(r_values):
            st[r]["t_index"][sl] = out["t_index"][:, j]
            st[r]["stoch"][sl] = out["st_stoch"][:, j]
            st[r]["energy"][sl] = out["st_energy"][:, j]
            st[r]["vds"][sl] = out["st_vds"][:, j]
            st[r]["k_at_stop"][sl] = out["st_k"][:, j]
        k0 = out["k0"]

    stopped = {r: StoppedSlice(r=r, **st[r]) for r in r_values}
    return BatchStats(
        family=density.name,
        dim=n,
        n_paths=n_paths,
        steps=m,
        seed=cfg.seed,
        drift_method=cfg.drift_method,
        k0=k0,
        x1=x1,
        v1=v1,
        k_final=k_final,
        stoch_full=stoch_full,
        energy_full=energy_full,
        vds_full=vds_full,
        checkpoints=cps,
        checkpoint_indices=cp_idx,
        stopped=stopped,
    )


def _run_paths(density, cfg, drift, first_path, n_paths, log_rs, cp_idx, record_full=False):
    m, n = cfg.steps, cfg.dim
    dt = 1.0 / m
    sqdt = np.sqrt(dt)
    normals = path_normals(cfg.seed, first_path, n_paths, m, n)
    c = n_paths
    x = np.zeros((c, n))
    stoch = np.zeros(c)
    energy = np.zeros(c)
    vds = np.zeros((c, n))
    nr = len(log_rs)
    active = np.ones((c, nr), dtype=bool)
    t_index = np.full((c, nr), m, dtype=np.int64)
    st_stoch = np.zeros((c, nr))
    st_energy = np.zeros((c, nr))
    st_vds = np.zeros((c, nr, n))
    st_k = np.zeros((c, nr))
    cp_store = {tc: None for tc in cp_idx}
    idx_to_cp = {i: tc for tc, i in cp_idx.items()}
    if record_full:
        xs = np.zeros((m + 1, c, n))
        vs = np.zeros((m + 1, c, n))
        ks = np.zeros((m + 1, c))
        stochs = np.zeros((m + 1, c))
        energies = np.zeros((m + 1, c))
        dbs = np.zeros((m, c, n))
    k0 = None

    for i in range(m):
        s = 1.0 - i * dt
        k_i, v_i = drift.eval(s, x)
        k_i = np.asarray(k_i)
        if i == 0:
            k0 = float(k_i[0])
        for j in range(nr):
            newly = active[:, j] & (k_i > log_rs[j])
            if newly.any():
                t_index[newly, j] = i
                st_stoch[newly, j] = stoch[newly]
                st_energy[newly, j] = energy[newly]
                st_vds[newly, j, :] = vds[newly]
                st_k[newly, j] = k_i[newly]
                active[newly, j] = False
        if i in idx_to_cp:
            cp_store[idx_to_cp[i]] = v_i.copy()
        db = sqdt * normals[:, i, :]
        if record_full:
            xs[i] = x
            vs[i] = v_i
            ks[i] = k_i
            stochs[i] = stoch
            energies[i] = energy
            dbs[i] = db
        stoch = stoch + (v_i * db).sum(-1)
        energy = energy + (v_i * v_i).sum(-1) * dt
        vds = vds + v_i * dt
        x = x + db + v_i * dt
        if not np.isfinite(x).all():
            raise NonFiniteValueError(f"path state non-finite at step {i}")

    k_m = np.asarray(density.log_f(x))
    v_m = np.asarray(density.grad_log_f(x))
    for j in range(nr):
        rows = active[:, j]
        if rows.any():
            st_stoch[rows, j] = stoch[rows]
            st_energy[rows, j] = energy[rows]
            st_vds[rows, j, :] = vds[rows]
            st_k[rows, j] = k_m[rows]
    out = dict(
        k0=k0,
        x1=x,
        v1=v_m,
        k_final=k_m,
        stoch=stoch,
        energy=energy,
        vds=vds,
        checkpoints=cp_store,
        t_index=t_index,
        st_stoch=st_stoch,
        st_energy=st_energy,
        st_vds=st_vds,
        st_k=st_k,
    )
    if record_full:
        xs[m] = x
        vs[m] = v_m
        ks[m] = k_m
        stochs[m] = stoch
        energies[m] = energy
        out["series"] = (xs, dbs, vs, ks, stochs, energies)
    return out


def simulate_path(density: DensityModel, cfg: PathConfig, path_index: int = 0) -> Trajectory:
    """Simulate one path with full per-node recording.

    Path ``path_index`` of a batch with the same config is bit-identical to
    this trajectory (shared random stream and arithmetic).
    """
    drift = DriftField(density, cfg)
    out = _run_paths(density, cfg, drift, path_index, 1, [np.log(cfg.r)], {}, record_full=True)
    xs, dbs, vs, ks, stochs, energies = out["series"]
    m = cfg.steps
    return Trajectory(
        times=np.arange(m + 1) / m,
        x=xs[:, 0, :],
        db=dbs[:, 0, :],
        v=vs[:, 0, :],
        k=ks[:, 0],
        stoch_int=stochs[:, 0],
        energy=energies[:, 0],
        density=density,
        config=cfg,
        path_index=path_index,
    )


def stopping_index(traj: Trajectory, r: float) -> int:
    """First grid index whose K value strictly exceeds log r, else m."""
    if r <= 1.0:
        raise ValueError("threshold r must exceed 1")
    above = traj.k > np.log(r)
    if above.any():
        return int(np.argmax(above))
    return traj.steps


def perturb(traj: Trajectory, cfg: PathConfig) -> PerturbationRecord:
    """Endpoint perturbation, Girsanov weight, and the deviation variables.

    With T the passage index for cfg.r and delta = cfg.delta:

      X_1^d  = X_1 + delta * sum_{i<T} v_i dt
      D_1^d  = exp(-S_1 - delta S_T - E_1/2 - (delta + delta^2/2) E_T)
      Z      = -delta S_T + delta(<v_1, I_T> - E_T) - (beta+1)/2 delta^2 E_T
      Y      = -2 delta S_T + delta(<v_1, I_T> - E_T) - beta/2 delta^2 E_T

    where S, E, I are the stochastic integral, drift energy, and drift
    integral, subscripted by their upper limit.  The algebraic identity
    Y = Z - delta S_T + (delta^2/2) E_T holds exactly in the discretization.
    """
    delta, beta = cfg.delta, cfg.beta
    t_idx = stopping_index(traj, cfg.r)
    dt = 1.0 / traj.steps
    stoch_t = float(traj.stoch_int[t_idx])
    energy_t = float(traj.energy[t_idx])
    vds_t = traj.v[:t_idx].sum(axis=0) * dt
    x_delta = traj.x[-1] + delta * vds_t
    log_f_x1 = float(traj.k[-1])
    log_f_xd = float(np.squeeze(traj.density.log_f(x_delta)))
    stoch_1 = float(traj.stoch_int[-1])
    energy_1 = float(traj.energy[-1])
    log_d = -(stoch_1 + delta * stoch_t) - 0.5 * energy_1 - (delta + 0.5 * delta**2) * energy_t
    vdot = float(traj.v[-1] @ vds_t)
    z = -delta * stoch_t + delta * (vdot - energy_t) - 0.5 * (beta + 1.0) * delta**2 * energy_t
    y = -2.0 * delta * stoch_t + delta * (vdot - energy_t) - 0.5 * beta * delta**2 * energy_t
    return PerturbationRecord(
        t_index=t_idx,
        x_delta_1=x_delta,
        d_delta_1=float(np.exp(log_d)),
        y=y,
        z=z,
        f_x1=float(np.exp(log_f_x1)),
        f_x_delta=float(np.exp(log_f_xd)),
        log_d_delta_1=log_d,
        log_f_x1=log_f_x1,
        log_f_x_delta=log_f_xd,
        stoch_stopped=stoch_t,
        energy_stopped=energy_t,
        vds_stopped=vds_t,
    )


def pathwise_convexity_check(rec: PerturbationRecord, traj: Trajectory, cfg: PathConfig) -> float:
    """Margin of the first-order expansion bound at the perturbed endpoint.

    Returns log f(X_1^d) - [log f(X_1) + delta <v_1, I_T> - beta/2 delta^2 E_T],
    which is >= 0 whenever cfg.beta genuinely certifies the log-density
    (the evaluation uses exact function values, so no discretization enters).
    """
    vdot = float(traj.v[-1] @ rec.vds_stopped)
    lower = rec.log_f_x1 + cfg.delta * vdot - 0.5 * cfg.beta * cfg.delta**2 * rec.energy_stopped
    return rec.log_f_x_delta - lower


# -- batch-level perturbation arrays ---------------------------------------


def perturbation_arrays(
    stats: BatchStats, density: DensityModel, r: float, delta: float, beta: float
) -> dict[str, np.ndarray]:
    """Vectorized perturbation quantities for every path in a batch.

    Keys: x_delta (N, n), log_f_xd (N,), log_d (N,), z (N,), y (N,),
    convexity_margin (N,), product_excess (N,) = log(f(X^d) D^d) - Z.
    """
    sl = stats.slice_for(r)
    vdot = (stats.v1 * sl.vds).sum(-1)
    x_delta = stats.x1 + delta * sl.vds
    log_f_xd = np.asarray(density.log_f(x_delta))
    log_d = (
        -(stats.stoch_full + delta * sl.stoch)
        - 0.5 * stats.energy_full
        - (delta + 0.5 * delta**2) * sl.energy
    )
    z = -delta * sl.stoch + delta * (vdot - sl.energy) - 0.5 * (beta + 1.0) * delta**2 * sl.energy
    y = -2.0 * delta * sl.stoch + delta * (vdot - sl.energy) - 0.5 * beta * delta**2 * sl.energy
    convexity = log_f_xd - (stats.k_final + delta * vdot - 0.5 * beta * delta**2 * sl.energy)
    product_excess = log_f_xd + log_d - z
    return dict(
        x_delta=x_delta,
        log_f_xd=log_f_xd,
        log_d=log_d,
        z=z,
        y=y,
        convexity_margin=convexity,
        product_excess=product_excess,
        vdot=vdot,
    )


def has_constant_drift(density: DensityModel) -> bool:
    """True when the drift field is state-independent (log-linear family)."""
    from .measures import TiltDensity

    return isinstance(density, TiltDensity)


def pipeline_config(
    density: DensityModel,
    steps: int = DEFAULT_STEPS,
    seed: int = 0,
    r: float = float(np.e),
    delta: float = 0.0,
    beta: Optional[float] = None,
    drift_grid_points: int = 2048,
) -> PathConfig:
    """PathConfig with sensible per-family defaults.

    Uses the closed drift when the family has one and enables spatial
    tabulation for 1-D fields with state-dependent drift.
    """
    method = default_drift_method(density)
    grid = 0
    if density.dim == 1 and not has_constant_drift(density):
        grid = drift_grid_points
    return PathConfig(
        dim=density.dim,
        steps=steps,
        r=r,
        delta=delta,
        beta=density.beta if beta is None else beta,
        seed=seed,
        drift_method=method,
        drift_grid_points=grid,
    )
