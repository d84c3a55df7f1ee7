"""Numerical certification of protocol gains and accuracy constants.

Every constant the convergence analysis defines is realized here as a
constrained optimization over the homogeneous sphere or a level set of the
Lyapunov function:

  * k1 lower bound      1 / sqrt(lambda_G)
  * k0 lower bound      sup Pi / Gamma over ||x||_r = 1, Gamma > 0
  * margin c            inf (kt0 Gamma - Pi) over ||x||_r = 1    (must be > 0)
  * v_lower             inf ||x||_r^2 over V = 1
  * c_psi               sup of the triggering perturbation functional over V = 1
  * sigma_max           min{1/4, (1/2)(1 + (c v_lower / c_psi)^2)^-1}
  * settling bound      T <= 3 V(0)^(1/3) / (c v_lower)
  * c0, c1              level-set accuracy constants for the state-dependent
                        trigger (bisection over theta)

All sup/inf problems exploit that the objectives are ratios of r-homogeneous
functions and hence dilation invariant: they are optimized over free
directions with multi-start Nelder-Mead refinement, and every reported value
carries a witness point that reproduces it on re-evaluation. Best-found
values, not certified global optima.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .core import (ConjugateError, StInstance, graph_instance,
                   homogeneous_norm, homogeneous_weights, signed_power)
from .graph import Graph, algebraic_connectivity


class CertificationError(RuntimeError):
    """Gains do not certify, or an optimization failed to produce a value."""


@dataclass(frozen=True)
class GainSet:
    """Protocol parameters. kt0/kt1 are the normalized gains of the
    L-independent form of the error dynamics."""

    k0: float
    k1: float
    gamma: float
    l: float
    beta: float = 7.0

    def __post_init__(self):
        if self.k0 <= 0 or self.k1 <= 0:
            raise ValueError("k0 and k1 must be positive")
        if self.gamma < 0 or self.l < 0:
            raise ValueError("gamma and l must be nonnegative")
        if self.beta < 7.0:
            raise ValueError("beta must be >= 7")

    @property
    def kt0(self) -> float:
        return self.k0

    @property
    def kt1(self) -> float:
        return self.k1 / self.k0

    def require_feasible_for(self, g: Graph):
        lo = k1_lower_bound(g)
        if self.k1 <= lo:
            raise CertificationError(f"k1 = {self.k1} <= 1/sqrt(lambda_G) = {lo:.6g}")

    def to_dict(self) -> dict:
        return {"k0": self.k0, "k1": self.k1, "gamma": self.gamma,
                "l": self.l, "beta": self.beta}

    @staticmethod
    def from_dict(d: dict) -> "GainSet":
        return GainSet(float(d["k0"]), float(d["k1"]), float(d["gamma"]),
                       float(d["l"]), float(d.get("beta", 7.0)))


@dataclass
class OptimizerSettings:
    seed: int = 0
    n_starts: int = 32
    n_presamples: int = 512
    maxfev: int = 400
    gamma_floor: float = 1e-6
    conj_tol: float = 1e-6
    n_boundary: int = 256
    n_eps: int = 64
    bisect_iters: int = 40


@dataclass
class Witness:
    """Optimizer output: value plus the point achieving it."""

    value: float
    x0: np.ndarray
    x1: np.ndarray

    def to_dict(self) -> dict:
        return {"value": self.value, "x0": list(self.x0), "x1": list(self.x1)}


@dataclass
class AccuracyConstants:
    c0: float
    c1: float
    theta: float
    sup_x0_ratio: float
    sup_x1_ratio: float


@dataclass
class CertifiedConstants:
    k0_lower: float
    k1_lower: float
    c: float
    v_lower: float
    c_psi: float
    sigma_max: float
    c0: float
    c1: float
    settling_scale: float          # 3 / (c * v_lower)
    theta: float
    witnesses: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in
             ("k0_lower", "k1_lower", "c", "v_lower", "c_psi", "sigma_max",
              "c0", "c1", "settling_scale", "theta")}
        d["witnesses"] = {k: w.to_dict() for k, w in self.witnesses.items()}
        return d


def _as_instance(g) -> StInstance:
    return g if isinstance(g, StInstance) else graph_instance(g)


# --------------------------------------------------------------------------
# direction optimization machinery
# --------------------------------------------------------------------------

def _split(inst: StInstance, y: np.ndarray):
    k = inst.dim
    return inst.Q @ y[:k], inst.Q @ y[k:]


def _r_scale(x0, x1):
    """Homogeneous norm of the stacked state (degree-1 under the dilation)."""
    return float(np.sum(np.sqrt(np.abs(x0))) + np.sum(np.abs(x1)))


def _direction_optimize(inst: StInstance, objective, opts: OptimizerSettings,
                        maximize: bool, extra_starts=()) -> Witness:
    """Multi-start Nelder-Mead over free directions of a dilation-invariant
    objective. objective(x0, x1) -> float or nan (infeasible)."""
    rng = np.random.default_rng(opts.seed)
    dim = 2 * inst.dim
    sign = -1.0 if maximize else 1.0

    def h(y):
        ny = np.linalg.norm(y)
        if ny < 1e-10:
            return np.inf
        x0, x1 = _split(inst, y / ny)
        try:
            val = objective(x0, x1)
        except ConjugateError:
            return np.inf
        if not np.isfinite(val):
            return np.inf
        return sign * val

    # half the presamples shrink the x0 block over several orders of
    # magnitude: the ratio objectives attain their extrema in the limit of
    # vanishing x0 (the sign-term kink), which isotropic sampling misses
    samples = rng.standard_normal((opts.n_presamples, dim))
    half = opts.n_presamples // 2
    scales = 10.0 ** rng.uniform(-8.0, 0.0, half)
    samples[:half, : inst.dim] *= scales[:, None]
    vals = np.array([h(y) for y in samples])
    order = np.argsort(vals)
    starts = [samples[i] for i in order[: opts.n_starts]]
    for y in extra_starts:
        starts.append(np.asarray(y, float))

    best_y, best_v = None, np.inf
    for y0 in starts:
        if not np.isfinite(h(y0)):
            continue
        res = minimize(h, y0, method="Nelder-Mead",
                       options={"maxfev": opts.maxfev, "xatol": 1e-8, "fatol": 1e-10})
        if res.fun < best_v:
            best_v, best_y = float(res.fun), res.x
    if best_y is None:
        raise CertificationError("all optimizer starts were infeasible")
    x0, x1 = _split(inst, best_y / np.linalg.norm(best_y))
    return Witness(sign * best_v, x0, x1)


def _pi_value(inst: StInstance, x0, x1, gains: GainSet, tol: float) -> float:
    return inst.pi_fn(x0, x1, gains.k0, gains.k1, gains.beta, tol)


# --------------------------------------------------------------------------
# individual constants
# --------------------------------------------------------------------------

def k1_lower_bound(g) -> float:
    """1 / c_S with c_S = sqrt(lambda_G) for the graph instance."""
    inst = _as_instance(g)
    return 1.0 / inst.c_s


def k0_lower_bound(g, k1: float, beta: float = 7.0,
                   opts: OptimizerSettings | None = None) -> Witness:
    """sup of Pi/Gamma over the homogeneous sphere with Gamma bounded away
    from zero (the ratio tends to -inf at Gamma -> 0 since Pi < 0 there)."""
    inst = _as_instance(g)
    opts = opts or OptimizerSettings()
    if k1 <= 1.0 / inst.c_s:
        raise CertificationError(f"k1 = {k1} must exceed 1/c_S = {1.0 / inst.c_s:.6g}")
    gains = GainSet(1.0, k1, 0.0, 1.0, beta)   # kt1 = k1/k0 with k0 = 1

    def objective(x0, x1):
        lam = _r_scale(x0, x1)
        gam = inst.gamma_fn(x0, x1)
        if gam / lam ** 2 < opts.gamma_floor:
            return np.nan
        return _pi_value(inst, x0, x1, gains, opts.conj_tol) / gam

    return _direction_optimize(inst, objective, opts, maximize=True)


def margin_c(g, gains: GainSet, opts: OptimizerSettings | None = None) -> Witness:
    """c = inf over the homogeneous sphere of kt0*Gamma - Pi. Positive iff
    the gains certify finite-time convergence; nonpositive raises."""
    inst = _as_instance(g)
    opts = opts or OptimizerSettings()

    def objective(x0, x1):
        lam = _r_scale(x0, x1)
        val = gains.kt0 * inst.gamma_fn(x0, x1) - _pi_value(inst, x0, x1, gains, opts.conj_tol)
        return val / lam ** 2

    w = _direction_optimize(inst, objective, opts, maximize=False)
    if w.value <= 0:
        raise CertificationError(
            f"gains do not certify: inf(kt0*Gamma - Pi) = {w.value:.6g} <= 0")
    return w


def _lyapunov_value(inst: StInstance, x0, x1, beta: float, tol: float) -> float:
    return (inst.potential(x0) + (1.0 + beta) * inst.conjugate(x1, tol)
            - float(np.dot(x0, x1)))


def v_lower(g, beta: float = 7.0, opts: OptimizerSettings | None = None) -> Witness:
    """inf of ||x||_r^2 over the level set V = 1 (computed as the dilation
    invariant ratio ||x||_r^2 / V^(2/3) over directions)."""
    inst = _as_instance(g)
    opts = opts or OptimizerSettings()

    def objective(x0, x1):
        v = _lyapunov_value(inst, x0, x1, beta, opts.conj_tol)
        if v <= 1e-14:
            return np.nan
        return _r_scale(x0, x1) ** 2 / v ** (2.0 / 3.0)

    w = _direction_optimize(inst, objective, opts, maximize=False)
    if w.value <= 0:
        raise CertificationError("v_lower came out nonpositive")
    return w


def c_psi(g, gains: GainSet, opts: OptimizerSettings | None = None) -> Witness:
    """sup over V = 1 of the perturbation functional
    kt0 |E|^(1/4) ||D||_2 ||grad U(x0) - x1|| sqrt(||D.T x0||)."""
    inst = _as_instance(g)
    opts = opts or OptimizerSettings()
    pref = gains.kt0 * inst.n_edges ** 0.25 * inst.D_norm2

    def objective(x0, x1):
        v = _lyapunov_value(inst, x0, x1, gains.beta, opts.conj_tol)
        if v <= 1e-14:
            return np.nan
        num = (pref * np.linalg.norm(inst.potential_gradient(x0) - x1)
               * math.sqrt(np.linalg.norm(inst.D.T @ x0)))
        return num / v ** (2.0 / 3.0)

    return _direction_optimize(inst, objective, opts, maximize=True)


def sigma_max(c: float, v_lower_val: float, c_psi_val: float) -> float:
    """Largest admissible state-dependent trigger slope retaining a certified
    Lyapunov decrement."""
    if c <= 0 or v_lower_val <= 0:
        raise ValueError("c and v_lower must be positive")
    if c_psi_val < 0:
        raise ValueError("c_psi must be >= 0")
    if c_psi_val == 0.0:
        return 0.25
    ratio = (c * v_lower_val / c_psi_val) ** 2
    return min(0.25, 0.5 / (1.0 + ratio))


def settling_bound(v0: float, c: float, v_lower_val: float) -> float:
    """Upper bound on the time for V to reach zero, obtained by integrating
    dV/dt <= -c * v_lower * V^(2/3)."""
    if v0 < 0 or c <= 0 or v_lower_val <= 0:
        raise ValueError("settling bound needs v0 >= 0 and positive c, v_lower")
    return 3.0 * v0 ** (1.0 / 3.0) / (c * v_lower_val)


# --------------------------------------------------------------------------
# level-set accuracy constants
# --------------------------------------------------------------------------

def _boundary_samples(inst: StInstance, beta: float, opts: OptimizerSettings):
    """Random states normalized onto V = 1, with conjugate data cached so the
    bisection can rescale them to any level analytically."""
    rng = np.random.default_rng(opts.seed + 1)
    out = []
    attempts = 0
    while len(out) < opts.n_boundary and attempts < 20 * opts.n_boundary:
        attempts += 1
        y = rng.standard_normal(2 * inst.dim)
        x0, x1 = _split(inst, y / np.linalg.norm(y))
        try:
            ustar, arg = inst._conjugate_solve(x1, opts.conj_tol)
        except Exception:
            continue
        v = inst.potential(x0) + (1.0 + beta) * ustar - float(np.dot(x0, x1))
        if v <= 1e-12:
            continue
        lam = v ** (-1.0 / 3.0)
        # dilation identities: U*(lam x1) = lam^3 U*, grad U*(lam x1) = lam^2 grad U*
        out.append((lam ** 2 * x0, lam * x1, lam ** 2 * arg))
    if len(out) < opts.n_boundary // 2:
        raise CertificationError("could not sample the V = 1 boundary")
    return out


def _eps_samples(n_edges: int, delta: float, n_eps: int, seed: int) -> np.ndarray:
    """Corners of the [0, 2*delta]^E box (all of them when they fit in the
    budget), topped up with random interior points."""
    rng = np.random.default_rng(seed)
    corners = []
    if 2 ** n_edges <= n_eps:
        for m in range(2 ** n_edges):
            corners.append([2.0 * delta * ((m >> b) & 1) for b in range(n_edges)])
    else:
        for _ in range(n_eps // 2):
            corners.append(list(2.0 * delta * rng.integers(0, 2, n_edges)))
    eps = np.array(corners, dtype=float)
    n_fill = n_eps - len(eps)
    if n_fill > 0:
        eps = np.vstack([eps, rng.uniform(0.0, 2.0 * delta, (n_fill, n_edges))])
    return eps


def _max_vdot_on_level(inst: StInstance, samples, eps: np.ndarray,
                       gains: GainSet, theta: float) -> float:
    """Worst-case Lyapunov derivative of the trigger-perturbed dynamics over
    the scaled boundary samples; the disturbance supremum is taken in closed
    form as (kt1/k1)*||w||."""
    mu = theta ** (1.0 / 3.0)
    kt0, kt1, k1 = gains.kt0, gains.kt1, gains.k1
    gam, beta = gains.gamma, gains.beta
    worst = -np.inf
    for x0h, x1h, gradh in samples:
        x0 = mu ** 2 * x0h
        x1 = mu * x1h
        grad_ustar = mu ** 2 * gradh
        a = inst.potential_gradient(x0) - x1
        w = (1.0 + beta) * grad_ustar - x0
        arg = (inst.D.T @ x0)[None, :] + eps            # (K, E)
        geps = signed_power(arg, 0.5) @ inst.D.T        # (K, N)
        seps = np.sign(arg) @ inst.D.T
        xdot0 = -gam * x0[None, :] - kt0 * (geps - x1[None, :])
        vdot = (xdot0 @ a
                + seps @ (-kt1 * w)
                + (-gam * float(w @ x1) + (kt1 / k1) * np.linalg.norm(w)))
        m = float(np.max(vdot))
        if m > worst:
            worst = m
    return worst


def accuracy_constants(g, gains: GainSet, opts: OptimizerSettings | None = None,
                       delta: float = 1.0) -> AccuracyConstants:
    """Level-set accuracy constants of the state-dependent trigger.

    Bisects for the smallest theta such that the perturbed Lyapunov
    derivative is negative everywhere on the boundary of {V <= theta}, with
    per-edge perturbations in [0, 2*delta] (delta normalized to 1, slope
    sigma = 0). c0/c1 are then suprema of ||x0||/||x1|| over the level set,
    rescaled to broadcast-output units:

        limsup |shat0_i - shat0_j| <= c0 * delta_trigger
        limsup |shat1 error|       <= c1 * sqrt(delta_trigger)

    which absorbs the k0*sqrt(L) factor of the e1 -> x1 normalization into c1.
    """
    inst = _as_instance(g)
    opts = opts or OptimizerSettings()
    if delta == 0.0:
        return AccuracyConstants(0.0, 0.0, 0.0, 0.0, 0.0)

    samples = _boundary_samples(inst, gains.beta, opts)
    eps = _eps_samples(inst.n_edges, delta, opts.n_eps, opts.seed + 2)

    lo, hi = 1e-4, 1e4
    f_hi = _max_vdot_on_level(inst, samples, eps, gains, hi)
    if f_hi >= 0:
        raise CertificationError(
            f"level-set bisection cannot bracket: max Vdot = {f_hi:.3g} at theta = {hi}")
    if _max_vdot_on_level(inst, samples, eps, gains, lo) < 0:
        theta = 0.0
    else:
        for _ in range(opts.bisect_iters):
            mid = math.sqrt(lo * hi)
            if _max_vdot_on_level(inst, samples, eps, gains, mid) < 0:
                hi = mid
            else:
                lo = mid
        theta = hi

    # suprema of ||x0||, ||x1|| over V = 1 (dilation-invariant ratios)
    def obj0(x0, x1):
        v = _lyapunov_value(inst, x0, x1, gains.beta, opts.conj_tol)
        if v <= 1e-14:
            return np.nan
        return np.linalg.norm(x0) / v ** (2.0 / 3.0)

    def obj1(x0, x1):
        v = _lyapunov_value(inst, x0, x1, gains.beta, opts.conj_tol)
        if v <= 1e-14:
            return np.nan
        return np.linalg.norm(x1) / v ** (1.0 / 3.0)

    s0 = _direction_optimize(inst, obj0, opts, maximize=True).value
    s1 = _direction_optimize(inst, obj1, opts, maximize=True).value
    if theta == 0.0:
        return AccuracyConstants(0.0, 0.0, 0.0, s0, s1)
    c0 = s0 * theta ** (2.0 / 3.0)
    c1 = gains.k0 * math.sqrt(gains.l) * s1 * theta ** (1.0 / 3.0)
    return AccuracyConstants(c0, c1, theta, s0, s1)


def pi_negative_near_gamma_zero(g, gains: GainSet, n_samples: int = 200,
                                seed: int = 0) -> bool:
    """Sampling check that Pi < 0 on a neighborhood of {Gamma = 0}
    (states with x1 = grad U(x0)); holds whenever k1 > 1/c_S."""
    inst = _as_instance(g)
    rng = np.random.default_rng(seed)
    for _ in range(n_samples):
        x0 = inst.project(rng.standard_normal(inst.n))
        if np.linalg.norm(x0) < 1e-6:
            continue
        x1 = inst.potential_gradient(x0)
        if _pi_value(inst, x0, x1, gains, 1e-7) >= 0:
            return False
    return True


def certify(g, gains: GainSet, opts: OptimizerSettings | None = None,
            with_accuracy: bool = True) -> CertifiedConstants:
    """Full certification pipeline for a gain set on a graph."""
    inst = _as_instance(g)
    opts = opts or OptimizerSettings()
    k1_lo = k1_lower_bound(inst)
    if gains.k1 <= k1_lo:
        raise CertificationError(f"k1 = {gains.k1} <= 1/c_S = {k1_lo:.6g}")
    w_k0 = k0_lower_bound(inst, gains.k1, gains.beta, opts)
    w_c = margin_c(inst, gains, opts)
    w_v = v_lower(inst, gains.beta, opts)
    w_psi = c_psi(inst, gains, opts)
    sig = sigma_max(w_c.value, w_v.value, w_psi.value)
    if with_accuracy:
        acc = accuracy_constants(inst, gains, opts)
    else:
        acc = AccuracyConstants(float("nan"), float("nan"), float("nan"), 0.0, 0.0)
    return CertifiedConstants(
        k0_lower=w_k0.value, k1_lower=k1_lo, c=w_c.value, v_lower=w_v.value,
        c_psi=w_psi.value, sigma_max=sig, c0=acc.c0, c1=acc.c1,
        settling_scale=3.0 / (w_c.value * w_v.value), theta=acc.theta,
        witnesses={"k0_lower": w_k0, "c": w_c, "v_lower": w_v, "c_psi": w_psi},
    )
