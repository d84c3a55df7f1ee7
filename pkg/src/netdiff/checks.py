"""Self-contained sanity checks over the kernel identities.

Each check draws its own random states from a seeded generator and returns
(passed, detail). The CLI `check` command runs the whole registry on a given
graph; the tests run them too, plus deliberately broken variants to make sure
the checks can actually fail.
"""
from __future__ import annotations

import numpy as np

from .core import graph_instance, signed_power
from .graph import Graph, incidence, laplacian
from .signals import reference_bank


def _rand_x(inst, rng, scale=1.0):
    return scale * inst.project(rng.standard_normal(inst.n))


def check_fenchel(g: Graph, rng) -> tuple[bool, str]:
    """Young/Fenchel inequality U(x0) + U*(x1) >= <x0, x1>, with equality at
    x1 = grad U(x0)."""
    inst = graph_instance(g)
    worst = np.inf
    for _ in range(25):
        x0, x1 = _rand_x(inst, rng), _rand_x(inst, rng)
        gap = inst.potential(x0) + inst.conjugate(x1) - float(x0 @ x1)
        worst = min(worst, gap)
        if gap < -1e-7:
            return False, f"inequality violated by {gap:.3e}"
    for _ in range(10):
        x0 = _rand_x(inst, rng)
        x1 = inst.potential_gradient(x0)
        gap = inst.potential(x0) + inst.conjugate(x1) - float(x0 @ x1)
        if abs(gap) > 1e-6 * max(1.0, abs(inst.potential(x0))):
            return False, f"equality case off by {gap:.3e}"
    return True, f"min inequality gap {worst:.3e}"


def check_conjugate_inverse(g: Graph, rng) -> tuple[bool, str]:
    """grad U* inverts grad U on the disagreement subspace."""
    inst = graph_instance(g)
    worst = 0.0
    for _ in range(15):
        x0 = _rand_x(inst, rng)
        back = inst.conjugate_gradient(inst.potential_gradient(x0))
        err = np.linalg.norm(back - x0) / max(1.0, np.linalg.norm(x0))
        worst = max(worst, err)
    return worst < 1e-5, f"max inversion error {worst:.3e}"


def check_homogeneity(g: Graph, rng) -> tuple[bool, str]:
    """Degrees under the dilation (x0, x1) -> (lam^2 x0, lam x1):
    U and U* scale as lam^3, Gamma as lam^2."""
    inst = graph_instance(g)
    for _ in range(10):
        x0, x1 = _rand_x(inst, rng), _rand_x(inst, rng)
        lam = float(rng.uniform(0.3, 3.0))
        checks = [
            (inst.potential(lam ** 2 * x0), lam ** 3 * inst.potential(x0)),
            (inst.conjugate(lam * x1), lam ** 3 * inst.conjugate(x1)),
            (inst.gamma_fn(lam ** 2 * x0, lam * x1), lam ** 2 * inst.gamma_fn(x0, x1)),
        ]
        for got, want in checks:
            if abs(got - want) > 1e-6 * max(1.0, abs(want)):
                return False, f"scaling mismatch: {got:.6g} vs {want:.6g}"
    return True, "U, U* degree 3; Gamma degree 2"


def check_euler_identity(g: Graph, rng) -> tuple[bool, str]:
    """<grad U(x0), x0> = (3/2) U(x0) (Euler, homogeneity degree 3/2 in e0)."""
    inst = graph_instance(g)
    for _ in range(15):
        x0 = _rand_x(inst, rng)
        lhs = float(inst.potential_gradient(x0) @ x0)
        rhs = 1.5 * inst.potential(x0)
        if abs(lhs - rhs) > 1e-8 * max(1.0, abs(rhs)):
            return False, f"{lhs:.6g} != {rhs:.6g}"
    return True, "Euler identity holds"


def check_positive_definiteness(g: Graph, rng) -> tuple[bool, str]:
    """V > 0 away from the origin at the smallest admissible beta = 7."""
    inst = graph_instance(g)
    worst = np.inf
    for _ in range(25):
        x0, x1 = _rand_x(inst, rng), _rand_x(inst, rng)
        if np.linalg.norm(x0) + np.linalg.norm(x1) < 1e-6:
            continue
        v = inst.lyapunov(x0, x1, 7.0)
        worst = min(worst, v)
        if v <= 0:
            return False, f"V = {v:.3e} <= 0 at a nonzero state"
    return True, f"min sampled V = {worst:.3e}"


def check_sign_coercivity(g: Graph, rng) -> tuple[bool, str]:
    """<e0, S(e0)> >= sqrt(lambda_G) ||e0|| on the disagreement subspace."""
    inst = graph_instance(g)
    for _ in range(50):
        e0 = _rand_x(inst, rng, scale=float(rng.uniform(0.1, 10.0)))
        lhs = float(e0 @ inst.sign_selection(e0))
        rhs = inst.c_s * np.linalg.norm(e0)
        if lhs < rhs - 1e-9 * max(1.0, rhs):
            return False, f"{lhs:.6g} < {rhs:.6g}"
    return True, "coercivity constant verified on samples"


def check_orientation_invariance(g: Graph, rng, transform=None) -> tuple[bool, str]:
    """U, grad U and S do not depend on the edge orientation convention.

    transform maps the incidence matrix to a reoriented copy; the default
    flips a random subset of columns. (A transform that breaks the structure
    is used in the tests to show this check can fail.)
    """
    inst = graph_instance(g)
    D = incidence(g)
    if transform is None:
        def transform(mat, r):
            signs = np.where(r.integers(0, 2, mat.shape[1]) == 0, -1.0, 1.0)
            return mat * signs[None, :]
    D2 = transform(D, rng)
    for _ in range(15):
        e0 = _rand_x(inst, rng)
        u_ref = inst.potential(e0)
        u_alt = (2.0 / 3.0) * np.sum(np.abs(D2.T @ e0) ** 1.5)
        g_ref = inst.potential_gradient(e0)
        g_alt = D2 @ signed_power(D2.T @ e0, 0.5)
        s_ref = inst.sign_selection(e0)
        s_alt = D2 @ np.sign(D2.T @ e0)
        if (abs(u_ref - u_alt) > 1e-9 * max(1.0, u_ref)
                or np.linalg.norm(g_ref - g_alt) > 1e-9
                or np.linalg.norm(s_ref - s_alt) > 1e-9):
            return False, "orientation changed the kernel functions"
    return True, "kernel invariant under reorientation"


def check_signal_derivatives(g: Graph, rng) -> tuple[bool, str]:
    """Closed-form derivatives of the reference bank agree with central
    finite differences."""
    bank = reference_bank()
    h = 1e-6
    for _ in range(20):
        t = float(rng.uniform(0.0, 10.0))
        fd1 = (bank.evaluate(t + h, 0) - bank.evaluate(t - h, 0)) / (2 * h)
        fd2 = (bank.evaluate(t + h, 1) - bank.evaluate(t - h, 1)) / (2 * h)
        if (np.max(np.abs(fd1 - bank.evaluate(t, 1))) > 1e-5
                or np.max(np.abs(fd2 - bank.evaluate(t, 2))) > 1e-5):
            return False, f"derivative mismatch at t = {t:.3f}"
    return True, "analytic derivatives match finite differences"


def check_graph_identities(g: Graph, rng) -> tuple[bool, str]:
    """Laplacian factorization and structure: L = D D^T, zero row sums,
    symmetric PSD."""
    D = incidence(g)
    L = laplacian(g)
    if np.linalg.norm(L - D @ D.T) > 1e-12:
        return False, "L != D D^T"
    if np.max(np.abs(L.sum(axis=1))) > 1e-12:
        return False, "row sums not zero"
    if np.linalg.norm(L - L.T) > 1e-12:
        return False, "Laplacian not symmetric"
    if np.min(np.linalg.eigvalsh(L)) < -1e-10:
        return False, "Laplacian not PSD"
    return True, "Laplacian identities hold"


REGISTRY = {
    "fenchel": check_fenchel,
    "conjugate-inverse": check_conjugate_inverse,
    "homogeneity": check_homogeneity,
    "euler": check_euler_identity,
    "positive-definite": check_positive_definiteness,
    "sign-coercivity": check_sign_coercivity,
    "orientation": check_orientation_invariance,
    "signal-derivatives": check_signal_derivatives,
    "graph-identities": check_graph_identities,
}


def run_checks(g: Graph, seed: int = 0, names=None) -> list[dict]:
    names = list(REGISTRY) if names is None else list(names)
    results = []
    for name in names:
        if name not in REGISTRY:
            raise KeyError(f"unknown check: {name!r}")
        rng = np.random.default_rng(seed)
        passed, detail = REGISTRY[name](g, rng)
        results.append({"name": name, "passed": bool(passed), "detail": detail})
    return results
