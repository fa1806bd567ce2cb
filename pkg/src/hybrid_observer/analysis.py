"""Contraction analysis and parameter certification.

The estimator error over one window obeys
``eps(k) = P (F_k kron I) eps(k-1) + Q mu``; convergence is certified in
the mixed matrix norm (infinity norm of the matrix of block spectral
norms), using a contraction coefficient ``gamma`` obtained from the
largest 2-norm ``rho`` of projection products in which every agent's
projection appears.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import numerics
from .exceptions import AssumptionViolation
from .network import flocking_matrix

__all__ = [
    "ContractionCert",
    "ObserverParams",
    "block_norms",
    "mixed_norm",
    "block_vector_norm",
    "product_length",
    "contraction_coefficient",
    "gamma_from_rho",
    "min_iterations",
    "iteration_quotient",
    "min_observer_rate",
    "certified_rate",
    "stacked_matrices",
    "window_times",
    "build_Omega",
    "build_Theta",
    "certify",
]

EXACT_CAP = 10**7


def _partition(sizes, total):
    if np.isscalar(sizes):
        size = int(sizes)
        if size <= 0 or total % size:
            raise ValueError(f"block size {size} does not divide {total}")
        sizes = [size] * (total // size)
    sizes = [int(s) for s in sizes]
    if sum(sizes) != total:
        raise ValueError(f"block sizes {sizes} do not add up to {total}")
    return np.concatenate([[0], np.cumsum(sizes)])


def block_norms(M, row_blocks, col_blocks=None):
    """Matrix ``<M>`` of block-wise spectral norms.

    ``row_blocks``/``col_blocks`` are a block size or a list of sizes;
    ``col_blocks`` defaults to ``row_blocks``.
    """
    M = np.asarray(M, dtype=float)
    col_blocks = row_blocks if col_blocks is None else col_blocks
    r = _partition(row_blocks, M.shape[0])
    c = _partition(col_blocks, M.shape[1])
    out = np.empty((len(r) - 1, len(c) - 1))
    for i in range(len(r) - 1):
        for j in range(len(c) - 1):
            out[i, j] = numerics.spectral_norm(M[r[i]:r[i + 1], c[j]:c[j + 1]])
    return out


def mixed_norm(M, row_blocks, col_blocks=None):
    """Max over block rows of the sum of the block spectral norms."""
    return float(block_norms(M, row_blocks, col_blocks).sum(axis=1).max())


def block_vector_norm(v, blocks):
    """Largest 2-norm among the blocks of ``v``.

    This vector norm is compatible with :func:`mixed_norm`:
    ``block_vector_norm(M v) <= mixed_norm(M) * block_vector_norm(v)``.
    """
    v = np.asarray(v, dtype=float).ravel()
    b = _partition(blocks, v.size)
    return max(float(np.linalg.norm(v[b[k]:b[k + 1]])) for k in range(len(b) - 1))


@dataclass(frozen=True)
class ContractionCert:
    rho: float
    gamma: float
    method: str
    sequences_checked: int
    length: int

    @property
    def certified(self):
        return self.method == "exact"


def product_length(m):
    """Length of the projection products entering ``gamma``.

    ``(m-1)**2`` in general; for ``m <= 2`` that length cannot contain
    every label, so ``m`` is used instead.
    """
    return (m - 1) ** 2 if m > 2 else m


def gamma_from_rho(rho, m):
    length = product_length(m)
    return 1.0 - (m - 1) * (1.0 - rho) / float(m) ** length


def _check_projections(P_list):
    P_list = [numerics.as_matrix(P, "P") for P in P_list]
    n = P_list[0].shape[0]
    for i, P in enumerate(P_list, start=1):
        if P.shape != (n, n):
            raise ValueError("projections must share one square shape")
        scale = max(1.0, numerics.spectral_norm(P))
        if (numerics.spectral_norm(P - P.T) > 1e-8 * scale
                or numerics.spectral_norm(P @ P - P) > 1e-8 * scale):
            raise ValueError(f"P_{i} is not a symmetric idempotent matrix")
    # the images of the P_i must intersect trivially (joint observability)
    complements = np.vstack([np.eye(n) - P for P in P_list])
    if numerics.rank(complements) != n:
        raise AssumptionViolation(
            "joint_observability", "the projection images share a nonzero vector"
        )
    return P_list


def _exact_rho(P_list, length):
    m = len(P_list)
    n = P_list[0].shape[0]
    full = (1 << m) - 1
    stack = np.stack(P_list)
    rho = 0.0
    checked = 0
    # partition the sequence space by first factor; merge by max
    for first in range(m):
        prods = stack[first][None]
        masks = np.array([1 << first], dtype=np.int64)
        for _ in range(length - 1):
            prods = np.einsum("aij,bjk->abik", prods, stack).reshape(-1, n, n)
            masks = (masks[:, None] | (1 << np.arange(m))[None, :]).ravel()
        keep = masks == full
        if np.any(keep):
            norms = np.linalg.norm(prods[keep], ord=2, axis=(1, 2))
            rho = max(rho, float(norms.max()))
            checked += int(keep.sum())
    return rho, checked


def _sampled_rho(P_list, length, budget, rng):
    m = len(P_list)
    rho = 0.0
    for _ in range(budget):
        # every label lands in its own slot; the remaining slots are free
        seq = rng.integers(0, m, size=length)
        seq[rng.choice(length, size=m, replace=False)] = rng.permutation(m)
        prod = P_list[seq[0]]
        for k in seq[1:]:
            prod = prod @ P_list[k]
        rho = max(rho, numerics.spectral_norm(prod))
    return rho


def contraction_coefficient(P_list, method="auto", budget=20000, cap=EXACT_CAP, seed=0):
    """Compute ``rho`` and ``gamma`` for the projections ``P_list``.

    ``method="exact"`` enumerates all ``m**length`` index sequences and keeps
    those containing every label; it is refused above ``cap`` sequences.
    ``method="sampled"`` draws ``budget`` valid sequences; the resulting
    ``rho`` is only a lower bound and the certificate is not exact.
    ``"auto"`` picks exact when allowed.
    """
    P_list = _check_projections(P_list)
    m = len(P_list)
    length = product_length(m)
    total = m ** length
    if method == "auto":
        method = "exact" if total <= cap else "sampled"
    if method == "exact":
        if total > cap:
            raise ValueError(
                f"exact enumeration needs {total} products (cap {cap}); use method='sampled'"
            )
        rho, checked = _exact_rho(P_list, length)
    elif method == "sampled":
        rho = _sampled_rho(P_list, length, budget, np.random.default_rng(seed))
        checked = budget
    else:
        raise ValueError(f"unknown method {method!r}")
    gamma = gamma_from_rho(rho, m)
    if rho >= 1.0 - 1e-12 or gamma >= 1.0:
        raise AssumptionViolation(
            "contraction", f"rho = {rho:.6g} gives no contraction (gamma = {gamma:.6g})"
        )
    return ContractionCert(rho=rho, gamma=gamma, method=method,
                           sequences_checked=checked, length=length)


def iteration_quotient(q, m):
    """Integer quotient of ``q`` by ``product_length(m) + 1``."""
    return q // (product_length(m) + 1)


def min_iterations(zeta, T, gamma, m):
    """Smallest ``q >= 1`` strictly above ``(1 + zeta T / ln(1/gamma)) (L + 1)``."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    if T <= 0:
        raise ValueError("T must be positive")
    bound = (1.0 + zeta * T / math.log(1.0 / gamma)) * (product_length(m) + 1)
    return max(1, math.floor(bound) + 1)


def min_observer_rate(r, T, gamma, zeta):
    """Threshold ``(r/T) ln(1/gamma) - zeta`` that the observer rate must exceed."""
    return r / T * math.log(1.0 / gamma) - zeta


def certified_rate(r, T, gamma, zeta):
    lam = r / T * math.log(1.0 / gamma) - zeta
    if lam <= 0:
        raise AssumptionViolation(
            "positive_rate", f"lambda = {lam:.6g} <= 0; q is too small"
        )
    return lam


@dataclass(frozen=True)
class ObserverParams:
    T: float
    tau: float
    q: int
    r: int = 0
    omega: float = 0.0
    zeta: float = 0.0
    gamma: float = float("nan")
    lambda_: float = float("nan")

    def __post_init__(self):
        if not 0.0 < self.tau < self.T:
            raise ValueError("need 0 < tau < T")
        if self.q < 1:
            raise ValueError("q must be at least 1")


def stacked_matrices(A, designs):
    """Block-diagonal ``(Abar, P, Q)`` over the given agent designs."""
    m = len(designs)
    A_stack = np.kron(np.eye(m), np.asarray(A, dtype=float))
    P_stack = scipy.linalg.block_diag(*[d.P for d in designs])
    Q_stack = scipy.linalg.block_diag(*[d.Q for d in designs])
    return A_stack, P_stack, Q_stack


def window_times(j, T, tau, q):
    """Graph sampling instants ``tau_k = t_j - (1 - (k-1)/q) tau``, ``k = 1..q``."""
    t_j = j * T
    return [t_j - (1.0 - (k - 1) / q) * tau for k in range(1, q + 1)]


def _window_factors(designs, schedule, j, params, labels):
    n = designs[0].P.shape[0]
    _, P_stack, _ = stacked_matrices(np.eye(n), designs)
    factors = []
    for t in window_times(j, params.T, params.tau, params.q):
        g = schedule.graph_at(t)
        if tuple(g.vertices) != tuple(labels):
            raise ValueError("agent set changes inside the window")
        factors.append(P_stack @ np.kron(flocking_matrix(g), np.eye(n)))
    return factors


def build_Omega(A, designs, schedule, j, params, labels=None):
    """``exp(Abar tau) P(F_q x I) ... P(F_1 x I) exp(Abar (T - tau))``."""
    labels = schedule.active_vertices(j * params.T - params.tau) if labels is None else labels
    A_stack, _, _ = stacked_matrices(A, designs)
    prod = np.eye(A_stack.shape[0])
    for factor in _window_factors(designs, schedule, j, params, labels):
        prod = factor @ prod
    return (numerics.mat_exp(A_stack, params.tau) @ prod
            @ numerics.mat_exp(A_stack, params.T - params.tau))


def build_Theta(A, designs, schedule, j, params, labels=None):
    """``exp(Abar tau) (sum_{s=2..q} P(F_q x I)...P(F_s x I) + I) Q``."""
    labels = schedule.active_vertices(j * params.T - params.tau) if labels is None else labels
    A_stack, _, Q_stack = stacked_matrices(A, designs)
    factors = _window_factors(designs, schedule, j, params, labels)
    size = A_stack.shape[0]
    total = np.eye(size)
    tail = np.eye(size)
    # tail runs through P(F_q)...P(F_s) for s = q, q-1, ..., 2
    for factor in reversed(factors[1:]):
        tail = tail @ factor
        total = total + tail
    return numerics.mat_exp(A_stack, params.tau) @ total @ Q_stack


@dataclass(frozen=True)
class Certification:
    params: ObserverParams
    contraction: ContractionCert
    q_min: int
    omega_threshold: float
    warnings: tuple

    def to_dict(self):
        p, c = self.params, self.contraction
        return {
            "rho": c.rho,
            "gamma": c.gamma,
            "method": c.method,
            "certified": c.certified,
            "sequences_checked": c.sequences_checked,
            "product_length": c.length,
            "zeta": p.zeta,
            "q_min": self.q_min,
            "q": p.q,
            "r": p.r,
            "omega": p.omega,
            "omega_threshold": self.omega_threshold,
            "lambda": p.lambda_,
        }


def certify(model, designs, T, tau, q=None, omega=None, method="auto", strict=True,
            contraction=None):
    """Select and certify ``(q, r, omega, lambda)`` for ``model`` and ``designs``.

    ``q`` defaults to the smallest admissible value. ``omega`` is the rate
    the observer gains are claimed to achieve; when omitted it is read off
    the slowest observer pole. With ``strict`` a non-positive ``lambda``
    or an observer rate below the threshold raises; otherwise both are
    reported as warnings. A precomputed ``contraction`` skips enumeration.
    """
    notes = []
    m = model.m
    cert = contraction or contraction_coefficient([d.P for d in designs], method=method)
    if not cert.certified:
        notes.append("gamma estimated by sampling; not certified")
    if m <= 2:
        notes.append(f"m = {m}: products of length {cert.length} used in place of (m-1)^2")
    z = numerics.zeta(model.A)
    q_min = min_iterations(z, T, cert.gamma, m)
    q = q_min if q is None else int(q)
    if q < q_min:
        notes.append(f"q = {q} is below the certified minimum {q_min}")
    r = iteration_quotient(q, m)
    threshold = min_observer_rate(r, T, cert.gamma, z)
    slowest = -max(d.observer_spectrum().max_real_part for d in designs)
    if omega is None:
        omega = slowest
    rate_msg = f"omega = {omega:.6g} does not exceed the threshold {threshold:.6g}"
    if omega <= threshold:
        notes.append(rate_msg)
    if slowest < omega - 1e-9:
        notes.append(f"observer poles only reach rate {slowest:.6g} < omega = {omega:.6g}")
    lam = r / T * math.log(1.0 / cert.gamma) - z
    if lam <= 0:
        msg = f"lambda = {lam:.6g} <= 0 for q = {q}"
        if strict:
            raise AssumptionViolation("positive_rate", msg)
        notes.append(msg)
    elif strict and omega <= threshold:
        raise AssumptionViolation("observer_rate", rate_msg)
    params = ObserverParams(T=T, tau=tau, q=q, r=r, omega=omega, zeta=z,
                            gamma=cert.gamma, lambda_=lam)
    for note in notes:
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    return Certification(params=params, contraction=cert, q_min=q_min,
                         omega_threshold=threshold, warnings=tuple(notes))
