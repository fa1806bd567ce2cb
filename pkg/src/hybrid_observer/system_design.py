"""Synthesis of each agent's local observer and estimator matrices.

For a channel ``(C_i, A)`` the agent can only reconstruct ``x`` modulo the
unobservable space ``[C_i|A]``. We pick ``L_i`` with orthonormal rows and
kernel ``[C_i|A]``, reduce the pair to ``(Cbar_i, Abar_i)``, place the
observer gain ``K_i`` and form the projections ``Q_i`` and ``P_i`` used
by the parameter estimator.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.signal

from . import numerics
from .exceptions import AssumptionViolation, DesignError

__all__ = [
    "SystemModel",
    "AgentDesign",
    "ObservabilityReport",
    "observability_matrix",
    "unobservable_subspace",
    "build_L",
    "reduce_pair",
    "place_observer_gain",
    "check_joint_observability",
    "validate_gain_matrix",
    "design_agent",
    "design_agents",
]

RESIDUAL_TOL = 1e-9


def observability_matrix(C, A, blocks=None):
    """Stack ``[C; CA; ...; CA^(blocks-1)]`` (``blocks`` defaults to ``n``)."""
    A = numerics.as_matrix(A, "A")
    C = numerics.as_matrix(C, "C")
    n = A.shape[0]
    blocks = n if blocks is None else blocks
    rows = [C]
    for _ in range(blocks - 1):
        rows.append(rows[-1] @ A)
    return np.vstack(rows)


@dataclass(frozen=True)
class ObservabilityReport:
    rank: int
    n: int
    channel_ranks: tuple

    @property
    def passed(self):
        return self.rank == self.n


def check_joint_observability(model_or_A, C_list=None):
    """Rank of the stacked observability matrix, plus the per-channel ranks.

    Accepts either a :class:`SystemModel` or ``(A, C_list)``.
    """
    if C_list is None:
        A, C_list = model_or_A.A, model_or_A.C
    else:
        A = numerics.as_matrix(model_or_A, "A")
    C_list = [numerics.as_matrix(C, "C") for C in C_list]
    n = A.shape[0]
    stacked = observability_matrix(np.vstack(C_list), A)
    per_channel = tuple(numerics.rank(observability_matrix(C, A)) for C in C_list)
    return ObservabilityReport(rank=numerics.rank(stacked), n=n, channel_ranks=per_channel)


@dataclass(frozen=True)
class SystemModel:
    """The plant ``xdot = A x``, ``y_i = C_i x`` for ``i = 1..m``.

    Construction fails with :class:`AssumptionViolation` if a channel
    matrix is zero or the stacked pair ``(C, A)`` is not observable.
    """

    A: np.ndarray
    C: tuple

    def __post_init__(self):
        A = numerics.as_matrix(self.A, "A")
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        n = A.shape[0]
        if len(self.C) == 0:
            raise ValueError("at least one channel is required")
        Cs = []
        for i, C in enumerate(self.C, start=1):
            C = numerics.as_matrix(C, f"C_{i}")
            if C.shape[1] != n:
                raise ValueError(f"C_{i} has {C.shape[1]} columns, expected {n}")
            if not np.any(C):
                raise AssumptionViolation("nonzero_channel", f"channel {i} zero")
            Cs.append(C)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "C", tuple(Cs))
        report = check_joint_observability(A, Cs)
        if not report.passed:
            raise AssumptionViolation(
                "joint_observability",
                f"stacked observability matrix has rank {report.rank} < n = {n}",
            )

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return len(self.C)

    def output_dims(self):
        return tuple(C.shape[0] for C in self.C)

    def without_channels(self, drop):
        """Model with the channels in ``drop`` (1-based labels) removed.

        Raises if the residual system loses joint observability.
        """
        drop = set(drop)
        keep = [C for i, C in enumerate(self.C, start=1) if i not in drop]
        return SystemModel(self.A, tuple(keep))


def unobservable_subspace(C, A):
    """Orthonormal columns spanning ``[C|A]``, the unobservable space."""
    return numerics.nullspace(observability_matrix(C, A))


def build_L(C, A):
    """Orthonormal-row matrix whose kernel is the unobservable space of ``(C, A)``."""
    C = numerics.as_matrix(C, "C")
    if not np.any(C):
        raise AssumptionViolation("nonzero_channel", "C_i is zero")
    return numerics.row_space(observability_matrix(C, A))


def _scale(*mats):
    return max([1.0] + [numerics.spectral_norm(M) for M in mats])


def reduce_pair(C, A, L):
    """Solve ``C = Cbar L`` and ``L A = Abar L``.

    Returns ``(Cbar, Abar)``. Raises :class:`DesignError` when the
    residuals show that ``ker L`` is not the unobservable space.
    """
    C = numerics.as_matrix(C, "C")
    A = numerics.as_matrix(A, "A")
    L = numerics.as_matrix(L, "L")
    right_inv = L.T @ np.linalg.inv(L @ L.T)
    Abar = L @ A @ right_inv
    Cbar = C @ right_inv
    scale = _scale(A, C, L)
    res_A = numerics.spectral_norm(L @ A - Abar @ L)
    res_C = numerics.spectral_norm(C - Cbar @ L)
    if res_A > RESIDUAL_TOL * scale or res_C > RESIDUAL_TOL * scale:
        raise DesignError(
            f"L is not kernel-correct: |LA - Abar L| = {res_A:.3e}, "
            f"|C - Cbar L| = {res_C:.3e}"
        )
    return Cbar, Abar


def default_poles(omega, n_i):
    return np.array([-omega * (1.0 + k / (2.0 * n_i)) for k in range(n_i)])


def place_observer_gain(Cbar, Abar, omega, poles=None):
    """Gain ``K`` putting every eigenvalue of ``Abar + K Cbar`` at real part <= -omega.

    Poles default to ``-omega * (1 + k / (2 n_i))``, ``k = 0..n_i-1``, and
    are placed on the dual pair ``(Abar', Cbar')``.
    """
    Abar = numerics.as_matrix(Abar, "Abar")
    Cbar = numerics.as_matrix(Cbar, "Cbar")
    if omega <= 0:
        raise ValueError("omega must be positive")
    n_i = Abar.shape[0]
    if numerics.rank(observability_matrix(Cbar, Abar)) != n_i:
        raise DesignError("reduced pair (Cbar, Abar) is not observable")
    poles = default_poles(omega, n_i) if poles is None else np.asarray(poles)

    # place_poles needs a full-column-rank input matrix: factor Cbar = W Cr
    # with orthonormal rows Cr, place for Cr and map back through pinv(W).
    Cr = numerics.row_space(Cbar)
    W = Cbar @ Cr.T
    if n_i == 1:
        # scalar case: choose K so that Abar + K Cbar = pole
        Kr = (poles[0] - Abar[0, 0]) / Cr[0, 0] * np.ones((1, 1))
        Kr = np.hstack([Kr, np.zeros((1, Cr.shape[0] - 1))])
    else:
        with warnings.catch_warnings():
            # the robustness refinement may stop early; placement itself is checked below
            warnings.filterwarnings("ignore", message="Convergence was not reached")
            placed = scipy.signal.place_poles(Abar.T, Cr.T, poles)
        Kr = -placed.gain_matrix.T
    K = Kr @ np.linalg.pinv(W)

    spec = numerics.eigenvalues(Abar + K @ Cbar)
    if spec.max_real_part > -omega + 1e-6 * max(1.0, omega):
        raise DesignError(
            f"pole placement missed: max real part {spec.max_real_part:.6g} > {-omega}"
        )
    return K


def validate_gain_matrix(L, G):
    """True iff the spectrum of ``L' G L`` lies in ``(-1, 1]``.

    ``G`` must be symmetric positive definite; otherwise ``ValueError``.
    """
    L = numerics.as_matrix(L, "L")
    G = numerics.as_matrix(G, "G")
    if G.shape != (L.shape[0], L.shape[0]):
        raise ValueError(f"G must be {L.shape[0]}x{L.shape[0]}")
    if not np.allclose(G, G.T, atol=1e-12 * max(1.0, np.abs(G).max())):
        raise ValueError("G must be symmetric")
    if np.linalg.eigvalsh(G)[0] <= 0:
        raise ValueError("G must be positive definite")
    M = L.T @ G @ L
    ev = np.linalg.eigvalsh(0.5 * (M + M.T))
    tol = 1e-12 * max(1.0, np.abs(ev).max())
    return bool(ev[0] > -1.0 and ev[-1] <= 1.0 + tol)


@dataclass(frozen=True)
class AgentDesign:
    """All matrices of one agent's private estimator."""

    L: np.ndarray
    Abar: np.ndarray
    Cbar: np.ndarray
    K: np.ndarray
    Q: np.ndarray
    P: np.ndarray
    G: np.ndarray = field(default=None)

    @property
    def n_i(self):
        return self.L.shape[0]

    @property
    def observer_matrix(self):
        return self.Abar + self.K @ self.Cbar

    def observer_spectrum(self):
        return numerics.eigenvalues(self.observer_matrix)

    def residuals(self, C, A):
        A = numerics.as_matrix(A)
        C = numerics.as_matrix(C)
        n = A.shape[0]
        return {
            "LA_minus_AbarL": numerics.spectral_norm(self.L @ A - self.Abar @ self.L),
            "C_minus_CbarL": numerics.spectral_norm(C - self.Cbar @ self.L),
            "P_idempotent": numerics.spectral_norm(self.P @ self.P - self.P),
            "P_symmetric": numerics.spectral_norm(self.P - self.P.T),
            "QL_plus_P_minus_I": numerics.spectral_norm(self.Q @ self.L + self.P - np.eye(n)),
        }


def design_agent(C, A, omega=None, L=None, K=None, G=None):
    """Build an :class:`AgentDesign` for one channel.

    ``L`` and ``K`` may be supplied verbatim (reproducing a published
    design); otherwise ``L`` comes from :func:`build_L` and ``K`` from
    :func:`place_observer_gain` with rate ``omega``. With ``G`` given the
    estimator uses ``Q = L' G`` instead of ``L'(L L')^-1``.
    """
    A = numerics.as_matrix(A, "A")
    C = numerics.as_matrix(C, "C")
    if not np.any(C):
        raise AssumptionViolation("nonzero_channel", "C_i is zero")
    L = build_L(C, A) if L is None else numerics.as_matrix(L, "L")
    if numerics.rank(L) != L.shape[0]:
        raise DesignError("L must have full row rank")
    n_unobs = unobservable_subspace(C, A).shape[1]
    if L.shape[0] != A.shape[0] - n_unobs:
        raise DesignError(
            f"L has {L.shape[0]} rows, expected n_i = {A.shape[0] - n_unobs}"
        )
    Cbar, Abar = reduce_pair(C, A, L)
    if K is None:
        if omega is None:
            raise ValueError("either K or omega is required")
        K = place_observer_gain(Cbar, Abar, omega)
    else:
        K = numerics.as_matrix(K, "K").reshape(L.shape[0], C.shape[0])
    if G is None:
        Q = L.T @ np.linalg.inv(L @ L.T)
    else:
        G = numerics.as_matrix(G, "G")
        if not validate_gain_matrix(L, G):
            raise DesignError("spectrum of L' G L is not inside (-1, 1]")
        Q = L.T @ G
    P = np.eye(A.shape[0]) - Q @ L
    return AgentDesign(L=L, Abar=Abar, Cbar=Cbar, K=K, Q=Q, P=P, G=G)


def design_agents(model, omega=None, Ls=None, Ks=None, Gs=None):
    """Designs for every channel of ``model`` (lists may hold ``None`` entries)."""
    m = model.m
    Ls = Ls or [None] * m
    Ks = Ks or [None] * m
    Gs = Gs or [None] * m
    return [
        design_agent(C, model.A, omega=omega, L=L, K=K, G=G)
        for C, L, K, G in zip(model.C, Ls, Ks, Gs)
    ]
