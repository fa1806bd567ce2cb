"""Shared fixtures data: the worked three-agent example and random systems."""

import math

import numpy as np

from hybrid_observer import SystemModel
from hybrid_observer.exceptions import AssumptionViolation

S = math.sqrt(2.0) / 2.0

A_EX = np.array([
    [0.0, 0.4, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 2.0],
    [0.0, 0.0, -2.0, 0.2],
])
C_EX = [np.array([[1.0, 0, 0, 0]]), np.array([[0, 1.0, 0, 0]]), np.array([[0, 0, 1.0, 1.0]])]
L_EX = [
    np.array([[0.0, 1, 0, 0], [1, 0, 0, 0]]),
    np.array([[0.0, 1, 0, 0]]),
    np.array([[0, 0, -S, S], [0, 0, S, S]]),
]
K_EX = [np.array([[-20.0], [-6.0]]), np.array([[-2.0]]), np.array([[-0.85], [-3.68]])]
NEIGHBORS_EX = {1: [1, 2], 2: [1, 2, 3], 3: [2, 3]}


def _block(rng, kind, used):
    # eigenvalues kept apart so generic outputs observe each block; None if no room left
    for _ in range(200):
        re = rng.uniform(-0.5, 0.3)
        if kind == 1:
            if all(abs(re - u) > 0.1 for u in used):
                used.append(re)
                return np.array([[re]])
        else:
            im = rng.uniform(0.5, 2.5)
            if all(abs(complex(re, im) - u) > 0.1 for u in used):
                used.append(complex(re, im))
                return np.array([[re, im], [-im, re]])
    return None


def random_system(rng, n_range=(2, 6), m_range=(2, 4), max_outputs=2):
    """Random jointly observable ``SystemModel`` in which channels typically
    see only some of the modes, so the ``L_i`` are genuinely reduced."""
    while True:
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        m = int(rng.integers(m_range[0], m_range[1] + 1))
        sizes, left = [], n
        while left:
            s = 1 if left == 1 else int(rng.integers(1, 3))
            sizes.append(s)
            left -= s
        used = []
        blocks = [_block(rng, s, used) for s in sizes]
        if any(b is None for b in blocks):
            continue
        Ad = np.zeros((n, n))
        starts = np.concatenate([[0], np.cumsum(sizes)])
        for b, blk in enumerate(blocks):
            Ad[starts[b]:starts[b + 1], starts[b]:starts[b + 1]] = blk
        Qm, _ = np.linalg.qr(rng.standard_normal((n, n)))
        A = Qm @ Ad @ Qm.T
        seen = [set() for _ in range(m)]
        for b in range(len(sizes)):
            seen[int(rng.integers(m))].add(b)
        Cs = []
        for i in range(m):
            extra = rng.random(len(sizes)) < 0.3
            seen[i] |= {b for b in range(len(sizes)) if extra[b]}
            if not seen[i]:
                seen[i].add(int(rng.integers(len(sizes))))
            s_i = int(rng.integers(1, max_outputs + 1))
            Ct = np.zeros((s_i, n))
            for b in seen[i]:
                Ct[:, starts[b]:starts[b + 1]] = rng.standard_normal((s_i, sizes[b]))
            Cs.append(Ct @ Qm.T)
        try:
            return SystemModel(A, tuple(Cs))
        except AssumptionViolation:
            continue


def random_config(rng, n_range=(2, 5), m_range=(2, 4), q_max=15, events=3, omega=1.0,
                  gain_matrices=False):
    """Random ``SimConfig`` over a generator schedule that switches every round."""
    from hybrid_observer import GraphSchedule, ObserverParams, SimConfig, design_agents

    model = random_system(rng, n_range, m_range)
    Gs = None
    if gain_matrices:
        Gs = []
        for C in model.C:
            k = _observable_dim(C, model.A)
            R = rng.standard_normal((k, k))
            G = R @ R.T + 0.1 * np.eye(k)
            Gs.append(G / np.linalg.eigvalsh(G)[-1])
    designs = design_agents(model, omega=omega, Gs=Gs)
    q = int(rng.integers(1, q_max + 1))
    T, tau = 1.0, 0.5
    params = ObserverParams(T=T, tau=tau, q=q)
    schedule = GraphSchedule.generator(model.m, density=float(rng.uniform(0, 1)),
                                       seed=int(rng.integers(2**31)), period=tau / q)
    n = model.n
    return SimConfig(
        model=model, designs=designs, params=params, schedule=schedule,
        x0=rng.standard_normal(n),
        w0=[rng.standard_normal(d.n_i) for d in designs],
        xhat0=[rng.standard_normal(n) for _ in designs],
        t_end=events * T, sample_dt=0.05,
    )


def _observable_dim(C, A):
    from hybrid_observer import build_L
    return build_L(C, A).shape[0]
