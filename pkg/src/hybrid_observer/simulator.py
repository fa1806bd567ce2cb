"""Hybrid closed-loop simulation.

Between event times ``t_j = j T`` the plant, the local observers and the
agents' estimates flow continuously. On ``[t_j - tau, t_j)`` each agent
runs ``q`` synchronous rounds of its local parameter estimator, seeded
with its estimate and its observer output frozen at ``t_j - tau``; at
``t_j`` the estimate jumps to ``expm(A tau) z_i(q)``.

Flows are exact: the plant, the observers and (when present) the
harmonic disturbance are stacked into one linear system whose transition
matrix over ``sample_dt`` is computed once.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import numerics
from .analysis import ObserverParams, block_vector_norm, window_times
from .exceptions import AssumptionViolation, ConfigError
from .network import flocking_matrix
from .system_design import check_joint_observability

__all__ = [
    "Disturbance",
    "SimConfig",
    "EventRecord",
    "SimTrace",
    "flow_matrix",
    "flow",
    "estimator_window",
    "error_recursion_oracle",
    "run",
    "fit_rate",
    "asymptotic_window",
    "error_envelope",
]


@dataclass(frozen=True)
class Disturbance:
    """Additive plant input ``b * amplitude * cos(frequency * t)``."""

    b: np.ndarray
    amplitude: float = 1.0
    frequency: float = 0.0


@dataclass
class SimConfig:
    model: object
    designs: list
    params: ObserverParams
    schedule: object
    x0: np.ndarray
    w0: list = None
    xhat0: list = None
    disturbance: Disturbance = None
    t_end: float = 100.0
    sample_dt: float = None
    log_iterations: bool = False

    def __post_init__(self):
        n, m = self.model.n, self.model.m
        self.x0 = np.asarray(self.x0, dtype=float).reshape(n)
        if len(self.designs) != m:
            raise ConfigError(f"expected {m} agent designs, got {len(self.designs)}", "designs")
        if self.w0 is None:
            self.w0 = [np.zeros(d.n_i) for d in self.designs]
        if self.xhat0 is None:
            self.xhat0 = [np.zeros(n) for _ in range(m)]
        if len(self.w0) != m or len(self.xhat0) != m:
            raise ConfigError("one initial observer state and estimate per agent", "initial")
        self.w0 = [np.zeros(d.n_i) if w is None else np.asarray(w, dtype=float).reshape(d.n_i)
                   for w, d in zip(self.w0, self.designs)]
        self.xhat0 = [np.zeros(n) if x is None else np.asarray(x, dtype=float).reshape(n)
                      for x in self.xhat0]
        if tuple(self.schedule.labels) != tuple(range(1, m + 1)):
            raise ConfigError("graph vertices must be labelled 1..m", "graph")
        p = self.params
        if self.sample_dt is None:
            self.sample_dt = p.T / 100.0
        for name, span in (("T", p.T), ("tau", p.tau), ("T - tau", p.T - p.tau)):
            steps = span / self.sample_dt
            if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
                raise ConfigError(f"sample_dt must divide {name}", "simulation.sample_dt")
        if self.disturbance is not None:
            b = np.asarray(self.disturbance.b, dtype=float).reshape(n)
            self.disturbance = Disturbance(b, float(self.disturbance.amplitude),
                                           float(self.disturbance.frequency))


@dataclass
class EventRecord:
    """Data captured around event ``j`` (``j = 0`` is the initial state)."""

    j: int
    t: float
    labels: tuple
    x: np.ndarray
    xhat: np.ndarray
    dev: np.ndarray = None
    x_window: np.ndarray = None
    dev_window: np.ndarray = None
    mu_window: list = None
    z_log: np.ndarray = None


@dataclass
class SimTrace:
    times: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    w: list
    err: np.ndarray
    events: list = field(default_factory=list)
    deviation: np.ndarray = None

    @property
    def max_err(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.nanmax(self.err, axis=1)

    @property
    def iteration_log(self):
        return {e.j: e.z_log for e in self.events if e.z_log is not None}


def flow_matrix(A, designs, C_list, dt, disturbance=None):
    """Transition matrix over ``dt`` of ``[x; w_1..w_m; c; s]``.

    ``w_i' = (Abar_i + K_i Cbar_i) w_i - K_i C_i x``; with a disturbance
    the harmonic pair ``c = cos(f t)``, ``s = sin(f t)`` drives
    ``x' = A x + b amplitude c``.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    sizes = [d.n_i for d in designs]
    extra = 2 if disturbance is not None else 0
    N = n + sum(sizes) + extra
    M = np.zeros((N, N))
    M[:n, :n] = A
    off = n
    for d, C in zip(designs, C_list):
        k = d.n_i
        M[off:off + k, off:off + k] = d.observer_matrix
        M[off:off + k, :n] = -d.K @ C
        off += k
    if disturbance is not None:
        f = disturbance.frequency
        M[:n, off] = disturbance.amplitude * disturbance.b
        M[off, off + 1] = -f
        M[off + 1, off] = f
    return numerics.mat_exp(M, dt)


def flow(state, dt, A, designs, C_list, disturbance=None, t=0.0):
    """Advance plant and observers by ``dt`` from time ``t``.

    ``state`` is ``(x, [w_i])``; returns the same shape.
    """
    x, ws = state
    vec = [np.asarray(x, float)] + [np.asarray(w, float) for w in ws]
    if disturbance is not None:
        vec.append(np.array([math.cos(disturbance.frequency * t),
                             math.sin(disturbance.frequency * t)]))
    out = flow_matrix(A, designs, C_list, dt, disturbance) @ np.concatenate(vec)
    n = len(x)
    x_new = out[:n]
    ws_new, off = [], n
    for d in designs:
        ws_new.append(out[off:off + d.n_i])
        off += d.n_i
    return x_new, ws_new


def estimator_window(z0, w_frozen, graphs, designs, exp_A_tau, log=False):
    """Run ``q = len(graphs)`` synchronous estimator rounds.

    ``z0`` is ``(m, n)`` (row ``i`` is agent ``i``'s estimate at
    ``t_j - tau``), ``w_frozen`` the observer outputs at ``t_j - tau``, and
    ``graphs`` the neighbor graphs at ``tau_1..tau_q``. Each round averages
    over neighbors and then corrects:
    ``z_i <- zbar_i - Q_i (L_i zbar_i - w_i)``.

    Returns ``(xhat_new, z_log)`` where ``xhat_new[i] = expm(A tau) z_i(q)``
    and ``z_log`` is ``(q+1, m, n)`` when ``log`` else ``None``.
    """
    z = np.array(z0, dtype=float)
    history = [z.copy()] if log else None
    for g in graphs:
        zbar = flocking_matrix(g) @ z
        z = np.stack([
            zb - d.Q @ (d.L @ zb - w)
            for zb, d, w in zip(zbar, designs, w_frozen)
        ])
        if log:
            history.append(z.copy())
    xhat = z @ exp_A_tau.T
    return xhat, (np.stack(history) if log else None)


def error_recursion_oracle(A, designs, graphs, T, tau, xhat_prev, x_prev, mu):
    """Parameter-estimation errors ``eps_i(k)``, ``k = 0..q``, for one window.

    Built from the error dynamics alone, without touching the estimator
    state: ``eps_i(0) = expm(A (T - tau)) (x_i(t_{j-1}) - x(t_{j-1}))`` and
    ``eps_i(k) = P_i mean_{s in N_i} eps_s(k-1) + Q_i mu_i``. Valid for the
    undisturbed plant. Returns ``(eps, final_error)`` with ``eps`` shaped
    ``(q+1, m, n)`` and ``final_error[i] = x_i(t_j) - x(t_j)``.
    """
    labels = graphs[0].vertices
    pos = {v: k for k, v in enumerate(labels)}
    Phi = scipy.linalg.expm(np.asarray(A) * (T - tau))
    eps = [[Phi @ (np.asarray(xi) - np.asarray(x_prev)) for xi in xhat_prev]]
    for g in graphs:
        prev = eps[-1]
        cur = []
        for i in labels:
            d = designs[pos[i]]
            ns = g.neighbors(i)
            acc = sum(prev[pos[s]] for s in ns) / len(ns)
            cur.append(d.P @ acc + d.Q @ mu[pos[i]])
        eps.append(cur)
    eps = np.array(eps)
    final = eps[-1] @ scipy.linalg.expm(np.asarray(A) * tau).T
    return eps, final


def _snap_dropouts(schedule, T):
    snapped = []
    for t, v in schedule.dropouts:
        j = max(1, int(round(t / T)))
        if abs(j * T - t) > 1e-12:
            warnings.warn(f"dropout of agent {v} at t={t:g} moved to event time {j * T:g}",
                          RuntimeWarning, stacklevel=3)
        snapped.append((j * T, v))
    return schedule.with_dropouts(snapped) if snapped != list(schedule.dropouts) else schedule


def _run_generator(A, designs, C_list, disturbance, coordinates):
    """Generator of the stacked flow ``[x; obs_1..obs_m; est_1..est_m; c; s]``.

    In ``"absolute"`` coordinates ``obs_i = w_i`` and ``est_i = x_i``; in
    ``"error"`` coordinates ``obs_i = mu_i = w_i - L_i x`` and
    ``est_i = x_i - x``.
    """
    n = A.shape[0]
    m = len(designs)
    sizes = [d.n_i for d in designs]
    extra = 2 if disturbance is not None else 0
    N = n + sum(sizes) + m * n + extra
    M = np.zeros((N, N))
    M[:n, :n] = A
    osc = N - 2
    bu = disturbance.amplitude * disturbance.b if disturbance is not None else None
    if bu is not None:
        M[:n, osc] = bu
        M[osc, osc + 1] = -disturbance.frequency
        M[osc + 1, osc] = disturbance.frequency
    off = n
    for d, C in zip(designs, C_list):
        k = d.n_i
        M[off:off + k, off:off + k] = d.observer_matrix
        if coordinates == "absolute":
            M[off:off + k, :n] = -d.K @ C
        elif bu is not None:
            M[off:off + k, osc] = -d.L @ bu
        off += k
    for _ in designs:
        M[off:off + n, off:off + n] = A
        if coordinates == "error" and bu is not None:
            M[off:off + n, osc] = -bu
        off += n
    return M


def run(config, coordinates="error"):
    """Simulate the hybrid observer described by ``config``.

    ``coordinates="error"`` (default) propagates the deviations
    ``x_i - x`` and ``w_i - L_i x`` rather than ``x_i`` and ``w_i``, and
    feeds the estimator the translated data. The estimator is affine with
    ``Q_i L_i + P_i = I``, so translating every ``z_i`` by ``p_j`` and every
    ``w_i`` by ``L_i p_j`` commutes with it; the result is the same
    trajectory without the roundoff floor ``eps * |x|`` that an
    exponentially growing plant imposes on absolute coordinates.

    Dropout times are moved to the nearest event time ``t_j``; the agent
    still takes part in window ``j`` and is absent afterwards.
    """
    if coordinates not in ("error", "absolute"):
        raise ValueError("coordinates must be 'error' or 'absolute'")
    cfg = config
    model, designs, p = cfg.model, cfg.designs, cfg.params
    n, m = model.n, model.m
    A = model.A
    schedule = _snap_dropouts(cfg.schedule, p.T)
    dt = cfg.sample_dt
    steps_T = int(round(p.T / dt))
    steps_tau = int(round(p.tau / dt))
    n_events = int(math.floor(cfg.t_end / p.T + 1e-9))
    n_samples = int(round(cfg.t_end / dt)) + 1
    exp_A_tau = numerics.mat_exp(A, p.tau)
    dist = cfg.disturbance
    absolute = coordinates == "absolute"

    # forced response of the plant over one window, as a map of the oscillator state
    forced_tau = None
    if dist is not None and not absolute:
        G = np.zeros((n + 2, n + 2))
        G[:n, :n] = A
        G[:n, n] = dist.amplitude * dist.b
        G[n, n + 1] = -dist.frequency
        G[n + 1, n] = dist.frequency
        forced_tau = numerics.mat_exp(G, p.tau)[:n, n:]

    times = np.arange(n_samples) * dt
    X = np.empty((n_samples, n))
    DEV = np.full((n_samples, m, n), np.nan)
    W = [np.full((n_samples, d.n_i), np.nan) for d in designs]

    active = list(range(1, m + 1))
    x = cfg.x0.copy()
    if absolute:
        obs = {i: cfg.w0[i - 1].copy() for i in active}
        est = {i: cfg.xhat0[i - 1].copy() for i in active}
    else:
        obs = {i: cfg.w0[i - 1] - designs[i - 1].L @ x for i in active}
        est = {i: cfg.xhat0[i - 1] - x for i in active}
    osc = np.array([1.0, 0.0]) if dist is not None else np.zeros(0)
    cache = {}

    def transition(labels):
        key = tuple(labels)
        if key not in cache:
            M = _run_generator(A, [designs[i - 1] for i in labels],
                               [model.C[i - 1] for i in labels], dist, coordinates)
            cache[key] = numerics.mat_exp(M, dt)
        return cache[key]

    def deviation(i):
        return est[i] - x if absolute else est[i]

    def observer_output(i):
        return obs[i] if absolute else obs[i] + designs[i - 1].L @ x

    def mu_of(i):
        return obs[i] - designs[i - 1].L @ x if absolute else obs[i]

    def record(k):
        X[k] = x
        for i in active:
            DEV[k, i - 1] = deviation(i)
            W[i - 1][k] = observer_output(i)

    def step():
        nonlocal x, osc
        parts = [x] + [obs[i] for i in active] + [est[i] for i in active] + [osc]
        out = transition(active) @ np.concatenate(parts)
        x = out[:n]
        off = n
        for i in active:
            k = designs[i - 1].n_i
            obs[i] = out[off:off + k]
            off += k
        for i in active:
            est[i] = out[off:off + n]
            off += n
        osc = out[off:]

    def snapshot():
        return np.array([deviation(i) for i in active])

    events = [EventRecord(0, 0.0, tuple(active), x.copy(), x[None, :] + snapshot(),
                          dev=snapshot())]
    record(0)
    k = 0
    for j in range(1, n_events + 1):
        for _ in range(steps_T - steps_tau):
            step()
            k += 1
            record(k)
        x_win = x.copy()
        osc_win = osc.copy()
        dev_win = snapshot()
        mu = [mu_of(i) for i in active]
        graphs = [schedule.graph_at(t) for t in window_times(j, p.T, p.tau, p.q)]
        for g in graphs:
            if list(g.vertices) != active:
                raise AssumptionViolation("dropout", "agent set changed inside a window")
        window_designs = [designs[i - 1] for i in active]
        if absolute:
            z0 = [est[i] for i in active]
            w_frozen = [obs[i] for i in active]
        else:
            z0, w_frozen = dev_win, mu
        est_new, z_log = estimator_window(z0, w_frozen, graphs, window_designs,
                                          exp_A_tau, log=cfg.log_iterations)
        if forced_tau is not None:
            est_new = est_new - (forced_tau @ osc_win)[None, :]
        for _ in range(steps_tau):
            step()
            k += 1
            record(k)
        for row, i in enumerate(active):
            est[i] = est_new[row]
        dev = snapshot()
        events.append(EventRecord(j, j * p.T, tuple(active), x.copy(), x[None, :] + dev,
                                  dev=dev, x_window=x_win, dev_window=dev_win,
                                  mu_window=mu, z_log=z_log))
        gone = schedule.dropped_by(j * p.T)
        if gone & set(active):
            for i in sorted(gone & set(active)):
                active.remove(i)
                del obs[i], est[i]
                DEV[k, i - 1] = np.nan
                W[i - 1][k] = np.nan
            _check_residual(model, schedule, active, j * p.T)
        record(k)

    while k < n_samples - 1:
        step()
        k += 1
        record(k)

    err = np.linalg.norm(DEV, axis=2)
    return SimTrace(times=times, x=X, xhat=X[:, None, :] + DEV, w=W, err=err, events=events,
                    deviation=DEV)


def _check_residual(model, schedule, active, t):
    report = check_joint_observability(model.A, [model.C[i - 1] for i in active])
    if not report.passed:
        warnings.warn(f"surviving agents {active} are not jointly observable after t={t:g}",
                      RuntimeWarning, stacklevel=3)
    schedule.graph_at(t)  # raises or warns per policy if not strongly connected


def fit_rate(trace, t_start, t_end):
    """Negated least-squares slope of ``ln max_i err_i(t)`` on ``[t_start, t_end]``.

    Returns ``inf`` (with a warning) if the error vanishes in the window.
    """
    sel = (trace.times >= t_start - 1e-12) & (trace.times <= t_end + 1e-12)
    e = trace.max_err[sel]
    if e.size < 2:
        raise ValueError("fit window holds fewer than two samples")
    if np.any(e <= 0):
        warnings.warn("zero error inside the fit window", RuntimeWarning, stacklevel=2)
        return math.inf
    slope = np.polyfit(trace.times[sel], np.log(e), 1)[0]
    return float(-slope)


def asymptotic_window(trace, floor=1e-10, start=None):
    """Fit window from ``start`` (default: the first event) to the last time
    the error is above ``floor`` times its initial value."""
    e = trace.max_err
    start = trace.times[1] if start is None else start
    threshold = floor * max(e[0], np.finfo(float).tiny)
    above = np.nonzero(e > threshold)[0]
    end = trace.times[above[-1]] if above.size else start
    return float(start), float(max(end, start))


def error_envelope(trace, config, beta, theta_norms=None):
    """Upper envelope for ``max_i err_i(t)`` from the contraction bounds.

    With ``E_0 = max_i |x_i(0) - x(0)|`` and
    ``E_j = beta E_{j-1} + |Theta_j| max_i |mu_i(t_j - tau)|`` every error
    on ``[t_j, t_{j+1})`` is at most ``exp(zeta (t - t_j)) E_j``.
    ``theta_norms`` maps ``j`` to ``|Theta_j|``.
    """
    p = config.params
    zeta = numerics.zeta(config.model.A)
    E = [float(np.nanmax(trace.err[0]))]
    for ev in trace.events[1:]:
        mu = max(float(np.linalg.norm(v)) for v in ev.mu_window)
        E.append(beta * E[-1] + theta_norms[ev.j] * mu)
    j_of_t = np.minimum(np.floor(trace.times / p.T + 1e-9).astype(int), len(E) - 1)
    since = trace.times - j_of_t * p.T
    return np.array(E)[j_of_t] * np.exp(zeta * since)


def stacked_error(event):
    """``xhat - xbar`` at the event, stacked over agents."""
    return np.asarray(event.dev).ravel()


def stacked_mu(event):
    return np.concatenate(event.mu_window)


def event_block_norm(event, n):
    return block_vector_norm(stacked_error(event), n)
