"""Scenario configuration files, design reports and trace serialization.

Scenario files are JSON with ``"schema": 1``; matrices are row-major
nested lists. A minimal file::

    {
      "schema": 1,
      "system": {"A": [[0, 1], [-1, 0]], "C": [[[1, 0]], [[0, 1]]]},
      "graph": {"mode": "static", "neighbors": {"1": [1, 2], "2": [1, 2]}},
      "observer": {"T": 1.0, "tau": 0.5},
      "initial": {"x0": [1, 0]}
    }
"""

import copy
import dataclasses
import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import analysis, numerics
from .exceptions import AssumptionViolation, ConfigError
from .network import Digraph, GraphSchedule, is_strongly_connected
from .simulator import Disturbance, SimConfig
from .system_design import SystemModel, build_L, design_agent, check_joint_observability

__all__ = [
    "ScenarioConfig",
    "DesignResult",
    "parse_config",
    "load_config",
    "dump_config",
    "build_schedule",
    "design",
    "sim_config",
    "write_trace",
    "read_trace",
    "summarize",
]

SCHEMA_VERSION = 1


def _matrix(value, where):
    try:
        return numerics.as_matrix(value, where)
    except Exception as exc:
        raise ConfigError(f"not a finite numeric matrix ({exc})", where) from None


def _vector(value, where, size=None):
    try:
        arr = np.asarray(value, dtype=float).ravel()
    except (TypeError, ValueError):
        raise ConfigError("not a numeric vector", where) from None
    if not np.all(np.isfinite(arr)):
        raise ConfigError("non-finite entries", where)
    if size is not None and arr.size != size:
        raise ConfigError(f"expected {size} entries, got {arr.size}", where)
    return arr


def _optional_list(raw, where, convert):
    if raw is None:
        return None
    if not isinstance(raw, list):
        raise ConfigError("expected a list (one entry per agent)", where)
    return [None if v is None else convert(v, f"{where}[{k}]") for k, v in enumerate(raw)]


def _number(raw, where, positive=False, integer=False):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError("expected a number", where)
    if integer and int(raw) != raw:
        raise ConfigError("expected an integer", where)
    if not math.isfinite(raw) or (positive and raw <= 0):
        raise ConfigError("expected a positive finite number" if positive else "not finite", where)
    return int(raw) if integer else float(raw)


def _graph(raw, where):
    if not isinstance(raw, dict):
        raise ConfigError("expected an adjacency mapping", where)
    try:
        return Digraph({int(k): [int(v) for v in vs] for k, vs in raw.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), where) from None


@dataclass
class ScenarioConfig:
    """Parsed, normalised scenario. ``to_dict`` inverts :func:`parse_config`."""

    A: np.ndarray
    C: list
    graph: dict
    T: float
    tau: float
    x0: np.ndarray
    q: int = None
    omega: float = None
    L: list = None
    K: list = None
    G: list = None
    w0: list = None
    xhat0: list = None
    disturbance: dict = None
    dropout: list = field(default_factory=list)
    connectivity_policy: str = "error"
    t_end: float = 100.0
    sample_dt: float = None
    trace_estimates: bool = False
    contraction_method: str = "auto"
    output: dict = field(default_factory=dict)
    seed: int = 0
    name: str = ""

    def to_dict(self):
        def mat(M):
            return np.asarray(M, dtype=float).tolist()

        def opt_list(items):
            return None if items is None else [None if v is None else mat(v) for v in items]

        observer = {"T": self.T, "tau": self.tau, "q": self.q, "omega": self.omega}
        for key in ("L", "K", "G"):
            if getattr(self, key) is not None:
                observer[key] = opt_list(getattr(self, key))
        out = {
            "schema": SCHEMA_VERSION,
            "name": self.name,
            "seed": self.seed,
            "system": {"A": mat(self.A), "C": [mat(C) for C in self.C]},
            "graph": copy.deepcopy(self.graph),
            "connectivity_policy": self.connectivity_policy,
            "dropout": [{"t": t, "vertex": v} for t, v in self.dropout],
            "observer": observer,
            "initial": {
                "x0": mat(self.x0),
                "w0": opt_list(self.w0),
                "xhat0": opt_list(self.xhat0),
            },
            "disturbance": copy.deepcopy(self.disturbance),
            "simulation": {
                "t_end": self.t_end,
                "sample_dt": self.sample_dt,
                "trace_estimates": self.trace_estimates,
            },
            "analysis": {"contraction_method": self.contraction_method},
            "output": dict(self.output),
        }
        return out


def _parse_graph(raw, m):
    if not isinstance(raw, dict):
        raise ConfigError("expected an object", "graph")
    if "mode" not in raw:
        raw = {"mode": "static", "neighbors": raw}
    mode = raw["mode"]
    if mode == "static":
        g = _graph(raw.get("neighbors"), "graph.neighbors")
        return {"mode": "static", "neighbors": g.to_dict()}
    if mode == "piecewise":
        pieces = raw.get("pieces")
        if not isinstance(pieces, list) or not pieces:
            raise ConfigError("expected a non-empty list", "graph.pieces")
        out = []
        for k, piece in enumerate(pieces):
            where = f"graph.pieces[{k}]"
            if not isinstance(piece, dict):
                raise ConfigError("expected an object", where)
            t = _number(piece.get("t"), f"{where}.t")
            g = _graph(piece.get("neighbors"), f"{where}.neighbors")
            out.append({"t": t, "neighbors": g.to_dict()})
        return {"mode": "piecewise", "pieces": out}
    if mode == "generator":
        density = _number(raw.get("density", 0.0), "graph.density")
        period = _number(raw.get("period", 1.0), "graph.period", positive=True)
        if not 0.0 <= density <= 1.0:
            raise ConfigError("must lie in [0, 1]", "graph.density")
        return {"mode": "generator", "density": density, "period": period}
    raise ConfigError(f"unknown mode {mode!r}", "graph.mode")


def parse_config(raw):
    """Validate a scenario mapping and return a :class:`ScenarioConfig`.

    Errors carry the dotted path of the offending field.
    """
    if not isinstance(raw, dict):
        raise ConfigError("top level must be an object")
    if raw.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema {raw.get('schema')!r}", "schema")
    system = raw.get("system")
    if not isinstance(system, dict):
        raise ConfigError("missing", "system")
    A = _matrix(system.get("A"), "system.A")
    if A.shape[0] != A.shape[1]:
        raise ConfigError("must be square", "system.A")
    n = A.shape[0]
    C_raw = system.get("C")
    if not isinstance(C_raw, list) or not C_raw:
        raise ConfigError("expected a non-empty list of matrices", "system.C")
    C = []
    for k, c in enumerate(C_raw):
        Ck = _matrix(c, f"system.C[{k}]")
        if Ck.shape[1] != n:
            raise ConfigError(f"needs {n} columns", f"system.C[{k}]")
        C.append(Ck)
    m = len(C)

    graph = _parse_graph(raw.get("graph"), m)

    obs = raw.get("observer")
    if not isinstance(obs, dict):
        raise ConfigError("missing", "observer")
    T = _number(obs.get("T"), "observer.T", positive=True)
    tau = _number(obs.get("tau"), "observer.tau", positive=True)
    if tau >= T:
        raise ConfigError("must be smaller than observer.T", "observer.tau")
    q = obs.get("q")
    q = None if q is None else _number(q, "observer.q", positive=True, integer=True)
    omega = obs.get("omega")
    omega = None if omega is None else _number(omega, "observer.omega", positive=True)
    L = _optional_list(obs.get("L"), "observer.L", _matrix)
    K = _optional_list(obs.get("K"), "observer.K", _matrix)
    G = _optional_list(obs.get("G"), "observer.G", _matrix)
    for key, items in (("L", L), ("K", K), ("G", G)):
        if items is not None and len(items) != m:
            raise ConfigError(f"expected {m} entries", f"observer.{key}")

    init = raw.get("initial") or {}
    if "x0" not in init:
        raise ConfigError("missing", "initial.x0")
    x0 = _vector(init["x0"], "initial.x0", n)
    w0 = _optional_list(init.get("w0"), "initial.w0", _vector)
    xhat0 = _optional_list(init.get("xhat0"), "initial.xhat0", lambda v, w: _vector(v, w, n))
    for key, items in (("w0", w0), ("xhat0", xhat0)):
        if items is not None and len(items) != m:
            raise ConfigError(f"expected {m} entries", f"initial.{key}")

    dist = raw.get("disturbance")
    if dist is not None:
        if not isinstance(dist, dict):
            raise ConfigError("expected an object or null", "disturbance")
        dist = {
            "b": _vector(dist.get("b"), "disturbance.b", n).tolist(),
            "amplitude": _number(dist.get("amplitude", 1.0), "disturbance.amplitude"),
            "frequency": _number(dist.get("frequency", 0.0), "disturbance.frequency"),
        }

    dropout = []
    for k, ev in enumerate(raw.get("dropout") or []):
        where = f"dropout[{k}]"
        if not isinstance(ev, dict):
            raise ConfigError("expected {\"t\": ..., \"vertex\": ...}", where)
        t = _number(ev.get("t"), f"{where}.t")
        v = _number(ev.get("vertex"), f"{where}.vertex", integer=True)
        if not 1 <= v <= m:
            raise ConfigError(f"vertex must lie in 1..{m}", f"{where}.vertex")
        dropout.append((t, v))

    policy = raw.get("connectivity_policy", "error")
    if policy not in ("error", "warn"):
        raise ConfigError("must be 'error' or 'warn'", "connectivity_policy")

    sim = raw.get("simulation") or {}
    t_end = _number(sim.get("t_end", 100.0), "simulation.t_end", positive=True)
    sample_dt = sim.get("sample_dt")
    sample_dt = None if sample_dt is None else _number(sample_dt, "simulation.sample_dt",
                                                       positive=True)
    method = (raw.get("analysis") or {}).get("contraction_method", "auto")
    if method not in ("auto", "exact", "sampled"):
        raise ConfigError("must be auto, exact or sampled", "analysis.contraction_method")
    seed = raw.get("seed", 0)
    seed = _number(seed, "seed", integer=True)

    return ScenarioConfig(
        A=A, C=C, graph=graph, T=T, tau=tau, x0=x0, q=q, omega=omega, L=L, K=K, G=G,
        w0=w0, xhat0=xhat0, disturbance=dist, dropout=dropout,
        connectivity_policy=policy, t_end=t_end, sample_dt=sample_dt,
        trace_estimates=bool(sim.get("trace_estimates", False)),
        contraction_method=method, output=dict(raw.get("output") or {}),
        seed=seed, name=str(raw.get("name", "")),
    )


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return parse_config(raw)


def dump_config(scenario, path):
    with open(path, "w") as fh:
        json.dump(scenario.to_dict(), fh, indent=2)


def build_schedule(scenario):
    m = len(scenario.C)
    g = scenario.graph
    kw = {"dropouts": scenario.dropout, "policy": scenario.connectivity_policy}
    if g["mode"] == "static":
        schedule = GraphSchedule.static(_graph(g["neighbors"], "graph.neighbors"), **kw)
    elif g["mode"] == "piecewise":
        graphs = [_graph(p["neighbors"], "graph.pieces") for p in g["pieces"]]
        try:
            schedule = GraphSchedule.piecewise([p["t"] for p in g["pieces"]], graphs, **kw)
        except ValueError as exc:
            raise ConfigError(str(exc), "graph.pieces") from None
    else:
        schedule = GraphSchedule.generator(m, g["density"], scenario.seed, g["period"], **kw)
    if tuple(schedule.labels) != tuple(range(1, m + 1)):
        raise ConfigError(f"graph vertices must be exactly 1..{m}", "graph")
    return schedule


def _listed_graphs(schedule):
    return list(schedule.graphs) if schedule.mode != "generator" else []


@dataclass
class DesignResult:
    scenario: ScenarioConfig
    model: SystemModel
    designs: list
    certification: analysis.Certification
    schedule: GraphSchedule
    report: dict


def _auto_omega(threshold):
    return max(1.0, 2.0 * threshold)


def design(scenario, strict=True):
    """Synthesize agent designs and certify the observer parameters.

    Raises :class:`AssumptionViolation` for a zero channel, a system that
    is not jointly observable, a listed graph that is not strongly
    connected or (with ``strict``) a non-positive certified rate.
    """
    model = SystemModel(scenario.A, tuple(scenario.C))
    schedule = build_schedule(scenario)
    for g in _listed_graphs(schedule):
        if not is_strongly_connected(g):
            raise AssumptionViolation("strong_connectivity", f"listed graph {g!r} is not strongly connected")
    m = model.m
    Ls = scenario.L or [None] * m
    Ks = scenario.K or [None] * m
    Gs = scenario.G or [None] * m
    Ls = [build_L(C, model.A) if L is None else L for C, L in zip(model.C, Ls)]

    # gamma depends on the L_i only (orthogonal projections, no G); get it before placing gains
    probe = [design_agent(C, model.A, L=L, K=np.zeros((L.shape[0], C.shape[0])))
             for C, L in zip(model.C, Ls)]
    contraction = analysis.contraction_coefficient([d.P for d in probe],
                                                   method=scenario.contraction_method)
    z = numerics.zeta(model.A)
    q = scenario.q or analysis.min_iterations(z, scenario.T, contraction.gamma, m)
    r = analysis.iteration_quotient(q, m)
    omega = scenario.omega
    if omega is None and any(K is None for K in Ks):
        omega = _auto_omega(analysis.min_observer_rate(r, scenario.T, contraction.gamma, z))
    designs = [design_agent(C, model.A, omega=omega, L=L, K=K, G=G)
               for C, L, K, G in zip(model.C, Ls, Ks, Gs)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        cert = analysis.certify(model, designs, scenario.T, scenario.tau, q=q, omega=omega,
                                strict=strict, contraction=contraction)
    if any(G is not None for G in Gs):
        note = "gain matrices G_i given: certification uses the orthogonal projections"
        cert = dataclasses.replace(cert, warnings=cert.warnings + (note,))
    report = design_report(scenario, model, designs, cert)
    return DesignResult(scenario, model, designs, cert, schedule, report)


def _complex_list(values):
    return [[float(v.real), float(v.imag)] for v in values]


def design_report(scenario, model, designs, cert):
    obs = check_joint_observability(model)
    agents = []
    for i, (d, C) in enumerate(zip(designs, model.C), start=1):
        agents.append({
            "agent": i,
            "n_i": d.n_i,
            "residuals": d.residuals(C, model.A),
            "observer_eigenvalues": _complex_list(d.observer_spectrum().eigenvalues),
        })
    return {
        "name": scenario.name,
        "n": model.n,
        "m": model.m,
        "assumptions": {
            "nonzero_channels": True,
            "joint_observability": {"rank": obs.rank, "n": obs.n,
                                    "channel_ranks": list(obs.channel_ranks)},
            "strong_connectivity": True,
            "positive_rate": cert.params.lambda_ > 0,
        },
        "agents": agents,
        "certification": cert.to_dict(),
        "warnings": list(cert.warnings),
    }


def sim_config(result, log_iterations=False):
    sc = result.scenario
    dist = None
    if sc.disturbance is not None:
        dist = Disturbance(np.asarray(sc.disturbance["b"]), sc.disturbance["amplitude"],
                           sc.disturbance["frequency"])
    return SimConfig(
        model=result.model, designs=result.designs, params=result.certification.params,
        schedule=result.schedule, x0=sc.x0, w0=sc.w0, xhat0=sc.xhat0, disturbance=dist,
        t_end=sc.t_end, sample_dt=sc.sample_dt, log_iterations=log_iterations,
    )


def trace_header(m, n, estimates=False):
    cols = ["t"] + [f"err_{i}" for i in range(1, m + 1)] + [f"x_{k}" for k in range(1, n + 1)]
    if estimates:
        cols += [f"xhat_{i}_{k}" for i in range(1, m + 1) for k in range(1, n + 1)]
    return cols


def write_trace(trace, path, estimates=False):
    """CSV with ``t, err_1..err_m, x_1..x_n`` (plus ``xhat_i_k`` columns)."""
    N, m, n = trace.xhat.shape
    cols = [trace.times[:, None], trace.err, trace.x]
    if estimates:
        cols.append(trace.xhat.reshape(N, m * n))
    data = np.hstack(cols)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(trace_header(m, n, estimates))
        for row in data:
            writer.writerow([format(v, ".17g") for v in row])


def read_trace(path):
    """Return ``(header, data)`` from a trace CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader])
    return header, data


def _finite_or_none(v):
    return float(v) if math.isfinite(v) else None


def summarize(trace, result):
    """Summary mapping with keys ``fitted_rate``, ``lambda_certified``,
    ``final_max_err`` and ``events``."""
    from .simulator import asymptotic_window, fit_rate

    e0 = trace.max_err[0]
    if e0 > 0:
        t0, t1 = asymptotic_window(trace)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            rate = fit_rate(trace, t0, t1) if t1 > t0 else math.nan
    else:
        rate = math.inf
    return {
        "fitted_rate": _finite_or_none(rate),
        "lambda_certified": _finite_or_none(result.certification.params.lambda_),
        "final_max_err": float(trace.max_err[-1]),
        "events": len(trace.events) - 1,
    }
