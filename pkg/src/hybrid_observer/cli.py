"""Command-line entry points.

Exit codes: 0 ok, 2 configuration error, 3 assumption violated,
4 acceptance check failed (``reproduce`` only).
"""

import argparse
import json
import math
import os
import sys
import warnings

import numpy as np

from . import config as cfgmod
from . import simulator
from .exceptions import AssumptionViolation, ConfigError, DesignError
from .network import is_strongly_connected
from .presets import PRESETS, get_preset
from .system_design import check_joint_observability

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSUMPTION = 3
EXIT_ACCEPTANCE = 4


def _write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def cmd_design(config_path, report_path=None, strict=True):
    """Design + certification; returns ``(exit_code, report)``."""
    scenario = cfgmod.load_config(config_path)
    result = cfgmod.design(scenario, strict=strict)
    report_path = report_path or scenario.output.get("report")
    if report_path:
        _write_json(result.report, report_path)
    return EXIT_OK, result.report


def cmd_analyze(config_path):
    scenario = cfgmod.load_config(config_path)
    result = cfgmod.design(scenario, strict=False)
    return EXIT_OK, {"certification": result.report["certification"],
                     "warnings": result.report["warnings"]}


def _simulate(result, out_path, log_iterations=False):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        trace = simulator.run(cfgmod.sim_config(result, log_iterations=log_iterations))
    cfgmod.write_trace(trace, out_path, estimates=result.scenario.trace_estimates)
    if log_iterations:
        stem, _ = os.path.splitext(out_path)
        np.savez(stem + "_iterations.npz",
                 **{f"event_{j}": log for j, log in trace.iteration_log.items()})
    return trace, cfgmod.summarize(trace, result)


def cmd_simulate(config_path, out_path=None, log_iterations=False):
    scenario = cfgmod.load_config(config_path)
    out_path = out_path or scenario.output.get("trace")
    if not out_path:
        raise ConfigError("no trace path given", "output.trace")
    result = cfgmod.design(scenario, strict=False)
    _, summary = _simulate(result, out_path, log_iterations)
    return EXIT_OK, summary


def _value_at(trace, t):
    k = int(np.searchsorted(trace.times, t - 1e-9))
    return float(trace.max_err[min(k, len(trace.times) - 1)])


def preset_checks(name, trace, result):
    """Acceptance checks for a built-in scenario: ``{check: (passed, detail)}``."""
    cert = result.certification.params
    checks = {}
    if name == "paper-example":
        summary = cfgmod.summarize(trace, result)
        rate = summary["fitted_rate"]
        checks["q == 45"] = (cert.q == 45, cert.q)
        checks["r == 9"] = (cert.r == 9, cert.r)
        checks["fitted rate >= lambda - 0.005"] = (
            rate is not None and rate >= cert.lambda_ - 0.005, rate)
        e0 = float(trace.max_err[0])
        checks["final error <= 1e-3 * initial"] = (
            summary["final_max_err"] <= 1e-3 * e0, summary["final_max_err"])
    elif name == "paper-noise":
        sel = (trace.times >= 100 - 1e-9) & (trace.times <= 200 + 1e-9)
        sup = float(np.max(trace.max_err[sel]))
        at100 = _value_at(trace, 100.0)
        checks["bounded on [100, 200]"] = (math.isfinite(sup) and sup <= 10 * at100,
                                           {"sup": sup, "at_100": at100})
    elif name == "resilience4":
        drops = result.schedule.dropouts
        t_drop, v = drops[0]
        survivors = [i for i in range(1, result.model.m + 1) if i != v]
        before = _value_at(trace, t_drop)
        final = float(np.max(trace.err[-1, [i - 1 for i in survivors]]))
        checks["survivor error decays 1e-3"] = (final <= 1e-3 * before,
                                               {"at_drop": before, "final": final})
        g = result.schedule.graph_at(t_drop)
        checks["residual graph strongly connected"] = (is_strongly_connected(g), list(g.vertices))
        obs = check_joint_observability(result.model.A, [result.model.C[i - 1] for i in survivors])
        checks["residual system jointly observable"] = (obs.passed, obs.rank)
    return checks


def cmd_reproduce(preset, outdir):
    raw = get_preset(preset)
    os.makedirs(outdir, exist_ok=True)
    scenario = cfgmod.parse_config(raw)
    result = cfgmod.design(scenario, strict=False)
    cfgmod.dump_config(scenario, os.path.join(outdir, f"{preset}.config.json"))
    _write_json(result.report, os.path.join(outdir, f"{preset}.design.json"))
    trace, summary = _simulate(result, os.path.join(outdir, f"{preset}.trace.csv"))
    checks = preset_checks(preset, trace, result)
    acceptance = {
        "preset": preset,
        "summary": summary,
        "checks": {k: {"passed": bool(ok), "value": val} for k, (ok, val) in checks.items()},
        "passed": all(ok for ok, _ in checks.values()),
    }
    _write_json(acceptance, os.path.join(outdir, f"{preset}.acceptance.json"))
    return (EXIT_OK if acceptance["passed"] else EXIT_ACCEPTANCE), acceptance


def build_parser():
    parser = argparse.ArgumentParser(prog="hybrid-observer",
                                     description="Design and simulate hybrid distributed observers.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="synthesize agent observers and certify parameters")
    p.add_argument("--config", required=True)
    p.add_argument("--report")

    p = sub.add_parser("simulate", help="run the hybrid observer and write a CSV trace")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--log-iterations", action="store_true")

    p = sub.add_parser("analyze", help="certification only")
    p.add_argument("--config", required=True)

    p = sub.add_parser("reproduce", help="run a built-in scenario with its acceptance checks")
    p.add_argument("preset", choices=sorted(PRESETS))
    p.add_argument("--outdir", default=".")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "design":
            code, out = cmd_design(args.config, args.report)
        elif args.command == "simulate":
            code, out = cmd_simulate(args.config, args.out, args.log_iterations)
        elif args.command == "analyze":
            code, out = cmd_analyze(args.config)
        else:
            code, out = cmd_reproduce(args.preset, args.outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AssumptionViolation, DesignError) as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    print(json.dumps(out, default=_json_default))
    return code


if __name__ == "__main__":
    sys.exit(main())
