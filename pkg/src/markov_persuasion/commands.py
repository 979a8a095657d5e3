"""Scenario-level commands that write deterministic JSON and CSV artifacts."""
from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import numpy as np

from .absorbing import build_region_D, is_absorbing
from .concav import cav
from .errors import PreconditionError
from .markov import homothety_test, mixing_time, operator_norms
from .scenario import Scenario
from .strategy import (Babbling, BlockStrategy, ConfinedStrategy, FullRevelation, GreedyStatic,
                       confined_chain_construction, ergodic_check, simulate_seeds)
from .value import (estimate_v_infinity, finite_horizon_value, probe_points, sandwich_bounds,
                    effective_belief, value_iteration)

log = logging.getLogger(__name__)

MIXING_EPS = (1.0, 0.5, 0.1, 0.01, 0.001)
SWEEP_LAMBDAS = (0.5, 0.9, 0.99, 0.999)
HORIZON_POWERS = range(0, 11)
SIM_MODES = ("confined", "block", "greedy", "babbling", "full")


class Context:
    """Materialized scenario objects shared by the commands."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.tol = scenario.tol()
        self.M = scenario.matrix()
        self.M.require_ergodic()
        self.grid = scenario.grid()
        self.u = scenario.utility_function(self.grid)
        self.env = cav(self.u)
        self._region = None

    @property
    def pi(self):
        return self.M.stationary

    @property
    def region(self):
        if self._region is None:
            self._region = build_region_D(self.u, self.M, self.tol, self.env)
        return self._region


def _out_dir(root, scenario: Scenario, command: str) -> Path:
    d = Path(root) / scenario.name / command
    d.mkdir(parents=True, exist_ok=True)
    return d


def _num(x):
    return repr(float(x))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(_jsonable(obj), indent=2) + "\n")
    return path


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(x) if isinstance(x, (float, np.floating)) else x for x in row])
    return path


def lambda_label(lam: float) -> str:
    return f"{lam:g}"


def coord_header(k: int, prefix: str = "p") -> list[str]:
    return [f"{prefix}{i}" for i in range(k)]


# ------------------------------------------------------------------ analyze

def analysis(ctx: Context) -> dict:
    M, u, env, region = ctx.M, ctx.u, ctx.env, ctx.region
    pi = ctx.pi
    norms = operator_norms(M)
    hom = homothety_test(M, ctx.tol.num)
    mixing = {}
    for eps in MIXING_EPS:
        mixing[repr(eps)] = mixing_time(M, eps, ctx.tol.mixing_cap)
    nodes = u.grid.nodes
    pieces = []
    for pc in region.pieces:
        pieces.append({
            "z": pc.hyperplane.z,
            "slope": pc.hyperplane.slope if M.k == 2 else None,
            "contact_set": nodes[pc.contact],
            "absorbing_subset": nodes[pc.absorbing],
            "hull_vertices": pc.vertices,
        })
    imax = int(np.argmax(u.values))
    return {
        "scenario": ctx.scenario.name,
        "states": M.k,
        "grid_nodes": len(u.grid),
        "stationary": pi,
        "irreducible": M.irreducible,
        "aperiodic": M.aperiodic,
        "mixing_times": mixing,
        "operator_norms": {"l1": norms.l1, "l2": norms.l2, "linf": norms.linf,
                           "l2_exceeds_one": norms.l2_exceeds_one},
        "homothety": {"is_homothety": hom.is_homothety, "ratio": hom.ratio,
                      "per_state_ratios": hom.per_state_ratios, "residual": hom.residual},
        "u_at_stationary": u(pi),
        "cav_at_stationary": env(pi),
        "u_max": {"value": float(u.values[imax]), "at": nodes[imax]},
        "u_min": float(u.values.min()),
        "hyperplanes": pieces,
        "region_D": {"polytopes": region.polytopes, "r_D": region.r_D,
                     "contains_stationary": bool(region.nonempty and region.contains(pi))},
        "verdict": {
            "question": "v_inf = Cav u(pi_M)?",
            "answer": "YES" if region.maximal else "NO",
            "reason": ("a contact set contains an absorbing set" if region.maximal
                       else "no contact set contains an absorbing set"),
        },
    }


def run_analyze(scenario: Scenario, out) -> dict:
    ctx = Context(scenario)
    report = analysis(ctx)
    d = _out_dir(out, scenario, "analyze")
    write_json(d / "report.json", report)
    log.info("analysis written to %s", d)
    return report


# ------------------------------------------------------------------ value

def value_table(ctx: Context, lam: float, v0=None):
    """Rows ``(p..., value, residual, closed_form, lower, upper)`` for every grid node."""
    nodes = ctx.grid.nodes
    vf = value_iteration(ctx.u, ctx.M, lam, ctx.tol, v0=v0)
    region = ctx.region
    closed = np.full(len(nodes), np.nan)
    if region.maximal:
        inside = np.asarray(region.contains(nodes, ctx.tol.num))
        if inside.any():
            closed[inside] = ctx.env(effective_belief(nodes[inside], ctx.M, lam))
    lower = np.full(len(nodes), np.nan)
    upper = np.full(len(nodes), np.nan)
    if region.r_D > 0:
        for i, q in enumerate(nodes):
            b = sandwich_bounds(q, ctx.u, ctx.M, lam, region, ctx.env)
            lower[i], upper[i] = b.lower, b.upper
    rows = []
    for i, q in enumerate(nodes):
        rows.append(list(map(float, q)) + [float(vf.values[i]), float(vf.residual)]
                    + ["" if np.isnan(x) else float(x) for x in (closed[i], lower[i], upper[i])])
    return vf, rows


def run_value(scenario: Scenario, out) -> dict:
    ctx = Context(scenario)
    d = _out_dir(out, scenario, "value")
    k = ctx.M.k
    header = coord_header(k) + ["value", "residual", "closed_form", "lower", "upper"]
    summary = {"lambdas": {}, "horizons": {}}
    v0 = None
    for lam in sorted(scenario.lambdas):
        vf, rows = value_table(ctx, lam, v0)
        v0 = vf.values
        write_csv(d / f"values_lambda_{lambda_label(lam)}.csv", header, rows)
        summary["lambdas"][lambda_label(lam)] = {
            "iterations": vf.iterations, "residual": vf.residual, "value_at_stationary": vf(ctx.pi)}
    horizons = [2**j for j in HORIZON_POWERS]
    vs = finite_horizon_value(ctx.u, ctx.M, max(horizons))
    for N in horizons:
        v = vs[N - 1]
        rows = [list(map(float, q)) + [float(v.values[i]), 0.0] for i, q in enumerate(ctx.grid.nodes)]
        write_csv(d / f"values_N_{N}.csv", coord_header(k) + ["value", "residual"], rows)
        summary["horizons"][str(N)] = v(ctx.pi)
    est = estimate_v_infinity(ctx.u, ctx.M, tol=ctx.tol)
    summary["v_infinity"] = {
        "estimate": est.value, "cav_at_stationary": est.cav_at_pi, "gap": est.gap,
        "richardson": est.richardson, "lambda_values": est.lambda_values,
        "lambdas": est.lambdas, "probe_points": est.points, "diagnostics": est.diagnostics,
    }
    write_json(d / "summary.json", summary)
    return summary


# ------------------------------------------------------------------ simulate

def _confined_certificate(ctx: Context):
    for pc in ctx.region.pieces:
        if len(pc.absorbing):
            return is_absorbing(ctx.grid.nodes[pc.absorbing], ctx.M, ctx.tol)
    raise PreconditionError("no contact set contains an absorbing set; confined play is unavailable")


def run_simulate(scenario: Scenario, out, mode: str = "confined", steps: int | None = None,
                 trace_steps: int = 1000, eps: float = 0.05) -> dict:
    ctx = Context(scenario)
    d = _out_dir(out, scenario, "simulate")
    seeds = list(scenario.seeds)
    summary = {"mode": mode, "seeds": seeds, "rng": "PCG64/SeedSequence(seed)"}
    pi = ctx.pi
    if mode == "confined":
        steps = 100_000 if steps is None else steps
        cert = _confined_certificate(ctx)
        chain = confined_chain_construction(cert, ctx.M, pi, ctx.tol)
        rep = ergodic_check(chain, ctx.u, steps, seeds)
        summary.update({
            "steps": steps,
            "Q": chain.Q, "W_R": chain.W_R, "nu": chain.nu,
            "nu_P_R_residual": chain.residual,
            "cav_at_stationary": ctx.env(pi),
            **rep.summary(),
            "cesaro_mean": float(rep.cesaro.mean()),
        })
        strategy = ConfinedStrategy(cert, ctx.M, ctx.tol)
        start = chain.nu @ chain.Q
    else:
        steps = 10_000 if steps is None else steps
        strategy = {
            "block": lambda: BlockStrategy(ctx.u, ctx.M, eps, ctx.tol),
            "greedy": lambda: GreedyStatic(ctx.u, ctx.tol),
            "babbling": Babbling,
            "full": FullRevelation,
        }[mode]()
        start = pi
        traces = simulate_seeds(start, strategy, ctx.M, ctx.u, steps, seeds)
        ces = np.array([t.cesaro() for t in traces])
        summary.update({
            "steps": steps,
            "per_seed": [t.summary() for t in traces],
            "cesaro_mean": float(ces.mean()),
            "cesaro_min": float(ces.min()),
            "cesaro_max": float(ces.max()),
            "cav_at_stationary": ctx.env(pi),
        })
        if mode == "block":
            summary.update({"eps": eps, "play_stages": strategy.N, "silent_stages": strategy.T,
                            "v_limit": strategy.v_limit})
    n_trace = min(trace_steps, steps)
    if n_trace > 0:
        for t in simulate_seeds(start, strategy, ctx.M, ctx.u, n_trace, seeds):
            t.write_csv(d / f"trace_seed_{t.seed}.csv")
    write_json(d / "summary.json", summary)
    return summary


# ------------------------------------------------------------------ figures

def run_figures(scenario: Scenario, out) -> dict:
    ctx = Context(scenario)
    d = _out_dir(out, scenario, "figures")
    k = ctx.M.k
    nodes = ctx.grid.nodes
    rows = [list(map(float, q)) + [float(ctx.u.values[i]), float(ctx.env.values[i])]
            for i, q in enumerate(nodes)]
    write_csv(d / "utility_envelope.csv", coord_header(k) + ["u", "cav_u"], rows)
    rows = []
    for j, V in enumerate(ctx.region.polytopes):
        for i, v in enumerate(V):
            rows.append([j, i] + list(map(float, v)))
    write_csv(d / "region_D.csv", ["polytope", "vertex"] + coord_header(k), rows)
    pts = probe_points(k, ctx.pi)
    labels = [f"e{i}" for i in range(k)] + ["center", "stationary"]
    rows = []
    v0 = None
    for lam in SWEEP_LAMBDAS:
        vf = value_iteration(ctx.u, ctx.M, lam, ctx.tol, v0=v0)
        v0 = vf.values
        vals = vf(pts)
        spread = float(np.ptp(vals))
        for lab, q, v in zip(labels, pts, vals):
            rows.append([lam, lab] + list(map(float, q)) + [float(v), spread])
    write_csv(d / "lambda_sweep.csv", ["lambda", "point"] + coord_header(k) + ["value", "spread"], rows)
    return {"files": sorted(p.name for p in d.iterdir())}


def run_all(scenario: Scenario, out, **sim_kw) -> dict:
    return {
        "analyze": run_analyze(scenario, out)["verdict"],
        "value": run_value(scenario, out)["v_infinity"]["estimate"],
        "simulate": run_simulate(scenario, out, **sim_kw)["cesaro_mean"],
        "figures": run_figures(scenario, out)["files"],
    }
