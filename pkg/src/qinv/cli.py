"""Config-driven command line: ``qinv <subcommand> --config run.json [flags]``.

A run is described by one JSON file.  It names either the built-in
two-qubit dephasing scenario (``"scenario": "dephasing2q"`` or a scenario
descriptor object) or a general ``model``::

    {
      "model": {
        "dim": 2,
        "hamiltonian": [{"matrix": {"dim": 2, "re": [[1, 0], [0, -1]]},
                         "schedule": {"kind": "constant", "value": 0.5}}],
        "lindblad": [{"operator": {"dim": 2, "re": [[1, 0], [0, -1]]},
                      "rate": 0.1}]
      },
      "initial_state": {"dim": 2, "re": [[0.5, 0.5], [0.5, 0.5]]},
      "initial_invariant": {"dim": 2, "re": [[0, 1], [1, 0]]},
      "grid": {"T": 2.0, "steps": 4000},
      "output": {"path": "out.csv", "format": "csv"}
    }

Exit codes: 0 when every verification passes, 1 when one fails, 2 for
usage or configuration errors.  Verifications print one ``PASS``/``FAIL``
line each on stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, replace

import jsonschema
import numpy as np

from . import export
from .blocks import (BlockInvariant, BlockModel, assemble_invariant, complement_eigenflow,
                     propagate_IC, propagate_ID, verify_full_invariant)
from .dephasing import (BLOCK_SX, BLOCK_SY, BLOCK_SZ, DephasingScenario,
                        build_two_qubit_model, compare_analytic_numeric)
from .dfs import (DFS_TOL, block_decompose, compute_Heff, dfs_condition_residual,
                  find_static_dfs)
from .errors import ConfigError, IntegrationQualityError, QinvError
from .lindblad import (DRIFT_TOL, PSD_TOL, TRACE_TOL, LindbladModel, eigenflow,
                       expectation_series, invariant_residual, propagate_invariant,
                       propagate_state, time_grid)
from .operators import (DEGENERACY_TOL, HERMITIAN_TOL, SIGMA_X, SIGMA_Z, embed, is_hermitian,
                        matrix_from_literal, matrix_to_literal, tensor_product)
from .schedules import Schedule

log = logging.getLogger("qinv")

COMMANDS = ("propagate-state", "propagate-invariant", "verify-invariant", "find-dfs",
            "block-decompose", "propagate-blocks", "eigenflow", "example-dephasing")
DEFAULT_STEPS = 4000
DEFAULT_T = 2.0

DEFAULT_TOLERANCES = {
    "trace": TRACE_TOL,
    "psd": PSD_TOL,
    "drift": DRIFT_TOL,
    "dfs": DFS_TOL,
    "degeneracy": DEGENERACY_TOL,
    "residual": 1e-5,          # finite-difference invariant residual
    "expectation": 1e-6,       # constancy of Tr(I rho)
    "eigenflow": 1e-5,
    "eig_drift": 1e-8,         # DFS-block spectrum
    "offdiag": 1e-7,           # off-diagonal block of a directly propagated invariant
    "analytic": 1e-5,          # numeric vs closed-form dephasing solution
    "growth": 0.01,
}
# measured ratio of residuals at dt and dt/2 for a second-order floor
ORDER_RATIO_BAND = (3.5, 4.5)

# --- schema -------------------------------------------------------------------

_NUMBER = {"type": "number"}
_REAL_ROWS = {"type": "array", "items": {"type": "array", "items": _NUMBER}}
MATRIX_SCHEMA = {
    "type": "object",
    "properties": {"dim": {"type": "integer", "minimum": 1, "maximum": 64},
                   "re": _REAL_ROWS, "im": _REAL_ROWS},
    "required": ["dim", "re"],
    "additionalProperties": False,
}
_SCHEDULE_KINDS = {
    "constant": ({"value": _NUMBER}, ["value"]),
    "polynomial": ({"coeffs": {"type": "array", "items": _NUMBER, "minItems": 1}},
                   ["coeffs"]),
    "sinusoid": ({"amplitude": _NUMBER, "omega": {"type": "number", "not": {"const": 0}},
                  "phase": _NUMBER, "offset": _NUMBER}, ["amplitude", "omega"]),
    "table": ({"times": {"type": "array", "items": _NUMBER, "minItems": 2},
               "values": {"type": "array", "items": _NUMBER, "minItems": 2}},
              ["times", "values"]),
}
# a bare number is a constant; objects are checked against their own kind
SCHEDULE_SCHEMA = {
    "type": ["number", "object"],
    "if": {"type": "object"},
    "then": {
        "required": ["kind"],
        "properties": {"kind": {"enum": list(_SCHEDULE_KINDS)}},
        "allOf": [
            {"if": {"properties": {"kind": {"const": kind}}},
             "then": {"properties": {"kind": True, **props}, "required": req,
                      "additionalProperties": False}}
            for kind, (props, req) in _SCHEDULE_KINDS.items()
        ],
    },
}
_BLOCH = {"type": "array", "items": _NUMBER, "minItems": 3, "maxItems": 3}
SCENARIO_SCHEMA = {
    "oneOf": [
        {"const": "dephasing2q"},
        {"type": "object", "additionalProperties": False,
         "properties": {"g12": SCHEDULE_SCHEMA, "Bz": SCHEDULE_SCHEMA,
                        "gamma": {"type": "number", "minimum": 0},
                        "ID0": _BLOCH, "IC0": _BLOCH,
                        "T": {"type": "number", "exclusiveMinimum": 0},
                        "steps": {"type": "integer", "minimum": 1}}},
    ]
}
MODEL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["dim"],
    "properties": {
        "dim": {"type": "integer", "minimum": 1, "maximum": 64},
        "hamiltonian": {"type": "array", "items": {
            "type": "object", "additionalProperties": False,
            "required": ["matrix"],
            "properties": {"matrix": MATRIX_SCHEMA, "schedule": SCHEDULE_SCHEMA}}},
        "lindblad": {"type": "array", "items": {
            "type": "object", "additionalProperties": False,
            "required": ["operator"],
            "properties": {"operator": MATRIX_SCHEMA, "rate": SCHEDULE_SCHEMA}}},
    },
}
CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "scenario": SCENARIO_SCHEMA,
        "model": MODEL_SCHEMA,
        "grid": {"type": "object", "additionalProperties": False,
                 "properties": {"T": {"type": "number", "exclusiveMinimum": 0},
                                "steps": {"type": "integer", "minimum": 1}}},
        "tolerances": {"type": "object", "additionalProperties": False,
                       "properties": {k: {"type": "number", "exclusiveMinimum": 0}
                                      for k in DEFAULT_TOLERANCES}},
        "output": {"type": "object", "additionalProperties": False,
                   "properties": {"path": {"type": "string", "minLength": 1},
                                  "format": {"enum": ["csv", "json"]},
                                  "full": {"type": "boolean"}}},
        "initial_state": MATRIX_SCHEMA,
        "initial_invariant": MATRIX_SCHEMA,
        "ID0": MATRIX_SCHEMA,
        "IC0": MATRIX_SCHEMA,
        "observables": {"type": "object", "additionalProperties": MATRIX_SCHEMA},
        "dfs": {"type": "object", "additionalProperties": False,
                "properties": {"min_dim": {"type": "integer", "minimum": 1}}},
    },
}


# --- config -------------------------------------------------------------------


@dataclass
class RunConfig:
    """A validated run: the model, its initial data, the grid and the output."""

    command: str | None
    model: LindbladModel
    scenario: DephasingScenario | None
    T: float
    steps: int
    tolerances: dict
    out: str | None
    format: str = "csv"
    full: bool = False
    initial_state: np.ndarray | None = None
    initial_invariant: np.ndarray | None = None
    ID0: np.ndarray | None = None
    IC0: np.ndarray | None = None
    observables: dict = field(default_factory=dict)
    dfs_min_dim: int = 2


def _pointer(path):
    return "".join(f"/{p}" for p in path)


def _deepest(error):
    # oneOf failures carry sub-errors; the most specific one names the field
    best = jsonschema.exceptions.best_match([error])
    while best.context:
        best = jsonschema.exceptions.best_match(best.context)
    return best


def validate_raw(raw):
    """Schema-validate a raw config dict; raise ``ConfigError`` at the first problem."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = _deepest(errors[0])
        raise ConfigError(err.message, _pointer(err.absolute_path))
    if ("scenario" in raw) == ("model" in raw):
        raise ConfigError("give exactly one of 'scenario' or 'model'", "")


def apply_overrides(raw, overrides):
    """Fold CLI flags into the raw dict so they are validated like file values."""
    raw = json.loads(json.dumps(raw))
    routes = {"steps": ("grid", "steps"), "T": ("grid", "T"), "out": ("output", "path"),
              "format": ("output", "format"), "full": ("output", "full")}
    for key, value in (overrides or {}).items():
        if value is None or key not in routes:
            continue
        section, name = routes[key]
        raw.setdefault(section, {})
        if isinstance(raw[section], dict):
            raw[section][name] = value
    return raw


def _literal(obj, pointer, dim=None):
    try:
        m = matrix_from_literal(obj)
    except QinvError as exc:
        raise ConfigError(str(exc), pointer) from exc
    if dim is not None and m.shape[0] != dim:
        raise ConfigError(f"matrix has dim {m.shape[0]}, expected {dim}", pointer)
    return m


def _schedule(obj, pointer, T):
    try:
        s = Schedule.constant(obj) if isinstance(obj, (int, float)) else Schedule.from_dict(obj)
    except QinvError as exc:
        raise ConfigError(str(exc), pointer) from exc
    if s.horizon is not None and s.horizon < T * (1 - 1e-12):
        raise ConfigError(f"schedule covers [0, {s.horizon}] but T = {T}", pointer)
    return s


def _build_model(raw_model, T, steps):
    n = raw_model["dim"]
    terms = []
    for i, term in enumerate(raw_model.get("hamiltonian", [])):
        ptr = f"/model/hamiltonian/{i}"
        h = _literal(term["matrix"], ptr + "/matrix", n)
        if not is_hermitian(h, HERMITIAN_TOL * max(1.0, float(np.max(np.abs(h))))):
            raise ConfigError("Hamiltonian term is not Hermitian", ptr + "/matrix")
        terms.append((h, _schedule(term.get("schedule", 1.0), ptr + "/schedule", T)))
    ops = []
    grid = time_grid(T, steps)
    for a, op in enumerate(raw_model.get("lindblad", [])):
        ptr = f"/model/lindblad/{a}"
        f = _literal(op["operator"], ptr + "/operator", n)
        rate = _schedule(op.get("rate", 1.0), ptr + "/rate", T)
        values = np.asarray(rate.eval(grid))
        if np.any(values < 0):
            k = int(np.flatnonzero(values < 0)[0])
            raise ConfigError(f"rate is negative at t = {grid[k]:.6g}", ptr + "/rate")
        ops.append((f, rate))
    return LindbladModel(n, tuple(terms), tuple(ops))


def scenario_state():
    """Default demo state: 0.7 |++><++| + 0.3 I/4 (full rank, so never on the PSD edge)."""
    plus = np.array([1, 1], dtype=complex) / math.sqrt(2)
    pp = tensor_product(np.outer(plus, plus.conj()), np.outer(plus, plus.conj()))
    return 0.7 * pp + 0.3 * np.eye(4) / 4


def scenario_observables():
    return {"Z1": embed(SIGMA_Z, 0, 2), "Z2": embed(SIGMA_Z, 1, 2),
            "X1X2": tensor_product(SIGMA_X, SIGMA_X)}


def parse_config(path, flag_overrides=None, command=None):
    """Load, override, validate and materialize a run configuration."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}", "") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", "") from exc
    return config_from_dict(raw, flag_overrides, command)


def config_from_dict(raw, flag_overrides=None, command=None):
    raw = apply_overrides(raw, flag_overrides)
    validate_raw(raw)
    grid = raw.get("grid", {})
    out = raw.get("output", {})
    tolerances = {**DEFAULT_TOLERANCES, **raw.get("tolerances", {})}

    scenario = None
    if "scenario" in raw:
        desc = raw["scenario"]
        try:
            scenario = DephasingScenario() if desc == "dephasing2q" else \
                DephasingScenario.from_dict(desc)
        except QinvError as exc:
            raise ConfigError(str(exc), "/scenario") from exc
        has_t = isinstance(desc, dict) and "T" in desc
        has_steps = isinstance(desc, dict) and "steps" in desc
        T = float(grid.get("T", scenario.T if has_t else DEFAULT_T))
        steps = int(grid.get("steps", scenario.steps if has_steps else DEFAULT_STEPS))
        for key in ("g12", "Bz"):
            s = getattr(scenario, key)
            if s.horizon is not None and s.horizon < T * (1 - 1e-12):
                raise ConfigError(f"schedule covers [0, {s.horizon}] but T = {T}",
                                  f"/scenario/{key}")
        scenario = replace(scenario, T=T, steps=steps)
        model = build_two_qubit_model(scenario)[0]
    else:
        T = float(grid.get("T", DEFAULT_T))
        steps = int(grid.get("steps", DEFAULT_STEPS))
        model = _build_model(raw["model"], T, steps)

    n = model.dim
    mats = {key: _literal(raw[key], f"/{key}", n) if key in raw else None
            for key in ("initial_state", "initial_invariant")}
    blocks = {key: _literal(raw[key], f"/{key}") if key in raw else None
              for key in ("ID0", "IC0")}
    observables = {name: _literal(m, f"/observables/{name}", n)
                   for name, m in raw.get("observables", {}).items()}
    if scenario is not None:
        if mats["initial_state"] is None:
            mats["initial_state"] = scenario_state()
        if not observables and "observables" not in raw:
            observables = scenario_observables()

    return RunConfig(
        command=command, model=model, scenario=scenario, T=T, steps=steps,
        tolerances=tolerances, out=out.get("path"), format=out.get("format", "csv"),
        full=bool(out.get("full", False)), initial_state=mats["initial_state"],
        initial_invariant=mats["initial_invariant"], ID0=blocks["ID0"], IC0=blocks["IC0"],
        observables=observables, dfs_min_dim=raw.get("dfs", {}).get("min_dim", 2))


# --- results ------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tol: float
    passed: bool

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.value:.3e} (tol {self.tol:.1e})"


def check(name, value, tol):
    value = float(value)
    return Check(name, value, float(tol), bool(value <= tol))


@dataclass
class Result:
    """What a subcommand produced: a table (or only a document) plus checks."""

    columns: list | None = None
    rows: list | None = None
    document: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    summary: str = ""


class RunError(QinvError):
    """Raised by a subcommand when a computation cannot produce output."""


def _need(value, what):
    if value is None:
        raise ConfigError(f"this command needs '{what}' in the config", f"/{what}")
    return value


def _eig_columns(prefix, n):
    return [f"{prefix}{j}" for j in range(n)]


def _full_columns(cfg, prefix, matrices, columns, rows):
    if cfg.full and cfg.format == "csv":
        dim = matrices.shape[-1]
        columns += export.flat_columns(prefix, dim)
        for row, m in zip(rows, matrices):
            row += export.flat_entries(m)


def _block_split(cfg):
    """``(BlockModel, I^D_0, I^C_0)`` for the configured model."""
    if cfg.scenario is not None:
        model, d = build_two_qubit_model(cfg.scenario)
        ID0 = cfg.ID0 if cfg.ID0 is not None else cfg.scenario.ID0.to_matrix()
        IC0 = cfg.IC0 if cfg.IC0 is not None else cfg.scenario.IC0.to_matrix()
    else:
        model = cfg.model
        candidates = [d for d in find_static_dfs(model, 0.0, cfg.tolerances["dfs"],
                                                 cfg.dfs_min_dim) if d.heff_invariant]
        if not candidates:
            raise RunError("the model has no decoherence-free subspace to split on")
        d = candidates[0]
        n = model.dim
        ID0 = _need(cfg.ID0, "ID0")
        IC0 = _need(cfg.IC0, "IC0")
        if ID0.shape[0] != d.dfs_dim:
            raise ConfigError(f"ID0 must be {d.dfs_dim}x{d.dfs_dim}", "/ID0")
        if IC0.shape[0] != n - d.dfs_dim:
            raise ConfigError(f"IC0 must be {n - d.dfs_dim}x{n - d.dfs_dim}", "/IC0")
    return BlockModel(model, d), ID0, IC0


def _default_invariant(cfg):
    if cfg.initial_invariant is not None:
        return cfg.initial_invariant
    if cfg.scenario is not None:
        bm, ID0, IC0 = _block_split(cfg)
        return assemble_invariant(BlockInvariant(ID0, IC0, bm.decomposition))
    raise ConfigError("this command needs 'initial_invariant' in the config",
                      "/initial_invariant")


# --- subcommands --------------------------------------------------------------


def cmd_propagate_state(cfg):
    rho0 = _need(cfg.initial_state, "initial_state")
    tol = cfg.tolerances
    try:
        traj = propagate_state(cfg.model, rho0, cfg.T, cfg.steps, tol["trace"], tol["psd"])
    except IntegrationQualityError as exc:
        return Result(checks=[Check(f"state propagation quality ({exc})", math.inf,
                                    tol["trace"], False)])
    purity = traj.purity()
    tr_re = np.trace(traj.states, axis1=1, axis2=2).real
    names = list(cfg.observables)
    obs = [traj.expectation(cfg.observables[k]) for k in names]
    columns = ["t", "tr_re", "purity", "min_eig"] + names
    rows = [[t, tr, p, m] + [o[k] for o in obs]
            for k, (t, tr, p, m) in enumerate(zip(traj.times, tr_re, purity,
                                                   traj.min_eigenvalue))]
    _full_columns(cfg, "rho_", traj.states, columns, rows)
    doc = {"diagnostics": {"max_trace_deviation": traj.trace_deviation.max(),
                           "max_hermiticity_deviation": traj.hermiticity_deviation.max(),
                           "min_eigenvalue": traj.min_eigenvalue.min()}}
    if cfg.full:
        doc["states"] = [matrix_to_literal(m) for m in traj.states]
    checks = [check("trace deviation", traj.trace_deviation.max(), tol["trace"]),
              check("negativity", max(0.0, -traj.min_eigenvalue.min()), tol["psd"])]
    return Result(columns, rows, doc, checks)


def cmd_propagate_invariant(cfg):
    inv0 = _default_invariant(cfg)
    tol = cfg.tolerances
    try:
        itraj = propagate_invariant(cfg.model, inv0, cfg.T, cfg.steps, tol["drift"])
    except IntegrationQualityError as exc:
        return Result(checks=[Check(f"invariant propagation quality ({exc})", math.inf,
                                    tol["drift"], False)])
    n = cfg.model.dim
    eigs = itraj.eigenvalues
    columns = ["t", "tr_re"] + _eig_columns("lambda_", n)
    trace = np.trace(itraj.invariants, axis1=1, axis2=2).real
    rows = [[t, tr] + list(e) for t, tr, e in zip(itraj.times, trace, eigs)]
    checks = []
    doc = {"diagnostics": {"max_hermiticity_deviation": itraj.hermiticity_deviation.max()}}
    if cfg.initial_state is not None:
        straj = propagate_state(cfg.model, cfg.initial_state, cfg.T, cfg.steps,
                                tol["trace"], tol["psd"])
        values, defect = expectation_series(itraj, straj)
        columns.append("expectation")
        for row, v in zip(rows, values):
            row.append(v)
        doc["diagnostics"]["expectation_defect"] = defect
        checks.append(check("Tr(I rho) constancy defect", defect, tol["expectation"]))
    _full_columns(cfg, "I_", itraj.invariants, columns, rows)
    if cfg.full:
        doc["invariants"] = [matrix_to_literal(m) for m in itraj.invariants]
    return Result(columns, rows, doc, checks)


def cmd_verify_invariant(cfg):
    """Residual of the sampled invariant at ``dt`` and ``2 dt``, and their ratio."""
    if cfg.steps < 4 or cfg.steps % 2:
        raise ConfigError("verify-invariant needs an even number of steps >= 4",
                          "/grid/steps")
    inv0 = _default_invariant(cfg)
    tol = cfg.tolerances
    fine = propagate_invariant(cfg.model, inv0, cfg.T, cfg.steps, tol["drift"])
    coarse = propagate_invariant(cfg.model, inv0, cfg.T, cfg.steps // 2, tol["drift"])
    r_fine = invariant_residual(cfg.model, fine)
    r_coarse = invariant_residual(cfg.model, coarse)
    max_fine, max_coarse = float(r_fine.max()), float(r_coarse.max())
    checks = [check("max invariant residual", max_fine, tol["residual"])]
    # below ~1e-11 the residual is rounding noise and has no order to measure
    if max_coarse > 1e-11 and max_fine > 0:
        ratio = max_coarse / max_fine
        order = math.log2(ratio)
        lo, hi = ORDER_RATIO_BAND
        checks.append(Check(f"residual ratio for halved dt in [{lo}, {hi}]", ratio,
                            hi, lo <= ratio <= hi))
    else:
        ratio = order = None
    passed = all(c.passed for c in checks)
    doc = {"max_residual": max_fine, "order_estimate": order, "pass": passed,
           "residual_ratio": ratio, "dt": fine.dt, "steps": cfg.steps}
    if cfg.full:
        doc["times"] = fine.times[1:-1]
        doc["residuals"] = r_fine
    return Result(document=doc, checks=checks)


def cmd_find_dfs(cfg):
    found = find_static_dfs(cfg.model, 0.0, cfg.tolerances["dfs"], cfg.dfs_min_dim)
    good = [d for d in found if d.heff_invariant]
    doc = {"count": len(found), "heff_invariant_count": len(good),
           "decompositions": [export.decomposition_to_json(d) for d in found]}
    summary = (f"found {len(found)} candidate subspace(s), "
               f"{len(good)} invariant under H_eff: dims {[d.dfs_dim for d in good]}")
    return Result(document=doc, summary=summary)


def cmd_block_decompose(cfg):
    bm, _, _ = _block_split(cfg)
    n = cfg.model.dim
    d = block_decompose(bm.model, bm.decomposition, np.zeros((n, n), dtype=complex), 0.0,
                        cfg.tolerances["dfs"])
    res = dfs_condition_residual(compute_Heff(bm.model, d, np.zeros((n, n)), 0.0), d)
    d = replace(d, heff_residual=res, heff_invariant=bool(res <= cfg.tolerances["dfs"]))
    doc = {"decomposition": export.decomposition_to_json(d)}
    return Result(document=doc, checks=[check("H_eff leakage out of the DFS", res,
                                              cfg.tolerances["dfs"])])


def _bloch_row(m):
    m = np.asarray(m)
    return [np.trace(p @ m).real / 2 for p in (BLOCK_SX, BLOCK_SY, BLOCK_SZ)]


def cmd_propagate_blocks(cfg):
    bm, ID0, IC0 = _block_split(cfg)
    tol = cfg.tolerances
    id_traj = propagate_ID(bm, ID0, cfg.T, cfg.steps)
    ic_traj = propagate_IC(bm, id_traj, IC0)
    nd, nc = bm.dfs_dim, bm.comp_dim
    columns = ["t"] + _eig_columns("lambdaD_", nd) + _eig_columns("lambdaC_", nc)
    bloch = nd == 2 and nc == 2
    if bloch:
        columns += ["xD", "yD", "zD", "xC", "yC", "zC"]
    eig_d, eig_c = id_traj.eigenvalues, ic_traj.eigenvalues
    rows = []
    for k, t in enumerate(id_traj.times):
        row = [t] + list(eig_d[k]) + list(eig_c[k])
        if bloch:
            row += _bloch_row(id_traj.invariants[k]) + _bloch_row(ic_traj.invariants[k])
        rows.append(row)
    _full_columns(cfg, "ID_", id_traj.invariants, columns, rows)
    _full_columns(cfg, "IC_", ic_traj.invariants, columns, rows)
    report = verify_full_invariant(bm, id_traj, ic_traj)
    drift = float(np.max(np.abs(eig_d - eig_d[0])))
    doc = {"diagnostics": {"max_residual": report.max_residual,
                           "max_direct_offdiag": report.max_direct_offdiag,
                           "ID_eigenvalue_drift": drift},
           "decomposition": export.decomposition_to_json(bm.decomposition)}
    if cfg.full:
        doc["ID"] = [export.matrix_literal(m) for m in id_traj.invariants]
        doc["IC"] = [export.matrix_literal(m) for m in ic_traj.invariants]
    checks = [check("assembled invariant residual", report.max_residual, tol["residual"]),
              check("I^D eigenvalue drift", drift, tol["eig_drift"]),
              check("off-diagonal block of the directly propagated invariant",
                    report.max_direct_offdiag, tol["offdiag"])]
    return Result(columns, rows, doc, checks)


def _flow_rows(block, records):
    return [[block, r.time, r.index, r.value, r.rhs, r.fd, r.defect, r.degenerate]
            for r in records]


def _max_defect(records):
    vals = [r.defect for r in records if not r.degenerate]
    return max(vals) if vals else 0.0


def cmd_eigenflow(cfg):
    tol = cfg.tolerances
    inv0 = _default_invariant(cfg)
    itraj = propagate_invariant(cfg.model, inv0, cfg.T, cfg.steps, tol["drift"])
    full = eigenflow(cfg.model, itraj, tol["degeneracy"])
    rows = _flow_rows("full", full)
    checks = [check("eigenvalue-flow defect (full invariant)", _max_defect(full),
                    tol["eigenflow"])]
    if cfg.scenario is not None:
        bm, ID0, IC0 = _block_split(cfg)
        id_traj = propagate_ID(bm, ID0, cfg.T, cfg.steps)
        ic_traj = propagate_IC(bm, id_traj, IC0)
        comp = complement_eigenflow(bm, id_traj, ic_traj, tol["degeneracy"])
        rows += _flow_rows("C", comp)
        checks.append(check("eigenvalue-flow defect (complement block)", _max_defect(comp),
                            tol["eigenflow"]))
    columns = ["block", "t", "index", "lambda", "rhs", "fd", "defect", "degenerate"]
    doc = {"degenerate_records": sum(1 for r in rows if r[-1])}
    return Result(columns, rows, doc, checks)


def cmd_example_dephasing(cfg):
    s = cfg.scenario
    if s is None:
        raise ConfigError("example-dephasing needs a 'scenario'", "/scenario")
    tol = cfg.tolerances
    rep = compare_analytic_numeric(s, steps=cfg.steps, T=cfg.T)
    labels = {"ID componentwise max deviation": "analytic",
              "IC componentwise max relative deviation": "analytic",
              "ID eigenvalue drift": "eig_drift",
              "IC eigenvalues vs closed form (relative)": "analytic",
              "z^C drift": "drift",
              "growth rate relative error vs 8 gamma": "growth"}
    values = rep.checks()
    checks = [check(name, values[name][0], tol[key])
              for name, key in labels.items() if name in values]
    columns = ["t", "xD", "yD", "zD", "xD_exact", "yD_exact", "zD_exact",
               "xC", "yC", "zC", "xC_exact", "yC_exact", "zC_exact"]
    rows = [[t, *nd, *ad, *nc, *ac] for t, nd, ad, nc, ac in
            zip(rep.times, rep.numeric_ID, rep.analytic_ID, rep.numeric_IC, rep.analytic_IC)]
    doc = {"scenario": s.to_dict(), "growth_rate": rep.growth_rate,
           "IC_eigenvalues": rep.numeric_IC_eigs if cfg.full else None}
    return Result(columns, rows, doc, checks)


HANDLERS = {
    "propagate-state": cmd_propagate_state,
    "propagate-invariant": cmd_propagate_invariant,
    "verify-invariant": cmd_verify_invariant,
    "find-dfs": cmd_find_dfs,
    "block-decompose": cmd_block_decompose,
    "propagate-blocks": cmd_propagate_blocks,
    "eigenflow": cmd_eigenflow,
    "example-dephasing": cmd_example_dephasing,
}


def render(cfg, result):
    """The file content for ``result``, as ``(text, format)``.

    Commands without a table always write JSON, whatever ``format`` says.
    """
    checks = [{"name": c.name, "value": c.value, "tol": c.tol, "pass": c.passed}
              for c in result.checks]
    if cfg.format == "json" or result.columns is None:
        doc = {"command": cfg.command, **result.document, "checks": checks}
        if result.columns is not None:
            doc["columns"] = result.columns
            doc["rows"] = result.rows
        return export.json_text(doc), "json"
    return export.csv_text(result.columns, result.rows), "csv"


def run(cfg, stdout=None):
    """Dispatch ``cfg.command``, write its output, print checks; return the exit code."""
    stdout = stdout or sys.stdout
    handler = HANDLERS.get(cfg.command)
    if handler is None:
        raise ConfigError(f"unknown command {cfg.command!r}", "")
    result = handler(cfg)
    wrote = None
    if result.columns is not None or result.document:
        text, kind = render(cfg, result)
        path = cfg.out or f"{cfg.command}.{kind}"
        wrote = export.atomic_write(path, text)
    if result.summary:
        print(result.summary, file=stdout)
    for c in result.checks:
        print(c.line(), file=stdout)
    if wrote is not None:
        log.info("wrote %s", wrote)
    return 0 if all(c.passed for c in result.checks) else 1


# --- entry point --------------------------------------------------------------

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--steps", type=int, help="number of RK4 steps (overrides the file)")
    common.add_argument("--T", type=float, help="final time (overrides the file)")
    common.add_argument("--out", help="output path")
    common.add_argument("--format", choices=("csv", "json"), help="output format")
    common.add_argument("--full", action="store_true", default=None,
                        help="include raw matrices in the output")
    parser = argparse.ArgumentParser(prog="qinv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HANDLERS[name].__doc__)
    return parser


def main(argv=None):
    level_name = os.environ.get("QINV_LOG", "error").lower()
    if level_name not in LOG_LEVELS:
        print(f"error: QINV_LOG must be one of {sorted(LOG_LEVELS)}", file=sys.stderr)
        return 2
    logging.basicConfig(level=LOG_LEVELS[level_name], stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    overrides = {"steps": args.steps, "T": args.T, "out": args.out, "format": args.format,
                 "full": args.full}
    try:
        cfg = parse_config(args.config, overrides, args.command)
        return run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except IntegrationQualityError as exc:
        print(f"FAIL integration quality: {exc}", file=sys.stderr)
        return 1
    except QinvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
