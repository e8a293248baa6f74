"""Batch front-end.

    cauchy-ahlfors <verify|decompose|soliton|constraints|gen-tt> --config run.json
                   [--out report.json] [--dump DIR]

Exit status: 0 when every check passes, 1 on a failed check or solver
failure, 2 on an unusable configuration.
"""
from __future__ import annotations

import argparse
import datetime
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .ahlfors import (
    RICCI_SIGN,
    ahlfors_laplacian,
    calibrate_ricci_sign,
    cauchy_ahlfors_S,
    codiff_twoform,
    delta_oneform,
    delta_star,
    div_sym,
    ext_d_oneform,
    ext_d_scalar,
)
from .constraints import (
    InitialData,
    TensorSpec,
    build_cmc_data,
    constraint_report,
    decompose_K,
    tt_project,
    umbilicity_defect,
)
from .decomp import SolverConfig, decompose_traceless, decomposition_checks, verify_theorem1
from .errors import BandLimitError, DegenerateMetricError, InvalidArgumentError, SolverFailureError
from .grid import (
    GridSpec,
    OneForm,
    ScalarField,
    SymTensor2,
    TwoForm,
    random_bandlimited_field,
    random_oneform,
    random_symtensor,
    sym_pairs,
)
from .soliton import fit_almost_soliton
from .testing import calibration_oneform
from .tensor import (
    FourierMode,
    MetricSpec,
    l2_inner,
    l2_norm,
    metric_compatibility_defect,
    metric_from_spec,
    trace_g,
    traceless_part,
    traceless_ricci,
)

log = logging.getLogger(__name__)

COMMANDS = ("verify", "decompose", "soliton", "constraints", "gen-tt")

ADJOINT_TOL = 1e-9
TRACE_FREE_TOL = 1e-10
METRIC_COMPAT_TOL = 1e-10
BIANCHI_TOL = 1e-7
WEITZENBOECK_TOL = 1e-7
SURFACE_RICCI_TOL = 1e-9
RECOVERY_TOL = 1e-9
MOMENTUM_TOL = 1e-8
SOLITON_2D_TOL = 1e-8


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    grid: GridSpec
    metric: MetricSpec
    solver: SolverConfig
    seed: int = 0
    blocks: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def block(self, name):
        return self.blocks.get(name, {})


_TOP_KEYS = {"grid", "metric", "solver", "seed", "verify", "decompose", "soliton", "constraints", "gen_tt"}


def parse_config(raw):
    """Validate a config dict and build a :class:`RunConfig`; raises ConfigError."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        gd = raw["grid"]
        grid = GridSpec(int(gd["dimension"]), tuple(gd["resolution"]), gd.get("periods"))
        metric = MetricSpec.from_dict(raw.get("metric", {"kind": "flat"}))
        for mode in metric.modes:
            grid.check_wavevector(mode.wavevector)
        sd = dict(raw.get("solver", {}))
        unknown = set(sd) - {"rel_tolerance", "max_iterations", "preconditioner"}
        if unknown:
            raise ConfigError(f"unknown solver keys: {sorted(unknown)}")
        solver = SolverConfig(
            rel_tolerance=float(sd.get("rel_tolerance", 1e-10)),
            max_iterations=sd.get("max_iterations"),
            preconditioner=sd.get("preconditioner", "none"),
        )
        seed = int(raw.get("seed", 0))
        blocks = {k: raw[k] for k in ("verify", "decompose", "soliton", "constraints", "gen_tt") if k in raw}
        for name, block in blocks.items():
            if not isinstance(block, dict):
                raise ConfigError(f"block {name!r} must be an object")
            mm = block.get("max_mode")
            if mm is not None and int(mm) > grid.max_mode:
                raise BandLimitError(
                    f"{name}.max_mode = {mm} exceeds the band limit N/4 = {grid.max_mode}"
                )
    except ConfigError:
        raise
    except KeyError as exc:
        raise ConfigError(f"missing config key {exc}") from exc
    except (InvalidArgumentError, BandLimitError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(grid, metric, solver, seed, blocks, raw)


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(raw)


def build_metric(cfg):
    try:
        return metric_from_spec(cfg.metric, cfg.grid)
    except DegenerateMetricError as exc:
        raise ConfigError(str(exc)) from exc


def _tensor_spec(d, grid, what):
    try:
        spec = TensorSpec.from_dict(d)
        for mode in spec.modes:
            grid.check_wavevector(mode.wavevector)
        return spec
    except (InvalidArgumentError, BandLimitError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad {what}: {exc}") from exc


def _oneform_from_modes(modes, grid):
    """One-form with cosine modes; the mode's ``a`` selects the component."""
    data = np.zeros((grid.dimension,) + grid.shape)
    for m in modes:
        try:
            mode = FourierMode.from_dict(m)
            grid.check_wavevector(mode.wavevector)
        except (InvalidArgumentError, BandLimitError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad one-form mode {m}: {exc}") from exc
        if not 0 <= mode.a < grid.dimension:
            raise ConfigError(f"one-form component {mode.a} out of range")
        data[mode.a] += mode.evaluate(grid)
    return OneForm(grid, data)


class Checks:
    """Ordered list of named measurements with explicit thresholds."""

    def __init__(self):
        self.items = []

    def add(self, name, value, threshold, passed=None):
        value = float(value)
        if passed is None:
            passed = value <= threshold
        self.items.append(
            {"name": name, "value": value, "threshold": float(threshold), "passed": bool(passed)}
        )
        return passed

    @property
    def passed(self):
        return all(item["passed"] for item in self.items)


def _adjoint_defect(a, b, scale):
    return abs(a - b) / scale if scale > 0 else abs(a - b)


def run_verify(cfg, g):
    grid = cfg.grid
    block = cfg.block("verify")
    samples = int(block.get("samples", 20))
    max_mode = int(block.get("max_mode", min(2, grid.max_mode)))
    checks = Checks()
    n = grid.dimension

    checks.add("metric_compatibility", metric_compatibility_defect(g), METRIC_COMPAT_TOL)

    adj_sym = adj_form = adj_fn = trace_free = nonneg = selfadj = 0.0
    for i in range(samples):
        seed = [cfg.seed, i]
        theta = random_oneform(grid, seed + [0], max_mode, 1.0)
        theta2 = random_oneform(grid, seed + [1], max_mode, 1.0)
        phi = random_symtensor(grid, seed + [2], max_mode, 1.0)
        omega = TwoForm(grid, random_symtensor(grid, seed + [3], max_mode, 1.0).data[: n * (n - 1) // 2])
        f = random_bandlimited_field(grid, seed + [4], max_mode, 1.0)

        ds_theta = delta_star(g, theta)
        dphi = div_sym(g, phi)
        scale = l2_norm(phi, g) * l2_norm(ds_theta, g) + l2_norm(dphi, g) * l2_norm(theta, g)
        adj_sym = max(adj_sym, _adjoint_defect(l2_inner(phi, ds_theta, g), l2_inner(dphi, theta, g), scale))

        dth = ext_d_oneform(theta)
        dom = codiff_twoform(g, omega)
        scale = l2_norm(dth, g) * l2_norm(omega, g) + l2_norm(theta, g) * l2_norm(dom, g)
        adj_form = max(adj_form, _adjoint_defect(l2_inner(dth, omega, g), l2_inner(theta, dom, g), scale))

        df = ext_d_scalar(f)
        dl = delta_oneform(g, theta)
        scale = l2_norm(df, g) * l2_norm(theta, g) + l2_norm(f, g) * l2_norm(dl, g)
        adj_fn = max(adj_fn, _adjoint_defect(l2_inner(df, theta, g), l2_inner(f, dl, g), scale))

        s_theta = cauchy_ahlfors_S(g, theta)
        trace_free = max(trace_free, trace_g(s_theta, g).sup_norm())

        lap = ahlfors_laplacian(g, theta)
        lap2 = ahlfors_laplacian(g, theta2)
        norm2 = l2_inner(theta, theta, g)
        nonneg = max(nonneg, -l2_inner(theta, lap, g) / norm2)
        a, b = l2_inner(theta, lap2, g), l2_inner(lap, theta2, g)
        selfadj = max(selfadj, _adjoint_defect(a, b, l2_norm(theta, g) * l2_norm(lap2, g) + l2_norm(lap, g) * l2_norm(theta2, g)))

    checks.add("adjoint_delta_star_div_sym", adj_sym, ADJOINT_TOL)
    checks.add("adjoint_d_codiff_twoform", adj_form, ADJOINT_TOL)
    checks.add("adjoint_d_codiff_oneform", adj_fn, ADJOINT_TOL)
    checks.add("cauchy_ahlfors_trace_free", trace_free, TRACE_FREE_TOL)
    checks.add("ahlfors_nonnegative", max(nonneg, 0.0), 1e-10)
    checks.add("ahlfors_self_adjoint", selfadj, ADJOINT_TOL)

    s = g.scalar_curvature
    ds = ext_d_scalar(s)
    bian = l2_norm(div_sym(g, g.ricci) + 0.5 * ds, g)
    ds_norm = l2_norm(ds, g)
    checks.add("contracted_bianchi", bian / ds_norm if ds_norm > 1e-12 else bian, BIANCHI_TOL)

    theta = calibration_oneform(grid, [cfg.seed, samples])
    sign, residuals = calibrate_ricci_sign(g, theta)
    checks.add("weitzenboeck_residual", residuals[RICCI_SIGN], WEITZENBOECK_TOL)
    extra = {
        "ricci_sign": RICCI_SIGN,
        "calibrated_sign": sign,
        "weitzenboeck_residual_plus": residuals[1],
        "weitzenboeck_residual_minus": residuals[-1],
    }

    if n == 2:
        ric = g.ricci
        diff = ric - SymTensor2.from_full(grid, g.full * (0.5 * s.data))
        scale = max(l2_norm(ric, g), 1e-14)
        checks.add("surface_ricci_identity", l2_norm(diff, g) / scale, SURFACE_RICCI_TOL)
    else:
        report = verify_theorem1(g, cfg.solver)
        for name, (value, threshold, ok) in report.checks.items():
            checks.add(f"theorem1_{name}", value, threshold, ok)
        extra["theorem1"] = report.to_dict()
        extra["laplacian_identity"] = report.laplacian_identity_residual
        extra["laplacian_identity_printed_constant"] = report.laplacian_identity_residual_printed
        extra["integral_formula"] = report.integral_formula_residual
        extra["integral_formula_printed_constant"] = report.integral_formula_residual_printed
    return checks, extra, {}


def _decompose_input(cfg, g):
    """Return ``(phi0, theta_hat, scale)``; ``scale`` is the norm of the tensor phi0 came from."""
    grid = cfg.grid
    block = cfg.block("decompose")
    source = block.get("source", "traceless_ricci")
    if source == "traceless_ricci":
        return traceless_ricci(g), None, l2_norm(g.ricci, g)
    if source == "s_theta":
        theta_hat = _oneform_from_modes(block.get("theta", []), grid)
        return cauchy_ahlfors_S(g, theta_hat), theta_hat, None
    if source == "tensor":
        phi = _tensor_spec(block.get("tensor", {}), grid, "decompose.tensor").build(g)
        return traceless_part(phi, g), None, l2_norm(phi, g)
    if source == "random":
        phi = random_symtensor(grid, cfg.seed, int(block.get("max_mode", 2)), float(block.get("amplitude", 1.0)))
        return traceless_part(phi, g), None, l2_norm(phi, g)
    raise ConfigError(f"unknown decompose.source {source!r}")


def run_decompose(cfg, g):
    phi0, theta_hat, scale = _decompose_input(cfg, g)
    dec = decompose_traceless(g, phi0, cfg.solver, scale=scale)
    checks = Checks()
    for name, (value, threshold, ok) in decomposition_checks(dec, cfg.solver).items():
        checks.add(name, value, threshold, ok)
    recon = float(np.max(np.abs((dec.s_theta + dec.phi_tt - phi0).data)))
    checks.add("reconstruction", recon, 1e-12)
    phi0_norm = l2_norm(phi0, g)
    extra = {
        "input_norm": phi0_norm,
        "tt_norm": dec.phi_tt_norm,
        "s_theta_norm": dec.s_theta_norm,
        "diagnostics": dec.diagnostics,
    }
    if theta_hat is not None:
        checks.add("tt_norm_relative", dec.phi_tt_norm / max(phi0_norm, 1e-300), RECOVERY_TOL)
    fields = {"theta": dec.theta, "s_theta": dec.s_theta, "phi_tt": dec.phi_tt}
    return checks, extra, fields


def run_soliton(cfg, g):
    fit = fit_almost_soliton(g, cfg.solver)
    checks = Checks()
    n = g.dimension
    trace_id = (g.scalar_curvature + delta_oneform(g, fit.theta) - n * fit.lambda_field).sup_norm()
    checks.add("trace_identity", trace_id, 1e-10)
    if n == 2:
        checks.add("surface_deviation", fit.deviation, SOLITON_2D_TOL)
    extra = fit.to_dict()
    fields = {"theta": fit.theta, "lambda": fit.lambda_field, "phi_tt": fit.phi_tt}
    return checks, extra, fields


def run_constraints(cfg, g):
    grid = cfg.grid
    block = cfg.block("constraints")
    lam = float(block.get("cosmological_constant", 0.0))
    checks = Checks()
    if "cmc" in block:
        cmc = block["cmc"]
        phi = _tensor_spec(cmc.get("phi_tt", {}), grid, "constraints.cmc.phi_tt").build(g)
        data = build_cmc_data(g, phi, float(cmc.get("H0", 0.0)))
        rep = constraint_report(data, lam)
        checks.add("momentum_sup", rep.momentum_sup, MOMENTUM_TOL)
        checks.add("momentum_l2", rep.momentum_l2, MOMENTUM_TOL)
    else:
        K = _tensor_spec(block.get("K", {}), grid, "constraints.K").build(g)
        data = InitialData(g, K)
        rep = constraint_report(data, lam)
    kdec = decompose_K(data, cfg.solver)
    checks.add("theta_equation", kdec.theta_equation_residual, kdec.theta_equation_threshold, kdec.passed)
    extra = {
        "constraints": rep.to_dict(),
        "decomposition": kdec.to_dict(),
        "umbilicity_defect": umbilicity_defect(data),
        "mean_curvature_variation": float(np.ptp(data.H.data)),
    }
    fields = {
        "K": data.K,
        "hamiltonian": rep.hamiltonian,
        "momentum": rep.momentum,
        "phi_tt": kdec.decomposition.phi_tt,
    }
    return checks, extra, fields


def run_gen_tt(cfg, g):
    grid = cfg.grid
    block = cfg.block("gen_tt")
    max_mode = int(block.get("max_mode", min(2, grid.max_mode)))
    amplitude = float(block.get("amplitude", 1.0))
    phi = random_symtensor(grid, cfg.seed, max_mode, amplitude)
    tt = tt_project(g, phi, cfg.solver)
    checks = Checks()
    checks.add("tt_trace", trace_g(tt, g).sup_norm(), 1e-10)
    div = l2_norm(div_sym(g, tt), g)
    ref = l2_norm(div_sym(g, phi), g)
    checks.add("tt_divergence", div, 10 * cfg.solver.rel_tolerance * max(ref, 1.0))
    extra = {"input_norm": l2_norm(phi, g), "tt_norm": l2_norm(tt, g), "max_mode": max_mode, "amplitude": amplitude}
    return checks, extra, {"phi_tt": tt}


RUNNERS = {
    "verify": run_verify,
    "decompose": run_decompose,
    "soliton": run_soliton,
    "constraints": run_constraints,
    "gen-tt": run_gen_tt,
}


def _component_labels(fld, n):
    if isinstance(fld, ScalarField):
        return [("", fld.data)]
    if isinstance(fld, SymTensor2):
        return [(f"_{a + 1}{b + 1}", fld.data[i]) for i, (a, b) in enumerate(sym_pairs(n))]
    if isinstance(fld, TwoForm):
        pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
        return [(f"_{a + 1}{b + 1}", fld.data[i]) for i, (a, b) in enumerate(pairs)]
    return [(f"_{a + 1}", fld.data[a]) for a in range(n)]


def dump_fields(fields, grid, directory):
    """Write one CSV per field component with header x1,...,xn,value."""
    os.makedirs(directory, exist_ok=True)
    n = grid.dimension
    coords = np.stack([c.ravel() for c in grid.coordinates], axis=1)
    header = ",".join([f"x{a + 1}" for a in range(n)] + ["value"])
    written = []
    for name, fld in sorted(fields.items()):
        for suffix, values in _component_labels(fld, n):
            path = os.path.join(directory, f"{name}{suffix}.csv")
            table = np.column_stack([coords, values.ravel()])
            with open(path, "w", newline="") as fh:
                fh.write(header + "\n")
                for row in table:
                    fh.write(",".join(repr(float(v)) for v in row) + "\n")
            written.append(os.path.basename(path))
    return written


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def execute(command, cfg, dump=None):
    """Run ``command`` on a parsed config; returns ``(report_dict, exit_code)``."""
    g = build_metric(cfg)
    report = {
        "command": command,
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "config": cfg.raw,
        "solver": cfg.solver.to_dict(),
    }
    try:
        checks, extra, fields = RUNNERS[command](cfg, g)
    except SolverFailureError as exc:
        report.update({"passed": False, "error": str(exc), "residual_history_tail": exc.residual_history[-10:]})
        return _jsonable(report), 1
    except (InvalidArgumentError, BandLimitError) as exc:
        report.update({"passed": False, "error": str(exc)})
        return _jsonable(report), 1
    report["checks"] = checks.items
    report["results"] = extra
    report["passed"] = checks.passed
    if dump:
        report["dumped_files"] = dump_fields(fields, cfg.grid, dump)
    return _jsonable(report), 0 if checks.passed else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="cauchy-ahlfors", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", help="write the JSON report here instead of stdout")
    parser.add_argument("--dump", help="directory for per-field CSV dumps")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        cfg = load_config(args.config)
        report, code = execute(args.command, cfg, dump=args.dump)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
