"""Batch experiment runner.

    weightlab <command> [--config cfg.json] [--out DIR] [--level L]
                        [--family all|dyadic|shifted] [--seed N]

Every command validates its configuration against a JSON schema before any
computation, writes ``<command>.json`` (plus optional CSV dumps) into the
output directory, and embeds the config hash and library version.  Exit
codes: 0 ok, 2 schema error, 3 inconclusive estimate, 4 certificate failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from pathlib import Path

import jsonschema

from . import __version__
from ._jsonio import atomic_write, config_hash, dumps
from .grid import CubeFamily, Expr, Grid, GridFunction, Measure, csv_text, sample

EXIT_OK, EXIT_SCHEMA, EXIT_INCONCLUSIVE, EXIT_CERT = 0, 2, 3, 4

# ---------------------------------------------------------------------------
# schemas
# ---------------------------------------------------------------------------

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_EXP_INF = {"anyOf": [{"type": "number", "minimum": 1}, {"const": "inf"}]}
_POINT = {"anyOf": [{"type": "number"}, {"type": "array", "items": _NUM, "minItems": 1, "maxItems": 2}]}

EXPR = {
    "type": "object",
    "required": ["family"],
    "additionalProperties": False,
    "properties": {
        "family": {"enum": ["constant", "power", "log", "indicator", "ramp", "sin", "bump", "dirac"]},
        "c": _NUM,
        "alpha": _NUM,
        "center": _POINT,
        "lo": _POINT,
        "hi": _POINT,
        "value": _NUM,
        "a": _NUM,
        "b": _NUM,
        "slope": _NUM,
        "k": _NUM,
        "amplitude": _NUM,
        "width": _POS,
        "point": _POINT,
        "mass": _NUM,
    },
}

FACTORY = {
    "type": "object",
    "required": ["kind"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["power", "mf_neg", "mf_pos", "mf_sum"]},
        "alpha": _NUM,
        "r": {"type": "number", "minimum": 1},
        "s": {"type": "number", "exclusiveMinimum": 1},
        "f": EXPR,
        "g": EXPR,
    },
}

_COMMON = {
    "dim": {"enum": [1, 2]},
    "level": {"type": "integer", "minimum": 2, "maximum": 14},
    "family": {"enum": ["all", "dyadic", "shifted"]},
    "seed": {"type": "integer", "minimum": 0},
    "csv": {"type": "boolean"},
}


def _schema(props, required=()):
    return {
        "type": "object",
        "additionalProperties": False,
        "required": list(required),
        "properties": {**_COMMON, **props},
    }


SCHEMAS = {
    "maximal": _schema(
        {
            "function": EXPR,
            "operators": {
                "type": "array",
                "items": {"enum": ["maximal", "sharp", "dsharp"]},
                "minItems": 1,
                "uniqueItems": True,
            },
            "kernel_m": _POS,
        }
    ),
    "weight-report": _schema(
        {
            "weight": {"anyOf": [FACTORY, {"type": "object", "required": ["expr"], "additionalProperties": False,
                                           "properties": {"expr": EXPR}}]},
            "p0": {"type": "number", "minimum": 1},
            "q0": _EXP_INF,
            "rho": {"type": "number", "exclusiveMinimum": 1},
        },
        required=["weight"],
    ),
    "czd": _schema(
        {
            "function": EXPR,
            "alpha": _POS,
            "p0": {"type": "number", "minimum": 1},
            "measure": {"anyOf": [{"const": "lebesgue"}, EXPR]},
        },
        required=["function", "alpha"],
    ),
    "czd-grad": _schema(
        {
            "function": EXPR,
            "alpha": _POS,
            "p": {"type": "number", "minimum": 1},
            "measure": {"anyOf": [{"const": "lebesgue"}, EXPR]},
        },
        required=["function", "alpha"],
    ),
    "goodlambda": _schema(
        {
            "instance": {"enum": ["fefferman-stein", "d-sharp"]},
            "function": EXPR,
            "mean_zero": {"type": "boolean"},
            "weight": EXPR,
            "kernel_m": _POS,
            "lambdas": {"type": "array", "items": _POS, "minItems": 1},
            "Ks": {"type": "array", "items": {"type": "number", "minimum": 1}, "minItems": 1},
            "gammas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                       "minItems": 1},
            "lp_exponents": {"type": "array", "items": _POS},
        },
        required=["function"],
    ),
    "extrapolate": _schema(
        {
            "h": EXPR,
            "weight": EXPR,
            "p0": {"type": "number", "minimum": 1},
            "q0": _EXP_INF,
            "p": {"type": "number", "minimum": 1},
            "q": {"type": "number", "exclusiveMinimum": 1},
            "K": {"type": "integer", "minimum": 0, "maximum": 64},
            "trials": {"type": "integer", "minimum": 1, "maximum": 256},
            "assume_weight_class": {"type": "boolean"},
            "transfer": {"type": "boolean"},
        },
        required=["p", "q"],
    ),
    "modelop": _schema(
        {
            "suite": {"enum": ["smooth", "indicators", "ramps", "spikes", "adversarial", "log_symbols", "mixed"]},
            "mean_zero": {"type": "boolean"},
            "weight": EXPR,
            "p": {"type": "number", "exclusiveMinimum": 1},
            "operator": {"enum": ["hilbert", "averaging"]},
            "r": {"type": "integer", "minimum": 1},
            "symbol": EXPR,
            "k": {"type": "integer", "minimum": 0, "maximum": 8},
            "hypothesis": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "p0": {"type": "number", "minimum": 1},
                    "q0": _EXP_INF,
                    "ar_family": {"enum": ["averaging", "cutoff", "identity"]},
                },
            },
        }
    ),
}

COMMANDS = tuple(SCHEMAS)


class SchemaError(Exception):
    def __init__(self, pointer, message):
        super().__init__(f"{pointer}: {message}")
        self.pointer = pointer


def _pointer(path):
    return "/" + "/".join(str(p) for p in path)


def validate(command: str, cfg: dict) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (len(e.path), list(map(str, e.path))))
    if errors:
        e = errors[0]
        path = list(e.path)
        if e.validator == "additionalProperties" and isinstance(e.instance, dict):
            extra = sorted(set(e.instance) - set(e.schema.get("properties", {})))
            if extra:
                path.append(extra[0])
        raise SchemaError(_pointer(path), e.message)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _exp(x):
    return math.inf if x == "inf" else float(x)


def _grid(cfg, default_level):
    return Grid(int(cfg.get("dim", 1)), int(cfg.get("level", default_level)))


def _fam(cfg, default="all"):
    return CubeFamily.parse(cfg.get("family", default))


def _semantic(fn, pointer):
    """Run a config-dependent constructor, mapping its errors to schema errors."""
    from .extrapolate import WeightClassRefused

    try:
        return fn()
    except WeightClassRefused:
        raise  # a certificate outcome, not a config error
    except (TypeError, ValueError, KeyError) as exc:
        raise SchemaError(pointer, str(exc)) from None


# ---------------------------------------------------------------------------
# commands; each returns (result dict, extra files, exit code)
# ---------------------------------------------------------------------------


def _cmd_maximal(cfg):
    from .maximal import DKernelParams, d_sharp_maximal, maximal, sharp_maximal

    grid = _grid(cfg, 10)
    fam = _fam(cfg)
    f = _semantic(lambda: sample(Expr.from_dict(cfg.get("function", {"family": "indicator"})), grid), "/function")
    ops = cfg.get("operators", ["maximal", "sharp"])
    kernel = DKernelParams(m=float(cfg.get("kernel_m", 2.0)))
    out, files = {}, {}
    for name in ops:
        if name == "maximal":
            g = maximal(f, fam)
        elif name == "sharp":
            g = sharp_maximal(f, fam)
        else:
            g = d_sharp_maximal(f, kernel, fam)
        out[name] = {"max": float(g.values.max()), "min": float(g.values.min()), "l1": g.integral(),
                     "l2": g.lp_norm(2)}
        if cfg.get("csv"):
            files[f"maximal_{name}.csv"] = csv_text(g)
    if cfg.get("csv"):
        files["maximal_input.csv"] = csv_text(f)
    return out, files, EXIT_OK


def _cmd_weight_report(cfg):
    from .weights import WeightFactorySpec, estimate_exponents

    dim = int(cfg.get("dim", 1))
    top = int(cfg.get("level", 13 if dim == 1 else 6))
    levels = list(range(top - 3, top + 1))
    wcfg = cfg["weight"]
    if "expr" in wcfg:
        src = _semantic(lambda: Expr.from_dict(wcfg["expr"]), "/weight/expr")
    else:
        src = _semantic(lambda: WeightFactorySpec.from_dict(wcfg), "/weight")
    rep = _semantic(
        lambda: estimate_exponents(
            src,
            float(cfg.get("p0", 1.0)),
            _exp(cfg.get("q0", "inf")),
            levels=levels,
            dim=dim,
            rho=float(cfg.get("rho", 1.1)),
            family=_fam(cfg, "shifted"),
        ),
        "/weight",
    )
    return rep.to_dict(), {}, EXIT_INCONCLUSIVE if rep.inconclusive else EXIT_OK


def _measure(cfg, grid):
    m = cfg.get("measure", "lebesgue")
    if m == "lebesgue":
        return None
    w = _semantic(lambda: sample(Expr.from_dict(m), grid), "/measure")
    return _semantic(lambda: Measure.weighted(w), "/measure")


def _cmd_czd(cfg):
    from .czd import cz_decompose

    grid = _grid(cfg, 8)
    f = _semantic(lambda: sample(Expr.from_dict(cfg["function"]), grid), "/function")
    res = cz_decompose(f, float(cfg.get("p0", 1.0)), float(cfg["alpha"]), _measure(cfg, grid))
    files = {}
    if cfg.get("csv"):
        files["czd_good.csv"] = csv_text(res.g)
        files["czd_bad.csv"] = csv_text(GridFunction(grid, res.bad_sum()))
    return res.to_dict(), files, EXIT_OK if res.all_passed else EXIT_CERT


def _cmd_czd_grad(cfg):
    from .czd import gradient_cz_decompose

    grid = _grid(cfg, 8)
    f = _semantic(lambda: sample(Expr.from_dict(cfg["function"]), grid), "/function")
    res = _semantic(
        lambda: gradient_cz_decompose(
            f, float(cfg.get("p", 1.0)), float(cfg["alpha"]), _measure(cfg, grid),
            family=_fam(cfg, "dyadic"), pair_seed=int(cfg.get("seed", 0)),
        ),
        "/alpha",
    )
    files = {}
    if cfg.get("csv"):
        files["czd_grad_good.csv"] = csv_text(res.g)
        files["czd_grad_bad.csv"] = csv_text(GridFunction(grid, res.bad_sum()))
    return res.to_dict(), files, EXIT_OK if res.all_passed else EXIT_CERT


def _cmd_goodlambda(cfg):
    from .goodlambda import dsharp_instance, fefferman_stein_instance, goodlambda_sweep
    from .maximal import DKernelParams

    grid = _grid(cfg, 8)
    fam = _fam(cfg)
    f = _semantic(lambda: sample(Expr.from_dict(cfg["function"]), grid), "/function")
    if cfg.get("mean_zero", True):
        f = f.like(f.values - f.values.mean())
    w = _semantic(lambda: sample(Expr.from_dict(cfg["weight"]), grid), "/weight") if "weight" in cfg else None
    if cfg.get("instance", "fefferman-stein") == "fefferman-stein":
        inst = _semantic(lambda: fefferman_stein_instance(f, w, fam), "/weight")
    else:
        inst = _semantic(lambda: dsharp_instance(f, DKernelParams(m=float(cfg.get("kernel_m", 2.0))), w, fam),
                         "/weight")
    K0 = 8.0**grid.dim * inst.a
    Ks = cfg.get("Ks", [K0, 2 * K0, 4 * K0])
    rep = _semantic(
        lambda: goodlambda_sweep(
            inst,
            cfg.get("lambdas", [0.05, 0.1, 0.2, 0.4, 0.8]),
            Ks,
            cfg.get("gammas", [0.01, 0.05, 0.1, 0.5]),
            fam,
            lp_exponents=cfg.get("lp_exponents", [2.0]),
        ),
        "/Ks",
    )
    ok = rep.inclusion_ok and rep.monotone_in_K and rep.monotone_in_gamma and math.isfinite(rep.empirical_C)
    return rep.to_dict(), {}, EXIT_OK if ok else EXIT_CERT


def _cmd_extrapolate(cfg):
    from .extrapolate import WeightClassRefused, build_H_case_a, build_H_case_b, extrapolation_transfer

    grid = _grid(cfg, 10)
    fam = _fam(cfg)
    p, q = float(cfg["p"]), float(cfg["q"])
    p0, q0 = float(cfg.get("p0", 1.0)), _exp(cfg.get("q0", 4.0))
    h = _semantic(lambda: sample(Expr.from_dict(cfg.get("h", {"family": "indicator", "lo": 0.0, "hi": 0.5})), grid),
                  "/h")
    w = _semantic(lambda: sample(Expr.from_dict(cfg.get("weight", {"family": "constant", "c": 1.0})), grid),
                  "/weight")
    kw = dict(K=int(cfg.get("K", 12)), trials=int(cfg.get("trials", 16)), seed=int(cfg.get("seed", 0)),
              family=fam, assume_weight_class=bool(cfg.get("assume_weight_class", False)))
    try:
        if cfg.get("transfer"):
            K = kw.pop("K")
            res = _semantic(lambda: extrapolation_transfer(h, w, p, q, p0, q0, K, **kw), "/p")
            return res, {}, EXIT_OK if res["passed"] and res["certificate"]["passed"] else EXIT_CERT
        if p < q:
            H, cert = _semantic(lambda: build_H_case_a(h, w, p, q, q0, p0, **kw), "/p")
        else:
            H, cert = _semantic(lambda: build_H_case_b(h, w, p, q, q0, p0=p0, **kw), "/p")
    except WeightClassRefused as exc:
        return {"refused": True, "reason": str(exc)}, {}, EXIT_CERT
    files = {"extrapolate_H.csv": csv_text(H)} if cfg.get("csv") else {}
    return cert.to_dict(), files, EXIT_OK if cert.passed else EXIT_CERT


def _cmd_modelop(cfg):
    from .modelops import ModelOperator, hypothesis_check, weighted_norm_ratio
    from .suites import build_suite, realize

    grid = _grid(cfg, 10)
    op = ModelOperator(cfg.get("operator", "hilbert"), int(cfg.get("r", 1)))
    suite = realize(build_suite(cfg.get("suite", "mixed"), grid.dim, int(cfg.get("seed", 0))), grid,
                    mean_zero=bool(cfg.get("mean_zero", False)))
    w = _semantic(lambda: sample(Expr.from_dict(cfg["weight"]), grid), "/weight") if "weight" in cfg else None
    k = int(cfg.get("k", 0))
    b = _semantic(lambda: sample(Expr.from_dict(cfg["symbol"]), grid), "/symbol") if "symbol" in cfg else None
    if k and b is None:
        raise SchemaError("/symbol", "a commutator (k >= 1) needs a symbol")
    out = {"norm_ratio": _semantic(lambda: weighted_norm_ratio(op, w, float(cfg.get("p", 2.0)), suite, b=b, k=k),
                                   "/operator")}
    if "hypothesis" in cfg:
        hc = cfg["hypothesis"]
        out["hypothesis"] = _semantic(
            lambda: hypothesis_check(op, suite, float(hc.get("p0", 1.0)), _exp(hc.get("q0", "inf")),
                                     ar_family=hc.get("ar_family", "averaging")),
            "/hypothesis",
        )
    return out, {}, EXIT_OK


HANDLERS = {
    "maximal": _cmd_maximal,
    "weight-report": _cmd_weight_report,
    "czd": _cmd_czd,
    "czd-grad": _cmd_czd_grad,
    "goodlambda": _cmd_goodlambda,
    "extrapolate": _cmd_extrapolate,
    "modelop": _cmd_modelop,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def run(command: str, cfg: dict, out_dir) -> int:
    """Validate, compute, then write every output atomically.  Returns the exit code."""
    cfg = copy.deepcopy(cfg)
    validate(command, cfg)
    result, files, code = HANDLERS[command](cfg)
    report = {
        "command": command,
        "config": cfg,
        "config_hash": config_hash({"command": command, "config": cfg}),
        "version": __version__,
        "exit_code": code,
        "result": result,
    }
    out_dir = Path(out_dir)
    atomic_write(out_dir / f"{command}.json", dumps(report))
    for name, text in sorted(files.items()):
        atomic_write(out_dir / name, text)
    return code


def _parser():
    ap = argparse.ArgumentParser(prog="weightlab", description="Numerical laboratory for weighted norm inequalities.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path, help="JSON config file")
    ap.add_argument("--out", type=Path, default=Path("."), help="output directory")
    ap.add_argument("--level", type=int, help="grid level (finest level for weight-report)")
    ap.add_argument("--family", choices=["all", "dyadic", "shifted"], help="cube family")
    ap.add_argument("--seed", type=int, help="seed for suites and randomized trials")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = {}
        if args.config is not None:
            try:
                cfg = json.loads(args.config.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise SchemaError("/", f"cannot read config: {exc}") from None
            if not isinstance(cfg, dict):
                raise SchemaError("/", "config must be a JSON object")
        for key in ("level", "family", "seed"):
            val = getattr(args, key)
            if val is not None:
                cfg[key] = val
        return run(args.command, cfg, args.out)
    except SchemaError as exc:
        print(f"schema error at {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
