"""Config-driven command line front end.

Usage::

    uq <subcommand> --config study.json [--workers N] [--log-level LEVEL]
                    [--verbose] [--output-dir DIR]

Subcommands: ``sample``, ``propagate``, ``reliability``, ``sensitivity``,
``surrogate``, ``validate-config``.

A study config is a JSON object::

    {
      "seed": 42,                                  # required
      "workers": 1,
      "output_dir": "uq_output",
      "marginals": [{"family": "normal", "params": {"mean": 0, "std": 1},
                     "name": "x1"}],
      "correlation": null,                         # d x d physical-space matrix
      "model": {"builtin": "linear_limit_state", "params": {"beta": 3}},
      "analysis": {"type": "reliability", "method": "form"}
    }

External models replace ``builtin`` by an ``external`` block with
``template`` (or ``template_file``), ``var_names``, ``command`` (argv list,
run inside each sample's work directory), ``output`` (``{"file": ...,
"format": "single_float" | "delimited", "delimiter": ","}``) and
``timeout`` in seconds.

Every run writes ``resolved_config.json`` (all defaults filled in; feeding it
back reproduces the run), ``result.json`` (no timestamps, byte-identical on
rerun), ``seed.json``, ``uq.log``, ``samples.csv`` where applicable and
``manifest.json`` (config hash, version, seed, timings, file inventory).

Exit codes: 0 success, 1 analysis did not converge, 2 configuration or
runtime error.
"""

import argparse
import csv
import hashlib
import json
import logging
import math
import shutil
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .distributions import GaussianCopula, JointDistribution, make_distribution, suggest_family
from .errors import ConfigError, UQError
from .model_runner import DelimitedRow, ExternalModel, SingleFloatFile, run
from .reliability import LimitState, form, sorm, subset_simulation
from .sampling import latin_hypercube, monte_carlo
from .sensitivity import chatterjee_indices, cramer_von_mises, morris, pce_sensitivity, sobol
from .surrogates import build_basis, gpr_fit, pce_fit
from .testfunctions import CATALOG, builtin_model
from .transformations import NatafTransform, check_correlation

log = logging.getLogger("uqengine.cli")

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_ERROR = 0, 1, 2
ANALYSES = ("sample", "propagate", "reliability", "sensitivity", "surrogate")
LOG_LEVELS = {
    "NOTSET": logging.NOTSET,
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARN": logging.WARNING,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
    "CRITICAL": logging.CRITICAL,
}
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


# --- validation ----------------------------------------------------------------


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def pos_int(v):
    return None if _is_int(v) and v >= 1 else "must be a positive integer"


def nonneg_int(v):
    return None if _is_int(v) and v >= 0 else "must be a non-negative integer"


def pos_num(v):
    return None if _is_num(v) and v > 0 else "must be a positive number"


def nonneg_num(v):
    return None if _is_num(v) and v >= 0 else "must be a non-negative number"


def open_unit(v):
    return None if _is_num(v) and 0 < v < 1 else "must be in (0, 1)"


def half_open_unit(v):
    return None if _is_num(v) and 0 < v <= 1 else "must be in (0, 1]"


def even_int(v):
    return None if _is_int(v) and v >= 2 and v % 2 == 0 else "must be an even integer >= 2"


def choice(*options):
    def check(v):
        return None if v in options else f"must be one of {list(options)}"
    return check


def optional(check):
    def wrapped(v):
        return None if v is None else check(v)
    return wrapped


def num_list(v):
    ok = isinstance(v, list) and v and all(_is_num(x) for x in v)
    return None if ok else "must be a non-empty list of numbers"


def noise_value(v):
    return None if v == "optimize" or (_is_num(v) and v >= 0) else "must be >= 0 or \"optimize\""


SAMPLING = {"method": ("monte_carlo", choice("monte_carlo", "latin_hypercube")),
            "criterion": ("random", choice("random", "centered", "maximin"))}

KNOBS = {
    ("sample", None): {**SAMPLING, "n": (100, pos_int)},
    ("propagate", None): {**SAMPLING, "n": (1000, pos_int)},
    ("reliability", "form"): {"u0": (None, optional(num_list)), "tol_u": (1e-6, pos_num),
                              "tol_g": (1e-6, pos_num), "max_iter": (100, pos_int),
                              "fd_step": (1e-6, pos_num)},
    ("reliability", "subset"): {"n_per_level": (1000, pos_int), "p0": (0.1, open_unit),
                                "proposal_scale": (1.0, pos_num), "max_levels": (20, pos_int)},
    ("sensitivity", "morris"): {"n_trajectories": (10, pos_int), "n_levels": (4, even_int)},
    ("sensitivity", "sobol"): {"n": (1024, pos_int), "bootstrap": (0, nonneg_int)},
    ("sensitivity", "chatterjee"): {"n": (1000, pos_int)},
    ("sensitivity", "cramer_von_mises"): {"n": (1024, pos_int), "m_grid": (100, pos_int)},
    ("sensitivity", "pce"): {"n": (500, pos_int), "truncation": ("total_degree", choice("tensor", "total_degree", "hyperbolic")),
                             "p": (4, nonneg_int), "q": (1.0, half_open_unit),
                             "regressor": ("least_squares", choice("least_squares", "ridge", "lars"))},
    ("surrogate", "gpr"): {"n": (20, pos_int), "kernel": ("rbf", choice("rbf", "matern")),
                           "nu": (None, optional(choice(0.5, 1.5, 2.5))), "noise": (0.0, noise_value),
                           "n_restarts": (10, pos_int), "n_test": (200, nonneg_int)},
    ("surrogate", "pce"): {"n": (200, pos_int), "truncation": ("total_degree", choice("tensor", "total_degree", "hyperbolic")),
                           "p": (4, nonneg_int), "q": (1.0, half_open_unit),
                           "regressor": ("least_squares", choice("least_squares", "ridge", "lars")),
                           "n_test": (200, nonneg_int)},
}
KNOBS[("reliability", "sorm")] = {**KNOBS[("reliability", "form")], "hessian_step": (1e-4, pos_num)}
METHODS = {
    "reliability": ("form", "sorm", "subset"),
    "sensitivity": ("morris", "sobol", "chatterjee", "cramer_von_mises", "pce"),
    "surrogate": ("gpr", "pce"),
}
DEFAULT_METHOD = {"reliability": "form", "sensitivity": "sobol", "surrogate": "gpr"}
TOP_KEYS = ("seed", "workers", "output_dir", "marginals", "correlation", "model", "analysis")


def _unknown_keys(obj, allowed, path, problems):
    for key in obj:
        if key not in allowed:
            problems.append((f"{path}.{key}", f"unknown key; allowed: {sorted(allowed)}"))


def _validate_marginals(raw, problems):
    marginals, names = [], []
    if not isinstance(raw, list) or not raw:
        problems.append(("$.marginals", "must be a non-empty list"))
        return None, [], []
    resolved = []
    for i, spec in enumerate(raw):
        path = f"$.marginals[{i}]"
        if not isinstance(spec, dict):
            problems.append((path, "must be an object with 'family' and 'params'"))
            continue
        _unknown_keys(spec, ("family", "params", "name"), path, problems)
        family = spec.get("family")
        params = spec.get("params", {})
        name = spec.get("name", f"x{i + 1}")
        if not isinstance(name, str) or not name:
            problems.append((f"{path}.name", "must be a non-empty string"))
        if not isinstance(family, str):
            problems.append((f"{path}.family", "is required and must be a string"))
            continue
        if not isinstance(params, dict):
            problems.append((f"{path}.params", "must be an object"))
            continue
        try:
            dist = make_distribution(family, params)
        except UQError as exc:
            if "unknown distribution family" in str(exc):
                hint = suggest_family(family)
                msg = f"unknown family {family!r}" + (f"; did you mean {hint!r}?" if hint else "")
                problems.append((f"{path}.family", msg))
            else:
                problems.append((f"{path}.params", str(exc)))
            continue
        except TypeError as exc:
            problems.append((f"{path}.params", str(exc)))
            continue
        marginals.append(dist)
        names.append(name)
        resolved.append({"family": dist.family, "params": dict(dist.params), "name": name})
    if len(marginals) != len(raw):
        return None, [], []
    return marginals, names, resolved


def _validate_model(raw, d, names, problems):
    path = "$.model"
    if not isinstance(raw, dict) or len(set(raw) & {"builtin", "external"}) != 1:
        problems.append((path, "must be an object with exactly one of 'builtin' or 'external'"))
        return None
    if "builtin" in raw:
        _unknown_keys(raw, ("builtin", "params"), path, problems)
        name = raw["builtin"]
        params = raw.get("params", {})
        if name not in CATALOG:
            problems.append((f"{path}.builtin", f"unknown builtin {name!r}; available: {sorted(CATALOG)}"))
            return None
        if not isinstance(params, dict):
            problems.append((f"{path}.params", "must be an object"))
            return None
        entry = CATALOG[name]
        for key in params:
            if key not in entry.params:
                problems.append((f"{path}.params.{key}", f"unknown parameter for {name}; allowed: {list(entry.params)}"))
        if entry.arity is not None and d is not None and d != entry.arity:
            problems.append((path, f"{name} takes {entry.arity} inputs but $.marginals has {d}"))
        return {"builtin": name, "params": params}
    ext = raw["external"]
    epath = f"{path}.external"
    if not isinstance(ext, dict):
        problems.append((epath, "must be an object"))
        return None
    allowed = ("template", "template_file", "var_names", "command", "output", "timeout", "input_filename")
    _unknown_keys(ext, allowed, epath, problems)
    if ("template" in ext) == ("template_file" in ext):
        problems.append((epath, "give exactly one of 'template' or 'template_file'"))
    var_names = ext.get("var_names", names)
    if not isinstance(var_names, list) or not all(isinstance(v, str) for v in var_names):
        problems.append((f"{epath}.var_names", "must be a list of strings"))
    elif d is not None and len(var_names) != d:
        problems.append((f"{epath}.var_names", f"has {len(var_names)} names but $.marginals has {d}"))
    cmd = ext.get("command")
    if not isinstance(cmd, list) or not cmd or not all(isinstance(c, str) for c in cmd):
        problems.append((f"{epath}.command", "must be a non-empty list of strings (argv)"))
    out = ext.get("output")
    if not isinstance(out, dict) or not isinstance(out.get("file"), str):
        problems.append((f"{epath}.output", "must be an object with a 'file' path"))
        out = {}
    fmt = out.get("format", "single_float")
    if fmt not in ("single_float", "delimited"):
        problems.append((f"{epath}.output.format", "must be 'single_float' or 'delimited'"))
    timeout = ext.get("timeout", 60)
    if pos_num(timeout):
        problems.append((f"{epath}.timeout", pos_num(timeout)))
    resolved = {
        "var_names": var_names,
        "command": cmd,
        "output": {"file": out.get("file"), "format": fmt, "delimiter": out.get("delimiter", ",")},
        "timeout": timeout,
        "input_filename": ext.get("input_filename", "input.txt"),
    }
    if "template" in ext:
        resolved["template"] = ext["template"]
    else:
        resolved["template_file"] = ext["template_file"]
    return {"external": resolved}


def _validate_analysis(raw, subcommand, problems):
    path = "$.analysis"
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        problems.append((path, "must be an object"))
        return None
    kind = raw.get("type", subcommand if subcommand in ANALYSES else "sample")
    if kind not in ANALYSES:
        problems.append((f"{path}.type", f"must be one of {list(ANALYSES)}"))
        return None
    if subcommand in ANALYSES and kind != subcommand:
        problems.append((f"{path}.type", f"is {kind!r} but the subcommand is {subcommand!r}"))
        return None
    method = raw.get("method", DEFAULT_METHOD.get(kind))
    if kind in METHODS:
        if method not in METHODS[kind]:
            problems.append((f"{path}.method", f"must be one of {list(METHODS[kind])}"))
            return None
        knobs = KNOBS[(kind, method)]
    else:
        knobs = KNOBS[(kind, None)]
    resolved = {"type": kind}
    if kind in METHODS:
        resolved["method"] = method
    allowed = set(knobs) | {"type"} | ({"method"} if kind in METHODS else set())
    _unknown_keys(raw, allowed, path, problems)
    for key, (default, check) in knobs.items():
        value = raw.get(key, default)
        msg = check(value)
        if msg:
            problems.append((f"{path}.{key}", msg))
        resolved[key] = value
    return resolved


def parse_config(raw, subcommand="validate-config"):
    """Validate a config object; return it with every default filled in.

    All problems are collected and raised together as :class:`ConfigError`.
    """
    problems = []
    if not isinstance(raw, dict):
        raise ConfigError([("$", "config must be a JSON object")])
    _unknown_keys(raw, TOP_KEYS, "$", problems)
    seed = raw.get("seed")
    if not _is_int(seed) or seed < 0:
        problems.append(("$.seed", "is required and must be a non-negative integer"))
    workers = raw.get("workers", 1)
    if pos_int(workers):
        problems.append(("$.workers", pos_int(workers)))
    output_dir = raw.get("output_dir", "uq_output")
    if not isinstance(output_dir, str) or not output_dir:
        problems.append(("$.output_dir", "must be a non-empty string"))
    marginals, names, marg_resolved = _validate_marginals(raw.get("marginals"), problems)
    d = len(marginals) if marginals else (len(raw["marginals"]) if isinstance(raw.get("marginals"), list) else None)

    corr = raw.get("correlation")
    if corr is not None:
        shape_ok = isinstance(corr, list) and all(isinstance(r, list) for r in corr)
        arr = np.array(corr, dtype=float) if shape_ok and len({len(r) for r in corr}) == 1 else None
        if arr is None or arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            problems.append(("$.correlation", "must be a square matrix (list of equal-length rows)"))
        elif d is not None and arr.shape[0] != d:
            problems.append(("$.correlation", f"is {arr.shape[0]}x{arr.shape[1]} but $.marginals has {d} entries"))
        else:
            try:
                check_correlation(arr)
            except UQError as exc:
                problems.append(("$.correlation", str(exc)))

    analysis = _validate_analysis(raw.get("analysis"), subcommand, problems)
    model = None
    if "model" in raw:
        model = _validate_model(raw["model"], d, names, problems)
    elif analysis is not None and analysis["type"] != "sample":
        problems.append(("$.model", f"is required for {analysis['type']}"))
    if analysis is not None and corr is not None and analysis["type"] in ("sensitivity",):
        problems.append(("$.correlation", "sensitivity analysis requires independent inputs"))
    if analysis is not None and corr is not None and analysis.get("method") == "latin_hypercube":
        problems.append(("$.analysis.method", "latin_hypercube requires independent inputs (no $.correlation)"))
    if problems:
        raise ConfigError(problems)
    resolved = {
        "seed": seed,
        "workers": workers,
        "output_dir": output_dir,
        "marginals": marg_resolved,
        "correlation": corr,
        "analysis": analysis,
    }
    if model is not None:
        resolved["model"] = model
    return resolved


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(resolved):
    return hashlib.sha256(canonical_json(resolved).encode()).hexdigest()


# --- study construction --------------------------------------------------------


def _build_inputs(cfg):
    marginals = [make_distribution(m["family"], m["params"]) for m in cfg["marginals"]]
    if cfg["correlation"] is None:
        return marginals, JointDistribution(marginals), None
    nataf = NatafTransform(marginals, np.array(cfg["correlation"], dtype=float))
    return marginals, JointDistribution(marginals, GaussianCopula(nataf.rho_z)), nataf


def _build_model(cfg, config_dir, output_dir):
    spec = cfg["model"]
    d = len(cfg["marginals"])
    if "builtin" in spec:
        return builtin_model(spec["builtin"], spec["params"], d)
    ext = spec["external"]
    if "template" in ext:
        text = ext["template"]
    else:
        text = (config_dir / ext["template_file"]).read_text()
    out = ext["output"]
    parser = (SingleFloatFile(out["file"]) if out["format"] == "single_float"
              else DelimitedRow(out["file"], out["delimiter"]))
    root = output_dir / "runs"
    if root.exists():
        # only our own per-sample directories are removed before a rerun
        entries = list(root.iterdir())
        if all(p.is_dir() and p.name.startswith("run_") for p in entries):
            shutil.rmtree(root)
        else:
            raise UQError(f"{root} contains files not created by a previous run; refusing to clear it")
    return ExternalModel(text, ext["var_names"], ext["command"], parser, timeout=ext["timeout"],
                         workdir_root=str(root), input_filename=ext["input_filename"])


def _design(cfg, marginals, joint, n, gen, method=None, criterion=None):
    method = method or cfg["analysis"].get("method", "monte_carlo")
    if method == "latin_hypercube":
        return latin_hypercube(marginals, n, criterion=criterion or cfg["analysis"].get("criterion", "random"),
                               rng=gen).samples
    return monte_carlo(joint, n, rng=gen).samples


def _stats(y):
    q = np.quantile(y, [0.05, 0.5, 0.95], axis=0)
    return {
        "mean": y.mean(axis=0).tolist(),
        "std": y.std(axis=0, ddof=1).tolist() if len(y) > 1 else None,
        "min": y.min(axis=0).tolist(),
        "max": y.max(axis=0).tolist(),
        "quantiles": {"0.05": q[0].tolist(), "0.5": q[1].tolist(), "0.95": q[2].tolist()},
    }


def _column_names(cfg):
    spec = cfg.get("model", {})
    if "external" in spec:
        return list(spec["external"]["var_names"])
    return [m["name"] for m in cfg["marginals"]]


def run_analysis(cfg, config_dir, output_dir):
    """Execute the analysis; return ``(result, converged, samples_table, extra_files)``."""
    a = cfg["analysis"]
    kind = a["type"]
    seed = cfg["seed"]
    workers = cfg["workers"]
    gen = np.random.default_rng(seed)
    marginals, joint, nataf = _build_inputs(cfg)
    names = _column_names(cfg)
    model = _build_model(cfg, config_dir, output_dir) if "model" in cfg else None
    warnings = []

    if kind == "sample":
        X = _design(cfg, marginals, joint, a["n"], gen)
        result = {"method": a["method"], "n": a["n"], "input_stats": _stats(X)}
        return result, True, (names, X, None, None), {}

    if kind == "propagate":
        X = _design(cfg, marginals, joint, a["n"], gen)
        rep = run(model, X, workers)
        ok = rep.ok_mask
        failed = rep.failed_indices
        if failed:
            msg = f"excluded {len(failed)} failed sample(s) from the statistics: indices {failed}"
            log.warning(msg)
            warnings.append(msg)
            for i in failed:
                log.warning("sample %d failed: %s", i, rep.statuses[i].reason)
        if not ok.any():
            raise UQError("every model evaluation failed")
        result = {
            "method": a["method"],
            "n": a["n"],
            "n_ok": int(ok.sum()),
            "n_failed": len(failed),
            "failed_indices": failed,
            "output_stats": _stats(rep.outputs[ok]),
        }
        status = ["ok" if s.ok else s.reason for s in rep.statuses]
        return dict(result, warnings=warnings), True, (names, X, rep.outputs, status), {}

    if kind == "reliability":
        ls = LimitState(model, joint, workers=workers, transform=nataf)
        method = a["method"]
        if method in ("form", "sorm"):
            u0 = None if a["u0"] is None else np.array(a["u0"], dtype=float)
            fr = form(ls, u0=u0, tol_u=a["tol_u"], tol_g=a["tol_g"], max_iter=a["max_iter"], fd_step=a["fd_step"])
            if method == "form" or not fr.converged:
                result = fr.to_dict()
                if method == "sorm":
                    warnings.append("FORM did not converge; SORM was not attempted")
                    result["requested_method"] = "sorm"
            else:
                result = sorm(fr, ls, fd_step=a["hessian_step"]).to_dict()
                result["converged"] = True
            result["n_model_evals"] = ls.n_evals
            return dict(result, warnings=warnings), fr.converged, None, {}
        res = subset_simulation(ls, n_per_level=a["n_per_level"], p0=a["p0"],
                                proposal_scale=a["proposal_scale"], max_levels=a["max_levels"], rng=seed)
        return res.to_dict(), res.converged, None, {}

    if kind == "sensitivity":
        method = a["method"]
        if method == "morris":
            res = morris(model, joint, a["n_trajectories"], a["n_levels"], rng=seed, workers=workers)
        elif method == "sobol":
            res = sobol(model, joint, a["n"], rng=seed, bootstrap=a["bootstrap"], workers=workers)
        elif method == "chatterjee":
            res = chatterjee_indices(model, joint, a["n"], rng=seed, workers=workers)
        elif method == "cramer_von_mises":
            res = cramer_von_mises(model, joint, a["n"], a["m_grid"], rng=seed, workers=workers)
        else:
            X = latin_hypercube(marginals, a["n"], rng=gen).samples
            y = run(model, X, workers).require_ok()[:, 0]
            pce = pce_fit(X, y, build_basis(a["truncation"], len(marginals), a["p"], a["q"]), marginals, a["regressor"])
            res = pce_sensitivity(pce)
            out = res.to_dict()
            out["n_model_evals"] = a["n"]
            out["metadata"]["loo_error"] = pce.validation_error
            return dict(out, inputs=names), True, None, {}
        return dict(res.to_dict(), inputs=names), True, None, {}

    # surrogate
    method = a["method"]
    X = _design(cfg, marginals, joint, a["n"], gen, "latin_hypercube" if nataf is None else "monte_carlo", "random")
    y = run(model, X, workers).require_ok()[:, 0]
    if method == "gpr":
        sm = gpr_fit(X, y, kernel=a["kernel"], nu=a["nu"], noise=a["noise"], n_restarts=a["n_restarts"], rng=gen)
        summary = {"kernel": sm.kernel.to_dict(), "noise_variance": sm.noise_variance, "lml": sm.lml}
    else:
        basis = build_basis(a["truncation"], len(marginals), a["p"], a["q"])
        sm = pce_fit(X, y, basis, marginals, a["regressor"])
        summary = {"mean": sm.mean(), "variance": sm.variance(), "loo_error": sm.validation_error,
                   "basis_size": basis.size, "n_active": int(np.count_nonzero(sm.coefficients))}
    result = {"method": method, "n_train": a["n"], "model": summary}
    if a["n_test"]:
        Xt = monte_carlo(joint, a["n_test"], rng=gen).samples
        yt = run(model, Xt, workers).require_ok()[:, 0]
        err = sm(Xt) - yt
        vt = float(np.var(yt))
        result["validation"] = {
            "n_test": a["n_test"],
            "rmse": float(np.sqrt(np.mean(err**2))),
            "q2": float(1 - np.mean(err**2) / vt) if vt > 0 else None,
        }
    return result, True, (names, X, y[:, None], None), {"surrogate.json": sm.to_dict()}


# --- outputs -------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _write_json(path, obj):
    path.write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n")


def _write_samples(path, names, X, Y, status):
    header = list(names)
    if Y is not None:
        header += ["y"] if Y.shape[1] == 1 else [f"y{k + 1}" for k in range(Y.shape[1])]
    if status is not None:
        header.append("status")
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(X.shape[0]):
            row = [format(v, ".17g") for v in X[i]]
            if Y is not None:
                row += ["" if not math.isfinite(v) else format(v, ".17g") for v in Y[i]]
            if status is not None:
                row.append(status[i])
            w.writerow(row)


def _sha256(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


# --- logging -------------------------------------------------------------------


def parse_level(name):
    key = str(name).upper()
    if key not in LOG_LEVELS:
        raise ConfigError([("--log-level", f"unknown level {name!r}; use one of NOTSET, DEBUG, INFO, WARN, ERROR, CRITICAL")])
    return LOG_LEVELS[key]


def _setup_logging(level):
    logger = logging.getLogger("uqengine")
    for h in list(logger.handlers):
        logger.removeHandler(h)
        h.close()
    logger.setLevel(max(level, 1))
    logger.propagate = False
    h = logging.StreamHandler(sys.stderr)
    h.setLevel(level)
    h.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(h)
    return logger


def _add_logfile(logger, path, level):
    fh = logging.FileHandler(path, mode="w")
    fh.setLevel(level)
    fh.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(fh)


def _teardown_logging(logger):
    for h in list(logger.handlers):
        h.flush()
        logger.removeHandler(h)
        h.close()


# --- entry point ---------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="study config (JSON)")
    common.add_argument("--workers", type=int, help="parallel model workers (overrides the config)")
    common.add_argument("--log-level", help="NOTSET, DEBUG, INFO, WARN, ERROR (default) or CRITICAL")
    common.add_argument("--verbose", action="store_true", help="same as --log-level INFO")
    common.add_argument("--output-dir", help="output directory (overrides the config)")
    parser = argparse.ArgumentParser(prog="uq", description="Uncertainty quantification studies from JSON configs.")
    parser.add_argument("--version", action="version", version=f"uq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*ANALYSES, "validate-config"):
        sub.add_parser(name, parents=[common], help=f"run a {name} study" if name in ANALYSES else "check a config")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logger = _setup_logging(logging.ERROR)
    debug = False
    try:
        if args.log_level is not None:
            level = parse_level(args.log_level)
        else:
            level = logging.INFO if args.verbose else logging.ERROR
        debug = level <= logging.DEBUG
        logger = _setup_logging(level)
        config_path = Path(args.config)
        try:
            raw = json.loads(config_path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError([("$", f"invalid JSON: {exc}")]) from exc
        if args.workers is not None:
            raw = dict(raw, workers=args.workers)
        if args.output_dir is not None:
            raw = dict(raw, output_dir=args.output_dir)
        cfg = parse_config(raw, args.command)
        if args.command == "validate-config":
            print(json.dumps(cfg, sort_keys=True, indent=2))
            return EXIT_OK
        return _run_study(cfg, config_path.parent, logger, level)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_ERROR
    except Exception as exc:  # no raw tracebacks unless DEBUG
        if debug:
            log.exception("run failed")
        else:
            log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_ERROR
    finally:
        _teardown_logging(logger)


def _run_study(cfg, config_dir, logger, level):
    started = time.time()
    t0 = time.perf_counter()
    out = Path(cfg["output_dir"])
    if not out.is_absolute():
        out = Path.cwd() / out
    out.mkdir(parents=True, exist_ok=True)
    _add_logfile(logger, out / "uq.log", level)
    log.info("running %s study, seed %d, %d worker(s)", cfg["analysis"]["type"], cfg["seed"], cfg["workers"])

    files = {}
    _write_json(out / "resolved_config.json", cfg)
    files["resolved_config.json"] = "resolved configuration"
    _write_json(out / "seed.json", {"seed": cfg["seed"], "generator": "PCG64",
                                    "streams": "independent chains/streams use seed + index"})
    files["seed.json"] = "seed record"

    result, converged, table, extra = run_analysis(cfg, config_dir, out)
    result = dict(result, analysis=cfg["analysis"]["type"], seed=cfg["seed"])
    _write_json(out / "result.json", result)
    files["result.json"] = "analysis result"
    if table is not None:
        _write_samples(out / "samples.csv", *table)
        files["samples.csv"] = "inputs (and outputs) per sample"
    for name, obj in extra.items():
        _write_json(out / name, obj)
        files[name] = "fitted surrogate"
    if not converged:
        log.error("analysis did not converge; see result.json")
    for h in logger.handlers:
        h.flush()
    files["uq.log"] = "log"
    elapsed = time.perf_counter() - t0
    manifest = {
        "config_hash": config_hash(cfg),
        "artifact_version": __version__,
        "seed": cfg["seed"],
        "timings": {"started_unix": started, "elapsed_s": elapsed},
        "files": [
            {"name": name, "description": desc, "bytes": (out / name).stat().st_size, "sha256": _sha256(out / name)}
            for name, desc in sorted(files.items())
        ],
    }
    _write_json(out / "manifest.json", manifest)
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
