"""Command line: bounds, regime checks, simulation and sandwich comparisons.

Every command reads one JSON config, validates it, and writes CSV tables
plus ``manifest.json`` into ``--out``.  Each CSV starts with a
``# manifest_sha256=...`` line; the hash covers the resolved config and
library version but not ``--workers`` or ``--out``, so reruns with other
worker counts are byte-identical.
"""

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from . import __version__, chainbound, entropy, procsim

EXIT_OK, EXIT_VIOLATION, EXIT_ERROR = 0, 1, 2
COMMANDS = ("bound", "classify", "simulate", "compare", "profile-eval")

_grid = {
    "oneOf": [
        {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        {
            "type": "object",
            "properties": {
                "min": {"type": "number", "exclusiveMinimum": 0},
                "max": {"type": "number", "exclusiveMinimum": 0},
                "num": {"type": "integer", "minimum": 1},
            },
            "required": ["min", "max", "num"],
            "additionalProperties": False,
        },
    ]
}
_rule = {
    "type": "object",
    "properties": {
        "kind": {"enum": list(procsim.SIGMA_RULES + procsim.LOGN_RULES)},
        "gamma": {"type": "number", "exclusiveMinimum": 0},
        "beta": {"type": "number"},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 2},
        "table": {"type": "array", "items": {"type": "number"}},
    },
    "required": ["kind"],
    "additionalProperties": False,
}
_law = {
    "type": "object",
    "properties": {
        "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 2},
        "scale": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "law": _law,
        "profile": {
            "type": "object",
            "properties": {
                "family": {"enum": list(entropy.FAMILIES)},
                "csv": {"type": "string"},
                "pairs": {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}},
            },
            "required": ["family"],
        },
        "process": {
            "type": "object",
            "properties": {
                "kind": {"enum": list(procsim.KINDS)},
                "law": _law,
                "sigma_rule": _rule,
                "logN_rule": {"oneOf": [_rule, {"type": "null"}]},
                "truncation_depth": {"oneOf": [{"type": "integer", "minimum": 1}, {"type": "null"}]},
            },
            "required": ["kind", "sigma_rule"],
            "additionalProperties": False,
        },
        "theorem": {"enum": list(entropy.THEOREMS)},
        "r": {"type": ["number", "null"], "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "eps_grid": _grid,
        "lambda_grid": _grid,
        "n_samples": {"type": "integer", "minimum": 1},
        "level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "corrupt_lower": {"type": "number"},
    },
    "additionalProperties": False,
}

DEFAULTS = {"seed": 0, "n_samples": 100000, "level": 0.99, "r": None, "corrupt_lower": 0.0}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config and artifact helpers


@dataclass
class Run:
    command: str
    config: dict
    out: str
    workers: int = 1
    force: bool = False
    digest: str = ""
    files: list = field(default_factory=list)


def resolve_config(raw, command, seed=None):
    """Validate ``raw`` and fill defaults; ``seed`` (from ``--seed``) wins over the file."""
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config invalid at {'/'.join(map(str, exc.absolute_path)) or '<root>'}: {exc.message}") from None
    if raw.get("command", command) != command:
        raise ConfigError(f"config is for {raw['command']!r}, not {command!r}")
    cfg = {**DEFAULTS, **raw, "command": command}
    if seed is not None:
        cfg["seed"] = int(seed)
    need = {
        "bound": ("profile", "theorem", "eps_grid"),
        "classify": ("profile",),
        "simulate": ("process", "eps_grid"),
        "compare": ("process", "eps_grid"),
        "profile-eval": ("profile", "eps_grid"),
    }[command]
    missing = [k for k in need if k not in cfg]
    if missing:
        raise ConfigError(f"{command} needs {', '.join(missing)}")
    cfg.setdefault("law", {"alpha": 2.0, "scale": 1.0})
    cfg["law"] = {"alpha": float(cfg["law"].get("alpha", 2.0)), "scale": float(cfg["law"].get("scale", 1.0))}
    if "process" in cfg:
        p = dict(cfg["process"])
        p.setdefault("law", cfg["law"])
        p.setdefault("logN_rule", None)
        p.setdefault("truncation_depth", None)
        try:
            spec = procsim.ProcessSpec.from_dict(p)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"process spec: {exc}") from None
        cfg["process"] = spec.to_dict()
    if "profile" in cfg:
        try:
            prof = entropy.EntropyProfile.from_dict(cfg["profile"])
        except (ValueError, TypeError, OSError) as exc:
            raise ConfigError(f"profile: {exc}") from None
        cfg["profile"] = prof.to_dict()
    return cfg


def grid(g):
    if isinstance(g, dict):
        return [float(x) for x in np.geomspace(g["min"], g["max"], g["num"])]
    return [float(x) for x in g]


def manifest_digest(cfg):
    blob = json.dumps({"config": cfg, "version": __version__}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def fmt(x):
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(run, name, columns, rows):
    buf = io.StringIO()
    buf.write(f"# manifest_sha256={run.digest}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    path = os.path.join(run.out, name)
    with open(path, "w", newline="") as f:
        f.write(buf.getvalue())
    run.files.append(name)
    return path


def write_json(run, name, obj):
    path = os.path.join(run.out, name)
    with open(path, "w") as f:
        json.dump({"manifest_sha256": run.digest, **obj}, f, indent=2, sort_keys=True, default=_jsonable)
        f.write("\n")
    run.files.append(name)
    return path


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if hasattr(x, "to_dict"):
        return x.to_dict()
    if x is entropy.DIVERGENT:
        return "Divergent"
    return repr(x)


def write_manifest(run):
    write_json(run, "manifest.json", {"version": __version__, "command": run.command, "config": run.config, "files": sorted(run.files)})


def _law(cfg):
    return procsim.law_from_dict(cfg["law"])


def _profile(cfg):
    return entropy.EntropyProfile.from_dict(cfg["profile"])


def _spec(cfg):
    return procsim.ProcessSpec.from_dict(cfg["process"])


def _log(x):
    return math.log(x) if x > 0 else -math.inf


# ---------------------------------------------------------------------------
# commands


def cmd_bound(run):
    cfg = run.config
    p, law = _profile(cfg), _law(cfg)
    rows, results = [], []
    for eps in grid(cfg["eps_grid"]):
        res = chainbound.theorem_bound(p, law, eps, cfg["theorem"], r=cfg["r"], force=run.force)
        rows.append(
            {
                "eps": eps,
                "log_bound": res.value,
                "radius_factor": res.radius_factor,
                "realized_K": res.constants.get("K_rate"),
                "layers_used": res.n_layers,
            }
        )
        results.append(res.to_dict())
    write_csv(run, "bound.csv", ["eps", "log_bound", "radius_factor", "realized_K", "layers_used"], rows)
    write_json(run, "bound_results.json", {"results": results})
    return EXIT_OK


def cmd_classify(run):
    cfg = run.config
    dec = entropy.classify_regime(_profile(cfg), _law(cfg).alpha)
    doc = dec.to_dict()
    write_json(run, "classify.json", {"decision": doc})
    print(json.dumps(doc, sort_keys=True, default=_jsonable))
    return EXIT_OK


def cmd_profile_eval(run):
    cfg = run.config
    p, alpha = _profile(cfg), _law(cfg).alpha
    rows = []
    for eps in grid(cfg["eps_grid"]):
        le = math.log(eps)
        try:
            lm = float(entropy.log_psi_majorant(p, le))
        except entropy.UnboundedProfile:
            lm = math.inf
        ph = entropy.psi_hat(p, min(eps, p.sigma), alpha) if alpha < 2 else None
        rows.append(
            {
                "eps": eps,
                "log_psi": float(entropy.log_psi(p, le)),
                "log_psi_majorant": lm,
                "psi_tilde": entropy.psi_tilde(p, min(eps, p.sigma)),
                "psi_hat": "Divergent" if ph is entropy.DIVERGENT else ph,
            }
        )
    write_csv(run, "profile.csv", ["eps", "log_psi", "log_psi_majorant", "psi_tilde", "psi_hat"], rows)
    rep = entropy.regularity_report(p)
    write_json(run, "regularity.json", {"c1_inf": rep.c1_inf, "c2_sup": rep.c2_sup})
    return EXIT_OK


def _simulate(run, spec):
    cfg = run.config
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", procsim.WindowTooDeep)
        return procsim.mc_small_dev(
            spec, grid(cfg["eps_grid"]), cfg["n_samples"], cfg["level"], cfg["seed"], run.workers
        )


def cmd_simulate(run):
    spec = _spec(run.config)
    rows = []
    for e in _simulate(run, spec):
        row = {"eps": e.eps, "p_hat": e.p_hat, "ci_low": e.ci_low, "ci_high": e.ci_high,
               "n": e.n_samples, "depth": e.truncation_depth, "warning": e.warning}
        if spec.kind == "IndepSequence":
            row["exact_log_prob"] = procsim.exact_indep_logprob(spec, e.eps)
        rows.append(row)
    cols = ["eps", "p_hat", "ci_low", "ci_high", "n", "depth", "warning"]
    if spec.kind == "IndepSequence":
        cols.append("exact_log_prob")
    write_csv(run, "simulate.csv", cols, rows)
    return EXIT_OK


def sandwich(spec, eps, est, corrupt_lower=0.0):
    """One row of the comparison table with its list of violations."""
    lower = upper = exact = None
    d = spec.depth()
    if spec.kind == "IndepSequence":
        # the exact value is its own lower and upper bound
        exact = lower = upper = procsim.exact_indep_logprob(spec, eps, d)
    elif spec.kind == "SumOfMaxima":
        lower = procsim.level_chain_lower(spec, eps, d)
        upper = procsim.summax_upper(spec, eps, d)
    else:
        lower = procsim.level_chain_lower(spec, eps, d)
        upper = procsim.tree_levelmax_upper(spec, eps, d)
        if spec.law.is_gaussian:
            upper = min(upper, procsim.tree_upper_bound_gauss(spec, eps, d)[0])
    if lower is not None:
        lower += corrupt_lower
    lo, hi = _log(est.ci_low), _log(est.ci_high)
    bad = []
    if lower is not None and lower > hi:
        bad.append("lower>mc_high")
    if upper is not None and upper < lo:
        bad.append("upper<mc_low")
    if lower is not None and upper is not None and lower > upper:
        bad.append("lower>upper")
    if exact is not None and not lo <= exact <= hi:
        bad.append("exact_outside_ci")
    return {
        "eps": eps, "lower": lower, "mc_low": lo, "mc_high": hi, "upper": upper, "exact": exact,
        "p_hat": est.p_hat, "n": est.n_samples, "depth": est.truncation_depth, "warning": est.warning,
        "violations": ";".join(bad),
    }


def cmd_compare(run):
    spec = _spec(run.config)
    if spec.depth() is None:
        raise ConfigError("compare needs a finite truncation_depth so every column describes one process")
    rows = [sandwich(spec, e.eps, e, run.config["corrupt_lower"]) for e in _simulate(run, spec)]
    cols = ["eps", "lower", "mc_low", "mc_high", "upper", "exact", "p_hat", "n", "depth", "warning", "violations"]
    write_csv(run, "compare.csv", cols, rows)
    bad = [r for r in rows if r["violations"]]
    for r in bad:
        print(f"violation at eps={r['eps']:.6g}: {r['violations']}", file=sys.stderr)
    return EXIT_VIOLATION if bad else EXIT_OK


HANDLERS = {
    "bound": cmd_bound,
    "classify": cmd_classify,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "profile-eval": cmd_profile_eval,
}


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    ap = argparse.ArgumentParser(prog="smalldev", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--out", default=".", metavar="DIR")
        sp.add_argument("--seed", type=int, default=None, metavar="N")
        sp.add_argument("--workers", type=int, default=1, metavar="N")
        sp.add_argument("--force", action="store_true", help="run even when theorem hypotheses fail")
    return ap


def _error(out, kind, message, **extra):
    doc = {"error": kind, "message": message, **extra}
    print(json.dumps(doc, sort_keys=True))
    if out and os.path.isdir(out):
        with open(os.path.join(out, "error.json"), "w") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
            f.write("\n")
    return EXIT_ERROR


def main(argv=None):
    args = build_parser().parse_args(argv)
    os.makedirs(args.out, exist_ok=True)
    try:
        with open(args.config) as f:
            raw = json.load(f)
        cfg = resolve_config(raw, args.command, args.seed)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        return _error(args.out, "ConfigError", str(exc))
    run = Run(args.command, cfg, args.out, max(1, args.workers), args.force, manifest_digest(cfg))
    try:
        code = HANDLERS[args.command](run)
    except chainbound.HypothesisError as exc:
        return _error(args.out, "HypothesisError", str(exc), theorem=cfg.get("theorem"))
    except (chainbound.DivergentScheme, entropy.UnboundedProfile, ConfigError) as exc:
        return _error(args.out, type(exc).__name__, str(exc))
    write_manifest(run)
    return code


if __name__ == "__main__":
    sys.exit(main())
