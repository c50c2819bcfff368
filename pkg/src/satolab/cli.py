"""Config-driven command line: simulate, classify, construct.

Each command reads one TOML file (or a JSON report, whose embedded config is
re-run), validates every key before computing, and writes a JSON report that
embeds the resolved config and the toolkit version.  Exit codes: 1 config,
2 compute, 3 IO.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from .errors import ConfigError, NotConstructible, SatoError, SpecError
from .g_toolkit import (
    ExpPowerLogH,
    GFunction,
    build_g_from_tail,
    build_K_from_g,
    is_submultiplicative,
    make_g,
)
from .levy_core import (
    BesselHit,
    BesselLastExit,
    Custom,
    DirectionMeasure,
    ExpTiltedKernel,
    LevyProfile,
    Lognormal,
    PowerKernel,
    ProcessSpec,
    Stable,
    StepKernel,
    StudentT,
    TabulatedKernel,
    TailFamily,
    TailFn,
    Weibull,
    K_tailfn,
)
from .limsup_lab import run_experiment
from .sampler import simulate_sequence
from .tail_analysis import RadialDistribution, classify_D, classify_OR, classify_OS

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_CONFIG, EXIT_COMPUTE, EXIT_IO = 1, 2, 3

# --------------------------------------------------------------------------
# schema: key -> (type, default); REQUIRED marks mandatory keys

REQUIRED = object()
ANY = object()

MARGINAL_KEYS = {
    "Stable": {"alpha": (float, REQUIRED), "scale": (float, 1.0), "spectral": (str, "symmetric")},
    "Lognormal": {},
    "StudentT": {"m": (float, REQUIRED)},
    "Weibull": {"alpha": (float, REQUIRED)},
    "BesselHit": {"bm_dim": (int, REQUIRED)},
    "BesselLastExit": {"bm_dim": (int, REQUIRED)},
    "Custom": {"directions": (str, "symmetric"), "gaussian_part": (list, None), "drift": (list, None),
               "kernel": (dict, REQUIRED), "k_family": (dict, None)},
}
SPEC_KEYS = {"marginal": (str, REQUIRED), "H": (float, None), "d": (int, 1), "dilation": (float, 1.0)}
KERNEL_KEYS = {
    "power": {"alpha": (float, REQUIRED), "c": (float, 1.0)},
    "exp_tilted": {"alpha": (float, REQUIRED), "lam": (float, REQUIRED), "c": (float, 1.0)},
    "step": {"breaks": (list, REQUIRED), "values": (list, REQUIRED)},
    "tabulated": {"table": (str, None), "r": (list, None), "values": (list, None),
                  "lo_exp": (float, 0.0), "hi_exp": (float, None)},
}
RUN_KEYS = {"N": (int, REQUIRED), "paths": (int, 100), "seed": (int, 0), "series_tol": (float, 1e-3),
            "epsilon": (float, None)}
OUTPUT_KEYS = {"directory": (str, "."), "name": (str, None), "formats": (list, ["text"]),
               "write_paths": (bool, False)}
TAIL_KEYS = {"source": (str, "family"), "family": (str, None), "params": (dict, {}), "table": (str, None),
             "kind": (str, "custom"), "r_min": (float, 1e-2), "r_max": (float, 1e12), "n": (int, 400)}
CLASSIFY_KEYS = {"class": (str, REQUIRED), "route": (str, "auto"), "decades": (float, 6.0),
                 "budget": (int, 100_000), "x_max": (float, 1e6)}
H_KEYS = {"family": (str, "exp_power_log"), "c": (float, 1.0), "alpha": (float, 1.0), "beta": (float, 0.0),
          "value": (float, 1.0)}
CONSTRUCT_KEYS = {"mode": (str, REQUIRED), "H": (float, 1.0), "max_terms": (int, 5000),
                  "divergence_threshold": (float, 1e3), "tail_tol": (float, 1e-9)}


def _coerce(name, typ, v):
    if typ is ANY:
        return v
    if typ is float:
        if isinstance(v, bool) or not isinstance(v, (int, float, str)):
            raise ConfigError(f"{name}: expected a number")
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"{name}: expected a number") from None
    if typ is int:
        if isinstance(v, bool) or not (isinstance(v, int) or (isinstance(v, float) and v.is_integer())):
            raise ConfigError(f"{name}: expected an integer")
        return int(v)
    if typ is bool:
        if not isinstance(v, bool):
            raise ConfigError(f"{name}: expected true or false")
        return v
    if not isinstance(v, typ):
        raise ConfigError(f"{name}: expected {typ.__name__}")
    return v


def _section(doc, name, schema, required=True) -> dict:
    raw = doc.get(name)
    if raw is None:
        if required:
            raise ConfigError(f"missing [{name}] section")
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"[{name}] must be a table")
    return _fill(name, raw, schema)


def _fill(name, raw, schema) -> dict:
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"[{name}] unknown keys: {', '.join(unknown)}")
    out = {}
    for key, (typ, default) in schema.items():
        if key in raw and raw[key] is not None:
            out[key] = _coerce(f"{name}.{key}", typ, raw[key])
        elif default is REQUIRED:
            raise ConfigError(f"[{name}] missing required key {key!r}")
        else:
            out[key] = default
    return out


# --------------------------------------------------------------------------
# builders


def _load_table(path) -> np.ndarray:
    try:
        data = io.read_columnar(path)
    except OSError:
        raise
    except ValueError as exc:
        raise ConfigError(f"unreadable table {path}: {exc}") from None
    if data.ndim != 2 or data.shape[1] < 2:
        raise ConfigError(f"table {path} needs two columns")
    return data


def _directions(kind, d):
    if d != 1:
        raise ConfigError("config-built Custom marginals are one-dimensional")
    if kind == "symmetric":
        return DirectionMeasure.symmetric_1d()
    if kind == "positive":
        return DirectionMeasure.positive_1d()
    raise ConfigError("directions must be 'symmetric' or 'positive'")


def _kernel(raw):
    kind = raw.get("type")
    if kind not in KERNEL_KEYS:
        raise ConfigError(f"spec.kernel.type must be one of {sorted(KERNEL_KEYS)}")
    k = _fill("spec.kernel", {x: v for x, v in raw.items() if x != "type"}, KERNEL_KEYS[kind])
    resolved = {"type": kind, **k}
    if kind == "power":
        return PowerKernel(k["alpha"], k["c"]), resolved
    if kind == "exp_tilted":
        return ExpTiltedKernel(k["alpha"], k["lam"], k["c"]), resolved
    if kind == "step":
        return StepKernel.from_values([float(b) for b in k["breaks"]], [float(v) for v in k["values"]]), resolved
    if k["table"] is not None:
        t = _load_table(k["table"])
        r, v = t[:, 0], t[:, 1]
    elif k["r"] is not None and k["values"] is not None:
        r, v = np.asarray(k["r"], float), np.asarray(k["values"], float)
    else:
        raise ConfigError("tabulated kernel needs 'table' or both 'r' and 'values'")
    return TabulatedKernel(r, v, k["lo_exp"], k["hi_exp"]), resolved


def build_spec(doc) -> tuple:
    raw = doc.get("spec")
    if not isinstance(raw, dict):
        raise ConfigError("missing [spec] section")
    base = {k: v for k, v in raw.items() if k in SPEC_KEYS}
    s = _fill("spec", base, SPEC_KEYS)
    name = s["marginal"]
    if name not in MARGINAL_KEYS:
        raise ConfigError(f"spec.marginal must be one of {sorted(MARGINAL_KEYS)}")
    extra = _fill("spec", {k: v for k, v in raw.items() if k not in SPEC_KEYS}, MARGINAL_KEYS[name])
    gaussian_part = drift = None
    if name == "Stable":
        spectral = {"symmetric": DirectionMeasure.symmetric_1d, "positive": DirectionMeasure.positive_1d}
        if extra["spectral"] not in spectral:
            raise ConfigError("spec.spectral must be 'symmetric' or 'positive'")
        m = Stable(extra["alpha"], spectral[extra["spectral"]](), extra["scale"])
    elif name == "Lognormal":
        m = Lognormal()
    elif name == "StudentT":
        m = StudentT(extra["m"])
    elif name == "Weibull":
        m = Weibull(extra["alpha"])
    elif name == "BesselHit":
        m = BesselHit(extra["bm_dim"])
    elif name == "BesselLastExit":
        m = BesselLastExit(extra["bm_dim"])
    else:
        kern, kres = _kernel(extra["kernel"])
        extra["kernel"] = kres
        fam = None if extra["k_family"] is None else TailFamily.from_dict(extra["k_family"])
        m = Custom(LevyProfile(_directions(extra["directions"], s["d"]), kern), fam)
        gaussian_part = extra["gaussian_part"]
        drift = extra["drift"]
    H = s["H"]
    if H is None:
        if m.fixed_H is None:
            raise ConfigError("spec.H is required for this marginal")
        H = m.fixed_H
    s["H"] = H
    spec = ProcessSpec(H, s["d"], m, None if gaussian_part is None else np.asarray(gaussian_part, float),
                       None if drift is None else np.asarray(drift, float), s["dilation"])
    return spec, {**s, **extra}


def build_g(doc) -> tuple:
    raw = doc.get("g")
    if not isinstance(raw, dict) or "family" not in raw:
        raise ConfigError("missing [g] section with a 'family' key")
    params = {k: v for k, v in raw.items() if k != "family"}
    fam = raw["family"]
    if fam in ("step", "tabulated"):
        unknown = sorted(set(params) - {"table", "x", "y"})
        if unknown:
            raise ConfigError(f"[g] unknown keys: {', '.join(unknown)}")
        if "table" in params:
            t = _load_table(params["table"])
            x, y = t[:, 0], t[:, 1]
        elif "x" in params and "y" in params:
            x, y = np.asarray(params["x"], float), np.asarray(params["y"], float)
        else:
            raise ConfigError("step/tabulated g needs 'table' or both 'x' and 'y'")
        g = make_g(fam, x=io.encode_array(x), y=io.encode_array(y))
        return g, {"family": fam, **params}
    try:
        g = make_g(fam, **params)
    except TypeError as exc:
        raise ConfigError(f"[g] bad parameters for family {fam!r}: {exc}") from None
    return g, g.to_dict()


def build_tail(doc, spec_doc=None) -> tuple:
    t = _section(doc, "tail", TAIL_KEYS)
    src = t["source"]
    if src == "family":
        if t["family"] is None:
            raise ConfigError("[tail] source 'family' needs 'family'")
        try:
            fam = TailFamily.from_dict({"family": t["family"], **t["params"]})
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"[tail] bad family: {exc}") from None
        f = TailFn.from_family(fam, t["kind"], t["r_min"], t["r_max"], t["n"])
    elif src == "table":
        if t["table"] is None:
            raise ConfigError("[tail] source 'table' needs 'table'")
        data = _load_table(t["table"])
        f = TailFn(t["kind"], data[:, 0], data[:, 1])
    elif src == "K":
        spec, _ = build_spec(doc)
        f = K_tailfn(spec, t["r_min"], t["r_max"], t["n"])
    else:
        raise ConfigError("[tail] source must be 'family', 'table' or 'K'")
    return f, t


# --------------------------------------------------------------------------
# commands


def _outputs(doc, default_name):
    o = _section(doc, "output", OUTPUT_KEYS, required=False)
    o["name"] = o["name"] or default_name
    bad = sorted(set(o["formats"]) - {"text", "binary"})
    if bad or not o["formats"]:
        raise ConfigError("output.formats must be a non-empty subset of ['text', 'binary']")
    return o


def _check_sections(doc, allowed):
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(unknown)}")


def _envelope(command, resolved, result):
    return {"toolkit": {"name": "satolab", "version": __version__}, "command": command,
            "config": resolved, "result": result}


def _write_columns(out, stem, columns, header):
    paths = []
    d = Path(out["directory"])
    if "text" in out["formats"]:
        paths.append(io.write_columnar(d / f"{stem}.txt", columns, header))
    if "binary" in out["formats"]:
        paths.append(io.write_columnar(d / f"{stem}.bin", columns))
    return [str(p) for p in paths]


def cmd_simulate(doc, threads=1):
    _check_sections(doc, ("spec", "g", "run", "output"))
    spec, spec_res = build_spec(doc)
    g, g_res = build_g(doc)
    run = _section(doc, "run", RUN_KEYS)
    if run["N"] < 0:
        raise ConfigError("run.N must be nonnegative")
    if run["paths"] < 1:
        raise ConfigError("run.paths must be positive")
    if not run["series_tol"] > 0:
        raise ConfigError("run.series_tol must be positive")
    out = _outputs(doc, "experiment")
    resolved = {"spec": spec_res, "g": g_res, "run": run, "output": out}

    Path(out["directory"]).mkdir(parents=True, exist_ok=True)
    sample = simulate_sequence(spec, run["seed"], run["N"], 1, run["paths"], run["series_tol"],
                               run["epsilon"], threads)
    rep = run_experiment(spec, g, run["N"], run["paths"], run["seed"], sample=sample)
    stem = out["name"]
    files = _write_columns(out, f"{stem}_quantiles", rep.columns(),
                           "n " + " ".join(f"q{lv:g}" for lv in rep.levels) + " current_median")
    if out["write_paths"]:
        d = Path(out["directory"])
        if "text" in out["formats"]:
            files.append(str(sample.write(d / f"{stem}_paths.txt")))
        if "binary" in out["formats"]:
            files.append(str(io.write_columnar(d / f"{stem}_paths.bin", sample.to_columns())))
    doc_out = _envelope("simulate", resolved, {**rep.to_dict(), "files": files})
    return io.write_document(Path(out["directory"]) / f"{stem}.json", doc_out), 0


def _radial(f: TailFn) -> RadialDistribution:
    return RadialDistribution.from_tailfn(f)


def cmd_classify(doc, threads=1):
    _check_sections(doc, ("classify", "tail", "h", "g", "spec", "output"))
    c = _section(doc, "classify", CLASSIFY_KEYS)
    cls = c["class"]
    out = _outputs(doc, "classify")
    resolved = {"classify": c, "output": out}
    if cls in ("OR", "D", "OS"):
        f, t = build_tail(doc)
        resolved["tail"] = t
        if t["source"] == "K":
            resolved["spec"] = build_spec(doc)[1]
        if cls == "OR":
            v = classify_OR(f, decades=c["decades"], route=c["route"])
        elif cls == "D":
            v = classify_D(f, decades=c["decades"], route=c["route"])
        else:
            v = classify_OS(_radial(f), route=c["route"])
        result = v.to_dict()
    elif cls == "submult":
        h = _section(doc, "h", H_KEYS, required=False)
        resolved["h"] = h
        if h["family"] == "exp_power_log":
            target = ExpPowerLogH(h["c"], h["alpha"], h["beta"])
        elif h["family"] == "constant":
            val = h["value"]
            if not val > 0:
                raise ConfigError("h.value must be positive")
            target = lambda x: np.full(np.shape(x), val)  # noqa: E731
        elif h["family"] == "g_inverse":
            g, g_res = build_g(doc)
            resolved["g"] = g_res
            target = lambda x: np.asarray(g.inverse(x), float) + 1.0  # noqa: E731
        else:
            raise ConfigError("h.family must be 'exp_power_log', 'constant' or 'g_inverse'")
        route = c["route"] if c["route"] in ("auto", "analytic", "numeric") else None
        if route is None:
            raise ConfigError("classify.route must be auto, analytic or numeric")
        result = is_submultiplicative(target, route=route, budget=c["budget"], x_max=c["x_max"]).to_dict()
    else:
        raise ConfigError("classify.class must be OR, OS, D or submult")
    Path(out["directory"]).mkdir(parents=True, exist_ok=True)
    doc_out = _envelope("classify", resolved, result)
    return io.write_document(Path(out["directory"]) / f"{out['name']}.json", doc_out), 0


def cmd_construct(doc, threads=1):
    _check_sections(doc, ("construct", "tail", "g", "output"))
    c = _section(doc, "construct", CONSTRUCT_KEYS)
    out = _outputs(doc, "construct")
    resolved = {"construct": c, "output": out}
    mode = c["mode"]
    if mode == "g-from-tail":
        f, t = build_tail(doc)
        resolved["tail"] = t
        run = lambda: build_g_from_tail(f, max_terms=c["max_terms"],  # noqa: E731
                                        divergence_threshold=c["divergence_threshold"], tail_tol=c["tail_tol"])
    elif mode == "K-from-g":
        g, g_res = build_g(doc)
        resolved["g"] = g_res
        if not c["H"] > 0:
            raise ConfigError("construct.H must be positive")
        run = lambda: build_K_from_g(g, c["H"], max_terms=c["max_terms"],  # noqa: E731
                                     divergence_threshold=c["divergence_threshold"], tail_tol=c["tail_tol"])
    else:
        raise ConfigError("construct.mode must be 'g-from-tail' or 'K-from-g'")
    Path(out["directory"]).mkdir(parents=True, exist_ok=True)
    path = Path(out["directory"]) / f"{out['name']}.json"
    try:
        built = run()
    except NotConstructible as exc:
        io.write_document(path, _envelope("construct", resolved, {"status": "NotConstructible", "reason": str(exc)}))
        return path, EXIT_COMPUTE
    if mode == "g-from-tail":
        result = {"status": "Constructed", "g": built.to_dict(), "report": built.report}
        cols = np.column_stack([built.x, built.y])
        hdr = "x g"
    else:
        result = {"status": "Constructed", **built.to_dict()}
        cols = np.column_stack([built.x, built.log_C])
        hdr = "x log_C"
    result["files"] = _write_columns(out, f"{out['name']}_table", cols, hdr)
    return io.write_document(path, _envelope("construct", resolved, result)), 0


COMMANDS = {"simulate": cmd_simulate, "classify": cmd_classify, "construct": cmd_construct}


# --------------------------------------------------------------------------
# entry point


def load_config(path) -> dict:
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix == ".json":
        try:
            doc = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from None
        if isinstance(doc, dict) and "config" in doc and "toolkit" in doc:
            doc = doc["config"]
        return _decode_nonfinite(doc)
    try:
        return tomllib.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"invalid TOML config: {exc}") from None


def _decode_nonfinite(obj):
    if isinstance(obj, dict):
        return {k: _decode_nonfinite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode_nonfinite(v) for v in obj]
    return io.decode_scalar(obj)


def _apply_overrides(cmd, doc, args):
    doc = json.loads(json.dumps(doc, default=str))  # deep copy
    if args.seed is not None or args.paths is not None:
        if cmd != "simulate":
            raise ConfigError("--seed and --paths apply to simulate only")
        run = doc.setdefault("run", {})
        if args.seed is not None:
            run["seed"] = args.seed
        if args.paths is not None:
            run["paths"] = args.paths
    if args.out is not None:
        doc.setdefault("output", {})["directory"] = args.out
    return doc


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="satolab", description="Sato-process limsup laws: experiments and classifications")
    p.add_argument("--version", action="version", version=f"satolab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("simulate", "simulate sequences and write an experiment report"),
                           ("classify", "classify a tail (OR, OS, D) or a function (submult)"),
                           ("construct", "build a step g from a tail or a step K from g")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("config", help="TOML config, or a JSON report whose embedded config is re-run")
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--paths", type=int, default=None)
        s.add_argument("--out", default=None, help="output directory")
        s.add_argument("--threads", type=int, default=1, help="worker cap (does not change results)")
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    try:
        doc = _apply_overrides(args.command, load_config(args.config), args)
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        path, code = COMMANDS[args.command](doc, args.threads)
    except (ConfigError, SpecError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SatoError, ValueError, ArithmeticError) as exc:
        print(f"compute error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    print(path)
    return code


if __name__ == "__main__":
    sys.exit(main())
