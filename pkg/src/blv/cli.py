"""Command line front end: ``blv <command> SOURCE [options]``.

SOURCE is a model JSON file or one of ``zoo:symmetric-group``,
``zoo:slice``, ``zoo:product``, ``zoo:cyclic``.  Exit status is 0 when
every check passes, 1 when a violation is found and 2 on bad input.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Any

import numpy as np

from . import bl, entropy as ent, geo, verify, zoo
from .markov import FiniteMarkovModel, ModelError, build_model, format_fraction
from .quotient import FactorMap, NonCommutingMapError, check_commutation, factor_map

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    source: str | None = None
    maps: list = field(default_factory=list)
    c: str | None = None
    seed: int = 0
    trials: int = 100
    restarts: int = 50
    tolerance: float = 1e-10
    output: str | None = None
    options: dict = field(default_factory=dict)


# ------------------------------------------------------------- JSON helpers


def _jsonable(v: Any) -> Any:
    if isinstance(v, Fraction):
        return format_fraction(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    return v


def dumps(report: dict) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"


def _hashable(v: Any) -> Any:
    return tuple(_hashable(x) for x in v) if isinstance(v, list) else v


def model_to_document(model: FiniteMarkovModel, maps=()) -> dict:
    """Sparse JSON document; rationals as ``"p/q"`` strings."""
    doc = {
        "labels": [list(x) if isinstance(x, tuple) else x for x in model.labels],
        "kernel_rows": [[[int(y), format_fraction(w)] for y, w in model.row(x)] for x in range(model.n_states)],
        "mu": [format_fraction(m) for m in model.mu],
    }
    if maps:
        doc["maps"] = [
            {"name": t.name, "labeling": [_jsonable(t.block_labels[b]) for b in t.labeling]} for t in maps
        ]
    return doc


def model_from_document(doc: dict) -> tuple:
    if "kernel" in doc and "kernel_rows" in doc:
        raise InputError("give either 'kernel' or 'kernel_rows', not both")
    if "kernel" in doc:
        kernel = doc["kernel"]
        n = len(kernel)
    elif "kernel_rows" in doc:
        kernel = [{int(y): w for y, w in row} for row in doc["kernel_rows"]]
        n = len(kernel)
    else:
        raise InputError("model document needs 'kernel' or 'kernel_rows'")
    labels = [_hashable(x) for x in doc.get("labels", list(range(n)))]
    model = build_model(labels, kernel, doc.get("mu"))
    maps = []
    for entry in doc.get("maps", []):
        keys = [_hashable(k) for k in entry["labeling"]]
        maps.append(factor_map(model, keys, entry.get("name", f"T{len(maps) + 1}")))
    return model, maps


# ------------------------------------------------------------ model source


def _ints(text: str) -> list:
    return [int(v) for v in text.split(",") if v.strip()]


def load_source(cfg: RunConfig) -> tuple:
    """``(model, file_maps, kind)`` for the configured source."""
    src, opt = cfg.source, cfg.options
    if src is None:
        raise InputError("missing model source")
    if src.startswith("zoo:"):
        kind = src[4:]

        def need(key):
            if opt.get(key) is None:
                raise InputError(f"{src} needs --{key}")
            return opt[key]

        if kind == "symmetric-group":
            return zoo.symmetric_group_model(int(need("n"))), [], kind
        if kind == "slice":
            return zoo.slice_model(int(need("n")), int(need("k"))), [], kind
        if kind == "product":
            if opt.get("measures"):
                comps = [[v for v in part.split(",")] for part in opt["measures"].split(";")]
            else:
                comps = [[Fraction(1, s)] * s for s in _ints(need("sizes"))]
            return zoo.product_model(comps), [], kind
        if kind == "cyclic":
            model, maps, _ = zoo.cyclic_model(
                int(need("n")), _ints(opt.get("generators") or "1,-1"), _ints(opt.get("moduli") or "")
            )
            return model, maps, kind
        raise InputError(f"unknown zoo model {kind!r}")
    path = Path(src)
    if not path.exists():
        raise InputError(f"no such model file: {src}")
    model, maps = model_from_document(json.loads(path.read_text()))
    return model, maps, "file"


def select_maps(model: FiniteMarkovModel, file_maps: list, selectors: list) -> list:
    """Resolve map selectors.

    ``coords``; ``restriction:1,2`` / ``image:1,2`` (S_n); ``restriction-all:k`` /
    ``image-all:k``; ``projection:1,3`` (products); ``hypergeometric:m1,m2,..:K``;
    ``file`` (maps stored with the model, the default when present) or
    ``file:NAME``.
    """
    if not selectors:
        if file_maps:
            return list(file_maps)
        raise InputError("no maps selected (use --maps)")
    out = []
    for sel in selectors:
        head, _, arg = sel.partition(":")
        if head == "coords":
            out.extend(zoo.coordinate_maps(model))
        elif head in ("restriction", "image"):
            fn = zoo.restriction_map if head == "restriction" else zoo.image_map
            out.append(fn(model, _ints(arg)))
        elif head in ("restriction-all", "image-all"):
            fn = zoo.restriction_map if head == "restriction-all" else zoo.image_map
            n = len(model.labels[0])
            out.extend(fn(model, I) for I in combinations(range(1, n + 1), int(arg)))
        elif head == "projection":
            out.append(zoo.projection_map(model, _ints(arg)))
        elif head == "hypergeometric":
            m, _, K = arg.partition(":")
            out.append(zoo.hypergeometric_map(model, _ints(m), int(K)))
        elif head == "file":
            if not arg:
                out.extend(file_maps)
            else:
                found = [t for t in file_maps if t.name == arg]
                if not found:
                    raise InputError(f"no map named {arg!r} in the model file")
                out.extend(found)
        else:
            raise InputError(f"unknown map selector {sel!r}")
    return out


def _exponents(cfg: RunConfig, model, maps) -> tuple:
    if cfg.c is None:
        raise InputError("missing --c")
    if cfg.c == "optimize":
        c, _ = bl.optimize_exponents(bl.edge_active_sets(model, maps))
        return c
    return bl.as_exponents(cfg.c, len(maps))


# ---------------------------------------------------------------- commands


def _cmd_check_commute(cfg: RunConfig) -> tuple:
    model, file_maps, _ = load_source(cfg)
    maps = select_maps(model, file_maps, cfg.maps)
    rows = []
    for t in maps:
        r = check_commutation(model, t)
        rows.append({
            "map": t.name,
            "commutes": r.commutes,
            "witness": None if r.witness is None else {
                "x": model.labels[r.witness[0]], "y": model.labels[r.witness[1]],
                "block": t.block_labels[r.witness[2]], "mass_x": r.mass_x, "mass_y": r.mass_y,
            },
        })
    ok = all(r["commutes"] for r in rows)
    return {"command": "check-commute", "n_states": model.n_states, "maps": rows, "passed": ok}, ok


def _active_set_table(system, c=None) -> list:
    counts = system.edge_counts()
    out = []
    for k, mask in enumerate(system.masks):
        I = bl.mask_to_set(mask)
        row = {"active_set": [system.map_names[i] for i in I], "edges": int(counts[k])}
        if c is not None:
            row["sum"] = sum((c[i] for i in I), Fraction(0))
        out.append(row)
    return out


def _cmd_check_bl(cfg: RunConfig) -> tuple:
    model, file_maps, _ = load_source(cfg)
    maps = select_maps(model, file_maps, cfg.maps)
    c = _exponents(cfg, model, maps)
    system = bl.edge_active_sets(model, maps)
    verdict = bl.check_edge_criterion(system, c)
    report = {
        "command": "check-bl",
        "c": list(c),
        "maps": [t.name for t in maps],
        "edge_criterion": verdict.to_json(),
    }
    draws = int(cfg.options.get("draws") or 200)
    pointwise = bl.random_pointwise_check(model, maps, c, draws=draws, seed=cfg.seed)
    report["pointwise"] = {"draws": draws, "max_residual": pointwise}
    ok = verdict.passed and pointwise <= cfg.tolerance
    if not verdict.passed:
        fr = bl.falsify_bl(model, maps, c, system)
        report["falsifier"] = {
            "residual": fr.residual,
            "log_scale": fr.log_scale,
            "theta": fr.theta,
            "state": model.labels[fr.state],
            "edge": [model.labels[v] for v in fr.edge],
            "active_set": [maps[i].name for i in fr.active_set],
        }
    report["passed"] = ok
    return report, ok


def _cmd_optimize(cfg: RunConfig) -> tuple:
    model, file_maps, _ = load_source(cfg)
    maps = select_maps(model, file_maps, cfg.maps)
    system = bl.edge_active_sets(model, maps)
    weights = None
    if cfg.options.get("weights"):
        weights = bl.as_exponents(cfg.options["weights"], len(maps), bounded=False)
    c, obj = bl.optimize_exponents(system, weights)
    report = {
        "command": "optimize",
        "maps": [t.name for t in maps],
        "c": list(c),
        "objective": obj,
        "active_sets": _active_set_table(system, c),
        "passed": True,
    }
    return report, True


def _cmd_verify(cfg: RunConfig) -> tuple:
    model, file_maps, _ = load_source(cfg)
    maps = select_maps(model, file_maps, cfg.maps)
    c = _exponents(cfg, model, maps)
    suite = verify.random_trial_suite(
        model, maps, c, cfg.trials, seed=cfg.seed, tol=cfg.tolerance,
        interpolation=bool(cfg.options.get("interpolation")),
    )
    report = {"command": "verify", "c": list(c), "random": suite.to_json()}
    ok = suite.n_violations == 0
    if cfg.trials > 0 and cfg.restarts > 0:
        fam, gap = verify.adversarial_search(model, maps, c, iters=cfg.restarts, seed=cfg.seed)
        report["adversarial"] = {
            "restarts": cfg.restarts,
            "min_global_gap": gap,
            "worst_family": [list(map(float, f)) for f in fam],
        }
        ok = ok and gap >= -cfg.tolerance
    report["passed"] = ok
    return report, ok


def _cmd_entropy(cfg: RunConfig) -> tuple:
    model, file_maps, _ = load_source(cfg)
    maps = select_maps(model, file_maps, cfg.maps)
    c = _exponents(cfg, model, maps)
    rng = np.random.default_rng(cfg.seed)
    lines = []
    min_e = min_f = min_d = math.inf
    for k in range(cfg.trials):
        f = ent.random_density(model, rng)
        row = {"trial": k, "entropy_gap": ent.entropy_gap(model, maps, c, f),
               "fisher_gap": ent.fisher_gap(model, maps, c, f)}
        if model.reversible:
            row["dual_fisher_gap"] = ent.dual_fisher_gap(model, f, 3.0 * rng.standard_normal(model.n_states))
            min_d = min(min_d, row["dual_fisher_gap"])
        min_e, min_f = min(min_e, row["entropy_gap"]), min(min_f, row["fisher_gap"])
        lines.append(row)
    report = {
        "command": "entropy",
        "c": list(c),
        "seed": cfg.seed,
        "trials": cfg.trials,
        "min_entropy_gap": None if not lines else min_e,
        "min_fisher_gap": None if not lines else min_f,
        "min_dual_fisher_gap": None if not lines or not model.reversible else min_d,
    }
    gaps = [g for g in (min_e, min_f, min_d) if math.isfinite(g)]
    ok = all(g >= -cfg.tolerance for g in gaps)
    if cfg.trials > 0 and model.reversible and model.irreducible:
        db = ent.debruijn_check(model, ent.random_density(model, rng), float(cfg.options.get("t_max") or 30.0))
        report["debruijn_residual"] = db.residual
        ok = ok and abs(db.residual) <= 1e-6
    if cfg.options.get("jsonl"):
        with open(cfg.options["jsonl"], "w") as fh:
            for row in lines:
                fh.write(json.dumps(_jsonable(row), sort_keys=True) + "\n")
    report["passed"] = ok
    return report, ok


def _load_subspaces(path: str) -> tuple:
    doc = json.loads(Path(path).read_text())
    n = int(doc["n"])
    specs, coordinate = [], []
    for entry in doc["subspaces"]:
        kind = entry.get("kind", "fix")
        if "indices" in entry:
            specs.append(geo.SubspaceSpec.from_indices(n, entry["indices"], kind))
            coordinate.append(entry["indices"])
        else:
            basis = np.array(entry["basis"], dtype=float).T
            specs.append(geo.SubspaceSpec(n, basis, kind))
            coordinate.append(None)
    return n, specs, coordinate, doc.get("c")


def _cmd_geo(cfg: RunConfig) -> tuple:
    action = cfg.options.get("action")
    tol = cfg.tolerance
    if action == "sphere":
        polys = json.loads(cfg.options["polys"])
        r = geo.sphere_quadrature_check(int(cfg.options["n"]), polys, cfg.c or "1/2")
        ok = r.gap >= -1e-8
        return {"command": "geo sphere", "lhs": r.lhs, "rhs": r.rhs, "gap": r.gap, "passed": ok}, ok
    if not cfg.options.get("subspaces"):
        raise InputError("geo check needs --subspaces")
    n, specs, coordinate, c_file = _load_subspaces(cfg.options["subspaces"])
    c = cfg.c or c_file
    if c is None:
        raise InputError("missing --c")
    if isinstance(c, list):
        c = ",".join(str(v) for v in c)
    cq = bl.as_exponents(c, len(specs), bounded=False)
    lam = geo.psd_decomposition_check(specs, cq)
    report = {"command": "geo check", "n": n, "c": list(cq), "psd_lambda_min": lam,
              "psd_passed": lam >= -tol}
    ok = lam >= -tol
    if ok and n >= 2:
        lift = geo.lie_lift_check(specs, cq)
        report["lift_lambda_min"] = lift
        ok = ok and lift >= -tol
    if n >= 2 and all(I is not None for I in coordinate):
        fam = [(I, "restriction" if s.kind == "fix" else "image", ci) for I, s, ci in zip(coordinate, specs, cq)]
        pv = bl.pair_condition_check(fam, n)
        report["pair_condition"] = {"passed": pv.passed, "max_sum": pv.max_sum, "worst_pair": pv.worst_pair}
        report["coordinate_lambda_min"] = geo.coordinate_family_lambda(n, fam)
    report["passed"] = ok
    return report, ok


def _cmd_zoo_build(cfg: RunConfig) -> tuple:
    model, file_maps, _ = load_source(cfg)
    maps = select_maps(model, file_maps, cfg.maps) if (cfg.maps or file_maps) else []
    return model_to_document(model, maps), True


COMMANDS = {
    "check-commute": _cmd_check_commute,
    "check-bl": _cmd_check_bl,
    "optimize": _cmd_optimize,
    "verify": _cmd_verify,
    "entropy": _cmd_entropy,
    "geo": _cmd_geo,
    "zoo": _cmd_zoo_build,
}


def run(cfg: RunConfig) -> int:
    """Execute ``cfg`` and write the JSON report; returns the exit code."""
    if cfg.command not in COMMANDS:
        raise InputError(f"unknown command {cfg.command!r}")
    report, ok = COMMANDS[cfg.command](cfg)
    text = dumps(report)
    if cfg.output:
        Path(cfg.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_VIOLATION


# ------------------------------------------------------------------ parser


def _add_common(p: argparse.ArgumentParser, source: bool = True) -> None:
    if source:
        p.add_argument("source", help="model JSON file or zoo:<name>")
        p.add_argument("--n", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--sizes", help="product: component sizes with uniform marginals, e.g. 2,3")
        p.add_argument("--measures", help="product: marginals, e.g. '1/2,1/2;1/3,2/3'")
        p.add_argument("--generators", help="cyclic: generators, default 1,-1")
        p.add_argument("--moduli", help="cyclic: reduction maps Z_n -> Z_d")
        p.add_argument("--maps", nargs="+", default=[], metavar="SELECTOR")
    p.add_argument("--c", help="exponents: 'a,b,..', a scalar, or 'optimize'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--restarts", type=int, default=50)
    p.add_argument("--tolerance", type=float, default=1e-10)
    p.add_argument("--output", "-o")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blv", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("check-commute", "check-bl", "optimize", "verify", "entropy"):
        p = sub.add_parser(name)
        _add_common(p)
    sub.choices["check-bl"].add_argument("--draws", type=int, default=200)
    sub.choices["optimize"].add_argument("--weights", help="LP objective weights")
    sub.choices["verify"].add_argument("--interpolation", action="store_true")
    sub.choices["entropy"].add_argument("--jsonl", help="write per-trial gaps as JSON lines")
    sub.choices["entropy"].add_argument("--t-max", type=float, default=30.0)

    g = sub.add_parser("geo")
    gsub = g.add_subparsers(dest="action", required=True)
    gc = gsub.add_parser("check")
    gc.add_argument("--subspaces", required=True)
    _add_common(gc, source=False)
    gs = gsub.add_parser("sphere")
    gs.add_argument("--n", type=int, required=True, choices=(2, 3))
    gs.add_argument("--polys", required=True, help="JSON list of coefficient lists")
    _add_common(gs, source=False)

    z = sub.add_parser("zoo")
    zsub = z.add_subparsers(dest="action", required=True)
    zb = zsub.add_parser("build")
    _add_common(zb)
    return parser


_CONFIG_KEYS = {"command", "source", "maps", "c", "seed", "trials", "restarts", "tolerance", "output"}


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    d = vars(ns)
    cfg = RunConfig(**{k: d[k] for k in _CONFIG_KEYS if k in d})
    cfg.options = {k: v for k, v in d.items() if k not in _CONFIG_KEYS}
    if cfg.trials < 0:
        raise InputError("--trials must be nonnegative")
    return cfg


def main(argv: list | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(config_from_args(args))
    except (InputError, ModelError, NonCommutingMapError, ValueError, KeyError, TypeError,
            json.JSONDecodeError, OSError) as exc:
        sys.stderr.write(f"blv: error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
