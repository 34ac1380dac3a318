"""Experiment configuration files (YAML) and their validation.

A config is a tree with a ``version`` field. Unknown keys anywhere are errors,
so a typo can never silently fall back to a default.

Example::

    version: 1
    space: {type: box, bounds: [[-2.25, 2.25], [-2.25, 2.25]]}
    h: 0.015625
    solver: {p: 2}
    experiment:
      kind: capacity
      E: {ball: {center: [0, 0], radius: 1}}
      omega: {ball: {center: [0, 0], radius: 2}}
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import yaml

from .capacity import SolverConfig
from .errors import ConfigError, InputError
from .space import (
    AMBIENT,
    METRICS,
    Ball,
    Complement,
    CosineStrip,
    EuclideanBox,
    Everything,
    Intersection,
    LatticeBalls,
    LowerHalfBall,
    Neighborhood,
    Nothing,
    NodeSet,
    RemovedHalfBalls,
    SlitSpace,
    Union,
    UpperHalfBall,
    ball_nodes,
    eps_interior,
    eps_neighborhood,
    rasterize_set,
)

VERSIONS = (1,)

EXPERIMENTS = {
    "capacity": {"E", "omega"},
    "potential": {"E", "omega", "points"},
    "superlevel-check": {"E", "omega", "levels", "strict"},
    "density-scan": {"E", "r", "tau", "metric", "centers", "stride", "adversarial", "skip_errors"},
    "sobolev-density": {"E", "r", "centers"},
    "dichotomy": {"E", "radii", "tau", "centers", "stride", "adversarial", "skip_errors"},
    "inner-approx": {"U", "omega", "rhos", "metric"},
    "corkscrew": {"U", "points", "stride", "radii", "r_range", "metric"},
    "john": {"U", "centers", "resolution"},
    "stability-probe": {"collection", "center", "radii", "rhos", "tau", "gamma", "beta", "metric"},
}

REQUIRED = {
    "capacity": {"E", "omega"},
    "potential": {"E", "omega"},
    "superlevel-check": {"E", "omega", "levels"},
    "density-scan": {"E", "r"},
    "sobolev-density": {"E", "r", "centers"},
    "dichotomy": {"E", "radii"},
    "inner-approx": {"U", "omega", "rhos"},
    "corkscrew": {"U"},
    "john": {"U", "centers"},
    "stability-probe": {"collection", "center", "radii", "rhos"},
}

TOP_KEYS = {"version", "space", "box", "h", "refine", "solver", "experiment", "output", "seed"}
OUTPUT_KEYS = {"dir", "format", "name"}
FORMATS = ("json", "csv", "both")


def _keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(d).__name__}")
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {sorted(extra)}")


def _require(d, needed, where):
    missing = set(needed) - set(d)
    if missing:
        raise ConfigError(f"{where}: missing key(s) {sorted(missing)}")


def parse_space(d):
    _keys(d, {"type", "bounds", "n", "j_max", "x_range"}, "space")
    kind = d.get("type")
    try:
        if kind == "box":
            _keys(d, {"type", "bounds"}, "space")
            return EuclideanBox(tuple(tuple(map(float, b)) for b in d["bounds"]))
        if kind == "slit":
            _keys(d, {"type", "n", "j_max"}, "space")
            return SlitSpace(n=int(d.get("n", 2)), j_max=int(d.get("j_max", 4)))
        if kind == "cosine-strip":
            _keys(d, {"type", "x_range"}, "space")
            return CosineStrip(tuple(map(float, d["x_range"])))
    except KeyError as exc:
        raise ConfigError(f"space: missing key {exc}") from None
    except InputError as exc:
        raise ConfigError(f"space: {exc}") from None
    raise ConfigError(f"space: unknown type {kind!r} (box | slit | cosine-strip)")


# Set specifications -------------------------------------------------------

_GEOMETRIC = {"ball", "lower_half_ball", "upper_half_ball", "removed_half_balls", "lattice_balls",
              "neighborhood", "union", "intersection", "complement", "all", "none"}
_GRAPH = {"inner_ball", "eps_interior", "eps_neighborhood"}


def parse_set(d, where="set"):
    """Turn a config mapping into a geometric set spec or a graph-level recipe.

    Graph-level recipes (inner balls, eps-interiors) are kept as tuples and
    resolved by :func:`resolve_set` once the graph exists.
    """
    if d in ("all", "none"):
        return Everything() if d == "all" else Nothing()
    if not isinstance(d, dict) or len(d) != 1:
        raise ConfigError(f"{where}: a set is a one-key mapping such as {{ball: {{...}}}}")
    (kind, args), = d.items()
    if kind not in _GEOMETRIC | _GRAPH:
        raise ConfigError(f"{where}: unknown set type {kind!r}")
    sub = f"{where}.{kind}"
    try:
        if kind in ("ball", "lower_half_ball", "upper_half_ball", "inner_ball"):
            _keys(args, {"center", "radius"}, sub)
            _require(args, {"center", "radius"}, sub)
            center, radius = tuple(map(float, args["center"])), float(args["radius"])
            if kind == "inner_ball":
                return ("inner_ball", center, radius)
            cls = {"ball": Ball, "lower_half_ball": LowerHalfBall, "upper_half_ball": UpperHalfBall}[kind]
            return cls(center, radius)
        if kind == "removed_half_balls":
            _keys(args or {}, set(), sub)
            return RemovedHalfBalls()
        if kind == "lattice_balls":
            _keys(args, {"spacing", "radius", "exclude", "offset"}, sub)
            _require(args, {"spacing", "radius"}, sub)
            exclude = parse_set(args["exclude"], sub + ".exclude") if "exclude" in args else None
            offset = tuple(map(float, args["offset"])) if "offset" in args else None
            return LatticeBalls(float(args["spacing"]), float(args["radius"]), exclude, offset)
        if kind == "neighborhood":
            _keys(args, {"of", "eps"}, sub)
            _require(args, {"of", "eps"}, sub)
            return Neighborhood(parse_set(args["of"], sub + ".of"), float(args["eps"]))
        if kind in ("union", "intersection"):
            if not isinstance(args, list) or not args:
                raise ConfigError(f"{sub}: expected a nonempty list of sets")
            parts = tuple(parse_set(a, f"{sub}[{i}]") for i, a in enumerate(args))
            if any(isinstance(p, tuple) for p in parts):
                return (kind, parts)
            return (Union if kind == "union" else Intersection)(parts)
        if kind == "complement":
            part = parse_set(args, sub)
            return ("complement", part) if isinstance(part, tuple) else Complement(part)
        if kind in ("eps_interior", "eps_neighborhood"):
            _keys(args, {"of", "eps", "metric"}, sub)
            _require(args, {"of", "eps"}, sub)
            metric = args.get("metric", AMBIENT)
            if metric not in METRICS:
                raise ConfigError(f"{sub}: metric must be one of {METRICS}")
            return (kind, parse_set(args["of"], sub + ".of"), float(args["eps"]), metric)
        if kind in ("all", "none"):
            return Everything() if kind == "all" else Nothing()
    except InputError as exc:
        raise ConfigError(f"{sub}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{sub}: {exc}") from None
    raise ConfigError(f"{where}: unsupported set {kind!r}")


def resolve_set(graph, spec) -> NodeSet:
    if not isinstance(spec, tuple):
        return rasterize_set(graph, spec)
    kind = spec[0]
    if kind == "inner_ball":
        return ball_nodes(graph, spec[1], spec[2], "inner")
    if kind in ("eps_interior", "eps_neighborhood"):
        fn = eps_interior if kind == "eps_interior" else eps_neighborhood
        return fn(graph, resolve_set(graph, spec[1]), spec[2], spec[3])
    if kind == "complement":
        return ~resolve_set(graph, spec[1])
    parts = [resolve_set(graph, p) for p in spec[1]]
    out = parts[0]
    for p in parts[1:]:
        out = (out | p) if kind == "union" else (out & p)
    return out


# Experiment config -----------------------------------------------------------


@dataclass
class ExperimentConfig:
    version: int
    space: object
    box: tuple | None
    hs: list
    solver: SolverConfig
    kind: str
    params: dict
    output: dict = field(default_factory=lambda: {"dir": ".", "format": "json", "name": "report"})
    seed: int = 0
    raw: dict = field(default_factory=dict)

    @property
    def h(self):
        return self.hs[0]


_SET_PARAMS = {"E", "omega", "U"}


def parse_config(raw) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    _keys(raw, TOP_KEYS, "config")
    _require(raw, {"version", "space", "experiment"}, "config")
    if raw["version"] not in VERSIONS:
        raise ConfigError(f"unsupported config version {raw['version']!r}; known: {VERSIONS}")
    space = parse_space(raw["space"])
    box = raw.get("box")
    if box is not None:
        try:
            box = tuple(tuple(map(float, b)) for b in box)
        except (TypeError, ValueError):
            raise ConfigError("box: expected a list of [lo, hi] pairs") from None
        if len(box) != space.n or any(len(b) != 2 or not b[1] > b[0] for b in box):
            raise ConfigError("box: need one [lo, hi] pair with hi > lo per dimension")

    if "refine" in raw:
        hs = [float(v) for v in raw["refine"]]
        if "h" in raw:
            raise ConfigError("give either h or refine, not both")
    elif "h" in raw:
        hs = [float(raw["h"])]
    else:
        raise ConfigError("config: missing key 'h'")
    if not hs or any(not v > 0 for v in hs):
        raise ConfigError("h values must be positive")

    solver_raw = raw.get("solver", {}) or {}
    _keys(solver_raw, set(SolverConfig.__dataclass_fields__), "solver")
    try:
        solver = SolverConfig(**solver_raw)
    except (InputError, TypeError) as exc:
        raise ConfigError(f"solver: {exc}") from None

    exp = raw["experiment"]
    if not isinstance(exp, dict):
        raise ConfigError("experiment: expected a mapping")
    kind = exp.get("kind")
    if kind not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown kind {kind!r}; one of {sorted(EXPERIMENTS)}")
    where = f"experiment[{kind}]"
    _keys(exp, EXPERIMENTS[kind] | {"kind"}, where)
    _require(exp, REQUIRED[kind], where)
    params = {k: v for k, v in exp.items() if k != "kind"}
    for key in _SET_PARAMS & set(params):
        params[key] = parse_set(params[key], f"{where}.{key}")
    for key in ("radii", "rhos", "levels"):
        if key in params:
            vals = [float(v) for v in params[key]]
            if key == "radii" and any(b <= a for a, b in zip(vals, vals[1:])):
                raise ConfigError(f"{where}.radii must be strictly increasing")
            params[key] = vals
    if params.get("metric", AMBIENT) not in METRICS:
        raise ConfigError(f"{where}.metric must be one of {METRICS}")

    output = {"dir": ".", "format": "json", "name": "report"}
    if "output" in raw:
        _keys(raw["output"], OUTPUT_KEYS, "output")
        output.update(raw["output"])
    if output["format"] not in FORMATS:
        raise ConfigError(f"output.format must be one of {FORMATS}")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    return ExperimentConfig(raw["version"], space, box, hs, solver, kind, params, output, seed,
                            copy.deepcopy(raw))


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    return parse_config(raw)
