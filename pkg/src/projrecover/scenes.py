"""Scene configuration, deterministic scene generation and JSON encoding."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .epipolar import epipoles
from .projection import ProjectionOperator
from .recovery import ProjectionPair
from .varieties import (
    ParametricVariety,
    VarietyError,
    conic3d,
    fit_variety,
    project_variety,
    quadric_variety,
    rational_normal_curve,
)

KINDS = ("conic3d", "rational_normal_curve", "quadric")

DEFAULT_TOLERANCES = {
    "rank": 1e-8,
    "correspondence": 1e-9,
    "projective": 1e-8,
    "kruppa_residual": 1e-9,
    "classical_residual": 1e-10,
    "negative_control": 1e-3,
    "align_residual": 1e-9,
    "isolation_ratio": 1e-6,
    "perturbation": 1e-3,
    "basin_distance": 1e-6,
    "basin_rate": 0.9,
    "true_label": 1e-6,
    "ghost_label": 1e-3,
    "census_rate": 0.95,
    "refit": 1e-6,
}


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (CLI exit code 2)."""


def encode(obj):
    """JSON-ready form: complex numbers as [re, im], arrays as nested lists."""
    if isinstance(obj, dict):
        return {str(k): encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return encode(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(encode(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def decode_matrix(data, ndim: int = 2) -> np.ndarray:
    """Nested lists whose leaves are [re, im] pairs or plain reals."""
    try:
        a = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed matrix: {exc}") from exc
    if a.ndim == ndim + 1 and a.shape[-1] == 2:
        return a[..., 0] + 1j * a[..., 1]
    if a.ndim == ndim:
        return a.astype(complex)
    raise ConfigError(f"expected a {ndim}-dimensional array of numbers or [re, im] pairs")


@dataclass(frozen=True)
class VarietySpec:
    kind: str
    seed: int | None = None
    degree: int | None = None
    dim: int | None = None
    coefficients: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class SceneConfig:
    m: int
    seed: int
    varieties: tuple[VarietySpec, ...]
    projections: tuple[dict, ...]
    tolerances: dict
    solver: dict

    def tol(self, name: str) -> float:
        return float(self.tolerances[name])


def _int(d: dict, key: str, default=None):
    v = d.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key!r} must be an integer")
    return v


def parse_config(doc: dict, seed: int | None = None,
                 tol_overrides: dict | None = None) -> SceneConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    m = _int(doc, "m")
    if m is None or m < 3:
        raise ConfigError("'m' must be an integer >= 3")
    base_seed = seed if seed is not None else _int(doc, "seed")
    if base_seed is None:
        raise ConfigError("a top-level 'seed' is required")
    if not 0 <= base_seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    specs = []
    raw = doc.get("varieties", [])
    if not isinstance(raw, list):
        raise ConfigError("'varieties' must be a list")
    for i, v in enumerate(raw):
        if not isinstance(v, dict) or v.get("kind") not in KINDS:
            raise ConfigError(f"variety {i}: kind must be one of {KINDS}")
        coeffs = v.get("coefficients")
        spec = VarietySpec(v["kind"], _int(v, "seed"), _int(v, "degree"), _int(v, "dim"),
                           decode_matrix(coeffs) if coeffs is not None else None)
        if spec.kind == "quadric":
            n = spec.dim if spec.dim is not None else m - 2
            if not 2 <= n <= m - 2:
                raise ConfigError(f"variety {i}: a quadric of dimension {n} needs 2 <= n <= m-2 "
                                  f"(here m={m}); X must have codimension at least 2")
        if spec.kind == "rational_normal_curve" and (spec.degree or 3) < 1:
            raise ConfigError(f"variety {i}: degree must be positive")
        specs.append(spec)
    projs = doc.get("projections", [{"random": True}, {"random": True}])
    if not isinstance(projs, list) or len(projs) != 2:
        raise ConfigError("'projections' must list exactly two operators")
    for i, p in enumerate(projs):
        if not isinstance(p, dict) or not ("matrix" in p or p.get("random")):
            raise ConfigError(f"projection {i}: give 'matrix' or 'random': true")
    tols = dict(DEFAULT_TOLERANCES)
    for k, v in dict(doc.get("tolerances", {}), **(tol_overrides or {})).items():
        if k not in DEFAULT_TOLERANCES:
            raise ConfigError(f"unknown tolerance {k!r}")
        try:
            tols[k] = float(v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"tolerance {k!r} is not a number") from exc
    solver = doc.get("solver", {})
    if not isinstance(solver, dict):
        raise ConfigError("'solver' must be an object")
    return SceneConfig(m, base_seed, tuple(specs), tuple(projs), tols, dict(solver))


def _sub_seed(cfg: SceneConfig, explicit: int | None, *salt: int) -> np.random.Generator:
    if explicit is not None:
        return np.random.default_rng(explicit)
    return np.random.default_rng([cfg.seed, *salt])


def build_variety(cfg: SceneConfig, spec: VarietySpec, index: int) -> ParametricVariety:
    m = cfg.m
    rng = _sub_seed(cfg, spec.seed, 1, index)
    try:
        if spec.coefficients is not None:
            n = spec.dim if spec.dim is not None else (m - 2 if spec.kind == "quadric" else 1)
            d = spec.degree if spec.degree is not None else (3 if spec.kind ==
                                                             "rational_normal_curve" else 2)
            return ParametricVariety(n, m, d, spec.coefficients, kind=spec.kind)
        if spec.kind == "conic3d":
            return conic3d(rng, m)
        if spec.kind == "rational_normal_curve":
            return rational_normal_curve(spec.degree or 3, m, rng)
        n = spec.dim if spec.dim is not None else m - 2
        return quadric_variety(n, m, rng)
    except VarietyError as exc:
        raise ConfigError(str(exc)) from exc


def build_projection(cfg: SceneConfig, spec: dict, index: int) -> ProjectionOperator:
    try:
        if "matrix" in spec:
            p = ProjectionOperator(decode_matrix(spec["matrix"]))
            if p.m != cfg.m:
                raise ConfigError(f"projection {index} acts on P^{p.m}, config says m={cfg.m}")
            return p
        return ProjectionOperator.random(cfg.m, _sub_seed(cfg, spec.get("seed"), 2, index))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"projection {index}: {exc}") from exc


@dataclass(frozen=True, eq=False)
class Scene:
    config: SceneConfig
    pair: ProjectionPair
    varieties: tuple[ParametricVariety, ...]

    @property
    def m(self) -> int:
        return self.config.m

    def rng(self, *salt: int) -> np.random.Generator:
        return np.random.default_rng([self.config.seed, *salt])


def build_scene(cfg: SceneConfig) -> Scene:
    p1 = build_projection(cfg, cfg.projections[0], 0)
    p2 = build_projection(cfg, cfg.projections[1], 1)
    try:
        pair = ProjectionPair(p1, p2)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    vs = tuple(build_variety(cfg, s, i) for i, s in enumerate(cfg.varieties))
    return Scene(cfg, pair, vs)


def scene_document(scene: Scene) -> dict:
    """Everything needed to rebuild the scene, plus fitted models of the projections."""
    ep = epipoles(scene.pair.first, scene.pair.second)
    models = []
    for i, v in enumerate(scene.varieties):
        entry = {"kind": v.kind, "n": v.n, "m": v.m, "degree": v.d, "coefficients": v.coeffs}
        images = []
        for j, p in enumerate((scene.pair.first, scene.pair.second)):
            rng = scene.rng(3, i, j)
            try:
                y = fit_variety(project_variety(p, v, rng), rng=rng)
                images.append({"degree": y.degree, "forms": y.polys})
            except VarietyError as exc:
                images.append({"error": str(exc)})
        entry["projected_models"] = images
        models.append(entry)
    cfg = scene.config
    return {
        "kind": "scene",
        "m": cfg.m,
        "seed": cfg.seed,
        "projections": [{"matrix": scene.pair.first.matrix}, {"matrix": scene.pair.second.matrix}],
        "varieties": models,
        "epipoles": {"e1": ep.e1, "e2": ep.e2},
        "tolerances": cfg.tolerances,
        "solver": cfg.solver,
    }


def config_from_scene_document(doc: dict) -> dict:
    """Turn a generated scene file back into an explicit config."""
    return {
        "m": doc["m"],
        "seed": doc["seed"],
        "projections": doc["projections"],
        "varieties": [{"kind": v["kind"], "degree": v["degree"], "dim": v["n"],
                       "coefficients": v["coefficients"]} for v in doc["varieties"]],
        "tolerances": doc.get("tolerances", {}),
        "solver": doc.get("solver", {}),
    }


def load_document(path: str | Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def load_scene(path: str | Path, seed: int | None = None,
               tol_overrides: dict | None = None) -> Scene:
    doc = load_document(path)
    if isinstance(doc, dict) and doc.get("kind") == "scene":
        try:
            doc = config_from_scene_document(doc)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed scene file: {exc}") from exc
    return build_scene(parse_config(doc, seed, tol_overrides))
