"""Command line interface: projrecover <subcommand> [options].

Exit codes: 0 all checks pass, 1 a check failed, 2 parse/config error, 3 internal error.
"""

from __future__ import annotations

import argparse
import sys
from math import comb

import numpy as np

from .epipolar import (
    FundamentalMatrix,
    convert,
    correspondence_residual,
    epipoles,
    fundamental,
    rank_profile,
    reduced_fundamental,
)
from .exterior import proj_distance, span_to_extensor
from .kruppa import (
    KruppaError,
    SolverOptions,
    build_system,
    classical_kruppa_residual,
    components_from_scene,
    dimension_report,
    isolation_test,
    kruppa_coefficients,
    kruppa_residual,
    kruppa_solve,
    perturb,
    scrambled,
    truth_from_pair,
)
from .projection import project_extensor
from .recovery import align_pair, canonical_pair, pairs_equivalent, pgl_act
from .reconstruction import Thresholds, build_cones, component_census
from .scenes import (
    ConfigError,
    build_scene,
    decode_matrix,
    dumps,
    load_document,
    load_scene,
    parse_config,
    scene_document,
)
from .varieties import VarietyError, dual_quadric, projected_quadric_gram


class Report:
    """Collects report fields and named pass/fail checks."""

    def __init__(self, command: str):
        self.data: dict = {"command": command}
        self.checks: dict = {}

    def check(self, name: str, passed: bool, value=None, threshold=None):
        self.checks[name] = {"pass": bool(passed), "value": value, "threshold": threshold}

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks.values())

    def document(self) -> dict:
        return dict(self.data, checks=self.checks, passed=self.passed)


def _scene(args):
    if not args.config:
        raise ConfigError("--config is required for this command")
    return load_scene(args.config, args.seed, args.tol)


def cmd_generate(args) -> Report:
    if not args.config:
        raise ConfigError("--config is required for this command")
    doc = load_document(args.config)
    scene = build_scene(parse_config(doc, args.seed, args.tol))
    rep = Report("generate")
    # the report is itself a loadable scene file
    rep.data.update(scene_document(scene))
    for i, v in enumerate(rep.data["varieties"]):
        ok = all("error" not in img for img in v["projected_models"])
        rep.check(f"variety_{i}_models", ok)
    return rep


def _random_plane(rng, m: int, grade: int):
    return span_to_extensor(rng.standard_normal((grade, m + 1))
                            + 1j * rng.standard_normal((grade, m + 1)))


def cmd_fundamental(args) -> Report:
    scene = _scene(args)
    cfg = scene.config
    m = scene.m
    p1, p2 = scene.pair.first, scene.pair.second
    orders = [args.k] if args.k is not None else list(range(2, m))
    rep = Report("fundamental")
    ep = epipoles(p1, p2)
    rep.data["epipoles"] = {"e1": ep.e1, "e2": ep.e2}
    rng = scene.rng(11)
    out = {}
    for k in orders:
        if not 2 <= k <= m - 1:
            raise ConfigError(f"order k={k} outside 2..{m - 1}")
        f = fundamental(p1, p2, k)
        rp = rank_profile(f, cfg.tol("rank"))
        w = _random_plane(rng, m, m - k)
        res = correspondence_residual(f, project_extensor(p1, w), project_extensor(p2, w), ep.e2)
        out[str(k)] = {"kind": "fundamental", "m": m, "k": k, "entries": f.entries,
                       "rank": rp.observed, "expected_rank": rp.expected,
                       "singular_values": rp.singular_values, "correspondence_residual": res}
        rep.check(f"rank_F{k}", rp.ok, rp.observed, rp.expected)
        rep.check(f"correspondence_F{k}", res < cfg.tol("correspondence"), res,
                  cfg.tol("correspondence"))
        if k == m - 1:
            d = proj_distance(reduced_fundamental(p1, p2).entries, f.entries)
            out[str(k)]["reduced_distance"] = d
            rep.check("reduced_closed_form", d < cfg.tol("projective"), d, cfg.tol("projective"))
    rep.data["orders"] = out
    return rep


def _kruppa_inputs(scene):
    if not scene.varieties:
        raise ConfigError("kruppa commands need at least one variety")
    try:
        comps = components_from_scene(scene.pair, list(scene.varieties))
    except (VarietyError, np.linalg.LinAlgError) as exc:
        raise ConfigError(f"scene has no exact dual polynomials: {exc}") from exc
    truth = truth_from_pair(scene.pair)
    system = build_system(scene.m, comps, truth.e1, seed=scene.config.seed % 2**32)
    return comps, truth, system


def cmd_kruppa_check(args) -> Report:
    scene = _scene(args)
    cfg = scene.config
    m = scene.m
    comps, truth, system = _kruppa_inputs(scene)
    rep = Report("kruppa-check")
    res = kruppa_residual(truth.F, truth.e1, system)
    counts = [len(kruppa_coefficients(truth.F, truth.e1, c, system)[0]) for c in comps]
    expected = [comb(m - 2 + c.degree, c.degree) for c in comps]
    rep.data["kruppa_residual"] = res
    rep.data["coefficient_counts"] = counts
    rep.check("kruppa_residual", res < cfg.tol("kruppa_residual"), res, cfg.tol("kruppa_residual"))
    rep.check("coefficient_count", counts == expected, counts, expected)
    neg = kruppa_residual(scrambled(truth, scene.rng(13)).F, truth.e1, system)
    rep.data["negative_control"] = neg
    rep.check("negative_control", neg > cfg.tol("negative_control"), neg,
              cfg.tol("negative_control"))
    if m == 3:
        from .exterior import hodge_matrix

        fcl = hodge_matrix(3, 2) @ truth.F
        worst = 0.0
        for v in scene.varieties:
            c1 = dual_quadric(projected_quadric_gram(scene.pair.first, v)).Q
            c2 = dual_quadric(projected_quadric_gram(scene.pair.second, v)).Q
            worst = max(worst, classical_kruppa_residual(fcl, truth.e2, c1, c2))
        rep.data["classical_residual"] = worst
        rep.check("classical_residual", worst < cfg.tol("classical_residual"), worst,
                  cfg.tol("classical_residual"))
    rep.data["dimension_report"] = vars(dimension_report(m, system.c_total))
    iso = isolation_test(truth, system, cfg.tol("isolation_ratio"))
    rep.data["isolation"] = vars(iso)
    return rep


def cmd_kruppa_solve(args) -> Report:
    scene = _scene(args)
    cfg = scene.config
    _, truth, system = _kruppa_inputs(scene)
    try:
        opts = SolverOptions.from_dict(cfg.solver)
    except (KruppaError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    rep = Report("kruppa-solve")
    trials = []
    hits = 0
    for t in range(args.trials):
        init = perturb(truth, scene.rng(17, t), cfg.tol("perturbation"))
        sol, rec = kruppa_solve(init, system, opts)
        dist = proj_distance(sol.F, truth.F)
        hit = rec.converged and dist < cfg.tol("basin_distance")
        hits += hit
        trials.append({"status": rec.status, "iterations": rec.iterations, "valid": rec.valid,
                       "final_residual": rec.residuals[-1], "distance": dist, "recovered": hit})
    rate = hits / args.trials if args.trials else 0.0
    rep.data["trials"] = trials
    rep.data["success_rate"] = rate
    rep.data["dimension_report"] = vars(dimension_report(scene.m, system.c_total))
    rep.check("basin_rate", rate >= cfg.tol("basin_rate"), rate, cfg.tol("basin_rate"))
    return rep


def _fundamental_from_doc(doc: dict) -> FundamentalMatrix:
    try:
        return FundamentalMatrix(int(doc["m"]), int(doc["k"]), decode_matrix(doc["entries"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed fundamental-matrix file: {exc}") from exc


def cmd_recover(args) -> Report:
    if not args.config:
        raise ConfigError("--config is required for this command")
    doc = load_document(args.config)
    rep = Report("recover")
    if isinstance(doc, dict) and doc.get("kind") == "fundamental":
        f = _fundamental_from_doc(doc)
        if f.k != f.m - 1:
            f = convert(f, f.m - 1, np.random.default_rng(args.seed or 0))
        can = canonical_pair(f)
        back = reduced_fundamental(can.pair.first, can.pair.second)
        d = proj_distance(back.entries, f.entries)
        tol = args.tol.get("projective", 1e-8) if args.tol else 1e-8
        rep.data["canonical"] = {"H": can.H, "e2": can.e2}
        rep.check("canonical_round_trip", d < tol, d, tol)
        return rep
    scene = _scene(args)
    cfg = scene.config
    f = reduced_fundamental(scene.pair.first, scene.pair.second)
    can = canonical_pair(f)
    d = proj_distance(reduced_fundamental(can.pair.first, can.pair.second).entries, f.entries)
    al = align_pair(scene.pair)
    a0 = scene.rng(19).standard_normal((scene.m + 1, scene.m + 1))
    equiv = pairs_equivalent(scene.pair, pgl_act(a0, scene.pair), cfg.tol("projective"))
    rep.data["canonical"] = {"H": can.H, "e2": can.e2, "rank_H": int(np.linalg.matrix_rank(can.H))}
    rep.data["alignment"] = {"A": al.A, "lambda": al.lam, "v": al.v,
                             "eq1_residual": al.eq1_residual, "eq2_residual": al.eq2_residual}
    rep.check("canonical_round_trip", d < cfg.tol("projective"), d, cfg.tol("projective"))
    rep.check("align_eq1", al.eq1_residual < cfg.tol("align_residual"), al.eq1_residual,
              cfg.tol("align_residual"))
    rep.check("align_eq2", al.eq2_residual < cfg.tol("align_residual"), al.eq2_residual,
              cfg.tol("align_residual"))
    rep.check("orbit_equivalence", equiv, equiv, True)
    return rep


def cmd_reconstruct(args) -> Report:
    scene = _scene(args)
    cfg = scene.config
    if scene.m != 3:
        raise ConfigError("fiber reconstruction is implemented for curves in P^3 (m = 3)")
    curves = [v for v in scene.varieties if v.n == 1]
    if not curves:
        raise ConfigError("reconstruct needs at least one curve in the scene")
    th = Thresholds(true_tol=cfg.tol("true_label"), ghost_tol=cfg.tol("ghost_label"))
    rep = Report("reconstruct")
    out = []
    for i, v in enumerate(curves):
        cones = build_cones(scene.pair, v, seed=scene.config.seed % 2**32 + i)
        summary, _ = component_census(cones, args.fibers, scene.config.seed % 2**32 + 101 * i, th)
        entry = dict(vars(summary), clean_fraction=summary.clean_fraction,
                     match_fraction=summary.match_fraction)
        out.append(entry)
        rep.check(f"census_{i}", summary.match_fraction >= cfg.tol("census_rate")
                  and summary.modal == summary.expected, summary.match_fraction,
                  cfg.tol("census_rate"))
        ok = summary.refit_distance is not None and summary.refit_distance < cfg.tol("refit")
        rep.check(f"refit_{i}", ok, summary.refit_distance, cfg.tol("refit"))
    rep.data["census"] = out
    return rep


def cmd_diagnose(args) -> Report:
    if args.m is None or args.c is None:
        raise ConfigError("diagnose needs M and C")
    try:
        r = dimension_report(args.m, args.c)
    except (KruppaError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    rep = Report("diagnose")
    rep.data["dimension_report"] = vars(r)
    return rep


COMMANDS = {
    "generate": cmd_generate,
    "fundamental": cmd_fundamental,
    "kruppa-check": cmd_kruppa_check,
    "kruppa-solve": cmd_kruppa_solve,
    "recover": cmd_recover,
    "reconstruct": cmd_reconstruct,
    "diagnose": cmd_diagnose,
}


def _tol_pair(text: str):
    name, sep, value = text.partition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError("expected NAME=VALUE")
    try:
        return name, float(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{value!r} is not a number") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config, scene or fundamental-matrix JSON file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--tol", type=_tol_pair, action="append", default=[],
                        metavar="NAME=VALUE", help="override a named tolerance")
    parser = argparse.ArgumentParser(prog="projrecover",
                                     description="Recover projections and varieties from two "
                                                 "unknown linear projections.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="build a deterministic scene file")
    p = sub.add_parser("fundamental", parents=[common], help="fundamental matrices F_k")
    p.add_argument("-k", type=int, help="single order (default: all 2..m-1)")
    sub.add_parser("kruppa-check", parents=[common], help="Kruppa residuals at ground truth")
    p = sub.add_parser("kruppa-solve", parents=[common], help="solver basin experiment")
    p.add_argument("--trials", type=int, default=20)
    sub.add_parser("recover", parents=[common], help="canonical pair and alignment")
    p = sub.add_parser("reconstruct", parents=[common], help="fiber census of the cones")
    p.add_argument("--fibers", type=int, default=200)
    p = sub.add_parser("diagnose", parents=[common], help="dimension report for (m, c)")
    p.add_argument("m", type=int, nargs="?")
    p.add_argument("c", type=int, nargs="?")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.tol = dict(args.tol)
    try:
        report = COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"projrecover: config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"projrecover: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    text = dumps(report.document())
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"projrecover: cannot write {args.out}: {exc}", file=sys.stderr)
            return 3
    else:
        sys.stdout.write(text)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
