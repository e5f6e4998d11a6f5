"""Command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 bad command line or configuration
(the message names the key), 3 the optimizer could not find a finite start.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path


from . import io
from .domains import DomainError, shape_from_dict
from .klr import OracleError, cheeger_exact, compare, omega, polygonize
from .optimizer import InitializationError
from .packing import PackingError, extract_centers, refine_maximin, refine_product
from .pipeline import ConfigError, RunConfig, RunResult, run

log = logging.getLogger("cheegerpack")

VERBS = ("cheeger", "cluster", "pack", "oracle", "compare", "perimeter-product")
# keys understood by the front end but not by RunConfig
CLI_KEYS = ("packing", "workers", "plots")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_INIT = 0, 1, 2, 3


def _parse_seeds(text: str) -> list[int]:
    try:
        a, b = (int(x) for x in text.split(".."))
    except ValueError:
        raise ConfigError("seeds", f"expected a..b, got {text!r}") from None
    if b < a:
        raise ConfigError("seeds", "empty seed range")
    return list(range(a, b + 1))


def _parse_override(item: str) -> tuple[str, object]:
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise ConfigError(item, "override must look like key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip().replace("-", "_"), value


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cheegerpack", description=__doc__.splitlines()[0])
    ap.add_argument("verb", choices=VERBS)
    ap.add_argument("overrides", nargs="*", metavar="key=value", help="configuration overrides")
    ap.add_argument("--config", help="JSON file with flat configuration keys")
    ap.add_argument("--out", default="out", help="output directory (default: out)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--seeds", help="inclusive seed range a..b; best final energy wins")
    ap.add_argument("--alpha", type=float)
    ap.add_argument("--p", type=float)
    ap.add_argument("--k", type=int)
    ap.add_argument("--eps-factor", type=float)
    ap.add_argument("--stages", type=int)
    ap.add_argument("--m0", type=int)
    ap.add_argument("--periodic", action="store_true", default=None)
    ap.add_argument("--packing", choices=("maximin", "product"))
    ap.add_argument("--workers", type=int, help="processes for --seeds (default: CPU count)")
    ap.add_argument("--no-plots", dest="plots", action="store_false", default=None, help="skip PNG figures")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def _verb_defaults(verb: str, domain: dict) -> dict:
    out: dict = {}
    if verb in ("cheeger", "compare"):
        out.update(k=1, coarse_eps_factor=2.0, final_eps_steps=3)
    elif verb == "cluster":
        # wide coarse interfaces let the random start coarsen into one blob per phase
        out.update(k=2, penalty_scale=100.0, coarse_eps_factor=4.0, final_eps_steps=3)
    elif verb == "pack":
        try:
            dim = shape_from_dict(domain).dim
        except DomainError as exc:
            raise ConfigError("domain", str(exc)) from None
        # wide interfaces and a p ramp let the cells settle before the max-like norm bites
        out.update(
            k=2,
            alpha=(dim - 1) / dim + 1e-3,
            p=50.0,
            p_start=1.0,
            ratio_scale=omega(dim),
            eps_factor=2.0,
            penalty_scale=300.0,
            target_resolution=70 if dim == 2 else 40,
            maxit=3000,
        )
    elif verb == "perimeter-product":
        out.update(
            k=8,
            objective="log_perimeter",
            periodic=True,
            area_weight=1e4,
            penalty_scale=10.0,
            coarse_eps_factor=4.0,
            final_eps_steps=3,
            domain={"type": "rectangle", "lower": [0.0, 0.0], "upper": [1.0, 1.0]},
        )
    return out


def assemble_config(args) -> tuple[dict, dict]:
    """Merge verb defaults, config file, flags and overrides; returns (run keys, cli keys)."""
    file_cfg: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError("config", f"no such file: {path}")
        try:
            file_cfg = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError("config", "top level must be an object")
    user: dict = dict(file_cfg)
    flags = {
        "seed": args.seed,
        "alpha": args.alpha,
        "p": args.p,
        "k": args.k,
        "eps_factor": args.eps_factor,
        "stages": args.stages,
        "m0": args.m0,
        "periodic": args.periodic,
        "packing": args.packing,
        "workers": args.workers,
        "plots": args.plots,
    }
    user.update({k: v for k, v in flags.items() if v is not None})
    for item in args.overrides:
        key, value = _parse_override(item)
        user[key] = value

    domain = user.get("domain", RunConfig().domain)
    merged = _verb_defaults(args.verb, domain)
    merged.update(user)
    cli = {k: merged.pop(k) for k in CLI_KEYS if k in merged}
    cli.setdefault("packing", "maximin")
    cli.setdefault("plots", True)
    if cli["packing"] not in ("maximin", "product"):
        raise ConfigError("packing", "must be maximin or product")

    if args.verb != "oracle":
        RunConfig.from_dict(dict(merged))  # type and range checks, naming the key
    if args.verb == "cheeger" and merged.get("k", 1) != 1:
        raise ConfigError("k", "cheeger runs a single phase")
    if args.verb == "cluster" and merged.get("k", 1) < 2:
        raise ConfigError("k", "cluster needs k > 1")
    return merged, cli


def _run_one(cfg_dict: dict) -> RunResult:
    return run(RunConfig.from_dict(cfg_dict))


def run_seeds(cfg_dict: dict, seeds: list[int], workers: int | None) -> tuple[RunResult, dict]:
    """Independent runs per seed, merged by best final energy (ties: lowest seed)."""
    dicts = [dict(cfg_dict, seed=s) for s in seeds]
    for d in dicts:
        RunConfig.from_dict(dict(d))  # fail fast on bad keys before spawning
    workers = workers or os.cpu_count() or 1
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
            results = list(pool.map(_run_one, dicts))
    else:
        results = [_run_one(d) for d in dicts]
    energies = {s: r.final_energy for s, r in zip(seeds, results)}
    best = min(range(len(seeds)), key=lambda i: (results[i].final_energy, seeds[i]))
    return results[best], energies


def write_run_outputs(out: Path, result: RunResult, plots: bool) -> None:
    sys_ = result.final_system
    grid = sys_.grid
    for i, u in enumerate(sys_.phases):
        io.write_field(out / f"phase_{i}.f64", u)
        img = u if grid.dim == 2 else u[:, :, grid.m // 2]
        io.write_pgm(out / f"phase_{i}.pgm", img)
    inside = sys_.mask.inside if grid.dim == 2 else sys_.mask.inside[:, :, grid.m // 2]
    phases2d = sys_.phases if grid.dim == 2 else sys_.phases[:, :, :, grid.m // 2]
    io.write_composite_pgm(out / "composite.pgm", phases2d, inside)
    io.write_trace_csv(out / "trace.csv", result.stages)
    if plots:
        from . import plotting

        plotting.plot_phases(sys_, out / "phases.png", title=f"k={sys_.k}, m={grid.m}")
        plotting.plot_trace(result.stages, out / "trace.png")
        if grid.dim == 3:
            for i, u in enumerate(sys_.phases):
                plotting.plot_surface(u, grid.spacing, 0.5, out / f"surface_{i}.png")


def _summary(verb: str, result: RunResult, cli: dict, energies: dict) -> dict:
    data = result.to_dict()
    data.update(verb=verb, cli=cli, seed_energies={str(k): v for k, v in energies.items()})
    return data


def _oracle(cfg_dict: dict):
    domain = cfg_dict.get("domain", RunConfig().domain)
    try:
        shape = shape_from_dict(domain)
        poly = polygonize(shape)
    except (DomainError, OracleError) as exc:
        raise ConfigError("domain", f"oracle needs a convex polygon ({exc})") from None
    return poly, cheeger_exact(poly)


def execute(verb: str, cfg_dict: dict, cli: dict, out: Path, seeds: list[int] | None) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    if verb == "oracle":
        poly, exact = _oracle(cfg_dict)
        io.write_json(out / "oracle.json", exact.to_dict())
        io.write_polyline_csv(out / "oracle_boundary.csv", exact.boundary_polyline())
        summary = {"verb": verb, "domain": poly.to_dict(), "h": exact.h, "t_star": exact.t_star}
        summary["seconds"] = time.perf_counter() - t0
        io.write_json(out / "result.json", summary)
        return summary

    if verb == "compare":
        _, exact = _oracle(cfg_dict)  # validate the domain before the long run

    seeds = seeds or [cfg_dict.get("seed", 0)]
    result, energies = run_seeds(cfg_dict, seeds, cli.get("workers"))
    write_run_outputs(out, result, cli["plots"])
    summary = _summary(verb, result, cli, energies)

    if verb == "compare":
        summary["oracle"] = exact.to_dict()
        summary["relative_error"] = compare(result.sharp_eps, exact)
        summary["relative_error_half_level"] = compare(result.sharp, exact)
        io.write_json(out / "oracle.json", exact.to_dict())
        io.write_polyline_csv(out / "oracle_boundary.csv", exact.boundary_polyline())
        if cli["plots"]:
            from . import plotting

            plotting.plot_phases(
                result.final_system,
                out / "compare.png",
                level=result.sharp_eps.level,
                title=f"relative error {summary['relative_error']:.4f}",
                overlay=exact.boundary_polyline(),
            )
    elif verb == "pack":
        shape = result.config.shape()
        centers = extract_centers(result.final_system, 0.5)
        refine = refine_maximin if cli["packing"] == "maximin" else refine_product
        packing = refine(centers, shape)
        if not packing.config.is_feasible():
            raise PackingError("refined packing violates a constraint")
        io.write_json(out / "packing.json", packing.to_dict())
        io.write_packing_svg(out / "packing.svg", packing)
        if cli["plots"]:
            from . import plotting

            plotting.plot_packing(packing, out / "packing.png")
        summary["packing"] = packing.to_dict()
        summary["extracted_centers"] = centers.tolist()

    summary["seconds"] = time.perf_counter() - t0
    io.write_json(out / "result.json", summary)
    return summary


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_intermixed_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg_dict, cli = assemble_config(args)
        seeds = _parse_seeds(args.seeds) if args.seeds else None
        summary = execute(args.verb, cfg_dict, cli, Path(args.out), seeds)
    except ConfigError as exc:
        print(f"cheegerpack.config: bad value for '{exc.key}': {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InitializationError as exc:
        print(f"cheegerpack.optimizer: {exc}", file=sys.stderr)
        return EXIT_INIT
    except Exception as exc:  # noqa: BLE001 - report and exit nonzero
        print(f"{type(exc).__module__}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    brief = {k: summary[k] for k in ("relative_error", "h", "final_energy") if k in summary}
    if "packing" in summary:
        brief["packing_value"] = summary["packing"]["value"]
    print(json.dumps(io.jsonable(brief)))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
