"""Command line driver: ``macroevo {parse,place,evolve,render}``.

Exit codes: 0 success, 1 placement failure, 2 configuration error, 3 I/O or
format error, 4 provider failure when degradation to unguided rollouts is
disabled.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

from .analytical import PlacerConfig, solve
from .evolution import EvolutionConfig, run, summarize
from .legalize import LegalizationError, legalize
from .metrics import evaluate, total_hpwl
from .netlist import BookshelfError, parse_bookshelf, read_placement, select_guidance_macros, serialize_placement
from .placers import AnalyticalPlacer, PolicyPlacer
from .policy import BaselinePolicy, PlacementError
from .prompt import assign_colors, build_prompt
from .providers import (MockOracle, ProviderConfig, ProviderConfigError, ProviderError, RecordingTransport,
                        RemoteProvider, RemoteVLMClient, ReplayTransport, HTTPTransport)
from .regions import parse_response
from .render import render_png

log = logging.getLogger("macroevo")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_PROVIDER = 0, 2, 3, 4

SECTIONS = {"netlist", "placer", "policy", "evolution", "provider", "mock", "prompt"}


class ConfigError(ValueError):
    pass


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - SECTIONS
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return cfg


def _make(cls, section: dict, name: str, **overrides):
    fields = {f.name for f in dataclasses.fields(cls)}
    bad = set(section) - fields
    if bad:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(bad)}")
    kw = dict(section)
    kw.update({k: v for k, v in overrides.items() if v is not None})
    for key in ("bins", "gamma_schedule"):
        if isinstance(kw.get(key), list):
            kw[key] = tuple(kw[key])
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}]: {exc}") from exc


def _netlist(args, cfg):
    sec = cfg.get("netlist", {})
    bad = set(sec) - {"grid", "all_macros", "unfix_macros"}
    if bad:
        raise ConfigError(f"unknown keys in [netlist]: {sorted(bad)}")
    grid = tuple(args.grid) if getattr(args, "grid", None) else tuple(sec.get("grid", (84, 84)))
    if len(grid) != 2 or min(grid) < 1:
        raise ConfigError("grid must be two positive integers")
    return parse_bookshelf(args.aux, grid=grid,
                           all_movable_macros=bool(getattr(args, "all_macros", False) or sec.get("all_macros", False)),
                           unfix_macros=bool(getattr(args, "unfix_macros", False) or sec.get("unfix_macros", False)))


def _placer(kind: str, n, cfg):
    if kind == "analytical":
        pcfg = _make(PlacerConfig, cfg.get("placer", {}), "placer")
        return AnalyticalPlacer(pcfg)
    pol = cfg.get("policy", {})
    bad = set(pol) - {"beta"}
    if bad:
        raise ConfigError(f"unknown keys in [policy]: {sorted(bad)}")
    try:
        policy = BaselinePolicy(float(pol.get("beta", 1.0)))
    except ValueError as exc:
        raise ConfigError(f"[policy]: {exc}") from exc
    cell_cfg = _make(PlacerConfig, cfg.get("placer", {}), "placer", lambda_anchor=0.0)
    return PolicyPlacer(policy, cell_cfg)


def _write(path: str, data, mode="w"):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, mode, **({} if "b" in mode else {"encoding": "utf-8"})) as fh:
        fh.write(data)


# ---------------------------------------------------------------------------


def cmd_parse(args) -> int:
    cfg = load_config(getattr(args, "config", None))
    n = _netlist(args, cfg)
    print(n.summary())
    movable = len(n.macro_indices(movable_only=True))
    print(f"canvas {n.canvas_width:g} x {n.canvas_height:g} at ({n.canvas_x:g}, {n.canvas_y:g}); "
          f"grid {n.grid[0]} x {n.grid[1]}; {movable} movable macros")
    return EXIT_OK


def cmd_place(args) -> int:
    cfg = load_config(args.config)
    n = _netlist(args, cfg)
    placer = _placer(args.placer, n, cfg)
    suggestions = None
    if args.suggestions:
        with open(args.suggestions, encoding="utf-8") as fh:
            suggestions, warnings = parse_response(fh.read(), n, n.grid, source="mock")
        for w in warnings:
            print(f"warning: {w}", file=sys.stderr)
    out_dir = args.out_dir
    if args.placer == "analytical":
        anchors, invalid = placer.anchors(n, suggestions)
        res = solve(n, placer.cfg.with_seed(args.seed), anchors)
        raw = res.placement
        _write(os.path.join(out_dir, "trace.csv"), res.trace_csv())
    else:
        raw = placer.place(n, suggestions, args.seed).placement
    p = legalize(raw, n)
    _write(os.path.join(out_dir, f"{n.name}.pl"), serialize_placement(p, n))
    report = evaluate(n, p)
    _write(os.path.join(out_dir, "metrics.csv"), report.to_csv())
    print(f"{n.name}: HPWL {report.total_hpwl:.6g}, macro overlap {report.overlap_area:g}, "
          f"RUDY max {report.rudy_max:.4g}")
    return EXIT_OK


def _provider(args, n, cfg, ecfg):
    kind = args.provider
    if kind == "none":
        return None
    if kind == "mock":
        sec = dict(cfg.get("mock", {}))
        bad = set(sec) - {"target", "radius", "gap_scale"}
        if bad:
            raise ConfigError(f"unknown keys in [mock]: {sorted(bad)}")
        target_path = args.target or sec.get("target")
        if not target_path:
            raise ConfigError("the mock provider needs a target layout (--target file.pl)")
        target = read_placement(target_path, n)
        radius = args.radius if args.radius is not None else int(sec.get("radius", 0))
        return MockOracle(target, total_hpwl(n, target), radius=radius,
                          gap_scale=float(sec.get("gap_scale", 0.25)), candidates=ecfg.provider_candidates,
                          limit=ecfg.guidance_limit)
    pcfg = _make(ProviderConfig, cfg.get("provider", {}), "provider", candidates=ecfg.provider_candidates)
    if kind == "replay":
        if not args.fixture:
            raise ConfigError("--provider replay needs --fixture")
        client = RemoteVLMClient(pcfg, ReplayTransport(args.fixture), require_token=False)
    else:
        try:
            pcfg.token()
            pcfg.resolved_endpoint()
        except ProviderConfigError as exc:
            raise ConfigError(str(exc)) from exc
        transport = HTTPTransport()
        if args.fixture:
            transport = RecordingTransport(transport, args.fixture)
        client = RemoteVLMClient(pcfg, transport)
    psec = cfg.get("prompt", {})
    bad = set(psec) - {"strategy", "modality", "image_px", "color_seed"}
    if bad:
        raise ConfigError(f"unknown keys in [prompt]: {sorted(bad)}")
    macros = select_guidance_macros(n, ecfg.guidance_limit)
    colors = assign_colors(n, macros, seed=int(psec.get("color_seed", 0)))

    def factory(context, netlist):
        return build_prompt(context, netlist, colors, macros, psec.get("strategy", "default"),
                            psec.get("modality", "full"), image_px=int(psec.get("image_px", 512)))

    return RemoteProvider(client, factory)


def _parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --seeds {text!r}") from exc
    if not seeds:
        raise ConfigError("no seeds given")
    return seeds


def cmd_evolve(args) -> int:
    cfg = load_config(args.config)
    n = _netlist(args, cfg)
    seeds = _parse_seeds(args.seeds)
    base = _make(EvolutionConfig, cfg.get("evolution", {}), "evolution", episodes=args.episodes,
                 strategy=args.strategy, context_length=args.context, temperature=args.tau, batch=args.batch)
    placer = _placer(args.placer, n, cfg)
    provider = _provider(args, n, cfg, base)
    results = []
    for s in seeds:
        ecfg = dataclasses.replace(base, seed=s)
        res = run(n, placer, provider, ecfg, strict=args.no_degrade)
        results.append(res)
        if args.out_dir:
            best = res.history.best()
            _write(os.path.join(args.out_dir, f"seed{s}_best.pl"), serialize_placement(best.placement, n))
            rows = [["episode", "hpwl", "guided", "candidate"]]
            rows += [[e.episode, repr(e.hpwl), int(e.guided), "" if e.candidate_index is None else e.candidate_index]
                     for e in res.history]
            _write(os.path.join(args.out_dir, f"seed{s}_history.csv"),
                   "".join(",".join(map(str, r)) + "\n" for r in rows))
        print(f"seed {s}: best HPWL {res.best_hpwl:.6g}, queries {res.queries}, "
              f"provider errors {len(res.errors)}")
    report = summarize(n.name, results)
    se = "n/a" if report.stderr_best is None else f"{report.stderr_best:.6g}"
    print(f"{n.name}: mean best HPWL {report.mean_best:.6g} ± {se} over {len(seeds)} seed(s)")
    if args.out_dir:
        _write(os.path.join(args.out_dir, "report.json"), report.to_json() + "\n")
        _write(os.path.join(args.out_dir, "report.csv"), report.to_csv())
    return EXIT_OK


def cmd_render(args) -> int:
    cfg = load_config(getattr(args, "config", None))
    n = _netlist(args, cfg)
    p = read_placement(args.pl, n)
    macros = select_guidance_macros(n)
    colors = assign_colors(n, macros, seed=args.seed)
    png = render_png(p, n, colors, macros if args.highlight else (), px=args.px)
    _write(args.out, png, "wb")
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="macroevo", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("aux", help="Bookshelf .aux file")
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--grid", type=int, nargs=2, metavar=("COLS", "ROWS"))
        p.add_argument("--all-macros", action="store_true", help="treat every non-terminal node as a macro")
        p.add_argument("--unfix-macros", action="store_true", help="make /FIXED macros movable")

    p = sub.add_parser("parse", help="print netlist statistics")
    common(p)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("place", help="one placement rollout, legalized")
    common(p)
    p.add_argument("--placer", choices=["analytical", "policy"], default="analytical")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--suggestions", help="text file of region lines to guide this rollout")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_place)

    p = sub.add_parser("evolve", help="run the evolutionary loop")
    common(p)
    p.add_argument("--placer", choices=["analytical", "policy"], default="policy")
    p.add_argument("--episodes", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--strategy")
    p.add_argument("--context", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--provider", choices=["mock", "remote", "replay", "none"], default="mock")
    p.add_argument("--target", help="target .pl for the mock provider")
    p.add_argument("--radius", type=int, help="mock provider noise radius in grid cells")
    p.add_argument("--fixture", help="JSONL exchange file (written with remote, read with replay)")
    p.add_argument("--seeds", default="0")
    p.add_argument("--no-degrade", action="store_true", help="fail instead of running unguided on provider errors")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("render", help="draw a placement as PNG")
    common(p)
    p.add_argument("pl")
    p.add_argument("--out", required=True)
    p.add_argument("--px", type=int, default=512)
    p.add_argument("--seed", type=int, default=0, help="seed for macro coloring")
    p.add_argument("--highlight", action="store_true", help="outline and label the guidance macros")
    p.set_defaults(func=cmd_render)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except (BookshelfError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PlacementError, LegalizationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
