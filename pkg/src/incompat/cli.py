"""Command-line surface.

Subcommands: ``jm`` (decide joint measurability), ``depol-scan``
(bound table over a depolarising grid), ``verify`` (property suites for
the structural guarantees), ``game`` (filter-game bounds).

Configuration precedence is CLI flag > INCOMPAT_* environment variable >
--config JSON file > built-in default. Exit codes: 0 success, 1 invalid
input, 2 solver failure, 3 internal inconsistency.

Output is deterministic given (config, seeds); CSV re-runs are byte
identical apart from the leading timestamp comment line. With
--cache-dir, results are stored content-addressed by the config hash and
reused on identical re-runs.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import datetime
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import DEFAULT_TOL, Tolerances
from .errors import IncompatError, InternalInconsistencyError, SolverError
from . import channels, games, serialize
from .allowed_ops import random_ao, apply_ao, golden_rule_check, jm_parents_for, parent_after_ao
from .jm import jm_decide, jm_visibility, jm_visibility_bisect, mub_assemblage, pauli_assemblage
from .objects import Channel, MeasurementAssemblage
from .preservability import (
    ProbeFamily,
    depolarising_report,
    eb_robustness_ub,
    restricted_robustness_lb,
    restricted_robustness_sdp,
    sf_lower_bounds,
    xyz_probes,
    xz_probes,
)

ENV_PREFIX = "INCOMPAT_"

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SOLVER = 2
EXIT_INCONSISTENT = 3

SCAN_COLUMNS = ["p", "threshold_flag", "F_plus", "lb_probe", "lb_sf", "ub_eb",
                "sandwich_lo", "sandwich_hi"]


@dataclass
class RunConfig:
    command: str = ""
    dimension: int = 2
    p_grid: list[float] = field(default_factory=lambda: [round(0.05 * i, 10) for i in range(21)])
    probe_set: str = "xyz"
    seeds: list[int] = field(default_factory=lambda: [0])
    tolerances: dict[str, float] = field(default_factory=dict)
    output: str = ""
    format: str = "csv"
    jobs: int = 1
    cache_dir: str = ""

    def __post_init__(self):
        if any(not 0.0 <= p <= 1.0 for p in self.p_grid):
            raise IncompatError("p grid values must lie in [0, 1]")
        if self.probe_set not in ("xz", "xyz", "mub-2", "mub-3"):
            raise IncompatError(f"unknown probe set {self.probe_set!r}")
        if self.probe_set in ("xz", "xyz", "mub-2") and self.dimension != 2:
            raise IncompatError(f"probe set {self.probe_set} needs dimension 2")
        if self.probe_set == "mub-3" and self.dimension != 3:
            raise IncompatError("probe set mub-3 needs dimension 3")

    def hash(self) -> str:
        doc = dataclasses.asdict(self)
        doc.pop("output")
        doc.pop("cache_dir")
        blob = json.dumps(doc, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def tol(self) -> Tolerances:
        return DEFAULT_TOL.override(**self.tolerances) if self.tolerances else DEFAULT_TOL


def probes_for(cfg: RunConfig) -> ProbeFamily:
    tol = cfg.tol()
    if cfg.probe_set == "xz":
        return xz_probes(tol=tol)
    if cfg.probe_set in ("xyz", "mub-2"):
        return xyz_probes(2, tol=tol)
    return ProbeFamily((mub_assemblage(3, tol=tol),))


# ---------------------------------------------------------------------------
# Output plumbing
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def rows_to_csv(rows: list[dict], columns: list[str]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(c)) for c in columns))
    return "\n".join(lines) + "\n"


def emit(payload: str, cfg: RunConfig, timestamped: bool) -> None:
    text = payload
    if timestamped and cfg.format == "csv":
        stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
        text = f"# generated: {stamp}\n{payload}"
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cached_run(cfg: RunConfig, produce) -> str:
    """Content-addressed cache around a payload producer."""
    if not cfg.cache_dir:
        return produce()
    os.makedirs(cfg.cache_dir, exist_ok=True)
    path = os.path.join(cfg.cache_dir, f"{cfg.hash()}.{cfg.format}")
    if os.path.exists(path):
        with open(path) as fh:
            return fh.read()
    payload = produce()
    with open(path, "w") as fh:
        fh.write(payload)
    return payload


def _parallel_map(fn, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Input resolution
# ---------------------------------------------------------------------------


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise IncompatError(f"cannot read JSON from {path}: {exc}") from exc


def resolve_assemblage(builtin: Optional[str], path: Optional[str],
                       tol: Tolerances) -> MeasurementAssemblage:
    if builtin:
        table = {
            "pauli-xz": lambda: pauli_assemblage(tol=tol),
            "pauli-xyz": lambda: pauli_assemblage(include_y=True, tol=tol),
            "mub-2": lambda: mub_assemblage(2, tol=tol),
            "mub-3": lambda: mub_assemblage(3, tol=tol),
        }
        if builtin not in table:
            raise IncompatError(f"unknown builtin assemblage {builtin!r}")
        return table[builtin]()
    if path:
        return serialize.assemblage_from_json(_load_json(path), tol=tol)
    raise IncompatError("need --builtin or --file")


def resolve_channel(builtin: Optional[str], path: Optional[str], tol: Tolerances) -> Channel:
    if builtin:
        if builtin == "identity":
            return channels.identity_channel(2, tol=tol)
        if builtin.startswith("depol:"):
            return channels.depolarising(float(builtin.split(":", 1)[1]), 2, tol=tol)
        if builtin == "measure-z":
            return channels.measure_z_prepare(2, tol=tol)
        raise IncompatError(f"unknown builtin channel {builtin!r}")
    if path:
        return serialize.channel_from_json(_load_json(path), tol=tol)
    raise IncompatError("need --builtin or --channel file")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_jm(cfg: RunConfig, args) -> int:
    tol = cfg.tol()
    asm = resolve_assemblage(args.builtin, args.file, tol)
    verdict = jm_decide(asm)
    vis = jm_visibility(asm)
    label = "JOINTLY MEASURABLE" if verdict.jm else "INCOMPATIBLE"
    print(f"{label}, visibility {vis:.4f} (margin {verdict.margin:+.3e})")
    rows = [{
        "input": args.builtin or args.file,
        "jm": verdict.jm,
        "margin": verdict.margin,
        "visibility": vis,
    }]
    if args.bisect_check:
        vb = jm_visibility_bisect(asm, tol=1e-5)
        rows[0]["visibility_bisect"] = vb
        print(f"bisection cross-check: {vb:.5f} (|diff| {abs(vb - vis):.2e})")
    if cfg.output:
        payload = (json.dumps(rows, indent=2) + "\n") if cfg.format == "json" \
            else rows_to_csv(rows, list(rows[0].keys()))
        emit(payload, cfg, timestamped=True)
    return EXIT_OK


def _scan_row(p: float, cfg: RunConfig, probes: ProbeFamily) -> dict:
    d = cfg.dimension
    tol = cfg.tol()
    rep = depolarising_report(p, d)
    ch = channels.depolarising(p, d, tol=tol)
    lb_probe = restricted_robustness_lb(ch, probes)
    try:
        lb_sf = sf_lower_bounds(ch).lower
    except IncompatError:
        lb_sf = None
    ub_eb = eb_robustness_ub(ch, heuristic=d > 2)
    row = {
        "p": p,
        "threshold_flag": p <= rep.ia_threshold,
        "F_plus": rep.f_plus,
        "lb_probe": lb_probe,
        "lb_sf": lb_sf,
        "ub_eb": ub_eb,
        "sandwich_lo": rep.sandwich[0] if rep.sandwich else None,
        "sandwich_hi": rep.sandwich[1] if rep.sandwich else None,
    }
    if d == 2:
        gap = 1e-6
        ok = (
            lb_probe <= ub_eb + gap
            and (lb_sf is None or lb_sf <= ub_eb + gap)
            and lb_probe <= row["sandwich_hi"] + gap
            and (lb_sf is None or lb_sf <= row["sandwich_hi"] + gap)
            and ub_eb >= row["sandwich_lo"] - gap
        )
        if not ok:
            raise InternalInconsistencyError(f"bound ordering violated at p={p}: {row}")
    return row


def cmd_depol_scan(cfg: RunConfig, args) -> int:
    probes = probes_for(cfg)

    def produce() -> str:
        rows = _parallel_map(lambda p: _scan_row(p, cfg, probes), cfg.p_grid, cfg.jobs)
        if cfg.format == "json":
            return json.dumps(rows, indent=2) + "\n"
        return rows_to_csv(rows, SCAN_COLUMNS)

    emit(cached_run(cfg, produce), cfg, timestamped=True)
    return EXIT_OK


def _eb_base_channels(tol: Tolerances) -> list[Channel]:
    return [
        channels.measure_z_prepare(2, tol=tol),
        channels.depolarising(0.3, 2, tol=tol),
        channels.depolarising(1.0 / 3.0, 2, tol=tol),
    ]


def _verify_gamma(cfg: RunConfig, trials: int) -> tuple[bool, str]:
    worst = 0.0
    for i in range(trials):
        rng = np.random.default_rng(cfg.seeds[0] + i)
        n = channels.random_channel(2, kraus_rank=3, rng=rng)
        f = channels.random_filter(4, kraus_rank=3, rng=rng)
        s1 = games.score(n, f).value
        s2 = games.score(n, games.gamma_reduce(f)).value
        worst = max(worst, abs(s1 - s2))
    return worst <= 1e-9, f"gamma: {trials} trials, worst residual {worst:.2e}"


def _verify_golden_rule(cfg: RunConfig, trials: int) -> tuple[bool, str]:
    probes = probes_for(cfg)
    tol = cfg.tol()
    bases = _eb_base_channels(tol)

    def one(i: int) -> tuple[float, bool]:
        ao = random_ao(cfg.seeds[0] + i, dim=2, tol=tol)
        reports = [golden_rule_check(ao, base, probes, warrant="ppt") for base in bases]
        return min(r.worst_margin for r in reports), all(r.passed for r in reports)

    results = _parallel_map(one, range(trials), cfg.jobs)
    worst = min(m for m, _ in results)
    ok = all(p for _, p in results) and worst >= -1e-7
    return ok, f"golden-rule: {trials} operations x 3 EB channels, worst margin {worst:+.2e}"


def _verify_monotonicity(cfg: RunConfig, trials: int) -> tuple[bool, str]:
    tol = cfg.tol()

    def one(i: int) -> float:
        seed = cfg.seeds[0] + i
        ao = random_ao(seed, dim=2, tol=tol)
        n = channels.random_channel(2, kraus_rank=2, seed=10_000 + seed, tol=tol)
        return eb_robustness_ub(apply_ao(ao, n)) - eb_robustness_ub(n)

    worst = max(_parallel_map(one, range(trials), cfg.jobs))
    return worst <= 1e-6, f"monotonicity: {trials} trials, worst UB increase {worst:+.2e}"


def _verify_witness(cfg: RunConfig, trials: int, extra: Sequence[Channel] = ()) -> tuple[bool, str]:
    probes = probes_for(cfg)
    tol = cfg.tol()
    tests = [channels.identity_channel(2, tol=tol), channels.depolarising(0.9, 2, tol=tol)]
    tests += [channels.random_channel(2, kraus_rank=2, seed=20_000 + cfg.seeds[0] + i, tol=tol)
              for i in range(trials)]
    tests += list(extra)
    worst = 0.0
    for ch in tests:
        res = restricted_robustness_sdp(ch, probes)
        gb = games.witness_bound(ch, probes, _precomputed=res)
        worst = max(worst, abs(gb.ratio_lb - 1.0 - res.value))
    return worst <= 1e-5, f"witness: {len(tests)} channels, worst duality gap {worst:.2e}"


def _verify_parent_construction(cfg: RunConfig, trials: int) -> tuple[bool, str]:
    tol = cfg.tol()
    probe = xz_probes(tol=tol).probes[0]
    worst = 0.0
    for i in range(trials):
        ao = random_ao(cfg.seeds[0] + i, dim=2, tol=tol)
        base = _eb_base_channels(tol)[i % 3]
        parents = jm_parents_for(ao, base, probe)
        w, parent = parent_after_ao(ao, probe, parents)
        worst = max(worst, parent.reconstruction_residual(w))
    return worst <= 1e-8, f"parent-construction: {trials} trials, worst residual {worst:.2e}"


VERIFY_SUITES = {
    "gamma": _verify_gamma,
    "golden-rule": _verify_golden_rule,
    "monotonicity": _verify_monotonicity,
    "witness": _verify_witness,
    "parent-construction": _verify_parent_construction,
}


def cmd_verify(cfg: RunConfig, args) -> int:
    names = list(VERIFY_SUITES) if args.suite == "all" else [args.suite]
    extra: list[Channel] = []
    if args.channel_file:
        extra.append(resolve_channel(None, args.channel_file, cfg.tol()))
    ok_all = True
    for name in names:
        fn = VERIFY_SUITES[name]
        if name == "witness" and extra:
            ok, summary = fn(cfg, args.trials, extra=extra)  # type: ignore[call-arg]
        else:
            ok, summary = fn(cfg, args.trials)
        ok_all &= ok
        print(("PASS " if ok else "FAIL "), summary)
    return EXIT_OK if ok_all else EXIT_INCONSISTENT


def cmd_game(cfg: RunConfig, args) -> int:
    tol = cfg.tol()
    n = resolve_channel(args.builtin, args.channel, tol)
    if args.filter_builtin == "phi-plus":
        filt = games.phi_plus_filter(n.dim_in, tol=tol)
    elif args.filter:
        filt = serialize.filter_from_json(_load_json(args.filter), tol=tol)
    else:
        raise IncompatError("need --filter-builtin or --filter")
    if args.analytic_denominator:
        gb = games.game_lb(n, filt, denominator="analytic")
    else:
        gb = games.game_lb(n, filt, probes_for(cfg), denominator="sdp")
    print(f"numerator (score)  : {gb.numerator:.6f}")
    print(f"denominator        : {gb.denominator:.6f}  [{gb.denominator_method}]")
    print(f"ratio (<= 1 + R)   : {gb.ratio_lb:.6f}")
    if cfg.output:
        doc = serialize.game_bound_to_json(gb)
        emit(json.dumps(doc, indent=2) + "\n", cfg, timestamped=False)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument plumbing
# ---------------------------------------------------------------------------


def _parse_grid(text: str) -> list[float]:
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        n = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 12) for i in range(n)]
    return [float(x) for x in text.split(",") if x.strip()]


def _parse_tol(text: str) -> dict[str, float]:
    out = {}
    for part in text.split(","):
        if not part.strip():
            continue
        key, _, val = part.partition("=")
        out[key.strip()] = float(val)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="incompat",
        description="Joint measurability and incompatibility preservability toolkit",
    )
    parser.add_argument("--version", action="version", version=f"incompat {__version__}")
    parser.add_argument("--config", help="JSON file with RunConfig fields")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dim", type=int, default=None)
    common.add_argument("--p-grid", default=None, help="comma list or start:stop:step")
    common.add_argument("--probes", default=None, choices=["xz", "xyz", "mub-2", "mub-3"])
    common.add_argument("--seeds", default=None, help="comma-separated integers")
    common.add_argument("--tol", default=None, help="overrides, e.g. feas=1e-7,psd=1e-8")
    common.add_argument("--jobs", type=int, default=None)
    common.add_argument("--output", default=None)
    common.add_argument("--format", default=None, choices=["json", "csv"])
    common.add_argument("--cache-dir", default=None)

    sub = parser.add_subparsers(dest="command", required=True)

    p_jm = sub.add_parser("jm", parents=[common], help="decide joint measurability")
    p_jm.add_argument("--builtin", help="pauli-xz | pauli-xyz | mub-2 | mub-3")
    p_jm.add_argument("--file", help="assemblage JSON file")
    p_jm.add_argument("--bisect-check", action="store_true",
                      help="also run the bisection cross-validation")

    sub.add_parser("depol-scan", parents=[common],
                   help="bound table over a depolarising-noise grid")

    p_ver = sub.add_parser("verify", parents=[common], help="run property suites")
    p_ver.add_argument("suite", choices=list(VERIFY_SUITES) + ["all"])
    p_ver.add_argument("--trials", type=int, default=30)
    p_ver.add_argument("--channel-file", help="extra channel JSON to include")

    p_game = sub.add_parser("game", parents=[common], help="filter-game bound")
    p_game.add_argument("--builtin", help="identity | depol:P | measure-z")
    p_game.add_argument("--channel", help="channel JSON file")
    p_game.add_argument("--filter-builtin", help="phi-plus")
    p_game.add_argument("--filter", help="filter JSON file")
    p_game.add_argument("--analytic-denominator", action="store_true",
                        help="use the exact qubit constant 5/8 (phi+ filter only)")
    return parser


def config_from_args(args) -> RunConfig:
    file_cfg: dict = {}
    if args.config:
        file_cfg = _load_json(args.config)

    def pick(flag: str, env: str, file_key: str, default, convert=None):
        def conv(v):
            return convert(v) if convert is not None and isinstance(v, str) else v

        cli_val = getattr(args, flag, None)
        if cli_val is not None:
            return conv(cli_val)
        env_val = os.environ.get(ENV_PREFIX + env)
        if env_val is not None:
            return conv(env_val)
        if file_key in file_cfg:
            return conv(file_cfg[file_key])
        return default

    return RunConfig(
        command=args.command,
        dimension=int(pick("dim", "DIM", "dimension", 2, int)),
        p_grid=pick("p_grid", "P_GRID", "p_grid",
                    [round(0.05 * i, 10) for i in range(21)], _parse_grid),
        probe_set=pick("probes", "PROBES", "probe_set", "xyz"),
        seeds=pick("seeds", "SEEDS", "seeds", [0],
                   lambda s: [int(x) for x in s.split(",")]),
        tolerances=pick("tol", "TOL", "tolerances", {}, _parse_tol),
        output=pick("output", "OUTPUT", "output", ""),
        format=pick("format", "FORMAT", "format", "csv"),
        jobs=int(pick("jobs", "JOBS", "jobs", 1, int)),
        cache_dir=pick("cache_dir", "CACHE_DIR", "cache_dir", ""),
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        handler = {
            "jm": cmd_jm,
            "depol-scan": cmd_depol_scan,
            "verify": cmd_verify,
            "game": cmd_game,
        }[args.command]
        return handler(cfg, args)
    except InternalInconsistencyError as exc:
        print(f"internal inconsistency: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except IncompatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
