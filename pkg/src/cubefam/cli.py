"""Command-line front door: batch subcommands over family and poset files.

Every run emits a single JSON (or CSV) report with the configuration
echoed back, so the exact invocation can be replayed from its output.
Randomized subcommands demand an explicit --seed unless --ephemeral is
passed; either way the seed used lands in the report.

Exit codes: 0 success (including honest "absent"/"insufficient"
outcomes), 2 parse error, 3 precondition violation, 4 budget exhausted,
5 certification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import secrets
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import mpmath as mp

from . import __version__
from .concentration import (
    verify_tail_bound,
    verify_trace_probability,
)
from .embeddings import (
    DEFAULT_EMBED_ATTEMPTS,
    find_pattern_via_universality,
)
from .errors import (
    CertificationError,
    ParseError,
    PreconditionError,
    SearchBudgetExceeded,
)
from .extraction import STATUS_EXHAUSTED, compute_cascade, extract_induced_copy
from .extremal import extremal_search, middle_layers_number
from .families import (
    format_subset,
    lubell_mass,
    parse_subset_literal,
    read_family,
    relative_lubell,
)
from .pivots import enumerate_anti_pivots, enumerate_pivots, is_flexible
from .posets import (
    EmbeddingMap,
    FinitePoset,
    contains_subposet,
    family_as_poset,
    make_chain,
    make_cube,
    make_v,
    read_poset,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_PRECONDITION = 3
EXIT_BUDGET = 4
EXIT_CERTIFICATION = 5

_RANDOMIZED = {"embed", "extract"}
_MP_PRINT_DPS = 30


def builtin_pattern(name: str) -> FinitePoset:
    """P2: two-chain; V2: one bottom under two tops; D2: its dual;
    Q2: the four subsets of a two-set."""
    table: dict[str, Callable[[], FinitePoset]] = {
        "P2": lambda: make_chain(2),
        "P3": lambda: make_chain(3),
        "P4": lambda: make_chain(4),
        "V2": make_v,
        "D2": lambda: make_v().dual(),
        "Q2": lambda: make_cube(2),
    }
    if name not in table:
        raise ParseError(
            f"unknown builtin pattern {name!r} (have {', '.join(sorted(table))})"
        )
    return table[name]()


def load_pattern(spec: str) -> FinitePoset:
    if spec.startswith("builtin:"):
        return builtin_pattern(spec.split(":", 1)[1])
    return read_poset(spec)


def _fraction_arg(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"not a rational number: {text!r}") from exc


def _jsonable(x):
    """Exact values only: rationals as "p/q" strings, big reals via mpmath."""
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, mp.mpf):
        with mp.workdps(_MP_PRINT_DPS):
            return mp.nstr(x, 20)
    if isinstance(x, bool) or x is None or isinstance(x, (int, str)):
        return x
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in sorted(x.items(), key=lambda kv: str(kv[0]))}
    if isinstance(x, (list, tuple, set, frozenset)):
        items = list(x)
        if isinstance(x, (set, frozenset)):
            items = sorted(items, key=str)
        return [_jsonable(v) for v in items]
    return str(x)


def _mask_json(mask: int) -> str:
    return format_subset(mask)


@dataclass
class RunConfig:
    subcommand: str
    params: dict
    seed: Optional[int] = None
    ephemeral: bool = False
    with_timings: bool = False
    output: Optional[str] = None
    fmt: str = "json"

    def to_payload(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "params": self.params,
            "seed": self.seed,
            "ephemeral": self.ephemeral,
            "with_timings": self.with_timings,
            "output": self.output,
            "format": self.fmt,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "RunConfig":
        try:
            return cls(
                subcommand=payload["subcommand"],
                params=dict(payload.get("params", {})),
                seed=payload.get("seed"),
                ephemeral=bool(payload.get("ephemeral", False)),
                with_timings=bool(payload.get("with_timings", False)),
                output=payload.get("output"),
                fmt=payload.get("format", "json"),
            )
        except KeyError as exc:
            raise ParseError(f"config file missing key: {exc}") from exc


@dataclass
class Report:
    config: RunConfig
    results: dict
    certifications: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    exit_code: int = EXIT_OK

    def payload(self) -> dict:
        out = {
            "config": self.config.to_payload(),
            "results": self.results,
            "certifications": self.certifications,
            "versions": {"cubefam": __version__},
            "threads": 1,
        }
        if self.config.with_timings:
            out["timings"] = self.timings
        return out


def emit_report(rep: Report, fmt: Optional[str] = None) -> bytes:
    fmt = fmt or rep.config.fmt
    if fmt == "json":
        text = json.dumps(
            _jsonable(rep.payload()), sort_keys=True, indent=2, separators=(",", ": ")
        )
        return (text + "\n").encode("utf-8")
    if fmt == "csv":
        rows = rep.results.get("csv_rows", [])
        header = rep.results.get("csv_header", [])
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_jsonable(v) if not isinstance(v, str) else v for v in row])
        return buf.getvalue().encode("utf-8")
    raise ParseError(f"unknown output format {fmt!r}")


# ---------------------------------------------------------------------------
# Subcommand handlers.  Each returns (results, certifications, exit_code).


def _embedding_payload(emb) -> dict:
    if emb.kind == "masks":
        images = [_mask_json(m) for m in emb.images]
    else:
        images = list(emb.images)
    return {
        "kind": emb.kind,
        "mode": emb.mode,
        "target_n": emb.target_n,
        "images": images,
    }


def _handle_lubell(cfg: RunConfig):
    fam = read_family(cfg.params["family"])
    results = {"n": fam.n, "size": len(fam), "mass": lubell_mass(fam)}
    if cfg.params.get("bottom") is not None or cfg.params.get("top") is not None:
        bottom = parse_subset_literal(cfg.params.get("bottom") or "-", fam.n)
        top_text = cfg.params.get("top")
        top = (
            fam.ground.full_mask
            if top_text is None
            else parse_subset_literal(top_text, fam.n)
        )
        results["interval"] = {
            "bottom": _mask_json(bottom),
            "top": _mask_json(top),
            "relative_mass": relative_lubell(fam, bottom, top),
        }
    return results, [], EXIT_OK


def _handle_pivots(cfg: RunConfig):
    fam = read_family(cfg.params["family"])
    base = parse_subset_literal(cfg.params["base"], fam.n)
    r = cfg.params["r"]
    anti = bool(cfg.params.get("anti"))
    ps = (enumerate_anti_pivots if anti else enumerate_pivots)(fam, base, r)
    results = {
        "n": fam.n,
        "base": _mask_json(base),
        "r": r,
        "kind": ps.kind,
        "count": len(ps.pivots),
        "pivots": [
            {"moved": _mask_json(x), "witness": _mask_json(ps.witness_of[x])}
            for x in ps.pivots
        ],
    }
    gamma = cfg.params.get("gamma")
    if gamma is not None:
        results["gamma"] = Fraction(gamma)
        results["flexible"] = is_flexible(fam, base, Fraction(gamma), r, anti=anti)
    return results, [], EXIT_OK


def _handle_embed(cfg: RunConfig):
    fam = read_family(cfg.params["family"])
    pattern = load_pattern(cfg.params["pattern"])
    mode = cfg.params["mode"]
    certs = []
    if mode == "weak":
        emb = contains_subposet(family_as_poset(fam), pattern, "weak")
        if emb is not None:
            emb_masks = EmbeddingMap(
                tuple(fam.members[i] for i in emb.images),
                "weak",
                "masks",
                target_n=fam.n,
            )
            certs.append(
                {"object": "embedding", "check": "order-preserving pairwise", "passed": True}
            )
            return (
                {"status": "found", "map": _embedding_payload(emb_masks),
                 "seed": cfg.seed, "attempts_used": 0},
                certs,
                EXIT_OK,
            )
        return ({"status": "absent", "map": None, "seed": cfg.seed,
                 "attempts_used": 0}, certs, EXIT_OK)
    attempts = cfg.params.get("attempts") or DEFAULT_EMBED_ATTEMPTS
    stats: dict = {}
    emb = find_pattern_via_universality(
        fam, pattern, seed=cfg.seed, attempts=attempts, stats=stats
    )
    used = stats.get("attempts_used", 0)
    if emb is None:
        return ({"status": "absent", "map": None, "seed": cfg.seed,
                 "attempts_used": used}, certs, EXIT_OK)
    certs.append({"object": "embedding", "check": "induced pairwise", "passed": True})
    return (
        {"status": "found", "map": _embedding_payload(emb), "seed": cfg.seed,
         "attempts_used": used},
        certs,
        EXIT_OK,
    )


def _trace_payload(trace) -> dict:
    return {
        "mode": trace.mode,
        "m": trace.m,
        "n": trace.n,
        "status": trace.status,
        "branch": trace.branch,
        "t": trace.t,
        "initial_mass": trace.initial_mass,
        "threshold": trace.threshold,
        "warnings": list(trace.warnings),
        "steps": [
            {
                "index": s.index,
                "case": s.case,
                "a": s.a,
                "b": s.b,
                "A": _mask_json(s.A),
                "B": _mask_json(s.B),
                "family_size": s.family_size,
                "stratum_r": s.stratum_r,
                "stratum_size": len(s.stratum),
                "mass": s.step_mass,
                "mass_floor_ok": s.cond5_ok,
                "fallback": s.fallback,
            }
            for s in trace.steps
        ],
    }


def _handle_extract(cfg: RunConfig):
    fam = read_family(cfg.params["family"])
    pattern = load_pattern(cfg.params["pattern"])
    mode = cfg.params["mode"]
    if mode == "override":
        if cfg.params.get("q") is None or cfg.params.get("p") is None:
            raise PreconditionError("override mode needs --q and --p")
        overrides = {"q": Fraction(cfg.params["q"]), "p": Fraction(cfg.params["p"])}
        if cfg.params.get("eps") is not None:
            overrides["eps"] = Fraction(cfg.params["eps"])
    else:
        if cfg.params.get("q") is not None or cfg.params.get("p") is not None:
            raise PreconditionError("constant overrides are only legal with --mode override")
        overrides = None
    attempts = cfg.params.get("attempts") or DEFAULT_EMBED_ATTEMPTS
    res = extract_induced_copy(
        fam, pattern, overrides, seed=cfg.seed or 0, attempts=attempts
    )
    certs = []
    results = {
        "status": res.status,
        "mode": res.mode,
        "seed": cfg.seed,
        "map": None,
        "trace": _trace_payload(res.trace) if res.trace else None,
    }
    if res.embed is not None:
        results["cube"] = {
            "status": res.embed.status,
            "attempts_used": res.embed.attempts_used,
        }
    if res.map is not None:
        results["map"] = _embedding_payload(res.map)
        certs.append({"object": "trace", "check": "per-step structural claims", "passed": True})
        certs.append({"object": "witnesses", "check": "pairwise order against strata", "passed": True})
        certs.append({"object": "embedding", "check": "induced pairwise", "passed": True})
    code = EXIT_OK if res.status != STATUS_EXHAUSTED else EXIT_BUDGET
    return results, certs, code


def _handle_extremal(cfg: RunConfig):
    pattern = load_pattern(cfg.params["pattern"])
    pattern_id = cfg.params["pattern"]
    n = cfg.params["n"]
    res = extremal_search(
        n,
        pattern,
        cfg.params["mode"],
        cfg.params["objective"],
        budget=cfg.params.get("budget_nodes"),
        pattern_id=pattern_id,
    )
    certs = [
        {"object": "family", "check": "pattern-free re-verified", "passed": True},
        {"object": "value", "check": "matches certificate objective", "passed": True},
    ]
    wall = round(res.wall_time, 6) if cfg.with_timings else ""
    results = {
        "n": res.n,
        "pattern": pattern_id,
        "mode": res.mode,
        "objective": res.objective,
        "value": res.value,
        "exact": res.exact,
        "nodes": res.nodes,
        "family": [_mask_json(m) for m in res.family.members],
        "csv_header": ["n", "value", "nodes", "time"],
        "csv_rows": [[res.n, res.value, res.nodes, wall]],
    }
    if cfg.with_timings:
        results["wall_time"] = res.wall_time
    return results, certs, EXIT_OK if res.exact else EXIT_BUDGET


def _handle_middle_layers(cfg: RunConfig):
    pattern = load_pattern(cfg.params["pattern"])
    value = middle_layers_number(pattern, cfg.params["n"])
    return (
        {"n": cfg.params["n"], "pattern": cfg.params["pattern"], "middle_layers": value},
        [],
        EXIT_OK,
    )


def _handle_verify_lemma(cfg: RunConfig):
    lemma = cfg.params["lemma"]
    if lemma == "tail":
        rep = verify_tail_bound(
            cfg.params["m"], cfg.params["k"], cfg.params["n"],
            Fraction(cfg.params["t"]), cfg.params.get("trials") or 100_000,
            cfg.seed or 0,
        )
        results = {
            "lemma": "tail",
            "params": dict(rep.params),
            "trials": rep.trials,
            "seed": rep.seed,
            "empirical": rep.empirical,
            "bound": rep.bound,
            "margin": rep.margin,
            "verdict": rep.verdict,
        }
        return results, [], EXIT_OK
    if lemma == "trace":
        tset_path = cfg.params.get("tset")
        if tset_path:
            tfam = read_family(tset_path)
            tset = set(tfam.members)
        else:
            tset = set()
        rep = verify_trace_probability(
            cfg.params["n"], cfg.params["m"], cfg.params["r"],
            Fraction(cfg.params["eps"]), tset,
            cfg.params.get("trials") or 100_000, cfg.seed or 0,
        )
        results = {
            "lemma": "trace",
            "params": dict(rep.params),
            "trials": rep.trials,
            "seed": rep.seed,
            "empirical": rep.empirical,
            "bound": rep.bound,
            "margin": rep.margin,
            "verdict": rep.verdict,
        }
        return results, [], EXIT_OK
    if lemma == "flexbound":
        from .pivots import verify_flexibility_bound

        fam = read_family(cfg.params["family"])
        rep = verify_flexibility_bound(
            fam, Fraction(cfg.params["gamma"]), cfg.params["r"]
        )
        results = {
            "lemma": "flexbound",
            "params": {"gamma": Fraction(cfg.params["gamma"]), "r": cfg.params["r"]},
            "hypothesis_ok": rep.hypothesis_ok,
            "detail": rep.detail,
            "empirical": rep.mass,
            "bound": rep.bound,
            "verdict": "pass" if rep.satisfied else (
                "hypothesis-failed" if not rep.hypothesis_ok else "fail"
            ),
        }
        return results, [], EXIT_OK
    if lemma == "fatbound":
        from .pivots import verify_fat_mass_bound

        fam = read_family(cfg.params["family"])
        sset = set(read_family(cfg.params["sset"]).members)
        rep = verify_fat_mass_bound(fam, sset, Fraction(cfg.params["eps"]))
        results = {
            "lemma": "fatbound",
            "params": {"eps": Fraction(cfg.params["eps"])},
            "hypothesis_ok": rep.hypothesis_ok,
            "detail": rep.detail,
            "empirical": rep.mass,
            "bound": rep.bound,
            "verdict": "pass" if rep.satisfied else (
                "hypothesis-failed" if not rep.hypothesis_ok else "fail"
            ),
        }
        return results, [], EXIT_OK
    raise ParseError(f"unknown lemma {lemma!r}")


def _handle_cascade(cfg: RunConfig):
    cascade = compute_cascade(cfg.params["m"], Fraction(cfg.params["eps"]))
    results = {
        "m": cascade.m,
        "mode": cascade.mode,
        "eps_levels": list(cascade.eps_j),
        "q": cascade.q,
        "p": cascade.p,
        "threshold": cascade.threshold,
    }
    return results, [], EXIT_OK


def _handle_report(cfg: RunConfig):
    with open(cfg.params["config"], "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"config is not valid JSON: {exc}") from exc
    inner = RunConfig.from_payload(
        payload["config"] if "config" in payload else payload
    )
    if inner.subcommand == "report":
        raise PreconditionError("a report config cannot nest another report")
    _check_seed_policy(inner)
    handler = _HANDLERS[inner.subcommand]
    results, certs, code = handler(inner)
    return {"replayed": inner.subcommand, "results": results}, certs, code


_HANDLERS: dict = {
    "lubell": _handle_lubell,
    "pivots": _handle_pivots,
    "embed": _handle_embed,
    "extract": _handle_extract,
    "extremal": _handle_extremal,
    "middle-layers": _handle_middle_layers,
    "verify-lemma": _handle_verify_lemma,
    "cascade": _handle_cascade,
    "report": _handle_report,
}


def _check_seed_policy(cfg: RunConfig) -> None:
    if cfg.subcommand in _RANDOMIZED or (
        cfg.subcommand == "verify-lemma"
        and cfg.params.get("lemma") in ("tail", "trace")
    ):
        if cfg.seed is None and not cfg.ephemeral:
            raise PreconditionError(
                f"{cfg.subcommand!r} is randomized: pass --seed or --ephemeral"
            )
        if cfg.seed is None:
            cfg.seed = secrets.randbits(64)
        if not 0 <= cfg.seed < 1 << 64:
            raise PreconditionError("seed must fit in 64 bits")


def run(cfg: RunConfig) -> Report:
    """Dispatch a parsed configuration and assemble the report."""
    if os.environ.get("PT_THREADS", "1") != "1":
        # Deterministic merges only: internal parallelism is capped.
        os.environ["PT_THREADS"] = "1"
    _check_seed_policy(cfg)
    if cfg.subcommand not in _HANDLERS:
        raise ParseError(f"unknown subcommand {cfg.subcommand!r}")
    t0 = time.perf_counter()
    results, certs, code = _HANDLERS[cfg.subcommand](cfg)
    elapsed = time.perf_counter() - t0
    rep = Report(cfg, results, certs, {"wall_s": round(elapsed, 6)}, code)
    return rep


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cubefam",
        description="Set families in the subset lattice: masses, pivots, "
        "embeddings, extraction, exact extremal search.",
    )
    parser.add_argument("--output", help="write the report here instead of stdout")
    parser.add_argument(
        "--format", choices=("json", "csv"), default="json", dest="fmt"
    )
    parser.add_argument("--with-timings", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_seed(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--ephemeral", action="store_true")

    p = sub.add_parser("lubell", help="exact mass of a family file")
    p.add_argument("--family", required=True)
    p.add_argument("--bottom", help="interval bottom, subset literal")
    p.add_argument("--top", help="interval top, subset literal")

    p = sub.add_parser("pivots", help="enumerate pivots of a member")
    p.add_argument("--family", required=True)
    p.add_argument("--base", required=True, help='subset literal, e.g. "1,3,4"')
    p.add_argument("-r", type=int, required=True)
    p.add_argument("--anti", action="store_true")
    p.add_argument("--gamma", help="also report flexibility at this tolerance")

    p = sub.add_parser("embed", help="find a pattern copy inside a family")
    p.add_argument("--family", required=True)
    p.add_argument("--pattern", required=True)
    p.add_argument("--mode", choices=("weak", "induced"), default="induced")
    p.add_argument("--attempts", type=int)
    add_seed(p)

    p = sub.add_parser("extract", help="run the full extraction pipeline")
    p.add_argument("--family", required=True)
    p.add_argument("--pattern", required=True)
    p.add_argument("--mode", choices=("paper", "override"), default="paper")
    p.add_argument("--q")
    p.add_argument("--p")
    p.add_argument("--eps")
    p.add_argument("--attempts", type=int)
    add_seed(p)

    p = sub.add_parser("extremal", help="exact pattern-avoiding optimum")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--pattern", required=True, help="poset file or builtin:P2|V2|D2|Q2")
    p.add_argument("--mode", choices=("weak", "induced"), default="weak")
    p.add_argument(
        "--objective", choices=("cardinality", "lubell"), default="cardinality"
    )
    p.add_argument("--budget-nodes", type=int, dest="budget_nodes")

    p = sub.add_parser("middle-layers", help="widest pattern-free middle band")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--pattern", required=True)

    p = sub.add_parser("verify-lemma", help="statistical and exact bound checks")
    p.add_argument(
        "--lemma", choices=("tail", "trace", "flexbound", "fatbound"), required=True
    )
    p.add_argument("-m", type=int)
    p.add_argument("-k", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("-r", type=int)
    p.add_argument("-t")
    p.add_argument("--eps")
    p.add_argument("--gamma")
    p.add_argument("--family")
    p.add_argument("--sset", help="family file holding the r-subset collection")
    p.add_argument("--tset", help="family file holding the trace collection")
    p.add_argument("--trials", type=int)
    add_seed(p)

    p = sub.add_parser("cascade", help="exact constants for a pattern size")
    p.add_argument("-m", type=int, required=True)
    p.add_argument("--eps", required=True)

    p = sub.add_parser("report", help="replay a saved run configuration")
    p.add_argument("--config", required=True)

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    skip = {"subcommand", "seed", "ephemeral", "with_timings", "output", "fmt"}
    params = {k: v for k, v in vars(args).items() if k not in skip and v is not None}
    return RunConfig(
        subcommand=args.subcommand,
        params=params,
        seed=getattr(args, "seed", None),
        ephemeral=getattr(args, "ephemeral", False),
        with_timings=args.with_timings,
        output=args.output,
        fmt=args.fmt,
    )


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = _config_from_args(args)
    try:
        rep = run(cfg)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except PreconditionError as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except SearchBudgetExceeded as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except CertificationError as exc:
        print(f"certification failure: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATION
    data = emit_report(rep)
    if cfg.output:
        with open(cfg.output, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.write(data.decode("utf-8"))
    return rep.exit_code


if __name__ == "__main__":
    sys.exit(main())
