"""Command line entry point.

    ymsurf --config run.json --command mm-check --out results/ [--seed S] [--chains C]

Writes ``results.csv`` and ``manifest.json`` into ``--out``.  Exit status is
0 when every check passes, 1 on a statistical failure, 2 for an unreadable
config and 3 for a config that parses but is not valid.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import EXIT_SEMANTIC, EXIT_STATISTICAL, ConfigError, RunConfig, parse_config
from .heatkernel import hk_density
from .mmcheck import MC_SIGMA, LoopFunctional, local_mm_check, mm_check, wilson_loop
from .surfgraph import GraphError, as_word, split_loop
from .unitary import haar_sample
from .ymmeasure import partition_function

COMMANDS = ("validate", "partition", "wilson", "mm-check", "local-mm-check", "selftest")
COLUMNS = ("quantity", "method", "mean_re", "mean_im", "stderr", "n_eff", "sigma_discrepancy", "pass")


def _row(quantity, method, est=None, mean=None, sigma=None, passed=None):
    if est is not None:
        mean, se, n_eff = est.mean, est.stderr, est.n_eff
    else:
        se, n_eff = 0.0, math.inf
    return {"quantity": quantity, "method": method, "mean": complex(mean), "stderr": se,
            "n_eff": n_eff, "sigma_discrepancy": sigma, "pass": passed}


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return repr(float(x))


def render_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([r["quantity"], r["method"], _fmt(r["mean"].real), _fmt(r["mean"].imag),
                    _fmt(r["stderr"]), _fmt(r["n_eff"]), _fmt(r["sigma_discrepancy"]), _fmt(r["pass"])])
    return buf.getvalue()


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- commands -------------------------------------------------------------------

def cmd_validate(cfg: RunConfig):
    m = cfg.measure()
    rows = [_row("euler_characteristic", "structural", mean=m.graph.euler_characteristic, passed=True)]
    for name, l in cfg.loops.items():
        for cname, c in cfg.crossings.items():
            try:
                split_loop(m.graph, l, c)
                rows.append(_row(f"split[{name}@{cname}]", "structural", mean=0, passed=True))
            except GraphError:
                pass
    return rows


def cmd_partition(cfg: RunConfig):
    m = cfg.measure()
    opts = cfg.options
    method = opts.get("partition_method", "abelian_exact" if m.N == 1 and not m.constraints else "mc")
    rng = np.random.default_rng(np.random.SeedSequence(cfg.chain.seed))
    est = partition_function(m, method, opts.get("samples", 100_000), rng)
    rows = []
    g = m.graph
    if g.euler_characteristic == 2 and not g.boundary_components:
        ref = float(hk_density(g.total_area, np.eye(m.N), m.hk))
        diff = abs(est.mean - ref)
        if est.stderr > 0:
            sig = diff / est.stderr
            ok = sig <= MC_SIGMA
        else:
            sig, ok = diff, diff <= 1e-10
        rows.append(_row("Z", method, est, sigma=sig, passed=ok))
        rows.append(_row("Z_sphere_formula", "sphere_exact", mean=ref, passed=True))
    else:
        rows.append(_row("Z", method, est, passed=None))
    return rows


def cmd_wilson(cfg: RunConfig):
    m = cfg.measure()
    method = cfg.options.get("wilson_method", "abelian_exact" if m.N == 1 else "mc")
    return [_row(f"wilson[{name}]", method, wilson_loop(m, l, method, cfg.chain))
            for name, l in cfg.loops.items()]


def _checks(cfg: RunConfig):
    if "checks" in cfg.options:
        return [(c["loop"], c["crossing"]) for c in cfg.options["checks"]]
    out = []
    for ln, l in cfg.loops.items():
        for cn, c in cfg.crossings.items():
            try:
                split_loop(cfg.graph, l, c)
                out.append((ln, cn))
            except GraphError:
                pass
    if not out:
        raise ConfigError(["options.checks: no loop crosses itself at a listed crossing"])
    return out


def cmd_mm_check(cfg: RunConfig):
    m = cfg.measure()
    exact = m.N == 1 and "lhs_method" not in cfg.options
    methods = ("abelian_analytic", "abelian_exact") if exact else \
        (cfg.options.get("lhs_method", "score"), cfg.options.get("rhs_method", "mc"))
    rows = []
    for ln, cn in _checks(cfg):
        l, c = cfg.loops[ln], cfg.crossings[cn]
        try:
            split_loop(m.graph, l, c)
        except GraphError as exc:
            raise ConfigError([f"options.checks: {ln}@{cn}: {exc}"]) from None
        r = mm_check(m, l, c, methods, cfg.chain, cfg.options.get("fd_step"), cn, ln)
        tag = f"{ln}@{cn}"
        rows.append(_row(f"mm_lhs[{tag}]", r.lhs_method, r.lhs))
        rows.append(_row(f"mm_rhs[{tag}]", r.rhs_method, r.rhs))
        if exact:
            rows.append(_row(f"mm_check[{tag}]", "abelian_exact", mean=r.lhs.mean - r.rhs.mean,
                             sigma=r.abs_diff, passed=r.passed))
        else:
            rows.append({"quantity": f"mm_check[{tag}]", "method": f"{r.lhs_method}-{r.rhs_method}",
                         "mean": r.lhs.mean - r.rhs.mean, "stderr": r.diff_stderr,
                         "n_eff": min(r.lhs.n_eff, r.rhs.n_eff), "sigma_discrepancy": r.discrepancy_sigma,
                         "pass": r.passed})
            other = r.extra["lhs_fd" if r.lhs_method == "score" else "lhs_score"]
            rows.append(_row(f"mm_lhs[{tag}]", other.method, other, sigma=r.extra["estimator_sigma"],
                             passed=r.extra["estimator_sigma"] <= MC_SIGMA))
    return rows


def cmd_local(cfg: RunConfig):
    loc = dict(cfg.options.get("local", {}))
    N = cfg.group.N
    t = [float(x) for x in loc.get("t", [1.0, 1.0, 1.0, 1.0])]
    if len(t) != 4 or min(t) <= 0:
        raise ConfigError(["options.local.t: need four positive areas"])
    kind = loc.get("alpha", "identity")
    if kind == "identity":
        alpha = [np.eye(N, dtype=complex)] * 4
    elif kind == "random":
        alpha = list(haar_sample(N, np.random.default_rng(np.random.SeedSequence(cfg.chain.seed)), 4))
    else:
        raise ConfigError([f"options.local.alpha: expected 'identity' or 'random', got {kind!r}"])
    words = loc.get("functional", [["-a3", "a2", "-a4", "a1"]])
    try:
        f = LoopFunctional(tuple(as_word(w) for w in words))
    except (GraphError, ValueError, TypeError) as exc:
        raise ConfigError([f"options.local.functional: {exc}"]) from None
    bad = f.variables - {"a1", "a2", "a3", "a4"}
    if bad:
        raise ConfigError([f"options.local.functional: unknown variables {sorted(bad)}"])
    try:
        r = local_mm_check(alpha, t, f, cfg.chain)
    except ValueError as exc:
        raise ConfigError([f"options.local.functional: {exc}"]) from None
    return [
        _row("local_lhs", "score", r.lhs),
        _row("local_rhs", "mc", r.rhs),
        {"quantity": "local_mm_check", "method": "score-mc", "mean": r.lhs.mean - r.rhs.mean,
         "stderr": r.diff_stderr, "n_eff": min(r.lhs.n_eff, r.rhs.n_eff),
         "sigma_discrepancy": r.discrepancy_sigma, "pass": r.passed},
    ]


def cmd_selftest(cfg: RunConfig | None):
    from .selftest import run_selftest

    return run_selftest(cfg.chain.seed if cfg is not None else 0)


def run(command: str, cfg: RunConfig | None):
    """Execute ``command``; returns ``(rows, exit_code)``."""
    if command == "selftest":
        rows = cmd_selftest(cfg)
    else:
        if cfg is None:
            raise ConfigError([f"--config is required for {command}"])
        handler = {"validate": cmd_validate, "partition": cmd_partition, "wilson": cmd_wilson,
                   "mm-check": cmd_mm_check, "local-mm-check": cmd_local}[command]
        try:
            rows = handler(cfg)
        except GraphError as exc:
            raise ConfigError([str(exc)]) from None
    ok = all(r["pass"] is not False for r in rows)
    return rows, 0 if ok else EXIT_STATISTICAL


def _versions():
    import numba

    return {"ymsurf": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "numba": numba.__version__}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ymsurf", description="Yang-Mills measure checks on surface graphs")
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--command", required=True, choices=COMMANDS)
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--seed", type=int, help="overrides chain.seed")
    p.add_argument("--chains", type=int, help="overrides chain.chains")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    cfg = None
    text = ""
    try:
        if args.config is not None:
            text = args.config.read_text(encoding="utf-8")
            cfg = parse_config(text)
            kw = {}
            if args.seed is not None:
                kw["seed"] = args.seed
            if args.chains is not None:
                kw["chains"] = args.chains
            if kw:
                try:
                    cfg = cfg.with_chain(**kw)
                except ValueError as exc:
                    raise ConfigError([f"command line: {exc}"]) from None
        rows, code = run(args.command, cfg)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SEMANTIC
    args.out.mkdir(parents=True, exist_ok=True)
    table = render_csv(rows)
    manifest = {
        "command": args.command,
        "seed": cfg.chain.seed if cfg is not None else 0,
        "chains": cfg.chain.chains if cfg is not None else None,
        "config_sha256": hashlib.sha256(text.encode()).hexdigest() if text else None,
        "versions": _versions(),
        "wall_time_s": time.perf_counter() - start,
        "exit_code": code,
        "rows": len(rows),
    }
    _atomic_write(args.out / "results.csv", table)
    _atomic_write(args.out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    sys.stdout.write(table)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
