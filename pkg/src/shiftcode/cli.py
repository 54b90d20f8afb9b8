"""Command-line front end: ``shiftcode {capacity,fer,power,rllcap,verify,replay}``."""
from __future__ import annotations

import argparse
import os
import sys
from datetime import datetime, timezone

from . import __version__, _kernels
from .capacity import SolverOptions, capacity_sweep
from .codes import CodeId, all_codes, get_code
from .fer import AwgnParams, SimConfig, default_scheme, fer_sweep, parse_scheme
from .io import fixed, parse_grid, parse_int_set, read_manifest, write_manifest, write_table
from .metrics import power_report, rll_capacity, rll_capacity_limit_powers_of_3

SEED_ENV = "SHIFTCODE_SEED"
LONG_RUN_MAX_FRAMES = 100_000_000


def _default_seed() -> int:
    return int(os.environ.get(SEED_ENV, "0"))


def _codes(text: str) -> list[CodeId]:
    if text == "all":
        return [s.id for s in all_codes()]
    return [get_code(c.strip()).id for c in text.split(",")]


# ---------------------------------------------------------------------------
# subcommands: each returns (header, rows, params) and never prints


def cmd_capacity(a):
    L_list = [int(v) for v in a.L.split(",")]
    eps = parse_grid(a.eps)
    schemes = [s.strip() for s in a.scheme.split(",")]
    opts = SolverOptions(tolerance=a.tolerance, max_restarts=a.max_restarts, seed=a.seed, method=a.method)
    results = capacity_sweep(L_list, eps, schemes, a.threshold_prob, opts, workers=a.workers)
    width = max(L_list)
    header = ["scheme", "L", "T", "epsilon", "capacity", "iterations", "converged", "strict_max",
              "restarts", "gradient_norm", "output_size"] + [f"f{i}" for i in range(1, width + 1)]
    rows = []
    for r in results:
        dist = [fixed(v, 12) for v in r.optimizer] + [""] * (width - r.L)
        rows.append([r.scheme, r.L, format(r.threshold_probability, ".0e"), fixed(r.epsilon, 6),
                     fixed(r.capacity, 12), r.iterations, int(r.converged), int(r.strict_max_verified),
                     r.restarts, format(r.gradient_norm, ".3e"), r.output_size] + dist)
    params = dict(L=a.L, eps=a.eps, scheme=a.scheme, threshold_prob=a.threshold_prob,
                  tolerance=a.tolerance, max_restarts=a.max_restarts, method=a.method)
    return header, rows, params


def cmd_fer(a):
    codes = _codes(a.code)
    eps = parse_grid(a.eps)
    schemes = None if a.scheme is None else [parse_scheme(a.scheme)]
    snr = None if a.snr_db is None else parse_grid(a.snr_db)
    max_frames = LONG_RUN_MAX_FRAMES if a.long_run else a.max_frames
    base = SimConfig(codes[0], eps[0], k=a.k, max_frames=max_frames, target_errors=a.target_errors,
                     master_seed=a.seed, awgn=None if snr is None else AwgnParams(snr[0], a.a0, a.a1),
                     block_size=a.block_size)
    results = fer_sweep(codes, eps, schemes, base, snr, workers=a.workers)
    header = ["code", "scheme", "epsilon", "snr_db", "k", "frames", "errors", "fer", "ci_lo", "ci_hi",
              "seed", "stopped_by", "prediction"]
    rows = []
    for r in results:
        c = r.config
        rows.append([c.code.value, c.scheme.label, fixed(c.epsilon, 6),
                     "" if c.awgn is None else fixed(c.awgn.snr_db, 3), c.k, r.frames_sent, r.frame_errors,
                     fixed(r.fer, 12), fixed(r.ci_low, 12), fixed(r.ci_high, 12), c.master_seed,
                     r.stopped_by, fixed(r.prediction, 12)])
    params = dict(code=a.code, eps=a.eps, scheme=a.scheme, k=a.k, max_frames=max_frames,
                  target_errors=a.target_errors, snr_db=a.snr_db, a0=a.a0, a1=a.a1, block_size=a.block_size)
    return header, rows, params


def cmd_power(a):
    header = ["code", "average", "min_sustainable", "local_min", "average_dec", "min_sustainable_dec",
              "local_min_dec", "window_bound"]
    rows = []
    for cid in _codes(a.code):
        r = power_report(cid, a.window_bound)
        rows.append([cid.value, str(r.average), str(r.min_sustainable), str(r.local_min),
                     fixed(r.average, 9), fixed(r.min_sustainable, 9), fixed(r.local_min, 9), r.window_bound])
    return header, rows, dict(code=a.code, window_bound=a.window_bound)


def cmd_rllcap(a):
    if a.powers_of_3 is not None:
        caps = rll_capacity_limit_powers_of_3(a.powers_of_3)
        rows = [[",".join(str(3 ** i) for i in range(L + 1))] * 2 + [fixed(c, 9)] for L, c in enumerate(caps)]
    else:
        if a.zeros is None or a.ones is None:
            raise ValueError("give --zeros and --ones, or --powers-of-3")
        z, o = parse_int_set(a.zeros), parse_int_set(a.ones)
        rows = [[",".join(map(str, z)), ",".join(map(str, o)), fixed(rll_capacity(z, o), 9)]]
    return ["zeros", "ones", "capacity"], rows, dict(zeros=a.zeros, ones=a.ones, powers_of_3=a.powers_of_3)


def cmd_verify(a):
    from .verify import run_checks

    results = run_checks()
    rows = [[name, "PASS" if ok else "FAIL", detail, fixed(t, 3)] for name, ok, detail, t in results]
    return ["check", "status", "detail", "seconds"], rows, {}


COMMANDS = {"capacity": cmd_capacity, "fer": cmd_fer, "power": cmd_power, "rllcap": cmd_rllcap,
            "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shiftcode", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--out", help="CSV output path (a manifest is written next to it); default stdout")
        if seed:
            sp.add_argument("--seed", type=int, default=_default_seed(),
                            help=f"master seed (default ${SEED_ENV} or 0)")
            sp.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")

    sp = sub.add_parser("capacity", help="capacity sweep of the truncated channel")
    sp.add_argument("--scheme", default="rounding", help="rounding | rounding:G | optimal-thresholds (comma list)")
    sp.add_argument("--L", required=True, help="input alphabet size(s), comma list")
    sp.add_argument("--eps", required=True, help="epsilon grid: start:stop:step or comma list")
    sp.add_argument("--threshold-prob", type=float, default=1e-8)
    sp.add_argument("--tolerance", type=float, default=1e-9)
    sp.add_argument("--max-restarts", type=int, default=10)
    sp.add_argument("--method", choices=["newton", "gradient"], default="newton")
    common(sp)

    sp = sub.add_parser("fer", help="Monte Carlo frame error rates")
    sp.add_argument("--code", required=True, help="code id, comma list, or 'all': " + ", ".join(c.value for c in CodeId))
    sp.add_argument("--eps", required=True, help="epsilon grid")
    sp.add_argument("--scheme", help="rounding | rounding:G | q:1,3 | q:[1-3] (default: per code)")
    sp.add_argument("--k", type=int, default=40)
    sp.add_argument("--max-frames", type=int, default=1_000_000)
    sp.add_argument("--long-run", action="store_true", help=f"use max_frames = {LONG_RUN_MAX_FRAMES}")
    sp.add_argument("--target-errors", type=int, default=200)
    sp.add_argument("--snr-db", help="optional SNR grid (dB) for the bit-level noise overlay")
    sp.add_argument("--a0", type=float, default=0.0)
    sp.add_argument("--a1", type=float, default=1.0)
    sp.add_argument("--block-size", type=int, default=2048)
    common(sp)

    sp = sub.add_parser("power", help="exact power figures of merit")
    sp.add_argument("--code", default="all")
    sp.add_argument("--window-bound", type=int, default=None)
    common(sp, seed=False)

    sp = sub.add_parser("rllcap", help="capacity of a runlength constraint")
    sp.add_argument("--zeros", help="admissible zero runlengths, e.g. 1,3")
    sp.add_argument("--ones", help="admissible one runlengths")
    sp.add_argument("--powers-of-3", type=int, metavar="LMAX", help="tabulate RLL({3^i},{3^i}) for L=0..LMAX")
    common(sp, seed=False)

    sp = sub.add_parser("verify", help="run the built-in invariant checks")
    common(sp, seed=False)

    sp = sub.add_parser("replay", help="rerun the experiment recorded in a manifest")
    sp.add_argument("manifest")
    sp.add_argument("--out", help="where to write the regenerated table (default: stdout)")
    return p


def _replay_args(manifest: dict, out: str | None) -> argparse.Namespace:
    cmd = manifest["subcommand"]
    argv = [cmd]
    for key, val in manifest["params"].items():
        if val is None:
            continue
        flag = "--" + key.replace("_", "-")
        if key == "L":
            flag = "--L"
        if key == "max_frames":
            argv += ["--max-frames", str(val)]
            continue
        argv += [flag, str(val)]
    if cmd in ("capacity", "fer"):
        argv += ["--seed", str(manifest["master_seed"])]
    if out:
        argv += ["--out", out]
    return build_parser().parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay":
        args = _replay_args(read_manifest(args.manifest), args.out)
    started = datetime.now(timezone.utc)
    try:
        header, rows, params = COMMANDS[args.command](args)
    except ValueError as exc:
        parser.error(str(exc))
    text = write_table(args.out, header, rows)
    if args.out:
        seed = getattr(args, "seed", None)
        write_manifest(args.out, args.command, params, seed, __version__, started, _kernels.BACKEND)
    else:
        sys.stdout.write(text)
    if args.command == "verify" and any(r[1] == "FAIL" for r in rows):
        if args.out:
            sys.stderr.write(text)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
