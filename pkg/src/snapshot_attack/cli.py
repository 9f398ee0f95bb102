"""Command-line front end. Every command prints one JSON object on stdout and
writes ``manifest.json`` (resolved configuration) into ``--outdir``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import cipher, dom_sim, driver, llsi_image, snapshot
from .schedule import FIRST_FULL_CYCLE, load_schedule, read_schedule_csv
from .sat import cnf, encode, solvers


class UsageError(Exception):
    pass


def _hex16(text: str) -> bytes:
    try:
        b = bytes.fromhex(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not hex: {text!r}") from exc
    if len(b) != 16:
        raise argparse.ArgumentTypeError("expected 16 bytes (32 hex digits)")
    return b


def _span(text: str) -> tuple[int, int]:
    """``a:b`` inclusive, or a single number."""
    try:
        if ":" in text:
            a, b = text.split(":")
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a or a:b, got {text!r}") from exc
    if hi < lo:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return lo, hi


def _pair(text: str) -> tuple[int, int]:
    try:
        a, b = text.split(",")
        return int(a), int(b)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected dx,dy got {text!r}") from exc


# -- shared option groups -------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of option defaults (flags win)")
    p.add_argument("--outdir", default=".", help="directory for outputs and manifest.json")
    p.add_argument("--seed", type=int, default=0)


def _add_trace(p: argparse.ArgumentParser) -> None:
    p.add_argument("--d", type=int, default=1, help="masking order")
    p.add_argument("--key", type=_hex16, help="cipher key (default: drawn from --seed)")
    p.add_argument("--pt", type=_hex16, help="plaintext (default: drawn from --seed)")
    p.add_argument("--cycles", type=_span, default=(1, 36), help="cycle range a:b")
    p.add_argument("--reduced", action="store_true", help="one-column schedule subset")
    p.add_argument("--schedule", help="schedule CSV replacing the built-in table")
    p.add_argument("--fsm-bits", type=int, help="control-logic distractor bits")
    p.add_argument("--reshare", choices=["fresh", "stable"], default="fresh")


def _add_solver(p: argparse.ArgumentParser) -> None:
    p.add_argument("--budget", type=float, default=600.0, help="solver time limit per call, s")
    p.add_argument("--backend", choices=solvers.BACKENDS, help="default: cryptominisat, "
                   f"or external when ${solvers.SOLVER_ENV} is set")
    p.add_argument("--solver", help="external solver command (DIMACS in, competition output)")
    p.add_argument("--onehot", choices=encode.ONEHOT_MODES, default="sequential")
    p.add_argument("--unknown-plaintext", action="store_true",
                   help="treat the plaintext as unknown in the encoding")
    p.add_argument("--timing", action="store_true", help="report wall-clock times")
    p.add_argument("--no-zero-links", dest="zero_links", action="store_false",
                   help="omit the implied clauses tying unset observation bits to zero cells")
    p.add_argument("--share-order", action="store_true",
                   help="keep one representative per share permutation")
    p.add_argument("--parity-links", action="store_true",
                   help="also state each observation link as a parity over its coefficients")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snapshot-attack", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("simulate", help="masked register trace as CSV")
    _add_common(p), _add_trace(p)
    p.add_argument("--out", default="trace.csv")
    p.add_argument("--fsm-out", default="fsm.csv")

    p = sub.add_parser("snapshot", help="placed (and optionally corrupted) snapshots")
    _add_common(p), _add_trace(p)
    p.add_argument("--flip-prob", type=float, default=0.0)
    p.add_argument("--out", default="snapshots.csv")
    p.add_argument("--placement-out", default="placement.csv")

    p = sub.add_parser("imggen", help="render a bit vector as a 16-bit PGM")
    _add_common(p)
    p.add_argument("--snapshots", help="snapshots CSV to image (default: random bits)")
    p.add_argument("--cycle", type=int, default=FIRST_FULL_CYCLE)
    p.add_argument("--n-bits", type=int, default=720)
    p.add_argument("--cols", type=int, default=30)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--drift", type=_pair, default=(0, 0))
    p.add_argument("--flip", action="store_true", help="mirror every second column")
    p.add_argument("--out", default="snapshot.pgm")
    p.add_argument("--reference-out", default="reference.pgm")
    p.add_argument("--reference-bits-out", default="reference_bits.csv")
    p.add_argument("--bits-out", default="bits.csv")

    p = sub.add_parser("imgextract", help="read bits back from a PGM")
    _add_common(p)
    p.add_argument("--image", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--reference-bits", required=True)
    p.add_argument("--flip", action="store_true")
    p.add_argument("--out", default="extraction.csv")

    p = sub.add_parser("attack1", help="direct key read-out at known key-register positions")
    _add_common(p)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--unlabeled", action="store_true", help="template labels unknown")
    p.add_argument("--image", action="store_true", help="go through the imaging pipeline")
    p.add_argument("--noise", type=float, default=0.05)

    p = sub.add_parser("attack2", help="placement-blind key recovery with a SAT solver")
    _add_common(p)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--cycles", type=_span, default=(16, 27))
    p.add_argument("--reduced", action="store_true")
    p.add_argument("--fsm-bits", type=int)
    _add_solver(p)

    p = sub.add_parser("encode", help="write the attack instance as extended DIMACS")
    _add_common(p)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--cycles", type=_span, default=(16, 27))
    p.add_argument("--reduced", action="store_true")
    p.add_argument("--fsm-bits", type=int)
    p.add_argument("--onehot", choices=encode.ONEHOT_MODES, default="sequential")
    p.add_argument("--unknown-plaintext", action="store_true")
    p.add_argument("--pure-cnf", action="store_true", help="cut XORs into plain clauses")
    p.add_argument("--zero-links", action="store_true", help="add the implied zero-link clauses")
    p.add_argument("--share-order", action="store_true")
    p.add_argument("--parity-links", action="store_true")
    p.add_argument("--out", default="instance.cnf")

    p = sub.add_parser("bench", help="outcome/time table over masking order and window")
    _add_common(p)
    p.add_argument("--d", type=_span, default=(0, 2), dest="d_range")
    p.add_argument("--windows", type=_span, default=(16, 21), help="covered-cycle counts a:b")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--full", action="store_true", help="full 32-row schedule")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="bench.csv")
    p.add_argument("--summary", default="bench_summary.json")
    _add_solver(p)

    p = sub.add_parser("verify", help="check a key against a plaintext/ciphertext pair")
    _add_common(p)
    p.add_argument("--key", type=_hex16, required=True)
    p.add_argument("--pt", type=_hex16, required=True)
    p.add_argument("--ct", type=_hex16, required=True)
    return parser


# -- helpers ------------------------------------------------------------------------


def _table(args):
    if getattr(args, "schedule", None):
        return read_schedule_csv(args.schedule)
    if getattr(args, "reduced", False):
        return driver.ReducedScheduleSpec().table()
    return load_schedule()


def _trace_cfg(args, table) -> dom_sim.TraceConfig:
    rng = np.random.default_rng(args.seed)
    key = args.key or bytes(rng.integers(0, 256, 16, dtype=np.uint8))
    pt = args.pt or bytes(rng.integers(0, 256, 16, dtype=np.uint8))
    fsm = args.fsm_bits
    if fsm is None:
        fsm = driver.REDUCED_FSM_BITS if table.n_rows < 32 else driver.FULL_FSM_BITS
    mode = dom_sim.ReshareMode(args.reshare)
    return dom_sim.TraceConfig(key, pt, d=args.d, fsm_bits=fsm, seed=args.seed, reshare_mode=mode)


def _outpath(args, name: str) -> Path:
    p = Path(name)
    p = p if p.is_absolute() else Path(args.outdir) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _jsonable(v):
    if isinstance(v, bytes):
        return v.hex()
    if isinstance(v, tuple):
        return list(v)
    return v


def _write_manifest(args) -> None:
    resolved = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k != "config"}
    Path(args.outdir).mkdir(parents=True, exist_ok=True)
    (Path(args.outdir) / "manifest.json").write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n")


def _reduced_spec(args):
    return driver.ReducedScheduleSpec() if args.reduced else None


def _planted(args):
    first, last = args.cycles
    if first < FIRST_FULL_CYCLE:
        raise UsageError(f"attack windows start at cycle {FIRST_FULL_CYCLE} or later")
    return driver.plant(args.d, first, last, args.seed, _reduced_spec(args), args.fsm_bits)


# -- commands -------------------------------------------------------------------------


def cmd_simulate(args) -> dict:
    table = _table(args)
    cfg = _trace_cfg(args, table)
    rfs = dom_sim.simulate(cfg, *args.cycles, schedule=table)
    out, fsm_out = _outpath(args, args.out), _outpath(args, args.fsm_out)
    dom_sim.write_trace_csv(rfs, out, fsm_out, row_ids=table.row_ids)
    return {"trace": str(out), "fsm": str(fsm_out), "cycles": list(args.cycles),
            "rows": table.n_rows, "key": cfg.key.hex(), "pt": cfg.plaintext.hex(),
            "ct": cipher.encrypt_block(cfg.key, cfg.plaintext).hex()}


def cmd_snapshot(args) -> dict:
    table = _table(args)
    cfg = _trace_cfg(args, table)
    rfs = dom_sim.simulate(cfg, *args.cycles, schedule=table)
    rng = np.random.default_rng([args.seed, 1])
    pm = snapshot.random_placement(cfg.n_bits(table.n_rows), rng)
    obs = snapshot.observe(rfs, pm)
    if args.flip_prob:
        obs = [snapshot.corrupt(o, args.flip_prob, rng) for o in obs]
    out, pout = _outpath(args, args.out), _outpath(args, args.placement_out)
    snapshot.write_snapshots_csv(obs, out)
    snapshot.write_placement_csv(pm, pout)
    return {"snapshots": str(out), "placement": str(pout), "n": pm.n, "cycles": list(args.cycles)}


def _write_bits_csv(bits: np.ndarray, path: Path) -> None:
    rows = ["row,col,bit"] + [f"{r},{c},{int(bits[r, c])}" for r in range(bits.shape[0])
                              for c in range(bits.shape[1])]
    path.write_text("\n".join(rows) + "\n")


def _read_bits_csv(path: str) -> np.ndarray:
    entries = [line.split(",") for line in Path(path).read_text().splitlines()[1:] if line]
    rows = 1 + max(int(r) for r, _, _ in entries)
    cols = 1 + max(int(c) for _, c, _ in entries)
    grid = np.zeros((rows, cols), np.uint8)
    for r, c, b in entries:
        grid[int(r), int(c)] = int(b)
    return grid


def cmd_imggen(args) -> dict:
    rng = np.random.default_rng(args.seed)
    if args.snapshots:
        obs = {o.cycle: o for o in snapshot.read_snapshots_csv(args.snapshots)}
        if args.cycle not in obs:
            raise UsageError(f"cycle {args.cycle} not in {args.snapshots}")
        vec = obs[args.cycle].bits
    else:
        vec = rng.integers(0, 2, args.n_bits)
    grid = llsi_image.bits_to_grid(vec, args.cols)
    cfg = llsi_image.ImagingConfig(noise_sigma=args.noise, drift=args.drift, alternate_flip=args.flip)
    snap = llsi_image.render_snapshot(grid, cfg, rng)
    ref_bits = llsi_image.bits_to_grid(rng.integers(0, 2, grid.size), args.cols)
    ref = llsi_image.render_snapshot(ref_bits, replace(cfg, drift=(0, 0)), rng)
    paths = {k: _outpath(args, getattr(args, k)) for k in
             ("out", "reference_out", "reference_bits_out", "bits_out")}
    llsi_image.write_pgm(snap.pixels, paths["out"])
    llsi_image.write_pgm(ref.pixels, paths["reference_out"])
    _write_bits_csv(ref_bits, paths["reference_bits_out"])
    _write_bits_csv(grid, paths["bits_out"])
    return {"image": str(paths["out"]), "reference": str(paths["reference_out"]),
            "grid": list(grid.shape), "bits": str(paths["bits_out"])}


def cmd_imgextract(args) -> dict:
    ref_bits = _read_bits_csv(args.reference_bits)
    cfg = llsi_image.ImagingConfig(alternate_flip=args.flip)
    ref = llsi_image.SnapshotImage(llsi_image.read_pgm(args.reference), ref_bits.shape)
    img = llsi_image.SnapshotImage(llsi_image.read_pgm(args.image), ref_bits.shape)
    templates = llsi_image.templates_from_reference(ref, ref_bits, cfg)
    ex = llsi_image.extract_bits(img, templates, cfg, ref)
    out = _outpath(args, args.out)
    llsi_image.write_extraction_csv(ex, out)
    return {"report": str(out), "shift": list(ex.shift), "ties": sum(d.tie for d in ex.decisions),
            "bits": "".join(str(int(b)) for b in ex.bits.reshape(-1))}


def cmd_attack1(args) -> dict:
    c = FIRST_FULL_CYCLE
    planted = driver.plant(args.d, c, c, args.seed)
    obs = planted.observations[0]
    if args.image:
        rng = np.random.default_rng([args.seed, 2])
        cols = 30
        cfg = llsi_image.ImagingConfig(noise_sigma=args.noise, alternate_flip=True,
                                       drift=tuple(int(x) for x in rng.integers(-5, 6, 2)))
        grid = llsi_image.bits_to_grid(obs.bits, cols)
        ref_bits = llsi_image.bits_to_grid(rng.integers(0, 2, grid.size), cols)
        ref = llsi_image.render_snapshot(ref_bits, replace(cfg, drift=(0, 0)), rng)
        templates = llsi_image.templates_from_reference(ref, ref_bits, cfg)
        ex = llsi_image.extract_bits(llsi_image.render_snapshot(grid, cfg, rng), templates, cfg, ref)
        obs = snapshot.ObservationVector(obs.cycle, ex.bits.reshape(-1)[: obs.n].astype(np.uint8))
    loc = driver.key_locations(planted.placement, args.d, planted.table)
    res = driver.scenario1_direct(obs, loc, args.d, args.unlabeled, planted.plaintext, planted.ciphertext)
    return {"candidates": [k.hex() for k in res.candidates], "verified": res.verified,
            "bits_read": res.bits_read, "true_key": planted.key.hex(),
            "recovered": planted.key in res.candidates}


def cmd_attack2(args) -> dict:
    planted = _planted(args)
    res = driver.scenario2_sat(
        planted.observations, args.cycles[0], args.d,
        None if args.unknown_plaintext else planted.plaintext, planted.table,
        budget_s=args.budget, backend=args.backend, solver_path=args.solver,
        onehot=args.onehot, known_plaintext=not args.unknown_plaintext,
        zero_links=args.zero_links, share_order=args.share_order,
        parity_links=args.parity_links,
    )
    out = res.as_dict()
    if not args.timing:
        out["stats"] = {k: v for k, v in out["stats"].items() if not k.endswith("_ms")}
    out["n"] = planted.n
    out["verified"] = (res.key is not None and
                       driver.verify_key(res.key, planted.plaintext, planted.ciphertext))
    out["true_key"] = planted.key.hex()
    return out


def cmd_encode(args) -> dict:
    planted = _planted(args)
    inst = encode.AttackInstance(tuple(planted.observations), args.cycles[0], args.d,
                                 planted.plaintext)
    p, dm = encode.encode_instance(inst, planted.table, onehot=args.onehot,
                                   known_plaintext=not args.unknown_plaintext,
                                   share_order=args.share_order, zero_links=args.zero_links,
                                   parity_links=args.parity_links)
    if args.pure_cnf:
        p = p.to_pure_cnf()
    out = _outpath(args, args.out)
    cnf.write_dimacs(p, out)
    return {"dimacs": str(out), **p.stats().as_dict(), "m": dm.m, "n": dm.n}


def cmd_bench(args) -> dict:
    rows = driver.bench_table(
        range(args.d_range[0], args.d_range[1] + 1),
        range(args.windows[0], args.windows[1] + 1),
        args.trials,
        reduced=None if args.full else driver.ReducedScheduleSpec(),
        budget_s=args.budget, seed=args.seed, jobs=args.jobs,
        backend=args.backend, timing=args.timing,
        zero_links=args.zero_links, share_order=args.share_order,
        parity_links=args.parity_links,
    )
    out, summ = _outpath(args, args.out), _outpath(args, args.summary)
    driver.write_bench_csv(rows, out)
    driver.write_summary_json(rows, summ)
    return {"csv": str(out), "summary": str(summ),
            "minimum_window": {str(k): v for k, v in driver.minimum_windows(rows).items()}}


def cmd_verify(args) -> dict:
    return {"ok": driver.verify_key(args.key, args.pt, args.ct)}


COMMANDS = {
    "simulate": cmd_simulate, "snapshot": cmd_snapshot, "imggen": cmd_imggen,
    "imgextract": cmd_imgextract, "attack1": cmd_attack1, "attack2": cmd_attack2,
    "encode": cmd_encode, "bench": cmd_bench, "verify": cmd_verify,
}


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        cfg = json.loads(Path(known.config).read_text())
    except (OSError, ValueError) as exc:
        parser.error(f"cannot read config {known.config}: {exc}")
    if not isinstance(cfg, dict):
        parser.error("config file must hold a JSON object")
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    command = next((a for a in argv if a in sub.choices), None)
    if command is None:
        return
    sp = sub.choices[command]
    dests = {a.dest: a for a in sp._actions}
    converted = {}
    for k, v in cfg.items():
        key = k.replace("-", "_")
        if key not in dests:
            parser.error(f"config key {k!r} is not an option of {command}")
        action = dests[key]
        if isinstance(v, str) and action.type is not None:
            v = action.type(v)
        converted[key] = v
    sp.set_defaults(**converted)


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        result = COMMANDS[args.command](args)
        _write_manifest(args)
    except (UsageError, ValueError, OSError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stdout)
        return 1
    except solvers.SolverError as exc:
        print(json.dumps({"error": f"solver: {exc}"}), file=sys.stdout)
        return 3
    print(json.dumps(result, sort_keys=True))
    return 0 if result.get("ok", True) is not False else 1


if __name__ == "__main__":
    sys.exit(main())
