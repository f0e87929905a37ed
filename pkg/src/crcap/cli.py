"""Command-line front end: ``python3 -m crcap <command> ...``.

Every output embeds the resolved configuration (including the seed), so a
file can be regenerated exactly.  Exit status is 0 on success, 1 on a
numerical failure and 2 on invalid input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .channel_capacity import (MimoChannelSpec, SisoChannelSpec, mimo_capacity, p_star,
                               siso_capacity, waterfill)
from .cr_optimizer import OptimizerConfig, cap_budget, solve_cr
from .errors import CrcapError, NumericalError, ValidationError
from .oracle import brute_force_cr, bsc_family_bound
from .prob_core import JointPMF, binary_source

DEFAULT_MUS = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
DEFAULT_POWER_GRID = (
    0.0, 0.4, 0.443700637652136, 0.487401275304271, 0.815858733228839,
    0.865858733228839, 0.915858733228839, 1.25, 1.28947576084681,
    1.32895152169362, 1.62047051030039, 1.67047051030039, 1.72047051030039, 2.0,
    2.039600717839, 2.079201435678, 2.29304790375616, 2.34304790375616,
    2.39304790375616, 2.6, 2.62530317679635, 2.6506063535927, 2.74211629784053,
    2.79211629784053, 2.84211629784053, 2.9, 2.93006653339619, 2.96013306679237,
    2.98006653339619, 3.0, 3.1, 3.2, 3.3,
)
SECUREID_POWER_GRID = tuple(p for p in DEFAULT_POWER_GRID if p <= 3.0)

SWEEP_COLUMNS = ("mu", "power", "cr_capacity", "oracle_value", "bsc_bound",
                 "nash_gap", "seed", "status")
SIM_COLUMNS = ("n", "delta", "N1", "N2", "est_mismatch", "mismatch_lo", "mismatch_hi",
               "est_entropy_rate", "channel_error_rate", "fallback_rate",
               "ambiguity_rate", "trials", "seed")
SECUREID_COLUMNS = ("power", "cr_bound", "randomized_encoding_capacity", "gain",
                    "applicable", "secrecy_capacity")

DEFAULTS = {
    "mu": None, "power": None, "noise": 1.0, "eve_noise": 2.0, "h": None,
    "grid": None, "iters": 5000, "restarts": 1, "seed": 0, "convention": None,
    "out": None, "format": "csv", "joint": None, "workers": None, "delta": 0.15,
    "n_grid": "8,12,16", "trials": 10000, "channel_mode": "awgn_random_code",
    "tie_break": "closest", "nonconvex": False, "no_oracle": False,
}


# ----------------------------------------------------------------- parsing

def read_matrix(path: str) -> np.ndarray:
    """Whitespace-separated rows; entries may carry ``j`` imaginary parts."""
    if path.startswith("identity") and path[8:].isdigit():
        return np.eye(int(path[8:]))
    try:
        with open(path) as fh:
            rows = [[complex(tok) for tok in line.split()] for line in fh if line.strip()]
    except (OSError, ValueError) as exc:
        raise ValidationError(f"cannot read matrix {path!r}: {exc}") from exc
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValidationError(f"matrix {path!r} is empty or ragged")
    m = np.array(rows)
    return m.real if np.all(m.imag == 0) else m


def _floats(value, name: str) -> list[float]:
    if value is None:
        return []
    if isinstance(value, (int, float)):
        return [float(value)]
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    try:
        return [float(v) for v in str(value).replace(",", " ").split()]
    except ValueError as exc:
        raise ValidationError(f"bad value for {name}: {value!r}") from exc


def read_grid(path: str) -> list[float]:
    """A JSON list or whitespace/comma separated numbers."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read grid {path!r}: {exc}") from exc
    try:
        return _floats(json.loads(text), "grid")
    except json.JSONDecodeError:
        return _floats(text, "grid")


def resolve(args: argparse.Namespace) -> dict:
    """Defaults < config file < explicit flags."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ValidationError("config file must hold a JSON object")
        unknown = set(loaded) - set(DEFAULTS) - {"command", "kind"}
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        cfg.update({k: v for k, v in loaded.items() if k in DEFAULTS})
    for k, v in vars(args).items():
        if k in DEFAULTS and v is not None and v is not False:
            cfg[k] = v
    cfg["command"] = args.command
    if getattr(args, "kind", None):
        cfg["kind"] = args.kind
    return cfg


def _source(cfg) -> tuple[JointPMF, float | None]:
    if cfg.get("joint"):
        return JointPMF(read_matrix(cfg["joint"])), None
    mu = _floats(cfg["mu"], "mu")
    if len(mu) != 1:
        raise ValidationError("exactly one --mu (or --joint) is required")
    return binary_source(mu[0]), mu[0]


def _opt_config(cfg, seed=None) -> OptimizerConfig:
    return OptimizerConfig(iterations=int(cfg["iters"]), restarts=int(cfg["restarts"]),
                           seed=int(cfg["seed"] if seed is None else seed))


# ----------------------------------------------------------------- output

def _fmt(v):
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v).lower()
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def emit(cfg: dict, columns, rows: list[dict]) -> str:
    # the output path does not affect the numbers, so reruns stay byte-identical
    meta = {k: cfg[k] for k in sorted(cfg) if k not in ("out", "config")}
    if cfg["format"] == "json":
        data = {"config": meta, "columns": list(columns), "rows": rows}
        text = json.dumps(data, indent=2, sort_keys=False, default=float) + "\n"
    elif cfg["format"] == "csv":
        buf = io.StringIO()
        buf.write("# config: " + json.dumps(meta, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])
        text = buf.getvalue()
    else:
        raise ValidationError(f"unknown format {cfg['format']!r}")
    if cfg["out"]:
        with open(cfg["out"], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return text


# ----------------------------------------------------------------- commands

def cmd_capacity(cfg) -> list[dict]:
    kind = cfg["kind"]
    if kind == "pstar":
        mus = _floats(cfg["mu"], "mu")
        if not mus:
            raise ValidationError("--mu is required")
        return [{"mu": m, "noise": float(cfg["noise"]), "p_star": p_star(m, float(cfg["noise"]))}
                for m in mus]
    powers = _floats(cfg["power"], "power")
    if not powers:
        raise ValidationError("--power is required")
    if kind == "siso":
        conv = cfg["convention"] or "real"
        return [{"power": p, "noise": float(cfg["noise"]), "convention": conv,
                 "capacity": siso_capacity(SisoChannelSpec(p, float(cfg["noise"])), conv)}
                for p in powers]
    if not cfg["h"]:
        raise ValidationError("--h is required for mimo")
    H = read_matrix(cfg["h"])
    conv = cfg["convention"] or "complex"
    rows = []
    for p in powers:
        spec = MimoChannelSpec(H, p, float(cfg["noise"]))
        a = waterfill(spec)
        rows.append({"power": p, "noise": float(cfg["noise"]), "convention": conv,
                     "capacity": mimo_capacity(spec, conv),
                     "singular_values": " ".join(_fmt(v) for v in a.singular_values),
                     "allocation": " ".join(_fmt(v) for v in a.powers),
                     "water_level": a.water_level})
    return rows


def _point_seed(seed: int, index: int) -> int:
    return (int(seed) ^ ((index * 0x9E3779B97F4A7C15) & 0xFFFFFFFF)) & 0x7FFFFFFFFFFFFFFF


def _sweep_row(job):
    table, mu, power, noise, h, cfg, seed = job
    row = {"mu": mu, "power": power, "seed": seed, "status": "ok"}
    try:
        source = JointPMF(np.array(table))
        channel = (SisoChannelSpec(power, noise) if h is None
                   else MimoChannelSpec(np.array(h), power, noise))
        sol = solve_cr(source, channel, _opt_config(cfg, seed),
                       nonconvex=bool(cfg.get("nonconvex")))
        row.update(cr_capacity=sol.value, nash_gap=sol.nash_gap)
        b = cap_budget(channel)
        if not cfg.get("no_oracle") and source.nx == 2:
            row["oracle_value"] = brute_force_cr(source, b)[0]
        if mu is not None and mu > 0:
            row["bsc_bound"] = bsc_family_bound(mu, b)
        elif mu == 0:
            row["bsc_bound"] = float(np.log(2))
    except CrcapError as exc:
        row["status"] = f"error: {exc}"
    return row


def cmd_crcap(cfg, kind: str) -> list[dict]:
    h = read_matrix(cfg["h"]) if cfg["h"] else None
    h_list = None if h is None else h.tolist()
    noise = float(cfg["noise"])
    if cfg.get("joint"):
        sources = [(None, JointPMF(read_matrix(cfg["joint"])))]
    else:
        mus = _floats(cfg["mu"], "mu") or (list(DEFAULT_MUS) if kind == "sweep" else [])
        if not mus:
            raise ValidationError("--mu is required")
        sources = [(m, binary_source(m)) for m in mus]
    powers = (read_grid(cfg["grid"]) if cfg["grid"] else _floats(cfg["power"], "power"))
    if not powers:
        if kind == "point":
            raise ValidationError("--power is required")
        powers = list(DEFAULT_POWER_GRID)
    if kind == "point" and (len(powers) != 1 or len(sources) != 1):
        raise ValidationError("crcap point takes exactly one mu and one power")
    jobs = []
    for m, src in sources:
        for p in powers:
            jobs.append((src.table.tolist(), m, float(p), noise, h_list, cfg,
                         _point_seed(cfg["seed"], len(jobs))))
    for j in jobs:
        SisoChannelSpec(j[2], noise)
    workers = int(cfg["workers"] or os.cpu_count() or 1)
    if workers <= 1 or len(jobs) == 1:
        rows = [_sweep_row(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_sweep_row, jobs))
    if kind == "point" and rows[0]["status"] != "ok":
        raise NumericalError(rows[0]["status"])
    return rows


def cmd_simulate(cfg) -> list[dict]:
    from .protocol_sim import SchemeParams, run_simulation

    source, _ = _source(cfg)
    power = _floats(cfg["power"], "power") or [10.0]
    aux = np.vstack([np.diag(source.px), np.zeros((1, source.nx))])
    rows = []
    for n in _floats(cfg["n_grid"], "n_grid"):
        params = SchemeParams(int(n), float(cfg["delta"]), aux, source,
                              SisoChannelSpec(power[0], float(cfg["noise"])),
                              channel_mode=cfg["channel_mode"], trials=int(cfg["trials"]),
                              seed=int(cfg["seed"]), tie_break=cfg["tie_break"])
        r = run_simulation(params)
        rows.append({"n": r.n, "delta": r.delta, "N1": r.N1, "N2": r.N2,
                     "est_mismatch": r.est_mismatch, "mismatch_lo": r.mismatch_ci[0],
                     "mismatch_hi": r.mismatch_ci[1], "est_entropy_rate": r.est_entropy_rate,
                     "channel_error_rate": r.channel_error_rate,
                     "fallback_rate": r.fallback_rate, "ambiguity_rate": r.ambiguity_rate,
                     "trials": r.trials, "seed": int(cfg["seed"])})
    return rows


def cmd_secureid(cfg) -> list[dict]:
    from .secure_id import (WiretapSpec, identification_gain, randomized_encoding_capacity,
                            secure_id_lower_bound)

    source, _ = _source(cfg)
    powers = (read_grid(cfg["grid"]) if cfg["grid"] else _floats(cfg["power"], "power"))
    powers = powers or list(SECUREID_POWER_GRID)
    oc = _opt_config(cfg)
    rows = []
    for p in powers:
        spec = WiretapSpec(float(p), float(cfg["noise"]), float(cfg["eve_noise"]))
        b = secure_id_lower_bound(source, spec, oc)
        rows.append({"power": float(p), "cr_bound": b.bound,
                     "randomized_encoding_capacity": randomized_encoding_capacity(spec),
                     "gain": identification_gain(source, spec, oc, b) if b.applicable else None,
                     "applicable": b.applicable, "secrecy_capacity": b.secrecy_capacity})
    return rows


# ----------------------------------------------------------------- entry

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config; flags override its values")
    common.add_argument("--mu")
    common.add_argument("--joint", help="2-D joint pmf matrix file")
    common.add_argument("--power")
    common.add_argument("--noise", type=float)
    common.add_argument("--eve-noise", dest="eve_noise", type=float)
    common.add_argument("--h", help="channel matrix file or identityN")
    common.add_argument("--grid", help="file with a list of powers")
    common.add_argument("--iters", type=int)
    common.add_argument("--restarts", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--convention", choices=("real", "complex"))
    common.add_argument("--out")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--workers", type=int)

    p = argparse.ArgumentParser(prog="crcap", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    cap = sub.add_parser("capacity", parents=[common], help="channel capacities")
    cap.add_argument("kind", choices=("siso", "mimo", "pstar"))
    cr = sub.add_parser("crcap", parents=[common], help="CR capacity")
    cr.add_argument("kind", choices=("sweep", "point"))
    cr.add_argument("--nonconvex", action="store_true", help="also run the oracle-based solver")
    cr.add_argument("--no-oracle", dest="no_oracle", action="store_true")
    sim = sub.add_parser("simulate", parents=[common], help="protocol Monte-Carlo")
    sim.add_argument("--n-grid", dest="n_grid")
    sim.add_argument("--delta", type=float)
    sim.add_argument("--trials", type=int)
    sim.add_argument("--channel-mode", dest="channel_mode", choices=("ideal", "awgn_random_code"))
    sim.add_argument("--tie-break", dest="tie_break", choices=("closest", "first"))
    sub.add_parser("secureid", parents=[common], help="secure identification bound")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        if args.command == "capacity":
            rows = cmd_capacity(cfg)
            cols = list(rows[0]) if rows else []
        elif args.command == "crcap":
            rows, cols = cmd_crcap(cfg, args.kind), SWEEP_COLUMNS
        elif args.command == "simulate":
            rows, cols = cmd_simulate(cfg), SIM_COLUMNS
        else:
            rows, cols = cmd_secureid(cfg), SECUREID_COLUMNS
        emit(cfg, cols, rows)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
