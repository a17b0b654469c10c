"""
Command-line front end.

Subcommands: ``run``, ``truth-table``, ``witness-table``, ``attack-demo`` and
``sweep``. Exit status: 0 Accept (or success), 2 Abort, 3 insufficient data,
1 usage or configuration error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import core
from .adversary import cheat_tradeoff_sweep
from .core import Basis, conditional_state, ghz_state
from .errors import QSSError
from .io import report_json, write_transcript
from .protocol import ProtocolConfig, SecurityReport, run_protocol
from .witness import (
    SOUND_Z_COEFF,
    Z_COEFF,
    Variant,
    build_witness,
    calibrate_phase,
    evaluate_exact,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ABORT = 2
EXIT_INSUFFICIENT = 3

OUTPUT_DIR_ENV = "GHZ_QSS_OUTPUT_DIR"
RUN_EXTRA_KEYS = ("output", "format")
FORMATS = ("summary", "full")


class ConfigError(Exception):
    """Bad configuration file or option value."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit with the config status
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# -- config files -------------------------------------------------------------------

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ProtocolConfig)}


def _convert(key: str, raw: str):
    t = _FIELD_TYPES.get(key, "str")
    raw = raw.strip()
    if "bool" in t:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if key == "attack_params":
        if raw.lower() in ("", "none"):
            return None
        return tuple(float(x) for x in raw.replace(",", " ").split())
    if t == "int":
        return int(raw)
    if t == "float":
        return float(raw)
    return raw


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    allowed = set(_FIELD_TYPES) | set(RUN_EXTRA_KEYS)
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in allowed:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _convert(key, raw)
        except ValueError as e:
            raise ConfigError(f"{source}:{lineno}: field {key}: {e}") from None
    return values


def build_run_config(args: argparse.Namespace) -> tuple[ProtocolConfig, dict]:
    values: dict = {}
    if args.config:
        path = Path(args.config)
        try:
            text = path.read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}") from None
        values = parse_config_text(text, str(path))
    flag_map = {
        "parties": "n_parties",
        "rounds": "num_rounds",
        "q_z": "q_z",
        "p_psi": "p_psi",
        "test_fraction": "test_fraction",
        "ordering": "ordering",
        "attack": "attack",
        "k_sigma": "k_sigma",
        "seed": "seed",
        "adversary_prior": "adversary_prior",
        "adversary_basis": "adversary_basis",
        "output": "output",
        "format": "format",
    }
    for flag, key in flag_map.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[key] = v
    if args.attack_params is not None:
        values["attack_params"] = _convert("attack_params", args.attack_params)
    if args.no_witness_check:
        values["witness_check"] = False
    extra = {k: values.pop(k) for k in RUN_EXTRA_KEYS if k in values}
    fmt = extra.get("format", "summary")
    if fmt not in FORMATS:
        raise ConfigError(f"field format: expected one of {FORMATS}, got {fmt!r}")
    try:
        cfg = ProtocolConfig(**values).validate()
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return cfg, extra


def _exit_for(report: SecurityReport) -> int:
    label = report.decision_label
    if label == "Abort":
        return EXIT_ABORT
    if label == "InsufficientData":
        return EXIT_INSUFFICIENT
    return EXIT_OK


def _output_path(extra: dict, default_name: str) -> Path | None:
    if extra.get("output"):
        return Path(extra["output"])
    out_dir = os.environ.get(OUTPUT_DIR_ENV)
    if out_dir:
        return Path(out_dir) / default_name
    return None


# -- commands -----------------------------------------------------------------------


def cmd_run(args) -> int:
    cfg, extra = build_run_config(args)
    tr = run_protocol(cfg)
    fmt = extra.get("format", "summary")
    name = f"run-seed{cfg.seed}." + ("jsonl" if fmt == "full" else "json")
    path = _output_path(extra, name)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fp:
            if fmt == "full":
                write_transcript(tr, fp)
            else:
                fp.write(report_json(tr.report))
        print(f"{tr.report.decision_label}: wrote {path}", file=sys.stderr)
    elif fmt == "full":
        write_transcript(tr, sys.stdout)
    else:
        sys.stdout.write(report_json(tr.report))
    return _exit_for(tr.report)


EIGEN_LABELS = ("x+", "x-", "y+", "y-")


def _eigen(label: str) -> tuple[Basis, int]:
    return Basis.parse(label[0].upper()), 0 if label[1] == "+" else 1


def truth_table() -> dict[tuple[str, str], str]:
    """Charlie's post-measurement state for every (Alice, Bob) X/Y eigenstate."""
    ghz = ghz_state(3, 0.0)
    table = {}
    for a in EIGEN_LABELS:
        for b in EIGEN_LABELS:
            (ba, xa), (bb, xb) = _eigen(a), _eigen(b)
            _, c = conditional_state(ghz, [0, 1], [ba, bb], [xa, xb])
            match = [
                lab for lab in EIGEN_LABELS
                if abs(abs(np.vdot(_eigen(lab)[0].eigenvectors[:, _eigen(lab)[1]], c.amplitudes)) - 1) < 1e-9
            ]
            table[(a, b)] = match[0]
    return table


def render_truth_table(table: dict[tuple[str, str], str]) -> str:
    lines = ["Bob \\ Alice\t" + "\t".join(EIGEN_LABELS)]
    for b in EIGEN_LABELS:
        lines.append(b + "\t\t" + "\t".join(table[(a, b)] for a in EIGEN_LABELS))
    return "\n".join(lines) + "\n"


def cmd_truth_table(args) -> int:
    sys.stdout.write(render_truth_table(truth_table()))
    return EXIT_OK


def witness_table(n: int, variant: Variant | str, sound: bool = False) -> tuple[str, float]:
    variant = Variant.parse(variant)
    spec = build_witness(n, variant, SOUND_Z_COEFF if sound else Z_COEFF)
    phase = 0.0 if variant is Variant.I1 else calibrate_phase(n).phase
    value = evaluate_exact(spec, ghz_state(n, phase))
    return spec.to_table(), value


def cmd_witness_table(args) -> int:
    table, value = witness_table(args.n, args.variant, args.sound)
    variant = Variant.parse(args.variant)
    phase = "0" if variant is Variant.I1 else ("+pi/2" if calibrate_phase(args.n).phase > 0 else "-pi/2")
    sys.stdout.write(table)
    print(f"# value on GHZ_{args.n}(phase {phase}): {value:.12g}")
    return EXIT_OK


def attack_demo(mode: str, rounds: int = 20_000, seed: int = 0, n_parties: int = 3) -> dict:
    """Attacked run next to an unattacked control for one protocol mode."""
    if mode == "original":
        base = dict(p_psi=1.0, witness_check=False)
    elif mode == "modified":
        base = dict(p_psi=0.5, witness_check=True)
    else:
        raise ConfigError(f"unknown demo mode {mode!r}")
    out = {}
    for label, attack in (("attacked", "intercept"), ("control", "none")):
        cfg = ProtocolConfig(n_parties=n_parties, num_rounds=rounds, seed=seed, attack=attack, **base)
        rep = run_protocol(cfg).report
        out[label] = {
            "decision": rep.decision_label,
            "qber": rep.qber,
            "adversary_accuracy": rep.adversary_accuracy,
            "I1": None if rep.witness["I1"] is None else rep.witness["I1"]["value"],
            "I2": None if rep.witness["I2"] is None else rep.witness["I2"]["value"],
            "key_length": rep.key_length,
        }
    return out


def cmd_attack_demo(args) -> int:
    res = attack_demo(args.mode, args.rounds, args.seed, args.parties)
    keys = ["decision", "qber", "adversary_accuracy", "I1", "I2", "key_length"]
    print(f"mode: {args.mode}")
    print(f"{'':20s}{'attacked':>14s}{'control':>14s}")

    def fmt(v):
        if v is None:
            return "-"
        return f"{v:.4f}" if isinstance(v, float) else str(v)

    for k in keys:
        print(f"{k:20s}{fmt(res['attacked'][k]):>14s}{fmt(res['control'][k]):>14s}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    res = cheat_tradeoff_sweep(
        samples=args.samples, p_psi=args.p_psi, seed=args.seed,
        refine_iters=args.refine_iters, mode=args.mode,
    )
    path = Path(args.output) if args.output else _output_path({}, f"sweep-seed{args.seed}.tsv")
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(res.to_table())
    summary = {
        "samples": args.samples,
        "p_psi": args.p_psi,
        "seed": args.seed,
        "mode": args.mode,
        "identity": {"I1": res.identity.i1, "I2": res.identity.i2},
        "best": {"I1": res.best.i1, "I2": res.best.i2},
        "max_min": res.max_min,
        "table": str(path) if path else None,
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


# -- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ghz-qss", description="GHZ secret sharing with a witness check")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run the protocol and write a report")
    r.add_argument("--config", help="flat key = value file; flags override it")
    r.add_argument("--parties", type=int)
    r.add_argument("--rounds", type=int)
    r.add_argument("--q-z", type=float)
    r.add_argument("--p-psi", type=float)
    r.add_argument("--test-fraction", type=float)
    r.add_argument("--ordering", choices=["naive", "reversed"])
    r.add_argument("--attack", choices=["none", "intercept", "unitary"])
    r.add_argument("--attack-params", help="16 comma-separated angles (unitary attack)")
    r.add_argument("--k-sigma", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--no-witness-check", action="store_true")
    r.add_argument("--adversary-prior", choices=["psi", "bayes"])
    r.add_argument("--adversary-basis", choices=["mimic", "psi-valid"])
    r.add_argument("--output", help=f"output file (default: ${OUTPUT_DIR_ENV} or stdout)")
    r.add_argument("--format", choices=FORMATS)
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("truth-table", help="Charlie's state for each Alice/Bob result")
    t.set_defaults(func=cmd_truth_table)

    w = sub.add_parser("witness-table", help="print witness terms and the GHZ value")
    w.add_argument("n", type=int)
    w.add_argument("variant", choices=["I1", "I2", "i1", "i2"])
    w.add_argument("--sound", action="store_true",
                   help="use Z coefficient 1/8 (non-positive on all biseparable states)")
    w.set_defaults(func=cmd_witness_table)

    a = sub.add_parser("attack-demo", help="attacked run next to a control run")
    a.add_argument("--mode", choices=["original", "modified"], default="modified")
    a.add_argument("--rounds", type=int, default=20_000)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--parties", type=int, default=3)
    a.set_defaults(func=cmd_attack_demo)

    s = sub.add_parser("sweep", help="random search over cheat unitaries")
    s.add_argument("--samples", type=int, default=10_000)
    s.add_argument("--p-psi", type=float, default=0.5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--refine-iters", type=int, default=200)
    s.add_argument("--mode", choices=["mixture", "per-tag"], default="mixture")
    s.add_argument("--output", help="TSV table path")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (QSSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
