"""Command-line interface.

Exit codes: 0 success, 1 malformed input or unknown family, 2 channel fails
validation, 3 optimizer failure, 4 inadmissible operator, 5 plan
inconsistency.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bounds, channels, focksim, optics, realization
from .channels import ChannelFormatError, KrausSet
from .matkit import ContractError, NumericError

DEFAULT_SEED = 20100501
EXIT_OK, EXIT_INPUT, EXIT_INVALID, EXIT_OPTIMIZER, EXIT_INADMISSIBLE, EXIT_INCONSISTENT = range(6)
AD_GRID = tuple(round(0.1 * i, 10) for i in range(11))
CONSTMIX_P = (0.0, 0.25, 0.5, 0.75, 1.0)
CONSTMIX_S = (0.5, 0.75, 1.0)


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class CommandConfig:
    subcommand: str
    input: str | None = None
    builtin: str | None = None
    seed: int = DEFAULT_SEED
    restarts: int = realization.DEFAULT_RESTARTS
    shots: int = 100_000
    out: str | None = None
    format: str = "json"
    family: str = "ad"
    state: str = "mixed"


def parse_builtin(spec: str) -> KrausSet:
    """Channels by name: ad:EPS, constmix:P:S, id:D, depol:P, deph:Q, const:D, rand:D:N:SEED, ru:FILE."""
    name, _, rest = spec.partition(":")
    args = rest.split(":") if rest else []
    try:
        if name == "ad":
            return channels.make_amplitude_damping(float(args[0]))
        if name == "constmix":
            return channels.make_constant_output_mix(float(args[0]), float(args[1]))
        if name == "id":
            return channels.make_identity(int(args[0]) if args else 2)
        if name == "depol":
            return channels.make_depolarizing(float(args[0]))
        if name == "deph":
            return channels.make_dephasing(float(args[0]) if args else 0.5)
        if name == "const":
            return channels.make_pure_constant(int(args[0]))
        if name == "rand":
            d, n, seed = int(args[0]), int(args[1]), int(args[2]) if len(args) > 2 else 0
            return channels.random_channel(d, n, np.random.default_rng(seed))
        if name == "ru":
            return _load_random_unitary(rest)
    except (IndexError, ValueError) as exc:
        raise CliError(EXIT_INPUT, f"bad builtin spec {spec!r}: {exc}") from exc
    raise CliError(EXIT_INPUT, f"unknown builtin channel {name!r}")


def _load_random_unitary(path: str) -> KrausSet:
    """File format: [{"q": weight, "u": {"re": [[..]], "im": [[..]]}}, ...]."""
    data = _read_json(path)
    try:
        pairs = [(float(item["q"]), channels.cmat_from_json(item["u"], f"$[{i}].u"))
                 for i, item in enumerate(data)]
    except (KeyError, TypeError) as exc:
        raise CliError(EXIT_INPUT, f"{path}: malformed random-unitary list ({exc})") from exc
    return channels.make_random_unitary_channel(pairs)


def _read_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_INPUT, f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def load_channel(cfg: CommandConfig) -> KrausSet:
    if (cfg.input is None) == (cfg.builtin is None):
        raise CliError(EXIT_INPUT, "give exactly one of --input or --builtin")
    if cfg.builtin is not None:
        return parse_builtin(cfg.builtin)
    try:
        obj = channels.channel_from_json(_read_json(cfg.input))
    except ChannelFormatError as exc:
        raise CliError(EXIT_INPUT, f"{cfg.input}: {exc}") from exc
    if isinstance(obj, channels.ChoiState):
        try:
            return channels.as_kraus(obj)
        except ContractError as exc:
            raise CliError(EXIT_INVALID, f"invalid Choi state: {exc}") from exc
    return obj


def _require_valid(K: KrausSet) -> None:
    report = channels.validate(K)
    if not report.passed:
        raise CliError(EXIT_INVALID, "channel failed validation: " + "; ".join(report.problems))


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _emit(cfg: CommandConfig, text: str) -> None:
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def _plan(K: KrausSet, cfg: CommandConfig) -> realization.RealizationPlan:
    try:
        return realization.plan_channel(K, restarts=cfg.restarts, seed=cfg.seed)
    except (NumericError, np.linalg.LinAlgError) as exc:
        raise CliError(EXIT_OPTIMIZER, f"optimizer failed: {exc}") from exc


def cmd_validate(cfg: CommandConfig) -> int:
    K = load_channel(cfg)
    report = channels.validate(K)
    _emit(cfg, dump_json(report.as_dict()))
    if not report.passed:
        print(f"FAIL: trace-preservation residual {report.tp_residual:.6g}", file=sys.stderr)
        for problem in report.problems:
            print(f"  {problem}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def cmd_analyze(cfg: CommandConfig) -> int:
    K = load_channel(cfg)
    _require_valid(K)
    plan = _plan(K, cfg)
    report = bounds.full_report(K, plan, seed=cfg.seed)
    _emit(cfg, dump_json({"plan": plan.to_json(), "bounds": report.to_json()}))
    print(f"p_succ = {plan.p_succ:.10g}  sigma = {plan.sigma:.10g}  certified = {plan.certified_optimal}",
          file=sys.stderr)
    for key, value in report.to_json().items():
        if key.endswith(("_lb", "_ub")) and value is not None:
            print(f"  {key:16s} {value:.10g}  [{report.methods.get(key, '')}]", file=sys.stderr)
    return EXIT_OK


def compile_networks(plan: realization.RealizationPlan) -> list[optics.OpticalNetwork]:
    nets = []
    for i, A in enumerate(plan.operators):
        net = optics.compile_kraus(A, plan.d)
        err = optics.block_error(net, A)
        if err > 1e-9:
            raise CliError(EXIT_INADMISSIBLE, f"branch {i}: compiled block differs by {err:.3e}")
        nets.append(net)
    plan.networks = nets
    return nets


def cmd_compile(cfg: CommandConfig) -> int:
    K = load_channel(cfg)
    _require_valid(K)
    plan = _plan(K, cfg)
    try:
        nets = compile_networks(plan)
    except optics.InadmissibleOperatorError as exc:
        raise CliError(EXIT_INADMISSIBLE, str(exc)) from exc
    if cfg.out:
        outdir = Path(cfg.out)
        outdir.mkdir(parents=True, exist_ok=True)
        for i, net in enumerate(nets):
            (outdir / f"branch_{i}.json").write_text(dump_json(net.to_json()))
        (outdir / "plan.json").write_text(dump_json(plan.to_json()))
    else:
        sys.stdout.write(dump_json({"plan": plan.to_json(), "networks": [n.to_json() for n in nets]}))
    print(f"compiled {len(nets)} branch networks", file=sys.stderr)
    return EXIT_OK


def input_state(spec: str, d: int) -> np.ndarray:
    if spec == "mixed":
        return np.eye(d, dtype=complex) / d
    try:
        k = int(spec)
    except ValueError as exc:
        raise CliError(EXIT_INPUT, f"bad --state {spec!r}: use 'mixed' or a basis index") from exc
    if not 0 <= k < d:
        raise CliError(EXIT_INPUT, f"basis index {k} outside 0..{d - 1}")
    rho = np.zeros((d, d), dtype=complex)
    rho[k, k] = 1
    return rho


def cmd_simulate(cfg: CommandConfig) -> int:
    K = load_channel(cfg)
    _require_valid(K)
    plan = _plan(K, cfg)
    compile_networks(plan)
    try:
        _, p_sim = focksim.effective_channel_choi(plan)
    except focksim.PlanInconsistencyError as exc:
        raise CliError(EXIT_INCONSISTENT, str(exc)) from exc
    result = focksim.monte_carlo(plan, input_state(cfg.state, K.d), cfg.shots, cfg.seed)
    _emit(cfg, dump_json(result.to_json()))
    print(f"p_hat = {result.p_hat:.6f} +/- {result.stderr:.6f}   p_succ = {plan.p_succ:.6f}"
          f"   simulated = {p_sim:.6f}", file=sys.stderr)
    return EXIT_OK


def curve_rows(family: str, restarts: int, seed: int) -> tuple[list[str], list[dict]]:
    if family == "ad":
        header = ["eps", "p_exact", "conc_ub", "conc_lb", "certified"]
        grid = [(eps,) for eps in AD_GRID]
        build = lambda eps: channels.make_amplitude_damping(eps)
    elif family == "constmix":
        header = ["p", "s", "p_exact", "conc_ub", "conc_lb", "certified"]
        grid = [(p, s) for p in CONSTMIX_P for s in CONSTMIX_S]
        build = channels.make_constant_output_mix
    else:
        raise CliError(EXIT_INPUT, f"unknown curve family {family!r}")
    rows = []
    for params in grid:
        K = build(*params)
        plan = realization.plan_channel(K, restarts=restarts, seed=seed)
        lb, ub = bounds.concurrence_bounds_psucc(channels.kraus_to_choi(K))
        row = dict(zip(header, params))
        row.update(p_exact=plan.p_succ, conc_ub=ub, conc_lb=lb, certified=plan.certified_optimal)
        rows.append(row)
    return header, rows


def cmd_curve(cfg: CommandConfig) -> int:
    header, rows = curve_rows(cfg.family, cfg.restarts, cfg.seed)
    if cfg.format == "json":
        _emit(cfg, dump_json(rows))
        return EXIT_OK
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()})
    _emit(cfg, buf.getvalue())
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "analyze": cmd_analyze,
    "compile": cmd_compile,
    "simulate": cmd_simulate,
    "curve": cmd_curve,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="channelforge",
                                     description="Linear-optics switching realizations of qudit channels")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name != "curve":
            src = p.add_mutually_exclusive_group(required=True)
            src.add_argument("--input", metavar="PATH", help="channel JSON file")
            src.add_argument("--builtin", metavar="SPEC", help="e.g. ad:0.5, constmix:0.6:0.75, id:2")
        else:
            p.add_argument("--family", choices=["ad", "constmix"], default="ad")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--restarts", type=int, default=realization.DEFAULT_RESTARTS)
        p.add_argument("--shots", type=int, default=100_000)
        p.add_argument("--out", metavar="PATH")
        p.add_argument("--format", choices=["json", "csv"], default="csv" if name == "curve" else "json")
        if name == "simulate":
            p.add_argument("--state", default="mixed", help="'mixed' or a logical basis index")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    cfg = CommandConfig(**{k: v for k, v in vars(ns).items() if k in CommandConfig.__dataclass_fields__})
    try:
        return COMMANDS[cfg.subcommand](cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except optics.InadmissibleOperatorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INADMISSIBLE
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
