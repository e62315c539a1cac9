"""Batch front end.

Usage::

    qrepeater SUBCOMMAND [--config FILE] [--set KEY=VALUE ...] [options]

Configuration is a line-oriented ``key = value`` file; blank lines and ``#``
comments are ignored. ``--set`` overrides (and the dedicated flags) win over
the file. Recognised keys and their defaults are listed in :data:`DEFAULTS`.

Exit codes: 0 success, 1 verification or statistical failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields

from . import analytics, gates, protocol, sources
from .analytics import NoiseParams
from .errors import ConfigurationError, RepeaterError
from .fock import FockState, ModeRegistry, fidelity
from .protocol import SEED_ENV, ChainConfig

SUBCOMMANDS = ("analytic", "table1", "verify-cnot", "verify-pdc", "verify-bell", "simulate", "resources")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

TABLE1_COLUMNS = ("eta", "n_pur", "n_swap", "n_total", "convention")
RESOURCE_COLUMNS = ("component", "guns", "detectors")

ANALYTIC_SCHEMA = "qrepeater.analytic/1"
TABLE1_SCHEMA = "qrepeater.table1/1"
RESOURCES_SCHEMA = "qrepeater.resources/1"

_NOISE_KEYS = tuple(f.name for f in fields(NoiseParams))

# Every accepted key with its default. ``seed`` falls back to $QREPEATER_SEED, then 0.
DEFAULTS: dict[str, object] = {
    **asdict(NoiseParams()),
    "n_links": 1,
    "trials": 10_000,
    "seed": None,
    "table1_convention": False,
    "placement": "midpoint",
    "workers": 1,
    "etas": analytics.REFERENCE_ETAS,
    "output_format": None,
    "output_path": None,
    "event_log": None,
    "round_one_figure": False,
    "check": False,
}


class ConfigError(ConfigurationError):
    """Bad configuration input; carries a ``source:line`` location when known."""

    def __init__(self, message: str, where: str | None = None):
        super().__init__(f"{where}: {message}" if where else message)


@dataclass
class RunConfig:
    subcommand: str
    params: NoiseParams = field(default_factory=NoiseParams)
    chain: dict = field(default_factory=dict)
    output_format: str | None = None
    output_path: str | None = None
    workers: int = 1
    etas: tuple[float, ...] = analytics.REFERENCE_ETAS
    event_log: str | None = None
    round_one_figure: bool = False
    check: bool = False

    def chain_config(self) -> ChainConfig:
        return ChainConfig(params=self.params, **self.chain)


# ---------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------
def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_optional_str(text: str) -> str | None:
    text = text.strip()
    return None if text.lower() in ("", "none") else text


def _parse_etas(text: str) -> tuple[float, ...]:
    values = tuple(float(t) for t in text.split(",") if t.strip())
    if not values:
        raise ValueError("etas needs at least one value")
    return values


def _parse_format(text: str) -> str | None:
    value = _parse_optional_str(text)
    if value not in (None, "csv", "json"):
        raise ValueError(f"output_format must be csv or json, got {text!r}")
    return value


_PARSERS = {
    **{k: float for k in _NOISE_KEYS},
    "n_links": int,
    "trials": int,
    "seed": int,
    "table1_convention": _parse_bool,
    "placement": str.strip,
    "workers": int,
    "etas": _parse_etas,
    "output_format": _parse_format,
    "output_path": _parse_optional_str,
    "event_log": _parse_optional_str,
    "round_one_figure": _parse_bool,
    "check": _parse_bool,
}


def _parse_value(key: str, text: str, where: str):
    if key not in _PARSERS:
        raise ConfigError(f"unknown key {key!r}", where)
    try:
        value = _PARSERS[key](text.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse {key}: {exc}", where) from None
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"{key} must be finite", where)
    return value


def parse_lines(lines, source: str) -> dict[str, tuple[object, str]]:
    """Parse ``key = value`` lines into ``{key: (value, location)}``."""
    out: dict[str, tuple[object, str]] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", where)
        key, text = (part.strip() for part in line.split("=", 1))
        out[key] = (_parse_value(key, text, where), where)
    return out


def parse_config(subcommand: str, path: str | None = None, overrides=()) -> RunConfig:
    """Merge defaults, an optional config file and ``key=value`` overrides.

    Raises :class:`ConfigError` with a ``file:line`` (or ``--set:N``) location on
    unknown keys, unparseable values and out-of-range parameters.
    """
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    merged: dict[str, tuple[object, str | None]] = {k: (v, None) for k, v in DEFAULTS.items()}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", path) from None
        merged.update(parse_lines(text.splitlines(), path))
    merged.update(parse_lines(overrides, "--set"))

    values = {k: v for k, (v, _) in merged.items()}
    where = {k: w for k, (_, w) in merged.items()}

    for key in _NOISE_KEYS:
        if not 0.0 <= values[key] <= 1.0:
            raise ConfigError(f"{key} = {values[key]} is outside [0, 1]", where[key])
    for eta in values["etas"]:
        if not 0.0 <= eta <= 1.0:
            raise ConfigError(f"etas entry {eta} is outside [0, 1]", where["etas"])
    for key, low in (("n_links", 1), ("trials", 1), ("workers", 1)):
        if values[key] < low:
            raise ConfigError(f"{key} must be >= {low}, got {values[key]}", where[key])
    if values["placement"] not in ("midpoint", "left", "right"):
        raise ConfigError(f"placement must be midpoint, left or right, got {values['placement']!r}", where["placement"])

    seed = values["seed"]
    if seed is None:
        env = os.environ.get(SEED_ENV)
        if env is not None:
            try:
                seed = int(env)
            except ValueError:
                raise ConfigError(f"cannot parse seed {env!r}", f"${SEED_ENV}") from None
            where["seed"] = f"${SEED_ENV}"
        else:
            seed = 0
    if seed < 0:
        raise ConfigError(f"seed must be >= 0, got {seed}", where["seed"])

    return RunConfig(
        subcommand=subcommand,
        params=NoiseParams(**{k: values[k] for k in _NOISE_KEYS}),
        chain={
            "n_links": values["n_links"],
            "trials": values["trials"],
            "seed": seed,
            "table1_convention": values["table1_convention"],
            "placement": values["placement"],
        },
        output_format=values["output_format"],
        output_path=values["output_path"],
        workers=values["workers"],
        etas=values["etas"],
        event_log=values["event_log"],
        round_one_figure=values["round_one_figure"],
        check=values["check"],
    )


# ---------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------
def _fmt(x: float) -> str:
    return f"{x:.9g}"


def _emit(text: str, config: RunConfig, out) -> None:
    if config.output_path:
        with open(config.output_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)


def _json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False, default=_json_default) + "\n"


def _json_default(x):
    raise TypeError(f"not JSON serialisable: {type(x).__name__}")


def _finite(x: float) -> float | None:
    return x if math.isfinite(x) else None


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def cmd_analytic(config: RunConfig, out, err) -> int:
    p = config.params
    pur = {c: analytics.p_pur(p, include_qnd=(c == analytics.WITH_QND)) for c in analytics.CONVENTIONS}
    swap = analytics.p_swap(p.eta)
    n_pur = {c: _finite(1 / v) if v else None for c, v in pur.items()}
    n_swap = 1 / swap if swap else None
    n_total = {c: 2 * v * n_swap if v is not None and n_swap is not None else None for c, v in n_pur.items()}
    if (config.output_format or "json") == "json":
        payload = {
            "schema": ANALYTIC_SCHEMA,
            "params": asdict(p),
            "p_pur": pur,
            "p_swap": swap,
            "n_pur": n_pur,
            "n_swap": n_swap,
            "n_total": n_total,
        }
        _emit(_json(payload), config, out)
    else:
        rows = [
            (c, _fmt(pur[c]), _fmt(swap), "" if n_pur[c] is None else _fmt(n_pur[c]),
             "" if n_swap is None else _fmt(n_swap), "" if n_total[c] is None else _fmt(n_total[c]))
            for c in analytics.CONVENTIONS
        ]
        _emit(_csv(("convention", "p_pur", "p_swap", "n_pur", "n_swap", "n_total"), rows), config, out)
    return EXIT_OK


def table1_rows(config: RunConfig) -> list[analytics.Table1Row]:
    """Both conventions, Table-1 convention first."""
    return [
        *analytics.table1(config.params, config.etas, include_qnd=False),
        *analytics.table1(config.params, config.etas, include_qnd=True),
    ]


def cmd_table1(config: RunConfig, out, err) -> int:
    rows = table1_rows(config)
    shape = analytics.round_to_one_figure if config.round_one_figure else (lambda x: x)
    if (config.output_format or "csv") == "csv":
        body = [
            (_fmt(r.eta), _fmt(shape(r.n_pur)), _fmt(shape(r.n_swap)), _fmt(shape(r.n_total)), r.convention)
            for r in rows
        ]
        _emit(_csv(TABLE1_COLUMNS, body), config, out)
        for r in rows:
            note = analytics.annotate(r)
            if note:
                err.write(f"note: eta={_fmt(r.eta)} {r.convention}: {note}\n")
    else:
        payload = {
            "schema": TABLE1_SCHEMA,
            "round_one_figure": config.round_one_figure,
            "rows": [
                {
                    "eta": r.eta,
                    "n_pur": _finite(shape(r.n_pur)),
                    "n_swap": _finite(shape(r.n_swap)),
                    "n_total": _finite(shape(r.n_total)),
                    "convention": r.convention,
                    "note": analytics.annotate(r),
                }
                for r in rows
            ],
        }
        _emit(_json(payload), config, out)
    return EXIT_OK


def verify_cnot_lines(tol: float = 1e-12) -> tuple[list[str], bool]:
    """Truth table of the heralded CNOT from exhaustive enumeration at unit efficiency."""
    reg = ModeRegistry([("c", protocol.FREQ_A), ("t", protocol.FREQ_B)])
    lines, ok = [], True
    for x, y in itertools.product("HV", "HV"):
        inp = FockState(reg, {_occ(x, y): 1.0})
        expect = FockState(reg, {_occ(x, y if x == "H" else _flip(y)): 1.0})
        branches = gates.heralded_cnot_branches(inp, "c", "t", gates.GunParams(), 1.0)
        acc = math.fsum(b.branch_probability for b in branches if b.success)
        fids = [fidelity(b.post_state.normalized(), expect) for b in branches if b.success]
        worst = min(fids) if fids else 0.0
        good = abs(acc - gates.P_CNOT) <= tol and worst >= 1 - tol
        ok &= good
        out_label = x + (y if x == "H" else _flip(y))
        lines.append(f"{x}{y} -> {out_label} acceptance={acc:.12f} fidelity={worst:.12f} {'ok' if good else 'FAIL'}")
    return lines, ok


def _flip(p: str) -> str:
    return "V" if p == "H" else "H"


def _occ(x: str, y: str) -> tuple[int, int, int, int]:
    return (int(x == "H"), int(x == "V"), int(y == "H"), int(y == "V"))


def cmd_verify_cnot(config: RunConfig, out, err) -> int:
    lines, ok = verify_cnot_lines()
    out.write("\n".join(lines) + "\n")
    out.write(f"verify-cnot: {'PASS' if ok else 'FAIL'}\n")
    return EXIT_OK if ok else EXIT_FAILED


def verify_pdc_lines(tol: float = 1e-12) -> tuple[list[str], bool]:
    """Coefficient, sector-weight and su(1,1) checks of the down-converter state."""
    lines, ok = [], True
    reg = ModeRegistry([("a", "w0"), ("b", "w0")])
    for eps in (0.1, 0.3, 0.2 + 0.1j):
        params = sources.PdcParams(eps, n_max=3)
        lit = sources.pdc_sector_coefficients(params, "literal")
        want = [eps**n / math.sqrt(math.factorial(n) * math.factorial(n + 1)) for n in range(4)]
        err_lit = max(abs(a - b) for a, b in zip(lit, want))
        state = sources.pdc_state(reg, params, normalize=False)
        probs = sources.pair_sector_probabilities(state, 3)
        x = abs(eps) ** 2
        closed = [(n + 1) * x**n * (1 - x) ** 2 for n in range(4)]
        err_exact = max(abs(a - b) for a, b in zip(probs, closed))
        good = err_lit <= tol and err_exact <= tol
        ok &= good
        lines.append(
            f"eps={eps} literal_coeff_err={err_lit:.3e} exact_sector_err={err_exact:.3e} {'ok' if good else 'FAIL'}"
        )
    rep = sources.su11_residuals(reg, n_max=4)
    good = rep.max_lowering_raising < tol and rep.max_zero_raising < tol
    ok &= good
    lines.append(
        f"su11 kets={len(rep.entries)} [L-,L+]-2L0={rep.max_lowering_raising:.3e} "
        f"[L0,L+]-L+={rep.max_zero_raising:.3e} {'ok' if good else 'FAIL'}"
    )
    return lines, ok


def cmd_verify_pdc(config: RunConfig, out, err) -> int:
    lines, ok = verify_pdc_lines()
    out.write("\n".join(lines) + "\n")
    out.write(f"verify-pdc: {'PASS' if ok else 'FAIL'}\n")
    return EXIT_OK if ok else EXIT_FAILED


def verify_bell_lines(tol: float = 1e-12) -> tuple[list[str], bool]:
    """Partial Bell analyzer on the four Bell states at unit efficiency."""
    reg = ModeRegistry([("a", "w1"), ("b", "w1")])
    expected = {
        sources.BellKind.PSI_PLUS: gates.PSI_PLUS,
        sources.BellKind.PSI_MINUS: gates.PSI_MINUS,
        sources.BellKind.PHI_PLUS: gates.FAIL,
        sources.BellKind.PHI_MINUS: gates.FAIL,
    }
    lines, ok, total = [], True, 0.0
    for kind, verdict in expected.items():
        probs = gates.outcome_probabilities(gates.bell_analyzer_branches(sources.bell_state(reg, "a", "b", kind), "a", "b", 1.0))
        hit = probs.get(verdict, 0.0)
        total += 1.0 - probs.get(gates.FAIL, 0.0)
        good = abs(hit - 1.0) <= tol
        ok &= good
        lines.append(f"{kind.value} -> {verdict} probability={hit:.12f} {'ok' if good else 'FAIL'}")
    uniform = total / 4
    good = abs(uniform - 0.5) <= tol
    ok &= good
    lines.append(f"uniform success={uniform:.12f} {'ok' if good else 'FAIL'}")
    return lines, ok


def cmd_verify_bell(config: RunConfig, out, err) -> int:
    lines, ok = verify_bell_lines()
    out.write("\n".join(lines) + "\n")
    out.write(f"verify-bell: {'PASS' if ok else 'FAIL'}\n")
    return EXIT_OK if ok else EXIT_FAILED


def cmd_simulate(config: RunConfig, out, err) -> int:
    events: list | None = [] if config.event_log else None
    report = protocol.run_chain(config.chain_config(), workers=config.workers, event_sink=events)
    _emit(_json(report.to_dict()), config, out)
    if config.event_log:
        with open(config.event_log, "w", encoding="utf-8", newline="") as fh:
            fh.write(protocol.format_event_log(events))
    if config.check and not (report.within_3_sigma and report.causality_ok):
        err.write(f"simulate: frequency {report.success_frequency:.6g} vs analytic "
                  f"{report.analytic_success_probability:.6g} (z = {report.z_score:.3g})\n")
        return EXIT_FAILED
    return EXIT_OK


def cmd_resources(config: RunConfig, out, err) -> int:
    n = config.chain["n_links"]
    kinds = [("source", analytics.SOURCE_TALLY), ("cnot", analytics.CNOT_TALLY), ("qnd", analytics.QND_TALLY),
             ("purifier", analytics.PURIFIER_TALLY), ("swapper", analytics.SWAPPER_TALLY),
             (f"chain[{n}]", analytics.tally_resources("chain", n))]
    if (config.output_format or "csv") == "csv":
        _emit(_csv(RESOURCE_COLUMNS, [(k, t.guns, t.detectors) for k, t in kinds]), config, out)
    else:
        exp = {
            c: asdict(analytics.expected_components(config.params, include_qnd=(c == analytics.WITH_QND)))
            for c in analytics.CONVENTIONS
        }
        payload = {
            "schema": RESOURCES_SCHEMA,
            "n_links": n,
            "tallies": {k: {"guns": t.guns, "detectors": t.detectors} for k, t in kinds},
            "expected_components": {c: {k: _finite(v) for k, v in d.items()} for c, d in exp.items()},
        }
        _emit(_json(payload), config, out)
    return EXIT_OK


_COMMANDS = {
    "analytic": cmd_analytic,
    "table1": cmd_table1,
    "verify-cnot": cmd_verify_cnot,
    "verify-pdc": cmd_verify_pdc,
    "verify-bell": cmd_verify_bell,
    "simulate": cmd_simulate,
    "resources": cmd_resources,
}


def run(config: RunConfig, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    return _COMMANDS[config.subcommand](config, out, err)


# ---------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------
class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qrepeater", description="Linear-optics quantum repeater simulator.")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", "-c", help="key = value configuration file")
    parser.add_argument("--set", "-s", action="append", default=[], metavar="KEY=VALUE", help="override one key (repeatable)")
    parser.add_argument("--format", dest="output_format", choices=("csv", "json"))
    parser.add_argument("--output", "-o", dest="output_path", help="write the report here instead of stdout")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--event-log", dest="event_log", help="write the herald event log (simulate)")
    parser.add_argument("--round-one-figure", action="store_true", help="one significant figure in table1")
    parser.add_argument("--check", action="store_true", help="simulate exits 1 outside the 3-sigma band")
    return parser


def main(argv=None, out=None, err=None) -> int:
    err = sys.stderr if err is None else err
    args = build_parser().parse_args(argv)
    overrides = list(args.set)
    for key in ("output_format", "output_path", "seed", "trials", "workers", "event_log"):
        value = getattr(args, key)
        if value is not None:
            overrides.append(f"{key}={value}")
    for key in ("round_one_figure", "check"):
        if getattr(args, key):
            overrides.append(f"{key}=true")
    try:
        config = parse_config(args.subcommand, args.config, overrides)
        return run(config, out, err)
    except ConfigError as exc:
        err.write(f"qrepeater: config error: {exc}\n")
        return EXIT_CONFIG
    except (RepeaterError, OSError) as exc:
        err.write(f"qrepeater: error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
