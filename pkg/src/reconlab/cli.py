"""Command-line experiment driver.

Every subcommand reads an optional flat TOML file (``--config``) whose keys
match the long flag names (dashes or underscores), applies flag overrides,
validates the result and writes CSV files into ``--out``.  Exit status: 0 when
all assertions pass, 1 on an assertion failure or a numerical error, 2 on an
invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import coherence, germ as germs, mollifier, quasinorm, reconstruct as rec, sewing
from .errors import ConfigError, ReconError
from .fields import MultiscaleField
from .grid import DyadicGrid, sample, test_dictionary

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

COMMANDS = ("moments", "coherence", "norms", "reconstruct", "sewing", "verify", "report")


@dataclass
class ExperimentConfig:
    command: str = "report"
    n_max: int = 12
    r: float = 1.5
    bump: str = "exp"
    germ: str = "taylor:sin:1"
    kind: str = "besov"
    p: float = math.inf
    q: float = math.inf
    gamma: float = 0.5
    nu: float | None = None
    k_min: int = 3
    k_max: int = 6
    l_max: int = 3
    L: int = 6
    n_stop: int | None = None
    mode: str = "positive"
    fixture: str = "young"
    eta: float = 1.5
    field: str | None = None
    out: str = "out"
    seed: int = 0

    def resolved(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: (str(v) if isinstance(v, float) and math.isinf(v) else v) for k, v in d.items()}


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _coerce(name, value):
    ftype = _FIELDS[name].type
    if value is None:
        return None
    try:
        if "int" in ftype and "float" not in ftype:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if "float" in ftype:
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"field '{name}': cannot interpret {value!r} as {ftype}") from None


def load_config(path: str | None, overrides: dict, command: str) -> ExperimentConfig:
    values = {}
    if path:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"field 'config': cannot read {path}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"field 'config': invalid TOML in {path}: {exc}") from None
        for key, val in raw.items():
            name = key.replace("-", "_")
            if name not in _FIELDS:
                raise ConfigError(f"field '{key}': unknown configuration key")
            if isinstance(val, dict):
                raise ConfigError(f"field '{key}': configuration must be flat")
            values[name] = _coerce(name, val)
    for name, val in overrides.items():
        if val is not None:
            values[name] = _coerce(name, val)
    values["command"] = command
    cfg = ExperimentConfig(**values)
    validate(cfg)
    return cfg


def _parse_germ(spec: str):
    parts = spec.split(":")
    head = parts[0]
    if head == "constant" and len(parts) == 2 and parts[1] in ("sin", "cos"):
        return head, parts[1:]
    if head == "taylor" and len(parts) == 3 and parts[1] in ("sin", "cos") and parts[2].isdigit():
        return head, [parts[1], int(parts[2])]
    if head == "incoherent" and len(parts) == 2 and parts[1].lstrip("-").isdigit():
        return head, [int(parts[1])]
    if head == "sewing" and len(parts) == 2 and parts[1] in ("young", "additive", "square"):
        return head, parts[1:]
    raise ConfigError(
        f"field 'germ': {spec!r} is not one of constant:sin|cos, taylor:sin|cos:M, "
        "incoherent:SEED, sewing:young|additive|square")


def _spec_from(cfg: ExperimentConfig) -> quasinorm.QuasinormSpec:
    kind = cfg.kind
    if kind == "besov":
        kind = quasinorm.BESOV_HIGH if cfg.p >= 1 else quasinorm.BESOV_LOW
    elif kind in ("tl", "triebel-lizorkin"):
        kind = quasinorm.TRIEBEL_LIZORKIN
    elif kind in ("besov-high", "besov-low"):
        kind = kind.replace("-", "_")
    if kind == quasinorm.BESOV_LOW:
        exponent = cfg.nu if cfg.nu is not None else cfg.gamma
    else:
        exponent = cfg.gamma
    try:
        return quasinorm.QuasinormSpec(kind, cfg.p, cfg.q, exponent)
    except ValueError as exc:
        raise ConfigError(f"field 'kind/p/q/gamma': {exc}") from None


def validate(cfg: ExperimentConfig):
    if cfg.command not in COMMANDS:
        raise ConfigError(f"field 'command': unknown command {cfg.command!r}")
    if not 8 <= cfg.n_max <= 20:
        raise ConfigError(f"field 'n_max': must lie in 8..20, got {cfg.n_max}")
    if not cfg.r > 0:
        raise ConfigError(f"field 'r': must be positive, got {cfg.r}")
    if math.ceil(cfg.r) - 1 > mollifier.MAX_R_TILDE:
        raise ConfigError(f"field 'r': r_tilde above {mollifier.MAX_R_TILDE} is not supported")
    if cfg.bump not in ("exp", "poly"):
        raise ConfigError(f"field 'bump': must be 'exp' or 'poly', got {cfg.bump!r}")
    if cfg.mode not in (rec.POSITIVE, rec.NEGATIVE):
        raise ConfigError(f"field 'mode': must be 'positive' or 'negative', got {cfg.mode!r}")
    if not 0 <= cfg.k_min <= cfg.k_max:
        raise ConfigError(f"field 'k_min': need 0 <= k_min <= k_max, got {cfg.k_min}..{cfg.k_max}")
    n_stop = cfg.n_max - 4 if cfg.n_stop is None else cfg.n_stop
    if not 1 <= n_stop <= cfg.n_max - 4:
        raise ConfigError(f"field 'n_stop': must lie in 1..n_max-4 = {cfg.n_max - 4}, got {n_stop}")
    if cfg.l_max < 2:
        raise ConfigError("field 'l_max': need at least three values of l (l_max >= 2)")
    if cfg.L < 1:
        raise ConfigError(f"field 'L': must be positive, got {cfg.L}")
    if cfg.fixture not in ("young", "additive", "square"):
        raise ConfigError(f"field 'fixture': unknown fixture {cfg.fixture!r}")
    _parse_germ(cfg.germ)
    if cfg.command == "coherence" and cfg.k_max + cfg.L > cfg.n_max - 2:
        raise ConfigError(f"field 'L': k_max + L = {cfg.k_max + cfg.L} exceeds n_max - 2")
    if cfg.command in ("reconstruct", "verify") and cfg.k_max > n_stop - 2:
        raise ConfigError(f"field 'k_max': must not exceed n_stop - 2 = {n_stop - 2}")
    if cfg.command == "verify" and cfg.k_max + cfg.l_max > cfg.n_max - 2:
        raise ConfigError(f"field 'l_max': k_max + l_max exceeds n_max - 2 = {cfg.n_max - 2}")
    if cfg.command in ("norms", "verify"):
        _spec_from(cfg)
    if cfg.command == "norms" and not cfg.field:
        raise ConfigError("field 'field': the norms command needs an input CSV")
    if cfg.command == "report" and cfg.n_max < 10:
        raise ConfigError(f"field 'n_max': the report needs n_max >= 10, got {cfg.n_max}")
    if cfg.command == "sewing":
        if not cfg.eta > 1:
            raise ConfigError(f"field 'eta': sewing needs eta > 1, got {cfg.eta}")
        if not cfg.r > 1:
            raise ConfigError(f"field 'r': sewing needs r > 1, got {cfg.r}")
        if cfg.p < 1:
            raise ConfigError(f"field 'p': sewing needs p >= 1, got {cfg.p}")


# ---------------------------------------------------------------- output


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(cfg: ExperimentConfig, name: str, header, rows) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, name)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("# config: " + json.dumps(cfg.resolved(), sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_field_csv(path: str, grid: DyadicGrid) -> MultiscaleField:
    """Read ``k, x, value`` rows (comment lines start with ``#``)."""
    levels = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
    except OSError as exc:
        raise ConfigError(f"field 'field': cannot read {path}: {exc}") from None
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or not {"k", "x", "value"} <= set(reader.fieldnames):
        raise ConfigError("field 'field': CSV needs columns k, x, value")
    for row in reader:
        levels.setdefault(int(row["k"]), []).append((float(row["x"]), float(row["value"])))
    out, strides = {}, {}
    for k, pts in levels.items():
        pts.sort()
        m = len(pts)
        if m == 0 or grid.size % m:
            raise ConfigError(f"field 'field': level {k} has {m} points, not a divisor of {grid.size}")
        out[k] = np.array([v for _, v in pts])
        strides[k] = grid.size // m
    return MultiscaleField.from_levels(grid, out, strides, meta=os.path.basename(path))


# ---------------------------------------------------------------- fixtures


def build_germ(cfg: ExperimentConfig, grid: DyadicGrid):
    head, args = _parse_germ(cfg.germ)
    fn = {"sin": germs.sine(1), "cos": germs.cosine(1)}
    if head == "constant":
        f = fn[args[0]]
        return germs.constant_germ(sample(grid, f))
    if head == "taylor":
        return germs.taylor_germ(grid, fn[args[0]], args[1])
    if head == "incoherent":
        return germs.incoherent_germ(grid, args[0])
    return germs.sewing_germ(grid, build_process(args[0]))


def build_process(name: str):
    if name == "young":
        return germs.young_process()
    if name == "additive":
        return germs.additive_process(germs.sine(1))
    return germs.square_process()


def _target(cfg, grid):
    head, args = _parse_germ(cfg.germ)
    if head in ("constant", "taylor"):
        return {"sin": germs.sine(1), "cos": germs.cosine(1)}[args[0]](grid.points)
    return None


# ---------------------------------------------------------------- commands


def cmd_moments(cfg):
    grid = DyadicGrid(cfg.n_max)
    stack = mollifier.build_stack(grid, cfg.r, cfg.bump)
    rows = stack.moment_table()
    write_csv(cfg, "moments.csv", ["alpha", "phi", "rho", "psi"], rows)
    ok = abs(rows[0][1] - 1.0) <= 1e-10 and all(abs(r[1]) <= 1e-8 for r in rows[1:stack.r_tilde + 1])
    print(f"moments: r_tilde={stack.r_tilde} coefficients={[float(c) for c in stack.coefficients]} "
          f"{'pass' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_coherence(cfg):
    grid = DyadicGrid(cfg.n_max)
    stack = mollifier.build_stack(grid, cfg.r, cfg.bump)
    g = build_germ(cfg, grid)
    report = coherence.h_field(g, stack, cfg.r, range(cfg.k_min, cfg.k_max + 1), cfg.L)
    rows = []
    for (k, x, v), (_, _, t), (_, _, ratio) in zip(report.field.rows(), report.tail_estimate.rows(),
                                                   report.ratios.rows()):
        rows.append((k, x, v, t, ratio > coherence.DECAY_RATIO))
    write_csv(cfg, "coherence.csv", ["k", "x", "value", "tail", "flag"], rows)
    print(f"coherence: max H={report.field.max():.6g} divergence_flag={report.divergence_flag}")
    return 0


def cmd_norms(cfg):
    grid = DyadicGrid(cfg.n_max)
    spec = _spec_from(cfg)
    H = read_field_csv(cfg.field, grid)
    value = quasinorm.apply(spec, H)
    write_csv(cfg, "norms.csv", ["kind", "p", "q", "exponent", "value"],
              [(spec.kind, spec.p, spec.q, spec.gamma_or_nu, value)])
    print(repr(value))
    return 0


def _slope(ks, values):
    ks = np.asarray(ks, dtype=float)
    v = np.asarray(values, dtype=float)
    if np.any(v <= 0) or ks.size < 2:
        return math.nan
    return float(-np.polyfit(ks, np.log2(v), 1)[0])


def cmd_reconstruct(cfg):
    grid = DyadicGrid(cfg.n_max)
    stack = mollifier.build_stack(grid, cfg.r, cfg.bump)
    g = build_germ(cfg, grid)
    result = rec.reconstruct(g, stack, cfg.n_stop, cfg.mode)
    target = _target(cfg, grid)
    f_rows = [(x, v, "" if target is None else t)
              for x, v, t in zip(grid.points, result.f.values,
                                 np.zeros(grid.size) if target is None else target)]
    write_csv(cfg, "f.csv", ["x", "f", "target"], f_rows)
    ks = list(range(cfg.k_min, cfg.k_max + 1))
    err = rec.error_field(result, g, test_dictionary(grid, cfg.r), ks)
    write_csv(cfg, "delta.csv", ["k", "x", "value"], err.delta.rows())
    sups = [float(err.delta.level(k).max()) for k in ks]
    slope = _slope(ks, sups)
    sup_err = math.nan if target is None else float(np.max(np.abs(result.f.values - target)))
    write_csv(cfg, "summary.csv", ["quantity", "value"],
              [("n_stop", result.n_stop), ("mode", result.mode), ("sup_error", sup_err),
               ("last_increment", result.last_increment), ("delta_slope", slope)]
              + [(f"sup_delta_k{k}", s) for k, s in zip(ks, sups)])
    print(f"reconstruct: n_stop={result.n_stop} sup_error={sup_err:.3e} delta_slope={slope:.3f}")
    return 0


def cmd_sewing(cfg):
    grid = DyadicGrid(cfg.n_max)
    stack = mollifier.build_stack(grid, cfg.r, cfg.bump)
    A = build_process(cfg.fixture)
    path = sewing.sew(A, cfg.eta, cfg.p, cfg.q, cfg.r, stack, n_stop=cfg.n_stop)
    oracle = sewing.sew(A, cfg.eta, cfg.p, cfg.q, cfg.r, stack, route=sewing.ORACLE)
    write_csv(cfg, "g.csv", ["x", "g_reconstruction", "g_oracle"],
              zip(grid.points, path.values, oracle.values))
    ks = range(max(1, cfg.k_min), cfg.k_max + 1)
    norms = sewing.sewing_bound(A, path, cfg.eta, cfg.p, cfg.q, ks)
    gap = float(np.max(np.abs(path.values - oracle.values)))
    ok = norms.ratio <= sewing.C_SEW and gap <= 1e-5
    write_csv(cfg, "sewing_norms.csv", ["quantity", "value"],
              [("B_eta(delta g - A)", norms.B_eta), ("Bbar_eta(delta A)", norms.Bbar_eta),
               ("ratio", norms.ratio), ("C_sew", sewing.C_SEW), ("route_gap", gap), ("pass", ok)])
    print(f"sewing: ratio={norms.ratio:.4g} (C_sew={sewing.C_SEW:g}) route_gap={gap:.3e} "
          f"{'pass' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_verify(cfg):
    grid = DyadicGrid(cfg.n_max)
    stack = mollifier.build_stack(grid, cfg.r, cfg.bump)
    g = build_germ(cfg, grid)
    spec = _spec_from(cfg)
    report = rec.verify_theorem_2_1(g, stack, spec, cfg.r, range(cfg.k_min, cfg.k_max + 1),
                                    range(0, cfg.l_max + 1), cfg.n_stop)
    rows = [("alpha", report.alpha), ("A", report.A), ("N_delta", report.delta_norm),
            ("ratio", report.ratio), ("C_thm", report.C_thm), ("floor", report.floor),
            ("pass", report.passed)]
    write_csv(cfg, "verify.csv", ["quantity", "value"], rows)
    keys = list(report.chain[0])
    write_csv(cfg, "verify_chain.csv", keys, ([c[k] for k in keys] for c in report.chain))
    print(f"verify: {spec.kind} alpha={report.alpha:.3f} A={report.A:.4g} "
          f"N[Delta]={report.delta_norm:.4g} ratio={report.ratio:.4g} "
          f"{'pass' if report.passed else 'FAIL'}")
    return 0 if report.passed else 1


def cmd_report(cfg):
    """Regression report: every pinned constant against its observed value."""
    grid = DyadicGrid(cfg.n_max)
    stack = mollifier.build_stack(grid, 1.5, cfg.bump)
    taylor = germs.taylor_germ(grid, germs.sine(1), 1)
    ks = range(3, min(6, cfg.n_max - 6) + 1)
    rows = []
    specs = [quasinorm.QuasinormSpec(quasinorm.BESOV_HIGH, math.inf, math.inf, 0.5),
             quasinorm.QuasinormSpec(quasinorm.BESOV_HIGH, 2, 2, 0.5),
             quasinorm.QuasinormSpec(quasinorm.TRIEBEL_LIZORKIN, 2, 2, 0.5),
             quasinorm.QuasinormSpec(quasinorm.BESOV_LOW, 0.5, 1, 1.5)]
    for spec in specs:
        r = rec.verify_theorem_2_1(taylor, stack, spec, 1.5, ks, range(0, 4))
        rows.append((f"C_thm {spec.kind} p={spec.p:g} q={spec.q:g}", r.ratio, rec.C_THM,
                     r.ratio <= rec.C_THM))
    rng = np.random.default_rng(cfg.seed)
    for spec in specs:
        worst = 0.0
        for _ in range(20):
            H = MultiscaleField.from_function(
                grid, range(2, 9), lambda k, x: rng.random(x.size) ** rng.uniform(1, 6))
            for l in range(5):
                worst = max(worst, quasinorm.scaling_check(spec, H, l).ratio)
        rows.append((f"C_scaling {spec.kind} p={spec.p:g}", worst, quasinorm.C_SCALING,
                     worst <= quasinorm.C_SCALING))
    H = coherence.h_field(taylor, stack, 1.5, ks, 4).field
    result = rec.reconstruct(taylor, stack)
    delta = rec.error_field(result, taylor, test_dictionary(grid, 1.5), ks).delta
    worst = max(float(np.max(delta.level(k) / H.level(k))) for k in ks)
    rows.append(("C_rec taylor sin m=1", worst, rec.C_REC, worst <= rec.C_REC))
    sew_stack = mollifier.build_stack(grid, 2.5, cfg.bump)
    A = germs.young_process()
    path = sewing.sew(A, 1.5, 2, math.inf, 2.5, sew_stack)
    norms = sewing.sewing_bound(A, path, 1.5, 2, math.inf, range(2, 8))
    rows.append(("C_sew young", norms.ratio, sewing.C_SEW, norms.ratio <= sewing.C_SEW))
    write_csv(cfg, "report.csv", ["constant", "observed", "pinned", "pass"], rows)
    for name, obs, pin, ok in rows:
        print(f"{'pass' if ok else 'FAIL'}  {name}: observed {obs:.4g} <= {pin:g}")
    return 0 if all(r[3] for r in rows) else 1


HANDLERS = {
    "moments": cmd_moments,
    "coherence": cmd_coherence,
    "norms": cmd_norms,
    "reconstruct": cmd_reconstruct,
    "sewing": cmd_sewing,
    "verify": cmd_verify,
    "report": cmd_report,
}


def _float(s):
    try:
        return float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reconlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config")
        p.add_argument("--out")
        p.add_argument("--seed", type=int)
        p.add_argument("--nmax", "--n-max", dest="n_max", type=int)
        p.add_argument("--r", type=_float)
        p.add_argument("--bump")
        p.add_argument("--germ")
        p.add_argument("--kind")
        p.add_argument("--p", type=_float)
        p.add_argument("--q", type=_float)
        p.add_argument("--gamma", type=_float)
        p.add_argument("--nu", type=_float)
        p.add_argument("--k-min", dest="k_min", type=int)
        p.add_argument("--k-max", dest="k_max", type=int)
        p.add_argument("--l-max", dest="l_max", type=int)
        p.add_argument("--L", dest="L", type=int)
        p.add_argument("--n-stop", dest="n_stop", type=int)
        p.add_argument("--mode")
        p.add_argument("--fixture")
        p.add_argument("--eta", type=_float)
        p.add_argument("--field")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = load_config(args.config, overrides, args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return HANDLERS[cfg.command](cfg)
    except ReconError as exc:
        tb = exc.__traceback__
        while tb.tb_next is not None:
            tb = tb.tb_next
        origin = f"{tb.tb_frame.f_globals.get('__name__', '?')}.{tb.tb_frame.f_code.co_name}"
        print(f"error in {cfg.command} [{origin}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
