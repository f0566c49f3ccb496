"""Command-line experiment driver.

Subcommands
-----------
``corr-gen``
    Draw a correlation set and write it in the binary layout of
    :func:`secmimo.channel.save_correlation_set`.
``run``
    Sweep one parameter for a list of designs and write a CSV.
``reproduce <target>``
    Preset sweeps: ``table1`` and ``fig4`` .. ``fig8``.
``optimize``
    Closed-form power split, feasibility bound and design switch at one SNR.

Config files hold one ``key = value`` per line; ``#`` starts a comment.
System keys are the fields of :class:`secmimo.channel.SystemConfig` plus
``gamma_db``. Experiment keys are ``sweep_axis``, ``sweep_values``
(comma separated), ``designs`` (comma separated), ``evaluators``, ``p``,
``alpha`` and ``trials``. SNRs are given in dB on the command line and in
config files and converted to linear scale here; the library is linear only.

Exit codes: 0 success, 2 invalid input, 3 partial failure (a CSV with the
rows that could be computed is still written).
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from . import analysis
from .channel import SystemConfig, build_correlation_set, load_correlation_set, save_correlation_set
from .downlink import DesignChoice, PowerSplit
from .montecarlo import DataQualityError, make_setup, run_many
from .numerics import InvalidInputError
from .uplink import EmptyNullSpaceError, ns_project

COLUMNS = ("sweep_axis", "sweep_value", "design", "evaluator", "rate_user", "cap_eve", "rate_secrecy",
           "ci_halfwidth", "p", "q", "alpha", "beta", "seed")
AXES = ("gamma_db", "p", "P_E", "N_e", "alpha")
DESIGNS = ("naive_mf", "mf_an", "ns", "unified")
ALPHA_GRID = np.linspace(0.0, 1.0, 11)
FIGURE_TRIALS = 2000

_INT_KEYS = {"L", "K", "N_t", "N_e", "tau", "target_user", "quad_points", "trials"}
_STR_KEYS = {"corr_model", "sweep_axis", "designs", "evaluators", "sweep_values", "p", "alpha", "corr_file"}
_SYSTEM_KEYS = {f.name for f in fields(SystemConfig)} - {"gamma"}


class UsageError(InvalidInputError):
    """Bad command-line arguments or config file."""


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def fmt(x) -> str:
    """Nine significant digits, the CSV number format."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.9g}"


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines into a dict with typed values."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"line {n}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _SYSTEM_KEYS | _INT_KEYS | _STR_KEYS | {"gamma_db"}:
            raise UsageError(f"line {n}: unknown key {key!r}")
        try:
            if key in _INT_KEYS:
                out[key] = int(val)
            elif key in _STR_KEYS:
                out[key] = val
            else:
                out[key] = float(val)
        except ValueError:
            raise UsageError(f"line {n}: bad value {val!r} for {key}") from None
    return out


def load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            return parse_config_text(f.read())
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e}") from None


def system_config(values: dict, base: SystemConfig | None = None) -> SystemConfig:
    """``SystemConfig`` from parsed keys; ``gamma_db`` becomes linear ``gamma``."""
    kw = {k: v for k, v in values.items() if k in _SYSTEM_KEYS}
    if "gamma_db" in values:
        kw["gamma"] = float(db_to_linear(values["gamma_db"]))
    base = SystemConfig() if base is None else base
    return base.with_(**kw)


@dataclass
class ExperimentSpec:
    """One sweep: the axis, its values, the designs and the evaluators.

    ``p`` is ``"opt"`` (closed form for one eavesdropper antenna, grid search
    otherwise) or a number; ``alpha`` is ``"opt"`` (Monte Carlo search over
    an 11-point grid) or a number. ``labels`` optionally renames designs in
    the CSV.
    """

    config: SystemConfig
    axis: str
    values: list
    designs: list
    evaluators: tuple = ("asymptotic", "monte_carlo")
    trials: int = FIGURE_TRIALS
    seed: int = 0
    p: object = "opt"
    alpha: object = "opt"
    labels: dict = field(default_factory=dict)
    corr_file: str | None = None

    def validate(self) -> None:
        if self.axis not in AXES:
            raise UsageError(f"sweep axis must be one of {AXES}")
        if not self.values:
            raise UsageError("empty sweep")
        if not self.designs:
            raise UsageError("empty design list")
        bad = [d for d in self.designs if d not in DESIGNS]
        if bad:
            raise UsageError(f"unknown designs {bad}; choose from {DESIGNS}")
        if not self.evaluators or any(e not in ("asymptotic", "monte_carlo") for e in self.evaluators):
            raise UsageError("need at least one of asymptotic, monte_carlo")
        if self.trials < 1:
            raise UsageError("trials must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise UsageError("seed must be an unsigned 64-bit integer")
        for name, v in (("p", self.p), ("alpha", self.alpha)):
            if v != "opt" and not isinstance(v, (int, float)):
                raise UsageError(f"{name} must be 'opt' or a number")
        if self.axis == "N_e" and any(int(v) != v or v < 1 for v in self.values):
            raise UsageError("N_e values must be positive integers")


def _number_or_opt(v):
    if v is None or v == "opt":
        return "opt"
    try:
        return float(v)
    except ValueError:
        raise UsageError(f"expected 'opt' or a number, got {v!r}") from None


def spec_from_values(values: dict, seed: int, trials: int | None, evaluator: str | None) -> ExperimentSpec:
    cfg = system_config(values)
    axis = values.get("sweep_axis", "gamma_db")
    try:
        sweep = [float(s) for s in values.get("sweep_values", "").split(",") if s.strip()]
    except ValueError:
        raise UsageError("sweep_values must be comma-separated numbers") from None
    designs = [s.strip() for s in values.get("designs", "").split(",") if s.strip()]
    ev = evaluator or values.get("evaluators", "both")
    spec = ExperimentSpec(cfg, axis, sweep, designs, _evaluators(ev),
                          trials if trials is not None else values.get("trials", FIGURE_TRIALS), seed,
                          _number_or_opt(values.get("p")), _number_or_opt(values.get("alpha")),
                          corr_file=values.get("corr_file"))
    spec.validate()
    return spec


def _evaluators(name: str) -> tuple:
    table = {"asymptotic": ("asymptotic",), "mc": ("monte_carlo",), "monte_carlo": ("monte_carlo",),
             "both": ("asymptotic", "monte_carlo")}
    if name not in table:
        raise UsageError(f"unknown evaluator {name!r}")
    return table[name]


def _point(spec: ExperimentSpec, value: float):
    """Config, SNR and overrides for one sweep value."""
    cfg = spec.config
    gamma = cfg.gamma
    p, alpha = spec.p, spec.alpha
    if spec.axis == "gamma_db":
        gamma = float(db_to_linear(value))
    elif spec.axis == "P_E":
        cfg = cfg.with_(P_E=float(value))
    elif spec.axis == "N_e":
        cfg = cfg.with_(N_e=int(value))
    elif spec.axis == "p":
        p = float(value)
    elif spec.axis == "alpha":
        alpha = float(value)
    return cfg.with_(gamma=gamma), gamma, p, alpha


def best_mfan_split(config, corr, est, attack, terms, gamma, notify=None) -> PowerSplit:
    """Closed-form optimal split for one eavesdropper antenna, grid search otherwise."""
    if corr.N_e == 1:
        sat = analysis.single_antenna_terms(config, corr, est, attack, gamma, terms)
        return analysis.optimal_power_allocation(sat).split
    if notify:
        notify(f"N_e = {corr.N_e}: closed-form power split needs N_e = 1, using grid search")
    return analysis.grid_best_split(terms, gamma, config.K, config.N_t)[0]


def _row(spec, value, label, evaluator, res, design: DesignChoice):
    sp = design.split
    return {"sweep_axis": spec.axis, "sweep_value": value, "design": label, "evaluator": evaluator,
            "rate_user": res.rate_user, "cap_eve": res.cap_eve, "rate_secrecy": res.rate_secrecy,
            "ci_halfwidth": res.ci_halfwidth, "p": sp.p, "q": sp.q, "alpha": design.alpha,
            "beta": design.beta, "seed": spec.seed}


def run_experiment(spec: ExperimentSpec, workers: int = 1, log=None):
    """Evaluate every (sweep value, design, evaluator) combination.

    Returns ``(rows, failures)``; ``failures`` lists diagnostics for the
    combinations that could not be evaluated.
    """
    spec.validate()
    log = log or (lambda msg: None)
    rows, failures = [], []
    corr_cache = {}
    notified = set()

    def note(msg):
        if msg not in notified:
            notified.add(msg)
            log(msg)

    for value in spec.values:
        cfg, gamma, p_over, a_over = _point(spec, value)
        key = cfg.N_e
        if key not in corr_cache:
            if spec.corr_file:
                corr_cache[key] = load_correlation_set(spec.corr_file)
                corr_cache[key].validate(cfg)
            else:
                corr_cache[key] = build_correlation_set(cfg, spec.seed)
        corr = corr_cache[key]
        attack, est, terms = analysis.prepare(cfg, corr)
        K, N_t = cfg.K, cfg.N_t
        if p_over == "opt":
            split = best_mfan_split(cfg, corr, est, attack, terms, gamma, note)
        else:
            split = PowerSplit.from_p(p_over, K, N_t)
        ns, ns_err = None, None
        if any(d in ("ns", "unified") for d in spec.designs):
            try:
                ns = ns_project(corr, cfg)
            except EmptyNullSpaceError as e:
                ns_err = str(e)
        chosen = {}
        for d in spec.designs:
            if d == "naive_mf":
                chosen[d] = DesignChoice.naive_mf(K)
            elif d == "mf_an":
                chosen[d] = DesignChoice.mf_an(split)
            elif d == "ns":
                chosen[d] = DesignChoice.ns(K)
            elif a_over != "opt":
                chosen[d] = DesignChoice.unified(a_over, split)
        needs_ns = [d for d in spec.designs if d == "ns" or (d == "unified" and (a_over == "opt" or a_over < 1))]
        if ns_err:
            for d in needs_ns:
                failures.append(f"{spec.axis}={fmt(value)} {d}: {ns_err}")
                chosen.pop(d, None)
        label = lambda d: spec.labels.get(d, d)

        if "asymptotic" in spec.evaluators:
            for d, ch in chosen.items():
                if d in ("naive_mf", "mf_an"):
                    res = analysis.asymptotic_secrecy_rate(terms, ch.split, gamma)
                elif d == "ns":
                    res = analysis.ns_asymptotic_rate(cfg, corr, gamma=gamma, ns=ns)
                elif ch.alpha == 1.0:
                    res = analysis.asymptotic_secrecy_rate(terms, ch.split, gamma)
                else:
                    note("no large-array expression for the unified design with 0 < alpha < 1; "
                         "asymptotic rows skipped")
                    continue
                rows.append(_row(spec, value, label(d), "asymptotic", res, ch))

        if "monte_carlo" in spec.evaluators:
            mc_designs = dict(chosen)
            grid = []
            if "unified" in spec.designs and a_over == "opt" and not ns_err:
                grid = [DesignChoice.unified(a, split) for a in ALPHA_GRID]
            batch = list(mc_designs.values()) + grid
            if not batch:
                continue
            try:
                setup = make_setup(cfg, corr, spec.seed, need_ns=ns is not None, attack=attack, est=est, ns=ns)
                results = run_many(batch, gamma, spec.trials, spec.seed, setup, workers)
            except (DataQualityError, InvalidInputError) as e:
                failures.append(f"{spec.axis}={fmt(value)} monte_carlo: {e}")
                continue
            for (d, ch), res in zip(mc_designs.items(), results):
                rows.append(_row(spec, value, label(d), "monte_carlo", res, ch))
            if grid:
                gres = results[len(mc_designs):]
                i = int(np.argmax([r.rate_secrecy for r in gres]))
                rows.append(_row(spec, value, label("unified"), "monte_carlo", gres[i], grid[i]))
    return rows, failures


def sort_rows(rows):
    return sorted(rows, key=lambda r: (float(r["sweep_value"]), r["design"], r["evaluator"]))


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in sort_rows(rows):
        w.writerow([r[c] if isinstance(r[c], str) else fmt(r[c]) for c in COLUMNS])
    return buf.getvalue()


def write_text(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)


# Presets ---------------------------------------------------------------

def _secrecy(rows, design, evaluator="monte_carlo"):
    pts = sorted((float(r["sweep_value"]), float(r["rate_secrecy"]), float(r["ci_halfwidth"]))
                 for r in rows if r["design"] == design and r["evaluator"] == evaluator)
    return pts


def _check_table1(rows, cfg):
    pts = _secrecy(rows, "naive_mf")
    if len(pts) < 6:
        return False, "missing points"
    rate = dict((v, r) for v, r, _ in pts)
    best = max(pts, key=lambda t: t[1])[0]
    ok = rate[0.0] < 0.01 and -10 <= best <= -6 and 0.2 <= rate[-8.0] <= 0.6
    return ok, f"R(0 dB)={rate[0.0]:.4f}, argmax={best:g} dB, R(-8 dB)={rate[-8.0]:.4f}"


def _check_fig4(rows, cfg):
    worst = 0.0
    for d in {r["design"] for r in rows}:
        a = dict((v, r) for v, r, _ in _secrecy(rows, d, "asymptotic"))
        for v, r, _ in _secrecy(rows, d):
            if v in a:
                worst = max(worst, abs(r - a[v]) / max(a[v], 0.05))
    return worst < 0.25, f"max relative gap between Monte Carlo and large-array rate = {worst:.3f}"


def _check_fig5(rows, cfg):
    msgs, ok = [], True
    for d in sorted({r["design"] for r in rows}):
        pts = _secrecy(rows, d)
        if not pts:
            continue
        p_best = max(pts, key=lambda t: t[1])[0]
        msgs.append(f"{d}: best p={p_best:g}")
        ok &= p_best < 1.0 / cfg.K
    return ok, "; ".join(msgs) + " (more AN needed than naive MF)"


def _check_fig6(rows, cfg):
    uni = dict((v, r) for v, r, _ in _secrecy(rows, "unified"))
    if not uni:
        return False, "unified design not evaluated"
    ok = True
    for d in ("naive_mf", "mf_an", "ns"):
        for v, r, ci in _secrecy(rows, d):
            if v in uni and uni[v] < r - ci:
                ok = False
    return ok, "unified design at least as good as the others at every SNR"


def _check_fig7(rows, cfg):
    ns = _secrecy(rows, "ns")
    mf = dict((v, r) for v, r, _ in _secrecy(rows, "mf_an"))
    if not ns:
        return False, "NS design not evaluated"
    spread = max(r for _, r, _ in ns) - min(r for _, r, _ in ns)
    ci = max(c for _, _, c in ns)
    nsd = dict((v, r) for v, r, _ in ns)
    order = all(k in mf and k in nsd for k in (0.1, 1.0)) and mf[0.1] > nsd[0.1] and nsd[1.0] > mf[1.0]
    return spread < 2 * ci and order, (f"NS spread over P_E={spread:.4f} (2 CI={2 * ci:.4f}); "
                                       f"MF-AN better at P_E=0.1 and NS better at P_E=1: {order}")


def _check_fig8(rows, cfg):
    uni = _secrecy(rows, "unified")
    mf = _secrecy(rows, "mf_an")
    if not uni or not mf:
        return False, "unified or MF-AN design not evaluated"
    du = uni[0][1] - uni[-1][1]
    dm = mf[0][1] - mf[-1][1]
    return du <= max(dm, 0.0) + uni[-1][2], f"unified drop={du:.4f}, MF-AN drop={dm:.4f} over N_e"


def reproduce_spec(target: str, seed: int, trials: int | None, overrides: dict | None = None):
    """Preset experiment for ``target`` and its acceptance check."""
    base = system_config(overrides or {})
    t = FIGURE_TRIALS if trials is None else trials
    snr = list(range(-10, 21, 5))
    if target == "table1":
        cfg = system_config(overrides or {}, SystemConfig(P_E=0.5, corr_model="iid"))
        return ExperimentSpec(cfg, "gamma_db", [-10.0, -8.0, -6.0, -4.0, -2.0, 0.0], ["naive_mf"],
                              ("asymptotic", "monte_carlo"), t, seed), _check_table1
    if target == "fig4":
        specs = []
        for p in (0.05, 0.1, 0.16):
            specs.append(ExperimentSpec(base.with_(P_E=1.0), "gamma_db", [float(s) for s in snr], ["mf_an"],
                                        ("asymptotic", "monte_carlo"), t, seed, p=p,
                                        labels={"mf_an": f"mf_an_p{p:g}"}))
        return specs, _check_fig4
    if target == "fig5":
        ps = [float(x) for x in np.round(np.linspace(0.0, 0.2, 11), 6)]
        specs = []
        for g in (-4.0, 4.0, 10.0):
            specs.append(ExperimentSpec(base.with_(P_E=1.0, gamma=float(db_to_linear(g))), "p", ps, ["mf_an"],
                                        ("asymptotic", "monte_carlo"), t, seed,
                                        labels={"mf_an": f"mf_an_{g:g}dB"}))
        return specs, _check_fig5
    if target == "fig6":
        return ExperimentSpec(base.with_(P_E=1.0), "gamma_db", [float(s) for s in snr],
                              ["naive_mf", "mf_an", "ns", "unified"], ("monte_carlo",), t, seed), _check_fig6
    if target == "fig7":
        return ExperimentSpec(base.with_(gamma=10.0), "P_E", [0.1, 0.5, 1.0, 2.0, 5.0, 10.0],
                              ["mf_an", "ns", "unified"], ("monte_carlo",), t, seed), _check_fig7
    if target == "fig8":
        return ExperimentSpec(base.with_(P_E=1.0, gamma=10.0), "N_e", [1.0, 2.0, 4.0, 6.0, 8.0],
                              ["mf_an", "ns", "unified"], ("monte_carlo",), t, seed), _check_fig8
    raise UsageError(f"unknown target {target!r}")


# Optimize ----------------------------------------------------------------

def optimize_report(config: SystemConfig, seed: int, gamma: float, log=None):
    """Closed-form split, feasibility bound and design switch at SNR ``gamma``.

    Returns a list of ``(quantity, value)`` pairs. With more than one
    eavesdropper antenna only the grid-search split is reported.
    """
    log = log or (lambda msg: None)
    corr = build_correlation_set(config, seed)
    attack, est, terms = analysis.prepare(config, corr)
    K, N_t = config.K, config.N_t
    grid_split, grid_rate = analysis.grid_best_split(terms, gamma, K, N_t)
    out = []
    if corr.N_e != 1:
        log(f"N_e = {corr.N_e}: closed forms need N_e = 1, falling back to grid search")
        out += [("p_star", grid_split.p), ("q_star", grid_split.q), ("rate", grid_rate), ("method", "grid")]
        return out
    sat = analysis.single_antenna_terms(config, corr, est, attack, gamma, terms)
    alloc = analysis.optimal_power_allocation(sat)
    bound = analysis.secrecy_feasible_power(sat)
    out += [("p_star", alloc.p_star), ("q_star", alloc.q_star), ("rate", alloc.rate), ("method", "closed_form"),
            ("feasible_direction", bound.direction), ("feasible_bound", bound.bound),
            ("grid_p", grid_split.p), ("grid_rate", grid_rate),
            ("delta_p", alloc.p_star - grid_split.p), ("delta_rate", alloc.rate - grid_rate)]
    try:
        ns = ns_project(corr, config)
    except EmptyNullSpaceError as e:
        log(f"design switch not evaluated: {e}")
        out.append(("beta", "nan"))
        return out
    sw = analysis.design_switch(sat, terms, analysis.ns_asymptotic_terms(config, corr, ns, est), gamma)
    out += [("beta", sw.beta_of_gamma), ("beta_method", sw.method), ("rate_ns", sw.rate_ns),
            ("preferred", "ns" if sw.beta_of_gamma else "mf_an")]
    return out


def report_csv(pairs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("quantity", "value"))
    for k, v in pairs:
        w.writerow((k, v if isinstance(v, str) else fmt(v)))
    return buf.getvalue()


# Entry point --------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(2)


def _seed(s: str) -> int:
    v = int(s)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2^64)")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="secmimo", description="Secrecy-rate experiments for multi-cell massive MIMO "
                                             "under a pilot contamination attack.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--seed", type=_seed, default=0, help="master seed (default 0)")
    common.add_argument("--trials", type=int, help="Monte Carlo trials per point")
    common.add_argument("--out", default="-", help="output path ('-' for stdout)")
    common.add_argument("--evaluator", choices=("asymptotic", "mc", "both"))
    common.add_argument("--workers", type=int, default=1, help="threads per Monte Carlo run")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("corr-gen", parents=[common], help="draw and save a correlation set")
    sub.add_parser("run", parents=[common], help="run the sweep described by --config")
    rp = sub.add_parser("reproduce", parents=[common], help="preset table/figure sweep")
    rp.add_argument("target", choices=("table1", "fig4", "fig5", "fig6", "fig7", "fig8"))
    op = sub.add_parser("optimize", parents=[common], help="power split and design choice at one SNR")
    op.add_argument("--gamma-db", type=float, help="downlink SNR in dB (default from config, else 0)")
    return ap


def _cmd_run(args, log):
    if not args.config:
        raise UsageError("run needs --config")
    spec = spec_from_values(load_config_file(args.config), args.seed, args.trials, args.evaluator)
    rows, failures = run_experiment(spec, args.workers, log)
    write_text(args.out, rows_to_csv(rows))
    return failures


def _cmd_reproduce(args, log):
    overrides = load_config_file(args.config) if args.config else {}
    specs, check = reproduce_spec(args.target, args.seed, args.trials, overrides)
    specs = specs if isinstance(specs, list) else [specs]
    rows, failures = [], []
    for s in specs:
        if args.evaluator:
            s.evaluators = _evaluators(args.evaluator)
        r, f = run_experiment(s, args.workers, log)
        rows += r
        failures += f
    write_text(args.out, rows_to_csv(rows))
    ok, detail = check(rows, specs[0].config)
    print(f"{args.target}: {'PASS' if ok else 'FAIL'} ({detail})", file=sys.stderr)
    return failures


def _cmd_corr_gen(args, log):
    if args.out in (None, "-"):
        raise UsageError("corr-gen needs --out <path>")
    cfg = system_config(load_config_file(args.config) if args.config else {})
    corr = build_correlation_set(cfg, args.seed)
    save_correlation_set(corr, args.out)
    return []


def _cmd_optimize(args, log):
    values = load_config_file(args.config) if args.config else {}
    cfg = system_config(values)
    gdb = args.gamma_db if args.gamma_db is not None else values.get("gamma_db", 0.0)
    gamma = float(db_to_linear(gdb))
    pairs = optimize_report(cfg.with_(gamma=gamma), args.seed, gamma, log)
    for k, v in pairs:
        log(f"{k} = {v if isinstance(v, str) else fmt(v)}")
    write_text(args.out, report_csv(pairs))
    return []


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    log = lambda msg: print(msg, file=sys.stderr)
    handler = {"run": _cmd_run, "reproduce": _cmd_reproduce, "corr-gen": _cmd_corr_gen,
               "optimize": _cmd_optimize}[args.command]
    try:
        if args.trials is not None and args.trials < 1:
            raise UsageError("--trials must be positive")
        if args.workers < 1:
            raise UsageError("--workers must be positive")
        failures = handler(args, log)
    except InvalidInputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    for f in failures:
        print(f"failed: {f}", file=sys.stderr)
    return 3 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
