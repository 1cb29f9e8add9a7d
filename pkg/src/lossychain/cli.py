"""Command-line entry point.

Every command writes ``<command>-<seed>.csv`` and ``<command>-<seed>.manifest``
into ``--out``.  The manifest is a flat ``key=value`` file holding the full
resolved configuration; passing it back with ``--config`` (or to ``replay``)
reproduces the CSV byte for byte.  Flags override the config file, which
overrides the defaults.

Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""

import argparse
import csv
import os
import sys
from dataclasses import dataclass, field

from . import montecarlo, protocol, worked_example, xgraph
from .arrivals import ParameterError, SimParams, generate_timeline
from .delays import DelayOracle

COMMANDS = ("simulate", "verify", "dists", "estimate", "sweep", "fixture")
EXPERIMENTS = ("violation", "nakamoto", "decay")

# key -> (parser, default); None defaults are resolved per command
FIELDS = {
    "lambda": (float, 1.0),
    "beta": (float, 0.15),
    "d": (float, 0.3),
    "ss": (float, 0.9),
    "horizon": (int, 2000),
    "window": (int, 200),
    "seed": (int, 0),
    "trials": (int, None),
    "tau": (str, None),
    "adversary": (str, "private"),
    "margin": (int, 1),
    "observers": (int, 2),
    "seeds": (int, 100),
    "experiment": (str, "violation"),
    "grid": (str, "region"),
    "grid_size": (int, 21),
    "tx_fraction": (float, 0.2),
}

DEFAULT_TRIALS = {"estimate:violation": 500, "estimate:nakamoto": 50, "estimate:decay": 4000000, "dists": 20000, "sweep": 0}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    values: dict = field(default_factory=dict)
    out: str = "."
    workers: int = 1

    @property
    def params(self):
        v = self.values
        return SimParams(
            lam=v["lambda"],
            beta=v["beta"],
            d=v["d"],
            ss=v["ss"],
            horizon_blocks=v["horizon"],
            window=v["window"],
            seed=v["seed"],
        )

    @property
    def taus(self):
        return [float(x) for x in self.values["tau"].split(",")]

    def manifest_lines(self):
        lines = [f"command={self.command}"]
        for k in FIELDS:
            v = self.values[k]
            lines.append(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}")
        return lines

    def path(self, suffix):
        return os.path.join(self.out, f"{self.command}-{self.values['seed']}{suffix}")


def read_config(path):
    """Flat ``key=value`` file; blank lines and ``#`` comments are ignored."""
    out = {}
    try:
        with open(path) as f:
            for n, line in enumerate(f, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{n}: expected key=value")
                k, v = (x.strip() for x in line.split("=", 1))
                out[k.replace("-", "_")] = v
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return out


def resolve(command, file_values, flag_values):
    raw = {}
    for source in (file_values, flag_values):
        for k, v in source.items():
            if v is None:
                continue
            if k == "command":
                if v != command:
                    raise ConfigError(f"config is for command {v!r}, not {command!r}")
                continue
            if k not in FIELDS:
                raise ConfigError(f"unknown config key {k!r}")
            raw[k] = v
    values = {}
    for k, (conv, default) in FIELDS.items():
        if k in raw:
            try:
                values[k] = conv(raw[k])
            except (TypeError, ValueError):
                raise ConfigError(f"bad value for {k}: {raw[k]!r}") from None
        else:
            values[k] = default
    try:
        params = SimParams(values["lambda"], values["beta"], values["d"], values["ss"], values["horizon"], values["window"], values["seed"])
    except ParameterError as e:
        raise ConfigError(str(e)) from None
    if values["tau"] is None:
        values["tau"] = ",".join(repr(x / params.lam_honest) for x in (10, 20, 40, 80))
    else:
        try:
            [float(x) for x in str(values["tau"]).split(",")]
        except ValueError:
            raise ConfigError(f"bad tau list {values['tau']!r}") from None
    if values["trials"] is None:
        key = f"{command}:{values['experiment']}" if command == "estimate" else command
        values["trials"] = DEFAULT_TRIALS.get(key, 1)
    if values["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {values['experiment']!r}; choose from {EXPERIMENTS}")
    if values["adversary"] not in protocol.STRATEGIES:
        raise ConfigError(f"unknown adversary {values['adversary']!r}; choose from {sorted(protocol.STRATEGIES)}")
    if values["grid"] not in ("region", "uniform"):
        raise ConfigError("grid must be 'region' or 'uniform'")
    return values


def _writer(path):
    f = open(path, "w", newline="")
    return f, csv.writer(f, lineterminator="\n")


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return x


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg):
    p = cfg.params
    tl = generate_timeline(p)
    oracle = DelayOracle(p.d, p.seed, tl)
    graph = xgraph.build(tl, oracle)
    if cfg.values["adversary"] == "private":
        adv = protocol.make_adversary("private", margin=cfg.values["margin"], targets="all", restart_lag=3)
    else:
        adv = protocol.make_adversary(cfg.values["adversary"])
    trace = protocol.run(tl, oracle, adv, observers=range(cfg.values["observers"]), graph=graph)
    trace.write_csv(cfg.path(".csv"))
    trace.tree.write_csv(cfg.path("-blocks.csv"))
    graph.write_csv(cfg.path("-edges.csv"))
    print(f"simulated {tl.honest_count} honest and {tl.adversarial_count_total} adversarial blocks; "
          f"tree height {trace.tree.max_height}")
    return 0


def cmd_verify(cfg):
    p = cfg.params
    rep = montecarlo.verify_seeds(p, cfg.values["seeds"], n_observers=cfg.values["observers"])
    f, w = _writer(cfg.path(".csv"))
    with f:
        w.writerow(montecarlo.VERDICT_COLUMNS)
        w.writerows(rep.rows)
    print(f"seeds={rep.seeds} lemma1={rep.lemma1} paths={rep.paths} lemma4={rep.lemma4} "
          f"theorem2={rep.thm2_failed}/{rep.thm2_checked} theorem3={rep.thm3_failed}/{rep.thm3_checked}")
    for item in rep.failures[:20]:
        print("FAIL", *item)
    return 0 if rep.ok else 1


def cmd_dists(cfg):
    tests = montecarlo.run_distribution_suite(cfg.params, cfg.values["trials"])
    f, w = _writer(cfg.path(".csv"))
    with f:
        w.writerow(("law", "statistic", "pvalue", "dof", "passed", "tag", "samples"))
        for t in tests:
            w.writerow((t.name, repr(float(t.statistic)), repr(float(t.pvalue)), t.dof, int(bool(t.passed)), t.tag, t.samples))
    for t in tests:
        print(f"{t.name:30s} {'pass' if t.passed else 'FAIL'} p={t.pvalue:.4g} {t.tag}")
    return 0 if all(t.passed for t in tests) else 1


ESTIMATE_COLUMNS = ("experiment", "params", "tau", "point", "ci_halfwidth", "trials", "undetermined_frac")


def cmd_estimate(cfg):
    p = cfg.params
    v = cfg.values
    ps = montecarlo.params_string(p)
    rows = []
    exp = v["experiment"]
    if exp == "violation":
        ests = montecarlo.estimate_violation(
            p, cfg.taus, v["trials"], strategy=v["adversary"], observers=v["observers"],
            tx_fraction=v["tx_fraction"], margin=v["margin"], workers=cfg.workers,
        )
        for tau, e in zip(cfg.taus, ests):
            rows.append(("violation", ps, tau, e.point, e.halfwidth, e.trials, e.undetermined_frac))
    elif exp == "nakamoto":
        e = montecarlo.estimate_nakamoto_rate(p, v["trials"], workers=cfg.workers)
        rows.append(("nakamoto", ps, "", e.point, e.halfwidth, e.trials, e.undetermined_frac))
    else:
        # about 200 batches for the jackknife
        batch = max(2000, v["trials"] // 200)
        rep = montecarlo.fit_catchup_decay(p, trials=v["trials"], batch=batch, workers=cfg.workers)
        for name, fit in (("decay-forward", rep.forward), ("decay-backward", rep.backward)):
            for g, prob in zip(fit.gaps, fit.probabilities):
                rows.append((name, ps, g, prob, "", v["trials"], 0.0))
            print(f"{name}: slope={fit.slope:.4f} r2={fit.r2:.4f} se={fit.jackknife_se:.4f}")
        print(f"slopes agree within joint 99% CI: {rep.slopes_agree}")
    f, w = _writer(cfg.path(".csv"))
    with f:
        w.writerow(ESTIMATE_COLUMNS)
        for r in rows:
            w.writerow(tuple(_fmt(float(x)) if hasattr(x, "dtype") else _fmt(x) for x in r))
    for r in rows[:10]:
        print(*r[2:5])
    return 0


def cmd_sweep(cfg):
    v = cfg.values
    n = v["grid_size"]
    betas, ds = montecarlo.region_grid(n) if v["grid"] == "region" else montecarlo.uniform_grid(n)
    tau = cfg.taus[0]
    cells = montecarlo.sweep_region(
        betas, ds, tau, v["trials"], cfg.params, workers=cfg.workers,
        strategy=v["adversary"], observers=v["observers"], tx_fraction=v["tx_fraction"], margin=v["margin"],
    )
    f, w = _writer(cfg.path(".csv"))
    with f:
        w.writerow(("beta", "d", "in_region", "in_prior_region", "strict", "tau", "point", "ci_halfwidth", "trials"))
        for c in cells:
            e = c.estimate
            w.writerow((
                repr(float(c.beta)), repr(float(c.d)), int(c.in_region), int(c.in_prior_region), int(c.strict),
                repr(tau), "" if e is None else repr(float(e.point)), "" if e is None else repr(float(e.halfwidth)),
                0 if e is None else e.trials,
            ))
    bad = [c for c in cells if c.in_prior_region and not c.in_region]
    strict = sum(c.strict for c in cells)
    print(f"{len(cells)} cells, {strict} only in the new region, {len(bad)} containment violations")
    return 1 if bad else 0


def cmd_fixture(cfg):
    got = worked_example.values()
    f, w = _writer(cfg.path(".csv"))
    ok = True
    with f:
        w.writerow(("quantity", "value", "expected"))
        for k, v in got.items():
            w.writerow((k, v, worked_example.EXPECTED[k]))
            ok &= v == worked_example.EXPECTED[k]
            print(f"{k} = {v}")
    return 0 if ok else 1


HANDLERS = {
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "dists": cmd_dists,
    "estimate": cmd_estimate,
    "sweep": cmd_sweep,
    "fixture": cmd_fixture,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="lossychain", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run configuration (defaults in brackets)")
    g.add_argument("--config", help="flat key=value file, e.g. a manifest written by an earlier run")
    g.add_argument("--lambda", dest="lambda_", type=float, help="total mining rate [1.0]")
    g.add_argument("--beta", type=float, help="adversarial fraction [0.15]")
    g.add_argument("--d", type=float, help="message loss probability [0.3]")
    g.add_argument("--ss", type=float, help="robustness parameter [0.9]")
    g.add_argument("--horizon", type=int, help="honest blocks per run [2000]")
    g.add_argument("--window", type=int, help="verification window in honest blocks [200]")
    g.add_argument("--seed", type=int, help="root seed [0]")
    g.add_argument("--trials", type=int, help="trials [estimate: 500 violation, 50 nakamoto, 4e6 decay; dists 2e4; sweep 0]")
    g.add_argument("--tau", help="comma-separated confirmation times [10,20,40,80 honest inter-arrivals]")
    g.add_argument("--adversary", help=f"strategy, one of {sorted(protocol.STRATEGIES)} [private]")
    g.add_argument("--margin", type=int, help="private attack reveal margin [1]")
    g.add_argument("--observers", type=int, help="non-mining observers [2]")
    g.add_argument("--out", default=".", help="output directory [.]")
    g.add_argument("--workers", type=int, default=1, help="worker processes (does not change results) [1]")
    helps = {
        "simulate": "one seeded run; exports trace, blocktree and transmission graph",
        "verify": "deterministic lemma and theorem oracles over many seeds",
        "dists": "distribution goodness-of-fit suite",
        "estimate": "violation, Nakamoto-rate or catch-up decay estimates",
        "sweep": "security region grid",
        "fixture": "worked transmission-graph example",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "verify":
            sp.add_argument("--seeds", type=int, help="number of seeds [100]")
        if name == "estimate":
            sp.add_argument("--experiment", choices=EXPERIMENTS, help="[violation]")
            sp.add_argument("--tx-fraction", dest="tx_fraction", type=float, help="transaction time as a fraction of the run [0.2]")
        if name == "sweep":
            sp.add_argument("--grid", choices=("region", "uniform"), help="[region]")
            sp.add_argument("--grid-size", dest="grid_size", type=int, help="[21]")
    rp = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    rp.add_argument("manifest")
    rp.add_argument("--out", default=".")
    rp.add_argument("--workers", type=int, default=1)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if args.command == "replay":
            file_values = read_config(args.manifest)
            command = file_values.get("command")
            if command not in HANDLERS:
                raise ConfigError(f"manifest names no known command: {command!r}")
            flags = {}
        else:
            command = args.command
            file_values = read_config(args.config) if args.config else {}
            flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "out", "workers")}
            flags["lambda"] = flags.pop("lambda_")
        values = resolve(command, file_values, flags)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    cfg = ExperimentConfig(command, values, args.out, max(1, args.workers))
    try:
        code = HANDLERS[command](cfg)
    except ParameterError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    with open(cfg.path(".manifest"), "w") as f:
        f.write("\n".join(cfg.manifest_lines()) + "\n")
    return code


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
