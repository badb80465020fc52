"""Command-line entry point.

Exit status: 0 on success, 2 on invalid input, 3 when an audit fails.
"""

from __future__ import annotations

import argparse
import dataclasses
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import audit as audit_mod
from . import kernels
from .datasets import (
    Dataset,
    DatasetError,
    generate_syn,
    load_csv,
    read_edge_list,
    read_values_csv,
    write_csv,
    write_json,
    write_values_csv,
)
from .evaluation import (
    SWEEP_HEADER,
    AttackConfig,
    BallHistogramEstimator,
    GlobalHistogramEstimator,
    run_attack,
    run_learnability,
    sweep,
)
from .groups import (
    AuxInfo,
    GroupAssignment,
    GroupingError,
    compute_groups,
    identity_plan,
    make_plan,
    plan_from_assignment,
    uniform_plan,
)
from .ldp import RandomizerConfig, randomize
from .mechanism import shuffle
from .preservation import (
    MAX_BRUTE_FORCE_N,
    brute_force_delta_hamming,
    estimate_preservation,
    exact_delta_hamming,
)
from .seeding import stream

log = logging.getLogger("dsigma")

EXIT_OK, EXIT_INVALID, EXIT_AUDIT_FAILED = 0, 2, 3


class UsageError(ValueError):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common_parser(suppress: bool) -> argparse.ArgumentParser:
    default = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=default if suppress else 0,
                   help="master seed; each component derives its own stream from it (default 0)")
    g.add_argument("--threads", type=int, default=default if suppress else 1,
                   help="worker threads for independent sweep cells; results do not depend on it")
    g.add_argument("--log-level", default=default if suppress else "WARNING",
                   choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="logging verbosity")
    return p


def _plan_flags(p: argparse.ArgumentParser, need: bool = True) -> None:
    g = p.add_argument_group("mechanism plan")
    g.add_argument("--alpha", type=float, required=need,
                   help="privacy level alpha; the Mallows dispersion is theta = alpha / sensitivity")
    g.add_argument("--r", type=float, required=need,
                   help="group threshold: G_i holds every j with d(t_i, t_j) <= r (use 'inf' for one group)")
    g.add_argument("--metric", choices=["euclidean", "manhattan", "hops"], default=None,
                   help="distance d between public attributes (points: euclidean or manhattan; graphs: hops)")
    g.add_argument("--rank-distance", choices=["kendall"], default="kendall",
                   help="rank distance of the Mallows model; sensitivity is w(w+1)/2 for width w")
    g.add_argument("--tie-break", choices=["ascending", "listed"], default="ascending",
                   help="order in which BFS enqueues unvisited neighbours when building sigma0")


def _aux_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--aux", type=Path,
                   help="public attributes t: a points CSV (id,t_1..t_d) or an edge list "
                        "(two 0-based ids per line); defaults to the coordinates in --input")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser(suppress=True)
    parser = argparse.ArgumentParser(
        prog="dsigma",
        description="Group-aware shuffling of locally randomized data, with audits and utility analysis.",
        parents=[_common_parser(suppress=False)],
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("gen-syn", parents=[common], help="generate the synthetic Syn dataset")
    p.add_argument("--n", type=int, required=True, help="number of records (at least 8)")
    p.add_argument("--out", "--output", dest="out", type=Path, required=True,
                   help="output CSV with columns id,x,t_1,t_2")

    p = sub.add_parser("ldp", parents=[common], help="apply k-ary randomized response to x")
    p.add_argument("--input", type=Path, required=True, help="CSV with columns id,x")
    p.add_argument("--output", type=Path, required=True, help="CSV with columns id,y")
    p.add_argument("--epsilon", type=float, required=True,
                   help="LDP parameter epsilon: x is kept with probability e^eps / (e^eps + k - 1)")
    p.add_argument("--k", type=int, default=2, help="number of categories in the domain of x")

    p = sub.add_parser("shuffle", parents=[common], help="shuffle a sequence with a d_sigma plan")
    p.add_argument("--input", type=Path, required=True,
                   help="CSV holding the sequence to shuffle (column y if present, else x)")
    _aux_flag(p)
    _plan_flags(p)
    p.add_argument("--column", default=None, help="column of --input to shuffle")
    p.add_argument("--output", type=Path, help="released sequence z as CSV (default: <input>.z.csv)")
    p.add_argument("--sidecar", type=Path, help="plan summary JSON (default: <output>.json)")
    p.add_argument("--emit-permutation", action="store_true",
                   help="include the applied permutation sigma* (1-based) in the sidecar")

    p = sub.add_parser("audit", parents=[common], help="exhaustive privacy audit at small n")
    p.add_argument("--kind", choices=["dsigma", "semantic", "composition", "ldp"], default="dsigma",
                   help="dsigma: worst log-ratio over neighbouring orderings; semantic: odds shift on "
                        "x_i for an informed adversary; composition: two independent releases; "
                        "ldp: unshuffled randomized response against the k*epsilon bound")
    p.add_argument("--n", type=int, help="number of records (<= 6; <= 5 for semantic/composition/ldp)")
    p.add_argument("--alpha", type=float, default=1.0,
                   help="privacy level alpha; theta = alpha / sensitivity")
    p.add_argument("--alpha2", type=float, default=None,
                   help="alpha of the second release for --kind composition (default: --alpha)")
    p.add_argument("--r", type=float, default=1.0,
                   help="group threshold in hops on a path graph over the n records, "
                        "used when neither --grouping-file nor --aux is given")
    _aux_flag(p)
    p.add_argument("--grouping-file", type=Path,
                   help="groups as JSON lines {\"i\": owner, \"members\": [...]} or a JSON list of lists (0-based)")
    p.add_argument("--theta-override", type=float, default=None,
                   help="force the Mallows dispersion theta while still auditing against --alpha "
                        "(a theta above alpha / sensitivity should fail)")
    p.add_argument("--epsilon", type=float, default=None,
                   help="randomized-response epsilon (ldp kind; optional channel for semantic)")
    p.add_argument("--prior", choices=["correlated", "product"], default="correlated",
                   help="adversary prior for --kind semantic")
    p.add_argument("--owner", type=int, default=None, help="owner i for --kind semantic (default: all)")
    p.add_argument("--output", type=Path, help="write the JSON report here as well as to stdout")

    p = sub.add_parser("preserve", parents=[common], help="(eta, delta)-preservation of a subset")
    p.add_argument("--method", choices=["monte_carlo", "exact", "brute_force"], default="monte_carlo",
                   help="monte_carlo samples the plan's shuffles; exact and brute_force use the "
                        "Hamming Mallows law with dispersion --theta")
    p.add_argument("--n", type=int, help="number of records (exact and brute_force)")
    p.add_argument("--theta", type=float, default=None, help="Hamming Mallows dispersion (exact, brute_force)")
    p.add_argument("--eta", type=float, required=True,
                   help="required preserved fraction: |sigma(S) & S| >= eta |S|")
    p.add_argument("--delta", type=float, default=None,
                   help="failure probability; monte_carlo also reports the largest eta met with prob >= 1-delta")
    p.add_argument("--subset-file", type=Path, help="subset S as whitespace-separated 0-based ids")
    p.add_argument("--subset-size", type=int, help="use S = {0, ..., size-1} (default: n // 2)")
    p.add_argument("--trials", type=int, default=1000, help="Monte Carlo shuffles")
    p.add_argument("--input", type=Path, help="dataset CSV supplying public coordinates (monte_carlo)")
    _aux_flag(p)
    _plan_flags(p, need=False)
    p.add_argument("--sweep-alphas", type=_float_list, help="comma-separated alphas for a CSV sweep")
    p.add_argument("--sweep-sizes", type=_int_list, help="comma-separated subset sizes for a CSV sweep")
    p.add_argument("--sweep-csv", type=Path, help="CSV for the sweep (alpha, subset_size, width, eta, ...)")
    p.add_argument("--output", type=Path, help="write the JSON report here as well as to stdout")

    for name, what in (("attack", "majority-vote inference attack (rho)"),
                       ("learn", "local distribution learnability (lambda)")):
        p = sub.add_parser(name, parents=[common], help=what)
        p.add_argument("--input", type=Path, required=True, help="dataset CSV (id,x,t_1..t_d[,t_p])")
        _aux_flag(p)
        _plan_flags(p, need=False)
        p.add_argument("--plan", choices=["mechanism", "identity", "uniform"], default="mechanism",
                       help="mechanism uses --alpha/--r; identity is plain LDP; uniform shuffles everyone")
        p.add_argument("--r-star", type=float, default=0.1, help="adversary radius r* around t_i")
        p.add_argument("--epsilon", type=float, default=2.5, help="randomized-response epsilon")
        p.add_argument("--k", type=int, default=None, help="domain size of x (default: max(x) + 1)")
        if name == "attack":
            p.add_argument("--k-neighbors", type=int, default=25, help="owners voting on each x_i")
            p.add_argument("--trials", type=int, default=50, help="randomized-response resamples")
            p.add_argument("--success-threshold", type=float, default=0.9,
                           help="an owner is vulnerable when guessed in at least this fraction of trials")
        else:
            p.add_argument("--estimator", choices=["ball", "global"], default="ball",
                           help="ball: debiased histogram of z within r*; global: one debiased histogram")
            p.add_argument("--repeats", type=int, default=1, help="randomized-response draws averaged")
        p.add_argument("--output", type=Path, help="write the JSON report here as well as to stdout")

    p = sub.add_parser("sweep", parents=[common], help="rho and lambda over a grid of r and alpha")
    p.add_argument("--input", type=Path, required=True, help="dataset CSV (id,x,t_1..t_d[,t_p])")
    _aux_flag(p)
    p.add_argument("--alphas", type=_float_list, required=True, help="comma-separated alphas")
    p.add_argument("--radii", type=_float_list, required=True, help="comma-separated thresholds r")
    p.add_argument("--metric", choices=["euclidean", "manhattan", "hops"], default=None,
                   help="distance between public attributes")
    p.add_argument("--r-star", type=float, default=0.1, help="adversary radius r*")
    p.add_argument("--epsilon", type=float, default=2.5, help="randomized-response epsilon")
    p.add_argument("--k-neighbors", type=int, default=25, help="owners voting on each x_i")
    p.add_argument("--trials", type=int, default=50, help="randomized-response resamples")
    p.add_argument("--success-threshold", type=float, default=0.9, help="vulnerability threshold")
    p.add_argument("--k", type=int, default=None, help="domain size of x")
    p.add_argument("--output", type=Path, required=True,
                   help="CSV with header " + ",".join(SWEEP_HEADER))
    return parser


def _emit(report: dict, output: Path | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True, default=_jsonable)
    print(text)
    if output is not None:
        write_json(output, report)


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _read_points_csv(path: Path) -> AuxInfo:
    rows = list(csv.reader(io.StringIO(path.read_text())))
    if not rows or rows[0][:1] != ["id"]:
        raise DatasetError(f"{path}:1: points CSV must start with an 'id' column")
    header = rows[0]
    cols = [i for i, h in enumerate(header) if h.startswith("t_") and h != "t_p"]
    if not cols:
        raise DatasetError(f"{path}:1: no coordinate columns t_1..t_d")
    pts = []
    for lineno, row in enumerate(rows[1:], 2):
        if not row:
            continue
        try:
            pts.append([float(row[i]) for i in cols])
        except (ValueError, IndexError):
            raise DatasetError(f"{path}:{lineno}: malformed coordinates") from None
    return AuxInfo.from_points(np.array(pts))


def _read_aux(path: Path, n: int) -> AuxInfo:
    first = path.read_text().lstrip().split("\n", 1)[0]
    if first.startswith("id"):
        aux = _read_points_csv(path)
        if aux.n != n:
            raise DatasetError(f"{path}: {aux.n} points for {n} records")
        return aux
    return read_edge_list(path, n)


def _load_dataset(args) -> Dataset:
    k = getattr(args, "k", None)
    if args.aux is None:
        return load_csv(args.input, k=k)
    if args.aux.read_text().lstrip().startswith("id"):
        return load_csv(args.input, k=k, aux=_read_points_csv(args.aux))
    return load_csv(args.input, k=k, edge_list=args.aux)


def _plan_for(args, aux: AuxInfo):
    choice = getattr(args, "plan", "mechanism")
    if choice == "identity":
        return identity_plan(aux.n)
    if choice == "uniform":
        return uniform_plan(aux.n)
    if args.alpha is None or args.r is None:
        raise UsageError("--alpha and --r are required for the mechanism plan")
    return make_plan(aux, args.r, args.alpha, args.metric, args.rank_distance, args.tie_break)


def cmd_gen_syn(args) -> int:
    ds = generate_syn(args.n, args.seed)
    write_csv(ds, args.out)
    log.info("wrote %d records to %s", ds.n, args.out)
    return EXIT_OK


def cmd_ldp(args) -> int:
    ids, xs = read_values_csv(args.input, "x")
    cfg = RandomizerConfig(args.epsilon, args.k)
    ys = randomize(cfg, xs, stream(args.seed, "ldp"))
    write_values_csv(args.output, ids, ys, "y")
    return EXIT_OK


def cmd_shuffle(args) -> int:
    header = args.input.read_text().split("\n", 1)[0].strip().split(",")
    column = args.column or ("y" if "y" in header else "x")
    ids, values = read_values_csv(args.input, column)
    if args.aux is not None:
        aux = _read_aux(args.aux, ids.size)
    else:
        aux = load_csv(args.input).aux if column == "x" else _read_points_csv(args.input)
    plan = make_plan(aux, args.r, args.alpha, args.metric, args.rank_distance, args.tie_break)
    out = shuffle(plan, values, args.seed)
    output = args.output or args.input.with_suffix(".z.csv")
    write_values_csv(output, ids, out.z, "z")
    sidecar = args.sidecar or Path(str(output) + ".json")
    meta = plan.summary()
    meta.update({"seed": args.seed, "column": column, "backend": kernels.BACKEND})
    if args.emit_permutation:
        meta["sigma_star"] = out.sigma_star.one_based()
    write_json(sidecar, meta)
    log.info("wrote %s and %s", output, sidecar)
    return EXIT_OK


def _read_grouping(path: Path) -> GroupAssignment:
    text = path.read_text()
    stripped = text.strip()
    if stripped.startswith("["):
        try:
            rows = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise GroupingError(f"{path}: invalid JSON: {exc}") from None
        return GroupAssignment.from_groups(rows)
    return GroupAssignment.from_jsonl(text)


def _audit_grouping(args) -> GroupAssignment:
    if args.grouping_file is not None:
        g = _read_grouping(args.grouping_file)
        if args.n is not None and args.n != g.n:
            raise UsageError(f"--n {args.n} does not match the grouping file ({g.n} owners)")
        return g
    if args.n is None:
        raise UsageError("--n is required without --grouping-file")
    if args.aux is not None:
        aux = _read_aux(args.aux, args.n)
    else:
        aux = AuxInfo.from_edges(args.n, [(j, j + 1) for j in range(args.n - 1)])
    return compute_groups(aux, args.r)


def cmd_audit(args) -> int:
    g = _audit_grouping(args)
    if args.kind == "ldp":
        if args.epsilon is None:
            raise UsageError("--epsilon is required for --kind ldp")
        report = audit_mod.audit_ldp_weak_dsigma(args.epsilon, g)
    else:
        plan = plan_from_assignment(g, args.alpha)
        if args.theta_override is not None:
            if args.theta_override < 0:
                raise UsageError("--theta-override must be >= 0")
            plan = dataclasses.replace(plan, theta=float(args.theta_override))
        if args.kind == "dsigma":
            report = audit_mod.audit_dsigma(plan)
        elif args.kind == "composition":
            second = plan_from_assignment(g, args.alpha if args.alpha2 is None else args.alpha2)
            report = audit_mod.audit_composition(plan, second)
        else:
            rng = stream(args.seed, "audit-prior")
            if args.prior == "product":
                prior = audit_mod.product_prior(rng.uniform(0.2, 0.8, size=g.n))
            else:
                owner = 0 if args.owner is None else args.owner
                prior = audit_mod.random_correlated_prior(g.n, rng, g.group(owner))
            report = audit_mod.audit_semantic(plan, prior, args.owner, args.epsilon)
    out = report.to_dict()
    out["grouping"] = [sorted(g.group(i).tolist()) for i in range(g.n)]
    _emit(out, args.output)
    return EXIT_OK if report.passed else EXIT_AUDIT_FAILED


def _subset(args, n: int) -> list[int]:
    if args.subset_file is not None:
        try:
            return [int(v) for v in args.subset_file.read_text().split()]
        except ValueError:
            raise UsageError(f"{args.subset_file}: subset must be whitespace-separated integers") from None
    size = args.subset_size if args.subset_size is not None else n // 2
    if not 1 <= size <= n:
        raise UsageError(f"subset size must lie in [1, {n}]")
    return list(range(size))


def cmd_preserve(args) -> int:
    if args.method in ("exact", "brute_force"):
        if args.n is None or args.theta is None:
            raise UsageError("--n and --theta are required for the exact and brute_force methods")
        S = _subset(args, args.n)
        if args.method == "exact":
            delta = exact_delta_hamming(args.theta, args.n, S, args.eta)
        else:
            delta = brute_force_delta_hamming(args.theta, args.n, S, args.eta)
        report = {"method": "exact_hamming" if args.method == "exact" else "brute_force",
                  "n": args.n, "theta": args.theta, "eta": args.eta, "subset": S, "delta": delta}
        if args.method == "exact" and args.n <= MAX_BRUTE_FORCE_N:
            report["brute_force_delta"] = brute_force_delta_hamming(args.theta, args.n, S, args.eta)
        _emit(report, args.output)
        return EXIT_OK
    if args.input is None and args.aux is None:
        raise UsageError("monte_carlo needs --input or --aux for the public attributes")
    if args.input is not None:
        args.k = None
        aux = _load_dataset(args).aux
    else:
        first = args.aux.read_text().lstrip()
        if not first.startswith("id"):
            raise UsageError("--aux without --input must be a points CSV (edge lists need --input for n)")
        aux = _read_points_csv(args.aux)
    if args.alpha is None or args.r is None:
        raise UsageError("--alpha and --r are required for monte_carlo")
    S = _subset(args, aux.n)
    plan = make_plan(aux, args.r, args.alpha, args.metric, args.rank_distance, args.tie_break)
    rep = estimate_preservation(plan, S, args.eta, args.trials, args.seed, args.delta)
    out = rep.to_dict()
    out.pop("subset")
    out["subset_size"] = len(S)
    if args.sweep_csv is not None:
        rows = []
        for a in args.sweep_alphas or [args.alpha]:
            p = plan if a == args.alpha else make_plan(aux, args.r, a, args.metric)
            for size in args.sweep_sizes or [len(S)]:
                sub = estimate_preservation(p, range(size), args.eta, args.trials, args.seed,
                                            args.delta if args.delta is not None else 0.05)
                rows.append([a, size, p.width, args.eta, sub.delta, sub.extra["eta_at_delta"]])
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["alpha", "subset_size", "width", "eta", "delta", "eta_at_delta"])
        w.writerows(rows)
        args.sweep_csv.write_text(buf.getvalue())
    _emit(out, args.output)
    return EXIT_OK


def cmd_attack(args) -> int:
    ds = _load_dataset(args)
    plan = _plan_for(args, ds.aux)
    cfg = AttackConfig(args.k_neighbors, args.trials, args.success_threshold, args.epsilon, args.r_star)
    rep = run_attack(ds, plan, cfg, args.seed)
    out = rep.to_dict()
    out.update({"plan": args.plan, "width": plan.width, "sensitivity": plan.sensitivity})
    _emit(out, args.output)
    return EXIT_OK


def cmd_learn(args) -> int:
    ds = _load_dataset(args)
    plan = _plan_for(args, ds.aux)
    est = (BallHistogramEstimator if args.estimator == "ball" else GlobalHistogramEstimator)(args.epsilon)
    rep = run_learnability(ds, plan, args.r_star, est, args.seed, args.epsilon, args.repeats)
    out = rep.to_dict()
    out.update({"plan": args.plan, "estimator": args.estimator, "width": plan.width})
    _emit(out, args.output)
    return EXIT_OK


def cmd_sweep(args) -> int:
    ds = _load_dataset(args)
    cfg = AttackConfig(args.k_neighbors, args.trials, args.success_threshold, args.epsilon, args.r_star)
    rows = sweep(ds, args.alphas, args.radii, cfg, args.seed, args.metric, args.threads,
                 progress=log.info)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_HEADER, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    args.output.write_text(buf.getvalue())
    return EXIT_OK


COMMANDS = {
    "gen-syn": cmd_gen_syn,
    "ldp": cmd_ldp,
    "shuffle": cmd_shuffle,
    "audit": cmd_audit,
    "preserve": cmd_preserve,
    "attack": cmd_attack,
    "learn": cmd_learn,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        # every library error type derives from ValueError
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
