"""Command-line front end: ``tot-align {synth,coupling,heatmap,loss}``.

Exit codes: 0 success, 1 input error, 2 solver non-convergence under ``--strict``.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass

from . import io
from .geometry import cosine_cost, near_diagonal_mass, temporal_distance
from .sinkhorn import PRESETS, SinkhornConfig, SinkhornOverflowError, entropy, ot_objective, sinkhorn, tot_cost
from .synth import make_pair
from .transfer import DEFAULT_LAMBDA, DEFAULT_W, evaluate_pair

logger = logging.getLogger("tot_align")

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2


class InputError(Exception):
    pass


@dataclass
class RunManifest:
    acoustic: str
    linguistic: str
    labels: str | None = None
    weights: str | None = None
    out_dir: str = "."
    beta: float = 0.5
    epsilon: float = 0.5
    lam: float = DEFAULT_LAMBDA
    w: float = DEFAULT_W
    s: float | None = None
    tol: float = 1e-9
    max_iter: int = 10_000
    stabilized: bool | None = None

    def validate(self, need_loss_inputs=False):
        paths = [self.acoustic, self.linguistic]
        if need_loss_inputs:
            if self.labels is None or self.weights is None:
                raise InputError("loss evaluation needs --labels and --weights")
            paths += [self.labels, self.weights]
        for p in paths:
            if p is None:
                raise InputError("missing input path")
            if not os.path.isfile(p):
                raise InputError(f"no such file: {p}")
        if not os.path.isdir(self.out_dir):
            raise InputError(f"output directory does not exist: {self.out_dir}")
        if not self.beta >= 0:
            raise InputError(f"beta must be >= 0, got {self.beta}")
        if not 0 <= self.lam <= 1:
            raise InputError(f"lambda must lie in [0, 1], got {self.lam}")
        if not self.w >= 0:
            raise InputError(f"w must be >= 0, got {self.w}")
        if self.s is not None and not self.s >= 0:
            raise InputError(f"s must be >= 0, got {self.s}")

    def config(self):
        try:
            return SinkhornConfig(epsilon=self.epsilon, max_iterations=self.max_iter,
                                  tolerance=self.tol, stabilized=self.stabilized)
        except ValueError as exc:
            raise InputError(str(exc)) from None


def _hyper_flags(p):
    g = p.add_argument_group("hyper-parameters")
    g.add_argument("--manifest", help="JSON run manifest; explicit flags take precedence")
    g.add_argument("--preset", choices=sorted(PRESETS), help="named (epsilon, s) setting")
    g.add_argument("--beta", type=float, help="temporal penalty weight (default 0.5)")
    g.add_argument("--epsilon", type=float, help="entropic temperature (default 0.5)")
    g.add_argument("--lambda", dest="lam", type=float, help="CTC weight (default 0.3)")
    g.add_argument("--w", type=float, help="alignment branch scale (default 1.0)")
    g.add_argument("--s", type=float, help="override the adapter scale from the weights file")
    g.add_argument("--tol", type=float, help="marginal violation threshold (default 1e-9)")
    g.add_argument("--max-iter", dest="max_iter", type=int, help="iteration cap (default 10000)")
    g.add_argument("--stabilized", action=argparse.BooleanOptionalAction, default=None,
                   help="force or forbid the log-domain solver (default: automatic)")
    g.add_argument("--strict", action="store_true", help="exit 2 when Sinkhorn does not converge")
    p.add_argument("--acoustic", help="acoustic feature file")
    p.add_argument("--linguistic", help="linguistic feature file")
    p.add_argument("--out-dir", dest="out_dir", help="output directory (default .)")


def build_manifest(args):
    values = {}
    if args.manifest:
        try:
            with open(args.manifest) as fh:
                values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read manifest {args.manifest}: {exc}") from None
        if "lambda" in values:
            values["lam"] = values.pop("lambda")
        base = os.path.dirname(os.path.abspath(args.manifest))
        for key in ("acoustic", "linguistic", "labels", "weights", "out_dir"):
            if values.get(key) is not None and not os.path.isabs(values[key]):
                values[key] = os.path.join(base, values[key])
    if args.preset:
        for key, v in PRESETS[args.preset].items():
            values.setdefault(key, v)
    for key in ("acoustic", "linguistic", "labels", "weights", "out_dir", "beta", "epsilon",
                "lam", "w", "s", "tol", "max_iter", "stabilized"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    unknown = set(values) - set(RunManifest.__dataclass_fields__)
    if unknown:
        raise InputError(f"unknown manifest keys: {', '.join(sorted(unknown))}")
    if values.get("acoustic") is None or values.get("linguistic") is None:
        raise InputError("--acoustic and --linguistic are required")
    return RunManifest(**values)


def _dump_json(path, obj):
    io.atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _solve(C, manifest):
    try:
        return sinkhorn(C, config=manifest.config())
    except SinkhornOverflowError as exc:
        raise InputError(f"{exc} (pass --stabilized)") from None


def cmd_coupling(args):
    m = build_manifest(args)
    m.validate()
    H = io.read_features(m.acoustic)
    Z = io.read_features(m.linguistic)
    if H.shape[1] != Z.shape[1]:
        raise InputError(f"feature dimensions differ: {H.shape[1]} vs {Z.shape[1]}")
    C = tot_cost(H, Z, m.beta)
    gamma = _solve(C, m)
    d2 = temporal_distance(*C.shape) ** 2
    stats = {
        "rows": C.shape[0],
        "cols": C.shape[1],
        "beta": m.beta,
        "epsilon": m.epsilon,
        "stabilized": gamma.stabilized,
        "iterations": gamma.n_iter,
        "converged": gamma.converged,
        "marginal_violation": gamma.violation,
        "transport_cost": ot_objective(gamma, C),
        "cosine_cost": ot_objective(gamma, cosine_cost(H, Z)),
        "temporal_spread": ot_objective(gamma, d2),
        "entropy": entropy(gamma),
        "near_diagonal_mass": near_diagonal_mass(gamma.plan),
    }
    io.write_coupling_csv(os.path.join(m.out_dir, "coupling.csv"), gamma.plan)
    _dump_json(os.path.join(m.out_dir, "coupling_stats.json"), stats)
    return _exit_for(gamma.converged, args.strict)


def cmd_loss(args):
    m = build_manifest(args)
    m.validate(need_loss_inputs=True)
    H = io.read_features(m.acoustic)
    Z = io.read_features(m.linguistic)
    labels = io.read_labels(m.labels)
    weights = io.read_weights(m.weights)
    if m.s is not None:
        weights = weights.replace_s(m.s)
    if len(labels) != Z.shape[0]:
        raise InputError(f"labels have {len(labels)} ids but the linguistic file has {Z.shape[0]} rows")
    if weights.d_t != Z.shape[1]:
        raise InputError(f"weights map to width {weights.d_t}, linguistic features have {Z.shape[1]}")
    if any(i >= weights.vocab_size for i in labels.ids):
        raise InputError("label ids exceed the vocabulary size of fc1")
    try:
        report = evaluate_pair(H, Z, labels, weights, beta=m.beta, config=m.config(),
                               lam=m.lam, w=m.w, blank=args.blank)
    except SinkhornOverflowError as exc:
        raise InputError(f"{exc} (pass --stabilized)") from None
    out = report.as_dict()
    out["s"] = weights.s
    _dump_json(os.path.join(m.out_dir, "loss_report.json"), out)
    return _exit_for(report.diagnostics["converged"], args.strict)


def _exit_for(converged, strict):
    if not converged:
        logger.warning("Sinkhorn did not reach the tolerance")
        if strict:
            return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_heatmap(args):
    plan = io.read_coupling_csv(args.coupling)
    io.write_pgm(args.output, plan)
    return EXIT_OK


def cmd_synth(args):
    if not os.path.isdir(args.out_dir):
        raise InputError(f"output directory does not exist: {args.out_dir}")
    pair = make_pair(args.length_a, args.length_t, args.dim, args.seed, warp=args.warp,
                     noise=args.noise, vocab_size=args.vocab_size, s=args.s)
    io.write_features(os.path.join(args.out_dir, "acoustic.txt"), pair.acoustic)
    io.write_features(os.path.join(args.out_dir, "linguistic.txt"), pair.linguistic)
    io.write_labels(os.path.join(args.out_dir, "labels.txt"), pair.labels)
    io.write_weights(os.path.join(args.out_dir, "weights.txt"), pair.weights)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="tot-align", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coupling", help="solve the coupling and write CSV + stats")
    _hyper_flags(p)
    p.set_defaults(func=cmd_coupling)

    p = sub.add_parser("loss", help="evaluate the combined objective and write a report")
    _hyper_flags(p)
    p.add_argument("--labels", help="labels file")
    p.add_argument("--weights", help="adapter weights file")
    p.add_argument("--blank", type=int, default=0, help="CTC blank id (default 0)")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("heatmap", help="render a coupling CSV as a P2 graymap")
    p.add_argument("coupling")
    p.add_argument("output")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("synth", help="generate a seeded synthetic pair")
    p.add_argument("--length-a", dest="length_a", type=int, required=True,
                   help="number of acoustic frames")
    p.add_argument("--length-t", dest="length_t", type=int, required=True,
                   help="number of tokens, CLS and SEP included")
    p.add_argument("--dim", type=int, required=True, help="feature dimension")
    p.add_argument("--seed", type=int, default=0, help="SplitMix64 seed (default 0)")
    p.add_argument("--warp", action=argparse.BooleanOptionalAction, default=True,
                   help="stretch tokens over frames; --no-warp needs equal lengths")
    p.add_argument("--noise", type=float, default=0.1,
                   help="standard deviation of acoustic noise (default 0.1)")
    p.add_argument("--vocab-size", dest="vocab_size", type=int, default=8,
                   help="vocabulary size, blank and CLS/SEP included (default 8)")
    p.add_argument("--s", type=float, default=0.1, help="adapter scale stored in weights.txt")
    p.add_argument("--out-dir", dest="out_dir", default=".", help="output directory (default .)")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, io.ParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
