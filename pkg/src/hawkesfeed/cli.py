"""Command-line entry points.

Exit codes: 0 success, 2 usage, 3 unreadable or malformed input files,
4 bad configuration, 5 estimation failures.
"""

from __future__ import annotations

import argparse
import sys

from . import io
from .core import corpus_participants, intensity
from .errors import ConfigError, DataFormatError, EstimationError
from .features import (
    FEATURE_SETS,
    annotate_corpus,
    build_feature_store,
    demo_lexicon,
    feature_set_masks,
)
from .fit import DEFAULT_PENALTY_GRID, FitConfig, cross_validate, fit
from .rank_eval import (
    CANDIDATE_POLICIES,
    RANKER_NAMES,
    candidate_cascades,
    evaluate,
    prioritize,
)
from .simulate import branching_ratio, simulate_corpus

MODEL_FREE_RANKERS = ("RCHR", "NN", "COX-LNG", "COX-PSY", "HWK")


def _decay_flags(p):
    p.add_argument("--post-decay", type=float, default=0.001, metavar="RATE",
                   help="post influence decay rate per minute (default 0.001)")
    p.add_argument("--comment-decay", type=float, default=0.01, metavar="RATE",
                   help="comment influence decay rate per minute (default 0.01)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hawkesfeed",
        description="Conversation-cascade intensity models for feed ranking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-features",
                       help="build a feature store from a training corpus")
    p.add_argument("corpus", help="training corpus (JSON lines)")
    p.add_argument("--lexicon", help="lexicon file; default is the built-in demo")
    p.add_argument("--out", required=True, help="feature store output path")
    p.set_defaults(func=cmd_extract_features)

    p = sub.add_parser("fit", help="estimate model weights on a corpus")
    p.add_argument("corpus", help="training corpus (JSON lines)")
    p.add_argument("--features", required=True, help="feature store from extract-features")
    p.add_argument("--out", required=True, help="model output path")
    p.add_argument("--penalty", type=float, default=0.0,
                   help="l1 penalty weight (default 0)")
    p.add_argument("--cv", action="store_true",
                   help="pick the penalty by cross-validation instead")
    p.add_argument("--penalty-grid", metavar="Z1,Z2,...",
                   help="comma-separated penalties searched by --cv")
    p.add_argument("--feature-set", choices=FEATURE_SETS, default="all",
                   help="restrict the weights to one feature family")
    p.add_argument("--max-iterations", type=int, default=500)
    p.add_argument("--tolerance", type=float, default=1e-9)
    _decay_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="sample a synthetic corpus")
    p.add_argument("config", help="simulator config (JSON)")
    p.add_argument("--out", required=True, help="corpus output path")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--n-cascades", type=int, help="override the config cascade count")
    p.add_argument("--out-features", help="also write the generator's feature store")
    p.add_argument("--out-model", help="also write the generator's true weights")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rank", help="order one user's feed at a point in time")
    p.add_argument("corpus", help="corpus of candidate cascades (JSON lines)")
    p.add_argument("--model", required=True, help="fitted model file")
    p.add_argument("--features", required=True, help="feature store")
    p.add_argument("--user", required=True, help="user whose feed to rank")
    p.add_argument("--t", required=True, type=float, metavar="MINUTES",
                   help="global time of the ranking")
    p.add_argument("--policy", choices=CANDIDATE_POLICIES, default="all",
                   help="candidate cascade policy (default all)")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("evaluate", help="score a ranker on held-out cascades")
    p.add_argument("ranker", choices=RANKER_NAMES, help="ranker to evaluate")
    p.add_argument("--train", required=True, help="training corpus (JSON lines)")
    p.add_argument("--test", required=True, help="test corpus (JSON lines)")
    p.add_argument("--out", required=True, help="report output path (JSON lines)")
    p.add_argument("--features", help="feature store (needed by all but RCHR and HWK)")
    p.add_argument("--model", help="fitted model reused by HWK-* rankers")
    p.add_argument("--policy", choices=CANDIDATE_POLICIES, default="all")
    p.add_argument("--penalty", type=float, default=0.0,
                   help="l1 penalty when fitting HWK-* rankers")
    _decay_flags(p)
    p.set_defaults(func=cmd_evaluate)
    return parser


def cmd_extract_features(args):
    cascades = io.read_corpus(args.corpus)
    lexicon = io.read_lexicon(args.lexicon) if args.lexicon else demo_lexicon()
    store = build_feature_store(cascades, lexicon)
    io.write_store(args.out, store)
    print(
        f"extracted features for {len(store.character)} users, "
        f"{len(store.relationship)} directed pairs, "
        f"{len(store.content)} events -> {args.out}"
    )
    return 0


def cmd_fit(args):
    cascades = io.read_corpus(args.corpus)
    store = io.read_store(args.features)
    cascades = annotate_corpus(cascades, store)
    users = corpus_participants(cascades)
    pair_mask, content_mask = feature_set_masks(
        args.feature_set, store.pair_names, store.content_names
    )
    config = FitConfig(
        penalty=args.penalty,
        post_decay_rate=args.post_decay,
        comment_decay_rate=args.comment_decay,
        max_iterations=args.max_iterations,
        tolerance=args.tolerance,
        pair_mask=pair_mask,
        content_mask=content_mask,
    )
    diagnostics = {}
    if args.cv:
        if args.penalty_grid:
            grid = tuple(float(z) for z in args.penalty_grid.split(","))
        else:
            grid = DEFAULT_PENALTY_GRID
        cv = cross_validate(cascades, store, users,
                            FitConfig(penalty_grid=grid,
                                      post_decay_rate=args.post_decay,
                                      comment_decay_rate=args.comment_decay,
                                      pair_mask=pair_mask,
                                      content_mask=content_mask))
        config.penalty = cv.best_penalty
        diagnostics["cv_table"] = cv.table
        print(f"cross-validation picked penalty {cv.best_penalty}")
    result = fit(cascades, store, users, config)
    diagnostics.update(
        iterations=result.iterations,
        converged=result.converged,
        final_objective=result.final_objective,
        log_likelihood=result.log_likelihood,
        penalty=list(result.penalty),
    )
    io.write_model(args.out, result.params, diagnostics)
    print(
        f"fit {'converged' if result.converged else 'stopped'} after "
        f"{result.iterations} iterations, log-likelihood {result.log_likelihood:.4f} "
        f"-> {args.out}"
    )
    return 0


def cmd_simulate(args):
    config = io.read_sim_config(args.config, seed=args.seed)
    cascades = simulate_corpus(config, n_cascades=args.n_cascades)
    io.write_corpus(args.out, cascades)
    if args.out_features:
        io.write_store(args.out_features, config.store)
    if args.out_model:
        io.write_model(args.out_model, config.params)
    n_comments = sum(len(c.comments) for c in cascades)
    n_truncated = sum(c.truncated for c in cascades)
    print(
        f"simulated {len(cascades)} cascades, {n_comments} comments "
        f"(branching ratio {branching_ratio(config):.3f}, "
        f"{n_truncated} truncated) -> {args.out}"
    )
    return 0


def cmd_rank(args):
    cascades = io.read_corpus(args.corpus)
    store = io.read_store(args.features)
    params = io.read_model(args.model)
    cascades = annotate_corpus(cascades, store)
    candidates = candidate_cascades(cascades, args.t, args.policy)
    ordered = prioritize(args.user, args.t, candidates, {}, params, store)
    for position, c in enumerate(ordered):
        lam = intensity(args.user, c, args.t - c.origin, params, store)
        print(f"{position}\t{c.cascade_id}\t{lam:.6g}")
    return 0


def cmd_evaluate(args):
    train = io.read_corpus(args.train)
    test = io.read_corpus(args.test)
    store = io.read_store(args.features) if args.features else None
    model = None
    if args.model:
        if args.ranker in MODEL_FREE_RANKERS:
            print(
                f"warning: {args.ranker} does not take a model file; ignoring "
                f"{args.model}",
                file=sys.stderr,
            )
        else:
            model = io.read_model(args.model)
    config = FitConfig(
        penalty=args.penalty,
        post_decay_rate=args.post_decay,
        comment_decay_rate=args.comment_decay,
    )
    report = evaluate(
        args.ranker, train, test,
        store=store, fit_config=config, model_params=model, policy=args.policy,
    )
    io.write_report(args.out, report)
    for g in report.groups:
        print(
            f"{args.ranker}\tgroup {g.group_id}\tAveRank {g.ave_rank:.4f}\t"
            f"NAveRank {g.nave_rank:.4f}\t({g.n_comments} comments, "
            f"mean activity {g.mean_activity:.2f})"
        )
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except EstimationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
