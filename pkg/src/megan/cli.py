"""Command-line interface.

Commands: synth (generate a seeded multi-view graph), train (fit the
adversarial model and export the embedding), eval nc / eval lp
(node classification and link prediction), export (pull either
parameter table out of a checkpoint), project (2-D PCA coordinates).

Every command writes a JSON run manifest next to its outputs with the
resolved configuration, input digests, and tool version. An optional
``--config FILE`` of ``key=value`` lines supplies flag defaults;
explicit flags win. Exit codes: 0 success, 1 runtime or I/O failure,
2 usage error.
"""

import argparse
import datetime
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import MeganError
from .evaluate import (
    link_prediction_experiment,
    node_classification,
    project_2d,
)
from .graph import load_graph, load_labels, save_graph
from .synth import SbmSpec, ViewSpec, complementary_preset, generate
from .trainer import (
    TrainConfig,
    export_embedding,
    load_checkpoint,
    load_embedding,
    save_checkpoint,
    save_history,
    train,
)


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _utcnow():
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def write_manifest(path, command, args, inputs, outputs, started):
    config = {
        key: value
        for key, value in sorted(vars(args).items())
        if key != "func" and not key.startswith("_")
    }
    manifest = {
        "tool": "megan",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": {p: _sha256(p) for p in inputs},
        "outputs": sorted(outputs),
        "started_utc": started,
        "finished_utc": _utcnow(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _expand_config_tokens(argv):
    """Splice --config file entries in as flags ahead of the user's flags."""
    path = None
    cleaned = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok == "--config":
            if i + 1 >= len(argv):
                raise MeganError("--config needs a file argument")
            path = argv[i + 1]
            i += 2
            continue
        if tok.startswith("--config="):
            path = tok.split("=", 1)[1]
            i += 1
            continue
        cleaned.append(tok)
        i += 1
    if path is None:
        return argv
    tokens = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise MeganError(f"{path}:{line_no}: expected key=value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            flag = "--" + key.replace("_", "-")
            if value.lower() in ("true", "false"):
                if value.lower() == "true":
                    tokens.append(flag)
            else:
                tokens.extend([flag, value])
    # keep command words first so the tokens land in the right subparser
    head = 0
    while head < len(cleaned) and not cleaned[head].startswith("-"):
        head += 1
    return cleaned[:head] + tokens + cleaned[head:]


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=0, help="master seed for all randomness")
    parser.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("MEGAN_THREADS", "1")),
        help="worker cap (results never depend on it); env MEGAN_THREADS",
    )
    parser.add_argument(
        "--config", metavar="FILE", help="key=value file of flag defaults; flags win"
    )


def _add_train_flags(parser):
    base = TrainConfig()
    parser.add_argument("--d", type=int, default=base.d, help="embedding dimension")
    parser.add_argument("--epochs", type=int, default=base.epochs)
    parser.add_argument("--pretrain-epochs", type=int, default=base.pretrain_epochs)
    parser.add_argument("--t", type=int, default=base.t, help="discriminating samples per node")
    parser.add_argument(
        "--s", type=int, default=base.s, help="generated samples per positive pair"
    )
    parser.add_argument("--g-steps", type=int, default=base.g_steps)
    parser.add_argument("--d-steps", type=int, default=base.d_steps)
    parser.add_argument("--lr-g", type=float, default=base.lr_g)
    parser.add_argument("--lr-d", type=float, default=base.lr_d)
    parser.add_argument("--mode", choices=["greedy", "proportional"], default=base.mode)
    parser.add_argument("--batch-pairs", type=int, default=base.batch_pairs)
    parser.add_argument("--momentum", type=float, default=base.momentum)
    parser.add_argument("--optimizer", choices=["adam", "sgd"], default=base.optimizer)
    parser.add_argument("--mlp-lr-scale", type=float, default=base.mlp_lr_scale)
    parser.add_argument("--early-stop", action="store_true")
    parser.add_argument("--d-step-per-edge", action="store_true")
    parser.add_argument("--reward-baseline", action="store_true")


def _train_config(args):
    return TrainConfig(
        d=args.d,
        t=args.t,
        s=args.s,
        g_steps=args.g_steps,
        d_steps=args.d_steps,
        epochs=args.epochs,
        lr_g=args.lr_g,
        lr_d=args.lr_d,
        mode=args.mode,
        seed=args.seed,
        pretrain_epochs=args.pretrain_epochs,
        batch_pairs=args.batch_pairs,
        momentum=args.momentum,
        optimizer=args.optimizer,
        mlp_lr_scale=args.mlp_lr_scale,
        early_stop=args.early_stop,
        d_step_per_edge=args.d_step_per_edge,
        reward_baseline=args.reward_baseline,
    )


def _parse_fracs(text, parser):
    try:
        if ".." in text:
            lo, hi = (float(part) for part in text.split("..", 1))
            count = int(round((hi - lo) / 0.1)) + 1
            fracs = [round(lo + 0.1 * i, 10) for i in range(count)]
        else:
            fracs = [float(text)]
    except ValueError:
        parser.error(f"bad train fraction {text!r}")
    if not fracs or any(not 0.0 < f < 1.0 for f in fracs):
        parser.error(f"train fractions must lie in (0,1), got {text!r}")
    return fracs


def _write_metrics(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("task,view,seed,metric,value\n")
        for task, view, seed, metric, value in rows:
            fh.write(f"{task},{view},{seed},{metric},{value:.17g}\n")


def cmd_synth(args, parser):
    if args.n <= 0:
        parser.error(f"--n must be positive, got {args.n}")
    started = _utcnow()
    if args.preset == "complementary":
        if args.n < 120 or args.n % 4:
            parser.error(f"complementary preset needs n >= 120 divisible by 4, got {args.n}")
        graph = complementary_preset(args.n, args.seed)
    else:
        if args.views < 1 or args.communities < 1:
            parser.error("--views and --communities must be >= 1")
        if not 0.0 <= args.p_out <= args.p_in <= 1.0:
            parser.error(f"need 0 <= p_out <= p_in <= 1, got {args.p_in}/{args.p_out}")
        spec = SbmSpec(
            n=args.n,
            communities=args.communities,
            views=[ViewSpec(args.p_in, args.p_out) for _ in range(args.views)],
            seed=args.seed,
            view_correlation=args.view_correlation,
            pa_extra_edges=args.pa_extra_edges,
        )
        graph = generate(spec)
    edge_path = args.out_prefix + ".edges.tsv"
    label_path = args.out_prefix + ".labels.tsv"
    save_graph(graph, edge_path, label_path)
    write_manifest(
        args.out_prefix + ".manifest.json", "synth", args, [], [edge_path, label_path], started
    )
    print(f"wrote {edge_path} ({graph})")
    return 0


def cmd_train(args, parser):
    started = _utcnow()
    graph = load_graph(args.edges, args.labels, args.id_map)
    state = train(graph, _train_config(args))
    ckpt = args.out_prefix + ".ckpt"
    emb = args.out_prefix + ".emb.tsv"
    loss = args.out_prefix + ".loss.csv"
    save_checkpoint(state, ckpt)
    export_embedding(state, args.export_side, emb)
    save_history(state.history, loss)
    inputs = [p for p in (args.edges, args.labels, args.id_map) if p]
    write_manifest(
        args.out_prefix + ".manifest.json", "train", args, inputs, [ckpt, emb, loss], started
    )
    print(f"trained {state.epoch} epochs; wrote {emb}")
    return 0


def cmd_eval_nc(args, parser):
    started = _utcnow()
    embedding = load_embedding(args.embedding)
    labels = load_labels(args.labels, args.id_map)
    fracs = _parse_fracs(args.train_frac, parser)
    seeds = list(range(args.seed, args.seed + args.runs))
    rows = []
    for frac in fracs:
        result = node_classification(embedding, labels, frac, seeds, lam=args.reg)
        for seed, micro, macro in result.per_seed:
            rows.append(("nc", frac, seed, "micro_f1", micro))
            rows.append(("nc", frac, seed, "macro_f1", macro))
        rows.append(("nc", frac, "mean", "micro_f1", result.micro_f1_mean))
        rows.append(("nc", frac, "std", "micro_f1", result.micro_f1_std))
        rows.append(("nc", frac, "mean", "macro_f1", result.macro_f1_mean))
        rows.append(("nc", frac, "std", "macro_f1", result.macro_f1_std))
        print(
            f"nc train-frac {frac}: micro={result.micro_f1_mean:.4f}"
            f"+/-{result.micro_f1_std:.4f} macro={result.macro_f1_mean:.4f}"
            f"+/-{result.macro_f1_std:.4f}"
        )
    _write_metrics(args.out, rows)
    write_manifest(
        args.out + ".manifest.json", "eval nc", args, [args.embedding, args.labels], [args.out],
        started,
    )
    return 0


def cmd_eval_lp(args, parser):
    started = _utcnow()
    graph = load_graph(args.edges, args.labels, args.id_map)
    if not 0 <= args.view < graph.k:
        parser.error(f"--view must be in [0,{graph.k}), got {args.view}")
    if not 0.0 < args.holdout < 1.0:
        parser.error(f"--holdout must be in (0,1), got {args.holdout}")
    rows = []
    aucs, aps = [], []
    for run_seed in range(args.seed, args.seed + args.runs):
        cfg = _train_config(args)
        cfg.seed = run_seed

        def train_fn(reduced):
            return train(reduced, cfg).gen.embed

        auc, ap, _ = link_prediction_experiment(
            graph, args.view, args.holdout, train_fn, run_seed, lam=args.reg
        )
        rows.append(("lp", args.view, run_seed, "auc", auc))
        rows.append(("lp", args.view, run_seed, "ap", ap))
        aucs.append(auc)
        aps.append(ap)
        print(f"lp view {args.view} seed {run_seed}: auc={auc:.4f} ap={ap:.4f}")
    rows.append(("lp", args.view, "mean", "auc", float(np.mean(aucs))))
    rows.append(("lp", args.view, "std", "auc", float(np.std(aucs))))
    rows.append(("lp", args.view, "mean", "ap", float(np.mean(aps))))
    rows.append(("lp", args.view, "std", "ap", float(np.std(aps))))
    _write_metrics(args.out, rows)
    inputs = [p for p in (args.edges, args.labels, args.id_map) if p]
    write_manifest(args.out + ".manifest.json", "eval lp", args, inputs, [args.out], started)
    return 0


def cmd_export(args, parser):
    started = _utcnow()
    gen, disc = load_checkpoint(args.checkpoint)
    export_embedding((gen, disc), args.which, args.out)
    write_manifest(
        args.out + ".manifest.json", "export", args, [args.checkpoint], [args.out], started
    )
    print(f"wrote {args.out}")
    return 0


def cmd_project(args, parser):
    started = _utcnow()
    embedding = load_embedding(args.embedding)
    labels = load_labels(args.labels, args.id_map) if args.labels else {}
    coords = project_2d(embedding, seed=args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("node_id,x,y,label\n")
        for node, (x, y) in enumerate(coords):
            label = labels.get(node, "")
            fh.write(f"{node},{x:.17g},{y:.17g},{label}\n")
    inputs = [p for p in (args.embedding, args.labels) if p]
    write_manifest(args.out + ".manifest.json", "project", args, inputs, [args.out], started)
    print(f"wrote {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="megan", description="Adversarial multi-view network embedding."
    )
    parser.add_argument("--version", action="version", version=f"megan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a seeded synthetic multi-view graph")
    p_synth.add_argument("--preset", choices=["sbm", "complementary"], default="sbm")
    p_synth.add_argument("--n", type=int, required=True, help="node count")
    p_synth.add_argument("--communities", type=int, default=3)
    p_synth.add_argument("--views", type=int, default=2)
    p_synth.add_argument("--p-in", type=float, default=0.15)
    p_synth.add_argument("--p-out", type=float, default=0.02)
    p_synth.add_argument("--view-correlation", type=float, default=0.0)
    p_synth.add_argument("--pa-extra-edges", type=int, default=0)
    p_synth.add_argument("--out-prefix", required=True)
    _add_common(p_synth)
    p_synth.set_defaults(func=cmd_synth)

    p_train = sub.add_parser("train", help="train and export an embedding")
    p_train.add_argument("--edges", required=True)
    p_train.add_argument("--labels")
    p_train.add_argument("--id-map")
    p_train.add_argument("--out-prefix", required=True)
    p_train.add_argument(
        "--export-side", choices=["generator", "discriminator"], default="generator"
    )
    _add_train_flags(p_train)
    _add_common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate an embedding")
    eval_sub = p_eval.add_subparsers(dest="task", required=True)

    p_nc = eval_sub.add_parser("nc", help="node classification")
    p_nc.add_argument("--embedding", required=True)
    p_nc.add_argument("--labels", required=True)
    p_nc.add_argument("--id-map")
    p_nc.add_argument("--train-frac", default="0.5", help="fraction or sweep like 0.1..0.9")
    p_nc.add_argument("--runs", type=int, default=10)
    p_nc.add_argument("--reg", type=float, default=1.0, help="L2 strength")
    p_nc.add_argument("--out", required=True)
    _add_common(p_nc)
    p_nc.set_defaults(func=cmd_eval_nc)

    p_lp = eval_sub.add_parser("lp", help="link prediction with edge holdout and retrain")
    p_lp.add_argument("--edges", required=True)
    p_lp.add_argument("--labels")
    p_lp.add_argument("--id-map")
    p_lp.add_argument("--view", type=int, required=True)
    p_lp.add_argument("--holdout", type=float, default=0.5)
    p_lp.add_argument("--runs", type=int, default=5)
    p_lp.add_argument("--reg", type=float, default=1.0, help="L2 strength")
    p_lp.add_argument("--out", required=True)
    _add_train_flags(p_lp)
    _add_common(p_lp)
    p_lp.set_defaults(func=cmd_eval_lp)

    p_export = sub.add_parser("export", help="extract an embedding from a checkpoint")
    p_export.add_argument("--checkpoint", required=True)
    p_export.add_argument("--which", choices=["generator", "discriminator"], default="generator")
    p_export.add_argument("--out", required=True)
    _add_common(p_export)
    p_export.set_defaults(func=cmd_export)

    p_project = sub.add_parser("project", help="2-D PCA projection of an embedding")
    p_project.add_argument("--embedding", required=True)
    p_project.add_argument("--labels")
    p_project.add_argument("--id-map")
    p_project.add_argument("--out", required=True)
    _add_common(p_project)
    p_project.set_defaults(func=cmd_project)
    return parser


def main(argv=None):
    parser = build_parser()
    raw = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_expand_config_tokens(raw))
        return args.func(args, parser)
    except (MeganError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
