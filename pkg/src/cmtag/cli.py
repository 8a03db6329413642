"""Command-line pipeline: annotate, cluster, init-cm, train, eval, benchmark.

Every run resolves its settings from built-in defaults, then a TOML
config file (top-level keys, overridden by a [subcommand] table), then
explicit flags, and writes a manifest.json recording argv and the fully
resolved configuration.  Replaying a manifest's argv into a fresh
--out-dir reproduces the output files byte for byte.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import benchmark as bench
from .corpus import TagSet, read_conll, write_conll
from .distant import annotate, collect_pairs, load_gazetteer
from .embeddings import fit_pca, load_vectors
from .errors import CmtagError, ConfigError
from .evaluation import render_report, report_json, score
from .noise import (NOISE_MODES, build_model, identity_logits, load_model,
                    render_heatmap, row_softmax, save_model, ConfusionModel)
from .tagger import (TrainConfig, load_checkpoint, predict, save_checkpoint,
                     train, write_log)
from .clustering import (brown_cluster, kmeans_cluster, load_clustering,
                         save_clustering)


def _load_config(path):
    if path is None:
        return {}
    if sys.version_info >= (3, 11):
        import tomllib as toml
    else:
        import tomli as toml
    try:
        with open(path, "rb") as fh:
            return toml.load(fh)
    except FileNotFoundError:
        raise ConfigError("config file not found: %s" % path)
    except toml.TOMLDecodeError as exc:
        raise ConfigError("bad config file %s: %s" % (path, exc))


def _resolve(args, command, defaults):
    """defaults < config top level < config [command] table < CLI flag."""
    doc = _load_config(args.config)
    table = doc.get(command, {})
    if not isinstance(table, dict):
        raise ConfigError("[%s] must be a table" % command)
    resolved = {}
    for key, builtin in defaults.items():
        value = getattr(args, key, None)
        if value is None:
            value = table.get(key, doc.get(key, builtin))
        resolved[key] = value
    return resolved


def _tagset(resolved):
    types = resolved.get("types")
    if isinstance(types, str):
        types = [t.strip() for t in types.split(",") if t.strip()]
    return TagSet(types) if types else TagSet()


def _out_path(resolved, name):
    out_dir = resolved["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


def _write_manifest(command, argv, resolved, outputs):
    path = _out_path(resolved, "manifest.json")
    doc = {
        "format": "cmtag-manifest",
        "version": 1,
        "command": command,
        "argv": list(argv),
        "config": {k: v for k, v in sorted(resolved.items())},
        "outputs": sorted(outputs),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _check_outputs(resolved, outputs):
    """Artifacts must exist and parse back; success is only then real."""
    for name in outputs:
        path = _out_path(resolved, name)
        if not os.path.exists(path):
            raise CmtagError("expected output missing: %s" % path)
        if name.endswith(".json"):
            with open(path, encoding="utf-8") as fh:
                json.load(fh)
        elif name.endswith(".jsonl"):
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        json.loads(line)
        else:
            with open(path, "rb") as fh:
                fh.read()


def _parse_gazetteers(values):
    entries = []
    for item in values or []:
        etype, eq, path = item.partition("=")
        if not eq or not etype or not path:
            raise ConfigError("gazetteer must be TYPE=path, got %r" % item)
        entries.append((path, etype))
    if not entries:
        raise ConfigError("at least one --gazetteer TYPE=path is required")
    return entries


# ---------------------------------------------------------------------------
# subcommands


def _cmd_annotate(args, argv):
    resolved = _resolve(args, "annotate", {
        "input": None, "gazetteer": None, "case_fold": None, "types": None,
        "out": "annotated.conll", "out_dir": ".", "seed": 0, "config": None,
    })
    if resolved["input"] is None:
        raise ConfigError("annotate needs --input")
    gaz = load_gazetteer(_parse_gazetteers(resolved["gazetteer"]),
                         case_fold=bool(resolved["case_fold"]))
    corpus = read_conll(resolved["input"], tag_column=None, role="noisy")
    labeled = annotate(corpus, gaz)
    write_conll(labeled, _out_path(resolved, resolved["out"]))
    outputs = [resolved["out"]]
    _write_manifest("annotate", argv, resolved, outputs)
    return resolved, outputs


def _cmd_cluster(args, argv):
    resolved = _resolve(args, "cluster", {
        "method": None, "vectors": None, "input": None, "k": 10,
        "pca": None, "vocab_cap": None, "window": 50,
        "out": "clusters.tsv", "out_dir": ".", "seed": 0, "config": None,
    })
    method = resolved["method"]
    if method == "kmeans":
        if resolved["vectors"] is None:
            raise ConfigError("cluster kmeans needs --vectors")
        table = load_vectors(resolved["vectors"])
        words = sorted(table.vectors)
        mat = np.stack([table.vectors[w] for w in words])
        if resolved["pca"] is not None:
            pca = fit_pca(mat, int(resolved["pca"]), seed=resolved["seed"])
            mat = np.stack([pca.project(row) for row in mat])
        points = {w: mat[i] for i, w in enumerate(words)}
        clustering = kmeans_cluster(points, int(resolved["k"]),
                                    seed=resolved["seed"])
    elif method == "brown":
        if resolved["input"] is None:
            raise ConfigError("cluster brown needs --input")
        corpus = read_conll(resolved["input"], tag_column=None)
        cap = resolved["vocab_cap"]
        clustering = brown_cluster(corpus, int(resolved["k"]),
                                   vocab_cap=None if cap is None else int(cap),
                                   window=int(resolved["window"]))
    else:
        raise ConfigError("cluster method must be brown or kmeans")
    save_clustering(clustering, _out_path(resolved, resolved["out"]))
    outputs = [resolved["out"]]
    _write_manifest("cluster", argv, resolved, outputs)
    return resolved, outputs


def _noise_mode_of(mode):
    ms = bench.parse_mode(mode)
    if ms.noise_mode is None:
        raise ConfigError("mode %r has no confusion matrix" % mode)
    return ms


def _cmd_init_cm(args, argv):
    resolved = _resolve(args, "init-cm", {
        "mode": "global-cm", "clean": None, "gazetteer": None,
        "case_fold": None, "clusters": None, "noisy": None, "types": None,
        "lam": 0.25, "fraction": 0.75, "alpha": 1e-6, "min_pairs": 5,
        "out": "cm.json", "heatmaps": "heatmaps.txt",
        "out_dir": ".", "seed": 0, "config": None,
    })
    tagset = _tagset(resolved)
    ms = _noise_mode_of(resolved["mode"])
    if resolved["clean"] is None:
        raise ConfigError("init-cm needs --clean gold data")
    clean = read_conll(resolved["clean"], tagset=tagset)
    pairs = []
    if ms.noise_mode != "global-identity":
        gaz = load_gazetteer(_parse_gazetteers(resolved["gazetteer"]),
                             case_fold=bool(resolved["case_fold"]))
        pairs = collect_pairs(clean, gaz)
    clustering = None
    counts = None
    if ms.noise_mode.startswith("cluster"):
        if resolved["clusters"] is None:
            raise ConfigError("cluster modes need --clusters")
        clustering = load_clustering(resolved["clusters"])
        corpora = [clean]
        if resolved["noisy"] is not None:
            corpora.append(read_conll(resolved["noisy"], tag_column=None))
        counts = bench.count_group_instances(corpora, clustering)
    lam = resolved["lam"] if ms.noise_mode.endswith("-ip") else 0.0
    cm = build_model(pairs, clustering, ms.noise_mode, lam=lam,
                     fraction=float(resolved["fraction"]),
                     smoothing=float(resolved["alpha"]), tagset=tagset,
                     group_counts=counts,
                     min_pairs=int(resolved["min_pairs"]))
    save_model(cm, tagset, _out_path(resolved, resolved["out"]))
    blocks = [render_heatmap(row_softmax(cm.global_logits), list(tagset),
                             title="global")]
    for g in sorted(cm.groups):
        blocks.append(render_heatmap(row_softmax(cm.groups[g]), list(tagset),
                                     title="group %d" % g))
    with open(_out_path(resolved, resolved["heatmaps"]), "w",
              encoding="utf-8") as fh:
        fh.write("\n\n".join(blocks) + "\n")
    outputs = [resolved["out"], resolved["heatmaps"]]
    _write_manifest("init-cm", argv, resolved, outputs)
    return resolved, outputs


def _cmd_train(args, argv):
    resolved = _resolve(args, "train", {
        "mode": None, "clean": None, "noisy": None, "dev": None,
        "embeddings": None, "clusters": None, "cm": None, "types": None,
        "lr": 2e-3, "epochs": 20, "batch_size": 64, "hidden": 128,
        "window": 2, "patience": 5, "ratio_clean": 1, "ratio_noisy": 1,
        "checkpoint": "checkpoint.json", "log": "train_log.jsonl",
        "out_dir": ".", "seed": 0, "config": None,
    })
    if resolved["mode"] is None:
        raise ConfigError("train needs --mode")
    ms = bench.parse_mode(resolved["mode"])
    for key in ("clean", "dev", "embeddings"):
        if resolved[key] is None:
            raise ConfigError("train needs --%s" % key)
    tagset = _tagset(resolved)
    clean = read_conll(resolved["clean"], tagset=tagset)
    dev = read_conll(resolved["dev"], tagset=tagset)
    noisy = None
    if ms.train_mode != "base":
        if resolved["noisy"] is None:
            raise ConfigError("mode %r needs --noisy" % resolved["mode"])
        noisy = read_conll(resolved["noisy"], tagset=tagset, role="noisy")
    emb = load_vectors(resolved["embeddings"])
    clustering = None
    if ms.cluster_method is not None:
        if resolved["clusters"] is None:
            raise ConfigError("mode %r needs --clusters" % resolved["mode"])
        clustering = load_clustering(resolved["clusters"])
    cm = None
    if ms.train_mode == "cm":
        if resolved["cm"] is not None:
            cm, _tags = load_model(resolved["cm"])
            if cm.mode != ms.noise_mode:
                raise ConfigError(
                    "confusion model is %r but --mode asks for %r"
                    % (cm.mode, ms.noise_mode))
        elif ms.noise_mode == "global-identity":
            cm = ConfusionModel(identity_logits(len(tagset)),
                                mode="global-identity")
        else:
            raise ConfigError("mode %r needs --cm from init-cm"
                              % resolved["mode"])
    config = TrainConfig(
        learning_rate=float(resolved["lr"]), epochs=int(resolved["epochs"]),
        batch_size=int(resolved["batch_size"]), hidden=int(resolved["hidden"]),
        window=int(resolved["window"]), patience=int(resolved["patience"]),
        ratio_clean=int(resolved["ratio_clean"]),
        ratio_noisy=int(resolved["ratio_noisy"]),
        seed=int(resolved["seed"]), mode=ms.train_mode,
    )
    model, cm, log = train(clean, noisy, dev, cm, config, emb,
                           clustering=clustering, tagset=tagset)
    best = max((e["dev_f1"] for e in log), default=0.0)
    save_checkpoint(_out_path(resolved, resolved["checkpoint"]), model, cm,
                    tagset, epoch=len(log), dev_f1=best)
    write_log(log, _out_path(resolved, resolved["log"]))
    outputs = [resolved["checkpoint"], resolved["log"]]
    _write_manifest("train", argv, resolved, outputs)
    return resolved, outputs


def _cmd_eval(args, argv):
    resolved = _resolve(args, "eval", {
        "gold": None, "pred": None, "checkpoint": None, "embeddings": None,
        "types": None, "scheme": "io",
        "report": "report.txt", "report_json": "report.json",
        "predictions": "predictions.conll",
        "out_dir": ".", "seed": 0, "config": None,
    })
    if resolved["gold"] is None:
        raise ConfigError("eval needs --gold")
    tagset = _tagset(resolved)
    gold = read_conll(resolved["gold"], tagset=tagset)
    outputs = [resolved["report"], resolved["report_json"]]
    if resolved["pred"] is not None:
        predicted = read_conll(resolved["pred"], tagset=tagset)
    elif resolved["checkpoint"] is not None:
        if resolved["embeddings"] is None:
            raise ConfigError("eval from a checkpoint needs --embeddings")
        model, _cm, tags, _extras = load_checkpoint(resolved["checkpoint"])
        emb = load_vectors(resolved["embeddings"])
        predicted = predict(model, gold, emb, tagset)
        write_conll(predicted, _out_path(resolved, resolved["predictions"]))
        outputs.append(resolved["predictions"])
    else:
        raise ConfigError("eval needs --pred or --checkpoint")
    report = score(gold, predicted, scheme=resolved["scheme"])
    with open(_out_path(resolved, resolved["report"]), "w",
              encoding="utf-8") as fh:
        fh.write(render_report(report) + "\n")
    with open(_out_path(resolved, resolved["report_json"]), "w",
              encoding="utf-8") as fh:
        json.dump(report_json(report), fh, indent=2)
        fh.write("\n")
    _write_manifest("eval", argv, resolved, outputs)
    return resolved, outputs


def _cmd_benchmark(args, argv):
    resolved = _resolve(args, "benchmark", {
        "spec": "default", "seeds": 5, "modes": None,
        "p": 4, "pca": 8, "fraction": 0.75, "lam": 0.25,
        "epochs": 16, "batch_size": 64, "hidden": 64, "window": 2,
        "trend": "trend.txt", "trend_json": "trend.json",
        "out_dir": ".", "seed": 0, "config": None,
    })
    if resolved["spec"] == "default":
        spec = bench.default_spec()
    else:
        spec = bench.load_spec(resolved["spec"])
    modes = resolved["modes"]
    if modes is None:
        modes = "base,base+noise,global-cm,kmeans-cm-freq-ip"
    if isinstance(modes, str):
        modes = [m.strip() for m in modes.split(",") if m.strip()]
    variants = [bench.VariantConfig(m, p=int(resolved["p"]),
                                    pca_dim=int(resolved["pca"]),
                                    fraction=float(resolved["fraction"]),
                                    lam=float(resolved["lam"]))
                for m in modes]
    config = TrainConfig(epochs=int(resolved["epochs"]),
                         batch_size=int(resolved["batch_size"]),
                         hidden=int(resolved["hidden"]),
                         window=int(resolved["window"]))
    base_seed = int(resolved["seed"])
    seeds = [base_seed + i for i in range(int(resolved["seeds"]))]
    report = bench.run_matrix_experiment(
        spec, variants, seeds, train_config=config,
        progress=lambda line: print(line, file=sys.stderr))
    with open(_out_path(resolved, resolved["trend"]), "w",
              encoding="utf-8") as fh:
        fh.write(bench.render_trend(report) + "\n")
    with open(_out_path(resolved, resolved["trend_json"]), "w",
              encoding="utf-8") as fh:
        json.dump(bench.trend_json(report), fh, indent=2)
        fh.write("\n")
    print(bench.render_trend(report))
    outputs = [resolved["trend"], resolved["trend_json"]]
    _write_manifest("benchmark", argv, resolved, outputs)
    return resolved, outputs


# ---------------------------------------------------------------------------
# argument plumbing


def _add_common(sub):
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--config", default=None)
    sub.add_argument("--out-dir", dest="out_dir", default=None)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cmtag",
        description="sequence tagging with confusion-matrix noise models")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("annotate", help="label raw text with a gazetteer")
    p.add_argument("--input")
    p.add_argument("--gazetteer", action="append",
                   help="TYPE=path, repeatable")
    p.add_argument("--case-fold", dest="case_fold", action="store_const",
                   const=True, default=None)
    p.add_argument("--types")
    p.add_argument("--out")
    _add_common(p)

    p = subs.add_parser("cluster", help="compute word clusters")
    p.add_argument("method", choices=["brown", "kmeans"])
    p.add_argument("--vectors")
    p.add_argument("--input")
    p.add_argument("--k", type=int)
    p.add_argument("--pca", type=int)
    p.add_argument("--vocab-cap", dest="vocab_cap", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--out")
    _add_common(p)

    p = subs.add_parser("init-cm", help="initialize confusion matrices")
    p.add_argument("--mode")
    p.add_argument("--clean")
    p.add_argument("--gazetteer", action="append")
    p.add_argument("--case-fold", dest="case_fold", action="store_const",
                   const=True, default=None)
    p.add_argument("--clusters")
    p.add_argument("--noisy")
    p.add_argument("--types")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--fraction", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--min-pairs", dest="min_pairs", type=int)
    p.add_argument("--out")
    p.add_argument("--heatmaps")
    _add_common(p)

    p = subs.add_parser("train", help="train a tagger variant")
    p.add_argument("--mode")
    p.add_argument("--clean")
    p.add_argument("--noisy")
    p.add_argument("--dev")
    p.add_argument("--embeddings")
    p.add_argument("--clusters")
    p.add_argument("--cm")
    p.add_argument("--types")
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--ratio-clean", dest="ratio_clean", type=int)
    p.add_argument("--ratio-noisy", dest="ratio_noisy", type=int)
    p.add_argument("--checkpoint")
    p.add_argument("--log")
    _add_common(p)

    p = subs.add_parser("eval", help="entity-level scoring")
    p.add_argument("--gold")
    p.add_argument("--pred")
    p.add_argument("--checkpoint")
    p.add_argument("--embeddings")
    p.add_argument("--types")
    p.add_argument("--scheme", choices=["io", "iob2"], default=None)
    p.add_argument("--report")
    p.add_argument("--report-json", dest="report_json")
    p.add_argument("--predictions")
    _add_common(p)

    p = subs.add_parser("benchmark", help="synthetic trend experiment")
    p.add_argument("--spec")
    p.add_argument("--seeds", type=int)
    p.add_argument("--modes")
    p.add_argument("--p", type=int)
    p.add_argument("--pca", type=int)
    p.add_argument("--fraction", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--trend")
    p.add_argument("--trend-json", dest="trend_json")
    _add_common(p)
    return parser


_COMMANDS = {
    "annotate": _cmd_annotate,
    "cluster": _cmd_cluster,
    "init-cm": _cmd_init_cm,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "benchmark": _cmd_benchmark,
}


def main(argv=None):
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        resolved, outputs = _COMMANDS[args.command](args, argv)
        _check_outputs(resolved, outputs)
    except CmtagError as exc:
        print("cmtag: error: %s" % exc, file=sys.stderr)
        return 1
    except OSError as exc:
        print("cmtag: error: %s" % exc, file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
