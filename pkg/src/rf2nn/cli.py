"""Command-line pipeline: ``rf2nn [--seed N] [--config FILE] [--out DIR] <command> ...``.

Every command writes its fully resolved configuration (``config.json``)
next to its outputs. JSON artifacts carry the seed and a hash of that
configuration and contain no timestamps, so identical configs give
byte-identical files.
"""

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import (FeatureStats, SYNTHETIC_KINDS, compute_feature_stats, limit_per_class,
                   load_csv, make_synthetic, split_dataset, zero_fraction)
from .datagen import GenerationConfig, confidence_distribution, sample_stream
from .forest import TreeTrainParams, forest_from_dict, load_forest, save_forest, train_forest
from .imitation import (evaluate_accuracy, evaluate_fidelity, imitate, predict_proba,
                        probe_inputs)
from .mapping import MODES, best_split_mapping, count_parameters, direct_mapping_size, map_direct
from .neuralnet import Mlp, TrainConfig, parse_arch, read_model_document, save_mlp

COMMANDS = ("train-forest", "generate", "imitate", "map", "compare", "eval")


class CliError(Exception):
    """A user-facing failure; the message is the diagnostic."""


@dataclasses.dataclass
class RunConfig:
    seed: int = 0
    out: str = "runs"
    # data: a CSV (optionally with a separate test CSV) or a synthetic kind
    data: str = None
    test_data: str = None
    label_column: str = "-1"
    synthetic: str = "blobs"
    n_samples: int = 1000
    n_features: int = 2
    n_classes: int = 2
    noise: float = 0.5
    split: list = dataclasses.field(default_factory=lambda: [0.6, 0.2, 0.2])
    n_limit: int = None
    # teacher: loaded from file, or trained
    forest: str = None
    n_trees: int = 25
    tree: dict = dataclasses.field(default_factory=lambda: dataclasses.asdict(TreeTrainParams()))
    # generation; p_zero "auto" is the zero fraction of the training features
    generation: dict = dataclasses.field(default_factory=lambda: _default_generation())
    training: dict = dataclasses.field(default_factory=lambda: _default_training())
    arch: list = dataclasses.field(default_factory=lambda: [32, 32])
    compare_archs: list = dataclasses.field(default_factory=lambda: [[8, 8], [32, 32], [64, 64]])
    # generate
    samples: int = 1000
    bins: int = 20
    sample_format: str = "npz"
    # map
    map_mode: str = "hard"
    beta: float = 1e4
    save_network: bool = True
    # eval
    model: str = None

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise CliError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls()
        for k, v in d.items():
            if k in ("tree", "generation", "training"):
                merged = dict(getattr(cfg, k))
                extra = sorted(set(v) - set(merged))
                if extra:
                    raise CliError(f"unknown keys in config section {k!r}: {', '.join(extra)}")
                merged.update(v)
                v = merged
            setattr(cfg, k, v)
        return cfg

    def to_dict(self):
        return dataclasses.asdict(self)

    def hash(self):
        """sha256 of the canonical config, excluding the output directory."""
        d = self.to_dict()
        d.pop("out")
        return hashlib.sha256(_dumps(d).encode()).hexdigest()

    # typed views -----------------------------------------------------------

    def tree_params(self):
        return TreeTrainParams(**self.tree)

    def generation_config(self, train_features):
        g = dict(self.generation)
        if g["p_zero"] == "auto":
            g["p_zero"] = zero_fraction(train_features)
        return GenerationConfig(seed=self.seed, **g)

    def train_config(self):
        return TrainConfig(seed=self.seed, **self.training)


def _default_generation():
    d = dataclasses.asdict(GenerationConfig())
    d.pop("seed")
    d["p_zero"] = "auto"
    return d


def _default_training():
    d = dataclasses.asdict(TrainConfig())
    d.pop("seed")
    return d


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default)


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _write_json(path, obj):
    Path(path).write_text(_dumps(obj) + "\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# pipeline pieces -------------------------------------------------------------

class Workspace:
    """Resolved data, teacher and stats shared by the commands."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self._load_data()
        self.stats = compute_feature_stats(self.train.features)
        self._rf = None

    def _load_data(self):
        cfg = self.cfg
        col = str(cfg.label_column)
        col = int(col) if col.lstrip("-").isdigit() else col
        if cfg.data is not None:
            ds = load_csv(cfg.data, label_column=col)
        else:
            if cfg.synthetic not in SYNTHETIC_KINDS:
                raise CliError(f"unknown synthetic dataset {cfg.synthetic!r}")
            ds = make_synthetic(cfg.synthetic, cfg.n_samples, cfg.n_features, cfg.noise,
                                seed=cfg.seed, n_classes=cfg.n_classes)
        if cfg.test_data is not None:
            self.train, self.val = ds, None
            self.test = load_csv(cfg.test_data, label_column=col)
            if self.test.feature_count != ds.feature_count:
                raise CliError(
                    f"dimension mismatch: test data has {self.test.feature_count} features, "
                    f"training data has {ds.feature_count}")
        else:
            self.train, self.val, self.test = split_dataset(ds, tuple(cfg.split), seed=cfg.seed)
        if cfg.n_limit is not None:
            self.train = limit_per_class(self.train, int(cfg.n_limit), seed=cfg.seed)

    @property
    def rf(self):
        if self._rf is None:
            if self.cfg.forest is not None:
                self._rf = load_forest(self.cfg.forest)
                if self._rf.n_features != self.train.feature_count:
                    raise CliError(
                        f"dimension mismatch: forest expects {self._rf.n_features} features, "
                        f"data has {self.train.feature_count}")
            else:
                self._rf = train_forest(self.train, self.cfg.n_trees, self.cfg.tree_params(),
                                        seed=self.cfg.seed)
        return self._rf

    def gen_cfg(self):
        return self.cfg.generation_config(self.train.features)

    def stamp(self):
        return {"seed": self.cfg.seed, "config_hash": self.cfg.hash()}

    def write_config(self):
        _write_json(self.out / "config.json", self.cfg.to_dict())


def _test_acc(model, ws, stats=None):
    return evaluate_accuracy(model, ws.test, stats) if len(ws.test) else None


def cmd_train_forest(cfg):
    ws = Workspace(cfg)
    rf = ws.rf
    save_forest(rf, ws.out / "forest.json", **ws.stamp())
    ws.stats.save(ws.out / "stats.json")
    metrics = {
        **ws.stamp(),
        "n_trees": rf.n_trees,
        "n_nodes": sum(t.n_nodes for t in rf.trees),
        "max_depth": max(t.depth() for t in rf.trees),
        "train_accuracy": evaluate_accuracy(rf, ws.train),
        "val_accuracy": evaluate_accuracy(rf, ws.val) if ws.val is not None and len(ws.val)
        else None,
        "test_accuracy": _test_acc(rf, ws),
    }
    _write_json(ws.out / "metrics.json", metrics)
    ws.write_config()
    return metrics


def cmd_generate(cfg):
    ws = Workspace(cfg)
    gen = ws.gen_cfg()
    X, Y, t = sample_stream(ws.rf, ws.stats, gen).take(0, cfg.samples)
    if cfg.sample_format == "csv":
        with open(ws.out / "samples.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"f{i}" for i in range(X.shape[1])]
                       + [f"p{c}" for c in range(Y.shape[1])] + ["target"])
            for x, y, tt in zip(X, Y, t):
                w.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in y] + [int(tt)])
    elif cfg.sample_format == "npz":
        np.savez(ws.out / "samples.npz", X=X, Y=Y, target=t)
    else:
        raise CliError(f"unknown sample format {cfg.sample_format!r}; use npz or csv")
    hist = confidence_distribution(ws.rf, ws.stats, gen, cfg.samples, cfg.bins)
    _write_csv(ws.out / "histogram.csv", ["lo", "hi", "count"], hist.to_rows())
    summary = {**ws.stamp(), "strategy": gen.label, "samples": cfg.samples,
               "p_zero": gen.p_zero, "confidence_mean": hist.mean, "confidence_std": hist.std}
    _write_json(ws.out / "summary.json", summary)
    ws.write_config()
    return summary


def _save_student(path, mlp, stats, ws):
    save_mlp(mlp, path, stats=stats.to_dict(), **ws.stamp())


def cmd_imitate(cfg):
    ws = Workspace(cfg)
    arch = parse_arch(",".join(map(str, cfg.arch)))
    mlp, report = imitate(ws.rf, ws.stats, arch, ws.gen_cfg(), cfg.train_config(),
                          test=ws.test if len(ws.test) else None)
    _save_student(ws.out / "student.json", mlp, ws.stats, ws)
    doc = {**ws.stamp(), **report.to_dict()}
    _write_json(ws.out / "report.json", doc)
    _write_csv(ws.out / "history.csv", ["epoch", "train_loss", "pool_loss"],
               [(e, repr(a), repr(b)) for e, a, b in report.history_rows()])
    ws.write_config()
    return doc


def cmd_map(cfg):
    if cfg.map_mode not in MODES:
        raise CliError(f"unknown mapping mode {cfg.map_mode!r}; use one of {MODES}")
    ws = Workspace(cfg)
    net = map_direct(ws.rf, cfg.map_mode, cfg.beta)
    if cfg.save_network:
        _write_json(ws.out / "mapped.json", {**net.to_dict(), **ws.stamp()})
    best_r, best_size, sizes = best_split_mapping(ws.rf)
    report = {
        **ws.stamp(),
        "mode": cfg.map_mode,
        "direct_parameters": count_parameters(net),
        "direct_parameters_formula": direct_mapping_size(ws.rf),
        "split_best_depth": best_r,
        "split_best_parameters": best_size,
        "split_parameters_by_depth": {str(r): s for r, s in sizes.items()},
        "test_accuracy": _test_acc(net, ws),
        "forest_test_accuracy": _test_acc(ws.rf, ws),
    }
    _write_json(ws.out / "size_report.json", report)
    ws.write_config()
    return report


def cmd_compare(cfg):
    ws = Workspace(cfg)
    rf, gen = ws.rf, ws.gen_cfg()
    probe = probe_inputs(ws.stats, gen, ws.test if len(ws.test) else None)
    rf_params = direct_mapping_size(rf)
    rows = [("RF", _test_acc(rf, ws), 1.0, None)]
    net = map_direct(rf, "hard")
    rows.append(("direct-map", _test_acc(net, ws),
                 float(np.mean(predict_proba(net, probe).argmax(1)
                               == predict_proba(rf, probe).argmax(1))),
                 rf_params))
    for arch in cfg.compare_archs:
        arch = parse_arch(",".join(map(str, arch)))
        mlp, rep = imitate(rf, ws.stats, arch, gen, cfg.train_config(),
                           test=ws.test if len(ws.test) else None, probe=probe)
        name = "NRFI-" + "-".join(map(str, arch))
        rows.append((name, rep.student_accuracy, rep.fidelity, mlp.n_parameters))
    header = ["model", "accuracy", "fidelity", "parameters"]
    _write_csv(ws.out / "compare.csv", header,
               [(m, "" if a is None else repr(a), repr(f), "" if p is None else p)
                for m, a, f, p in rows])
    doc = {**ws.stamp(), "rows": [dict(zip(header, r)) for r in rows]}
    _write_json(ws.out / "compare.json", doc)
    ws.write_config()
    return doc


def cmd_eval(cfg):
    if cfg.model is None:
        raise CliError("eval needs --model")
    doc = read_model_document(cfg.model)
    ws = Workspace(cfg)
    if "trees" in doc:
        model, stats, kind = forest_from_dict(doc), None, "forest"
    elif "stats" in doc and "layer_sizes" in doc:
        model, stats, kind = Mlp.from_dict(doc), FeatureStats.from_dict(doc["stats"]), "student"
    else:
        raise CliError(f"{cfg.model}: not a forest or student model file")
    n_in = model.n_features if kind == "forest" else model.n_inputs
    ds = ws.test if len(ws.test) else ws.train
    if n_in != ds.feature_count:
        raise CliError(f"dimension mismatch: model expects {n_in} features, "
                       f"data has {ds.feature_count}")
    result = {**ws.stamp(), "model_kind": kind, "accuracy": evaluate_accuracy(model, ds, stats),
              "n_rows": len(ds), "parameters": None if kind == "forest" else model.n_parameters}
    if kind == "student" and cfg.forest is not None:
        result["fidelity"] = evaluate_fidelity(
            model, ws.rf, probe_inputs(stats, ws.gen_cfg(), ds), stats)
    _write_json(ws.out / "eval.json", result)
    ws.write_config()
    return result


HANDLERS = {
    "train-forest": cmd_train_forest,
    "generate": cmd_generate,
    "imitate": cmd_imitate,
    "map": cmd_map,
    "compare": cmd_compare,
    "eval": cmd_eval,
}


# argument parsing ------------------------------------------------------------

def _global_flags(p, suppress):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=d, help="master seed (default 0)")
    p.add_argument("--config", default=d, help="RunConfig JSON file")
    p.add_argument("--out", default=d, help="output directory (default runs)")


def _data_flags(p):
    g = p.add_argument_group("data")
    g.add_argument("--data", help="training CSV (split into train/val/test unless --test-data)")
    g.add_argument("--test-data", help="separate test CSV")
    g.add_argument("--label-column", help="label column name or index (default -1)")
    g.add_argument("--synthetic", choices=SYNTHETIC_KINDS, help="synthetic dataset kind")
    g.add_argument("--n-samples", type=int)
    g.add_argument("--n-features", type=int)
    g.add_argument("--n-classes", type=int)
    g.add_argument("--noise", type=float)
    g.add_argument("--n-limit", type=int, help="max training samples per class")
    g = p.add_argument_group("teacher")
    g.add_argument("--forest", help="load the teacher forest instead of training one")
    g.add_argument("--n-trees", type=int)
    g.add_argument("--max-depth", type=int)


def _generation_flags(p):
    g = p.add_argument_group("generation")
    g.add_argument("--c-std", type=float)
    g.add_argument("--p-zero", help="zeroing probability, or 'auto'")
    g.add_argument("--p-forest", type=float, help="fixed subset fraction (default: random)")
    g.add_argument("--w-path-sigma", type=float)
    g.add_argument("--no-pw", action="store_true", default=None, help="disable path weighting")
    g.add_argument("--no-dts", action="store_true", default=None,
                   help="disable decision-tree subsets")


def _training_flags(p):
    g = p.add_argument_group("training")
    g.add_argument("--lr", type=float)
    g.add_argument("--momentum", type=float)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--steps", type=int, help="steps per epoch")
    g.add_argument("--epochs", type=int)
    g.add_argument("--hard-labels", action="store_true", default=None)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rf2nn", description="Imitate random forests with compact neural networks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        _global_flags(p, suppress=True)
        _data_flags(p)
        return p

    add("train-forest", "train a teacher forest")
    p = add("generate", "generate labelled samples and a confidence histogram")
    _generation_flags(p)
    p.add_argument("--samples", type=int)
    p.add_argument("--bins", type=int)
    p.add_argument("--format", dest="sample_format", choices=("npz", "csv"))
    p = add("imitate", "train a student network on generated data")
    _generation_flags(p)
    _training_flags(p)
    p.add_argument("--arch", help="hidden layer sizes, e.g. 32,32")
    p = add("map", "map the forest directly to a network and report sizes")
    p.add_argument("--mode", dest="map_mode", choices=MODES)
    p.add_argument("--beta", type=float)
    p.add_argument("--no-save-network", dest="save_network", action="store_false",
                   default=None, help="only write the size report")
    p = add("compare", "tabulate accuracy, fidelity and size of forest, mapping and students")
    _generation_flags(p)
    _training_flags(p)
    p.add_argument("--archs", help="semicolon-separated architectures, e.g. '8,8;32,32'")
    p = add("eval", "evaluate a saved forest or student")
    p.add_argument("--model", help="forest or student JSON file")
    return parser


# flag -> (section or None, key)
_FLAG_MAP = {
    "seed": (None, "seed"), "out": (None, "out"), "data": (None, "data"),
    "test_data": (None, "test_data"), "label_column": (None, "label_column"),
    "synthetic": (None, "synthetic"), "n_samples": (None, "n_samples"),
    "n_features": (None, "n_features"), "n_classes": (None, "n_classes"),
    "noise": (None, "noise"), "n_limit": (None, "n_limit"), "forest": (None, "forest"),
    "n_trees": (None, "n_trees"), "max_depth": ("tree", "max_depth"),
    "c_std": ("generation", "c_std"), "p_zero": ("generation", "p_zero"),
    "p_forest": ("generation", "p_forest"), "w_path_sigma": ("generation", "w_path_sigma"),
    "lr": ("training", "learning_rate"), "momentum": ("training", "momentum"),
    "batch_size": ("training", "batch_size"), "steps": ("training", "steps_per_epoch"),
    "epochs": ("training", "epochs"), "hard_labels": ("training", "hard_labels"),
    "samples": (None, "samples"), "bins": (None, "bins"),
    "sample_format": (None, "sample_format"), "map_mode": (None, "map_mode"),
    "beta": (None, "beta"), "save_network": (None, "save_network"), "model": (None, "model"),
}


def resolve_config(args):
    """Defaults, then the ``--config`` file, then explicit flags."""
    base = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise CliError(f"config file not found: {path}")
        try:
            base = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise CliError(f"config file {path} is not valid JSON ({exc})") from None
        if not isinstance(base, dict):
            raise CliError(f"config file {path} must hold a JSON object")
    cfg = RunConfig.from_dict(base)
    for flag, (section, key) in _FLAG_MAP.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        if key == "p_zero" and value != "auto":
            try:
                value = float(value)
            except ValueError:
                raise CliError(f"--p-zero must be a number or 'auto', got {value!r}") from None
        if section is None:
            setattr(cfg, key, value)
        else:
            getattr(cfg, section)[key] = value
    if getattr(args, "no_pw", None):
        cfg.generation["use_pw"] = False
    if getattr(args, "no_dts", None):
        cfg.generation["use_dts"] = False
    if getattr(args, "arch", None):
        cfg.arch = parse_arch(args.arch)
    if getattr(args, "archs", None):
        cfg.compare_archs = [parse_arch(a) for a in args.archs.split(";") if a.strip()]
    return cfg


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        result = HANDLERS[args.command](cfg)
    except (CliError, ValueError, TypeError, FileNotFoundError) as exc:
        print(f"rf2nn {args.command}: error: {exc}", file=sys.stderr)
        return 1
    print(_dumps(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
