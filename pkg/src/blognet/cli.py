"""Command line pipeline: ``blognet index|graph|cluster|hierarchy|synth``.

Each stage reads and writes plain files in an output directory and leaves a
``manifest-<stage>.json`` behind. Summaries go to stdout as one JSON line,
logs to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Sequence

from . import __version__, cluster, corpus, hrg, simnet, synth

logger = logging.getLogger("blognet")


@dataclass
class PipelineConfig:
    min_count: int = 10
    keep_percentile: float = 5.0
    min_wordset_size: int = 25
    store_threshold: float = 0.025
    gamma: float = 0.05
    dup_threshold: float = 0.8
    outlier_k: float = 2.0
    fit_region: tuple[float, float] = (0.025, 0.2)
    n_bins: int = 50
    gamma_sweep: tuple[float, ...] = (0.04, 0.045, 0.055, 0.07)
    hrg_steps: int | None = None
    hrg_burn_in: int | None = None
    seed: int = 0

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def updated(self, values: dict[str, Any], source: str) -> "PipelineConfig":
        known = set(self.field_names())
        data = asdict(self)
        for key, value in values.items():
            if key not in known:
                raise ValueError(f"{source}: unknown config field {key!r}")
            data[key] = value
        data["fit_region"] = tuple(float(x) for x in data["fit_region"])
        data["gamma_sweep"] = tuple(float(x) for x in data["gamma_sweep"])
        if len(data["fit_region"]) != 2:
            raise ValueError(f"{source}: fit_region needs two values")
        return PipelineConfig(**data)


def load_config(path: str | Path | None) -> PipelineConfig:
    cfg = PipelineConfig()
    if path is None:
        return cfg
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a flat JSON object")
    return cfg.updated(data, str(path))


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    path = Path(path)
    if path.is_dir():
        for file in sorted(path.rglob("*")):
            if file.is_file():
                h.update(str(file.relative_to(path)).encode())
                h.update(sha256_file(file).encode())
        return h.hexdigest()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Collects timings and artifacts for one subcommand and writes its manifest."""

    def __init__(self, command: str, out: Path, config: PipelineConfig, inputs: Sequence[Path]):
        self.command = command
        self.out = out
        self.config = config
        self.inputs = {str(p): sha256_file(p) for p in inputs}
        self.timings: dict[str, float] = {}
        self.artifacts: dict[str, str] = {}
        self._t = time.perf_counter()
        out.mkdir(parents=True, exist_ok=True)

    def stage(self, name: str) -> None:
        now = time.perf_counter()
        self.timings[name] = round(now - self._t, 6)
        self._t = now

    def path(self, name: str) -> Path:
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.artifacts[name] = str(p)
        return p

    def write_manifest(self) -> Path:
        manifest = {
            "tool_version": __version__,
            "command": self.command,
            "config": asdict(self.config),
            "inputs": self.inputs,
            "timings": self.timings,
            "artifacts": {k: {"path": v, "sha256": sha256_file(v)} for k, v in sorted(self.artifacts.items())},
        }
        path = self.out / f"manifest-{self.command}.json"
        path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        return path


def emit(summary: dict) -> None:
    print(json.dumps(summary, sort_keys=True))


# -- stages -----------------------------------------------------------------

def _frequency_table(input_path: Path, docs, out: Path) -> corpus.FrequencyTable:
    """Reuse ``frequencies.tsv`` from a previous index run on the same input."""
    cached = out / "frequencies.tsv"
    manifest = out / "manifest-index.json"
    if cached.exists() and manifest.exists():
        recorded = json.loads(manifest.read_text(encoding="utf-8")).get("inputs", {})
        if recorded.get(str(input_path)) == sha256_file(input_path):
            counts = corpus.read_counts_tsv(cached)
            logger.info("reusing frequency table %s", cached)
            return corpus.FrequencyTable(counts, sum(counts.values()), len(docs))
    return corpus.index(docs)


def cmd_index(input_path: Path, out: Path, cfg: PipelineConfig) -> dict:
    run = Run("index", out, cfg, [input_path])
    docs = corpus.read_documents(input_path)
    run.stage("read")
    table = corpus.index(docs)
    run.stage("index")
    corpus.write_counts_tsv(table.counts, run.path("frequencies.tsv"))
    run.write_manifest()
    return {"documents": len(docs), "tokens": table.total_tokens, "distinct_words": len(table.counts)}


def _write_graph(run: Run, graph: simnet.SimilarityGraph, stem: str) -> None:
    simnet.write_edges_tsv(graph, run.path(f"{stem}.tsv"))
    simnet.write_graphml(graph, run.path(f"{stem}.graphml"))


def cmd_graph(input_path: Path, out: Path, cfg: PipelineConfig) -> dict:
    run = Run("graph", out, cfg, [input_path])
    docs = corpus.read_documents(input_path)
    table = _frequency_table(input_path, docs, out)
    run.stage("index")
    vocab = corpus.select_vocabulary(table, corpus.VocabularyPolicy(cfg.min_count, cfg.keep_percentile))
    corpus.write_counts_tsv(vocab.counts, run.path("vocabulary.tsv"))
    corp = corpus.build_corpus(docs, vocab, cfg.min_wordset_size)
    run.stage("vocabulary")
    logger.info("%d blogs remain after filtering", len(corp))
    graph = simnet.build_graph(corp, cfg.store_threshold)
    run.stage("similarity")
    if not graph.edges:
        raise ValueError(f"no edges above threshold {cfg.store_threshold}")
    _write_graph(run, graph, "edges")
    meta = {"store_threshold": graph.store_threshold, "vertices": list(graph.vertices),
            "dropped": list(corp.dropped)}
    run.path("graph.json").write_text(json.dumps(meta, indent=1) + "\n", encoding="utf-8")

    hist = simnet.histogram(graph, cfg.n_bins)
    simnet.write_histogram_csv(hist, run.path("histogram.csv"))
    summary: dict[str, Any] = {"blogs": len(corp), "dropped": len(corp.dropped), "edges": graph.n_edges,
                               "vocabulary": len(vocab), "slope": None}
    outliers = simnet.AnomalyReport()
    try:
        fit = simnet.fit_power_law(hist, cfg.fit_region)
    except ValueError as exc:
        logger.warning("power-law fit failed: %s", exc)
        summary["fit_error"] = str(exc)
    else:
        summary.update(slope=fit.slope, r_squared=fit.r_squared)
        fit_record = {"slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared,
                      "fit_region": list(fit.fit_region), "residual_std": fit.residual_std,
                      "n_points": fit.n_points}
        run.path("fit.json").write_text(json.dumps(fit_record, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        outliers = simnet.detect_outliers(graph, fit, simnet.OutlierPolicy(cfg.outlier_k, cfg.n_bins), hist)
    dups = simnet.detect_duplicates(graph, cfg.dup_threshold)
    report = simnet.AnomalyReport(outliers.outlier_edges, outliers.outlier_vertices, dups.duplicate_groups)
    simnet.write_anomalies_jsonl(report, run.path("anomalies.jsonl"))
    summary.update(outlier_vertices=len(report.outlier_vertices), duplicate_groups=len(report.duplicate_groups))
    run.stage("distribution")

    views = {}
    for gamma in cfg.gamma_sweep:
        view = simnet.threshold_view(graph, gamma)
        _write_graph(run, view, f"views/gamma_{gamma:g}")
        views[f"{gamma:g}"] = {"vertices": len(view.vertices), "edges": view.n_edges}
    summary["views"] = views
    run.stage("views")
    run.write_manifest()
    return summary


def load_graph(graph_dir: Path) -> simnet.SimilarityGraph:
    meta_path = graph_dir / "graph.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"no graph artifact in {graph_dir}; run 'blognet graph' first")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    g = simnet.read_graphml(graph_dir / "edges.graphml", meta["store_threshold"])
    return simnet.SimilarityGraph(tuple(sorted(set(meta["vertices"]) | set(g.vertices))), g.edges,
                                  meta["store_threshold"])


def write_partition(part: cluster.Partition, csv_path: Path, summary_path: Path) -> dict:
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("doc_id,cluster\n")
        for doc, c in sorted(part.assignment.items()):
            fh.write(f"{doc},{c}\n")
    summary = {"n_clusters": part.n_clusters, "Q": part.q, "sizes": part.sizes(),
               "unclustered": len(part.unclustered)}
    summary_path.write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return summary


def read_partition(csv_path: Path) -> dict[str, int]:
    out = {}
    with open(csv_path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "doc_id,cluster":
            raise ValueError(f"{csv_path}: unexpected header {header!r}")
        for line in fh:
            if line.strip():
                doc, _, c = line.rstrip("\n").rpartition(",")
                out[doc] = int(c)
    return out


def cmd_cluster(graph_dir: Path, out: Path, cfg: PipelineConfig) -> dict:
    graph = load_graph(graph_dir)
    run = Run("cluster", out, cfg, [graph_dir / "edges.graphml"])
    view = simnet.threshold_view(graph, cfg.gamma)
    if not view.edges:
        raise ValueError(f"view edgeless at gamma={cfg.gamma}")
    part = cluster.greedy_cluster(view)
    run.stage("cluster")
    summary = write_partition(part, run.path("partition.csv"), run.path("partition_summary.json"))
    run.write_manifest()
    return summary


def cmd_hierarchy(graph_dir: Path, out: Path, cfg: PipelineConfig, cluster_id: int | None = None,
                  component: int | None = None) -> dict:
    graph = load_graph(graph_dir)
    inputs = [graph_dir / "edges.graphml"]
    if cluster_id is not None:
        part_path = graph_dir / "partition.csv"
        if not part_path.exists():
            part_path = out / "partition.csv"
        inputs.append(part_path)
        assignment = read_partition(part_path)
        members = {d for d, c in assignment.items() if c == cluster_id}
        if not members:
            raise ValueError(f"cluster {cluster_id} does not exist")
        graph = graph.subgraph(members)
    run = Run("hierarchy", out, cfg, inputs)
    g = hrg.binarize(graph, cfg.gamma)
    comps = sorted(g.components(), key=lambda c: (-len(c), c[0]))
    if component is not None:
        if not 0 <= component < len(comps):
            raise ValueError(f"component {component} out of range (graph has {len(comps)})")
        g = g.subgraph(comps[component])
    elif len(comps) > 1:
        sizes = ", ".join(str(len(c)) for c in comps[:10])
        raise ValueError(f"binarized graph is disconnected ({len(comps)} components, sizes {sizes}); "
                         "rerun with --component K to fit one component at a time")
    res = hrg.fit(g, steps=cfg.hrg_steps, burn_in=cfg.hrg_burn_in, seed=cfg.seed)
    run.stage("mcmc")
    tag = "" if cluster_id is None else f"-c{cluster_id}"
    tag += "" if component is None else f"-k{component}"
    run.path(f"dendrogram{tag}.nwk").write_text(hrg.export_newick(res.best_dendrogram) + "\n", encoding="utf-8")
    with open(run.path(f"trace{tag}.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,loglik\n")
        for step, ll in res.trace:
            fh.write(f"{step},{ll:.12g}\n")
    run.write_manifest()
    return {"vertices": len(g.vertices), "edges": len(g.edges), "loglik": res.best_loglik,
            "steps": res.steps, "burn_in": res.burn_in, "seed": res.seed,
            "acceptance_rate": res.acceptance_rate}


SYNTH_EXTRAS = {"duplicates"}


def load_synth_spec(path: Path) -> tuple[synth.TopicModelSpec, dict]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: spec must be a JSON object")
    dup = data.pop("duplicates", None) or {}
    allowed = {"group_sizes", "mutation_rate", "seed"}
    bad = sorted(set(dup) - allowed)
    if bad:
        raise ValueError(f"{path}: unknown duplicates field {bad[0]!r}")
    return synth.TopicModelSpec.from_dict(data), dup


def cmd_synth(spec_path: Path, out: Path, cfg: PipelineConfig) -> dict:
    run = Run("synth", out, cfg, [spec_path])
    spec, dup = load_synth_spec(spec_path)
    docs, truth = synth.generate_corpus(spec)
    if dup.get("group_sizes"):
        docs, truth = synth.inject_duplicates(docs, dup["group_sizes"], dup.get("mutation_rate", 0.0),
                                              dup.get("seed", spec.seed), truth)
    run.stage("generate")
    synth.write_corpus_jsonl(docs, run.path("corpus.jsonl"))
    run.path("ground_truth.json").write_text(truth.to_json(), encoding="utf-8")
    run.write_manifest()
    return {"documents": len(docs), "expected_survivors": len(truth.expected_survivors),
            "planted_duplicate_groups": len(truth.planted_duplicates)}


# -- argument parsing -------------------------------------------------------

def _override_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("pipeline parameters")
    types = {"min_count": int, "keep_percentile": float, "min_wordset_size": int, "store_threshold": float,
             "gamma": float, "dup_threshold": float, "outlier_k": float, "n_bins": int,
             "hrg_steps": int, "hrg_burn_in": int, "seed": int}
    for name, typ in types.items():
        flags = dict.fromkeys((f"--{name.replace('_', '-')}", f"--{name}"))
        group.add_argument(*flags, dest=name, type=typ, default=None)
    group.add_argument("--fit-region", "--fit_region", dest="fit_region", type=float, nargs=2, default=None,
                       metavar=("LO", "HI"))
    group.add_argument("--gamma-sweep", "--gamma_sweep", dest="gamma_sweep", type=float, nargs="+", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blognet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"blognet {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, default=None, help="flat JSON file of pipeline parameters")
        p.add_argument("--out", "-o", type=Path, default=Path("blognet-out"), help="artifact directory")
        _override_flags(p)
        return p

    p = add("index", "count word frequencies")
    p.add_argument("input", type=Path, help="directory of .txt files or a JSON-lines file")
    p = add("graph", "build the similarity graph and analyse its distribution")
    p.add_argument("input", type=Path)
    p = add("cluster", "greedy modularity clustering of the gamma view")
    p.add_argument("--graph", type=Path, default=None, help="directory holding graph artifacts (default: --out)")
    p = add("hierarchy", "fit a hierarchical random graph")
    p.add_argument("--graph", type=Path, default=None, help="directory holding graph artifacts (default: --out)")
    p.add_argument("--cluster-id", type=int, default=None, help="restrict to one cluster of partition.csv")
    p.add_argument("--component", type=int, default=None, help="fit the K-th largest connected component")
    p = add("synth", "generate a synthetic corpus with ground truth")
    p.add_argument("spec", type=Path, help="JSON topic-model spec")
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config)
    flags = {name: getattr(args, name) for name in PipelineConfig.field_names()
             if getattr(args, name, None) is not None}
    return cfg.updated(flags, "command line")


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        if args.command == "index":
            summary = cmd_index(args.input, args.out, cfg)
        elif args.command == "graph":
            summary = cmd_graph(args.input, args.out, cfg)
        elif args.command == "cluster":
            summary = cmd_cluster(args.graph or args.out, args.out, cfg)
        elif args.command == "hierarchy":
            summary = cmd_hierarchy(args.graph or args.out, args.out, cfg, args.cluster_id, args.component)
        else:
            summary = cmd_synth(args.spec, args.out, cfg)
    except (ValueError, FileNotFoundError, OSError) as exc:
        print(f"blognet {args.command}: error: {exc}", file=sys.stderr)
        return 2
    emit(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
