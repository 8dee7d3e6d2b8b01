"""Pipeline orchestration: reproducible stage-by-stage runs.

Each stage reads its predecessor's persisted output and writes its own plus a
manifest embedding the config echo and tool version. Configuration comes from
a plain key=value file overridden by flags; all randomness flows from the
single run seed via documented derivations.
"""

from __future__ import annotations

import argparse
import logging
import os
import shlex
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import __version__
from . import benchmark as bench_mod
from .benchmark_io import load_json_records
from .corpus import (
    Context,
    context_from_json,
    context_to_json,
    load_stopwords,
    read_documents_file,
    split_contexts,
)
from .emit import CorruptionParams, emit_records, write_shards
from .kb import read_dump_file, read_index, write_index
from .linking import (
    MODE_CORPUS,
    MODE_WIKI,
    build_alias_index,
    export_audit_sample,
    link_corpus,
    link_from_json,
    link_to_json,
)
from .metrics import score_corpus
from .mining import mine_quintuples, quintuple_from_json, quintuple_to_json
from .textualize import (
    ExternalGenerator,
    document_pair_from_json,
    document_pair_to_json,
    qa_from_json,
    qa_to_json,
    summary_from_json,
    summary_to_json,
    textualize_quintuples,
)
from .util import json_line, read_jsonl, write_jsonl

logger = logging.getLogger("cmpsynth")

# Stage output file names under out_dir.
KB_INDEX = "kb.idx"
KB_MANIFEST = "kb.manifest.txt"
NEWS_CONTEXTS = "news_contexts.jsonl"
WIKI_CONTEXTS = "wiki_contexts.jsonl"
WIKI_TITLES = "wiki_titles.jsonl"
CORPUS_LINKS = "corpus_links.jsonl"
WIKI_LINKS = "wiki_links.jsonl"
QUINTUPLES = "quintuples.jsonl"
QA_PAIRS = "qa_pairs.jsonl"
SUMMARIES = "summaries.jsonl"
DOC_PAIRS = "doc_pairs.jsonl"
SHARD_DIR = "shards"
AUDIT_FILE = "audit.tsv"


class StageError(RuntimeError):
    """A stage was started without its predecessor's output."""


@dataclass
class RunConfig:
    kb_dump: str | None = None
    news_corpus: str | None = None
    wiki_corpus: str | None = None
    out_dir: str = "out"
    seed: int = 0
    workers: int = 1
    mask_rate: float = 0.30
    mean_span_length: float = 3.0
    mask_token: str = "<mask>"
    category_property: str = "P31"
    language: str = "en"
    stopwords: str | None = None
    shard_size: int = 1000
    generator_cmd: str | None = None
    audit_n: int = 100

    def corruption(self) -> CorruptionParams:
        return CorruptionParams(self.mask_rate, self.mean_span_length, self.mask_token)

    def stopword_set(self):
        return load_stopwords(self.stopwords)

    def echo(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_INT_KEYS = {"seed", "workers", "shard_size", "audit_n"}
_FLOAT_KEYS = {"mask_rate", "mean_span_length"}


def load_config_file(path: str | Path) -> dict:
    """Parse the plain key=value config format (# comments, blank lines ok)."""
    values: dict = {}
    known = {f.name for f in fields(RunConfig)}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"bad config line (expected key=value): {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        if key in _INT_KEYS:
            values[key] = int(value)
        elif key in _FLOAT_KEYS:
            values[key] = float(value)
        else:
            values[key] = value
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    """Precedence: flags > config file > defaults."""
    config = RunConfig()
    if getattr(args, "config", None):
        for key, value in load_config_file(args.config).items():
            setattr(config, key, value)
    for f in fields(RunConfig):
        flag_value = getattr(args, f.name, None)
        if flag_value is not None:
            setattr(config, f.name, flag_value)
    return config


def _out(config: RunConfig, name: str) -> Path:
    return Path(config.out_dir) / name


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise StageError(f"missing {path} — run the `{produced_by}` stage first")
    return path


def _require_input(path: str | None, flag: str) -> Path:
    if not path:
        raise StageError(f"no input configured: set {flag}")
    p = Path(path)
    if not p.exists():
        raise StageError(f"input path does not exist: {p}")
    return p


def write_manifest(path: Path, stage: str, config: RunConfig, counts: dict) -> None:
    """Plain-text manifest: version, seed, counts, and the full config echo."""
    lines = [f"stage={stage}", f"version={__version__}", f"seed={config.seed}"]
    for key, value in sorted(counts.items()):
        lines.append(f"{key}={value}")
    for key, value in sorted(config.echo().items()):
        lines.append(f"config_{key}={'' if value is None else value}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def stage_ingest_kb(config: RunConfig, dry_run: bool = False) -> dict:
    dump = _require_input(config.kb_dump, "kb_dump")
    if dry_run:
        return {}
    kb, counters = read_dump_file(dump, config.language, config.category_property)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_index(kb, _out(config, KB_INDEX))
    counts = counters.as_dict()
    write_manifest(_out(config, KB_MANIFEST), "ingest-kb", config, counts)
    logger.info("ingest-kb: %s", counts)
    return counts


def _ingest_one_corpus(
    config: RunConfig, path: Path, source: str, mode: str, contexts_name: str
) -> dict:
    docs, counters = read_documents_file(path, default_source=source)
    contexts: list[Context] = []
    titles = []
    for doc in docs:
        contexts.extend(split_contexts(doc, mode))
        titles.append({"doc_id": doc.doc_id, "title": doc.title})
    write_jsonl(_out(config, contexts_name), (context_to_json(c) for c in contexts))
    if source == "wiki":
        write_jsonl(_out(config, WIKI_TITLES), titles)
    return {
        f"{source}_documents": counters.read,
        f"{source}_skipped": counters.skipped,
        f"{source}_contexts": len(contexts),
    }


def stage_ingest_corpus(config: RunConfig, dry_run: bool = False) -> dict:
    if not config.news_corpus and not config.wiki_corpus:
        raise StageError("no input configured: set news_corpus and/or wiki_corpus")
    inputs = []
    if config.news_corpus:
        inputs.append((_require_input(config.news_corpus, "news_corpus"), "news"))
    if config.wiki_corpus:
        inputs.append((_require_input(config.wiki_corpus, "wiki_corpus"), "wiki"))
    if dry_run:
        return {}
    Path(config.out_dir).mkdir(parents=True, exist_ok=True)
    counts: dict = {}
    for path, source in inputs:
        if source == "news":
            counts.update(
                _ingest_one_corpus(config, path, "news", "paragraph", NEWS_CONTEXTS)
            )
        else:
            counts.update(
                _ingest_one_corpus(config, path, "wiki", "fixed10", WIKI_CONTEXTS)
            )
    write_manifest(_out(config, "ingest_corpus.manifest.txt"), "ingest-corpus", config, counts)
    logger.info("ingest-corpus: %s", counts)
    return counts


def _read_contexts(path: Path) -> list[Context]:
    return [context_from_json(obj) for obj in read_jsonl(path)]


def stage_link(config: RunConfig, dry_run: bool = False) -> dict:
    kb_path = _require(_out(config, KB_INDEX), "ingest-kb")
    news_path = _out(config, NEWS_CONTEXTS)
    wiki_path = _out(config, WIKI_CONTEXTS)
    if not news_path.exists() and not wiki_path.exists():
        raise StageError(
            f"missing {news_path} and {wiki_path} — run the `ingest-corpus` stage first"
        )
    if dry_run:
        return {}
    kb = read_index(kb_path)
    stopwords = config.stopword_set()
    index = build_alias_index(kb, stopwords=stopwords)
    counts: dict = {"alias_patterns": index.pattern_count}
    if news_path.exists():
        contexts = _read_contexts(news_path)
        links = link_corpus(
            contexts, kb, index, MODE_CORPUS, stopwords, workers=config.workers
        )
        write_jsonl(_out(config, CORPUS_LINKS), (link_to_json(l) for l in links))
        counts["corpus_links"] = len(links)
    if wiki_path.exists():
        contexts = _read_contexts(wiki_path)
        titles_path = _out(config, WIKI_TITLES)
        titles = {}
        if titles_path.exists():
            titles = {obj["doc_id"]: obj.get("title") for obj in read_jsonl(titles_path)}
        links = link_corpus(
            contexts,
            kb,
            index,
            MODE_WIKI,
            stopwords,
            doc_titles=titles,
            workers=config.workers,
        )
        write_jsonl(_out(config, WIKI_LINKS), (link_to_json(l) for l in links))
        counts["wiki_links"] = len(links)
    write_manifest(_out(config, "link.manifest.txt"), "link", config, counts)
    logger.info("link: %s", counts)
    return counts


def stage_mine(config: RunConfig, dry_run: bool = False) -> dict:
    kb_path = _require(_out(config, KB_INDEX), "ingest-kb")
    links_path = _require(_out(config, CORPUS_LINKS), "link")
    if dry_run:
        return {}
    kb = read_index(kb_path)
    links = [link_from_json(obj) for obj in read_jsonl(links_path)]
    quintuples = mine_quintuples(links, kb, config.category_property)
    write_jsonl(_out(config, QUINTUPLES), (quintuple_to_json(q) for q in quintuples))
    counts = {"links": len(links), "quintuples": len(quintuples)}
    write_manifest(_out(config, "mine.manifest.txt"), "mine", config, counts)
    logger.info("mine: %s", counts)
    return counts


def stage_textualize(config: RunConfig, dry_run: bool = False) -> dict:
    kb_path = _require(_out(config, KB_INDEX), "ingest-kb")
    quintuples_path = _require(_out(config, QUINTUPLES), "mine")
    wiki_links_path = _require(_out(config, WIKI_LINKS), "link")
    wiki_contexts_path = _require(_out(config, WIKI_CONTEXTS), "ingest-corpus")
    if dry_run:
        return {}
    kb = read_index(kb_path)
    quintuples = [quintuple_from_json(obj) for obj in read_jsonl(quintuples_path)]
    wiki_links = [link_from_json(obj) for obj in read_jsonl(wiki_links_path)]
    wiki_contexts = _read_contexts(wiki_contexts_path)
    generator = None
    if config.generator_cmd:
        generator = ExternalGenerator(shlex.split(config.generator_cmd))
    try:
        qa_pairs, summaries, doc_pairs, counters = textualize_quintuples(
            quintuples, kb, wiki_links, wiki_contexts, generator
        )
    finally:
        if generator is not None:
            generator.close()
    write_jsonl(_out(config, QA_PAIRS), (qa_to_json(q) for q in qa_pairs))
    write_jsonl(_out(config, SUMMARIES), (summary_to_json(s) for s in summaries))
    write_jsonl(_out(config, DOC_PAIRS), (document_pair_to_json(p) for p in doc_pairs))
    counts = {
        "quintuples": counters.quintuples,
        "skipped_unrenderable": counters.skipped_unrenderable,
        "generator_fallbacks": counters.generator_fallbacks,
        "missing_document_pair": counters.missing_document_pair,
        "qa_pairs": len(qa_pairs),
        "summaries": len(summaries),
        "doc_pairs": len(doc_pairs),
    }
    write_manifest(_out(config, "textualize.manifest.txt"), "textualize", config, counts)
    logger.info("textualize: %s", counts)
    return counts


def stage_emit(config: RunConfig, dry_run: bool = False) -> dict:
    qa_path = _require(_out(config, QA_PAIRS), "textualize")
    summaries_path = _require(_out(config, SUMMARIES), "textualize")
    pairs_path = _require(_out(config, DOC_PAIRS), "textualize")
    if dry_run:
        return {}
    qa_pairs = [qa_from_json(obj) for obj in read_jsonl(qa_path)]
    summaries = [summary_from_json(obj) for obj in read_jsonl(summaries_path)]
    doc_pairs = [document_pair_from_json(obj) for obj in read_jsonl(pairs_path)]
    records = emit_records(
        doc_pairs, qa_pairs, summaries, config.seed, config.corruption()
    )
    manifest = write_shards(
        records,
        _out(config, SHARD_DIR),
        config.shard_size,
        seed=config.seed,
        config_echo=config.echo(),
    )
    logger.info("emit: %s records", manifest["total_records"])
    return manifest


def stage_audit_sample(
    config: RunConfig, which: str = "corpus", dry_run: bool = False
) -> dict:
    kb_path = _require(_out(config, KB_INDEX), "ingest-kb")
    if which == "corpus":
        links_path = _require(_out(config, CORPUS_LINKS), "link")
        contexts_path = _require(_out(config, NEWS_CONTEXTS), "ingest-corpus")
    else:
        links_path = _require(_out(config, WIKI_LINKS), "link")
        contexts_path = _require(_out(config, WIKI_CONTEXTS), "ingest-corpus")
    if dry_run:
        return {}
    kb = read_index(kb_path)
    links = [link_from_json(obj) for obj in read_jsonl(links_path)]
    contexts = _read_contexts(contexts_path)
    out_path = _out(config, AUDIT_FILE)
    export_audit_sample(links, config.audit_n, config.seed, out_path, contexts, kb)
    counts = {"links": len(links), "sampled": config.audit_n}
    write_manifest(_out(config, "audit.manifest.txt"), "audit-sample", config, counts)
    return counts


def run_pipeline(config: RunConfig, dry_run: bool = False) -> dict:
    """ingest-kb through emit, in order.

    A dry run validates the external inputs and stops; the later stages'
    inputs are produced by the run itself.
    """
    counts: dict = {}
    counts["ingest_kb"] = stage_ingest_kb(config, dry_run)
    counts["ingest_corpus"] = stage_ingest_corpus(config, dry_run)
    if dry_run:
        return counts
    counts["link"] = stage_link(config)
    counts["mine"] = stage_mine(config)
    counts["textualize"] = stage_textualize(config)
    counts["emit"] = stage_emit(config)
    return counts


# ---------------------------------------------------------------------------
# eval and bench
# ---------------------------------------------------------------------------

def _load_predictions(path: Path) -> dict[str, str]:
    preds = {}
    for obj in read_jsonl(path):
        preds[str(obj["id"])] = obj["prediction"]
    return preds


def _load_references(path: Path) -> dict[str, list[str]]:
    refs = {}
    for obj in read_jsonl(path):
        if "references" in obj:
            refs[str(obj["id"])] = list(obj["references"])
        else:
            refs[str(obj["id"])] = [obj["reference"]]
    return refs


def stage_eval(predictions: Path, references: Path, out: Path | None) -> dict:
    report = score_corpus(_load_predictions(predictions), _load_references(references))
    print(report.as_table())
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json_line(report.as_dict()) + "\n", encoding="utf-8")
    return report.as_dict(include_examples=False)


def stage_bench(args: argparse.Namespace, config: RunConfig) -> dict:
    out_dir = Path(config.out_dir) / "bench"
    out_dir.mkdir(parents=True, exist_ok=True)
    include_bridge = bool(args.include_bridge)
    counts: dict = {"include_bridge": include_bridge}

    def handle_qa(path_str: str | None, dataset: str, split: str) -> None:
        if not path_str:
            return
        records = load_json_records(_require_input(path_str, dataset))
        qa = bench_mod.build_qa_examples(records, split, include_bridge)
        qg = bench_mod.build_qg_records(qa)
        bench_mod.write_examples(out_dir / f"{dataset}_qa.{split}.jsonl", qa)
        bench_mod.write_examples(out_dir / f"{dataset}_qg.{split}.jsonl", qg)
        counts[f"{dataset}_{split}"] = len(qa)
        if split == "train" and args.fewshot_k:
            few = bench_mod.sample_fewshot(qa, args.fewshot_k, config.seed)
            bench_mod.write_examples(
                out_dir / f"{dataset}_qa.fewshot{args.fewshot_k}.jsonl", few
            )

    handle_qa(args.hotpot_train, "hotpot_cmp", "train")
    handle_qa(args.hotpot_validation, "hotpot_cmp", "validation")
    handle_qa(args.twowiki_train, "twowiki_cmp", "train")
    handle_qa(args.twowiki_validation, "twowiki_cmp", "validation")

    for split, path_str in (
        ("train", args.sum_train),
        ("validation", args.sum_validation),
        ("test", args.sum_test),
    ):
        if not path_str:
            continue
        records = load_json_records(_require_input(path_str, "summarization data"))
        examples = bench_mod.build_sum_examples(records, split)
        bench_mod.write_examples(out_dir / f"sum.{split}.jsonl", examples)
        counts[f"sum_{split}"] = len(examples)

    for key, value in sorted(counts.items()):
        print(f"{key}={value}")
    return counts


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--out-dir", dest="out_dir", help="pipeline output directory")
    parser.add_argument("--seed", type=int, help="run seed (default 0)")
    parser.add_argument("--workers", type=int, help="worker count (output-invariant)")
    parser.add_argument("--dry-run", action="store_true", help="validate inputs only")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cmpsynth",
        description="Entity-comparison corpus synthesis and evaluation pipeline",
    )
    parser.add_argument("--version", action="version", version=f"cmpsynth {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest-kb", help="parse the KB dump into the entity index")
    _add_config_flags(p)
    p.add_argument("--dump", dest="kb_dump", help="line-delimited KB dump path")
    p.add_argument("--category-property", dest="category_property")
    p.add_argument("--language", dest="language")

    p = sub.add_parser("ingest-corpus", help="segment corpora into contexts")
    _add_config_flags(p)
    p.add_argument("--news", dest="news_corpus", help="news corpus jsonl")
    p.add_argument("--wiki", dest="wiki_corpus", help="wiki articles jsonl")

    p = sub.add_parser("link", help="link statements to sentences")
    _add_config_flags(p)
    p.add_argument("--stopwords", dest="stopwords", help="stopword list path")

    p = sub.add_parser("mine", help="mine comparison quintuples")
    _add_config_flags(p)
    p.add_argument("--category-property", dest="category_property")

    p = sub.add_parser("textualize", help="QA pairs, summaries, document pairs")
    _add_config_flags(p)
    p.add_argument(
        "--generator",
        dest="generator_cmd",
        help="external data-to-text generator command",
    )

    p = sub.add_parser("emit", help="emit training record shards")
    _add_config_flags(p)
    p.add_argument("--mask-rate", dest="mask_rate", type=float)
    p.add_argument("--mean-span-length", dest="mean_span_length", type=float)
    p.add_argument("--mask-token", dest="mask_token")
    p.add_argument("--shard-size", dest="shard_size", type=int)

    p = sub.add_parser("pipeline", help="run ingest-kb through emit")
    _add_config_flags(p)
    p.add_argument("--dump", dest="kb_dump")
    p.add_argument("--news", dest="news_corpus")
    p.add_argument("--wiki", dest="wiki_corpus")
    p.add_argument("--mask-rate", dest="mask_rate", type=float)
    p.add_argument("--shard-size", dest="shard_size", type=int)
    p.add_argument("--generator", dest="generator_cmd")

    p = sub.add_parser("audit-sample", help="export a seeded link sample for audit")
    _add_config_flags(p)
    p.add_argument("--which", choices=("corpus", "wiki"), default="corpus")
    p.add_argument("--n", dest="audit_n", type=int, help="sample size (default 100)")

    p = sub.add_parser("eval", help="score predictions against references")
    _add_config_flags(p)
    p.add_argument("--predictions", required=True)
    p.add_argument("--references", required=True)
    p.add_argument("--report", help="write the JSON score report here")

    p = sub.add_parser("bench", help="assemble downstream benchmark files")
    _add_config_flags(p)
    p.add_argument("--hotpot-train")
    p.add_argument("--hotpot-validation")
    p.add_argument("--twowiki-train")
    p.add_argument("--twowiki-validation")
    p.add_argument("--sum-train")
    p.add_argument("--sum-validation")
    p.add_argument("--sum-test")
    p.add_argument("--include-bridge", action="store_true",
                   help="count bridge_comparison questions as comparisons")
    p.add_argument("--fewshot-k", type=int, default=0,
                   help="also sample a k-instance few-shot train subset")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=getattr(logging, os.environ.get("CMPSYNTH_LOG", "WARNING").upper(), logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    config = build_config(args)
    dry_run = bool(getattr(args, "dry_run", False))
    try:
        if args.command == "ingest-kb":
            stage_ingest_kb(config, dry_run)
        elif args.command == "ingest-corpus":
            stage_ingest_corpus(config, dry_run)
        elif args.command == "link":
            stage_link(config, dry_run)
        elif args.command == "mine":
            stage_mine(config, dry_run)
        elif args.command == "textualize":
            stage_textualize(config, dry_run)
        elif args.command == "emit":
            stage_emit(config, dry_run)
        elif args.command == "pipeline":
            run_pipeline(config, dry_run)
        elif args.command == "audit-sample":
            stage_audit_sample(config, args.which, dry_run)
        elif args.command == "eval":
            if not dry_run:
                stage_eval(
                    Path(args.predictions),
                    Path(args.references),
                    Path(args.report) if args.report else None,
                )
        elif args.command == "bench":
            stage_bench(args, config)
        else:  # pragma: no cover - argparse enforces choices
            parser.error(f"unknown command {args.command}")
    except (StageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
