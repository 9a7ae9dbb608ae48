"""Command-line front end.

Subcommands: ``label`` (teacher soft labels), ``train`` (distill a student),
``select`` (hard selections from a trained student), ``eval`` (relevance,
diversity, and precision report), and ``oracle`` (independent verification
suites). Exit codes: 0 success, 1 validation error, 2 oracle violation.

Outputs are deterministic: records are emitted in input order regardless
of worker scheduling, and floats are serialized in their shortest exact
form, so equal runs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence

import numpy as np

from . import io as dio
from .config import Config, load_config
from .errors import DppSelectError, InvalidInput, UndefinedMetric
from .metrics import image_precision, pairwise_cosine_distance, relevance_filter
from .oracle import check_gradients, check_marginals
from .records import ArticleRecord
from .student import load_student, save_student, select_images, train_student
from .teacher import TeacherParams, label_article

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_ORACLE = 2


def _label_worker(item):
    article, params = item
    try:
        labels = label_article(article, params)
        return {
            "id": article.id,
            "t_star": float(labels.t_star),
            "pi": [float(x) for x in labels.pi],
        }
    except DppSelectError as exc:
        return {"id": article.id, "error": str(exc)}


def cmd_label(input_path: str, output_path: str, config: Config,
              workers: int = 1) -> int:
    """Label every article; per-article failures are reported and skipped."""
    if workers < 1:
        raise InvalidInput("workers must be a positive integer")
    articles = dio.ingest(input_path, pool_cap=config.pool_cap)
    items = [(article, config.teacher) for article in articles]
    if workers == 1 or len(items) < 2:
        rows = [_label_worker(item) for item in items]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_label_worker, items))
    for row in rows:
        if "error" in row:
            print(f"warning: article {row['id']}: {row['error']}", file=sys.stderr)
    dio.write_labels(output_path, rows)
    return EXIT_OK


def _stem(path: str) -> str:
    return path[:-5] if path.endswith(".json") else path


def cmd_train(labels_path: str, input_path: str, config: Config,
              model_out: str, figures: bool = True) -> int:
    """Distill labels into a student; writes the model, a loss-curve
    sidecar, and (by default) a loss-curve figure."""
    articles = {a.id: a for a in dio.ingest(input_path, pool_cap=config.pool_cap)}
    labeled = dio.read_labels(labels_path)
    dataset = []
    for art_id, labels in labeled:
        if art_id not in articles:
            raise InvalidInput(f"label for unknown article {art_id!r}")
        dataset.append((articles[art_id], labels))
    if not dataset:
        raise InvalidInput("no labeled articles to train on")
    skipped = set(articles) - {art_id for art_id, _ in labeled}
    for art_id in sorted(skipped):
        print(f"warning: article {art_id} has no labels; skipped", file=sys.stderr)
    model, loss_curve = train_student(dataset, config.train)
    save_student(model, model_out)
    stem = _stem(model_out)
    sidecar = {
        "epochs": len(loss_curve),
        "loss": [float(x) for x in loss_curve],
        "optimizer": config.train.optimizer,
        "learning_rate": config.train.learning_rate,
        "seed": config.train.seed,
    }
    with open(stem + ".loss.json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh)
        fh.write("\n")
    if figures:
        from .report import save_loss_curve

        save_loss_curve(loss_curve, stem + ".loss.png")
    return EXIT_OK


def cmd_select(model_path: str, input_path: str, config: Config,
               output_path: str) -> int:
    """Hard selections for every article under the configured rule."""
    model = load_student(model_path)
    articles = dio.ingest(input_path, pool_cap=config.pool_cap)
    sel = config.selection
    rows = []
    for article in articles:
        result = select_images(model, article, rule=sel.rule, budget=sel.budget,
                               threshold=sel.threshold)
        rows.append({
            "id": article.id,
            "rule": result.rule,
            "image_ids": list(result.image_ids),
            "probabilities": [float(p) for p in result.probabilities],
        })
    dio.write_selections(output_path, rows)
    return EXIT_OK


def cmd_eval(selections_path: str, input_path: str, config: Config,
             output_path: str, figures: bool = True) -> int:
    """Relevance-filtered diversity plus precision, one CSV row per article.

    Renders distribution figures next to the CSV unless disabled.
    """
    articles = {a.id: a for a in dio.ingest(input_path, pool_cap=config.pool_cap)}
    selections = dio.read_selections(selections_path)
    rows = []
    mean_pcds, max_pcds, precisions = [], [], []
    for sel in selections:
        art_id = sel["id"]
        if art_id not in articles:
            raise InvalidInput(f"selection for unknown article {art_id!r}")
        article = articles[art_id]
        by_id = {img.id: img for img in article.images}
        unknown = [i for i in sel["image_ids"] if i not in by_id]
        if unknown:
            raise InvalidInput(f"article {art_id}: unknown image ids {unknown}")
        chosen = [by_id[i].embedding for i in sel["image_ids"]]
        kept = relevance_filter(article.text_embedding, chosen,
                                config.relevance_threshold)
        div = pairwise_cosine_distance([chosen[i] for i in kept])
        ip: Optional[float] = None
        if article.has_gold():
            try:
                ip = image_precision(sel["image_ids"], article.gold_ids())
            except UndefinedMetric:
                ip = None
        rows.append({
            "article_id": art_id,
            "filtered_count": div.filtered_count,
            "mean_pcd": div.mean_pcd,
            "max_pcd": div.max_pcd,
            "image_precision": ip,
        })
        mean_pcds.append(div.mean_pcd)
        max_pcds.append(div.max_pcd)
        if ip is not None:
            precisions.append(ip)
    with open(output_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["article_id", "filtered_count", "mean_pcd", "max_pcd",
                         "image_precision"])
        for row in rows:
            writer.writerow([
                row["article_id"],
                row["filtered_count"],
                repr(row["mean_pcd"]),
                repr(row["max_pcd"]),
                "" if row["image_precision"] is None else repr(row["image_precision"]),
            ])
    if figures and rows:
        from .report import save_diversity_figure, save_precision_figure

        stem = output_path[:-4] if output_path.endswith(".csv") else output_path
        save_diversity_figure(mean_pcds, max_pcds, stem + "_pcd.png")
        if precisions:
            save_precision_figure(precisions, stem + "_ip.png")
    return EXIT_OK


def cmd_oracle(input_path: str, config: Config, tol: float = 1e-8,
               seed: int = 0, corrupt: float = 0.0) -> int:
    """Run both verification suites; any violation exits with status 2."""
    if not (np.isfinite(tol) and tol > 0.0):
        raise InvalidInput("tol must be positive")
    articles = dio.ingest(input_path, pool_cap=config.pool_cap)
    report = check_marginals(articles, config.teacher, tol=tol, corrupt=corrupt)
    report.merge(check_gradients(seed=seed))
    print(f"oracle: {report.checks} checks, {len(report.failures)} failures")
    if report.failures:
        for failure in report.failures:
            print(f"oracle violation: {failure}", file=sys.stderr)
        return EXIT_ORACLE
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dppselect",
        description="Diversity-calibrated image labeling, distillation, "
                    "selection, and evaluation over precomputed embeddings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, output=False, model=False):
        p.add_argument("--config", help="YAML configuration file")
        p.add_argument("--input", required=True, help="embeddings JSONL file")
        if output:
            p.add_argument("--output", required=True, help="output file")
        if model:
            p.add_argument("--model", required=True, help="student model JSON file")

    p = sub.add_parser("label", help="write calibrated soft labels")
    add_common(p, output=True)
    p.add_argument("--workers", type=int, default=1,
                   help="parallel worker processes (output order is unchanged)")

    p = sub.add_parser("train", help="distill labels into a student model")
    add_common(p, model=True)
    p.add_argument("--labels", required=True, help="labels JSONL from the label command")
    p.add_argument("--seed", type=int, help="override the training seed")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")

    p = sub.add_parser("select", help="hard selections from a trained student")
    add_common(p, output=True, model=True)

    p = sub.add_parser("eval", help="diversity and precision report")
    add_common(p, output=True)
    p.add_argument("--selections", required=True,
                   help="selections JSONL from the select command")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")

    p = sub.add_parser("oracle", help="run the independent verification suites")
    add_common(p)
    p.add_argument("--tol", type=float, default=1e-8,
                   help="marginal comparison tolerance")
    p.add_argument("--seed", type=int, default=0, help="gradient suite seed")
    p.add_argument("--corrupt-marginals", type=float, default=0.0,
                   help=argparse.SUPPRESS)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else EXIT_VALIDATION
        return EXIT_OK if code == 0 else EXIT_VALIDATION
    try:
        config = load_config(args.config)
        if args.command == "label":
            return cmd_label(args.input, args.output, config, workers=args.workers)
        if args.command == "train":
            if args.seed is not None:
                config = dataclasses.replace(
                    config, train=dataclasses.replace(config.train, seed=args.seed)
                )
            return cmd_train(args.labels, args.input, config, args.model,
                             figures=not args.no_figures)
        if args.command == "select":
            return cmd_select(args.model, args.input, config, args.output)
        if args.command == "eval":
            return cmd_eval(args.selections, args.input, config, args.output,
                            figures=not args.no_figures)
        if args.command == "oracle":
            return cmd_oracle(args.input, config, tol=args.tol, seed=args.seed,
                              corrupt=args.corrupt_marginals)
        raise InvalidInput(f"unknown command {args.command!r}")
    except DppSelectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
