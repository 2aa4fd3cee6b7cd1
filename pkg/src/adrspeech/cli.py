"""Command-line entry points around the library stages.

Exit codes: 0 success, 1 usage error, 2 data error (bad files, manifests,
ids), 3 numerical/convergence failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import adr, models, persist
from .audio import load_wav, normalize_loudness, write_wav
from .errors import NumericalError, PipelineError
from .evaluation import format_report, score_task1, score_task2
from .manifest import read_manifest, read_predictions, write_predictions
from .matching import CohortMember, balance_report, match_pairs, propensity_scores
from .pipeline import (PipelineConfig, derive_seed, extract_from_manifest,
                       run_pipeline, write_feature_csv)
from .synth import generate_synthetic_corpus


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(1)


def _load_config(path: str | None) -> PipelineConfig:
    return PipelineConfig.from_file(path) if path else PipelineConfig()


def _cmd_normalize(args) -> None:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.manifest:
        sources = [(e.id, e.audio_path) for e in read_manifest(args.manifest)]
    else:
        sources = [(Path(p).stem, p) for p in args.wav]
    rows = []
    for rec_id, path in sources:
        rec = load_wav(path, recording_id=rec_id)
        normalized, report = normalize_loudness(rec, args.target_lufs)
        write_wav(out_dir / f"{rec_id}.wav", normalized)
        rows.append([rec_id, f"{report.integrated_loudness:.3f}",
                     f"{report.applied_gain:.3f}", report.clipped_samples])
    with open(out_dir / "loudness.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "measured_lufs", "gain_db", "clipped_samples"])
        writer.writerows(rows)
    print(f"normalized {len(rows)} file(s) -> {out_dir}")


def _cmd_extract(args) -> None:
    config = _load_config(args.config)
    entries = read_manifest(args.manifest)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    matrices, loudness = extract_from_manifest(entries, config)
    for m in matrices:
        write_feature_csv(out_dir / f"{m.recording_id}.csv", m)
    persist.write_feature_cache(out_dir / "features.bin", matrices)
    with open(out_dir / "loudness.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["id", "measured_lufs", "gain_db",
                                                "clipped_samples"])
        writer.writeheader()
        writer.writerows(loudness)
    print(f"extracted {len(matrices)} recording(s) -> {out_dir}")


def _entries_by_id(manifest_path: str) -> dict:
    return {e.id: e for e in read_manifest(manifest_path)}


def _cmd_adr_fit(args) -> None:
    matrices = persist.read_feature_cache(args.features)
    pooled = np.vstack([m.values for m in matrices])
    stats = adr.fit_standardizer(pooled)
    codebook = adr.train_som(stats.transform(pooled), args.nodes,
                             epochs=args.epochs, seed=args.seed)
    persist.save_adr_model(args.out, stats, codebook)
    print(f"ADR model: C={args.nodes} qe {codebook.quantization_error_initial:.4f}"
          f" -> {codebook.quantization_error_final:.4f}; saved to {args.out}")


def _cmd_adr_transform(args) -> None:
    stats, codebook = persist.load_adr_model(args.model)
    matrices = persist.read_feature_cache(args.features)
    entries = _entries_by_id(args.manifest)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        c = codebook.node_count
        writer.writerow(["id"] + [f"adr_{k}" for k in range(c)] + ["age", "gender"])
        for m in matrices:
            entry = entries.get(m.recording_id)
            if entry is None:
                raise PipelineError(f"{m.recording_id} missing from manifest")
            vec = adr.represent_recording(codebook, m, stats,
                                          entry.age, entry.gender_code)
            writer.writerow([m.recording_id] + [repr(v) for v in vec.as_array()])
    print(f"wrote {len(matrices)} recording vector(s) -> {args.out}")


def _read_vectors(path: str) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        ids, rows = [], []
        for row in reader:
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    if rows and len(header) - 1 != len(rows[0]):
        raise PipelineError(f"{path}: ragged vector rows")
    return ids, np.asarray(rows)


def _cmd_train(args) -> None:
    ids, x = _read_vectors(args.vectors)
    entries = _entries_by_id(args.manifest)
    config = _load_config(args.config)
    if args.task == 1:
        y = np.array([entries[i].group for i in ids])
        model = models.train_nb(x, y)
        persist.save_nb_model(args.out, model)
    else:
        y = np.array([float(entries[i].mmse) for i in ids])
        model = models.train_svr(x, y, gamma=config.svr_gamma,
                                 epsilon=config.svr_epsilon,
                                 c_box=config.svr_box, tol=config.svr_tol)
        persist.save_svr_model(args.out, model)
        if not model.converged:
            raise NumericalError("SVR did not converge within the iteration cap")
    print(f"trained task-{args.task} model on {len(ids)} recordings -> {args.out}")


def _cmd_predict(args) -> None:
    ids, x = _read_vectors(args.vectors)
    predictions: dict[str, str | float] = {}
    if args.task == 1:
        model = persist.load_nb_model(args.model)
        for i, row in zip(ids, x):
            predictions[i] = models.predict_nb(model, row)[0]
    else:
        model = persist.load_svr_model(args.model)
        for i, row in zip(ids, x):
            predictions[i] = models.predict_svr(model, row)
    write_predictions(args.out, predictions, args.task)
    print(f"wrote {len(ids)} prediction(s) -> {args.out}")


def _cmd_grid_search(args) -> None:
    config = _load_config(args.config)
    matrices = persist.read_feature_cache(args.features)
    entries = _entries_by_id(args.manifest)
    examples = []
    for m in matrices:
        e = entries[m.recording_id]
        examples.append(models.GridSearchExample(
            features=m, age=e.age, gender=e.gender_code,
            label=e.group, mmse=None if e.mmse is None else float(e.mmse)))
    objective = "accuracy" if args.task == 1 else "rmse"
    candidates = tuple(int(c) for c in args.candidates.split(","))
    result = models.grid_search_C(examples, objective, candidates=candidates,
                                  seed=derive_seed(config.seed, "grid-search"),
                                  epochs=config.adr_epochs)
    doc = {"objective": result.objective, "chosen": result.chosen,
           "scores": {str(k): v for k, v in result.scores.items()}}
    Path(args.out).write_text(json.dumps(doc, indent=2))
    print(f"grid search ({objective}): chose C={result.chosen}; "
          f"scores {result.scores}")


def _cmd_match(args) -> None:
    members = []
    with open(args.cohort, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["id", "age", "gender", "group"]:
            raise PipelineError(f"{args.cohort}: header must be id,age,gender,group")
        for row in reader:
            members.append(CohortMember(
                id=row["id"], age=float(row["age"]),
                gender=1 if row["gender"].strip().upper() == "F" else 0,
                treated=row["group"].strip().upper() == "AD"))
    scores = propensity_scores(members)
    pairs = match_pairs(members, scores, caliper=args.caliper, seed=args.seed)
    report = balance_report(members, pairs)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "matched_ids.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["treated_id", "control_id", "score_distance"])
        for p in pairs:
            writer.writerow([p.treated_id, p.control_id, f"{p.score_distance:.6f}"])
    with open(out_dir / "balance.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["term", "smd", "threshold", "status"])
        writer.writerows(report.as_rows())
    lines = [f"matched {len(pairs)} pair(s)"]
    for term, smd, threshold, status in report.as_rows():
        lines.append(f"  {term:12s} smd={smd:.4f} (< {threshold}) {status}")
    text = "\n".join(lines)
    (out_dir / "balance.txt").write_text(text + "\n")
    print(text)


def _cmd_evaluate(args) -> None:
    reference_entries = read_manifest(args.reference)
    predictions = read_predictions(args.predictions, args.task)
    if args.task == 1:
        reference = {e.id: e.group for e in reference_entries}
        if any(v is None for v in reference.values()):
            raise PipelineError("reference manifest lacks group labels")
        metrics = score_task1(predictions, reference)
    else:
        reference = {e.id: float(e.mmse) for e in reference_entries
                     if e.mmse is not None}
        if len(reference) != len(reference_entries):
            raise PipelineError("reference manifest lacks MMSE scores")
        metrics = score_task2(predictions, reference)
    text, csv_text = format_report(metrics, args.task)
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.txt").write_text(text + "\n")
        (out_dir / "report.csv").write_text(csv_text)
    print(text)


def _cmd_pipeline_run(args) -> None:
    config = _load_config(args.config)
    summary = run_pipeline(config, args.train, args.test, args.task, args.out_dir)
    print(json.dumps(summary, indent=2))


def _cmd_synth(args) -> None:
    entries = generate_synthetic_corpus(args.out_dir, args.n_per_class,
                                        seed=args.seed, language=args.language)
    print(f"synthesized {len(entries)} recording(s) -> {args.out_dir}/manifest.csv")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adrspeech",
                     description="speech-based cognitive screening pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalize", help="loudness-normalize WAV files")
    p.add_argument("wav", nargs="*", help="WAV files (or use --manifest)")
    p.add_argument("--manifest")
    p.add_argument("--target-lufs", type=float, default=-23.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_normalize)

    p = sub.add_parser("extract", help="extract 88-dim frame features")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("adr", help="fit or apply the recording representation")
    adr_sub = p.add_subparsers(dest="adr_command", required=True)
    pf = adr_sub.add_parser("fit")
    pf.add_argument("--features", required=True, help="feature cache from extract")
    pf.add_argument("--nodes", type=int, required=True)
    pf.add_argument("--epochs", type=int, default=100)
    pf.add_argument("--seed", type=int, default=0)
    pf.add_argument("--out", required=True)
    pf.set_defaults(func=_cmd_adr_fit)
    pt = adr_sub.add_parser("transform")
    pt.add_argument("--model", required=True)
    pt.add_argument("--features", required=True)
    pt.add_argument("--manifest", required=True, help="supplies age and gender")
    pt.add_argument("--out", required=True)
    pt.set_defaults(func=_cmd_adr_transform)

    p = sub.add_parser("train", help="train the task learner on recording vectors")
    p.add_argument("--task", type=int, choices=(1, 2), required=True)
    p.add_argument("--vectors", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="predict labels or MMSE scores")
    p.add_argument("--task", type=int, choices=(1, 2), required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--vectors", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("grid-search", help="search the SOM node count")
    p.add_argument("--task", type=int, choices=(1, 2), required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--candidates", default="5,10,15,20,25")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_grid_search)

    p = sub.add_parser("match", help="propensity-score cohort matching")
    p.add_argument("--cohort", required=True, help="CSV: id,age,gender,group")
    p.add_argument("--caliper", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_match)

    p = sub.add_parser("evaluate", help="score a predictions file")
    p.add_argument("--task", type=int, choices=(1, 2), required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("pipeline", help="end-to-end runs")
    pipe_sub = p.add_subparsers(dest="pipeline_command", required=True)
    pr = pipe_sub.add_parser("run")
    pr.add_argument("--config")
    pr.add_argument("--train", required=True)
    pr.add_argument("--test", required=True)
    pr.add_argument("--task", type=int, choices=(1, 2), required=True)
    pr.add_argument("--out-dir", required=True)
    pr.set_defaults(func=_cmd_pipeline_run)

    p = sub.add_parser("synth", help="generate a synthetic demo corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-per-class", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--language", default="en")
    p.set_defaults(func=_cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except FileNotFoundError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except NumericalError as exc:
        sys.stderr.write(f"numerical error: {exc}\n")
        return 3
    except PipelineError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
