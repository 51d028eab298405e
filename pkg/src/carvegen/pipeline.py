"""Phase orchestration behind the command-line interface.

Each phase reads its inputs from the run's output directory, does its work in
a bounded worker pool where that helps, and writes results in a fixed sorted
order so reruns with the same configuration and seed are byte-identical.
Per-record failures are collected as problems rather than aborting the run;
the caller turns a non-empty problem list into a partial-failure exit code.
"""
from __future__ import annotations

import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import matcher, metrics, predictor, report, stats
from .config import BuiltinPredictorSpec, ExternalPredictorSpec, RunConfig
from .errors import CarvingError, ConfigError, ProtocolError
from .fragments import (
    DatasetManifest,
    FragmentRecord,
    ManifestEntry,
    build_dataset,
    build_pool,
    load_corpus_image,
    load_manifest,
    load_record,
    ratio_tag,
)
from .protocol import ExternalPredictor
from .rng import substream, substream_seed

log = logging.getLogger("carvegen")

PREDICTION_INDEX_SCHEMA = 1
METRIC_NAMES = ("chi_square", "cosine", "jsd", "ssim")


@dataclass(frozen=True)
class RunPaths:
    root: Path

    @property
    def dataset(self) -> Path:
        return self.root / "dataset"

    @property
    def model_file(self) -> Path:
        return self.root / "model.okbm"

    @property
    def predictions(self) -> Path:
        return self.root / "predictions"

    @property
    def prediction_index(self) -> Path:
        return self.predictions / "index.json"

    @property
    def analysis(self) -> Path:
        return self.root / "analysis"

    @property
    def match_dir(self) -> Path:
        return self.root / "match"

    @property
    def report_dir(self) -> Path:
        return self.root / "report"

    @property
    def log_file(self) -> Path:
        return self.root / "run.log"


def paths_for(config: RunConfig) -> RunPaths:
    return RunPaths(root=Path(config.output_dir))


@dataclass
class PhaseOutcome:
    """What a phase accomplished; problems make the run partial, not failed."""

    completed: int = 0
    problems: list[str] = None

    def __post_init__(self):
        if self.problems is None:
            self.problems = []

    @property
    def ok(self) -> bool:
        return not self.problems


def _record_key(entry: ManifestEntry) -> tuple[str, str]:
    return (ratio_tag(entry.ratio), entry.source_id)


def _sorted_entries(manifest: DatasetManifest) -> list[ManifestEntry]:
    return sorted(manifest.records, key=_record_key)


# ---------------------------------------------------------------- prepare


def cmd_prepare(config: RunConfig) -> DatasetManifest:
    paths = paths_for(config)
    paths.root.mkdir(parents=True, exist_ok=True)
    manifest = build_dataset(
        config.corpus_dir,
        paths.dataset,
        ratios=config.ratios,
        per_ratio_count=config.per_ratio_count,
        seed=config.seed,
    )
    log.info(
        "prepared %d records (%d per ratio) in %s",
        len(manifest.records),
        config.per_ratio_count,
        paths.dataset,
    )
    return manifest


# ------------------------------------------------------------------ train


def cmd_train(config: RunConfig) -> Path:
    if not isinstance(config.predictor, BuiltinPredictorSpec):
        raise ConfigError("train applies only to the builtin predictor")
    source_dir = config.train_corpus_dir or config.corpus_dir
    corpus = []
    for path in sorted(Path(source_dir).iterdir()):
        if not path.is_file():
            continue
        data = load_corpus_image(path, image_size=32)
        if data is not None:
            corpus.append(data)
    model = predictor.train(
        corpus, order=config.predictor.order, smoothing=config.predictor.smoothing
    )
    paths = paths_for(config)
    paths.root.mkdir(parents=True, exist_ok=True)
    predictor.save_model(model, paths.model_file)
    log.info(
        "trained %s on %d images from %s", model.predictor_id, len(corpus), source_dir
    )
    return paths.model_file


# ---------------------------------------------------------------- predict


def _decode_policy(
    spec: BuiltinPredictorSpec, root_seed: int, set_id: str, source_id: str
) -> predictor.SamplingPolicy:
    if spec.mode == "greedy":
        return predictor.GREEDY
    return spec.policy(
        seed=substream_seed(root_seed, f"decode:{set_id}:{source_id}")
    )


class _ExternalWorkers:
    """One external predictor process per worker thread, respawned on failure."""

    def __init__(self, spec: ExternalPredictorSpec):
        self._spec = spec
        self._local = threading.local()
        self._lock = threading.Lock()
        self._handles: list[ExternalPredictor] = []

    def request(self, prefix: bytes, length: int) -> bytes:
        handle = getattr(self._local, "handle", None)
        if handle is None:
            handle = ExternalPredictor(
                list(self._spec.command), timeout=self._spec.timeout
            )
            handle.start()
            self._local.handle = handle
            with self._lock:
                self._handles.append(handle)
        try:
            return handle.request(prefix, length)
        except ProtocolError:
            # process state is unknown after any protocol failure; drop the
            # handle so the next request from this thread starts fresh
            self._local.handle = None
            handle.close()
            raise

    def close_all(self) -> None:
        with self._lock:
            handles, self._handles = self._handles, []
        for handle in handles:
            handle.close()


def cmd_predict(config: RunConfig) -> PhaseOutcome:
    paths = paths_for(config)
    manifest = load_manifest(paths.dataset)
    entries = _sorted_entries(manifest)

    spec = config.predictor
    external = None
    if isinstance(spec, BuiltinPredictorSpec):
        model = predictor.load_model(paths.model_file)
        predictor_id = model.predictor_id

        def generate(entry: ManifestEntry, record: FragmentRecord) -> bytes:
            policy = _decode_policy(
                spec, config.seed, ratio_tag(entry.ratio), entry.source_id
            )
            return predictor.predict(
                model, record.input_fragment, len(record.real_fragment), policy
            )

    else:
        external = _ExternalWorkers(spec)
        predictor_id = "external:" + " ".join(spec.command)

        def generate(entry: ManifestEntry, record: FragmentRecord) -> bytes:
            return external.request(
                record.input_fragment, len(record.real_fragment)
            )

    def work(entry: ManifestEntry):
        record = load_record(paths.dataset, entry)
        return generate(entry, record)

    outcome = PhaseOutcome()
    results: dict[tuple[str, str], bytes] = {}
    try:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            futures = {pool.submit(work, e): e for e in entries}
            for future, entry in futures.items():
                key = _record_key(entry)
                try:
                    results[key] = future.result()
                except CarvingError as exc:
                    outcome.problems.append(
                        f"predict {key[0]}/{key[1]}: {type(exc).__name__}: {exc}"
                    )
    finally:
        if external is not None:
            external.close_all()

    paths.predictions.mkdir(parents=True, exist_ok=True)
    index_records = []
    if isinstance(spec, BuiltinPredictorSpec):
        policy_doc = {
            "mode": spec.mode,
            "temperature": spec.temperature,
            "top_k": spec.top_k,
        }
    else:
        policy_doc = {"mode": "external"}
    for entry in entries:
        key = _record_key(entry)
        set_id, source_id = key
        requested = entry.full_len - entry.cut
        row = {
            "source_id": source_id,
            "set": set_id,
            "ratio": str(entry.ratio),
            "requested": requested,
        }
        if key in results:
            data = results[key]
            set_dir = paths.predictions / set_id
            set_dir.mkdir(parents=True, exist_ok=True)
            (set_dir / f"{source_id}.bin").write_bytes(data)
            row["status"] = "ok"
            outcome.completed += 1
        else:
            row["status"] = "error"
        index_records.append(row)

    index = {
        "schema_version": PREDICTION_INDEX_SCHEMA,
        "predictor_id": predictor_id,
        "policy": policy_doc,
        "seed": config.seed,
        "records": index_records,
    }
    paths.prediction_index.write_text(
        json.dumps(index, indent=2, sort_keys=True) + "\n"
    )
    log.info(
        "predicted %d of %d records (%d problems)",
        outcome.completed,
        len(entries),
        len(outcome.problems),
    )
    return outcome


def load_prediction(paths: RunPaths, set_id: str, source_id: str) -> bytes:
    return (paths.predictions / set_id / f"{source_id}.bin").read_bytes()


def prediction_status(paths: RunPaths) -> dict[tuple[str, str], str]:
    index = json.loads(paths.prediction_index.read_text())
    return {
        (row["set"], row["source_id"]): row["status"]
        for row in index["records"]
    }


# ---------------------------------------------------------------- analyze


def _metric_row(record: FragmentRecord, predicted: bytes) -> dict[str, float]:
    pred_hist = metrics.byte_histogram(predicted)
    real_hist = metrics.byte_histogram(record.real_fragment)
    return {
        "chi_square": metrics.chi_square(pred_hist, real_hist),
        "cosine": metrics.cosine_similarity(pred_hist, real_hist),
        "jsd": metrics.jsd(
            metrics.normalize(pred_hist), metrics.normalize(real_hist)
        ),
        "ssim": metrics.fragment_ssim(record, predicted).global_value,
    }


def cmd_analyze(
    config: RunConfig,
    *,
    heatmap_ids: tuple[str, ...] = (),
    reconstruct_ids: tuple[str, ...] = (),
) -> PhaseOutcome:
    paths = paths_for(config)
    manifest = load_manifest(paths.dataset)
    entries = _sorted_entries(manifest)
    status = prediction_status(paths)

    outcome = PhaseOutcome()

    def work(entry: ManifestEntry):
        key = _record_key(entry)
        record = load_record(paths.dataset, entry)
        predicted = load_prediction(paths, *key)
        return _metric_row(record, predicted)

    rows: dict[tuple[str, str], dict[str, float]] = {}
    with ThreadPoolExecutor(max_workers=config.jobs) as pool:
        futures = {}
        for entry in entries:
            key = _record_key(entry)
            if status.get(key) != "ok":
                outcome.problems.append(f"analyze {key[0]}/{key[1]}: no prediction")
                continue
            futures[pool.submit(work, entry)] = entry
        for future, entry in futures.items():
            key = _record_key(entry)
            try:
                rows[key] = future.result()
            except CarvingError as exc:
                outcome.problems.append(
                    f"analyze {key[0]}/{key[1]}: {type(exc).__name__}: {exc}"
                )

    paths.analysis.mkdir(parents=True, exist_ok=True)
    ordered_keys = sorted(rows)
    with (paths.analysis / "metrics.csv").open("w", newline="") as fh:
        fh.write("set,source_id," + ",".join(METRIC_NAMES) + "\n")
        for key in ordered_keys:
            values = rows[key]
            fh.write(
                f"{key[0]},{key[1]},"
                + ",".join(repr(values[m]) for m in METRIC_NAMES)
                + "\n"
            )
    outcome.completed = len(ordered_keys)

    set_ids = sorted({key[0] for key in ordered_keys})
    summaries = []
    dist_dir = paths.analysis / "dist"
    dist_dir.mkdir(exist_ok=True)
    for metric_name in METRIC_NAMES:
        for set_id in set_ids:
            values = [
                rows[key][metric_name] for key in ordered_keys if key[0] == set_id
            ]
            if len(values) >= 2:
                summaries.append(
                    stats.summarize(values, metric=metric_name, set_id=set_id)
                )
            stats.export_distribution(
                values,
                metric_name,
                set_id,
                dist_dir / f"{metric_name}_{set_id}.csv",
            )
    stats.write_summary_csv(summaries, paths.analysis / "summary.csv")
    stats.write_summary_text(summaries, paths.analysis / "summary.txt")

    for record_id in heatmap_ids:
        try:
            entry = _find_entry(entries, record_id)
            record = load_record(paths.dataset, entry)
            predicted = load_prediction(paths, *_record_key(entry))
            result = metrics.fragment_ssim(record, predicted)
            heat_dir = paths.analysis / "heatmaps"
            heat_dir.mkdir(exist_ok=True)
            stem = f"{_record_key(entry)[0]}_{entry.source_id}"
            metrics.write_heatmap(
                result, heat_dir / f"{stem}.pgm", heat_dir / f"{stem}.csv"
            )
        except (CarvingError, OSError) as exc:
            outcome.problems.append(
                f"heatmap {record_id}: {type(exc).__name__}: {exc}"
            )

    for record_id in reconstruct_ids:
        try:
            entry = _find_entry(entries, record_id)
            record = load_record(paths.dataset, entry)
            predicted = load_prediction(paths, *_record_key(entry))
            out_dir = paths.analysis / "reconstructions" / _record_key(entry)[0]
            report.write_reconstruction(record, predicted, out_dir)
        except (CarvingError, OSError) as exc:
            outcome.problems.append(
                f"reconstruct {record_id}: {type(exc).__name__}: {exc}"
            )

    log.info(
        "analyzed %d records across %d sets (%d problems)",
        outcome.completed,
        len(set_ids),
        len(outcome.problems),
    )
    return outcome


def _find_entry(entries: list[ManifestEntry], record_id: str) -> ManifestEntry:
    """Accept either "<set>/<source_id>" or a bare source_id (first match)."""
    if "/" in record_id:
        set_id, _, source_id = record_id.partition("/")
        for entry in entries:
            if _record_key(entry) == (set_id, source_id):
                return entry
    else:
        for entry in entries:
            if entry.source_id == record_id:
                return entry
    raise ConfigError(f"record id {record_id!r} not found in the dataset")


# ------------------------------------------------------------------ match


def _load_decoy_sources(config: RunConfig) -> list[tuple[str, bytes]]:
    sources = []
    for path in sorted(config.pool.decoy_sources):
        tag = path.suffix.lstrip(".").lower() or "raw"
        sources.append((tag, path.read_bytes()))
    sources.sort(key=lambda pair: pair[0])
    return sources


def sample_records(
    manifest: DatasetManifest, seed: int, per_ratio: int
) -> list[ManifestEntry]:
    """Seed-driven without-replacement sample of per_ratio records per set."""
    chosen = []
    rng = substream(seed, "sample")
    for ratio in sorted(manifest.ratios):
        pool = sorted(manifest.entries_for(ratio), key=_record_key)
        if per_ratio > len(pool):
            raise ConfigError(
                f"sample of {per_ratio} exceeds the {len(pool)} records "
                f"in set {ratio_tag(ratio)}"
            )
        rng.shuffle(pool)
        chosen.extend(sorted(pool[:per_ratio], key=_record_key))
    return chosen


def cmd_match(config: RunConfig, *, perfect: bool = False) -> PhaseOutcome:
    paths = paths_for(config)
    manifest = load_manifest(paths.dataset)
    sampled = sample_records(manifest, config.seed, config.sample_per_ratio)
    decoys = _load_decoy_sources(config)
    status = None if perfect else prediction_status(paths)

    outcome = PhaseOutcome()
    results = []
    for entry in sampled:
        key = _record_key(entry)
        set_id, source_id = key
        try:
            record = load_record(paths.dataset, entry)
            if perfect:
                predicted = record.real_fragment
            else:
                if status.get(key) != "ok":
                    raise ConfigError("no prediction for this record")
                predicted = load_prediction(paths, *key)
            pool = build_pool(
                record.real_fragment,
                decoys,
                pool_size=config.pool.size,
                seed=substream_seed(config.seed, f"pool:{set_id}:{source_id}"),
                format_weights=config.pool.format_weights,
            )
            results.append(
                matcher.rank_pool(
                    predicted,
                    pool,
                    weights=config.weights,
                    source_id=f"{set_id}/{source_id}",
                )
            )
            outcome.completed += 1
        except CarvingError as exc:
            outcome.problems.append(
                f"match {set_id}/{source_id}: {type(exc).__name__}: {exc}"
            )

    paths.match_dir.mkdir(parents=True, exist_ok=True)
    matcher.write_rankings(results, paths.match_dir / "rankings.csv")
    counts = matcher.tally(results)
    matcher.write_tally(counts, paths.match_dir / "tally.csv")
    (paths.match_dir / "tally.txt").write_text(counts.as_line() + "\n")
    log.info("matched %d sampled records: %s", outcome.completed, counts.as_line())
    return outcome


# ----------------------------------------------------------------- report


def cmd_report(config: RunConfig) -> Path:
    from .config import config_to_dict

    paths = paths_for(config)
    config_echo = json.dumps(config_to_dict(config), indent=2, sort_keys=True)

    dataset_lines = []
    manifest_path = paths.dataset / "manifest.json"
    if manifest_path.is_file():
        manifest = load_manifest(paths.dataset)
        for ratio in sorted(manifest.ratios):
            n = len(manifest.entries_for(ratio))
            dataset_lines.append(f"set {ratio_tag(ratio)}: {n} records")

    summary_path = paths.analysis / "summary.txt"
    summary_text = summary_path.read_text() if summary_path.is_file() else None
    tally_path = paths.match_dir / "tally.txt"
    tally_line = tally_path.read_text() if tally_path.is_file() else None

    problems = []
    if paths.prediction_index.is_file():
        index = json.loads(paths.prediction_index.read_text())
        for row in index["records"]:
            if row["status"] != "ok":
                problems.append(f"prediction {row['set']}/{row['source_id']} failed")

    text = report.render_run_report(
        config_echo=config_echo,
        dataset_lines=dataset_lines,
        summary_text=summary_text,
        tally_line=tally_line,
        problems=problems,
    )
    paths.report_dir.mkdir(parents=True, exist_ok=True)
    out = paths.report_dir / "report.txt"
    out.write_text(text)
    log.info("report written to %s", out)
    return out
