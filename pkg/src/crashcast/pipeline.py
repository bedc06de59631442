"""Drive the stages end to end and keep their file contracts.

Each stage reads only the files the previous stage declared and writes
its own, so any stage can be rerun alone. The full run also writes a
manifest that pins the resolved config, the seed, the backend, and the
digests of every output; wall-clock timings go to a separate file so the
manifest stays byte-identical across identical runs.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import random
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import Any, Iterable, Sequence

from ._seed import derive_seed
from .config import NormalizationFlags, RunConfig, config_digest, resolved_dict
from .errors import (
    BackendError,
    ConfigError,
    DataError,
    InsufficientData,
    HistoryTooShort,
)
from .ingest import (
    CrashCorpus,
    CrashEvent,
    build_corpus,
    default_catalog,
    filter_critical,
    format_timestamp,
    load_catalog,
    parse_lines,
    parse_timestamp,
)
from .metrics import (
    CATEGORIES,
    ScoredItem,
    TruthTarget,
    aggregate,
    score_item,
)
from .postprocess import (
    NormalizationConfig,
    default_stopwords,
    extract_prediction,
    load_stopwords,
    merge_extractions,
)
from .predictor import (
    Backend,
    PredictionRaw,
    baseline_answer,
    make_backend,
)
from .prompt import (
    PromptBundle,
    build_bundle,
    default_template,
    load_template,
    render_answer_sentence,
    render_cause_prompt,
    render_date,
    shots_from_pairs,
)
from .sequencer import (
    EventSequence,
    LabeledPair,
    build_sequences,
    day_floor,
    enumerate_pairs,
    partition_windows,
    sequences_from_windows,
    take_history,
    window_index_of,
    windows_from_lines,
    windows_to_lines,
)
from .synthgen import generate_corpus

LOGS_FILE = "logs.jsonl"
EVENTS_FILE = "events.jsonl"
INGEST_FILE = "ingest.json"
WINDOWS_FILE = "windows.jsonl"
SPLIT_FILE = "split.json"
PREDICTIONS_FILE = "predictions.jsonl"
REPORT_FILE = "report.json"
TABLE_FILE = "table.csv"
MANIFEST_FILE = "manifest.json"
TIMINGS_FILE = "timings.json"

MIN_HISTORY = 1


def out_dir_of(config: RunConfig) -> Path:
    return Path(config.paths.out_dir)


def logs_path_of(config: RunConfig) -> Path:
    if config.paths.logs:
        return Path(config.paths.logs)
    return out_dir_of(config) / LOGS_FILE


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _write_json(path: Path, payload: Any) -> None:
    _write_text(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as err:
        raise DataError(f"cannot read {path.name}: {err}") from None
    except json.JSONDecodeError as err:
        raise DataError(f"{path.name} is not valid JSON: {err}") from None


def _read_lines(path: Path) -> list[str]:
    try:
        return path.read_text(encoding="utf-8").splitlines()
    except OSError as err:
        raise DataError(f"cannot read {path.name}: {err}") from None


def _file_digest(path: Path) -> str | None:
    if not path.is_file():
        return None
    return hashlib.sha256(path.read_bytes()).hexdigest()


# --- synth ---------------------------------------------------------------------

def synth_stage(config: RunConfig) -> Path:
    lines = generate_corpus(config.generator, seed=config.seed)
    path = logs_path_of(config)
    _write_text(path, "\n".join(lines) + ("\n" if lines else ""))
    return path


# --- ingest --------------------------------------------------------------------

def ingest_stage(config: RunConfig) -> CrashCorpus:
    lines = _read_lines(logs_path_of(config))
    records = parse_lines(lines)
    critical = filter_critical(records)
    catalog = (
        load_catalog(config.paths.catalog) if config.paths.catalog else default_catalog()
    )
    corpus = build_corpus(critical, catalog=catalog)

    out_dir = out_dir_of(config)
    event_lines = []
    for event in corpus.events:
        event_lines.append(
            json.dumps(
                {
                    "system_id": event.system_id,
                    "time": format_timestamp(event.time),
                    "kind": event.kind,
                    "bugcheck": event.bugcheck_code,
                    "params": list(event.params),
                },
                ensure_ascii=False,
            )
        )
    _write_text(out_dir / EVENTS_FILE, "\n".join(event_lines) + "\n")
    _write_json(
        out_dir / INGEST_FILE,
        {
            "source_digest": corpus.source_digest,
            "records": len(records),
            "critical": len(critical),
            "events": len(corpus.events),
            "duplicates": corpus.duplicates,
            "dropped_before_floor": corpus.dropped_before_floor,
        },
    )
    return corpus


def load_events(path: Path) -> CrashCorpus:
    events = []
    for line in _read_lines(path):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            events.append(
                CrashEvent(
                    system_id=obj["system_id"],
                    time=parse_timestamp(obj["time"]),
                    kind=obj["kind"],
                    bugcheck_code=obj["bugcheck"],
                    params=tuple(obj["params"]),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError) as err:
            raise DataError(f"bad event line in {path.name}: {err}") from None
    if not events:
        raise DataError(f"{path.name} holds no events")
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    return CrashCorpus(events=tuple(events), source_digest=digest)


# --- sequence ------------------------------------------------------------------

def sequence_stage(config: RunConfig) -> list[EventSequence]:
    out_dir = out_dir_of(config)
    corpus = load_events(out_dir / EVENTS_FILE)
    sequences = build_sequences(corpus)
    lines: list[str] = []
    for seq in sequences:
        lines.extend(windows_to_lines(partition_windows(seq, config.window_days)))
    _write_text(out_dir / WINDOWS_FILE, "\n".join(lines) + "\n")
    return sequences


def load_sequences(config: RunConfig) -> list[EventSequence]:
    windows = windows_from_lines(_read_lines(out_dir_of(config) / WINDOWS_FILE))
    if not windows:
        raise DataError(f"{WINDOWS_FILE} holds no windows")
    return sequences_from_windows(windows)


# --- split ---------------------------------------------------------------------

def split_pairs(
    sequences: Sequence[EventSequence], train_n: int, val_n: int, seed: int
) -> tuple[list[LabeledPair], list[LabeledPair]]:
    """Seeded disjoint sampling of (history, target) pairs.

    Validation pairs are drawn first; a training pair from the same system
    is then only eligible if its history ends strictly before every
    validation target of that system, so no history covers a held-out
    answer.
    """
    pairs = enumerate_pairs(sequences, min_history=MIN_HISTORY)
    needed = train_n + val_n
    if len(pairs) < needed:
        raise InsufficientData(needed - len(pairs))

    rng = random.Random(derive_seed(seed, "split"))
    shuffled = list(pairs)
    rng.shuffle(shuffled)

    validation = shuffled[:val_n]
    min_val_index: dict[str, int] = {}
    for pair in validation:
        current = min_val_index.get(pair.system_id)
        if current is None or pair.index < current:
            min_val_index[pair.system_id] = pair.index

    candidates = [
        pair
        for pair in shuffled[val_n:]
        if pair.index < min_val_index.get(pair.system_id, pair.index + 1)
    ]
    if len(candidates) < train_n:
        raise InsufficientData(train_n - len(candidates))
    train = candidates[:train_n]
    return train, validation


def _attach_window_index(
    pair: LabeledPair, sequences_by_id: dict[str, EventSequence], width_days: int
) -> LabeledPair:
    origin = day_floor(sequences_by_id[pair.system_id].events[0].time)
    return dataclasses.replace(
        pair, window_index=window_index_of(pair.target.time, origin, width_days)
    )


def split_stage(config: RunConfig) -> dict[str, Any]:
    sequences = load_sequences(config)
    train, validation = split_pairs(
        sequences, config.train_pairs, config.validation_pairs, config.seed
    )
    composition: dict[str, int] = {}
    for pair in validation:
        composition[pair.system_id] = composition.get(pair.system_id, 0) + 1
    payload = {
        "seed": config.seed,
        "train": sorted([p.system_id, p.index] for p in train),
        "validation": sorted([p.system_id, p.index] for p in validation),
        "counts": {"train": len(train), "validation": len(validation)},
        "validation_systems": dict(sorted(composition.items())),
    }
    _write_json(out_dir_of(config) / SPLIT_FILE, payload)
    return payload


# --- predict -------------------------------------------------------------------

def _restore_pairs(
    refs: Iterable[Sequence], sequences_by_id: dict[str, EventSequence], width_days: int
) -> list[LabeledPair]:
    pairs = []
    for system_id, index in refs:
        seq = sequences_by_id.get(system_id)
        if seq is None:
            raise DataError(f"split references unknown system {system_id!r}")
        pairs.append(
            _attach_window_index(take_history(seq, index), sequences_by_id, width_days)
        )
    return pairs


def _normalization_of(
    flags: NormalizationFlags, stopwords_path: str | None
) -> NormalizationConfig:
    stopword_list = frozenset()
    if flags.remove_stopwords:
        stopword_list = (
            load_stopwords(stopwords_path) if stopwords_path else default_stopwords()
        )
    return NormalizationConfig(
        lowercase=flags.lowercase,
        strip_punctuation=flags.strip_punctuation,
        remove_stopwords=flags.remove_stopwords,
        stopword_list=stopword_list,
    )


def _predict_one(
    backend: Backend, bundle: PromptBundle
) -> PredictionRaw:
    started = time.perf_counter()
    time_answer = backend.complete(bundle.rendered_time_prompt)
    if time_answer.strip():
        cause_answer = backend.complete(render_cause_prompt(time_answer, bundle))
    else:
        cause_answer = ""
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    return PredictionRaw(
        time_answer=time_answer,
        cause_answer=cause_answer,
        backend_id=backend.backend_id,
        latency=elapsed_ms,
    )


def _bundle_for(
    config: RunConfig,
    template,
    pair: LabeledPair,
    train: Sequence[LabeledPair],
) -> PromptBundle:
    pool = [p for p in train if p.system_id != pair.system_id]
    shot_seed = derive_seed(config.seed, "shots", pair.system_id, pair.index)
    shots = shots_from_pairs(pool, config.shots_k, shot_seed, config.history_cap)
    return build_bundle(
        template, pair.system_id, pair.history, shots, config.history_cap
    )


def predict_stage(config: RunConfig) -> list[dict[str, Any]]:
    out_dir = out_dir_of(config)
    sequences = load_sequences(config)
    sequences_by_id = {seq.system_id: seq for seq in sequences}
    split = _read_json(out_dir / SPLIT_FILE)
    train = _restore_pairs(split["train"], sequences_by_id, config.window_days)
    validation = _restore_pairs(split["validation"], sequences_by_id, config.window_days)
    validation.sort(key=lambda p: (p.system_id, p.index))

    rows: dict[tuple[str, int], dict[str, Any]] = {}

    def row_of(pair: LabeledPair, raw: PredictionRaw) -> dict[str, Any]:
        return {
            "system_id": pair.system_id,
            "index": pair.index,
            "window_index": pair.window_index,
            "target_time": render_date(pair.target.time),
            "target_cause": pair.target.kind,
            "time_answer": raw.time_answer,
            "cause_answer": raw.cause_answer,
            "backend_id": raw.backend_id,
        }

    def flush() -> list[dict[str, Any]]:
        ordered = [rows[key] for key in sorted(rows)]
        lines = [json.dumps(r, ensure_ascii=False, sort_keys=True) for r in ordered]
        _write_text(out_dir / PREDICTIONS_FILE, "\n".join(lines) + ("\n" if lines else ""))
        return ordered

    if config.backend.kind == "baseline":
        for pair in validation:
            try:
                raw = baseline_answer(pair.history)
            except HistoryTooShort:
                raw = PredictionRaw("", "", "baseline")
            rows[(pair.system_id, pair.index)] = row_of(pair, raw)
        return flush()

    template = (
        load_template(config.paths.template) if config.paths.template else default_template()
    )
    backend = make_backend(config.backend)

    if config.backend.kind == "scripted" or config.backend.max_in_flight == 1:
        try:
            for pair in validation:
                bundle = _bundle_for(config, template, pair, train)
                raw = _predict_one(backend, bundle)
                rows[(pair.system_id, pair.index)] = row_of(pair, raw)
        except BackendError:
            flush()
            raise
        return flush()

    bundles = [(pair, _bundle_for(config, template, pair, train)) for pair in validation]
    try:
        with ThreadPoolExecutor(max_workers=config.backend.max_in_flight) as pool:
            futures = {
                pool.submit(_predict_one, backend, bundle): pair
                for pair, bundle in bundles
            }
            for future in as_completed(futures):
                pair = futures[future]
                raw = future.result()
                rows[(pair.system_id, pair.index)] = row_of(pair, raw)
    except BackendError:
        flush()
        raise
    return flush()


# --- evaluate ------------------------------------------------------------------

def evaluate_stage(
    config: RunConfig, stopwords_override: bool | None = None
) -> dict[str, Any]:
    out_dir = out_dir_of(config)
    flags = config.normalization
    if stopwords_override is not None:
        flags = dataclasses.replace(flags, remove_stopwords=stopwords_override)
    normalization = _normalization_of(flags, config.paths.stopwords)

    items: list[ScoredItem] = []
    backend_id = None
    for line in _read_lines(out_dir / PREDICTIONS_FILE):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            backend_id = obj["backend_id"]
            merged = merge_extractions(
                extract_prediction(obj["time_answer"]),
                extract_prediction(obj["cause_answer"]),
            )
            truth = TruthTarget(
                target_date=obj["target_time"],
                target_cause=obj["target_cause"],
                reference_sentence=render_answer_sentence(
                    obj["target_time"], obj["target_cause"]
                ),
            )
            items.append(
                ScoredItem(
                    system_id=obj["system_id"],
                    index=obj["index"],
                    window_index=obj["window_index"],
                    extraction_status=merged.extraction_status,
                    scores=score_item(merged, truth, normalization),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError) as err:
            raise DataError(f"bad prediction line: {err}") from None

    reports = aggregate(items)

    def score_dict(score) -> dict[str, float]:
        return {"precision": score.precision, "recall": score.recall, "f1": score.f1}

    item_rows = []
    for item in sorted(items, key=lambda i: (i.system_id, i.index)):
        for category in CATEGORIES:
            r1, rl = item.scores[category]
            item_rows.append(
                {
                    "system_id": item.system_id,
                    "index": item.index,
                    "window_index": item.window_index,
                    "status": item.extraction_status,
                    "category": category,
                    "rouge1": score_dict(r1),
                    "rougeL": score_dict(rl),
                }
            )

    report = {
        "backend_id": backend_id,
        "normalization": dataclasses.asdict(flags),
        "item_count": len(items),
        "categories": {
            r.category: {"rouge1": score_dict(r.rouge1), "rougeL": score_dict(r.rougeL)}
            for r in reports
        },
        "items": item_rows,
    }
    _write_json(out_dir / REPORT_FILE, report)

    table_lines = ["backend_id,category,metric,precision,recall,f1"]
    for r in reports:
        for metric, score in (("rouge1", r.rouge1), ("rougeL", r.rougeL)):
            table_lines.append(
                f"{backend_id},{r.category},{metric},"
                f"{score.precision:.6f},{score.recall:.6f},{score.f1:.6f}"
            )
    _write_text(out_dir / TABLE_FILE, "\n".join(table_lines) + "\n")
    return report


# --- the full run ----------------------------------------------------------------

def _write_manifest(
    config: RunConfig,
    status: str,
    error: Exception | None,
    counts: dict[str, Any],
    validation_systems: dict[str, int],
    backend_id: str | None,
) -> None:
    out_dir = out_dir_of(config)
    outputs = {}
    for name, path in (
        ("logs", logs_path_of(config)),
        ("events", out_dir / EVENTS_FILE),
        ("windows", out_dir / WINDOWS_FILE),
        ("split", out_dir / SPLIT_FILE),
        ("predictions", out_dir / PREDICTIONS_FILE),
        ("report", out_dir / REPORT_FILE),
        ("table", out_dir / TABLE_FILE),
    ):
        outputs[name] = _file_digest(path)
    manifest = {
        "status": status,
        "error": None
        if error is None
        else {"kind": type(error).__name__, "message": str(error)},
        "seed": config.seed,
        "backend_id": backend_id,
        "config": resolved_dict(config),
        "config_digest": config_digest(config),
        "item_counts": counts,
        "validation_systems": validation_systems,
        "outputs": outputs,
        "timings_file": TIMINGS_FILE,
    }
    _write_json(out_dir / MANIFEST_FILE, manifest)


def run_all(config: RunConfig) -> dict[str, Any]:
    """Every stage in order; manifest and timings written even on failure."""
    out_dir = out_dir_of(config)
    out_dir.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}
    counts: dict[str, Any] = {}
    validation_systems: dict[str, int] = {}
    backend_id: str | None = None

    def timed(name, fn):
        started = time.perf_counter()
        result = fn()
        timings[name] = time.perf_counter() - started
        return result

    try:
        if not config.paths.logs:
            timed("synth", lambda: synth_stage(config))
        corpus = timed("ingest", lambda: ingest_stage(config))
        counts["events"] = len(corpus.events)
        sequences = timed("sequence", lambda: sequence_stage(config))
        counts["systems"] = len(sequences)
        counts["pairs"] = len(enumerate_pairs(sequences, min_history=MIN_HISTORY))
        split = timed("split", lambda: split_stage(config))
        counts["train"] = split["counts"]["train"]
        counts["validation"] = split["counts"]["validation"]
        validation_systems = split["validation_systems"]
        predictions = timed("predict", lambda: predict_stage(config))
        counts["predictions"] = len(predictions)
        backend_id = predictions[0]["backend_id"] if predictions else None
        report = timed("evaluate", lambda: evaluate_stage(config))
    except (ConfigError, DataError, BackendError) as err:
        predictions_path = out_dir / PREDICTIONS_FILE
        counts.setdefault(
            "predictions",
            sum(1 for line in _read_lines(predictions_path) if line.strip())
            if predictions_path.is_file()
            else 0,
        )
        _write_manifest(config, "failed", err, counts, validation_systems, backend_id)
        _write_json(out_dir / TIMINGS_FILE, {"seconds": timings})
        raise

    _write_manifest(config, "ok", None, counts, validation_systems, backend_id)
    _write_json(out_dir / TIMINGS_FILE, {"seconds": timings})
    return report
