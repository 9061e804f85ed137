"""Concordance: locations of every repeated n-word string in a text.

One payload per string length n carries the shared read-only word list
through three stages: summed letter-code values per window, a map from each
value to its window positions, then disambiguation of value collisions into
a map from the actual word string to its positions.  The collector writes
one file per n, keeping strings that occur at least ``min_seq_len`` times.

Words are cleaned by stripping leading and trailing non-alphanumerics and
lowercasing; a word's value is the sum of its character codes.

Output files have one line per surviving string, sorted lexicographically:
``string<TAB>count<TAB>loc,loc,...``.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..functionals import RunnableNetwork, gop_network, pog_network
from ..protocol import COMPLETED_OK, NORMAL_CONTINUATION, NORMAL_TERMINATION
from ..terminals import EmitDetails, ResultDetails

DEFAULT_TEXT = Path(__file__).parent / "data" / "sample_text.txt"


@dataclass
class ConcordanceConfig:
    file: str | Path = DEFAULT_TEXT
    n: int = 4
    min_seq_len: int = 2
    arch: str = "gop"  # "gop" | "pog"
    width: int = 2  # pipelines (gop) or lane count (pog)
    out_prefix: str | None = None


def clean_word(raw: str) -> str:
    start, end = 0, len(raw)
    while start < end and not raw[start].isalnum():
        start += 1
    while end > start and not raw[end - 1].isalnum():
        end -= 1
    return raw[start:end].lower()


def word_value(word: str) -> int:
    return sum(ord(c) for c in word)


def load_words(path: str | Path) -> list[str]:
    words = []
    for raw in Path(path).read_text(encoding="utf-8").split():
        w = clean_word(raw)
        if w:
            words.append(w)
    return words


class ConcordanceJob:
    def __init__(self):
        self.n = 0
        self.words = None  # shared, read-only after init
        self.values = None
        self.value_list = None
        self.indices_map = None
        self.words_map = None


def init_text(ctx, params):
    n_max, path = params
    ctx.n_max = n_max
    ctx.words = load_words(path)
    ctx.values = np.array([word_value(w) for w in ctx.words], dtype=np.int64)
    ctx.next_n = 1
    return COMPLETED_OK


def create_job(job, ctx, params):
    if ctx.next_n > ctx.n_max:
        return NORMAL_TERMINATION
    job.n = ctx.next_n
    job.words = ctx.words
    job.values = ctx.values
    ctx.next_n += 1
    return NORMAL_CONTINUATION


def value_list_stage(job, params):
    n = job.n
    if len(job.values) < n:
        job.value_list = np.zeros(0, dtype=np.int64)
        return COMPLETED_OK
    sums = np.concatenate(([0], np.cumsum(job.values)))
    job.value_list = sums[n:] - sums[:-n]
    return COMPLETED_OK


def indices_map_stage(job, params):
    indices = defaultdict(list)
    for i, v in enumerate(job.value_list.tolist()):
        indices[v].append(i)
    job.indices_map = indices
    return COMPLETED_OK


def words_map_stage(job, params):
    words_map = defaultdict(list)
    n, words = job.n, job.words
    for locs in job.indices_map.values():
        # equal sums may come from different strings: group by the words
        for i in locs:
            words_map[" ".join(words[i:i + n])].append(i)
    job.words_map = words_map
    return COMPLETED_OK


def format_lines(words_map, min_seq_len: int) -> list[str]:
    lines = []
    for phrase in sorted(words_map):
        locs = words_map[phrase]
        if len(locs) >= min_seq_len:
            lines.append(f"{phrase}\t{len(locs)}\t{','.join(map(str, locs))}")
    return lines


class ConcordanceResults:
    def __init__(self):
        self.min_seq_len = 2
        self.out_prefix = None
        self.per_n = {}
        self.files = []


def init_results(acc, params):
    acc.min_seq_len, acc.out_prefix = params
    return COMPLETED_OK


def collect_job(acc, job):
    lines = format_lines(job.words_map, acc.min_seq_len)
    acc.per_n[job.n] = lines
    if acc.out_prefix:
        path = Path(f"{acc.out_prefix}.n{job.n}.txt")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        acc.files.append(str(path))
    return COMPLETED_OK


STAGE_OPS = [value_list_stage, indices_map_stage, words_map_stage]


def emit_details(cfg: ConcordanceConfig) -> EmitDetails:
    return EmitDetails(
        factory=ConcordanceJob,
        init=init_text,
        init_data=[cfg.n, str(cfg.file)],
        create=create_job,
    )


def result_details(cfg: ConcordanceConfig) -> ResultDetails:
    return ResultDetails(
        factory=ConcordanceResults,
        init=init_results,
        init_data=[cfg.min_seq_len, cfg.out_prefix],
        collect=collect_job,
    )


def network(cfg: ConcordanceConfig) -> RunnableNetwork:
    if cfg.arch == "gop":
        return gop_network(
            emit_details(cfg), [result_details(cfg)] * cfg.width,
            cfg.width, 3, STAGE_OPS)
    if cfg.arch == "pog":
        return pog_network(
            emit_details(cfg), [result_details(cfg)] * cfg.width,
            cfg.width, 3, STAGE_OPS)
    raise ValueError(f"unknown architecture {cfg.arch!r}")


def run(cfg: ConcordanceConfig) -> dict[int, list[str]]:
    """Run the chosen architecture; returns {n: output lines}."""
    report = network(cfg).run()
    if not report.ok:
        raise RuntimeError(f"concordance network failed with code {report.code}")
    merged: dict[int, list[str]] = {}
    for outcome in report.results:
        merged.update(outcome.result.per_n)
    return merged


def run_sequential(cfg: ConcordanceConfig) -> dict[int, list[str]]:
    """Plain loop over the identical stage callbacks."""
    from types import SimpleNamespace

    ctx = SimpleNamespace()
    init_text(ctx, [cfg.n, str(cfg.file)])
    acc = ConcordanceResults()
    init_results(acc, [cfg.min_seq_len, None])
    while True:
        job = ConcordanceJob()
        if create_job(job, ctx, []) == NORMAL_TERMINATION:
            break
        for op in STAGE_OPS:
            op(job, [])
        collect_job(acc, job)
    return acc.per_n


def brute_force(path: str | Path, n_max: int, min_seq_len: int) -> dict[int, list[str]]:
    """Independent check: direct n-gram position table, no value step."""
    words = load_words(path)
    out = {}
    for n in range(1, n_max + 1):
        table = defaultdict(list)
        for i in range(len(words) - n + 1):
            table[" ".join(words[i:i + n])].append(i)
        out[n] = format_lines(table, min_seq_len)
    return out


def registry():
    from ..builder import FunctionRegistry

    reg = FunctionRegistry()
    reg.register("conc.job", ConcordanceJob)
    reg.register("conc.init", init_text)
    reg.register("conc.create", create_job)
    reg.register("conc.values", value_list_stage)
    reg.register("conc.indices", indices_map_stage)
    reg.register("conc.words", words_map_stage)
    reg.register("conc.acc", ConcordanceResults)
    reg.register("conc.initres", init_results)
    reg.register("conc.collect", collect_job)
    return reg


def spec(cfg: ConcordanceConfig) -> dict:
    collect_cfg = {
        "factory": "conc.acc", "init": "conc.initres",
        "init_data": [cfg.min_seq_len, cfg.out_prefix],
        "collect": "conc.collect",
    }
    if cfg.arch == "gop":
        return {"nodes": [
            {"kind": "emit", "config": {
                "factory": "conc.job", "init": "conc.init",
                "init_data": [cfg.n, str(cfg.file)], "create": "conc.create"}},
            {"kind": "spreader", "config": {
                "policy": "fan-any", "destinations": cfg.width}},
            {"kind": "composite", "config": {
                "pattern": "groupOfPipelineCollects", "groups": cfg.width,
                "stages": 3,
                "stage_ops": ["conc.values", "conc.indices", "conc.words"],
                "result_details": [collect_cfg] * cfg.width}},
        ]}
    return {"nodes": [
        {"kind": "composite", "config": {
            "pattern": "taskParallelOfGroupCollects", "workers": cfg.width,
            "stages": 3,
            "stage_ops": ["conc.values", "conc.indices", "conc.words"],
            "emit": {"factory": "conc.job", "init": "conc.init",
                     "init_data": [cfg.n, str(cfg.file)],
                     "create": "conc.create"},
            "result_details": [collect_cfg] * cfg.width}},
    ]}
