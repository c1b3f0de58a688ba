"""Experiment runner: evaluation reports, sweep plans and CSV output.

A sweep reads an SI checkpoint, an adaptation pool and a test set from disk,
adapts on nested prefixes of the pool and writes one CSV row per run plus a
seed-averaged row per cell.
"""

from __future__ import annotations

import csv
import io
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .adapt import AdaptConfig, adapt, train_si
from .datagen import Corpus, CorpusConfig, FrameDataset, build_corpus
from .errors import ShapeError
from .formats import check_compatible, load_checkpoint, load_dataset
from .metrics import ProbeConfig, discriminator_probe, frame_error_rate, median_bandwidth, mmd
from .models import AcousticModel, classify_senones, extract_features

CSV_FIELDS = ("method", "lambda", "rho", "adapt_frames", "seed", "fer", "probe_acc", "mmd")
PROBE_FRAMES = 1000


@dataclass
class SIConfig:
    hidden: tuple[int, ...] = (64, 64, 64, 16)
    epochs: int = 10
    mu: float = 0.05
    batch_size: int = 64
    n_h: int | None = None
    activation: str = "tanh"
    seed: int = 0


def train_si_from(cfg: SIConfig, data: FrameDataset) -> AcousticModel:
    return train_si(data, cfg.hidden, cfg.epochs, cfg.mu, cfg.seed, n_h=cfg.n_h,
                    batch_size=cfg.batch_size, activation=cfg.activation)


@dataclass
class Task:
    corpus: Corpus
    si: AcousticModel


def default_task(seed: int, corpus: CorpusConfig | None = None, si: SIConfig | None = None) -> Task:
    """The default synthetic task: corpus and SI model both drawn from ``seed``."""
    ccfg = replace(corpus or CorpusConfig(), seed=seed)
    scfg = replace(si or SIConfig(), seed=seed)
    c = build_corpus(ccfg)
    return Task(c, train_si_from(scfg, c.si_train))


# ---------------------------------------------------------------- evaluation

@dataclass
class EvalReport:
    method: str
    lam: float
    rho: float
    adapt_frames: int
    seed: int | str
    frame_error_rate: float
    probe_accuracy: float
    mmd: float

    def __post_init__(self):
        for name in ("frame_error_rate", "probe_accuracy"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ShapeError(f"{name}={v} outside [0, 1]")
        if self.mmd < 0:
            raise ShapeError("mmd must be non-negative")

    def row(self) -> list[str]:
        return [self.method, repr(float(self.lam)), repr(float(self.rho)), str(self.adapt_frames),
                str(self.seed), f"{self.frame_error_rate:.6f}", f"{self.probe_accuracy:.6f}", f"{self.mmd:.6f}"]


def representation(m: AcousticModel, X, method: str) -> np.ndarray:
    """What a method regularizes: posterior vectors for asa_sp, deep features otherwise."""
    if method == "asa_sp":
        return classify_senones(m, X)
    return extract_features(m, X)


def evaluate(sd: AcousticModel, si: AcousticModel, test: FrameDataset, method: str, lam: float, rho: float,
             adapt_frames: int, seed: int, probe_cfg: ProbeConfig | None = None) -> EvalReport:
    """FER on ``test`` plus probe accuracy and MMD between SD and SI representations."""
    check_compatible(sd, test)
    X = test.features[:PROBE_FRAMES]
    a = representation(sd, X, method)
    b = representation(si, X, method)
    # the unbiased estimate can dip below zero; the report stores its positive part
    divergence = max(0.0, mmd(a, b, median_bandwidth(a, b)))
    return EvalReport(method, lam, rho, adapt_frames, seed, frame_error_rate(sd, test),
                      discriminator_probe(a, b, probe_cfg, seed=seed), divergence)


# -------------------------------------------------------------------- sweeps

@dataclass
class Cell:
    config: AdaptConfig
    adapt_frames: int

    @property
    def key(self) -> tuple:
        c = self.config
        return (c.method, float(c.lam), float(c.rho), self.adapt_frames)


@dataclass
class SweepPlan:
    si_path: str
    adapt_path: str
    test_path: str
    cells: list[Cell]
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    probe: ProbeConfig = field(default_factory=ProbeConfig)

    def check_inputs(self) -> None:
        """Fail with a file error naming every missing input, before any training."""
        missing = [f"{what} {p!r}" for what, p in
                   (("SI checkpoint", self.si_path), ("adaptation data", self.adapt_path),
                    ("test data", self.test_path)) if not Path(p).is_file()]
        if missing:
            raise FileNotFoundError("missing sweep inputs: " + ", ".join(missing))
        if not self.cells:
            raise ShapeError("sweep plan has no cells")
        if not self.seeds:
            raise ShapeError("sweep plan has no seeds")


def grid(base: AdaptConfig, methods: Sequence[str], sizes: Sequence[int],
         lambdas: Sequence[float] = (1.0,), rhos: Sequence[float] = (0.0,)) -> list[Cell]:
    """Cells in table order: per method its weight sweep (lambda or rho), then sizes."""
    cells = []
    for method in methods:
        if method in ("asa", "asa_sp"):
            weights = [dict(lam=l, rho=0.0) for l in lambdas]
        elif method == "kld":
            weights = [dict(lam=0.0, rho=r) for r in rhos]
        else:
            weights = [dict(lam=0.0, rho=0.0)]
        for w, n in itertools.product(weights, sizes):
            cells.append(Cell(replace(base, method=method, **w), int(n)))
    return cells


def run_cell(si: AcousticModel, pool: FrameDataset, test: FrameDataset, cell: Cell, seed: int,
             probe_cfg: ProbeConfig | None = None) -> EvalReport:
    cfg = replace(cell.config, seed=seed)
    result = adapt(si, pool.head(cell.adapt_frames), cfg)
    return evaluate(result.sd, si, test, cfg.method, cfg.lam, cfg.rho, cell.adapt_frames, seed, probe_cfg)


def _load(plan: SweepPlan):
    si = load_checkpoint(plan.si_path)
    if not isinstance(si, AcousticModel):
        raise ShapeError(f"{plan.si_path} holds a discriminator, not an acoustic model")
    pool, test = load_dataset(plan.adapt_path), load_dataset(plan.test_path)
    check_compatible(si, pool)
    check_compatible(si, test)
    largest = max(c.adapt_frames for c in plan.cells)
    if largest > len(pool):
        raise ShapeError(f"plan asks for {largest} adaptation frames, pool has {len(pool)}")
    return si, pool, test


def _job(args):
    plan, i, seed = args
    si, pool, test = _load(plan)
    return run_cell(si, pool, test, plan.cells[i], seed, plan.probe)


def aggregate(cell: Cell, reports: Sequence[EvalReport]) -> EvalReport:
    c = cell.config
    return EvalReport(c.method, c.lam, c.rho, cell.adapt_frames, "mean",
                      float(np.mean([r.frame_error_rate for r in reports])),
                      float(np.mean([r.probe_accuracy for r in reports])),
                      float(np.mean([r.mmd for r in reports])))


def run_experiment(plan: SweepPlan, out_path=None, jobs: int = 1,
                   deterministic: bool = False) -> list[EvalReport]:
    """Run every (cell, seed), write the CSV report and return its rows in order.

    Row order: SI baseline, then per-seed rows in plan order, then one
    aggregate row per cell. Output is independent of ``jobs``.
    """
    plan.check_inputs()
    si, pool, test = _load(plan)
    if jobs < 1:
        raise ShapeError("jobs must be positive")
    work = [(plan, i, s) for i in range(len(plan.cells)) for s in plan.seeds]
    if jobs == 1:
        runs = [run_cell(si, pool, test, plan.cells[i], s, plan.probe) for _, i, s in work]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            runs = list(ex.map(_job, work))

    baseline = evaluate(si, si, test, "si", 0.0, 0.0, 0, plan.seeds[0], plan.probe)
    baseline.seed = "-"
    per_cell = [runs[i * len(plan.seeds):(i + 1) * len(plan.seeds)] for i in range(len(plan.cells))]
    rows = [baseline, *runs, *(aggregate(c, r) for c, r in zip(plan.cells, per_cell))]
    if out_path is not None:
        Path(out_path).write_text(format_csv(rows, deterministic))
    return rows


def format_csv(rows: Iterable[EvalReport], deterministic: bool = False) -> str:
    buf = io.StringIO()
    if not deterministic:
        buf.write(f"# generated {datetime.now(timezone.utc).isoformat(timespec='seconds')}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in rows:
        w.writerow(r.row())
    return buf.getvalue()


def read_csv(path) -> list[dict[str, str]]:
    lines = [l for l in Path(path).read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))
