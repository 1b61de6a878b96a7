"""Experiment driver: strategy comparison across the step-halving sequence.

For every training seed it trains one base teacher, evaluates undistilled
DDIM sampling at each step count in the halving sequence, then distills the
teacher once per configured weighting strategy and evaluates every round's
student at its own step count. Each evaluation is repeated with distinct
sampling seeds and all raw numbers land in metrics.csv; results.csv holds
the aggregated mean and 95% confidence interval per (strategy, steps) cell.
Everything is derived from explicit seeds, so identical configs reproduce
identical CSV bytes.
"""

from __future__ import annotations

import traceback
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoint import checkpoint_from_model, load_checkpoint, model_from_checkpoint, save_checkpoint
from .config import RunConfig, serialize_config
from .data import ToyDataset, reference_population
from .distill import DistillConfig, progressive_distill
from .frechet import MomentFit, fit_moments, frechet_distance
from .nnet import DenoiserModel, Parameterization
from .sampler import SamplerConfig, SamplerKind, sample
from .schedule import CosineSchedule
from .trainer import TrainConfig, train_base
from .util import child_rng, fmt_float
from .weighting import strategy_from_name

BASELINE_NAME = "teacher-ddim"

METRICS_HEADER = "seed,strategy,steps,rep,fd"
RESULTS_HEADER = "strategy,steps,mean,ci95"


@dataclass(frozen=True)
class MetricRow:
    seed: int
    strategy: str
    steps: int
    rep: int
    fd: float


def build_dataset(cfg: RunConfig) -> ToyDataset:
    d = cfg.dataset
    return ToyDataset(
        num_classes=d.num_classes, latent_dim=d.latent_dim,
        radius=d.radius, stddev=d.stddev, seed=d.seed,
    )


def build_schedule(cfg: RunConfig) -> CosineSchedule:
    return CosineSchedule(t_min=cfg.schedule.t_min)


def build_train_config(cfg: RunConfig, seed: int) -> TrainConfig:
    t = cfg.train
    return TrainConfig(
        updates=t.updates, batch_size=t.batch_size, lr=t.lr, seed=seed,
        parameterization=Parameterization(t.parameterization),
        strategy=strategy_from_name(t.strategy, cfg.distill.gamma),
        hidden=cfg.model.hidden, embed_dim=cfg.model.embed_dim,
        num_frequencies=cfg.model.num_frequencies,
    )


def build_distill_config(cfg: RunConfig, strategy_name: str, seed: int) -> DistillConfig:
    d = cfg.distill
    return DistillConfig(
        iterations=d.iterations, n_start=d.n_start,
        steps_per_round=d.steps_per_round, batch_size=d.batch_size,
        strategy=strategy_from_name(strategy_name, d.gamma),
        lr=d.lr, seed=seed,
    )


def reference_fit(cfg: RunConfig, dataset: ToyDataset) -> MomentFit:
    rng = child_rng(cfg.eval.seed, "reference", dataset.seed)
    return fit_moments(reference_population(dataset, cfg.eval.reference_samples, rng))


def evaluate_model(model: DenoiserModel, schedule: CosineSchedule, dataset: ToyDataset,
                   ref: MomentFit, cfg: RunConfig, steps: int, seed_tags: tuple) -> float:
    """One Frechet evaluation: sample a mixed-class population, fit, compare."""
    rng = child_rng(cfg.eval.seed, *seed_tags)
    conds = rng.integers(0, dataset.num_classes, size=cfg.eval.num_samples)
    sampler_seed = int(rng.integers(0, 2**63 - 1))
    z = sample(model, conds, SamplerConfig(steps=steps, kind=SamplerKind.DDIM,
                                           seed=sampler_seed), schedule)
    return frechet_distance(fit_moments(z), ref)


def _eval_repetitions(model, schedule, dataset, ref, cfg, seed, strategy, steps,
                      rows: list[MetricRow], metrics_file) -> None:
    for rep in range(cfg.eval.repetitions):
        fd = evaluate_model(model, schedule, dataset, ref, cfg, steps,
                            seed_tags=(seed, strategy, steps, rep))
        row = MetricRow(seed=seed, strategy=strategy, steps=steps, rep=rep, fd=fd)
        rows.append(row)
        metrics_file.write(f"{row.seed},{row.strategy},{row.steps},{row.rep},{fmt_float(row.fd)}\n")
        metrics_file.flush()


def halving_steps(cfg: RunConfig) -> list[int]:
    """Step counts in the comparison: n_start, n_start/2, ..., n_start/2^K."""
    return [cfg.distill.n_start >> k for k in range(cfg.distill.iterations + 1)]


def run_experiment(cfg: RunConfig, output_dir: str | Path | None = None) -> Path:
    """Execute the full comparison; returns the output directory.

    Per-strategy failures are logged to errors.log and do not abort the rest
    of the run; whatever metrics were collected stay on disk.
    """
    out = Path(output_dir if output_dir is not None else cfg.run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.cfg").write_text(serialize_config(cfg), encoding="utf-8")

    dataset = build_dataset(cfg)
    schedule = build_schedule(cfg)
    ref = reference_fit(cfg, dataset)
    steps_list = halving_steps(cfg)

    rows: list[MetricRow] = []
    errors: list[str] = []
    with open(out / "metrics.csv", "w", encoding="ascii", newline="\n") as metrics_file:
        metrics_file.write(METRICS_HEADER + "\n")
        for seed in cfg.run.seeds:
            seed_dir = out / f"seed_{seed}"
            seed_dir.mkdir(exist_ok=True)
            try:
                result = train_base(build_train_config(cfg, seed), dataset, schedule)
                teacher = result.model
                save_checkpoint(seed_dir / "teacher.ckpt", checkpoint_from_model(
                    teacher, schedule,
                    provenance={"round": 0, "steps": cfg.distill.n_start,
                                "strategy": cfg.train.strategy, "seed": seed},
                ))
            except Exception:
                errors.append(f"seed {seed}: train_base failed\n{traceback.format_exc()}")
                continue

            for steps in steps_list:
                _eval_repetitions(teacher, schedule, dataset, ref, cfg, seed,
                                  BASELINE_NAME, steps, rows, metrics_file)

            for strategy in cfg.run.strategies:
                strat_dir = seed_dir / strategy
                strat_dir.mkdir(exist_ok=True)
                try:
                    dconfig = build_distill_config(cfg, strategy, seed)
                    _, trace = progressive_distill(
                        teacher, dconfig, dataset, schedule,
                        checkpoint_dir=strat_dir, seed=seed,
                    )
                    _write_trace(strat_dir / "trace.csv", trace)
                    for record in trace.rounds:
                        student, _ = model_from_checkpoint(load_checkpoint(record.checkpoint))
                        _eval_repetitions(student, schedule, dataset, ref, cfg, seed,
                                          strategy, record.student_steps, rows, metrics_file)
                except Exception:
                    errors.append(
                        f"seed {seed}, strategy {strategy}: distillation failed\n"
                        f"{traceback.format_exc()}"
                    )

    if errors:
        (out / "errors.log").write_text("\n".join(errors), encoding="utf-8")
    write_results(rows, out / "results.csv", cfg)
    return out


def _write_trace(path: Path, trace) -> None:
    lines = ["round,teacher_steps,student_steps,final_loss,updates_run,seconds,checkpoint"]
    for r in trace.rounds:
        lines.append(
            f"{r.round_index},{r.teacher_steps},{r.student_steps},"
            f"{fmt_float(r.final_loss)},{r.updates_run},{fmt_float(r.seconds)},{r.checkpoint}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def aggregate(rows: list[MetricRow]) -> dict[tuple[str, int], tuple[float, float, int]]:
    """(strategy, steps) -> (mean, ci95, n) over every seed and repetition."""
    cells: dict[tuple[str, int], list[float]] = {}
    for row in rows:
        cells.setdefault((row.strategy, row.steps), []).append(row.fd)
    out = {}
    for key, values in cells.items():
        arr = np.asarray(values)
        mean = float(arr.mean())
        sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        ci95 = 1.96 * sd / np.sqrt(arr.size)
        out[key] = (mean, float(ci95), int(arr.size))
    return out


def write_results(rows: list[MetricRow], path: str | Path, cfg: RunConfig) -> None:
    """Aggregated report; also records the final-step strategy ordering."""
    cells = aggregate(rows)
    strategy_order = [BASELINE_NAME, *cfg.run.strategies]
    steps_order = halving_steps(cfg)

    lines = [
        "# snrdistill experiment report",
        "# ci95 = 1.96 * sd / sqrt(n) over the n evaluation runs pooled across "
        "seeds and repetitions (normal approximation)",
    ]
    final_steps = steps_order[-1]
    wanted = ("bsa", "min-snr", "trunc-snr")
    if all((name, final_steps) in cells for name in wanted):
        means = {name: cells[(name, final_steps)][0] for name in wanted}
        ok = means["bsa"] <= means["min-snr"] <= means["trunc-snr"]
        chain = " <= ".join(f"{name}={fmt_float(means[name])}" for name in wanted)
        lines.append(
            f"# ordering at {final_steps} steps: {chain} : "
            f"{'OK' if ok else 'VIOLATED'}"
        )
    lines.append(RESULTS_HEADER)
    for strategy in strategy_order:
        for steps in steps_order:
            if (strategy, steps) not in cells:
                continue
            mean, ci95, _ = cells[(strategy, steps)]
            lines.append(f"{strategy},{steps},{fmt_float(mean)},{fmt_float(ci95)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def read_metrics(path: str | Path) -> list[MetricRow]:
    rows = []
    lines = Path(path).read_text(encoding="ascii").splitlines()
    if not lines or lines[0] != METRICS_HEADER:
        raise ValueError(f"unexpected metrics header in {path}")
    for line in lines[1:]:
        if not line:
            continue
        seed, strategy, steps, rep, fd = line.split(",")
        rows.append(MetricRow(seed=int(seed), strategy=strategy, steps=int(steps),
                              rep=int(rep), fd=float(fd)))
    return rows
