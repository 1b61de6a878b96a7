"""Progressive step-halving distillation.

Each round initializes a student from the current teacher, then trains it so
that one student step at grid spacing 1/N reproduces two teacher DDIM
half-steps of spacing 0.5/N. The two half-steps are collapsed into a single
clean-latent regression target

    z0_tilde = (z_t'' - (sigma_t''/sigma_t) z_t) / (alpha_t'' - (sigma_t''/sigma_t) alpha_t),

the unique latent prediction for which one DDIM step t -> t'' from z_t lands
exactly on z_t''. The per-sample squared error is weighted by the configured
SNR strategy. After a round the student becomes the next teacher and the
step count halves.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .data import ToyDataset, draw_batch
from .errors import DegenerateTargetError, DistillationDivergedError
from .nnet import AdamState, DenoiserModel, Parameterization, adam_step, loss_and_gradients
from .sampler import ddim_step, predict_x
from .schedule import CosineSchedule
from .util import child_rng
from .weighting import WeightKind, WeightStrategy

Array = np.ndarray

DENOMINATOR_FLOOR = 1e-9


@dataclass
class DistillConfig:
    """Knobs for one full progressive-distillation run."""

    iterations: int = 3            # K: number of halvings
    n_start: int = 64              # full step count of the initial teacher
    steps_per_round: int = 4000    # optimizer-update budget per round
    batch_size: int = 256
    strategy: WeightStrategy = field(
        default_factory=lambda: WeightStrategy(WeightKind.BALANCED_SNR_AWARE)
    )
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    plateau_window: int = 200      # updates per moving-average window
    plateau_rel_tol: float = 1e-4  # relative improvement below which we stop

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.n_start % (2**self.iterations) != 0:
            raise ValueError(
                f"n_start={self.n_start} must be divisible by 2^iterations={2**self.iterations}"
            )


@dataclass
class RoundRecord:
    round_index: int
    teacher_steps: int
    student_steps: int
    final_loss: float
    updates_run: int
    seconds: float
    checkpoint: str | None = None


@dataclass
class DistillTrace:
    rounds: list[RoundRecord] = field(default_factory=list)


@dataclass
class RoundResult:
    student: DenoiserModel
    final_loss: float
    updates_run: int
    losses: Array
    sample_log: list[dict] | None = None


def teacher_target(teacher, z_t, t, n_steps: int, cond, schedule: CosineSchedule
                   ) -> tuple[Array, Array]:
    """Two teacher half-steps from z_t, collapsed to a one-step target.

    `t` is expected on the student grid {i/N : i >= 1} (scalar or per-sample
    array). Returns (z0_tilde, z_t''). Noise-parameterized teachers are
    converted to latent predictions with the query time clipped to
    1 - 0.5/N, which keeps the conversion away from its t = 1 singularity.
    """
    z_t = np.asarray(z_t, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 1.0 / n_steps - 1e-9) or np.any(t > 1.0 + 1e-12):
        raise ValueError(f"t must lie on the grid i/{n_steps} with i >= 1, got {t}")
    half = 0.5 / n_steps
    t_p = np.clip(t - half, 0.0, 1.0)
    t_pp = np.clip(t - 2.0 * half, 0.0, 1.0)
    max_query_t = 1.0 - half

    x1 = predict_x(teacher, z_t, t, cond, schedule, max_query_t=max_query_t)
    z_p = ddim_step(z_t, x1, t, t_p, schedule)
    x2 = predict_x(teacher, z_p, t_p, cond, schedule, max_query_t=max_query_t)
    z_pp = ddim_step(z_p, x2, t_p, t_pp, schedule)

    alpha_t, sigma_t = schedule.alpha_sigma(t)
    alpha_pp, sigma_pp = schedule.alpha_sigma(t_pp)
    ratio = np.asarray(sigma_pp) / np.asarray(sigma_t)
    denom = np.asarray(alpha_pp) - ratio * np.asarray(alpha_t)
    if np.any(np.abs(denom) <= DENOMINATOR_FLOOR):
        bad = t if t.ndim == 0 else t[np.abs(denom) <= DENOMINATOR_FLOOR][0]
        raise DegenerateTargetError(float(bad), n_steps)
    if np.ndim(ratio) == 1:
        ratio = ratio[:, None]
        denom = denom[:, None]
    z0_tilde = (z_pp - ratio * z_t) / denom
    return z0_tilde, z_pp


def distill_round(teacher, config: DistillConfig, n_steps: int, dataset: ToyDataset,
                  schedule: CosineSchedule, seed: int | None = None,
                  collect_log: bool = False) -> RoundResult:
    """Train one student against two-step teacher targets at grid size 1/N.

    The teacher only needs the small model surface used here: `params`,
    `parameterization`, `copy_with`, `forward`, and `graph_forward` (the
    test suite exercises linear and constant families through the same
    loop). The student starts as a bit-exact parameter copy of the teacher,
    retagged to predict clean latents, and trains for `steps_per_round`
    updates or until the windowed mean loss stops improving.
    """
    if n_steps < 2 or n_steps % 2 != 0:
        raise ValueError(f"student steps must be even and >= 2, got {n_steps}")
    student = teacher.copy_with(parameterization=Parameterization.X)
    rng = child_rng(config.seed if seed is None else seed, "distill-round", n_steps)
    state = AdamState.fresh(
        student.params, lr=config.lr,
        beta1=config.beta1, beta2=config.beta2, eps=config.adam_eps,
    )

    losses: list[float] = []
    sample_log: list[dict] | None = [] if collect_log else None
    prev_window: float | None = None

    for update in range(config.steps_per_round):
        cond, z0 = draw_batch(dataset, config.batch_size, rng)
        i = rng.integers(1, n_steps + 1, size=config.batch_size)
        t = i / n_steps
        eps = rng.standard_normal(z0.shape)
        alpha, sigma = schedule.alpha_sigma(t)
        z_t = alpha[:, None] * z0 + sigma[:, None] * eps

        z0_tilde, _ = teacher_target(teacher, z_t, t, n_steps, cond, schedule)
        snr = schedule.snr(t)
        w = config.strategy.weight(snr)

        captured: dict[str, ad.Var] = {}

        def loss_fn(forward):
            diff = forward(z_t, t, cond) - z0_tilde
            sq_err = ad.sum_rows(ad.square(diff))
            weighted = sq_err * w
            captured["sq_err"] = sq_err
            captured["weighted"] = weighted
            return ad.sum_all(weighted) / config.batch_size

        loss, grads = loss_and_gradients(student, loss_fn)
        if not np.isfinite(loss):
            weighted = captured["weighted"].value
            bad = int(np.argmax(~np.isfinite(weighted)))
            raise DistillationDivergedError(t=float(t[bad]), weight=float(w[bad]), loss=loss)
        student.params, state = adam_step(student.params, grads, state)
        losses.append(loss)

        if sample_log is not None:
            sample_log.append({
                "t": t,
                "snr": snr,
                "weight": w,
                "sq_err": captured["sq_err"].value,
                "weighted": captured["weighted"].value,
                "z_t": z_t,
                "target": z0_tilde,
                "cond": cond,
                "loss": loss,
            })

        if (update + 1) % config.plateau_window == 0:
            window = float(np.mean(losses[-config.plateau_window:]))
            if prev_window is not None:
                improvement = (prev_window - window) / max(abs(prev_window), 1e-30)
                if improvement < config.plateau_rel_tol:
                    break
            prev_window = window

    return RoundResult(
        student=student,
        final_loss=losses[-1] if losses else float("nan"),
        updates_run=len(losses),
        losses=np.asarray(losses),
        sample_log=sample_log,
    )


def progressive_distill(teacher, config: DistillConfig, dataset: ToyDataset,
                        schedule: CosineSchedule, checkpoint_dir: str | Path | None = None,
                        seed: int | None = None) -> tuple[DenoiserModel, DistillTrace]:
    """Run K halving rounds: round k trains a student at n_start / 2^k steps.

    The teacher's effective grid in round k is n_start / 2^(k-1): its two
    half-steps have spacing 1/(that grid). After each round the student is
    promoted to teacher. When `checkpoint_dir` is given, each round's
    student is saved as round_<k>.ckpt and referenced in the trace.
    """
    from .checkpoint import checkpoint_from_model, save_checkpoint

    root_seed = config.seed if seed is None else seed
    trace = DistillTrace()
    current = teacher
    for k in range(1, config.iterations + 1):
        teacher_steps = config.n_start >> (k - 1)
        student_steps = config.n_start >> k
        started = time.perf_counter()
        result = distill_round(
            current, config, student_steps, dataset, schedule,
            seed=int(child_rng(root_seed, "round", k).integers(0, 2**31 - 1)),
        )
        seconds = time.perf_counter() - started
        ckpt_path = None
        if checkpoint_dir is not None:
            path = Path(checkpoint_dir) / f"round_{k}.ckpt"
            save_checkpoint(path, checkpoint_from_model(
                result.student, schedule,
                provenance={
                    "round": k,
                    "steps": student_steps,
                    "strategy": config.strategy.kind.value,
                    "seed": root_seed,
                },
            ))
            ckpt_path = str(path)
        trace.rounds.append(RoundRecord(
            round_index=k,
            teacher_steps=teacher_steps,
            student_steps=student_steps,
            final_loss=result.final_loss,
            updates_run=result.updates_run,
            seconds=seconds,
            checkpoint=ckpt_path,
        ))
        current = result.student
    return current, trace
