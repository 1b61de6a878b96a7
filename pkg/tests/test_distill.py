import math

import numpy as np
import pytest

from snrdistill.data import ToyDataset
from snrdistill.distill import (
    DistillConfig,
    RoundResult,
    distill_round,
    progressive_distill,
    teacher_target,
)
from snrdistill.errors import DistillationDivergedError
from snrdistill.nnet import DenoiserModel, Parameterization
from snrdistill.sampler import ddim_step
from snrdistill.schedule import CosineSchedule
from snrdistill.util import child_rng
from snrdistill.weighting import WeightKind, WeightStrategy

SCHEDULE = CosineSchedule()


class AffineModel:
    """Scalar test family x_hat = a * z + b; same training surface as the MLP."""

    latent_dim = 1
    num_classes = 8

    def __init__(self, a, b, parameterization=Parameterization.X):
        self.params = {"a": np.array([float(a)]), "b": np.array([float(b)])}
        self.parameterization = parameterization

    def copy_with(self, parameterization=None):
        out = AffineModel(self.params["a"][0], self.params["b"][0],
                          parameterization or self.parameterization)
        return out

    def forward(self, z, t, cond):
        z = np.asarray(z, dtype=np.float64)
        return z * self.params["a"] + self.params["b"]

    def graph_forward(self, pvars, z, t, cond):
        return pvars["a"] * np.asarray(z, dtype=np.float64) + pvars["b"]


def random_teacher(seed=0):
    return DenoiserModel.init(
        latent_dim=2, num_classes=4, hidden=(8,), embed_dim=3,
        num_frequencies=2, parameterization=Parameterization.X, seed=seed,
    )


def small_dataset():
    return ToyDataset(num_classes=4, latent_dim=2, radius=1.5, stddev=0.2)


def test_constant_teacher_recovers_x_exactly():
    teacher = AffineModel(0.0, 0.8125)
    rng = np.random.default_rng(0)
    for n in (2, 4, 16, 64):
        i = rng.integers(1, n + 1, size=32)
        t = i / n
        z_t = rng.normal(size=(32, 1))
        z0_tilde, _ = teacher_target(teacher, z_t, t, n, np.zeros(32, dtype=np.int64), SCHEDULE)
        assert np.max(np.abs(z0_tilde - 0.8125)) < 1e-12


def test_target_inverts_one_ddim_step_for_random_teachers():
    rng = np.random.default_rng(1)
    dataset = small_dataset()
    for seed in range(4):
        teacher = random_teacher(seed)
        for n in (4, 8, 32):
            batch = 64
            i = rng.integers(1, n + 1, size=batch)
            t = i / n
            z_t = rng.normal(size=(batch, 2), scale=1.5)
            cond = rng.integers(0, dataset.num_classes, size=batch)
            z0_tilde, z_pp = teacher_target(teacher, z_t, t, n, cond, SCHEDULE)
            t_pp = np.clip(t - 1.0 / n, 0.0, 1.0)
            landed = ddim_step(z_t, z0_tilde, t, t_pp, SCHEDULE)
            assert np.max(np.abs(landed - z_pp)) < 1e-9


def test_scalar_target_matches_longhand_two_step_oracle():
    # N=4, t=1, z_t=1, noise-predicting teacher with eps_hat = 0; both
    # half-steps and the final quotient written out with math.* only.
    class ZeroEps:
        latent_dim = 1
        num_classes = 8
        parameterization = Parameterization.EPSILON

        def forward(self, z, t, cond):
            return np.zeros_like(np.asarray(z, dtype=np.float64))

    n = 4
    z_t = 1.0
    tq = 1.0 - 0.5 / n  # conversion clip for the noise->latent query at t=1

    def alpha(u):
        return math.cos(math.pi * u / 2)

    def sigma(u):
        return math.sin(math.pi * u / 2)

    # first half step: t=1 -> t'=0.875; alpha(1)=0, sigma(1)=1 exactly
    x1 = z_t / alpha(tq)
    z_p = alpha(0.875) * x1 + (sigma(0.875) / 1.0) * (z_t - 0.0 * x1)
    # second half step: t'=0.875 -> t''=0.75 (query time 0.875 needs no clip)
    x2 = z_p / alpha(0.875)
    z_pp = alpha(0.75) * x2 + (sigma(0.75) / sigma(0.875)) * (z_p - alpha(0.875) * x2)
    ratio = sigma(0.75) / 1.0
    expected = (z_pp - ratio * z_t) / (alpha(0.75) - ratio * 0.0)

    z0_tilde, z_pp_got = teacher_target(
        ZeroEps(), np.array([[z_t]]), 1.0, n, 0, SCHEDULE
    )
    assert z_pp_got[0, 0] == pytest.approx(z_pp, abs=1e-12)
    assert z0_tilde[0, 0] == pytest.approx(expected, abs=1e-12)


def test_teacher_target_rejects_off_grid_times():
    teacher = AffineModel(0.0, 1.0)
    with pytest.raises(ValueError):
        teacher_target(teacher, np.ones((1, 1)), 0.1, 4, 0, SCHEDULE)  # below 1/N


def test_zero_updates_student_is_bitwise_teacher_copy():
    teacher = random_teacher(3)
    config = DistillConfig(iterations=1, n_start=8, steps_per_round=0, batch_size=4)
    result = distill_round(teacher, config, 4, small_dataset(), SCHEDULE, seed=0)
    assert result.student.parameterization is Parameterization.X
    assert result.updates_run == 0
    for k in teacher.params:
        np.testing.assert_array_equal(result.student.params[k], teacher.params[k])
    # and the copy is independent storage
    result.student.params["b0"][0] += 1.0
    assert teacher.params["b0"][0] != result.student.params["b0"][0]


def test_reachable_target_drives_loss_to_zero():
    # constant teacher -> constant target; the affine family contains it
    teacher = AffineModel(0.0, 1.3)
    config = DistillConfig(
        iterations=1, n_start=8, steps_per_round=400, batch_size=64, lr=0.05,
        strategy=WeightStrategy(WeightKind.BALANCED_SNR_AWARE),
    )
    result = distill_round(teacher, config, 4, small_dataset(), SCHEDULE, seed=1)
    assert result.final_loss < 1e-10


def weighted_least_squares(z, target, w):
    """Brute-force 2x2 normal equations for target ~ a z + b with weights w."""
    sw = w.sum()
    swz = (w * z).sum()
    swzz = (w * z * z).sum()
    swt = (w * target).sum()
    swzt = (w * z * target).sum()
    mat = np.array([[swzz, swz], [swz, sw]])
    rhs = np.array([swzt, swt])
    return np.linalg.solve(mat, rhs)


class OffInitTeacher(AffineModel):
    """Constant predictor that hands the student a far-off initialization,
    so the round has genuine optimization work before it can match the
    normal equations."""

    def copy_with(self, parameterization=None):
        return AffineModel(0.6, -0.4, parameterization or self.parameterization)


def test_affine_round_matches_normal_equations():
    # one round over the affine family reduces to weighted least squares on
    # the sampled (z_t, target, weight) triples; the trained (a, b) must land
    # on the brute-force normal-equations solution
    teacher = OffInitTeacher(0.0, 1.3)
    config = DistillConfig(
        iterations=1, n_start=8, steps_per_round=2000, batch_size=512, lr=2e-2,
        strategy=WeightStrategy(WeightKind.BALANCED_SNR_AWARE),
        plateau_window=10**9,  # run the full budget
    )
    result = distill_round(teacher, config, 4, _OneDimDataset(), SCHEDULE,
                           seed=5, collect_log=True)

    z = np.concatenate([rec["z_t"][:, 0] for rec in result.sample_log])
    target = np.concatenate([rec["target"][:, 0] for rec in result.sample_log])
    w = np.concatenate([rec["weight"] for rec in result.sample_log])
    a_star, b_star = weighted_least_squares(z, target, w)

    a_hat = result.student.params["a"][0]
    b_hat = result.student.params["b"][0]
    assert abs(a_hat - a_star) < 1e-3
    assert abs(b_hat - b_star) < 1e-3
    # the constant target makes the optimum explicit as well
    assert abs(a_star) < 1e-9 and abs(b_star - 1.3) < 1e-9


class _OneDimDataset:
    """Minimal stand-in with latent_dim 1 for the affine-family tests."""

    num_classes = 2
    latent_dim = 1
    centers = np.array([[1.0], [-1.0]])
    stddev = 0.3
    seed = 0


def test_log_records_apply_weights_bit_for_bit():
    teacher = random_teacher(7)
    config = DistillConfig(iterations=1, n_start=8, steps_per_round=5, batch_size=16)
    result = distill_round(teacher, config, 4, small_dataset(), SCHEDULE,
                           seed=2, collect_log=True)
    assert len(result.sample_log) == 5
    for rec in result.sample_log:
        np.testing.assert_array_equal(rec["weighted"], rec["weight"] * rec["sq_err"])
        assert rec["loss"] == np.mean(rec["weighted"])


def test_round_losses_are_seed_deterministic():
    teacher = random_teacher(9)
    config = DistillConfig(iterations=1, n_start=8, steps_per_round=20, batch_size=16)
    a = distill_round(teacher, config, 4, small_dataset(), SCHEDULE, seed=11)
    b = distill_round(teacher, config, 4, small_dataset(), SCHEDULE, seed=11)
    np.testing.assert_array_equal(a.losses, b.losses)
    for k in a.student.params:
        np.testing.assert_array_equal(a.student.params[k], b.student.params[k])


def test_non_finite_loss_aborts_with_diagnostics():
    teacher = random_teacher(4)
    teacher.params["b1"][0] = np.nan
    config = DistillConfig(iterations=1, n_start=8, steps_per_round=3, batch_size=8)
    with pytest.raises(DistillationDivergedError) as err:
        distill_round(teacher, config, 4, small_dataset(), SCHEDULE, seed=3)
    assert 0.0 < err.value.t <= 1.0
    assert np.isnan(err.value.loss) or np.isinf(err.value.loss)


def test_round_step_count_validation():
    teacher = random_teacher(0)
    config = DistillConfig(iterations=1, n_start=8, steps_per_round=0)
    for bad in (1, 3, 0):
        with pytest.raises(ValueError):
            distill_round(teacher, config, bad, small_dataset(), SCHEDULE)


def test_config_requires_divisible_n_start():
    with pytest.raises(ValueError):
        DistillConfig(iterations=3, n_start=100)  # 100 % 8 != 0
    with pytest.raises(ValueError):
        DistillConfig(iterations=0)


def test_progressive_trace_halves_steps_exactly():
    teacher = random_teacher(5)
    config = DistillConfig(iterations=3, n_start=64, steps_per_round=2, batch_size=8)
    final, trace = progressive_distill(teacher, config, small_dataset(), SCHEDULE, seed=1)
    assert [r.teacher_steps for r in trace.rounds] == [64, 32, 16]
    assert [r.student_steps for r in trace.rounds] == [32, 16, 8]
    assert [r.round_index for r in trace.rounds] == [1, 2, 3]
    for r in trace.rounds:
        assert r.teacher_steps == config.n_start >> (r.round_index - 1)
        assert r.student_steps * 2 == r.teacher_steps
    assert final.parameterization is Parameterization.X


def test_progressive_single_iteration_equals_one_round():
    teacher = random_teacher(6)
    config = DistillConfig(iterations=1, n_start=16, steps_per_round=15, batch_size=8)
    final, trace = progressive_distill(teacher, config, small_dataset(), SCHEDULE, seed=21)
    round_seed = int(child_rng(21, "round", 1).integers(0, 2**31 - 1))
    manual = distill_round(teacher, config, 8, small_dataset(), SCHEDULE, seed=round_seed)
    for k in final.params:
        np.testing.assert_array_equal(final.params[k], manual.student.params[k])
    assert trace.rounds[0].final_loss == manual.final_loss


def test_progressive_writes_round_checkpoints(tmp_path):
    from snrdistill.checkpoint import load_checkpoint, model_from_checkpoint

    teacher = random_teacher(8)
    config = DistillConfig(iterations=2, n_start=16, steps_per_round=3, batch_size=8)
    final, trace = progressive_distill(teacher, config, small_dataset(), SCHEDULE,
                                       checkpoint_dir=tmp_path, seed=2)
    assert (tmp_path / "round_1.ckpt").exists()
    assert (tmp_path / "round_2.ckpt").exists()
    loaded, _ = model_from_checkpoint(load_checkpoint(trace.rounds[-1].checkpoint))
    for k in final.params:
        np.testing.assert_array_equal(loaded.params[k], final.params[k])
    ckpt = load_checkpoint(trace.rounds[0].checkpoint)
    assert ckpt.provenance["round"] == "1"
    assert ckpt.provenance["steps"] == "8"
