"""Student-teacher compression of trained encoders.

A tiny conv student is fit by regression (MSE) on the teacher's normalized
pre-binarization outputs over random input blocks; the teacher stays frozen.
The default student pair stays within a 148-weight combined budget.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from .exit_analysis import _frozen_eval
from .networks import ConvEncoder, ConvStackConfig, build_encoder, parameter_count
from .signals import binarize, power_normalize
from .system import positional_flatten


@dataclass(frozen=True)
class StudentConfig:
    """Conv-stack student with a hard parameter budget."""

    stack: ConvStackConfig
    budget: int = 200

    def build(self) -> ConvEncoder:
        student = build_encoder(self.stack)
        count = parameter_count(student)
        if count > self.budget:
            raise ValueError(f"student has {count} weights, over the budget of {self.budget}")
        return student


def default_student_pair(budget_total: int = 148):
    """(outer, inner) student configs; 82 + 56 = 138 weights combined."""
    outer = StudentConfig(
        ConvStackConfig(layers=1, feature_maps=5, kernel=5, in_channels=1, out_channels=2),
        budget=budget_total,
    )
    inner = StudentConfig(
        ConvStackConfig(layers=1, feature_maps=5, kernel=5, in_channels=1, out_channels=1),
        budget=budget_total,
    )
    return outer, inner


@dataclass(frozen=True)
class DistillRecipe:
    steps: int = 3000
    batch_size: int = 256
    block_len: int = 64  # input positions per training block
    lr: float = 2e-3
    val_blocks: int = 2000
    val_every: int = 100
    seed: int = 0


def _normalized_output(encoder: ConvEncoder, x_pm: torch.Tensor) -> torch.Tensor:
    return power_normalize(positional_flatten(encoder(x_pm.unsqueeze(1))))


def distill_encoder(teacher: ConvEncoder, student_cfg: StudentConfig, recipe: DistillRecipe = DistillRecipe()):
    """Fit a budgeted student to a frozen teacher encoder by output MSE.

    Inputs are uniform random antipodal blocks (the encoder's operating
    distribution); targets are the teacher's power-normalized outputs. The
    best student by held-out MSE is returned together with that MSE.
    """
    if teacher.config.in_channels != student_cfg.stack.in_channels or (
        teacher.config.out_channels != student_cfg.stack.out_channels
    ):
        raise ValueError("student channel interface must match the teacher")
    torch.manual_seed(recipe.seed)
    rng = np.random.default_rng(recipe.seed)
    student = student_cfg.build()
    optimizer = torch.optim.Adam(student.parameters(), lr=recipe.lr)

    val_bits = rng.integers(0, 2, size=(recipe.val_blocks, recipe.block_len))
    val_x = torch.from_numpy(2.0 * val_bits - 1.0).to(torch.float32)
    with _frozen_eval([teacher]), torch.no_grad():
        val_target = _normalized_output(teacher, val_x)

    best_state, best_mse = None, math.inf
    with _frozen_eval([teacher]):
        for step in range(recipe.steps):
            bits = rng.integers(0, 2, size=(recipe.batch_size, recipe.block_len))
            x = torch.from_numpy(2.0 * bits - 1.0).to(torch.float32)
            with torch.no_grad():
                target = _normalized_output(teacher, x)
            out = positional_flatten(student(x.unsqueeze(1)))
            loss = torch.nn.functional.mse_loss(out, target)
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            if (step + 1) % recipe.val_every == 0 or step + 1 == recipe.steps:
                with torch.no_grad():
                    val_mse = torch.nn.functional.mse_loss(
                        positional_flatten(student(val_x.unsqueeze(1))), val_target
                    ).item()
                if val_mse < best_mse:
                    best_mse = val_mse
                    best_state = {k: v.clone() for k, v in student.state_dict().items()}

    student.load_state_dict(best_state)
    return student, best_mse


@dataclass
class AgreementReport:
    sign_agreement: float
    output_mse: float
    teacher_count: int
    student_count: int
    blocks: int

    @property
    def reduction_pct(self) -> float:
        return 100.0 * (1.0 - self.student_count / self.teacher_count)

    def to_text(self) -> str:
        return json.dumps(
            {
                "sign_agreement": self.sign_agreement,
                "output_mse": self.output_mse,
                "teacher_count": self.teacher_count,
                "student_count": self.student_count,
                "reduction_pct": self.reduction_pct,
                "blocks": self.blocks,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_text(cls, text: str) -> "AgreementReport":
        raw = json.loads(text)
        raw.pop("reduction_pct", None)
        return cls(**raw)


def verify_agreement(
    teacher: ConvEncoder,
    student: ConvEncoder,
    blocks: int = 10000,
    block_len: int = 64,
    rng=None,
    batch: int = 500,
) -> AgreementReport:
    """Post-binarization sign agreement and output MSE of student vs teacher."""
    if teacher.config.in_channels != student.config.in_channels or (
        teacher.config.out_channels != student.config.out_channels
    ):
        raise ValueError("student and teacher interfaces do not match")
    rng = np.random.default_rng(0) if rng is None else rng
    agree = total = 0
    mse_sum = 0.0
    with _frozen_eval([teacher, student]), torch.no_grad():
        done = 0
        while done < blocks:
            b = min(batch, blocks - done)
            bits = rng.integers(0, 2, size=(b, block_len))
            x = torch.from_numpy(2.0 * bits - 1.0).to(torch.float32)
            t_out = _normalized_output(teacher, x)
            s_out = _normalized_output(student, x)
            agree += int((binarize(t_out) == binarize(s_out)).sum())
            total += t_out.numel()
            mse_sum += torch.nn.functional.mse_loss(s_out, t_out, reduction="sum").item()
            done += b
    return AgreementReport(
        sign_agreement=agree / total,
        output_mse=mse_sum / total,
        teacher_count=parameter_count(teacher),
        student_count=parameter_count(student),
        blocks=blocks,
    )
