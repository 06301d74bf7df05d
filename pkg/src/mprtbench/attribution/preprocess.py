"""Attribution container, sign-handling policies and normalisation.

Some methods fix their own sign handling: pure-magnitude methods take
absolute values, activation-map methods clamp to the positive part. A policy
that contradicts the method's mandated rule is a hard error, not a silent
override. Second-moment normalisation rescales to unit mean-square, which
makes similarity comparisons scale-free without clamping the value range.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import AllZeroAttributionError, PolicyConflictError

MODE_NONE = "none"
MODE_ABS = "abs"
MODE_POSITIVE = "positive"

# Methods whose output sign carries no meaning (forced abs) or whose
# construction is positive-only (forced clamp).
MANDATED_MODE = {
    "Saliency": MODE_ABS,
    "SmoothGrad": MODE_ABS,
    "GradCAM": MODE_POSITIVE,
}


@dataclass
class Attribution:
    """Per-feature importance map tied to (input, model state, class)."""

    values: np.ndarray
    method: str
    class_index: int
    abs_applied: bool = False
    positive_only: bool = False
    normalised: bool = False


@dataclass
class PreprocessPolicy:
    """mode None means "whatever the method mandates, else keep the sign"."""

    mode: str | None = None
    normalise: bool = False


def resolve_mode(method: str, policy: PreprocessPolicy) -> str:
    mandated = MANDATED_MODE.get(method)
    if policy.mode is None:
        return mandated or MODE_NONE
    if policy.mode not in (MODE_NONE, MODE_ABS, MODE_POSITIVE):
        raise PolicyConflictError(f"unknown preprocess mode {policy.mode!r}")
    if mandated is not None and policy.mode != mandated:
        raise PolicyConflictError(
            f"{method} mandates {mandated!r} preprocessing; policy asked for {policy.mode!r}")
    return policy.mode


def normalise_array(values: np.ndarray) -> np.ndarray:
    """values / sqrt(mean(values²)); error on an all-zero map."""
    ms = float(np.mean(np.square(values, dtype=np.float64)))
    if ms == 0.0:
        raise AllZeroAttributionError("cannot normalise an all-zero attribution")
    return (values / np.sqrt(ms)).astype(values.dtype)


def normalise_second_moment(e: Attribution) -> Attribution:
    """Unit mean-square rescale; idempotent and invariant to positive scaling."""
    return replace(e, values=normalise_array(e.values), normalised=True)


def preprocess(e: Attribution, policy: PreprocessPolicy) -> Attribution:
    """Apply the resolved sign rule, then optional normalisation."""
    mode = resolve_mode(e.method, policy)
    values = e.values
    abs_applied = e.abs_applied
    positive_only = e.positive_only
    if mode == MODE_ABS:
        values = np.abs(values)
        abs_applied = True
    elif mode == MODE_POSITIVE:
        values = np.maximum(values, 0)
        positive_only = True
    out = replace(e, values=values, abs_applied=abs_applied, positive_only=positive_only)
    if policy.normalise:
        out = normalise_second_moment(out)
    return out
