"""White-box attacks on the spiking detector and the adversarial success rate."""

from dataclasses import dataclass

import numpy as np

from ._validation import check_int_range, check_nonnegative, check_positive
from .exceptions import CapabilityError, UndefinedStatisticError
from .snn import SpikeTrain

NOMINAL_CLASS = 0


@dataclass(frozen=True)
class PgdConfig:
    epsilon: float = 0.1
    alpha: float = 0.01
    iters: int = 10
    surrogate_width: float = 0.5
    # start from a uniform draw in the eps-ball instead of the clean input
    random_start: bool = False

    def __post_init__(self):
        check_nonnegative(self.epsilon, "epsilon")
        check_positive(self.alpha, "alpha")
        check_int_range(self.iters, "iters", 1, 10**6)
        check_positive(self.surrogate_width, "surrogate_width")


@dataclass(frozen=True)
class JitterConfig:
    J: float = 3.0
    seed: int = 0
    symmetric: bool = False
    trials: int = 1

    def __post_init__(self):
        check_nonnegative(self.J, "J")
        check_int_range(self.trials, "trials", 1, 10**6)


def surrogate_gradient(potential, threshold, width):
    """Rectangular pseudo-derivative of the spike step: a unit-area box of half-width ``width``."""
    check_positive(width, "width")
    inside = np.abs(np.asarray(potential, dtype=float) - threshold) < width
    out = np.where(inside, 0.5 / width, 0.0)
    return float(out) if out.ndim == 0 else out


def project_linf(x, x0, epsilon):
    """Project onto ``[x0 - eps, x0 + eps]`` intersected with ``[0, 1]``."""
    return np.clip(np.clip(x, x0 - epsilon, x0 + epsilon), 0.0, 1.0)


def pgd_attack(model, x0, true_label, cfg=PgdConfig(), seed=0, callback=None):
    """L-infinity PGD ascent on ``model.loss_gradient``.

    ``model`` must expose ``loss_gradient(x, label, seed) -> (loss, grad)``
    through a differentiable unrolled mode.  ``callback(i, x)`` is invoked after
    every projected step.  With ``cfg.random_start`` the ascent starts from
    ``x0 + eps * u``, ``u ~ Uniform[-1, 1]`` drawn from ``seed`` (projected), so
    attacks of different strength share the same direction of the start.
    """
    if not callable(getattr(model, "loss_gradient", None)):
        raise CapabilityError(f"{type(model).__name__} has no differentiable unrolled mode (loss_gradient)")
    x0 = np.asarray(x0, dtype=float)
    x = x0.copy()
    if cfg.epsilon == 0:
        return x
    if cfg.random_start:
        u = np.random.default_rng(seed).uniform(-1.0, 1.0, size=x0.shape)
        x = project_linf(x0 + cfg.epsilon * u, x0, cfg.epsilon)
        if callback is not None:
            callback(-1, x)
    for i in range(cfg.iters):
        _, grad = model.loss_gradient(x, true_label, seed)
        x = project_linf(x + cfg.alpha * np.sign(grad), x0, cfg.epsilon)
        if callback is not None:
            callback(i, x)
    return x


def temporal_jitter(train, cfg=JitterConfig(), seed=None):
    """Delay every spike by an independent ``Uniform[0, J]`` draw (``[-J, J]`` if symmetric).

    Spikes pushed past the window end are clipped to the last instant inside the
    window; spikes pulled before zero are clipped to zero.  The count is preserved.
    """
    check_nonnegative(cfg.J, "J")
    if cfg.J == 0 or len(train) == 0:
        return train
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    low = -cfg.J if cfg.symmetric else 0.0
    shifted = train.times + rng.uniform(low, cfg.J, size=len(train))
    last = np.nextafter(train.window, 0.0)
    return SpikeTrain(np.clip(shifted, 0.0, last), train.neurons, train.n_neurons, train.window)


def asr(outcomes):
    """Percentage of attacked anomaly windows predicted nominal.

    ``outcomes`` holds predicted classes, or ``(window, predicted_class)`` pairs.
    """
    preds = [o[1] if isinstance(o, tuple) else o for o in outcomes]
    if not preds:
        raise UndefinedStatisticError("ASR of an empty outcome list is undefined")
    return 100.0 * sum(int(p) == NOMINAL_CLASS for p in preds) / len(preds)
