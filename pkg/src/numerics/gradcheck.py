import math
from dataclasses import dataclass, field
from typing import Callable

import torch

from src.errors import NumericalAbortError
from src.numerics.optim import ParameterStore

FD_STEP = 1e-5
DENOMINATOR_FLOOR = 1e-8


@dataclass
class GradCheckReport:
    name: str
    passed: bool
    tol: float
    max_relative_error: float
    worst_parameter: str | None
    worst_index: int | None
    entries_checked: int
    per_parameter: dict[str, float] = field(default_factory=dict)

    def summary(self) -> str:
        status = 'PASS' if self.passed else 'FAIL'
        return (
            f'{status} {self.name}: max rel err {self.max_relative_error:.3e} '
            f'over {self.entries_checked} entries (tol {self.tol:g})'
        )


def _evaluate(forward: Callable[[], torch.Tensor]) -> float:
    value = float(forward())
    if not math.isfinite(value):
        raise NumericalAbortError(f'Gradient check closure returned a non-finite loss ({value})')
    return value


def grad_check(
        forward: Callable[[], torch.Tensor],
        store: ParameterStore,
        tol: float = 1e-4,
        name: str = 'closure',
        max_entries: int = 200,
        step: float = FD_STEP,
        generator: torch.Generator | None = None,
        corrupt: Callable[[dict[str, torch.Tensor]], None] | None = None,
) -> GradCheckReport:
    """
    Compares autograd gradients of `forward` with central finite differences.

    Matrices with more than `max_entries` entries are checked on a random
    sample of that many entries. The relative error of an entry is
    |a - n| / max(|a|, |n|, 1e-8). `corrupt` may edit the analytic gradients
    before comparison, which is how fault injection is exercised.
    """
    store.zero_grad()
    loss = forward()
    _evaluate(lambda: loss)
    loss.backward()
    analytic = {param_name: store.gradient(param_name).detach().clone() for param_name in store}
    store.zero_grad()
    if corrupt is not None:
        corrupt(analytic)

    max_error, worst_parameter, worst_index, checked = 0.0, None, None, 0
    per_parameter = {}
    with torch.no_grad():
        for param_name, param in store.items():
            flat = param.view(-1)
            if flat.numel() > max_entries:
                indices = torch.randperm(flat.numel(), generator=generator)[:max_entries].tolist()
            else:
                indices = range(flat.numel())

            parameter_error = 0.0
            for index in indices:
                original = flat[index].item()
                flat[index] = original + step
                loss_plus = _evaluate(forward)
                flat[index] = original - step
                loss_minus = _evaluate(forward)
                flat[index] = original

                numeric = (loss_plus - loss_minus) / (2 * step)
                exact = analytic[param_name].view(-1)[index].item()
                error = abs(exact - numeric) / max(abs(exact), abs(numeric), DENOMINATOR_FLOOR)
                parameter_error = max(parameter_error, error)
                if error > max_error or worst_parameter is None:
                    max_error, worst_parameter, worst_index = error, param_name, index
                checked += 1
            per_parameter[param_name] = parameter_error

    return GradCheckReport(
        name=name,
        passed=max_error <= tol,
        tol=tol,
        max_relative_error=max_error,
        worst_parameter=worst_parameter,
        worst_index=worst_index,
        entries_checked=checked,
        per_parameter=per_parameter,
    )
