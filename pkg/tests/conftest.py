import numpy as np
import pytest

from sonnet import autodiff as ad
from sonnet.autodiff import Tensor, backward


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def finite_difference_check(params, loss_fn, h=1e-5, rel_tol=1e-4, abs_floor=1e-6):
    """Compare reverse-mode gradients of ``loss_fn()`` (a fresh forward pass
    over ``params``) against central finite differences.

    params: dict name -> Tensor with requires_grad=True. Returns the worst
    relative error seen.
    """
    tape = ad.Tape()
    with ad.use_tape(tape):
        loss = loss_fn()
        for p in params.values():
            p.zero_grad()
        backward(loss, tape)

    def value():
        with ad.no_grad():
            return float(loss_fn().data)

    worst = 0.0
    for name, p in params.items():
        assert p.grad is not None, f"no gradient reached {name}"
        flat = p.data.reshape(-1)
        g = p.grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = value()
            flat[i] = orig - h
            fm = value()
            flat[i] = orig
            num = (fp - fm) / (2 * h)
            rel = abs(num - g[i]) / max(abs_floor, abs(num) + abs(g[i]))
            if rel > worst:
                worst = rel
            assert rel < rel_tol, f"{name}[{i}]: analytic {g[i]}, numeric {num}"
    return worst
