"""Shared fixtures and the finite-difference gradient-checking harness."""

from __future__ import annotations

import numpy as np
import pytest

from xpatch.autograd import Tensor, backward


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / denom)


def gradcheck(fn, inputs, h: float = 1e-5, tol: float = 1e-4, seed: int = 0):
    """Compare tape gradients of a random projection of fn's output
    against central finite differences, input by input.

    ``fn`` maps Tensor inputs to one Tensor output. Projecting onto a
    fixed random vector exercises the whole Jacobian instead of only its
    row sums.
    """
    rng = np.random.default_rng(seed)
    for inp in inputs:
        inp.zero_grad()
    out = fn(*inputs)
    proj = Tensor(rng.standard_normal(out.shape))

    def scalar(*tensors) -> float:
        return float(((fn(*tensors)) * proj).sum().data)

    loss = (out * proj).sum()
    backward(loss)

    worst = 0.0
    for idx, inp in enumerate(inputs):
        if not inp.requires_grad:
            continue
        analytic = inp.grad
        assert analytic is not None, f"input {idx} received no gradient"
        numeric = np.zeros_like(inp.data)
        flat = inp.data.reshape(-1)
        num_flat = numeric.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up = scalar(*inputs)
            flat[j] = orig - h
            down = scalar(*inputs)
            flat[j] = orig
            num_flat[j] = (up - down) / (2.0 * h)
        err = rel_error(analytic, numeric)
        worst = max(worst, err)
        assert err < tol, f"input {idx}: rel error {err:.3e} >= {tol}"
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_csv(tmp_path):
    """Factory writing a small headered CSV and returning its path."""

    def make(values: np.ndarray, columns=None, dates: bool = True, name="data.csv"):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        columns = columns or [f"c{i}" for i in range(values.shape[1])]
        path = tmp_path / name
        with path.open("w") as fh:
            header = (["date"] if dates else []) + list(columns)
            fh.write(",".join(header) + "\n")
            for i, row in enumerate(values):
                cells = ([f"2020-01-01 {i:02d}:00"] if dates else []) + [
                    repr(float(v)) for v in row
                ]
                fh.write(",".join(cells) + "\n")
        return path

    return make
