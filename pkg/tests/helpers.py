"""Shared test oracles: central finite differences against the tape."""

import numpy as np

from kgattn.autodiff import Tensor


def numeric_grad(func, tensors, eps=1e-5):
    """Central-difference gradients of a scalar-valued ``func``.

    ``func`` maps the tensors to a scalar Tensor; returns one float64 array
    per input tensor.
    """
    grads = []
    for t in tensors:
        g = np.zeros_like(t.data)
        flat = t.data.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = float(func().data)
            flat[i] = orig - eps
            lo = float(func().data)
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * eps)
        grads.append(g)
    return grads


def rel_err(a, b):
    denom = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), 1e-8)
    return np.abs(a - b).max(initial=0.0) / denom


def check_grads(build, params, tol=1e-4, eps=1e-5):
    """Assert analytic gradients of ``build()`` (a scalar graph) match finite
    differences for every tensor in ``params``."""
    loss = build()
    loss.backward()
    analytic = [p.grad.copy() for p in params]
    numeric = numeric_grad(build, params, eps=eps)
    for p, a, n in zip(params, analytic, numeric):
        err = rel_err(a, n)
        assert err < tol, f"gradient mismatch (rel err {err:.2e}) for {p.op} shape {p.shape}"


def rand_tensor(rng, *shape, lo=-1.0, hi=1.0):
    return Tensor(rng.uniform(lo, hi, size=shape))
