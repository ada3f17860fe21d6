"""Finite-difference verification of every autodiff operation.

Each check builds a scalar loss through the op under test, computes the
backward gradients, and compares against central finite differences at
eps = 1e-5.  The composite check differentiates the full four-term
training loss of a small model with respect to every parameter entry.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .graph import knn_graph
from .model import ModelConfig, build_loss_graph, init_encoder_decoder, wrap_params
from .rng import substream

OP_TOLERANCE = 1e-6
COMPOSITE_TOLERANCE = 1e-4


@dataclass
class OpReport:
    name: str
    max_rel_err: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)
    return float(np.linalg.norm(a - b) / denom)


def finite_diff_grads(f, arrays: dict, eps: float = 1e-5) -> dict:
    """Central-difference gradient of scalar f(arrays) per array entry."""
    grads = {}
    for key, arr in arrays.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = f(arrays)
            flat[i] = orig - eps
            lo = f(arrays)
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * eps)
        grads[key] = g
    return grads


def _check(name, build, arrays, eps, tolerance) -> OpReport:
    """Compare tape gradients of build(tape, leaf vars) with central FD."""
    def f(arrs):
        tape = ad.Tape()
        leaves = {k: tape.var(v, requires_grad=True) for k, v in arrs.items()}
        return build(tape, leaves).item()

    tape = ad.Tape()
    leaves = {k: tape.var(v, requires_grad=True) for k, v in arrays.items()}
    tape.backward(build(tape, leaves))
    fd = finite_diff_grads(f, arrays, eps)
    err = max(relative_error(leaves[k].grad, fd[k]) for k in arrays)
    return OpReport(name, err, tolerance)


def _scalarize(tape, out, shift):
    # Project a matrix output to a scalar through an asymmetric constant so
    # transposition mistakes in backward rules cannot cancel.
    return ad.frob_sq(ad.add(out, tape.var(shift)))


def check_matmul(rng, eps=1e-5, corrupt=False):
    a = rng.normal(size=(3, 4))
    b = rng.normal(size=(4, 2))
    shift = rng.normal(size=(3, 2))

    if corrupt:
        # Deliberately mis-scaled rule, used to prove the harness reports
        # failures.
        def bad_matmul(x, y):
            out = x.value @ y.value
            return x.tape._record(
                out, ((x, lambda g: 1.01 * (g @ y.value.T)),
                      (y, lambda g: 0.99 * (x.value.T @ g))))

        build = lambda tape, lv: _scalarize(tape, bad_matmul(lv["a"], lv["b"]), shift)
    else:
        build = lambda tape, lv: _scalarize(tape, ad.matmul(lv["a"], lv["b"]), shift)
    return _check("matmul", build, {"a": a, "b": b}, eps, OP_TOLERANCE)


def check_affine(rng, eps=1e-5):
    arrays = {"w": rng.normal(size=(3, 4)), "x": rng.normal(size=(4, 5)),
              "b": rng.normal(size=(3, 1))}
    shift = rng.normal(size=(3, 5))
    build = lambda tape, lv: _scalarize(tape, ad.affine(lv["w"], lv["x"], lv["b"]), shift)
    return _check("affine", build, arrays, eps, OP_TOLERANCE)


def check_relu(rng, eps=1e-5):
    x = rng.normal(size=(3, 4))
    x[np.abs(x) < 0.05] += 0.1  # keep entries away from the kink
    shift = rng.normal(size=(3, 4))
    build = lambda tape, lv: _scalarize(tape, ad.relu(lv["x"]), shift)
    return _check("relu", build, {"x": x}, eps, OP_TOLERANCE)


def check_frob_sq(rng, eps=1e-5):
    x = rng.normal(size=(3, 4))
    build = lambda tape, lv: ad.frob_sq(lv["x"])
    return _check("frob_sq", build, {"x": x}, eps, OP_TOLERANCE)


def check_sup_norm_rows(rng, eps=1e-5):
    q = rng.normal(size=(4, 4))
    # Make every row's argmax unique by a margin so the point is smooth.
    for i in range(4):
        j = np.argmax(np.abs(q[i]))
        q[i, j] += np.sign(q[i, j]) * 0.5
    build = lambda tape, lv: ad.sup_norm_rows(lv["q"])
    return _check("sup_norm_rows", build, {"q": q}, eps, OP_TOLERANCE)


def check_add(rng, eps=1e-5):
    arrays = {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(3, 4))}
    shift = rng.normal(size=(3, 4))
    build = lambda tape, lv: _scalarize(tape, ad.add(lv["a"], lv["b"]), shift)
    return _check("add", build, arrays, eps, OP_TOLERANCE)


def check_sub(rng, eps=1e-5):
    arrays = {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(3, 4))}
    shift = rng.normal(size=(3, 4))
    build = lambda tape, lv: _scalarize(tape, ad.sub(lv["a"], lv["b"]), shift)
    return _check("sub", build, arrays, eps, OP_TOLERANCE)


def check_scale(rng, eps=1e-5):
    x = rng.normal(size=(3, 4))
    shift = rng.normal(size=(3, 4))
    build = lambda tape, lv: _scalarize(tape, ad.scale(lv["x"], -1.7), shift)
    return _check("scale", build, {"x": x}, eps, OP_TOLERANCE)


def composite_setup(n: int = 12, d: int = 8, latent: int = 4, seed: int = 0):
    """A small full model at a random smooth point (Q off zero)."""
    cfg = ModelConfig(encoder_dims=(d, 6, latent), n_adjacency=2, lam=0.5,
                      alpha=0.3, beta=0.7, knn_k=3, seed=seed)
    rng = substream(seed, "gradcheck_composite")
    x = rng.normal(size=(d, n))
    a0 = knn_graph(x, cfg.knn_k).adjacency
    params = init_encoder_decoder(cfg, rng=rng)
    params.adjacency = [a0 + 0.1 * rng.normal(size=(n, n)) for _ in range(2)]
    params.q = 0.1 * rng.normal(size=(n, n))
    return cfg, params, x, a0


def check_composite(eps=1e-5, seed: int = 0):
    cfg, params, x, a0 = composite_setup(seed=seed)
    arrays = params.to_dict()

    def total_of(arrs):
        tape = ad.Tape()
        pv = {k: tape.var(v, requires_grad=True) for k, v in arrs.items()}
        losses, _ = build_loss_graph(tape, pv, tape.var(x), tape.var(a0), cfg)
        return losses["total"]

    tape = ad.Tape()
    pv = wrap_params(tape, params, cfg, trainable=True)
    losses, _ = build_loss_graph(tape, pv, tape.var(x), tape.var(a0), cfg)
    tape.backward(losses["total"])
    fd = finite_diff_grads(lambda arrs: total_of(arrs).item(), arrays, eps)
    err = max(relative_error(pv[k].grad, fd[k]) for k in arrays)
    return OpReport("composite_total_loss", err, COMPOSITE_TOLERANCE)


def run_all(eps: float = 1e-5, seed: int = 7, corrupt_matmul: bool = False) -> list:
    """Every op check plus the composite loss check, in a fixed order."""
    rng = substream(seed, "gradcheck")
    return [
        check_matmul(rng, eps, corrupt=corrupt_matmul),
        check_affine(rng, eps),
        check_relu(rng, eps),
        check_frob_sq(rng, eps),
        check_sup_norm_rows(rng, eps),
        check_add(rng, eps),
        check_sub(rng, eps),
        check_scale(rng, eps),
        check_composite(eps, seed=seed),
    ]
