"""Independent brute-force oracles used to pin expected test values.

Everything here is written as plain loops (or a second, unrelated
algorithm) on purpose: these functions must not share code paths with the
package implementations they check.
"""

import numpy as np


def naive_matmul(a, b):
    p, q = a.shape
    q2, r = b.shape
    assert q == q2
    out = np.zeros((p, r))
    for i in range(p):
        for j in range(r):
            acc = 0.0
            for k in range(q):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


def naive_frob_sq(x):
    acc = 0.0
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            acc += x[i, j] * x[i, j]
    return acc


def naive_sup_norm_rows(q):
    acc = 0.0
    for i in range(q.shape[0]):
        best = 0.0
        for j in range(q.shape[1]):
            best = max(best, abs(q[i, j]))
        acc += best
    return acc


def naive_loss_adjacency(a1, a0, alpha, beta):
    return alpha * naive_frob_sq(a1) + beta * naive_frob_sq(a1 - a0)


def naive_loss_propagation(mats, alpha_p, beta_p):
    acc = 0.0
    for l in range(1, len(mats)):
        acc += alpha_p * naive_frob_sq(mats[l]) + beta_p * naive_frob_sq(mats[l] - mats[l - 1])
    return acc


def naive_loss_selection(s_out, q, lam):
    return naive_frob_sq(s_out - naive_matmul(s_out, q)) + lam * naive_sup_norm_rows(q)


def brute_force_knn_columns(x, k):
    """Neighbor list per column by exhaustive (distance, index) sorting."""
    d, n = x.shape
    neighbors = []
    for j in range(n):
        dists = []
        for i in range(n):
            if i == j:
                continue
            delta = x[:, i] - x[:, j]
            dists.append((float(delta @ delta), i))
        dists.sort()
        neighbors.append([i for _, i in dists[:k]])
    return neighbors


def brute_force_knn_adjacency(x, k, symmetrize=True):
    n = x.shape[1]
    a = np.zeros((n, n))
    for j, nbrs in enumerate(brute_force_knn_columns(x, k)):
        for i in nbrs:
            a[i, j] = 1.0
    if symmetrize:
        a = np.maximum(a, a.T)
    return a


def gram_leverage_scores(x, rank):
    """Top-rank leverage scores via the Gram-matrix eigendecomposition.

    Deliberately a different route (eigh of x^T x) from any SVD-based
    implementation.
    """
    g = x.T @ x
    g = 0.5 * (g + g.T)
    vals, vecs = np.linalg.eigh(g)
    order = np.argsort(vals)[::-1][:rank]
    top = vecs[:, order]
    return np.sum(top * top, axis=1)


def finite_diff(f, arrays, eps=1e-5):
    """Central-difference gradients of the scalar f(arrays) per entry."""
    grads = {}
    for key, arr in arrays.items():
        g = np.zeros_like(arr)
        flat, gflat = arr.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = f(arrays)
            flat[i] = orig - eps
            lo = f(arrays)
            flat[i] = orig
            gflat[i] = (hi - lo) / (2 * eps)
        grads[key] = g
    return grads


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)


def straight_line_forward(params, x, a0, cfg):
    """Non-autodiff reimplementation of the full forward pass.

    Mirrors the model contract step by step with explicit loops over
    layers, returning every intermediate plus the four loss terms.
    """
    relu = lambda m: np.maximum(m, 0.0)
    z = x
    n_layers = len(cfg.encoder_dims) - 1
    for l in range(n_layers):
        z = params.enc_weights[l] @ z + params.enc_biases[l]
        if l < n_layers - 1 or cfg.encoder_final_activation == "relu":
            z = relu(z)
    s_layers = []
    s = z
    for i in range(cfg.n_matrices):
        a = params.adjacency[0] if cfg.variant == "tied_two" else params.adjacency[i]
        s = relu(s @ a)
        s_layers.append(s)
    if not s_layers:
        s_out = z
    elif cfg.variant != "full":
        s_out = s_layers[-1]
    elif cfg.shortcut_weight == 1.0:
        s_out = s_layers[cfg.shortcut_layer - 1]
    elif cfg.shortcut_weight == 0.0 or cfg.shortcut_layer == len(s_layers):
        s_out = s_layers[-1]
    else:
        s_out = (cfg.shortcut_weight * s_layers[cfg.shortcut_layer - 1]
                 + (1.0 - cfg.shortcut_weight) * s_layers[-1])
    dec_in = s_out @ params.q
    y = dec_in
    for l in range(n_layers):
        y = params.dec_weights[l] @ y + params.dec_biases[l]
        if l < n_layers - 1 or cfg.decoder_final_activation == "relu":
            y = relu(y)
    l_r = naive_frob_sq(x - y)
    if s_layers:
        l_a = naive_loss_adjacency(params.adjacency[0], a0, cfg.alpha, cfg.beta)
    else:
        l_a = 0.0
    chain = [params.adjacency[0] if cfg.variant == "tied_two" else params.adjacency[i]
             for i in range(cfg.n_matrices)]
    l_p = naive_loss_propagation(chain, cfg.alpha_p, cfg.beta_p) if chain else 0.0
    l_s = naive_loss_selection(s_out, params.q, cfg.lam)
    return {
        "latent": z, "s_layers": s_layers, "s_out": s_out,
        "decoder_input": dec_in, "x_hat": y,
        "recon": l_r, "adjacency": l_a, "propagation": l_p, "selection": l_s,
        "total": l_r + l_a + l_p + l_s,
    }


def adam_reference(x0, grad_fn, lr, steps, beta1=0.9, beta2=0.999, eps=1e-8):
    """Scalar Adam recurrence written out by hand."""
    x, m, v = float(x0), 0.0, 0.0
    trace = [x]
    for t in range(1, steps + 1):
        g = grad_fn(x)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        x = x - lr * mhat / (vhat**0.5 + eps)
        trace.append(x)
    return trace
