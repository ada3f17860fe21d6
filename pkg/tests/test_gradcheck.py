import allg.gradcheck as gc


def test_all_ops_pass_at_tolerance():
    reports = gc.run_all()
    names = [r.name for r in reports]
    assert names == ["matmul", "affine", "relu", "frob_sq", "sup_norm_rows",
                     "add", "sub", "scale", "composite_total_loss"]
    for r in reports:
        assert r.passed, f"{r.name}: {r.max_rel_err}"


def test_corrupted_matmul_backward_is_caught():
    # harness sanity: a deliberately mis-scaled backward rule must fail
    reports = gc.run_all(corrupt_matmul=True)
    by_name = {r.name: r for r in reports}
    assert not by_name["matmul"].passed
    assert by_name["affine"].passed  # only the corrupted op fails


def test_composite_uses_toy_dimensions():
    cfg, params, x, a0 = gc.composite_setup()
    assert x.shape == (8, 12)
    assert cfg.latent_dim == 4 and cfg.n_matrices == 2
    assert params.q.shape == (12, 12)
