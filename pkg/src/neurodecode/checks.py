"""Gradient-check suites over ops and whole models.

Op-level checks difference every entry of small float64 tensors; the
model-level checks difference a seeded sample of entries per parameter
tensor, since full differencing of a million-parameter model would take
hours for no extra information.  Sampling is deterministic, so a
failure reproduces.

Models are checked in their gradient-checking mode: dropout disabled,
batch norm normalizing with batch statistics but not updating its
running buffers, and the graph Laplacian's spectral-radius estimate
pinned, which together make the loss a smooth deterministic function
of the parameters.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Parameter, constant, grad_check, ops
from .autodiff.gradcheck import GradCheckReport
from .models import ARCHITECTURES, SIZES, build_model

MODEL_CHECK_SAMPLE = 4
MODEL_CHECK_BATCH = 4


def _p(rng: np.random.Generator, *shape: int, away_from_zero: bool = False) -> Parameter:
    data = rng.standard_normal(shape)
    if away_from_zero:
        # keep |x| >= 0.2 so kinked activations (relu, elu) stay one-sided
        data = np.sign(data) * (np.abs(data) + 0.2)
    return Parameter(data)


def op_check_cases() -> list[tuple[str, object, list[tuple[str, Parameter]]]]:
    """(name, loss_fn, params) triples covering every differentiable op."""
    rng = np.random.default_rng(7)
    cases = []

    def case(name, params, fn):
        cases.append((name, fn, [(f"{name}.{i}", p) for i, p in enumerate(params)]))

    def weighted_sq(t, seed=101):
        # batch norm maps any input to zero mean and unit variance per
        # channel, so a loss built from per-channel statistics of the
        # output (a plain mean, a mean of squares) is *constant* in x
        # and its true gradient is exactly zero; fixed random weights
        # varying within each channel break that invariance
        w = np.random.default_rng(seed).uniform(0.5, 1.5, t.data.shape)
        sq = ops.mul(ops.mul(t, t), constant(w))
        return ops.mean_axis(ops.reshape(sq, (t.data.size,)), 0)

    a, b = _p(rng, 3, 4), _p(rng, 4)
    case(
        "add_broadcast",
        [a, b],
        lambda: ops.mean_axis(ops.reshape(ops.mul(ops.add(a, b), ops.add(a, b)), (12,)), 0),
    )

    c, d = _p(rng, 2, 5), _p(rng, 2, 5)
    case("sub_mul", [c, d], lambda: ops.mean_axis(ops.reshape(ops.mul(ops.sub(c, d), c), (10,)), 0))

    e = _p(rng, 3, 3)
    case("scale_pow", [e], lambda: ops.mean_axis(ops.reshape(ops.powc(ops.scale(ops.mul(e, e), 0.5), 1.5), (9,)), 0))

    f = _p(rng, 4, 6, away_from_zero=True)
    case("relu", [f], lambda: ops.mean_axis(ops.reshape(ops.relu(f), (24,)), 0))
    g = _p(rng, 4, 6, away_from_zero=True)
    case("elu", [g], lambda: ops.mean_axis(ops.reshape(ops.elu(g), (24,)), 0))
    h = _p(rng, 5, 3)
    case("sigmoid_tanh", [h], lambda: ops.mean_axis(ops.reshape(ops.mul(ops.sigmoid(h), ops.tanh(h)), (15,)), 0))

    i1 = _p(rng, 2, 3, 4)
    case(
        "shape_ops",
        [i1],
        lambda: ops.mean_axis(
            ops.reshape(ops.narrow(ops.transpose(i1, (1, 0, 2)), 2, 1, 2), (12,)), 0
        ),
    )

    j1, j2 = _p(rng, 3, 4), _p(rng, 3, 4)
    case(
        "stack",
        [j1, j2],
        lambda: ops.mean_axis(ops.reshape(ops.stack([j1, j2], axis=1), (24,)), 0),
    )

    k1, k2 = _p(rng, 2, 3, 4), _p(rng, 4, 5)
    case(
        "matmul_broadcast",
        [k1, k2],
        lambda: ops.mean_axis(ops.reshape(ops.matmul(k1, k2), (30,)), 0),
    )

    m1, m2, m3 = _p(rng, 3, 6), _p(rng, 6, 4), _p(rng, 4)
    case("dense", [m1, m2, m3], lambda: ops.mean_axis(ops.reshape(ops.dense(m1, m2, m3), (12,)), 0))

    n1 = _p(rng, 3, 5)
    y_sm = np.array([0, 3, 1])
    case("softmax_ce", [n1], lambda: ops.cross_entropy(ops.scale(ops.softmax(n1), 3.0), y_sm))

    o_x, o_w, o_b = _p(rng, 2, 3, 4, 7), _p(rng, 5, 3, 3), _p(rng, 5)
    case(
        "conv_temporal",
        [o_x, o_w, o_b],
        lambda: ops.mean_axis(ops.reshape(ops.conv_temporal(o_x, o_w, o_b), (2 * 5 * 4 * 7,)), 0),
    )

    p_x, p_w = _p(rng, 2, 3, 5, 6), _p(rng, 3, 2, 5)
    case(
        "conv_spatial_depthwise",
        [p_x, p_w],
        lambda: ops.mean_axis(
            ops.reshape(ops.conv_spatial_depthwise(p_x, p_w), (2 * 6 * 6,)), 0
        ),
    )

    q_x, q_wd, q_wp = _p(rng, 2, 4, 1, 6), _p(rng, 4, 3), _p(rng, 5, 4)
    case(
        "separable_conv",
        [q_x, q_wd, q_wp],
        lambda: ops.mean_axis(ops.reshape(ops.separable_conv(q_x, q_wd, q_wp), (2 * 5 * 6,)), 0),
    )

    r_x = _p(rng, 2, 3, 2, 7)
    case(
        "avg_pool_floor",
        [r_x],
        lambda: ops.mean_axis(ops.reshape(ops.avg_pool_time(r_x, 3), (2 * 3 * 2 * 2,)), 0),
    )

    s_x, s_g, s_b = _p(rng, 4, 3, 2, 5), Parameter(np.random.default_rng(8).uniform(0.5, 1.5, 3)), _p(rng, 3)
    s_rm, s_rv = np.zeros(3), np.ones(3)
    case(
        "batch_norm_train",
        [s_x, s_g, s_b],
        lambda: weighted_sq(
            ops.batch_norm(s_x, s_g, s_b, s_rm, s_rv, training=True, update_running=False)
        ),
    )
    t_x, t_g, t_b = _p(rng, 4, 3, 2, 5), _p(rng, 3), _p(rng, 3)
    t_rm = np.random.default_rng(9).standard_normal(3)
    t_rv = np.random.default_rng(10).uniform(0.5, 2.0, 3)
    case(
        "batch_norm_eval",
        [t_x, t_g, t_b],
        lambda: ops.mean_axis(
            ops.reshape(
                ops.batch_norm(t_x, t_g, t_b, t_rm, t_rv, training=False),
                (4 * 3 * 2 * 5,),
            ),
            0,
        ),
    )

    u_x, u_g, u_b = _p(rng, 3, 4, 6), _p(rng, 6), _p(rng, 6)
    case(
        "layer_norm",
        [u_x, u_g, u_b],
        lambda: ops.mean_axis(ops.reshape(ops.layer_norm(u_x, u_g, u_b), (3 * 4 * 6,)), 0),
    )

    v_x = _p(rng, 2, 4, 5)
    v_wih, v_whh, v_b = _p(rng, 5, 12), _p(rng, 3, 12), _p(rng, 12)
    case(
        "lstm_layer",
        [v_x, v_wih, v_whh, v_b],
        lambda: ops.mean_axis(ops.reshape(ops.lstm_layer(v_x, v_wih, v_whh, v_b), (2 * 4 * 3,)), 0),
    )

    w_x = _p(rng, 2, 5, 6)
    # moderate projections keep the softmax away from saturation, where
    # near-zero attention weights leave gradient entries below the
    # finite-difference noise floor
    w_mat = lambda: Parameter(rng.standard_normal((6, 6)) * 0.4)
    w_vec = lambda: _p(rng, 6)
    w_params = [w_mat(), w_vec(), w_mat(), w_mat(), w_vec(), w_mat(), w_vec()]
    case(
        "multi_head_attention",
        [w_x] + w_params,
        lambda: weighted_sq(ops.multi_head_attention(w_x, *w_params, n_heads=2)),
    )

    ch_rng = np.random.default_rng(11)
    ch_x = Parameter(ch_rng.standard_normal((2, 5, 4)))
    ch_adj = Parameter(ch_rng.uniform(0.01, 0.05, (5, 5)) * (1.0 - np.eye(5)))
    ch_t = [Parameter(ch_rng.standard_normal((4, 3))) for _ in range(3)]
    ch_b = Parameter(ch_rng.standard_normal(3))
    ch_lam = ops.laplacian_spectral_radius(ch_adj.data)
    case(
        "chebyshev_graph_conv",
        [ch_x, ch_adj, *ch_t, ch_b],
        lambda: ops.mean_axis(
            ops.reshape(
                ops.chebyshev_graph_conv(ch_x, ch_t, ch_adj, ch_b, lam_max=ch_lam),
                (2 * 5 * 3,),
            ),
            0,
        ),
    )

    z_l = _p(rng, 6, 3)
    y_ce = np.array([0, 2, 1, 1, 0, 2])
    case("cross_entropy", [z_l], lambda: ops.cross_entropy(z_l, y_ce))

    x_pe = _p(rng, 2, 7, 4)
    case(
        "positions_add",
        [x_pe],
        lambda: ops.mean_axis(
            ops.reshape(ops.add(x_pe, ops.sinusoidal_positions(7, 4, dtype=np.float64)), (56,)), 0
        ),
    )
    return cases


def check_op_gradients() -> list[tuple[str, GradCheckReport]]:
    """Full-entry gradient checks for every op case."""
    results = []
    for name, fn, params in op_check_cases():
        results.append((name, grad_check(fn, params)))
    return results


def check_model_gradients(
    arch: str,
    size: str,
    sample: int = MODEL_CHECK_SAMPLE,
    batch: int = MODEL_CHECK_BATCH,
    seed: int = 0,
) -> GradCheckReport:
    """Sampled gradient check of one architecture at one size."""
    model = build_model(arch, size, seed=seed)
    model.to_float64()
    rng = np.random.default_rng(seed + 17)
    x = rng.standard_normal((batch, model.n_channels, model.n_samples))
    y = rng.integers(0, model.n_classes, size=batch)

    def loss_fn():
        return model.loss(x, y, training=True, gradcheck=True)[0]

    return grad_check(loss_fn, model.named_params(), sample=sample, seed=seed)


def all_model_checks(
    sample: int = MODEL_CHECK_SAMPLE,
) -> list[tuple[str, str, GradCheckReport]]:
    out = []
    for arch in ARCHITECTURES:
        for size in SIZES:
            out.append((arch, size, check_model_gradients(arch, size, sample=sample)))
    return out
