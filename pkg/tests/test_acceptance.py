"""Acceptance gate: one test per numbered criterion, printed as a pass/fail
line each (run with ``pytest tests/test_acceptance.py -v -s`` to see them).

The criteria pin down: exactness of the matrix-form transforms (1), gradient
correctness of the inverse-transform layer and the residual network (2, 3),
the constrained mask synthesis guarantees (4), the density/spacing polynomial
(5), Bernoulli sampling statistics (6), rate/PSNR monotonicity across mask
families (7), joint-training behaviour at the reference recipe (8),
directional quality of the trained mask against classical baselines (9), the
expected cross-family ordering (10), and bit-exact determinism of the
stochastic pipelines (11).

Stochastic families are compared by their 5-seed ensemble mean PSNR: a single
draw of a random mask has multi-dB spread on a 64x64 grid, so family-level
claims are made about the family average, which is still fully deterministic
(fixed seed list).  Training-based criteria share one 32-phantom 64x64 set
and one recipe: depth 5, 50 epochs, batch 8 (the documented desk-scale
default), seed 0.
"""

import dataclasses
import math
import time

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from maskopt.baselines import BaselineSpec, baseline_mask
from maskopt.core import ComplexGrid, ProbabilityMatrix
from maskopt.data import make_phantom_set
from maskopt.fourier import forward_2d, ift_backward, inverse_2d
from maskopt.pipeline import (TrainConfig, compare_methods, default_probability,
                              evaluate, train)
from maskopt.recon import ReconNet, euclidean_loss
from maskopt.sampling import (ConstraintConfig, density_from_spacing,
                              generate_constrained_mask, sample_bernoulli,
                              spacing_from_density)
from oracles import dft2_bruteforce, fd_gradient, max_nn_dist, min_pairwise_dist

BASELINES = ("line1d", "center_block", "uniform_grid", "gaussian", "poisson")
ENSEMBLE_SEEDS = range(5)


def _report(num, ok, detail):
    line = f"[criterion {num:02d}] {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def eval_set():
    return make_phantom_set(32, 64, seed=11)


def _recipe(rate):
    return TrainConfig(target_rate=rate, recnet_depth=5, batch_size=8,
                       max_epochs=50, seed=0)


@pytest.fixture(scope="module")
def trained_30(eval_set):
    t0 = time.perf_counter()
    res = train(eval_set, _recipe(0.3))
    return res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def trained_20(eval_set):
    return train(eval_set, _recipe(0.2))


def _family_mask(family, rate, seed, size=64):
    if family == "probabilistic":
        cfg = ConstraintConfig(target_rate=rate, seed=seed)
        mask, _ = generate_constrained_mask(
            default_probability(size, size, cfg), cfg)
        return mask
    return baseline_mask(BaselineSpec(family=family, m=size, n=size,
                                      target_rate=rate, seed=seed))


def _ensemble_psnr_u(ds, family, rate):
    vals = [evaluate(ds, _family_mask(family, rate, seed)).mean_psnr_u
            for seed in ENSEMBLE_SEEDS]
    return float(np.mean(vals))


def test_criterion_01_transform_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    x8 = ComplexGrid(rng.standard_normal((8, 8)), rng.standard_normal((8, 8)))
    k8 = forward_2d(x8)
    brute = dft2_bruteforce(x8.real + 1j * x8.imag)
    scale = np.abs(brute).max()
    rel = max(np.abs(k8.real - brute.real).max(),
              np.abs(k8.imag - brute.imag).max()) / scale
    x32 = ComplexGrid(rng.standard_normal((32, 32)),
                      rng.standard_normal((32, 32)))
    back = inverse_2d(forward_2d(x32))
    rt = max(np.abs(back.real - x32.real).max(),
             np.abs(back.imag - x32.imag).max())
    k32 = forward_2d(x32)
    e_img = float(np.sum(x32.real ** 2 + x32.imag ** 2))
    e_k = float(np.sum(k32.real ** 2 + k32.imag ** 2)) / (32 * 32)
    parseval = abs(e_k - e_img) / e_img
    dt = time.perf_counter() - t0
    _report(1, rel < 1e-12 and rt < 1e-10 and parseval < 1e-9 and dt < 1.0,
            f"brute-force rel {rel:.2e}, round-trip {rt:.2e}, "
            f"Parseval {parseval:.2e}, {dt:.2f}s")


def test_criterion_02_ift_gradient():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    kr = rng.standard_normal((8, 8))
    ki = rng.standard_normal((8, 8))
    tr = rng.standard_normal((8, 8))
    ti = rng.standard_normal((8, 8))

    def loss(ar, ai):
        out = inverse_2d(ComplexGrid(ar, ai))
        return 0.5 * float(np.sum((out.real - tr) ** 2)
                           + np.sum((out.imag - ti) ** 2))

    out = inverse_2d(ComplexGrid(kr, ki))
    g = ift_backward(ComplexGrid(out.real - tr, out.imag - ti))
    fd_r = fd_gradient(lambda a: loss(a, ki), kr, h=1e-6)
    fd_i = fd_gradient(lambda a: loss(kr, a), ki, h=1e-6)
    denom = max(np.abs(fd_r).max(), np.abs(fd_i).max())
    rel = max(np.abs(g.real - fd_r).max(), np.abs(g.imag - fd_i).max()) / denom
    dt = time.perf_counter() - t0
    _report(2, rel < 1e-5 and dt < 10.0,
            f"max relative error {rel:.2e} vs central differences, {dt:.2f}s")


def test_criterion_03_recnet_gradient():
    t0 = time.perf_counter()
    net = ReconNet(depth=3, channels=16, seed=3)
    # a fresh net's fusion layer is zero (identity start); perturb it so the
    # finite-difference check exercises the hidden layers too
    rng = np.random.default_rng(33)
    w, b = net.layers[-1]
    w[...] = rng.uniform(-0.5, 0.5, size=w.shape)
    b[...] = rng.uniform(-0.1, 0.1, size=b.shape)
    net.mark_updated()
    x = rng.standard_normal((16, 16))
    target = rng.standard_normal((16, 16))

    def loss_value():
        residual, _ = net.forward(x)
        return euclidean_loss(x + residual, target)[0]

    residual, tape = net.forward(x)
    _, diff = euclidean_loss(x + residual, target)
    grads, _ = net.backward(tape, diff)
    worst = 0.0
    for p, g in zip(net.parameters(), grads):
        def f(v, p=p):
            saved = p.copy()
            p[...] = v
            net.mark_updated()
            out = loss_value()
            p[...] = saved
            net.mark_updated()
            return out

        num = fd_gradient(f, p, h=1e-6)
        worst = max(worst, np.abs(g - num).max() / max(np.abs(num).max(), 1e-12))

    zero_net = ReconNet(depth=3, channels=16, seed=None)
    xz = np.random.default_rng(4).standard_normal((16, 16))
    rz, _ = zero_net.forward(xz)
    bitwise = (xz + rz).tobytes() == xz.tobytes()
    dt = time.perf_counter() - t0
    _report(3, worst < 1e-4 and bitwise and dt < 60.0,
            f"worst parameter relative error {worst:.2e}, "
            f"zero-parameter identity bitwise={bitwise}, {dt:.1f}s")


def test_criterion_04_constrained_mask_suite():
    details = []
    ok = True
    for rate in (0.1, 0.2, 0.3, 0.4, 0.5):
        t0 = time.perf_counter()
        cfg = ConstraintConfig(target_rate=rate, seed=0)
        p = ProbabilityMatrix(np.full((256, 256), rate))
        mask, reports = generate_constrained_mask(p, cfg)
        mask2, _ = generate_constrained_mask(p, cfg)
        dt = time.perf_counter() - t0
        rate_dev = abs(mask.bits.mean() - rate)
        r0 = spacing_from_density(rate)
        worst_min = math.inf
        worst_nn = 0.0
        size = cfg.region_size
        for r0_row in range(0, 256, size):
            for c0 in range(0, 256, size):
                block = mask.bits[r0_row:r0_row + size, c0:c0 + size]
                ys, xs = np.nonzero(block)
                if len(ys) >= 2:
                    worst_min = min(worst_min, min_pairwise_dist(ys, xs))
                    worst_nn = max(worst_nn, max_nn_dist(ys, xs))
        this_ok = (rate_dev < 0.001 and worst_min >= r0 - 1.0
                   and worst_nn <= 2.0 * r0 + 1.0
                   and mask.bits.tobytes() == mask2.bits.tobytes()
                   and dt < 30.0)
        ok = ok and this_ok
        details.append(f"rate {rate:.1f}: dev {rate_dev:.1e}, "
                       f"min-dist {worst_min:.2f}>={r0 - 1.0:.2f}, "
                       f"max-NN {worst_nn:.2f}<={2 * r0 + 1.0:.2f}, {dt:.1f}s")
    _report(4, ok, "; ".join(details))


def test_criterion_05_density_polynomial():
    val = density_from_spacing(1.0)
    ok = abs(val - 0.434315) < 1e-4
    worst = 0.0
    for r0 in (1.0, 1.5, 2.0, 2.4):
        worst = max(worst, abs(spacing_from_density(density_from_spacing(r0)) - r0))
    _report(5, ok and worst < 1e-6,
            f"density(1.0)={val:.6f}, worst inversion error {worst:.1e}")


def test_criterion_06_bernoulli_statistics():
    p = ProbabilityMatrix(np.full((100, 100), 0.3))
    mask = sample_bernoulli(p, seed=0)
    dev = abs(mask.bits.mean() - 0.3)
    _report(6, dev <= 0.0137, f"|empirical - 0.3| = {dev:.4f} <= 0.0137")


def test_criterion_07_rate_psnr_monotonicity(eval_set):
    t0 = time.perf_counter()
    rates = (0.1, 0.2, 0.3, 0.4, 0.5)
    details = []
    ok = True
    for family in BASELINES + ("probabilistic",):
        means = [_ensemble_psnr_u(eval_set, family, rate) for rate in rates]
        mono = all(b > a for a, b in zip(means, means[1:]))
        ok = ok and mono
        details.append(f"{family} {'rising' if mono else 'NOT rising'} "
                       f"({', '.join(f'{v:.2f}' for v in means)})")
    dt = time.perf_counter() - t0
    ok = ok and dt < 300.0
    _report(7, ok, f"5-seed ensemble means over rates 10-50%: "
            f"{'; '.join(details)}; {dt:.0f}s")


def test_criterion_08_joint_training_curve(trained_30):
    res, dt = trained_30
    losses = [row["L_joint"] for row in res.log]
    ups = sum(1 for a, b in zip(losses, losses[1:]) if b > a)
    allowed = 0.05 * (len(losses) - 1)
    init_u = res.log[0]["val_psnr_u"]
    final_rec = res.log[-1]["val_psnr_rec"]
    ok = (ups <= allowed and final_rec > init_u + 1.0 and dt < 900.0)
    _report(8, ok, f"{ups}/{len(losses) - 1} non-monotone steps "
            f"(allowed {allowed:.1f}), final reconstruction "
            f"{final_rec:.2f} dB > initial undersampling {init_u:.2f} + 1 dB, "
            f"{dt:.0f}s")


def test_criterion_09_trained_vs_random_baselines(eval_set, trained_30,
                                                 trained_20):
    details = []
    ok = True
    for rate, res in ((0.2, trained_20), (0.3, trained_30[0])):
        rep = evaluate(eval_set, res.mask)
        ok = ok and abs(rep.realized_rate - rate) < 0.001
        for family in ("gaussian", "poisson"):
            base = _ensemble_psnr_u(eval_set, family, rate)
            this_ok = rep.mean_psnr_u >= base
            ok = ok and this_ok
            details.append(f"rate {rate:.1f}: trained {rep.mean_psnr_u:.2f} "
                           f"{'>=' if this_ok else '<'} {family} {base:.2f}")
    _report(9, ok, "; ".join(details))


def test_criterion_10_family_ordering(eval_set, trained_30, tmp_path):
    res, _ = trained_30
    rate = 0.3
    artifacts = {(fam, rate): (_family_mask(fam, rate, seed=0), None)
                 for fam in BASELINES}
    artifacts[("probabilistic", rate)] = (res.mask, res.net)
    families = BASELINES + ("probabilistic",)
    header, rows = compare_methods(eval_set, [rate], families, artifacts,
                                   out_path=tmp_path / "comparison.csv")
    u = {fam: rows[0][header.index(f"{fam}_psnr_u")] for fam in families}
    links = [
        ("line1d < center_block", u["line1d"] < u["center_block"]),
        ("center_block < uniform_grid", u["center_block"] < u["uniform_grid"]),
        ("uniform_grid <= gaussian (+0.3)",
         u["uniform_grid"] <= u["gaussian"] + 0.3),
        ("gaussian ~= poisson (+-0.3)",
         abs(u["gaussian"] - u["poisson"]) <= 0.3),
        ("poisson <= probabilistic (+0.3)",
         u["poisson"] <= u["probabilistic"] + 0.3),
    ]
    held = sum(1 for _, good in links if good)
    table = ", ".join(f"{fam}={u[fam]:.2f}" for fam in families)
    verdicts = "; ".join(f"{name}: {'holds' if good else 'VIOLATED'}"
                         for name, good in links)
    # The expected ordering comes from richly textured images at realistic
    # resolution.  A 64x64 piecewise-smooth phantom concentrates nearly all
    # spectral energy in low frequencies, so any mask that deterministically
    # covers the centre (center_block, poisson's fully-sampled core) beats
    # spread-out masks (uniform_grid, gaussian tails) by several dB, inverting
    # two links.  Training the reconstruction network per family does not
    # recover them either: uniform_grid's aliasing replicas lie ~35 px from
    # the source, far outside the depth-5 network's 9 px receptive field
    # (measured: center_block 26.01 dB vs uniform_grid 12.40 dB after
    # per-family training).  Reported as a genuine failure, not worked around.
    _report(10, held == len(links),
            f"zero-filled PSNR at rate 0.3: {table}; {verdicts} "
            f"({held}/{len(links)} orderings hold)")


def test_criterion_11_determinism(eval_set, trained_30):
    cfg = ConstraintConfig(target_rate=0.3, seed=0)
    p = ProbabilityMatrix(np.full((256, 256), 0.3))
    mask_a, _ = generate_constrained_mask(p, cfg)
    mask_b, _ = generate_constrained_mask(p, cfg)
    masks_ok = mask_a.bits.tobytes() == mask_b.bits.tobytes()

    fresh = make_phantom_set(32, 64, seed=11)
    evals_a = [evaluate(eval_set, _family_mask("poisson", 0.3, s)).mean_psnr_u
               for s in ENSEMBLE_SEEDS]
    evals_b = [evaluate(fresh, _family_mask("poisson", 0.3, s)).mean_psnr_u
               for s in ENSEMBLE_SEEDS]
    evals_ok = evals_a == evals_b

    res, _ = trained_30
    res2 = train(fresh, _recipe(0.3))
    train_ok = (res.p_u.probs.tobytes() == res2.p_u.probs.tobytes()
                and res.mask.bits.tobytes() == res2.mask.bits.tobytes()
                and all(a.tobytes() == b.tobytes() for a, b in
                        zip(res.net.parameters(), res2.net.parameters()))
                and res.log == res2.log)
    _report(11, masks_ok and evals_ok and train_ok,
            f"mask bytes identical={masks_ok}, evaluation reruns "
            f"identical={evals_ok}, training rerun identical={train_ok}")
