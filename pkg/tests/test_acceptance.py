"""Acceptance gate: every criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS line
per criterion.  The full-pipeline criteria train at paper scale and take
tens of minutes each; the suite is ordered cheap-first.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from crackrnn import autodiff as ad
from crackrnn.cell import DamageCell, LearnedStressModel, ParisParams, PhysicsStressModel
from crackrnn.cli import main as cli_main
from crackrnn.evaluation import ratio_band, sweep_distribution, sweep_train_size
from crackrnn.fleet import FleetDataset
from crackrnn.mlp import Normalizer, build_stress_mlp
from crackrnn.training import TrainingConfig, predict_fleet, train_on_subset

pytestmark = pytest.mark.acceptance

SEED = 1729
PARIS = ParisParams(c=1.5e-11, m=3.8, f=1.0)
A0 = 0.005

# Budgets for the full-scale trainings (quasi-Newton iterations).
HEADLINE_EPOCHS = 800
SWEEP_EPOCHS = 300


def _report(criterion: str, detail: str) -> None:
    print(f"\n[PASS] {criterion}: {detail}")


@pytest.fixture(scope="module")
def dataset() -> FleetDataset:
    return FleetDataset.generate(seed=SEED)


@pytest.fixture(scope="module")
def headline(dataset):
    cfg = TrainingConfig(epochs=HEADLINE_EPOCHS, optimizer="lbfgs", seed=0,
                         early_stop_min_improvement=1e-18, log_every=100)
    cell, report = train_on_subset(dataset, dataset.inspection_ids, cfg)
    cycle = dataset.inspection_cycle
    traj = predict_fleet(cell, dataset.histories[:, :cycle], A0)
    return cell, report, traj


def test_criterion_1_parameter_counts():
    norm = Normalizer(mean=(108.0, 0.0275), std=(14.0, 0.013))
    net = build_stress_mlp(norm, seed=0, dk_ref=20.0)
    assert net.parameter_counts() == (1218, 1212)
    cell = DamageCell(LearnedStressModel(net), PARIS)
    assert cell.parameter_counts() == (1220, 1212)
    _report("criterion 1 (parameter counts)",
            "network 1218/1212, cell 1220/1212")


def _numpy_forward_terminal(layers, alpha, a0, hist, paris):
    """Independently coded plain-numpy hybrid forward for the FD oracle."""
    n, t_total = hist.shape
    a = np.full(n, a0)
    for t in range(t_total):
        x = np.stack([hist[:, t], a], axis=1)
        for w, b, act in layers:
            x = x @ w.T + b
            if act:
                x = 0.5 * (np.tanh(0.5 * x) + 1.0)
        k = x[:, 0]
        k = np.where(k < 0.0, alpha * k, k)
        k = np.maximum(k, 0.0)
        a = a + paris.c * k**paris.m
    return a


def test_criterion_2_gradient_correctness():
    started = time.perf_counter()
    rng = np.random.default_rng(20260809)
    norm = Normalizer(mean=(110.0, 0.0275), std=(16.0, 0.013))
    checked = 0
    worst = 0.0
    for trial in range(20):
        n_planes = int(rng.integers(1, 5))
        n_cycles = int(rng.integers(5, 51))
        net = build_stress_mlp(norm, seed=trial, dk_ref=24.0)
        cell = DamageCell(LearnedStressModel(net), PARIS)
        hist = rng.choice([92.5, 100.0, 110.0, 130.0], size=(n_planes, n_cycles))
        # observations near the untrained predictions keep the
        # finite-difference oracle inside its float64-accurate regime
        base = cell.unroll(A0, hist)[:, -1]
        obs = base * (1.0 + rng.uniform(-0.02, 0.02, size=n_planes))

        params = net.trainable_parameters()
        net.zero_grad()
        with ad.Tape() as tape:
            state = ad.constant(np.full((n_planes, 1), A0))
            for t in range(n_cycles):
                state = cell.step(state, ad.constant(hist[:, t:t + 1]))
            loss_t = ad.mean_all(ad.square(ad.sub(state, ad.constant(obs.reshape(-1, 1)))))
            grads = tape.backward(loss_t, wrt=params)
        g_bp = np.concatenate([grads[p.name].ravel() for p in params])

        layer_specs = [(l.w.value, l.b.value, l.activation == "sigmoid")
                       for l in net.layers]
        alpha = float(net.prelu_alpha.value[0])
        term = _numpy_forward_terminal(layer_specs, alpha, A0, hist, PARIS)
        np.testing.assert_array_equal(term, cell.unroll(A0, hist)[:, -1])

        theta0 = net.get_flat_trainable()

        def f(theta):
            offset = 0
            specs = []
            for l in net.layers:
                w, b = l.w.value, l.b.value
                if l.trainable:
                    w = theta[offset:offset + w.size].reshape(w.shape)
                    offset += w.size
                    b = theta[offset:offset + b.size]
                    offset += b.size
                specs.append((w, b, l.activation == "sigmoid"))
            a_val = theta[offset]
            final = _numpy_forward_terminal(specs, a_val, A0, hist, PARIS)
            return float(np.mean((final - obs) ** 2))

        g_fd = ad.finite_difference_gradient(f, theta0, h=1e-6)
        mask = (np.abs(g_fd) > 1e-10) | (np.abs(g_bp) > 1e-10)
        if mask.any():
            rel = np.abs(g_bp[mask] - g_fd[mask]) / np.abs(g_fd[mask])
            worst = max(worst, float(rel.max()))
            checked += int(mask.sum())
            assert rel.max() < 1e-5, f"trial {trial}: rel err {rel.max():.2e}"
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0, f"gradient check took {elapsed:.0f}s (budget 60s)"
    _report("criterion 2 (gradient correctness)",
            f"20 instances, {checked} coordinates, worst rel err {worst:.2e}, "
            f"{elapsed:.0f}s")


class _ExactStressEvaluator:
    """Closed-form stress-intensity evaluation through the hybrid path."""

    clamp_output = True

    def __init__(self, f):
        self.f = f

    def estimate(self, delta_s, a_prev):
        s = ad.sqrt(ad.scale(a_prev, math.pi))
        return ad.scale(ad.mul(delta_s, s), self.f)

    def trainable_parameters(self):
        return []


def test_criterion_3_physics_oracle_equivalence(dataset):
    rng = np.random.default_rng(3)
    picks = rng.choice(300, size=10, replace=False)
    hist = dataset.histories[picks]
    physics = DamageCell(PhysicsStressModel(PARIS.f), PARIS).unroll(A0, hist)
    hybrid = DamageCell(_ExactStressEvaluator(PARIS.f), PARIS).unroll(A0, hist)
    rel = np.abs(hybrid - physics) / physics
    assert hist.shape[1] == 7300
    assert rel.max() <= 1e-12
    _report("criterion 3 (physics-oracle equivalence)",
            f"10 planes x 7300 steps, max rel dev {rel.max():.2e}")


def test_criterion_4_discrete_oracle_and_closed_form():
    hist = np.full((1, 7300), 130.0)
    traj = DamageCell(PhysicsStressModel(PARIS.f), PARIS).unroll(A0, hist)[0]
    # independently coded scalar loop, bit-for-bit
    a = A0
    for t in range(7300):
        a = a + PARIS.c * (PARIS.f * (130.0 * math.sqrt(math.pi * a))) ** PARIS.m
        assert traj[t] == a, f"cycle {t + 1}: {traj[t]!r} != {a!r}"
    # continuous-time closed form within 2%
    e = 1.0 - PARIS.m / 2.0
    closed = (A0**e + e * PARIS.c * (PARIS.f * math.sqrt(math.pi) * 130.0) ** PARIS.m
              * 7300) ** (1.0 / e)
    rel = abs(traj[-1] - closed) / closed
    assert rel < 0.02
    _report("criterion 4 (discrete oracle + closed form)",
            f"bit-exact over 7300 cycles; closed-form deviation {rel * 100:.2f}%")


def test_criterion_5_headline_reproduction(dataset, headline):
    cell, report, traj = headline
    cycle = dataset.inspection_cycle
    truth_y5 = dataset.true_crack[:, cycle - 1]
    ratio_y5 = traj[:, -1] / truth_y5
    share_y5 = float(np.mean((ratio_y5 >= 0.85) & (ratio_y5 <= 1.15)))

    full_ratio = traj / dataset.true_crack[:, :cycle]
    share_traj = float(np.mean((full_ratio >= 0.85) & (full_ratio <= 1.15)))

    assert share_y5 >= 0.95, f"year-5 in-band share {share_y5:.3f}"
    assert share_traj >= 0.95, f"trajectory in-band share {share_traj:.3f}"
    _report("criterion 5 (headline +/-15%)",
            f"year-5 band {share_y5 * 100:.1f}% of planes, trajectory band "
            f"{share_traj * 100:.1f}% of (plane, cycle) pairs, final train mse "
            f"{report.final_loss:.2e}, {report.epochs_run} iterations")


def test_criterion_6_size_sweep(dataset):
    cfg = TrainingConfig(epochs=SWEEP_EPOCHS, optimizer="lbfgs", seed=0,
                         early_stop_min_improvement=1e-18, log_every=100)
    results = sweep_train_size([5, 15, 30, 45, 60], dataset, cfg)
    mse = {size: m for size, m, _ in results}
    assert mse[5] > mse[30], f"mse(5)={mse[5]:.3e} not above mse(30)={mse[30]:.3e}"
    rel = abs(mse[30] - mse[60]) / mse[30]
    assert rel < 0.5, f"mse(30) vs mse(60) differ by {rel * 100:.0f}%"
    detail = ", ".join(f"n={s}: {m:.2e}" for s, m, _ in results)
    _report("criterion 6 (size sweep)", detail)


def test_criterion_7_distribution_sweep(dataset):
    cfg = TrainingConfig(epochs=SWEEP_EPOCHS, optimizer="lbfgs", seed=0,
                         early_stop_min_improvement=1e-18, log_every=100)
    results = sweep_distribution(15, dataset, cfg)
    mse = {case: s.mse for case, (s, _) in results.items()}
    for a in (1, 2, 3):
        for b in (1, 2, 3):
            assert mse[a] <= 3.0 * mse[b], \
                f"case {a} ({mse[a]:.3e}) vs case {b} ({mse[b]:.3e}) beyond 3x"
    assert mse[0] > mse[1], f"case 0 ({mse[0]:.3e}) not above case 1 ({mse[1]:.3e})"
    detail = ", ".join(f"#{c}: {mse[c]:.2e}" for c in sorted(mse))
    _report("criterion 7 (distribution sweep)", detail)


def test_criterion_8_determinism(tmp_path):
    config = {
        "seed": 424242,
        "years": 1,
        "inspection": {"n": 8, "strategy": "representative", "year": 1},
        "training": {"epochs": 5, "optimizer": "lbfgs", "seed": 0},
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config))

    outputs = {}
    for run in ("one", "two"):
        base = tmp_path / run
        data = base / "data"
        trained = base / "train"
        evald = base / "eval"
        assert cli_main(["generate", "--config", str(cfg_path), "--out", str(data)]) == 0
        assert cli_main(["train", "--config", str(cfg_path), "--data", str(data),
                         "--out", str(trained), "--no-figures"]) == 0
        assert cli_main(["evaluate", "--config", str(cfg_path),
                         "--checkpoint", str(trained / "checkpoint.json"),
                         "--data", str(data), "--figure", "scatter",
                         "--out", str(evald), "--no-figures"]) == 0
        assert cli_main(["evaluate", "--config", str(cfg_path),
                         "--checkpoint", str(trained / "checkpoint.json"),
                         "--data", str(data), "--figure", "ratio",
                         "--out", str(evald), "--no-figures"]) == 0
        assert cli_main(["evaluate", "--config", str(cfg_path),
                         "--data", str(data), "--figure", "unreliability",
                         "--out", str(evald), "--no-figures"]) == 0
        files = sorted(p for p in base.rglob("*")
                       if p.suffix in (".csv", ".json") and p.is_file())
        outputs[run] = {str(p.relative_to(base)): p.read_bytes() for p in files}

    assert outputs["one"].keys() == outputs["two"].keys()
    diffs = [name for name in outputs["one"]
             if outputs["one"][name] != outputs["two"][name]]
    assert not diffs, f"outputs differ: {diffs}"
    _report("criterion 8 (determinism)",
            f"{len(outputs['one'])} CSV/JSON files byte-identical across reruns")
