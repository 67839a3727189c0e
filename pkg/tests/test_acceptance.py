"""Acceptance criteria, one test each.

Every test appends a PASS/FAIL line to ``RESULTS``; conftest prints them in
the terminal summary. The benchmark tests train real models and take several
minutes on one CPU, so they carry the ``slow`` marker.
"""
import time

import numpy as np
import pytest

from deformtime import numerics as nx
from deformtime.benchmarks import SEASONAL_MODEL, overfit_run, seasonal_benchmark
from deformtime.dataprep import DataError, TimeSeriesDataset, build_windows
from deformtime.evaluation import mae, pearson, smape
from deformtime.model import DeformTime, ModelConfig, init_params, measured_op_count, predicted_op_count
from deformtime.model.blocks import _strip, tdab_forward, vdab_forward
from deformtime.model.checkpoint import dumps, loads
from deformtime.pipeline import DataConfig, load_dataset, prepare
from deformtime.training import ABLATIONS, TrainConfig, train
from kernel_cases import ALL_KINDS, build_case
from oracles import (
    bilinear_ref,
    interleaved_mha_ref,
    mae_ref,
    pearson_ref,
    patched_attention_ref,
    smape_ref,
    windows_ref,
)

RESULTS: list[str] = []


def _record(name, ok, detail):
    RESULTS.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    assert ok, detail


# ----------------------------------------------------------------- gradient suite

def _random_model_configs(n=20, seed=2024):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        ell = int(rng.choice([4, 8]))
        out.append(ModelConfig(
            L=int(rng.choice([16, 32])), d=int(rng.choice([8, 16])), G=int(rng.choice([2, 4])),
            H=int(rng.integers(1, 8)), C=int(rng.integers(1, 7)), alpha=float(rng.choice([1.0, 2.0, 3.0])),
            ell=ell, stride=int(rng.choice([ell, ell // 2])),
            r_per_layer=[int(rng.choice([1, 2])), int(rng.choice([4, 8]))], delta=0))
    return out


def test_gradient_suite():
    t0 = time.process_time()
    kernel_worst = {}
    for kind in ALL_KINDS:
        f, inputs = build_case(kind, np.random.default_rng(99))
        kernel_worst[kind] = nx.grad_check(f, inputs, step=1e-5)
    model_worst, skipped, probed = 0.0, 0, 0
    for i, cfg in enumerate(_random_model_configs()):
        model = DeformTime(cfg, seed=i, zero_offset_heads=False)
        rng = np.random.default_rng(i)
        Z = rng.normal(size=(cfg.L, cfg.n_vars))
        y = rng.normal(size=cfg.H)
        stats = {}
        err = nx.grad_check(lambda _: nx.mean((model(Z) - y) ** 2), model.parameters(), step=1e-5,
                            max_coords=4, rng=np.random.default_rng(i), exclude_kinks=True, stats=stats)
        model_worst = max(model_worst, err)
        skipped += stats["skipped"]
        probed += stats["probed"]
    secs = time.process_time() - t0
    worst_kernel = max(kernel_worst, key=kernel_worst.get)
    ok = kernel_worst[worst_kernel] < 1e-5 and model_worst < 1e-3 and secs < 300
    _record("gradient suite", ok,
            f"worst kernel {worst_kernel}={kernel_worst[worst_kernel]:.1e} (<1e-5) over {len(kernel_worst)} kernels; "
            f"worst model {model_worst:.1e} (<1e-3) over 20 configs, {probed} probes, "
            f"{skipped} skipped at kinks; {secs:.0f}s CPU (<300)")


# ----------------------------------------------------------------- bilinear oracle

def test_bilinear_worked_example_and_brute_force():
    P = np.zeros((8, 16))
    P[4, 11], P[4, 12], P[5, 11], P[5, 12] = 1.0, 3.0, 5.0, 7.0
    worked = nx.bilinear_sample(nx.Tensor(P), nx.Tensor([4.9]), nx.Tensor([11.5])).data[0]
    # per corner: column pass gives 2 on row 4 and 6 on row 5, then 0.1*2 + 0.9*6 = 5.6;
    # 4.9 - 4 is not exactly 0.9 in binary, so "exact" means to the oracle tolerance
    worked_ok = abs(worked - 5.6) <= 1e-12

    rng = np.random.default_rng(5)
    worst, n_oob = 0.0, 0
    for _ in range(1000):
        h, w = rng.integers(1, 9, size=2)
        grid = rng.normal(size=(h, w))
        r = rng.uniform(-2.0, h + 1.0, size=6)
        c = rng.uniform(-2.0, w + 1.0, size=6)
        n_oob += int(np.sum((r < 0) | (r > h - 1) | (c < 0) | (c > w - 1)))
        got = nx.bilinear_sample(nx.Tensor(grid), nx.Tensor(r), nx.Tensor(c)).data
        want = np.array([bilinear_ref(grid, ri, ci) for ri, ci in zip(r, c)])
        worst = max(worst, float(np.abs(got - want).max()))
    _record("bilinear oracle", bool(worked_ok) and worst <= 1e-12 and n_oob > 0,
            f"worked example {float(worked)!r} (want 5.6); 1000 cases worst |diff| {worst:.1e} (<=1e-12), "
            f"{n_oob} out-of-bounds queries")


# ----------------------------------------------------------------- zero-offset equivalence

def test_zero_offset_equivalence():
    worst_v = worst_t = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        L = int(rng.integers(8, 25))
        ell = int(rng.choice([3, 4, 5]))
        cfg = ModelConfig(L=L, H=2, C=3, d=8, G=int(rng.choice([1, 2, 4])), alpha=2.0, ell=ell,
                          stride=int(rng.integers(max(1, ell - 2), ell + 1)),
                          r_per_layer=[1, int(rng.integers(1, 7))])
        params = init_params(cfg, rng)
        for name in ("enc0.vdab.P_v", "enc1.tdab.P_t"):
            params[name].data[:] = rng.normal(size=params[name].shape)
        Ze = rng.normal(size=(L, cfg.d))
        vp = _strip(params, "enc0.vdab.")
        got = vdab_forward(Ze[None], vp, cfg).data[0]
        want = patched_attention_ref(Ze, *(vp[k].data for k in ("W_Q", "W_K", "W_V", "P_v", "W_i", "W_v")),
                                     ell, cfg.stride)
        worst_v = max(worst_v, float(np.abs(got - want).max()))
        r = cfg.r_per_layer[1]
        tp = _strip(params, "enc1.tdab.")
        got = tdab_forward(Ze[None], tp, cfg, r).data[0]
        want = interleaved_mha_ref(Ze, *(tp[k].data for k in ("U_Q", "U_K", "U_V", "P_t", "W_i")), r, cfg.G)
        worst_t = max(worst_t, float(np.abs(got - want).max()))
    _record("zero-offset equivalence", worst_v <= 1e-10 and worst_t <= 1e-10,
            f"50 inputs; V-DAB worst {worst_v:.1e}, T-DAB worst {worst_t:.1e} (<=1e-10)")


# ----------------------------------------------------------------- deformation bound

def test_deformation_bound():
    dcfg = DataConfig(synthetic=dict(T=160, C=3, lags=[2, 3, 4], noise=0.05, seed=0))
    ds = load_dataset(dcfg)
    violations, n_offsets, peak = 0, 0, 0.0
    for i in range(100):
        rng = np.random.default_rng(1000 + i)
        cfg = ModelConfig(L=12, H=2, C=3, d=8, G=int(rng.choice([1, 2])), alpha=float(rng.uniform(0.2, 4.0)),
                          ell=4, stride=int(rng.choice([2, 4])), r_per_layer=[1, int(rng.choice([2, 3, 4]))])
        model = DeformTime(cfg, seed=i, zero_offset_heads=False)
        if i % 2:
            prep = prepare(ds, dcfg, cfg.L, cfg.H, cfg.delta)
            train(model, prep.arrays("train")[:2], prep.arrays("val")[:2],
                  TrainConfig(lr0=1e-2, max_epochs=2, batch_size=32, seed=i))
        trace = {}
        model(rng.normal(size=(4, cfg.L, cfg.n_vars)) * float(rng.choice([1.0, 10.0])), trace=trace)
        for key in ("vdab_offsets", "tdab_offsets"):
            for off in trace[key]:
                violations += int(np.sum(np.abs(off) > cfg.alpha))
                n_offsets += off.size
                peak = max(peak, float(np.abs(off).max() / cfg.alpha))
    _record("deformation bound", violations == 0,
            f"100 models (50 trained); {violations} violations in {n_offsets} offsets; "
            f"max |dp|/alpha {peak:.3f}")


# ----------------------------------------------------------------- windowing

def test_windowing_exhaustive():
    mismatches, checked, short = 0, 0, 0
    for T in range(1, 51):
        y = np.arange(T, dtype=float)
        ds = TimeSeriesDataset(np.arange(T), -y[:, None], y, ["x", "y"])
        for L in range(1, 11):
            for H in range(1, 6):
                for delta in (0, 1, 7, 14):
                    ref = windows_ref(T, L, H, delta)
                    expected = max(0, T - H - L - delta + 1)
                    try:
                        got = build_windows(ds, L, H, delta)
                    except DataError:
                        short += 1
                        mismatches += int(bool(ref) or expected != 0)
                        continue
                    checked += 1
                    ok = len(got) == len(ref) == expected
                    for w, (t, exo, endo, tgt) in zip(got, ref):
                        ok = ok and w.anchor_t == t and np.array_equal(w.Z[:, 0], -y[exo]) \
                            and np.array_equal(w.Z[:, -1], y[endo]) and np.array_equal(w.targets, y[tgt])
                    mismatches += int(not ok)
    _record("windowing oracle", mismatches == 0,
            f"{checked} (T,L,H,delta) combos enumerated, {short} too-short combos rejected; {mismatches} mismatches")


# ----------------------------------------------------------------- metrics

def test_metric_oracles():
    rng = np.random.default_rng(7)
    worst = {"mae": 0.0, "smape": 0.0, "pearson": 0.0}
    for i in range(1000):
        n = int(rng.integers(2, 60))
        a = rng.normal(size=n) * rng.choice([1.0, 10.0, 100.0])
        b = a * rng.uniform(-1, 1) + rng.normal(size=n)
        if i % 10 == 0:
            a[:3] = b[:3] = 0.0      # exercise the 0/0 sMAPE terms
        la, lb = a.tolist(), b.tolist()
        worst["mae"] = max(worst["mae"], abs(mae(a, b) - mae_ref(la, lb)))
        worst["smape"] = max(worst["smape"], abs(smape(a, b) - smape_ref(la, lb)))
        worst["pearson"] = max(worst["pearson"], abs(pearson(a, b) - pearson_ref(la, lb)))
    hand = (abs(smape([2.0], [1.0]) - 200.0 / 3.0) < 1e-12, smape([3.0], [1.0]) == 100.0)
    ok = max(worst.values()) <= 1e-12 and all(hand)
    _record("metric oracles", ok,
            "1000 pairs worst " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
            + f" (<=1e-12); sMAPE hand cases 66.667={hand[0]} 100={hand[1]}")


# ----------------------------------------------------------------- overfit

@pytest.mark.slow
def test_overfit_noise_free():
    mse, losses, secs = overfit_run(seed=0)
    _record("overfit check", mse < 1e-2 and len(losses) <= 200 and secs < 180,
            f"train MSE {mse:.2e} (<1e-2) after {len(losses)} epochs; {secs:.0f}s CPU (<180)")


# ----------------------------------------------------------------- seasonal benchmark

SEEDS = (0, 1, 2)


@pytest.fixture(scope="module")
def full_runs():
    return {s: seasonal_benchmark(s) for s in SEEDS}


@pytest.mark.slow
def test_beats_persistence(full_runs):
    reds = {s: r.reduction for s, r in full_runs.items()}
    secs = sum(r.seconds for r in full_runs.values())
    _record("beats persistence", min(reds.values()) >= 0.25 and secs < 900,
            "MAE reduction " + ", ".join(f"seed {s}: {100 * v:.1f}%" for s, v in reds.items())
            + f" (each >=25%); {secs:.0f}s CPU (<900)")


@pytest.mark.slow
def test_ablation_direction(full_runs):
    lines, ok = [], True
    for variant in sorted(ABLATIONS):
        worse = 0
        for s in SEEDS:
            res = seasonal_benchmark(s, variant)
            worse += int(res.model_mae >= full_runs[s].model_mae)
        ok = ok and worse >= 2
        lines.append(f"{variant} {worse}/3")
    _record("ablation direction", ok, "seeds where variant MAE >= full: " + ", ".join(lines) + " (need >=2/3 each)")


# ----------------------------------------------------------------- complexity

def _complexity_configs(n=10, seed=11):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        ell = int(rng.choice([4, 7, 8]))
        L = int(rng.choice([16, 28, 32, 56]))
        out.append(ModelConfig(L=L, H=int(rng.choice([7, 14])), C=int(rng.integers(2, 9)),
                               d=int(rng.choice([8, 16, 32])), G=4, ell=ell, r_per_layer=[1, ell]))
    return out


def test_complexity_formula():
    ratios = []
    for i, cfg in enumerate(_complexity_configs()):
        ratios.append(measured_op_count(DeformTime(cfg, seed=i)) / predicted_op_count(cfg))
    within = sum(0.85 <= r <= 1.15 for r in ratios)
    base = ModelConfig(**{**SEASONAL_MODEL})
    double = ModelConfig(**{**SEASONAL_MODEL, "L": 2 * base.L})
    m_ratio = measured_op_count(DeformTime(double)) / measured_op_count(DeformTime(base))
    p_ratio = predicted_op_count(double) / predicted_op_count(base)
    scale_ok = abs(m_ratio / p_ratio - 1) <= 0.10
    _record("complexity formula", within == len(ratios) and scale_ok,
            f"{within}/10 configs within +-15% (ratios {min(ratios):.2f}..{max(ratios):.2f}); "
            f"L->2L measured x{m_ratio:.2f} vs formula x{p_ratio:.2f} (need within 10%)")


# ----------------------------------------------------------------- determinism

def test_determinism_and_round_trip(tmp_path):
    dcfg = DataConfig(synthetic=dict(T=300, C=4, lags=[2, 3, 4, 5], noise=0.1, seed=3))
    mcfg = ModelConfig(L=16, H=3, delta=1, C=4, d=8, G=2, alpha=2.0, ell=4, r_per_layer=[1, 4])
    tcfg = TrainConfig(max_epochs=3, seed=5)

    def run(tag):
        prep = prepare(load_dataset(dcfg), dcfg, mcfg.L, mcfg.H, mcfg.delta)
        model = DeformTime(mcfg, seed=5)
        ck = tmp_path / f"{tag}.ckpt"
        train(model, prep.arrays("train")[:2], prep.arrays("val")[:2], tcfg, checkpoint_path=ck)
        Zt = prep.arrays("test")[0]
        return ck.read_bytes(), model.predict(Zt), Zt

    a_bytes, a_pred, Zt = run("a")
    b_bytes, b_pred, _ = run("b")
    cfg, params, meta = loads(a_bytes)
    reloaded = DeformTime(cfg, params)
    same_ckpt = a_bytes == b_bytes
    same_pred = np.array_equal(a_pred, b_pred)
    same_mae = mae(a_pred, b_pred) == 0.0
    round_trip = dumps(cfg, params, meta) == a_bytes and np.array_equal(reloaded.predict(Zt), a_pred)
    _record("determinism", same_ckpt and same_pred and same_mae and round_trip,
            f"bitwise checkpoints {same_ckpt}, identical predictions {same_pred}, "
            f"save/load round trip bitwise {round_trip}")
