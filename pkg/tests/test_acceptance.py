"""Acceptance gate: one test per release criterion, each printing a pass/fail line.

Run with ``pytest -s tests/test_acceptance.py`` to see the per-criterion lines.
Statistical criteria use fixed seeds, so the whole gate is deterministic.
"""

import time

import numpy as np
import pytest

from daisymimo import chain_sim, cli, detectors, harness, signal_model
from daisymimo.chain_sim import TopologyConfig, build_chain, simulate_slot
from daisymimo.detectors import AsgdParams, AsgdState, SgdParams, asgd_step
from daisymimo.harness import AlgorithmSpec, ExperimentSpec
from daisymimo.opcount import OpCounter, counted_gamma_update, counted_rls_step, counted_sgd_step


def _report(capsys, num, description, ok, elapsed, limit=None):
    status = "PASS" if ok else "FAIL"
    budget = f" (limit {limit:.0f}s)" if limit else ""
    with capsys.disabled():
        print(f"[{status}] criterion {num}: {description} [{elapsed:.2f}s{budget}]")
    assert ok, f"criterion {num} failed: {description}"
    if limit is not None:
        assert elapsed < limit, f"criterion {num} exceeded its {limit}s runtime budget ({elapsed:.1f}s)"


REFERENCE_TABLE = {
    "sgd": ("439MB/s", "879MB/s", "1.7GB/s", "3.4GB/s"),
    "rls": ("470MB/s", "1.0GB/s", "2.2GB/s", "5.3GB/s"),
    "asgd": ("879MB/s", "1.7GB/s", "3.4GB/s", "6.8GB/s"),
    "star": ("10.3GB/s", "10.3GB/s", "20.6GB/s", "20.6GB/s"),
    "central": ("5.1GB/s", "10.2GB/s", "20.4GB/s", "40.8GB/s"),
}


def test_criterion_1_rate_table_reproduction(capsys):
    """All 20 reference cells come out of the rate-table command verbatim."""
    start = time.perf_counter()
    assert cli.main(["rate-table"]) == 0
    out = capsys.readouterr().out
    rows = {line.split()[0]: line.split()[1:] for line in out.splitlines() if line.strip()}
    ok = True
    for name, cells in REFERENCE_TABLE.items():
        ok = ok and tuple(rows.get(name, ())) == cells
    elapsed = time.perf_counter() - start
    _report(capsys, 1, "rate table reproduces all 20 reference cells", ok, elapsed, limit=1.0)


def test_criterion_2_rls_ridge_oracle(capsys):
    """RLS output and its surrogate match the regularized direct solve to 1e-9."""
    start = time.perf_counter()
    worst_est = worst_gamma = 0.0
    instances = 0
    for k in (4, 8, 16):
        for m in (64, 128, 256):
            for rep in range(12):
                seed = 100_000 + 97 * instances
                h = signal_model.generate_rayleigh_channel(m, k, seed)
                rng = np.random.default_rng(seed + 1)
                y = rng.standard_normal(m) + 1j * rng.standard_normal(m)
                pre = detectors.rls_preprocess(h.entries)
                final = detectors.run_chain("rls", h, y, pre)[-1].values

                gram = np.eye(k) + h.entries.conj().T @ h.entries
                est_oracle = np.linalg.solve(gram, h.entries.conj().T @ y)
                gamma_oracle = np.linalg.solve(gram, np.eye(k))
                worst_est = max(
                    worst_est,
                    np.linalg.norm(final - est_oracle) / np.linalg.norm(est_oracle),
                )
                worst_gamma = max(
                    worst_gamma,
                    np.linalg.norm(pre.gamma_final - gamma_oracle) / np.linalg.norm(gamma_oracle),
                )
                instances += 1
    elapsed = time.perf_counter() - start
    ok = instances >= 100 and worst_est <= 1e-9 and worst_gamma <= 1e-9
    _report(
        capsys, 2,
        f"RLS ridge oracle over {instances} instances "
        f"(worst estimate {worst_est:.2e}, worst gamma {worst_gamma:.2e})",
        ok,
        elapsed,
        limit=10.0,
    )


def test_criterion_3_asgd_dual_form(capsys):
    """Recursive averaging equals the stored-iterate batch mean to 1e-12 over 1000 steps."""
    start = time.perf_counter()
    worst = 0.0
    k = 4
    for seed in range(5):
        rng = np.random.default_rng(seed)
        n0 = int(rng.integers(1, 900))
        state = AsgdState(np.zeros(k, complex), np.zeros(k, complex), 0, n0=n0)
        iterates = np.zeros((1000, k), dtype=complex)
        recursive = np.zeros((1000, k), dtype=complex)
        for n in range(1000):
            row = (rng.standard_normal(k) + 1j * rng.standard_normal(k)) / np.sqrt(2)
            y_n = complex(rng.standard_normal() + 1j * rng.standard_normal())
            state = asgd_step(state, row, y_n, mu_n=0.05)
            iterates[n] = state.x
            recursive[n] = state.s_avg
        # batch-average oracle via cumulative sums of the stored iterates
        csum = np.cumsum(iterates, axis=0)
        for n in range(1000):
            if n + 1 < n0:
                expected = iterates[n]
            else:
                span = n + 1 - n0 + 1
                expected = (csum[n] - (csum[n0 - 2] if n0 >= 2 else 0)) / span
            worst = max(worst, np.abs(recursive[n] - expected).max())
    elapsed = time.perf_counter() - start
    _report(capsys, 3, f"ASGD dual-form equivalence (worst gap {worst:.2e})", worst <= 1e-12, elapsed, limit=1.0)


def test_criterion_4_decentralization_equivalence(capsys):
    """Every (C, B) partition reproduces the monolithic chain bit for bit,
    and tokens carry no CSI or raw samples."""
    start = time.perf_counter()
    m, k, n_re = 64, 8, 4
    h = signal_model.generate_rayleigh_channel(m, k, 777)
    rng = np.random.default_rng(778)
    batch = [rng.standard_normal(m) + 1j * rng.standard_normal(m) for _ in range(n_re)]
    params = {
        "rls": None,
        "sgd": SgdParams(mu=0.02),
        "asgd": AsgdParams(mu=0.02, n0=16),
    }
    ok = True
    for algorithm in ("rls", "sgd", "asgd"):
        reference = [detectors.run_chain(algorithm, h, y, params[algorithm])[-1] for y in batch]
        for c in (1, 4, 64):
            chain = build_chain(TopologyConfig.from_clusters(m, k, c), h)
            log = []
            outputs, _ = simulate_slot(chain, algorithm, batch, params=params[algorithm], message_log=log)
            for out, ref in zip(outputs, reference):
                ok = ok and np.array_equal(out.values, ref.values)
            expected_words = 2 * k if algorithm == "asgd" else k
            for token in log:
                ok = ok and token.payload_complex_words == expected_words
                ok = ok and token.estimate.values.shape == (k,)
                ok = ok and (token.aux_iterate is None or token.aux_iterate.shape == (k,))
    elapsed = time.perf_counter() - start
    _report(capsys, 4, "simulate_slot bit-identical to run_chain for all partitions", ok, elapsed, limit=5.0)


def test_criterion_5_convergence_to_zf(capsys):
    """Median RLS-to-ZF gap shrinks with M and is below 0.05 at M=256."""
    start = time.perf_counter()
    k, snr_db, trials = 16, 12.0, 200
    const = signal_model.Constellation.qam(4)
    medians = []
    for m in (32, 64, 128, 256):
        gaps = []
        for t in range(trials):
            h = signal_model.generate_rayleigh_channel(m, k, 10_000 * m + t)
            rng = np.random.default_rng(20_000 * m + t)
            bits = "".join("01"[b] for b in rng.integers(0, 2, k * const.bits_per_symbol))
            s = signal_model.modulate(bits, const, k)
            y = signal_model.transmit(h, s, snr_db, 30_000 * m + t)
            zf = detectors.zf_detect(h, y).values
            rls = detectors.run_chain("rls", h, y)[-1].values
            gaps.append(np.linalg.norm(rls - zf) / np.linalg.norm(zf))
        medians.append(float(np.median(gaps)))
    non_increasing = all(a >= b for a, b in zip(medians, medians[1:]))
    ok = non_increasing and medians[-1] < 0.05
    elapsed = time.perf_counter() - start
    _report(
        capsys, 5,
        "RLS converges to ZF (medians " + ", ".join(f"{v:.4f}" for v in medians) + ")",
        ok,
        elapsed,
        limit=30.0,
    )


def test_criterion_6_reference_figure_properties(capsys):
    """Property-based stand-ins for the reference curves: step-size optimum,
    averaging robustness, and RLS-equals-ZF BER."""
    start = time.perf_counter()
    topology = TopologyConfig.from_clusters(256, 16, 8)

    mse_spec = ExperimentSpec(
        kind="mse_sweep",
        topology=topology,
        algorithms=(
            AlgorithmSpec("sgd", mu=0.005),
            AlgorithmSpec("sgd", mu=0.02),
            AlgorithmSpec("sgd", mu=0.04),
            AlgorithmSpec("sgd", mu=0.2),
            AlgorithmSpec("asgd", mu=0.02, n0=150),
            AlgorithmSpec("asgd", mu=0.04, n0=75),
        ),
        snr_db=12.0,
        constellation_order=16,
        trials=1000,
        master_seed=606,
    )
    mse = harness.run_mse_sweep(mse_spec)
    final = {c.label: c.points[-1].mean for c in mse.curves}

    # (a) interior step-size optimum
    ok_a = (
        final["sgd(mu=0.04)"] < final["sgd(mu=0.005)"]
        and final["sgd(mu=0.04)"] < final["sgd(mu=0.2)"]
    )
    # (b) averaging shrinks the spread across step sizes
    sgd_spread = abs(final["sgd(mu=0.02)"] - final["sgd(mu=0.04)"])
    asgd_spread = abs(final["asgd(mu=0.02,n0=150)"] - final["asgd(mu=0.04,n0=75)"])
    ok_b = asgd_spread < sgd_spread

    # (c) RLS tracks the ZF bit error rate at every SNR point
    ber_spec = ExperimentSpec(
        kind="ber_sweep",
        topology=topology,
        algorithms=(AlgorithmSpec("rls"), AlgorithmSpec("zf")),
        snr_db_grid=(0.0, 4.0, 8.0, 12.0, 16.0),
        constellation_order=16,
        target_errors=500,
        max_trials_per_point=1500,
        master_seed=607,
    )
    ber = harness.run_ber_sweep(ber_spec)
    ok_c = True
    for p_rls, p_zf in zip(ber.curve("rls").points, ber.curve("zf").points):
        combined = np.hypot(p_rls.stderr, p_zf.stderr)
        ok_c = ok_c and abs(p_rls.mean - p_zf.mean) <= 3 * combined

    elapsed = time.perf_counter() - start
    _report(
        capsys, 6,
        f"reference-figure properties (a={ok_a}, b={ok_b} "
        f"[spreads {asgd_spread:.2e} < {sgd_spread:.2e}], c={ok_c})",
        ok_a and ok_b and ok_c,
        elapsed,
        limit=300.0,
    )


def test_criterion_7_pipeline_arithmetic(capsys):
    """Unit-cost pipeline fills in C - 1 ticks and finishes at C - 1 + R."""
    start = time.perf_counter()
    ok = True
    k, b = 2, 2
    for c in (1, 2, 8):
        m = c * b
        h = signal_model.generate_rayleigh_channel(m, k, 31 * c)
        rng = np.random.default_rng(37 * c)
        for n_re in (1, 100):
            batch = [rng.standard_normal(m) + 1j * rng.standard_normal(m) for _ in range(n_re)]
            chain = build_chain(TopologyConfig.from_clusters(m, k, c), h)
            _, report = simulate_slot(chain, "sgd", batch, params=SgdParams(mu=0.05))
            report.validate()
            ok = ok and report.total_ticks == c - 1 + n_re
            ok = ok and report.pipeline_delay == c - 1
    elapsed = time.perf_counter() - start
    _report(capsys, 7, "pipeline fill arithmetic (T = C-1, total = C-1+R)", ok, elapsed, limit=1.0)


def test_criterion_8_complexity_accounting(capsys):
    """Counted kernels certify O(K) per RE step and O(K^2) per preprocessing antenna."""
    start = time.perf_counter()
    ok = True
    step_counts, prep_counts = {}, {}
    for k in (8, 16, 32):
        rng = np.random.default_rng(k)
        row = (rng.standard_normal(k) + 1j * rng.standard_normal(k)) / np.sqrt(2)
        prev = detectors.EstimateVector(np.zeros(k, complex), 0)

        counter = OpCounter()
        counted_sgd_step(prev, row, 0.1 + 0.2j, 0.05, counter)
        ok = ok and counter.complex_mults == 2 * k

        counter = OpCounter()
        counted_rls_step(prev, row, 0.1 + 0.2j, 0.5, row, counter)
        ok = ok and counter.complex_mults == 2 * k
        step_counts[k] = counter.complex_mults

        counter = OpCounter()
        counted_gamma_update(np.eye(k, dtype=complex), row, counter)
        ok = ok and counter.complex_mults == 2 * k * k + k
        prep_counts[k] = counter.complex_mults

    # scaling checks: doubling K doubles step cost and ~quadruples prep cost
    ok = ok and step_counts[16] == 2 * step_counts[8] and step_counts[32] == 2 * step_counts[16]
    ok = ok and 3.5 < prep_counts[16] / prep_counts[8] <= 4.0
    ok = ok and 3.5 < prep_counts[32] / prep_counts[16] <= 4.0
    elapsed = time.perf_counter() - start
    _report(capsys, 8, "per-RE steps cost O(K), preprocessing O(K^2) per antenna", ok, elapsed, limit=1.0)
