"""Acceptance suite: one test per release criterion, each printing a verdict.

Run with `pytest tests/test_acceptance.py -v -rA` to see the per-criterion
lines alongside pytest's own pass/fail report.
"""

import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest
from click.testing import CliRunner

from confab.analytics import binomial_p, roi
from confab.cli import main as cli_main
from confab.forecast import TOSSUP_BAND, finalize
from confab.matching import MatchingEngine, challenge_score
from confab.analyzer import Insight, canonical_key
from confab.replay import fold_replay, reexecute
from confab.sentiment import aggregate, weighted_mean
from confab.analyzer import SupportVector
from confab.simharness import ScenarioSpec, run_scenario, simulate

from table_fixture import write_fixture


def verdict(name: str, detail: str = "") -> None:
    suffix = f" -- {detail}" if detail else ""
    print(f"[PASS] {name}{suffix}")


@pytest.fixture(scope="module")
def table_cli_rows(tmp_path_factory):
    """Invoke the analytics CLI once over the reference fixture; parse its output."""
    dest = tmp_path_factory.mktemp("acceptance_tables")
    log_dir, outcomes = write_fixture(dest)
    runner = CliRunner()
    started = time.perf_counter()
    result = runner.invoke(
        cli_main,
        ["analyze", "--logs", str(log_dir), "--outcomes", str(outcomes),
         "--format", "csv"],
    )
    elapsed = time.perf_counter() - started
    assert result.exit_code == 0, result.output
    rows = {}
    for line in result.output.strip().splitlines()[1:]:
        parts = line.split(",")
        if len(parts) != 7:
            continue
        rows[parts[0]] = {
            "n": int(parts[1]),
            "wins": int(parts[2]),
            "losses": int(parts[3]),
            "accuracy": float(parts[4]),
            "roi": float(parts[5]),
            "p": float(parts[6]),
        }
    return rows, elapsed, result.output


def test_table_one_reproduction(table_cli_rows):
    rows, elapsed, _ = table_cli_rows
    expectations = {
        "All picks": (50, 31, 19, 62.0, 18.4, 0.059),
        "Favorite picks": (39, 23, 16, 59.0, 12.6, 0.168),
        "Underdog picks": (11, 8, 3, 72.7, 38.8, 0.113),
    }
    for label, (n, w, l, acc, r, p) in expectations.items():
        row = rows[label]
        assert (row["n"], row["wins"], row["losses"]) == (n, w, l), label
        assert row["accuracy"] == pytest.approx(acc, abs=0.05), label
        assert row["roi"] == pytest.approx(r, abs=0.05), label
        assert row["p"] == pytest.approx(p, abs=0.001), label
    assert elapsed < 1.0, f"analytics CLI took {elapsed:.3f}s"
    verdict(
        "bet-type table reproduction",
        f"50 picks -> 62.0/59.0/72.7% acc, +18.4/+12.6/+38.8% ROI, "
        f"p 0.059/0.168/0.113 in {elapsed:.3f}s",
    )


def test_table_two_reproduction(table_cli_rows):
    rows, _, _ = table_cli_rows
    lower, upper = rows["Lower 25%"], rows["Upper 75%"]
    assert (lower["n"], lower["wins"], lower["losses"]) == (12, 5, 7)
    assert (upper["n"], upper["wins"], upper["losses"]) == (38, 26, 12)
    assert lower["accuracy"] == pytest.approx(41.7, abs=0.05)
    assert upper["accuracy"] == pytest.approx(68.4, abs=0.05)
    assert lower["roi"] == pytest.approx(-20.5, abs=0.05)
    assert upper["roi"] == pytest.approx(30.6, abs=0.05)
    assert lower["p"] == pytest.approx(0.806, abs=0.001)
    assert upper["p"] == pytest.approx(0.017, abs=0.001)
    verdict(
        "conversation-rate cohort reproduction",
        "12 low-rate picks 41.7% (-20.5%, p 0.806); 38 high-rate 68.4% (+30.6%, p 0.017)",
    )


def test_profit_identity():
    result = roi(31, 19, stake=100.0)
    assert abs(result.profit - 918.0) < 0.50
    verdict("flat-stake profit identity", f"31-19 at $100 -> ${result.profit:.2f}")


def test_exact_binomial_oracle():
    half = Fraction(1, 2)
    worst = 0.0
    for n in range(1, 65):
        tail = Fraction(0)
        # accumulate the exact tail from the top down: P(X >= k) for k = n..0
        for k in range(n, -1, -1):
            tail += Fraction(math.comb(n, k)) * half**n
            got = binomial_p(n, k)
            worst = max(worst, abs(got - float(tail)))
            assert abs(got - float(tail)) < 1e-9, (n, k)
    assert binomial_p(11, 8) == 232 / 2048
    assert binomial_p(12, 5) == 3302 / 4096
    verdict(
        "exact binomial tail vs rational oracle",
        f"all n<=64, all k; max abs err {worst:.2e}; spot 232/2048 and 3302/4096 exact",
    )


def test_scale_mean_property_suite():
    # Worked examples.
    assert weighted_mean((0.25, 0.25, 0.25, 0.25)) == 0.0
    assert weighted_mean((1, 0, 0, 0)) == -2.0
    assert weighted_mean((0.4, 0.2, 0.3, 0.1)) == pytest.approx(-0.5)

    rng = np.random.default_rng(20240)
    raw = rng.random((1_000_000, 4)) + 1e-12
    profiles = raw / raw.sum(axis=1, keepdims=True)

    # Linearity: population mean == mean of member means (uniform weights).
    sample = [tuple(row) for row in profiles[:4000]]
    vectors = [SupportVector(p) for p in sample]
    assert weighted_mean(aggregate(vectors)) == pytest.approx(
        sum(weighted_mean(p) for p in sample) / len(sample), abs=1e-9
    )

    # Bounds over the full million profiles, vectorized.
    means = profiles @ np.array([-2.0, -1.0, 1.0, 2.0])
    assert means.min() >= -2.0 and means.max() <= 2.0

    # Mirror symmetry on a sample.
    for p in sample[:500]:
        assert weighted_mean(tuple(reversed(p))) == pytest.approx(
            -weighted_mean(p), abs=1e-12
        )

    # Toss-up trichotomy through finalize() for every one of the 10^6 profiles.
    counts = {"A": 0, "B": 0, "none": 0}
    for row in profiles.tolist():
        f = finalize(row, "q")
        counts[f.pick] += 1
        if f.pick == "A":
            assert f.wcf < -TOSSUP_BAND and not f.is_tossup
        elif f.pick == "B":
            assert f.wcf > TOSSUP_BAND and not f.is_tossup
        else:
            assert f.is_tossup and abs(f.wcf) <= TOSSUP_BAND
    assert sum(counts.values()) == 1_000_000
    verdict(
        "scale-mean property suite",
        f"linearity/bounds/mirror + trichotomy over 1e6 profiles "
        f"(A {counts['A']}, B {counts['B']}, toss-up {counts['none']})",
    )


def _random_sim_spec(seed: int) -> ScenarioSpec:
    rng = random.Random(seed * 7919 + 13)
    return ScenarioSpec(
        n_participants=rng.randint(4, 12),
        p_a=rng.uniform(0.2, 0.8),
        conviction_lo=0.5,
        conviction_hi=0.9,
        rate_per_min=rng.uniform(6, 12),
        reason_pool=random.Random(seed).sample(
            [f"angle {i}" for i in range(10)], rng.randint(3, 6)
        ),
        seed=seed,
        n_questions=1,
        round_duration_s=rng.randint(30, 60),
    )


def _assert_novelty_safe(records) -> int:
    """Walk a log asserting no routed insight was already in the receiver's ledger."""
    exposure: dict[str, set] = {}
    routed = 0
    for rec in records:
        if rec.kind == "round_started":
            exposure = {}
        elif rec.kind == "insight_registered":
            ins = rec.payload["insight"]
            exposure.setdefault(ins["origin_subgroup"], set()).add(ins["canonical_key"])
        elif rec.kind == "insight_routed":
            g, key = rec.payload["subgroup_id"], rec.payload["canonical_key"]
            assert key not in exposure.get(g, set()), (
                f"insight {key} routed into already-exposed subgroup {g}"
            )
            exposure.setdefault(g, set()).add(key)
            routed += 1
    return routed


def test_dme_novelty_safety_and_full_mixing():
    total_routed = 0
    for seed in range(200):
        records = run_scenario(_random_sim_spec(seed))
        total_routed += _assert_novelty_safe(records)
    assert total_routed > 200, "simulations should actually exercise routing"

    # Full mixing: few insights, >=2 subgroups, plenty of pacing windows.
    mixed = 0
    for seed, n, pool in [(1, 6, 2), (2, 6, 3), (3, 9, 2), (4, 9, 3), (5, 8, 2), (6, 10, 3)]:
        spec = ScenarioSpec(
            n_participants=n,
            p_a=0.5,
            conviction_lo=0.6,
            conviction_hi=0.9,
            rate_per_min=10,
            reason_pool=[f"case {i}" for i in range(pool)],
            seed=seed,
            n_questions=1,
            round_duration_s=300,
            config_overrides={"target_subgroup_size": 3},
        )
        engine = simulate(spec)
        assert len(engine.subgroups) >= 2
        matching = engine.matching_by_round[0]
        keys = [e.insight.canonical_key for e in matching.registry]
        for tt in engine.subgroups:
            missing = set(keys) - matching.exposure.get(tt.id, set())
            assert not missing, f"subgroup {tt.id} never exposed to {missing}"
        mixed += len(keys)
    verdict(
        "routing novelty safety and full mixing",
        f"200 seeded sessions, {total_routed} routes, zero novelty violations; "
        f"{mixed} insights fully mixed in 6 small scenarios",
    )


def _random_selection_instance(rng: random.Random):
    n_groups = rng.randint(2, 8)
    groups = [f"tt{i + 1}" for i in range(n_groups)]
    eng = MatchingEngine()
    for j in range(rng.randint(1, 50)):
        reason = f"reason {rng.randint(0, 24)}"
        side = rng.choice("AB")
        key = canonical_key(side, (reason,))
        ins = Insight(
            id=f"i{j}", side=side, reasons=(reason,),
            conviction=rng.choice([0.3, 0.5, 0.5, 0.7, 0.9]),
            origin_subgroup=rng.choice(groups), canonical_key=key,
        )
        eng.register_insight(ins)
        for g in groups:
            if rng.random() < 0.3:
                eng.mark_exposed(g, ins)
    return eng, groups


def test_challenge_selection_oracle_equivalence():
    rng = random.Random(77)
    checked = 0
    for _ in range(1000):
        eng, groups = _random_selection_instance(rng)
        g = rng.choice(groups)
        prevailing = rng.uniform(-2, 2) if rng.random() > 0.25 else 0.0
        fast = eng.select_for(g, prevailing)
        exposed = eng.exposure.get(g, set())
        candidates = [
            e for e in eng.registry
            if e.insight.canonical_key not in exposed
            and e.insight.origin_subgroup != g
        ]
        slow = None
        if candidates:
            slow = min(
                candidates,
                key=lambda e: (
                    -challenge_score(e.insight, prevailing),
                    -e.insight.conviction,
                    e.share_count,
                    e.index,
                ),
            ).insight
        if slow is None:
            assert fast is None
        else:
            assert fast is not None and fast.canonical_key == slow.canonical_key
        checked += 1
    verdict("challenge-selection oracle equivalence", f"{checked} random instances")


E2E_SPEC = dict(
    n_participants=27,
    p_a=0.3,
    conviction_lo=0.6,
    conviction_hi=0.9,
    rate_per_min=6,
    seed=20251,
    n_questions=4,
    round_duration_s=300,
)


@pytest.fixture(scope="module")
def e2e_runs():
    started = time.perf_counter()
    first = simulate(ScenarioSpec(**E2E_SPEC))
    elapsed = time.perf_counter() - started
    second = run_scenario(ScenarioSpec(**E2E_SPEC))
    return first, second, elapsed


def test_end_to_end_determinism(e2e_runs):
    engine, second, elapsed = e2e_runs
    assert elapsed < 10.0, f"4-round session took {elapsed:.2f}s"
    assert len(engine.forecasts) == 4
    for forecast in engine.forecasts:
        assert forecast.pick == "B"
        assert forecast.wcf > TOSSUP_BAND
    log_a = engine.export_jsonl()
    log_b = "".join(r.to_json_line() + "\n" for r in second)
    assert log_a == log_b, "two seeded runs must export identical logs"
    verdict(
        "end-to-end determinism",
        f"27 participants, 4 rounds in {elapsed:.2f}s; all picks B "
        f"(wcf {', '.join(f'{f.wcf:+.3f}' for f in engine.forecasts)}); logs identical",
    )


def test_log_replay_reconstruction(e2e_runs):
    engine, _, _ = e2e_runs
    records = engine.export_events()

    folded = fold_replay(records)
    assert [f.to_payload() for f in folded.forecasts] == [
        f.to_payload() for f in engine.forecasts
    ]
    for round_index, rnd in enumerate(folded.rounds):
        live = engine.matching_by_round[round_index]
        assert rnd.exposure == {g: set(k) for g, k in live.exposure.items() if k}

    rerun = reexecute(records)
    assert rerun.export_jsonl() == engine.export_jsonl()
    assert [f.to_payload() for f in rerun.forecasts] == [
        f.to_payload() for f in engine.forecasts
    ]

    # The guarantee holds across the randomized family too, not just one seed.
    for seed in (0, 17, 123):
        records = run_scenario(_random_sim_spec(seed))
        state = fold_replay(records)
        assert reexecute(records).export_jsonl() == "".join(
            r.to_json_line() + "\n" for r in records
        )
        assert len(state.rounds) == 1
    verdict(
        "log replay reconstruction",
        "fold + re-execution reproduce forecasts and exposure ledgers exactly",
    )
