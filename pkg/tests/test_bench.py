"""Harness tests: trials, regret summaries, convergence curves, gaps."""

import numpy as np
import pytest

from olplab.bench import (DegenerateDualWarning, dual_convergence_experiment,
                          estimate_regret, lagrangian_gap,
                          lagrangian_gap_detail, loglog_slope, run_trial,
                          run_trials, trajectory_export)
from olplab.core import DualPrice, NumericalFailure, SolverOptions
from olplab.dual import classify_binding, estimate_pstar
from olplab.inputs import (FiniteSupport, MultiSecretary, RandomInputI,
                           Replay, UniformSquare)
from olplab.policies import (DualPricePolicy, ResolvingPolicy,
                             ScheduledLearningPolicy, StaticPricePolicy)

MS = MultiSecretary()
MS_PSTAR = DualPrice([0.75], provenance="analytic")
LOSS_ONLY = FiniteSupport(probs=(0.5, 0.5), rewards=(-1.0, -0.25),
                          columns=((1.0,), (1.0,)))


def static(p):
    return StaticPricePolicy(DualPrice(np.atleast_1d(np.asarray(p, float)),
                                       provenance="analytic"))


# ---------------------------------------------------------------------------
# run_trial


def test_trial_all_losses_is_exactly_zero_regret():
    res = run_trial(LOSS_ONLY, static(0.0), 10, 0.3, seed=4)
    assert res.online_revenue == 0.0
    assert res.offline_optimum == 0.0
    assert res.regret == 0.0


def test_trial_replayed_unit_stream_example(tmp_path):
    text = "olp v1 n=4 m=1\n0.9 1\n0.1 1\n0.5 1\n0.7 1\n"
    path = tmp_path / "s.txt"
    path.write_text(text)
    res = run_trial(Replay(str(path)), static(0.75), 4, 0.25, seed=0)
    assert res.offline_optimum == pytest.approx(0.9)
    assert res.online_revenue == pytest.approx(0.9)
    assert res.regret == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("maker", [lambda: static([0.75] * 4),
                                   ScheduledLearningPolicy,
                                   ResolvingPolicy],
                         ids=["static", "scheduled", "resolving"])
def test_trial_regret_never_meaningfully_negative(maker, seed):
    res = run_trial(RandomInputI(), maker(), 40, 0.25, seed=seed)
    assert res.regret >= -1e-6 * (1 + abs(res.offline_optimum))
    assert res.online_revenue <= res.offline_optimum + 1e-6


def test_trial_same_seed_identical():
    a = run_trial(RandomInputI(), ResolvingPolicy(), 30, 0.25, seed=9)
    b = run_trial(RandomInputI(), ResolvingPolicy(), 30, 0.25, seed=9)
    assert a.online_revenue == b.online_revenue
    assert a.offline_optimum == b.offline_optimum
    assert a.tau_abar == b.tau_abar
    assert np.array_equal(a.ledger.x, b.ledger.x)


def test_trial_optional_fields_toggle():
    binding = classify_binding(MS, 0.25, MS_PSTAR, samples=20_000, seed=1)
    res = run_trial(MS, static(0.75), 20, 0.25, seed=2, pstar=MS_PSTAR,
                    binding=binding, record_prices=True)
    assert res.binding_leftover is not None and res.binding_leftover.size == 1
    assert res.price_error_sum == pytest.approx(0.0)   # static at the target
    assert len(res.price_trace) == 20
    bare = run_trial(MS, static(0.75), 20, 0.25, seed=2)
    assert bare.binding_leftover is None
    assert bare.price_error_sum is None
    assert bare.price_trace is None


class BoomPolicy(DualPricePolicy):
    """Learning blows up at a chosen period (failure-context fixture)."""

    name = "boom"

    def __init__(self, at):
        self.at = at

    def update(self, state, order):
        if state.t == self.at:
            raise NumericalFailure("synthetic blowup")


def test_trial_failure_context_names_seed_and_period():
    with pytest.raises(NumericalFailure, match=r"trial seed 5, period 3"):
        run_trial(MS, BoomPolicy(at=3), 10, 0.25, seed=5)


def test_trial_stop_gap_semantics():
    res = run_trial(MS, static(0.75), 50, 0.25, seed=3)
    assert 0 <= res.tau_abar <= 50


# ---------------------------------------------------------------------------
# run_trials / estimate_regret


def test_trials_are_seed_isolated():
    short = run_trials(MS, static(0.75), 25, 0.25, 5, base_seed=11)
    long = run_trials(MS, static(0.75), 25, 0.25, 10, base_seed=11)
    assert [t.regret for t in short] == [t.regret for t in long[:5]]
    assert [t.seed for t in short] == [t.seed for t in long[:5]]


def test_trials_parallel_matches_serial():
    serial = run_trials(RandomInputI(dim=2), ScheduledLearningPolicy(),
                        30, 0.3, 6, base_seed=42)
    par = run_trials(RandomInputI(dim=2), ScheduledLearningPolicy(),
                     30, 0.3, 6, base_seed=42, threads=2)
    assert [t.regret for t in serial] == [t.regret for t in par]
    assert [t.online_revenue for t in serial] == [t.online_revenue for t in par]


def test_policies_see_paired_instances():
    a = run_trials(RandomInputI(dim=2), static([0.5, 0.5]), 25, 0.3, 8,
                   base_seed=31)
    b = run_trials(RandomInputI(dim=2), ResolvingPolicy(), 25, 0.3, 8,
                   base_seed=31)
    assert [t.seed for t in a] == [t.seed for t in b]
    assert [t.offline_optimum for t in a] == [t.offline_optimum for t in b]


def test_estimate_regret_requires_two_trials():
    with pytest.raises(ValueError, match="trials"):
        estimate_regret(MS, static(0.75), 20, 0.25, trials=1, base_seed=0)


def test_estimate_regret_loss_only_model_is_zero():
    rep = estimate_regret(LOSS_ONLY, static(0.0), 12, 0.3, trials=5,
                          base_seed=2)
    assert rep.mean_regret == 0.0
    assert rep.stderr == 0.0
    assert rep.trials == 5


def test_estimate_regret_report_fields():
    rep = estimate_regret(MS, static(0.75), 40, 0.25, trials=10, base_seed=7,
                          pstar=MS_PSTAR,
                          binding=classify_binding(MS, 0.25, MS_PSTAR,
                                                   samples=20_000, seed=1))
    assert rep.algorithm == "static" and rep.n == 40 and rep.m == 1
    assert rep.mean_regret >= 0.0 and rep.stderr > 0.0
    assert rep.mean_stop_gap >= 0.0
    assert rep.mean_binding_leftover is not None
    assert rep.mean_price_error == pytest.approx(0.0)


def test_estimate_regret_resolving_beats_nothing_policy():
    never = static(1e9)   # prices everyone out
    lazy = estimate_regret(MS, never, 60, 0.25, trials=8, base_seed=3)
    smart = estimate_regret(MS, ResolvingPolicy(), 60, 0.25, trials=8,
                            base_seed=3)
    assert smart.mean_regret < lazy.mean_regret


# ---------------------------------------------------------------------------
# dual convergence


def test_dualconv_rows_and_rate():
    rows = dual_convergence_experiment(MS, 0.25, [100, 300, 1000], 100,
                                       base_seed=7, pstar=MS_PSTAR)
    assert [r[0] for r in rows] == [100, 300, 1000]
    mse = [r[1] for r in rows]
    assert all(v > 0 for v in mse)
    assert mse[0] > mse[-1]
    slope = loglog_slope([r[0] for r in rows], mse)
    assert -1.2 <= slope <= -0.8


def test_dualconv_more_trials_shrinks_stderr():
    few = dual_convergence_experiment(MS, 0.25, [200], 50, 7, MS_PSTAR)
    many = dual_convergence_experiment(MS, 0.25, [200], 200, 7, MS_PSTAR)
    assert many[0][2] < few[0][2]


def test_dualconv_degenerate_curve_warns():
    # every sampled price equals the reference exactly: no rate information
    atom = FiniteSupport(probs=(1.0,), rewards=(1.0,), columns=((1.0,),))
    with pytest.warns(DegenerateDualWarning):
        rows = dual_convergence_experiment(atom, 0.25, [20, 40], 10,
                                           base_seed=1,
                                           pstar=DualPrice([1.0]))
    assert all(r[1] == 0.0 for r in rows)


# ---------------------------------------------------------------------------
# trajectories


def test_trajectory_shape_and_monotone_paths():
    out = trajectory_export(MS, static(0.75), 30, 0.25, trials=4, base_seed=5)
    assert out.shape == (4, 31)
    assert np.all(out[:, 0] == 7.5)
    assert np.all(np.diff(out, axis=1) <= 0)    # unit columns only drain
    assert np.all(out >= 0.0)


def test_trajectory_free_lunch_price_drains_fast():
    give = trajectory_export(MS, static(0.0), 30, 0.25, trials=3, base_seed=5)
    hold = trajectory_export(MS, static(0.75), 30, 0.25, trials=3, base_seed=5)
    assert give[:, -1].mean() <= hold[:, -1].mean()


def test_trajectory_resource_out_of_range():
    with pytest.raises(ValueError, match="resource index"):
        trajectory_export(UniformSquare(), static([0.5] * 4), 20, 0.3,
                          trials=2, base_seed=0, resource=4)


# ---------------------------------------------------------------------------
# population gap


def test_gap_at_reference_price_is_zero():
    g, se = lagrangian_gap_detail(MS, 0.25, MS_PSTAR, [0.75],
                                  samples=50_000, seed=3)
    assert g == 0.0 and se == 0.0


def test_gap_closed_form_uniform_rewards():
    # pricing at 0.5 instead of 0.75 forfeits exactly 1/32 per period
    g, se = lagrangian_gap_detail(MS, 0.25, MS_PSTAR, [0.5],
                                  samples=200_000, seed=3)
    assert abs(g - 1.0 / 32.0) <= 3 * se


@pytest.mark.parametrize("p", [0.0, 0.3, 0.9, 1.5])
def test_gap_nonnegative_up_to_noise(p):
    g, se = lagrangian_gap_detail(MS, 0.25, MS_PSTAR, [p],
                                  samples=100_000, seed=8)
    assert g >= -3 * se


def test_gap_scalar_wrapper():
    assert lagrangian_gap(MS, 0.25, MS_PSTAR, [0.75], samples=10_000) == 0.0


# ---------------------------------------------------------------------------
# slope fitting


def test_loglog_slope_recovers_power_law():
    ns = np.array([10, 100, 1000, 10_000])
    assert loglog_slope(ns, 3.0 * ns ** 0.5) == pytest.approx(0.5)
    assert loglog_slope(ns, 7.0 / ns) == pytest.approx(-1.0)


def test_loglog_slope_rejects_nonpositive_values():
    with pytest.raises(ValueError, match="positive"):
        loglog_slope([10, 100], [1.0, 0.0])


# ---------------------------------------------------------------------------
# estimated reference prices plug into the harness


def test_saa_price_feeds_binding_classification():
    pstar = estimate_pstar(MS, 0.25, samples=50_000, seed=6)
    binding = classify_binding(MS, 0.25, pstar, samples=50_000, seed=7)
    assert binding.binding == (0,)
    rep = estimate_regret(MS, static(pstar.p), 40, 0.25, trials=5,
                          base_seed=9, pstar=pstar, binding=binding)
    assert rep.mean_binding_leftover >= 0.0
