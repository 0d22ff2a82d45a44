import math
from dataclasses import replace

import numpy as np
import pytest

from emdisc.analysis import (
    ErrorRow,
    ErrorTable,
    StudyConfig,
    final_time_error,
    fit_rate,
    lq_norm,
    occupation_study,
    path_lq_error,
    pth_mean,
    reference_path,
    run_study,
    supnorm_error,
)
from emdisc.randomness import SeedSpec, generate_block, generate_path
from emdisc.sde_model import FunctionSpec, PiecewiseDrift, SdeProblem

GBM_CFG = StudyConfig(n_list=(16, 32, 64, 128, 256), n_fine=1024, M=2000,
                      reference="closed_form_gbm", seed=11)


@pytest.fixture(scope="module")
def gbm_result(gbm):
    return run_study(GBM_CFG, gbm, ("final", "sup"))


def _bm(sigma=1.0):
    return SdeProblem(0.0, PiecewiseDrift.lipschitz(FunctionSpec.constant(0)),
                      FunctionSpec.constant(sigma))


def test_config_validation():
    with pytest.raises(ValueError):
        StudyConfig(n_list=(3,), n_fine=16)
    with pytest.raises(ValueError):
        StudyConfig(M=1)
    with pytest.raises(ValueError):
        StudyConfig(p=0.5)
    with pytest.raises(ValueError):
        StudyConfig(scheme="milstein")
    with pytest.raises(ValueError):
        StudyConfig(n_list=(64, 16))
    assert StudyConfig().n_ref == 2 ** 14


def test_gbm_closed_form(gbm):
    bp = generate_path(SeedSpec(3), 0, 64)
    ref = reference_path(gbm, None, None, bp, "closed_form_gbm")
    assert ref[0] == 1.0
    assert ref[-1] == pytest.approx(math.exp((0.05 - 0.02) + 0.2 * bp.values[-1]), rel=1e-14)


def test_closed_form_requires_gbm(p1):
    with pytest.raises(ValueError):
        reference_path(p1, None, None, generate_path(SeedSpec(3), 0, 8), "closed_form_gbm")


def test_identity_transform_references_agree(gbm):
    w = generate_block(SeedSpec(3), range(4), 256)
    np.testing.assert_array_equal(reference_path(gbm, None, None, w, "transformed_fine"),
                                  reference_path(gbm, None, None, w, "direct_fine"))


def test_degenerate_coupling(p1):
    cfg = StudyConfig(n_list=(64,), n_fine=64, M=20, reference="direct_fine")
    res = run_study(cfg, p1, ("final", "sup", "lq"))
    assert np.all(res.final == 0) and np.all(res.sup == 0) and np.all(res.lq == 0)


@pytest.mark.parametrize("sigma", [1.0, 2.0])
def test_brownian_motion_is_exact(sigma):
    cfg = StudyConfig(n_list=(4, 16, 64), n_fine=256, M=50, reference="direct_fine")
    res = run_study(cfg, _bm(sigma), ("final", "sup"))
    assert np.all(res.final == 0) and np.all(res.sup == 0)
    assert np.all(res.table("final").errors == 0)


def test_gbm_errors_decrease(gbm_result):
    tab = gbm_result.table("final")
    e, s = tab.errors, tab.std_errors
    assert np.all(e > 0)
    assert np.all(e[1:] <= e[:-1] + 2 * s[:-1])


def test_gbm_halving_ratio(gbm_result):
    tab = gbm_result.table("final")
    e, s = tab.errors, tab.std_errors
    for i in range(len(e) - 1):
        ratio = e[i + 1] / e[i]
        rel = math.hypot(s[i] / e[i], s[i + 1] / e[i + 1])
        assert abs(ratio - 2 ** -0.5) <= 3 * rel * ratio


def test_sup_dominates_final(gbm_result):
    assert np.all(gbm_result.sup >= gbm_result.final)


def test_std_error_shrinks_with_m(gbm):
    small = final_time_error(replace(GBM_CFG, M=1000, n_list=(16, 32, 64)), gbm)
    big = final_time_error(replace(GBM_CFG, M=2000, n_list=(16, 32, 64)), gbm)
    ratio = big.std_errors / small.std_errors
    assert np.all((ratio >= 0.6) & (ratio <= 0.82))


def test_pth_mean():
    est, se = pth_mean([3.0, 4.0], 2)
    assert est == pytest.approx(math.sqrt(12.5))
    # delta method: se(S) / (2 sqrt(S)) with se(S) = std([9, 16]) / sqrt(2)
    assert se == pytest.approx(np.std([9, 16], ddof=1) / math.sqrt(2) / (2 * math.sqrt(12.5)))
    assert pth_mean(np.zeros(5), 2) == (0.0, 0.0)


def test_lq_norm():
    assert lq_norm(np.ones(33), 1) == pytest.approx(1.0)
    assert lq_norm(np.ones(33), math.inf) == 1.0
    f = np.array([1.0, 1.0, 3.0, 3.0, 0.5])
    # piecewise constant with left values on quarters: (1 + 1 + 3 + 3) / 4
    assert lq_norm(f, 1) == 2.0
    assert lq_norm(f, 2) == pytest.approx(math.sqrt(5.0))


def test_path_lq_small(p1):
    cfg = StudyConfig(n_list=(8, 32, 128), n_fine=512, M=40, q=1.0, reference="direct_fine")
    tab = path_lq_error(cfg, p1)
    assert np.all(tab.errors > 0) and tab.q == 1.0


def test_supnorm_small(p1):
    tab = supnorm_error(StudyConfig(n_list=(8, 32), n_fine=256, M=40), p1)
    assert np.all(tab.errors > 0)


def test_transformed_scheme_study(p1):
    cfg = StudyConfig(n_list=(8, 32, 128), n_fine=512, M=60, scheme="transformed_em")
    res = run_study(cfg, p1, ("final", "sup", "lq", "occupation"))
    assert np.all(res.sup >= res.final)


def test_occupation_unreachable_level(p1):
    cfg = StudyConfig(n_list=(8, 32), n_fine=256, M=30)
    tab = occupation_study(cfg, p1, xi=[1e6])
    assert all(r.mean_meas == 0 and r.pmean_meas == 0 for r in tab.rows)


def test_occupation_needs_breakpoint(gbm):
    with pytest.raises(ValueError):
        occupation_study(StudyConfig(n_list=(8,), n_fine=64, M=4), gbm)


def test_occupation_csv(p1):
    tab = occupation_study(StudyConfig(n_list=(8, 16), n_fine=64, M=10), p1)
    lines = tab.to_csv().splitlines()
    assert lines[0] == "n,xi,mean_meas,pmean_meas,std_error,M"
    assert len(lines) == 3


def test_worker_count_does_not_change_results(p1):
    cfg = StudyConfig(n_list=(8, 32), n_fine=256, M=37, batch_size=5)
    a = run_study(cfg, p1, ("final", "sup", "lq", "occupation"), workers=1)
    b = run_study(cfg, p1, ("final", "sup", "lq", "occupation"), workers=4)
    for name in ("final", "sup", "lq", "occupation"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    assert a.table("final").to_csv() == b.table("final").to_csv()


def test_error_table_csv(gbm_result):
    lines = gbm_result.table("final").to_csv().splitlines()
    assert lines[0] == "n,error,std_error,M,p,q,scheme,reference"
    assert lines[1].endswith(",2000,2.0,inf,em,closed_form_gbm")


def _table(ns, errs):
    return ErrorTable(tuple(ErrorRow(n, e, 0.0, 1) for n, e in zip(ns, errs)))


@pytest.mark.parametrize("power, slope", [(-0.5, -0.5), (0.0, 0.0), (-1.0, -1.0)])
def test_fit_rate_exact(power, slope):
    ns = [4, 16, 64]
    fit = fit_rate(_table(ns, [3.0 * n ** power for n in ns]))
    assert fit.slope == pytest.approx(slope, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)


def test_fit_rate_drops_nonpositive():
    with pytest.warns(UserWarning):
        fit = fit_rate(_table([1, 2, 4, 8], [0.0, 1.0, 0.5, 0.25]))
    assert fit.slope == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        with pytest.warns(UserWarning):
            fit_rate(_table([1, 2, 4], [0.0, 1.0, 0.5]))
