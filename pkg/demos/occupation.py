"""
Time spent on the wrong side of the breakpoint
==============================================

Between grid points the continuous scheme may cross the breakpoint while
its coefficients are still frozen at the last grid value. The fraction of
time this happens shrinks like ``1/sqrt(n)``. Two fine resolutions are
compared to see that the statistic is resolved.
"""

from emdisc import StudyConfig, fit_rate, occupation_study, step_drift

problem = step_drift([0.0], [1.0, -1.0])
for n_fine in (2 ** 12, 2 ** 14):
    cfg = StudyConfig(n_list=tuple(2 ** e for e in range(4, 11)), n_fine=n_fine, M=500, seed=3)
    table = occupation_study(cfg, problem)
    mean = fit_rate(table.error_table(0.0, "mean"))
    rms = fit_rate(table.error_table(0.0, "pmean"))
    print(f"n_fine={n_fine}: slope of E[meas] {mean.slope:+.3f}, of E[meas^2]^(1/2) {rms.slope:+.3f}")
    print(table.to_csv())
