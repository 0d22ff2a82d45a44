"""
Strong convergence for geometric Brownian motion
================================================

With smooth coefficients the Euler-Maruyama scheme converges at rate
1/2 in the root mean square sense. The exact solution is known in
closed form, so no fine reference is needed.
"""

from emdisc import FunctionSpec, PiecewiseDrift, SdeProblem, StudyConfig, final_time_error, fit_rate

gbm = SdeProblem(1.0, PiecewiseDrift.lipschitz(FunctionSpec.affine(0.0, 0.05)),
                 FunctionSpec.affine(0.0, 0.2))
cfg = StudyConfig(n_list=tuple(2 ** e for e in range(4, 11)), n_fine=2 ** 10, M=2000,
                  p=2.0, reference="closed_form_gbm", seed=7)

table = final_time_error(cfg, gbm)
print(table.to_csv())

fit = fit_rate(table)
print(f"fitted slope {fit.slope:.3f} (expected about -0.5), r^2 = {fit.r_squared:.4f}")
