"""
Predicted versus simulated steady-state MSD
===========================================

The steady-state predictor needs only the input covariance, the constraints,
the step size, the kernel width and the noise law. Here it is checked against
a short Monte-Carlo run for Gaussian and binary disturbances, and refused for
Cauchy noise, whose second moment does not exist.
"""

from cmcc import CauchyNoise, TheoryInputs, steady_state_msd
from cmcc.config import parse_config
from cmcc.errors import InfiniteMomentError
from cmcc.experiments import build_problem, run_theory_validation

for noise, sigma in (({"type": "gaussian", "variance": 0.81}, 8.0), ({"type": "binary"}, 6.0)):
    cfg = parse_config(
        {
            "scenario": "theory-validation",
            "noise": noise,
            "algos": [{"name": "CMCC", "eta": 0.01, "sigma": sigma}],
            "runs": 100,
            "iterations": 5000,
            "master_seed": 11,
        }
    )
    [res] = run_theory_validation(cfg)
    pred = res.theory_overlay
    print(
        f"{noise['type']:8s} simulated {res.steady_db('CMCC'):6.2f} dB, predicted {pred.S_db:6.2f} dB "
        f"(E[g]={pred.Eg:.4f}, E[g^2]={pred.Eg2:.4f}, eta_max={pred.eta_max:.3f})"
    )

problem = build_problem(cfg)
try:
    steady_state_msd(TheoryInputs(problem.R, problem.cs, problem.W_true, 0.01, 2.0, CauchyNoise(scale=0.1)))
except InfiniteMomentError as exc:
    print("cauchy   no prediction:", exc)
