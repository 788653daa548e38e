"""Scaled versions of the three parameter sweeps on cubic meshes.

Each sweep varies one of N (number of subdomains), H/delta (relative overlap)
and H/h (subdomain resolution) with the other two held fixed, and prints the
PCG iteration count and the Lanczos condition estimate. Expect flat behaviour
in N and H/h and growth roughly linear in H/delta.
"""

# %%
from vemschwarz.harness import ExperimentConfig, format_table, run_experiment

sweeps = {
    "N, H/h = 4, H/delta = 2": ExperimentConfig(n=8, partition="structured:2", layers=2, sweep="N:8,27,64"),
    "H/delta, N = 27, H/h = 8": ExperimentConfig(n=24, partition="structured:3", layers=1, sweep="Hdelta:2,4,8"),
    "H/h, N = 8, H/delta = 4": ExperimentConfig(n=16, partition="structured:2", layers=2, sweep="Hh:8,16"),
}

for title, config in sweeps.items():
    print(f"\n{title}")
    print(format_table(run_experiment(config)))

# %% Random piecewise constant coefficients in [1, 1e3].
print("\nrho log-uniform in [1, 1e3], N = 64, H/h = 4, H/delta = 2")
for seed in range(3):
    (row,) = run_experiment(ExperimentConfig(n=16, partition="structured:4", layers=2, rho="disc", seed=seed))
    print(f"  seed {seed}: I = {row.iters}, kappa = {row.kappa:.2f}")
