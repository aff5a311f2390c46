"""A small Monte Carlo run: how fast do the loss and the inflection error shrink?

Uses 20 replications per sample size so that it finishes in a couple of
minutes; the acceptance tests use 100.

    python3 demos/convergence_rates.py
"""
from sshape import simbench as sb

NS = [100, 200, 500, 1000]

for signal in (sb.F4, sb.F3, sb.F1):
    res = sb.study(signal, sb.UNIFORM, sb.NoiseSpec(0.1, seed=1), NS, reps=20)
    print(f"\n{signal.name}: true inflection {signal.m0}")
    print("     n   mean loss   median |m - m0|")
    for row in res.summary():
        print(f"  {row['n']:4d}   {row['mean_l2n_loss']:.5f}    {row['median_inflection_err']:.5f}")
    slopes = res.slopes()
    print(f"  log-log slope of the mean loss: {slopes['mean_l2n_loss']:.3f}")
