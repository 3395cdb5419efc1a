"""How long an almost-right player survives, as a function of its error.

The inaccurate player is a fixed rule at total-variation distance eps
from the truth, paying about 2 eps^2 nats per step.  Its survival time
(how long its seed-mean wealth stays above one half) is set by when the
competitor's regret curve crosses that linear bleed:

* constant-regret competitor  -> tau ~ eps^-2
* logarithmic (UCB)           -> tau ~ eps^-3 (up to log corrections)
* square-root (gradient)      -> tau ~ eps^-4

Reduced seed counts here; the acceptance suite runs the full version.
"""

from marketsel.catalog import builtin_sweeps, run_sweep

for name, sweep in builtin_sweeps().items():
    result = run_sweep(sweep, n_seeds=30)
    print(f"\n{name}: {sweep.description}")
    for point in result.points:
        flag = " (censored)" if point["censored"] else ""
        print(f"  eps={point['eps']:<5g} tau={point['tau']:>7}{flag}")
    if result.fit:
        print(
            f"  fitted exponent {result.fit['slope']:.2f} "
            f"(target {sweep.target_slope}, R^2 {result.fit['r_squared']:.3f})"
        )
    else:
        print("  fit unavailable at this seed count")
