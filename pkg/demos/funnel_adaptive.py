"""Adaptive preconditioners on the funnel, axis-aligned and rotated.

RMSProp keeps a diagonal running average of squared gradients, so it can
only rescale the coordinate axes. Adagrad (full matrix) keeps the whole outer
product, which lets it rescale along directions that are not axis-aligned.
The KS distance of the recovered y-marginal to N(0, 9) is printed per arm.

On the axis-aligned funnel RMSProp clearly beats the identity. On the
rotated funnel the full-matrix accumulator usually edges out RMSProp, but
at this step size neither adaptive schedule beats the plain identity there.

    python demos/funnel_adaptive.py [repetitions]
"""

import sys

import numpy as np

from slmc import preset, run_experiment


def main(repetitions=5):
    repetitions = int(repetitions)
    for name in ("fig4-funnel", "fig5-rotated"):
        report = run_experiment(preset(name, repetitions=repetitions), threads=repetitions)
        print(f"{name}: KS distance of the y-marginal (lower is better)")
        for arm in report.arms():
            vals = report.final_values(arm, "ks_y")
            diverged = sum(s.aborted for s in report.select(arm, "ks_y"))
            extra = f", {diverged} diverged" if diverged else ""
            print(f"  {arm:<10} mean {np.mean(vals):.3f}  min {vals.min():.3f}  max {vals.max():.3f}{extra}")


if __name__ == "__main__":
    main(*sys.argv[1:])
