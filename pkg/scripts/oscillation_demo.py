"""Constant versus diminishing steps on f(x) = min(|x|, 1).

With v = 2 and alpha = 1/2 the iterates bounce between 1/2 and -1/2 for
ever. The diminishing rule v_k = 2/k started from the same point reaches
the minimizer.
"""

from fpqsm.problems import diagnostic_capped_problem
from fpqsm.solver import AlphaSchedule, StepSchedule, detect_oscillation, fpqsm_run


def show(label, rec, head=8):
    xs = [float(p[0]) for p in rec.point_trace[:head]]
    print(f"{label}: {rec.iterations} iterations, stop={rec.stop_reason}, best f={rec.best_value:.3g}")
    print("  first iterates:", " ".join(f"{x:+.4f}" for x in xs))
    print("  oscillating tail:", detect_oscillation(rec))


def main():
    prob = diagnostic_capped_problem(1.0, 1)
    half = AlphaSchedule.constant(0.5)
    for label, steps in (("constant v=2", StepSchedule.constant(2.0)), ("diminishing v=2/k", StepSchedule.diminishing(2.0))):
        rec = fpqsm_run(prob.oracle, prob.T, prob.P_D, steps, half, [1.5], max_iter=1000, record_points=True)
        show(label, rec)


if __name__ == "__main__":
    main()
