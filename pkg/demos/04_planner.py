"""Choose L, M and h for a target kernel accuracy.

The planner turns an accuracy target eps into a truncation level, a sample
size threshold and an admissible mesh-size window, then re-checks every
inequality it relied on.

Run with ``python demos/04_planner.py``.
"""
from covrecon.planner import REGIMES, brownian_inputs, brownian_plan, plan_parameters, verify_plan

print(f"{'eps':>6} {'L':>4} {'M':>10} {'h':>11}  verified")
for eps in (0.2, 0.1, 0.05, 0.02, 0.01):
    plan = brownian_plan(eps)
    ok = all(passed for _, passed in verify_plan(plan, brownian_inputs(eps)))
    print(f"{eps:6.2f} {plan.L:4d} {plan.M:10d} {plan.h:11.3e}  {ok}")

print("\nregimes at eps = 0.05")
inp = brownian_inputs(0.05)
for regime in REGIMES:
    plan = plan_parameters(inp, regime)
    window = "empty" if plan.vacuous else f"[{plan.h_lo:.2e}, {plan.h_hi:.2e}]"
    cap = " (search cap hit)" if plan.capped else ""
    print(f"  {regime:8s} M={plan.M}{cap}  h window {window}")
