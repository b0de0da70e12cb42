#!/usr/bin/env python3
"""The stepsize-policy validator.

Every policy ships with the side conditions its convergence guarantee
requires (coupling identity, extrapolation-weight bounds, theta growth and
monotonicity, final-step bounds).  The validator checks them over a horizon
in log space, so geometrically growing aggregation weights are fine.

Run:  python3 demos/04_schedule_validation.py
"""

from oevi import schedules as S

L, mu, k = 2.0, 0.02, 10_000
print(f"constants: L={L}, mu={mu}, condition number {L / mu:.0f}, horizon k={k}\n")

for name in S.POLICY_NAMES:
    sched = S.make_schedule(name, L=L, mu=mu, sigma=1.0, V1=1.0, k=k, b=5, Lbar=L)
    report = S.validate(sched, k)
    conds = ", ".join(report.results) if report.results else "none claimed"
    print(f"{name:<11} {'PASS' if report.passed else 'FAIL'}  [{conds}]")

print()
print("A corrupted policy (stepsize doubled) is caught:")


class Doubled(S.OEGsmviSchedule):
    def table(self, kk):
        tab = super().table(kk)
        tab.gamma = tab.gamma * 2.0
        return tab


print(S.validate(Doubled(L, mu), k).summary())

print()
print("The same check is exposed on the command line:")
print("  oevi validate-schedule OE-GSMVI --L 2.0 --mu 0.02 --k 10000")
print("  oevi validate-schedule SBOE-GSMVI --L 2.0 --mu 0.02 --k 10000 --b 5")
