"""Independent spreadsheet-style oracle for the 10-day simulator fixture.

Plain Python, no package imports: each day is computed row by row the
way a spreadsheet would. Run it to regenerate the frozen values used in
test_reservoir.py and test_objectives.py.
"""

import math

Q = [0.0, 2.0, 40.0, 200.0, 3.0, 0.0, 60.0, 1.0, 0.0, 5.0]
S0 = 50.0
CAP = 100.0
QHP = 20.0
MEF = 5.0
DD = 12.0
FT = 30.0
C, R = 0.5, 0.5
ETA, GAMMA, HPCAP = 0.9, 9810.0, 0.05
YEARS = 10 / 365  # ten days of a 365-day water year


def head(s):
    return 10.0 + (50.0 - 10.0) * s / 100.0


def run(mef_first):
    s = S0
    rows = []
    for q in Q:
        avail = s + q
        target = min(QHP, QHP * math.exp(-((s / CAP - C) ** 2) / R ** 2))
        if mef_first:
            efr = min(MEF, avail); avail -= efr
            dr = min(DD, avail); avail -= dr
            hpr = min(target, avail); avail -= hpr
        else:
            dr = min(DD, avail); avail -= dr
            hpr = min(target, avail); avail -= hpr
            efr = min(MEF, avail); avail -= efr
        ewr = max(avail - CAP, 0.0)
        s = avail - ewr
        rows.append((s, efr, dr, hpr, ewr, head(s)))
    return rows


def objectives(rows):
    energy = 0.0
    deficit = 0.0
    ef = ft = 0
    for s, efr, dr, hpr, ewr, h in rows:
        p = min(ETA * GAMMA * (hpr * 1e6 / 86400) * h * 1e-9, HPCAP)
        energy += 24 * p
        deficit += max(DD - dr, 0.0)
        ef += efr >= MEF
        ft += (efr + hpr + ewr) < FT
    return energy / YEARS, deficit / YEARS, 100 * ef / len(rows), 100 * ft / len(rows)


if __name__ == "__main__":
    for name, flag in (("MEF_FIRST", True), ("DEMAND_FIRST", False)):
        rows = run(flag)
        print(name)
        for r in rows:
            print("    (" + ", ".join(repr(x) for x in r) + "),")
        print("   ", tuple(objectives(rows)))
