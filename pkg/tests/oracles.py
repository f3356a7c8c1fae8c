"""Independent reference implementations used as test oracles.

They are written for clarity, not speed, and share no code with the package.
"""
import math
from fractions import Fraction


def log_distance_rssi(tx_power, distance, exponent, reference_loss):
    return tx_power - (reference_loss + 10.0 * exponent * math.log10(distance))


def stump_oracle(values, labels):
    """Exhaustive stump search: every midpoint, both sides, scored by accuracy.

    Returns (best accuracy, list of (tau, side) achieving it).
    """
    distinct = sorted(set(values))
    best, winners = -1, []
    for lo, hi in zip(distinct, distinct[1:]):
        tau = (lo + hi) / 2
        for side in ("Below", "Above"):
            correct = 0
            for v, failed in zip(values, labels):
                predicted = v < tau if side == "Below" else v > tau
                correct += predicted == failed
            if correct > best:
                best, winners = correct, [(tau, side)]
            elif correct == best:
                winners.append((tau, side))
    return best / len(values), winners


def least_squares(points):
    """Closed-form OLS slope and intercept (at x = 0) with plain sums."""
    n = len(points)
    sx = sum(x for x, _ in points)
    sy = sum(y for _, y in points)
    sxx = sum(x * x for x, _ in points)
    sxy = sum(x * y for x, y in points)
    slope = (n * sxy - sx * sy) / (n * sxx - sx * sx)
    return slope, (sy - slope * sx) / n


def first_tick_reaching(intercept, slope, tau, start, limit=10**6):
    """Step tick by tick from ``start`` until the exact line value reaches tau from above."""
    b, m, tau = Fraction(intercept), Fraction(slope), Fraction(tau)
    for t in range(start, start + limit):
        if b + m * t <= tau:
            return t
    return None


def availability_from_trace(rows):
    """(availability, mtbf) from trace rows; one label per tick."""
    labels = {}
    for r in rows:
        labels.setdefault(int(r["tick"]), r["app_label"])
    normal = [labels[t] == "Normal" for t in sorted(labels)]
    transitions = sum(1 for prev, cur in zip([True] + normal, normal) if prev and not cur)
    ticks_normal = sum(normal)
    mtbf = math.inf if transitions == 0 else ticks_normal / transitions
    return ticks_normal / len(normal), mtbf


def audit_ledger(rows, e_tx, e_rx, e_idle, e_sleep):
    """Problems found in energy-ledger rows: wrong decrements or unexplained rises."""
    problems = []
    last = {}
    for r in rows:
        node = r["node_id"]
        before, after = float(r["battery_before"]), float(r["battery_after"])
        awake, asleep = float(r["awake_s"]), float(r["sleep_s"])
        if awake + asleep > 0:
            cost = (e_tx * int(r["broadcasts"]) + e_rx * int(r["receptions"])
                    + e_idle * awake + e_sleep * asleep) * float(r["drain"])
            if after != max(0.0, before - cost):
                problems.append(f"tick {r['tick']} node {node}: decrement != itemized cost")
        elif after != before:
            problems.append(f"tick {r['tick']} node {node}: dead node battery changed")
        if node in last and r["restored"] != "1" and before != last[node]:
            problems.append(f"tick {r['tick']} node {node}: battery changed between ticks")
        last[node] = after
    return problems
