import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from ms3l import sensor_policy as sp
from ms3l.sensor_policy import Branch, DepthSummary, branch_action, decide, depth_reject
from ms3l.sensors import DEPTH_SENTINEL, DepthMap


def brute_summary(values):
    """Independent scalar transcription of the rejection rule."""
    h, w = values.shape
    vals = [float(v) for row in values.astype(np.float64) for v in row]
    valid = [v for v in vals if v != DEPTH_SENTINEL]
    rejected = 0
    keep = np.zeros((h, w), dtype=bool)
    if valid:
        mu = sum(valid) / len(valid)
        var = sum((v - mu) ** 2 for v in valid) / len(valid)
        thr = mu + 2.0 * math.sqrt(var)
        for r in range(h):
            for c in range(w):
                v = float(values[r, c])
                if v == DEPTH_SENTINEL or v > thr:
                    rejected += 1
                else:
                    keep[r, c] = True
    else:
        rejected = h * w
    third = w // 3
    spans = [(0, third), (third, w - third), (w - third, w)]
    means = []
    for a, b in spans:
        acc, n = 0.0, 0
        for r in range(h):
            for c in range(a, b):
                if keep[r, c]:
                    acc += float(values[r, c])
                    n += 1
        means.append(acc / n if n else math.inf)
    return means[0], means[1], means[2], rejected / (h * w)


def decision_table(left, mid, right, frac, us_l, us_r):
    """Independent flat transcription of the FSM as a lookup cascade."""
    if frac <= 0.3:
        if mid < 0.8:
            if left >= right:
                return Branch.AVOID_LEFT
            return Branch.AVOID_RIGHT
        if 0.8 <= mid < 1.6:
            return Branch.DECEL
        return Branch.FORWARD
    if us_l < 0.2 or us_r < 0.2:
        if us_l <= us_r:
            return Branch.US_BACK_RIGHT
        return Branch.US_BACK_LEFT
    if us_l < 0.5:
        return Branch.US_TURN_RIGHT
    if us_r < 0.5:
        return Branch.US_TURN_LEFT
    return Branch.US_FORWARD


def test_depth_reject_hand_case():
    # 3 x 6 map: plain values with one sentinel and one far outlier
    v = np.array([
        [1.0, 1.0, 2.0, 2.0, 3.0, 3.0],
        [1.0, 0.0, 2.0, 2.0, 3.0, 3.0],
        [1.0, 1.0, 2.0, 9.0, 3.0, 3.0],
    ], dtype=np.float32)
    s = depth_reject(DepthMap(values=v))
    # valid pixels: 17 values, mean 2.4118, std 1.7480 -> threshold 5.9078
    # so 9.0 is rejected along with the sentinel
    assert abs(s.rejected_frac - 2 / 18) < 1e-12
    assert s.trusted
    assert abs(s.left - 1.0) < 1e-12
    assert abs(s.mid - 2.0) < 1e-12
    assert abs(s.right - 3.0) < 1e-12


def test_depth_reject_all_sentinel():
    s = depth_reject(DepthMap(values=np.zeros((4, 6), dtype=np.float32)))
    assert s.rejected_frac == 1.0
    assert not s.trusted
    assert s.left == math.inf and s.mid == math.inf and s.right == math.inf


def test_depth_reject_matches_bruteforce_random():
    rng = np.random.default_rng(17)
    for _ in range(40):
        h = int(rng.integers(2, 9))
        w = int(rng.integers(1, 5)) * 3
        v = rng.uniform(0.5, 6.0, size=(h, w)).astype(np.float32)
        v[rng.random((h, w)) < 0.15] = DEPTH_SENTINEL
        v[rng.random((h, w)) < 0.08] = rng.uniform(10, 20)
        got = depth_reject(DepthMap(values=v))
        bl, bm, br, bf = brute_summary(v)
        assert abs(got.rejected_frac - bf) < 1e-12
        for a, b in ((got.left, bl), (got.mid, bm), (got.right, br)):
            if math.isinf(b):
                assert math.isinf(a)
            else:
                assert abs(a - b) < 1e-9


def test_decide_strict_boundaries():
    mk = lambda m, f=0.0: DepthSummary(left=2.0, mid=m, right=1.0, rejected_frac=f)
    assert decide(mk(0.8 - 1e-12), 1, 1) == Branch.AVOID_LEFT
    assert decide(mk(0.8), 1, 1) == Branch.DECEL           # boundary goes to DECEL
    assert decide(mk(1.6 - 1e-9), 1, 1) == Branch.DECEL
    assert decide(mk(1.6), 1, 1) == Branch.FORWARD         # boundary goes to FORWARD
    assert decide(mk(math.inf), 1, 1) == Branch.FORWARD

    # trust ratio boundary: exactly 0.3 is still trusted
    assert decide(DepthSummary(2, 2, 2, 0.3), 0.1, 0.1) == Branch.FORWARD
    above = np.nextafter(0.3, 1.0)
    assert decide(DepthSummary(2, 2, 2, above), 1, 1) == Branch.US_FORWARD

    # ultrasonic boundaries are strict too
    assert decide(DepthSummary(2, 2, 2, 0.9), 0.2, 3.0) == Branch.US_TURN_RIGHT
    assert decide(DepthSummary(2, 2, 2, 0.9), 0.2 - 1e-12, 3.0) == Branch.US_BACK_RIGHT
    assert decide(DepthSummary(2, 2, 2, 0.9), 0.5, 3.0) == Branch.US_FORWARD
    assert decide(DepthSummary(2, 2, 2, 0.9), 3.0, 0.5 - 1e-12) == Branch.US_TURN_LEFT


def test_decide_tie_breaks_left():
    t = DepthSummary(left=1.5, mid=0.5, right=1.5, rejected_frac=0.0)
    assert decide(t, 1, 1) == Branch.AVOID_LEFT
    # equal ultrasonic readings treat left as nearer: back off turning right
    assert decide(DepthSummary(2, 2, 2, 0.9), 0.1, 0.1) == Branch.US_BACK_RIGHT


def test_decide_infinite_sides():
    s = DepthSummary(left=math.inf, mid=0.5, right=4.0, rejected_frac=0.2)
    assert decide(s, 1, 1) == Branch.AVOID_LEFT
    s = DepthSummary(left=1.0, mid=0.5, right=math.inf, rejected_frac=0.2)
    assert decide(s, 1, 1) == Branch.AVOID_RIGHT


def test_branch_actions_frozen():
    assert branch_action(Branch.FORWARD) == sp.Action(0.6, 0.0)
    assert branch_action(Branch.DECEL) == sp.Action(0.3, 0.0)
    assert branch_action(Branch.AVOID_LEFT) == sp.Action(0.3, 0.4)
    assert branch_action(Branch.AVOID_RIGHT) == sp.Action(0.3, -0.4)
    assert branch_action(Branch.US_BACK_RIGHT) == sp.Action(-0.4, -0.4)
    assert branch_action(Branch.US_BACK_LEFT) == sp.Action(-0.4, 0.4)
    assert branch_action(Branch.US_TURN_LEFT) == sp.Action(0.3, 0.4)
    assert branch_action(Branch.US_TURN_RIGHT) == sp.Action(0.3, -0.4)
    assert branch_action(Branch.US_FORWARD) == sp.Action(0.6, 0.0)


@settings(max_examples=300, deadline=None)
@given(
    left=st.one_of(st.floats(0.0, 25.0), st.just(math.inf)),
    mid=st.one_of(st.floats(0.0, 25.0), st.just(math.inf)),
    right=st.one_of(st.floats(0.0, 25.0), st.just(math.inf)),
    frac=st.floats(0.0, 1.0),
    us_l=st.floats(0.05, 4.0),
    us_r=st.floats(0.05, 4.0),
)
def test_decide_matches_decision_table(left, mid, right, frac, us_l, us_r):
    s = DepthSummary(left=left, mid=mid, right=right, rejected_frac=frac)
    assert decide(s, us_l, us_r) == decision_table(left, mid, right, frac, us_l, us_r)
