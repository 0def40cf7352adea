from proharq.controller import DecisionContext
from proharq.mac import QueueState
from proharq.scenario import Scenario
from proharq.strategies import Adaptive, Fixed, Reactive, fixed_decide, make_strategy, reactive_decide


def _ctx(cluster_index=1, rtx=1, acc=0.0, q=QueueState(), target=15.0, packets=1):
    return DecisionContext(q, cluster_index, rtx, acc, target, 0, packets, 1850)


def test_reactive_one_per_nack():
    assert reactive_decide(_ctx(1, 1), 10).r == 1
    assert reactive_decide(_ctx(1, 10), 10) is None


def test_reactive_ten_nacks():
    rs = []
    rtx, c = 1, 1
    while (d := reactive_decide(_ctx(c, rtx), 10)) is not None:
        rs.append((d.cluster_index, d.r))
        rtx += d.r
        c += 1
    assert rs == [(i, 1) for i in range(1, 10)]


def test_fixed_patterns():
    assert fixed_decide(_ctx(1, 1), (2, 2, 2, 2, 2), 10).r == 2
    assert fixed_decide(_ctx(4, 10), (3, 3, 3, 1), 10) is None
    assert fixed_decide(_ctx(4, 9), (3, 3, 3, 1), 10).r == 1
    assert fixed_decide(_ctx(1, 8), (3, 3, 3, 1), 10).r == 2
    assert fixed_decide(_ctx(6, 1), (2, 2, 2, 2, 2), 10) is None


def test_make_strategy():
    assert isinstance(make_strategy(Scenario(strategy="reactive")), Reactive)
    f = make_strategy(Scenario(strategy="fixed(3,3,3,1)"))
    assert isinstance(f, Fixed) and f.max_cluster_index == 4
    a = make_strategy(Scenario())
    assert isinstance(a, Adaptive) and a.max_cluster_index == 5


def test_adaptive_respects_budget():
    a = make_strategy(Scenario())
    d = a.decide(_ctx(2, 7, acc=0.0))
    assert d.r in (2, 3)
    d = a.decide(_ctx(3, 9, acc=0.0))
    assert d.r == 1
    assert a.decide(_ctx(3, 10)) is None
