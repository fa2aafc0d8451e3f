import pytest

from ulmc.engine import Simulator, TimedModel, TraceError, parse_trace, render_trace, simulate_run, zone_reach
from ulmc.engine.trace import model_hash
from ulmc.fixtures import password_source, read_fixture
from ulmc.frontend import build_network, parse_subset_ir
from ulmc.modelfile import parse_program
from ulmc.timing import load_omega

REF = load_omega(read_fixture("reference.omg"))


@pytest.fixture(scope="module")
def buggy():
    return TimedModel(parse_program(read_fixture("petersons_buggy.ul")), REF)


def both_crit(s):
    return s.locations == ("Crit", "Crit")


def test_witness_round_trip(buggy):
    res = zone_reach(buggy, both_crit)
    text = render_trace(res.trace, buggy.net)
    assert text.startswith("# ulmc trace\n")
    back = parse_trace(text, buggy)
    assert back.items == res.trace.items
    assert back.final == res.trace.final and both_crit(back.final.discrete)


def test_header_fields(buggy):
    res = zone_reach(buggy, both_crit)
    res.trace.model_hash = model_hash("x", "y")
    res.trace.seed = 9
    back = parse_trace(render_trace(res.trace, buggy.net), buggy)
    assert back.model_hash == model_hash("x", "y") and back.seed == 9


def test_nondet_values_round_trip():
    net = build_network(parse_subset_ir(password_source(2, binary=True)), ["main"], 256)
    sim = Simulator(net, REF)
    for seed in range(5):
        t = simulate_run(net, REF, seed, 1000)
        text = render_trace(t, net)
        assert "[nondet: " in text
        back = parse_trace(text, sim.model, time_scale=1000)
        assert back.items == t.items and back.final == t.final and back.end_reason == t.end_reason


def test_fractional_delays_printed_exactly():
    net = build_network(parse_subset_ir(password_source(2, binary=True)), ["main"], 256)
    t = simulate_run(net, REF, 1, 1000)
    delays = [l.split()[1] for l in render_trace(t, net).splitlines() if l.startswith("delay")]
    assert delays and any("." in d for d in delays)


def test_model_hash_separates_inputs():
    assert model_hash("ab", "c") != model_hash("a", "bc")


@pytest.mark.parametrize("text, msg", [
    ("fire nobody entry -> x\n", "unknown process"),
    ("fire petersons1 entry -> nowhere\n", "no enabled edge"),
    ("fire petersons1 entry\n", "expected"),
    ("hop 3\n", "unexpected"),
    ("delay 1/2\n", "multiple"),
])
def test_errors(buggy, text, msg):
    with pytest.raises(TraceError, match=msg) as exc:
        parse_trace("# ulmc trace\n" + text, buggy)
    assert "line 2" in str(exc.value)
