import random

import pytest

from ulmc.cfa import CompiledNetwork, validate
from ulmc.engine import TimedModel, Verdict, zone_reach
from ulmc.fixtures import PETERSONS_ENTRIES, password_source, read_fixture
from ulmc.frontend import (
    FrameOverflow, PhiNotSupported, RecursionDetected, SirSyntaxError, UnknownFunction, UnsupportedInstruction,
    UnsupportedPattern, build_network, inline_calls, parse_subset_ir, render_ir,
)
from ulmc.timing import load_omega
from ulmc.ulcore import Op, UlType, typecheck_sequence

import irgen

OMEGA = load_omega(read_fixture("reference.omg"))


def lower(text, entries=("main",), memsize=256):
    return build_network(parse_subset_ir(text), list(entries), memsize)


def run_to_end(net):
    """Fire the single enabled edge until a sink; returns ('error', None) or
    ('term', register values)."""
    cn = CompiledNetwork(net)
    s = cn.initial()
    for _ in range(100_000):
        if s.error:
            return "error", None
        if cn.at_sinks(s):
            return "term", dict(zip(cn.local_names[0], s.locals[0]))
        (succ,) = [t for i, k, _ in cn.enabled(s) for _, t in cn.branches(s, i, k)]
        s = succ
    raise AssertionError("no termination")


class TestParse:
    def test_password_module(self):
        mod = parse_subset_ir(read_fixture("password.sir"))
        assert len(mod.functions) == 1
        assert sorted(mod.declarations) == ["assert", "read"]

    def test_phi(self):
        src = "define i32 @main() {\nentry:\n  %x = phi i32 [0, %entry]\n  ret i32 0\n}\n"
        with pytest.raises(PhiNotSupported):
            parse_subset_ir(src)

    def test_empty(self):
        mod = parse_subset_ir("")
        assert mod.functions == [] and mod.globals == []

    @pytest.mark.parametrize("instr", ["%x = fadd float 1.0, 2.0", "%x = select i1 true, i32 1, i32 2",
                                       "%x = and i32 1, 2"])
    def test_unsupported_named(self, instr):
        src = f"define i32 @main() {{\nentry:\n  {instr}\n  ret i32 0\n}}\n"
        with pytest.raises(UnsupportedInstruction) as exc:
            parse_subset_ir(src)
        assert instr.split()[2] in str(exc.value)

    def test_missing_terminator(self):
        with pytest.raises(SirSyntaxError):
            parse_subset_ir("define i32 @main() {\nentry:\n  %x = add i32 1, 2\n}\n")

    def test_undeclared_callee(self):
        with pytest.raises(SirSyntaxError):
            parse_subset_ir("define i32 @main() {\nentry:\n  call void @nope()\n  ret i32 0\n}\n")

    def test_attributes_ignored(self):
        src = ("define dso_local i32 @main() {\nentry:\n  %a = alloca i32, align 4\n"
               "  store i32 1, ptr %a, align 4\n  %b = add nsw i32 1, 2\n  ret i32 0\n}\n")
        assert [i.op for i in parse_subset_ir(src).functions[0].blocks[0].instrs] == ["alloca", "store", "add"]


class TestInline:
    HELPER = """\
define i8 @f(i8 %y) {
entry:
  %z = add i8 %y, 1
  ret i8 %z
}
define i32 @main() {
entry:
  %r = call i8 @f(i8 4)
  ret i32 0
}
"""

    def test_helper_spliced(self):
        fn = inline_calls(parse_subset_ir(self.HELPER), "main")
        text = render_ir(fn)
        assert "call" not in text
        assert "%f.0.z" in text

    def test_recursion(self):
        src = "define i32 @main() {\nentry:\n  %x = call i32 @main()\n  ret i32 0\n}\n"
        with pytest.raises(RecursionDetected, match="main"):
            inline_calls(parse_subset_ir(src), "main")

    def test_mutual_recursion_names_cycle(self):
        src = ("define void @a() {\nentry:\n  call void @b()\n  ret void\n}\n"
               "define void @b() {\nentry:\n  call void @a()\n  ret void\n}\n")
        with pytest.raises(RecursionDetected, match="a.*b"):
            inline_calls(parse_subset_ir(src), "a")

    def test_declared_calls_remain(self):
        mod = parse_subset_ir(read_fixture("password.sir"))
        fn = inline_calls(mod, "main")
        callees = {i.extra[0] for b in fn.blocks for i in b.instrs if i.op == "call"}
        assert callees == {"read", "assert"}
        assert [b.label for b in fn.blocks] == [b.label for b in mod.functions[0].blocks]

    def test_helper_result(self):
        net = lower(self.HELPER)
        status, regs = run_to_end(net)
        assert status == "term" and regs["%r"] == 5

    @pytest.mark.parametrize("seed", range(100))
    def test_two_level_call_trees(self, seed):
        src = irgen.random_call_tree(random.Random(seed))
        mod = parse_subset_ir(src)
        try:
            _, expect = irgen.interpret(mod, "main")
        except irgen.Fault:
            expect = None
        status, regs = run_to_end(lower(src))
        if expect is None:
            assert status == "error"
        else:
            assert status == "term"
            assert {k: regs[k] for k in expect} == expect


class TestLower:
    def test_conditional_branch(self):
        src = ("define i32 @main() {\nentry:\n  %c = icmp eq i32 1, 1\n  br i1 %c, label %t, label %f\n"
               "t:\n  ret i32 0\nf:\n  ret i32 1\n}\n")
        cfa = lower(src).cfas[0]
        guarded = [e for e in cfa.edges if e.seq.guard is not None]
        assert {(e.seq.guard.op, e.dst) for e in guarded} == {(Op.ASSUME, "t"), (Op.NEGASSUME, "f")}
        assert len({e.src for e in guarded}) == 1
        assert len({e.seq.guard.args[0] for e in guarded}) == 1

    def test_read_becomes_nondet(self):
        src = "declare i8 @read()\ndefine i32 @main() {\nentry:\n  %k = call i8 @read()\n  ret i32 0\n}\n"
        cfa = lower(src).cfas[0]
        nd = [i for e in cfa.edges for i in e.seq.body if i.op is Op.NONDET]
        assert len(nd) == 1 and nd[0].dest.name == "%k" and nd[0].dest.type is UlType.INT8

    def test_assert_reaches_violation(self):
        src = ("declare void @assert(i32)\ndefine i32 @main() {\nentry:\n  call void @assert(i32 0)\n"
               "  ret i32 0\n}\n")
        net = lower(src)
        cfa = net.cfas[0]
        assert cfa.assert_violation == "AssertViolation"
        res = zone_reach(TimedModel(net, OMEGA), lambda s: s.locations[0] == "AssertViolation")
        assert res.verdict is Verdict.REACHABLE

    def test_passing_assert_does_not(self):
        src = ("declare void @assert(i32)\ndefine i32 @main() {\nentry:\n  call void @assert(i32 1)\n"
               "  ret i32 0\n}\n")
        net = lower(src)
        res = zone_reach(TimedModel(net, OMEGA), lambda s: s.assert_hit)
        assert res.verdict is Verdict.UNREACHABLE

    def test_frame_overflow(self):
        src = "define i32 @main() {\nentry:\n  %a = alloca [300 x i8]\n  ret i32 0\n}\n"
        with pytest.raises(FrameOverflow):
            lower(src, memsize=256)

    def test_pointer_returning_declaration(self):
        src = "declare ptr @get()\ndefine i32 @main() {\nentry:\n  %p = call ptr @get()\n  ret i32 0\n}\n"
        with pytest.raises(UnsupportedPattern):
            lower(src)

    @pytest.mark.parametrize("chunk", range(10))
    def test_lowering_matches_interpreter(self, chunk):
        rng = random.Random(500 + chunk)
        for _ in range(100):
            src = irgen.random_program(rng)
            mod = parse_subset_ir(src)
            try:
                _, expect = irgen.interpret(mod, "main")
            except irgen.Fault:
                expect = None
            status, regs = run_to_end(lower(src))
            if expect is None:
                assert status == "error", src
            else:
                assert status == "term", src
                assert {k: regs[k] for k in expect} == expect, src


class TestBuildNetwork:
    def test_peterson(self):
        net = build_network(parse_subset_ir(read_fixture("petersons.sir")), PETERSONS_ENTRIES, 256)
        assert len(net.cfas) == 2
        assert {"turn", "oneflag", "secondflag", "crit1", "crit2"} <= {g.name for g in net.globals}
        assert validate(net) == []
        for cfa in net.cfas:
            gamma = net.gamma(cfa)
            for e in cfa.edges:
                typecheck_sequence(e.seq, gamma)

    def test_single_entry(self):
        net = build_network(parse_subset_ir(password_source(3)), ["main"], 64)
        assert len(net.cfas) == 1

    def test_unknown_entry(self):
        with pytest.raises(UnknownFunction):
            build_network(parse_subset_ir(read_fixture("petersons.sir")), ["nobody"], 256)

    def test_branches_come_in_pairs(self):
        net = build_network(parse_subset_ir(read_fixture("password.sir")), ["main"], 256, normalized=False)
        for cfa in net.cfas:
            by_src = {}
            for e in cfa.edges:
                g = e.seq.guard
                if g is not None and g.op in (Op.ASSUME, Op.NEGASSUME):
                    by_src.setdefault(e.src, []).append((g.op, g.args[0]))
            for pair in by_src.values():
                assert sorted(op.value for op, _ in pair) == ["Assume", "NegAssume"]
                assert pair[0][1] == pair[1][1]

    @pytest.mark.parametrize("name, entries", [("petersons", PETERSONS_ENTRIES),
                                               ("petersons_buggy", PETERSONS_ENTRIES),
                                               ("password", ["main"])])
    def test_shipped_models_in_sync(self, name, entries):
        from ulmc.modelfile import parse_program

        net = build_network(parse_subset_ir(read_fixture(name + ".sir")), entries, 256)
        assert parse_program(read_fixture(name + ".ul")) == net

    def test_password_fixture_source(self):
        assert read_fixture("password.sir") == password_source(6)
