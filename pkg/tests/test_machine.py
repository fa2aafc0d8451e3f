import random

import pytest
from hypothesis import given, strategies as st

from ulmc.machine import (
    AllocationError, Guard, MachineFault, Memory, Status, alloc, check_guard, eval_operand, exec_arith,
    exec_assign, exec_cast, exec_cmp, exec_memory, replay_chooser, step_sequence,
)
from ulmc.ulcore import Const, Instruction, InstructionSequence, Op, Register, UlType

import oracle

I8, I16, I32, I64 = UlType.INT8, UlType.INT16, UlType.INT32, UlType.INT64
BOOL, ADDR = UlType.BOOL, UlType.ADDR
r = Register("r", I8)
a, b = Register("a", I8), Register("b", I8)
w = Register("w", I16)
flag = Register("flag", BOOL)
p = Register("p", ADDR)


def arith(op, x, y, width=8):
    reg = Register("d", UlType.int_of_width(width))
    return exec_arith(Instruction(op, reg, (Const(x, width), Const(y, width))), {})["d"]


class TestOperands:
    def test_lookup(self):
        assert eval_operand(r, {"r": 0x2A}) == 0x2A

    def test_constants(self):
        assert eval_operand(Const(200, 8), {}) == 0xC8
        assert eval_operand(Const(-8, 8, signed=True), {}) == 0xF8


class TestArith:
    def test_wraparound(self):
        assert arith(Op.ADD, 200, 100) == 0x2C

    def test_signed_vs_unsigned_division(self):
        assert arith(Op.SDIV, 0xF8, 2) == 0xFC
        assert arith(Op.DIV, 0xF8, 2) == 0x7C

    def test_shifts(self):
        assert arith(Op.ASHR, 0x80, 1) == 0xC0
        assert arith(Op.LSHR, 0x80, 1) == 0x40
        assert arith(Op.LSHL, 0x81, 1) == 0x02

    def test_wide_shift_amounts(self):
        assert arith(Op.LSHL, 0xFF, 8) == 0
        assert arith(Op.LSHR, 0xFF, 200) == 0
        assert arith(Op.ASHR, 0x80, 9) == 0xFF
        assert arith(Op.ASHR, 0x7F, 9) == 0

    def test_division_by_zero(self):
        with pytest.raises(MachineFault):
            arith(Op.DIV, 5, 0)
        with pytest.raises(MachineFault):
            arith(Op.SDIV, 5, 0)

    def test_sdiv_overflow(self):
        with pytest.raises(MachineFault):
            arith(Op.SDIV, 0x80, 0xFF)

    def test_sdiv_truncates_toward_zero(self):
        assert arith(Op.SDIV, (-7) % 256, 2) == (-3) % 256


class TestCastCmp:
    def test_extensions(self):
        env = {"a": 0xFF}
        assert exec_cast(Instruction(Op.SEXT, w, (a,)), env)["w"] == 0xFFFF
        assert exec_cast(Instruction(Op.ZEXT, w, (a,)), env)["w"] == 0x00FF

    def test_trunc(self):
        assert exec_cast(Instruction(Op.TRUNC, a, (w,)), {"w": 0x1234})["a"] == 0x34

    def test_bool_extensions(self):
        # oracle: sign/zero extension of the one-bit vector 1
        one_bit = 1
        assert exec_cast(Instruction(Op.BOOLSEXT, a, (flag,)), {"flag": True})["a"] == (-one_bit) % 256
        assert exec_cast(Instruction(Op.BOOLZEXT, a, (flag,)), {"flag": True})["a"] == one_bit
        assert exec_cast(Instruction(Op.BOOLSEXT, a, (flag,)), {"flag": False})["a"] == 0

    def test_orders(self):
        def cmp(op, x, y):
            return exec_cmp(Instruction(op, flag, (Const(x, 8), Const(y, 8))), {})["flag"]
        assert cmp(Op.LEQ, 0xFF, 1) is False
        assert cmp(Op.SLEQ, 0xFF, 1) is True
        assert cmp(Op.EQ, 0x2A, 0x2A) is True
        assert cmp(Op.NEQ, 0x2A, 0x2A) is False

    @given(st.integers(0, 255), st.integers(0, 255))
    def test_signed_order_is_flipped_unsigned(self, x, y):
        env = {"a": x, "b": y}
        signed = exec_cmp(Instruction(Op.SLEQ, flag, (a, b)), env)["flag"]
        flipped = exec_cmp(Instruction(Op.LEQ, flag, (a, b)), {"a": x ^ 0x80, "b": y ^ 0x80})["flag"]
        assert signed == flipped


class TestMemory:
    def test_little_endian_round_trip(self):
        mem = Memory.zeroed(16)
        env = {"p": 10, "w": 0x1234}
        _, mem = exec_memory(Instruction(Op.STORE, None, (p, w)), env, mem)
        assert mem.data[10] == 0x34 and mem.data[11] == 0x12
        env2, mem2 = exec_memory(Instruction(Op.LOAD, w, (p,)), {"p": 10, "w": 0}, mem)
        assert env2["w"] == 0x1234 and mem2 == mem

    def test_load_out_of_bounds(self):
        with pytest.raises(MachineFault):
            exec_memory(Instruction(Op.LOAD, a, (p,)), {"p": 16}, Memory.zeroed(16))

    def test_address_above_signed_range(self):
        with pytest.raises(MachineFault):
            exec_memory(Instruction(Op.LOAD, a, (p,)), {"p": 1 << 63}, Memory.zeroed(16))

    def test_store_addr_value(self):
        q = Register("q", ADDR)
        _, mem = exec_memory(Instruction(Op.STORE, None, (p, q)), {"p": 0, "q": 0x2A}, Memory.zeroed(8))
        # oracle: byte decomposition of the 64-bit pattern
        assert list(mem.data) == [0x2A, 0, 0, 0, 0, 0, 0, 0]

    def test_bool_memory(self):
        _, mem = exec_memory(Instruction(Op.STORE, None, (p, flag)), {"p": 3, "flag": True}, Memory.zeroed(4))
        assert mem.data[3] == 1
        env, _ = exec_memory(Instruction(Op.LOAD, flag, (p,)), {"p": 0}, Memory(bytes([7, 0, 0, 0])))
        assert env["flag"] is True

    @given(st.sampled_from([I8, I16, I32, I64, ADDR]), st.integers(0, 2 ** 64 - 1), st.integers(0, 24))
    def test_store_frame_and_round_trip(self, ty, value, addr):
        reg = Register("v", ty)
        value %= 1 << ty.width
        before = Memory(bytes(range(32)))
        _, after = exec_memory(Instruction(Op.STORE, None, (p, reg)), {"p": addr, "v": value}, before)
        size = ty.byte_size
        assert before.data[:addr] == after.data[:addr]
        assert before.data[addr + size:] == after.data[addr + size:]
        env, _ = exec_memory(Instruction(Op.LOAD, reg, (p,)), {"p": addr, "v": 0}, after)
        assert env["v"] == value


class TestAssignAndGuards:
    def test_copy_and_decl(self):
        assert exec_assign(Instruction(Op.COPY, a, (b,)), {"a": 0, "b": 7})["a"] == 7
        env = {"a": 3}
        assert exec_assign(Instruction(Op.DECL, a), env) == env

    def test_nondet_bool_enumeration(self):
        seen = {exec_assign(Instruction(Op.NONDET, flag), {}, replay_chooser([v]))["flag"] for v in (False, True)}
        assert seen == {False, True}

    def test_guards(self):
        assert check_guard(Instruction(Op.ASSUME, None, (flag,)), {"flag": True}) is Guard.ENABLED
        assert check_guard(Instruction(Op.NEGASSUME, None, (flag,)), {"flag": True}) is Guard.BLOCKED
        assert check_guard(Instruction(Op.ASSERT), {}) is Guard.ASSERT_HIT


class TestStepSequence:
    def test_identity(self):
        mem = Memory.zeroed(4)
        out = step_sequence(InstructionSequence(), {"a": 1}, mem)
        assert out.status is Status.OK and out.env == {"a": 1} and out.memory is mem

    def test_composition(self):
        inc = Instruction(Op.ADD, a, (a, Const(1, 8)))
        out = step_sequence(InstructionSequence(None, (inc, inc)), {"a": 0}, Memory.zeroed(0))
        assert out.env["a"] == 2

    def test_first_fault_stops(self):
        seq = InstructionSequence(None, (Instruction(Op.DIV, a, (a, Const(0, 8))),
                                         Instruction(Op.COPY, a, (Const(5, 8),))))
        assert step_sequence(seq, {"a": 1}, Memory.zeroed(0)).status is Status.ERROR

    def test_error_hides_earlier_stores(self):
        seq = InstructionSequence(None, (Instruction(Op.STORE, None, (Const(0, 64, addr=True), Const(9, 8))),
                                         Instruction(Op.DIV, a, (a, Const(0, 8)))))
        mem = Memory.zeroed(2)
        out = step_sequence(seq, {"a": 1}, mem)
        assert out.status is Status.ERROR and out.memory is None
        assert mem.data == bytes(2)

    def test_assert_runs_body(self):
        seq = InstructionSequence(Instruction(Op.ASSERT), (Instruction(Op.COPY, a, (Const(4, 8),)),))
        out = step_sequence(seq, {"a": 0}, Memory.zeroed(0))
        assert out.status is Status.ASSERT and out.env["a"] == 4

    def test_blocked_guard(self):
        seq = InstructionSequence(Instruction(Op.ASSUME, None, (flag,)), ())
        assert step_sequence(seq, {"flag": False}, Memory.zeroed(0)).status is Status.BLOCKED

    @pytest.mark.parametrize("chunk", range(10))
    def test_oracle_agreement(self, chunk):
        # 1000 sequences per chunk; the acceptance suite runs 10,000 more
        rng = random.Random(1000 + chunk)
        for _ in range(1000):
            seq = oracle.random_sequence(rng)
            env = oracle.random_env(rng)
            expect, expect_env = oracle.run(seq, env)
            got = step_sequence(seq, env, Memory.zeroed(0))
            assert got.status.value == expect, seq
            if expect == oracle.OK:
                assert got.env == expect_env, seq


class TestAlloc:
    def test_bump(self):
        mem, addr = alloc(Memory.zeroed(51), 6)
        assert addr == 0 and mem.pointer == 6

    def test_empty_allocation(self):
        mem, addr = alloc(Memory.zeroed(51, 7), 0)
        assert addr == 7 and mem.pointer == 7

    def test_exhaustion(self):
        with pytest.raises(AllocationError):
            alloc(Memory.zeroed(51, 50), 2)
