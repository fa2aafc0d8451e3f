"""Example programs shipped with the package.

``petersons.sir`` / ``petersons_buggy.sir`` are two-process mutual exclusion
programs; ``password.sir`` is the password check with N = 6 produced by
:func:`password_source`.  The ``.ul`` files are their lowered forms and
``reference.omg`` the timing configuration used throughout the tests.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path

PETERSONS_ENTRIES = ["petersons1", "petersons2"]
PASSWORD_ENTRIES = ["main"]
DEFAULT_MEMSIZE = 256


def fixture_path(name: str) -> Path:
    return Path(str(resources.files(__name__).joinpath(name)))


def read_fixture(name: str) -> str:
    return fixture_path(name).read_text()


def password_source(n: int = 6, binary: bool = False) -> str:
    """The password check with secret ``"abc..."[:n]``.

    Every character is read through an undefined function, so lowering
    turns it into a NonDet.  With ``binary`` the reads only produce 'a' or
    'b' (``read`` yields one nondeterministic bit), which keeps exhaustive
    analysis of longer passwords small.
    """
    if n < 1:
        raise ValueError("password length must be positive")
    if binary:
        decl = "declare i1 @pick()"
        read = ("  %bit = call i1 @pick()\n"
                "  %off = zext i1 %bit to i8\n"
                "  %c = add i8 97, %off\n")
    else:
        decl = "declare i8 @read()"
        read = "  %c = call i8 @read()\n"
    alphabet = "{a, b}" if binary else "all bytes"
    return f"""\
; Password check that stops at the first wrong character, so the running
; time reveals how long the correct prefix was.  N = {n}, input alphabet {alphabet}.
{decl}
declare void @assert(i32)

define i32 @main() {{
entry:
  %sec = alloca [{n} x i8]
  %i = alloca i32
  %j = alloca i32
  %k = alloca i8
  store i32 0, ptr %i
  br label %fill.cond
fill.cond:
  %0 = load i32, ptr %i
  %1 = icmp slt i32 %0, {n}
  br i1 %1, label %fill.body, label %fill.end
fill.body:
  %2 = load i32, ptr %i
  %3 = trunc i32 %2 to i8
  %4 = add i8 97, %3
  %5 = getelementptr [{n} x i8], ptr %sec, i32 0, i32 %2
  store i8 %4, ptr %5
  %6 = add i32 %2, 1
  store i32 %6, ptr %i
  br label %fill.cond
fill.end:
  store i32 0, ptr %j
  br label %check.cond
check.cond:
  %7 = load i32, ptr %j
  %8 = icmp slt i32 %7, {n}
  br i1 %8, label %check.body, label %check.end
check.body:
{read}  store i8 %c, ptr %k
  %9 = load i8, ptr %k
  %10 = load i32, ptr %j
  %11 = getelementptr [{n} x i8], ptr %sec, i32 0, i32 %10
  %12 = load i8, ptr %11
  %13 = icmp ne i8 %9, %12
  br i1 %13, label %wrong, label %check.next
wrong:
  call void @assert(i32 0)
  br label %check.next
check.next:
  %14 = load i32, ptr %j
  %15 = add i32 %14, 1
  store i32 %15, ptr %j
  br label %check.cond
check.end:
  ret i32 0
}}
"""
