"""Call inlining for the subset IR."""
from __future__ import annotations

import itertools
from dataclasses import replace

from .ir import (
    Block, Br, FrontendError, IrFunction, IrInstr, IrModule, Local, Ret,
)


class RecursionDetected(FrontendError):
    def __init__(self, cycle: list[str]):
        super().__init__("recursion: " + " -> ".join("@" + c for c in cycle))
        self.cycle = cycle


class UnknownFunction(FrontendError):
    pass


def inline_calls(module: IrModule, entry: str) -> IrFunction:
    """Return ``entry`` with every call to a defined function replaced by a
    renamed copy of the callee's body.

    The k-th inlined instance of ``f`` renames ``%x`` to ``%f.k.x`` and
    label ``l`` to ``f.k.l``; parameters are bound with ``copy``, and each
    ``ret`` becomes a ``copy`` into the call's result followed by a branch
    to the continuation block.
    """
    fn = module.function(entry)
    if fn is None:
        raise UnknownFunction(f"no function @{entry} defined")
    counter = itertools.count()
    return _inline(module, fn, [entry], counter)


def _inline(module: IrModule, fn: IrFunction, stack: list[str], counter) -> IrFunction:
    blocks: list[Block] = []
    for b in fn.blocks:
        cur = Block(b.label)
        blocks.append(cur)
        part = 0
        for ins in b.instrs:
            callee = module.function(ins.extra[0]) if ins.op == "call" else None
            if callee is None:
                cur.instrs.append(ins)
                continue
            if callee.name in stack:
                raise RecursionDetected(stack[stack.index(callee.name):] + [callee.name])
            body = _inline(module, callee, stack + [callee.name], counter)
            k = next(counter)
            prefix = f"{callee.name}.{k}"
            taken = {blk.label for blk in fn.blocks} | {blk.label for blk in blocks}
            part += 1
            cont = f"{b.label}.ret{part}"
            while cont in taken:
                part += 1
                cont = f"{b.label}.ret{part}"
            renamed = _rename(body, prefix)
            # bind parameters
            for (ty, p), arg in zip(renamed.params, ins.args):
                cur.instrs.append(IrInstr("copy", p, ty, (arg,), line=ins.line))
            if len(renamed.params) != len(ins.args):
                raise FrontendError(f"line {ins.line}: @{callee.name} expects {len(renamed.params)} arguments")
            cur.term = Br(None, (renamed.blocks[0].label,), ins.line)
            for rb in renamed.blocks:
                if isinstance(rb.term, Ret):
                    if ins.dest is not None and rb.term.value is not None:
                        rb.instrs.append(IrInstr("copy", ins.dest, ins.ty, (rb.term.value,), line=rb.term.line))
                    rb.term = Br(None, (cont,), rb.term.line)
                blocks.append(rb)
            cur = Block(cont)
            blocks.append(cur)
        cur.term = b.term
    return IrFunction(fn.name, fn.ret, list(fn.params), blocks)


def _rename(fn: IrFunction, prefix: str) -> IrFunction:
    def v(x):
        return Local(f"%{prefix}.{x.name[1:]}") if isinstance(x, Local) else x

    def lab(l: str) -> str:
        return f"{prefix}.{l}"

    blocks = []
    for b in fn.blocks:
        nb = Block(lab(b.label))
        for ins in b.instrs:
            nb.instrs.append(replace(ins, dest=v(ins.dest) if ins.dest else None,
                                     args=tuple(v(a) for a in ins.args)))
        t = b.term
        if isinstance(t, Br):
            nb.term = Br(v(t.cond) if t.cond is not None else None, tuple(lab(x) for x in t.targets), t.line)
        else:
            nb.term = Ret(t.ty, v(t.value) if t.value is not None else None, t.line)
        blocks.append(nb)
    params = [(ty, v(p)) for ty, p in fn.params]
    return IrFunction(fn.name, fn.ret, params, blocks)
