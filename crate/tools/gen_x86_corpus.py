#!/usr/bin/env python3
"""Builds the frozen x86-subset decoder corpus.

Random instructions are assembled from the supported opcode table and each one
is labelled by capstone (32-bit mode). The output is one instruction per line:

    <hex bytes> <length> <class>

Usage: python3 tools/gen_x86_corpus.py > crates/core/tests/data/x86_corpus.txt
"""

import random
import sys

import capstone
from capstone import x86 as cx86

SEED = 20240605
COUNT = 2000

SEGMENT_PREFIXES = [0x2E, 0x36, 0x3E, 0x26, 0x64, 0x65]


def modrm_bytes(rng, reg, addr16, allow_reg=True):
    """Returns (modrm + sib + disp bytes, is_register_form)."""
    mod = rng.choice([0, 1, 2, 3] if allow_reg else [0, 1, 2])
    rm = rng.randrange(8)
    out = [(mod << 6) | (reg << 3) | rm]
    if mod == 3:
        return out, True
    if addr16:
        if mod == 0 and rm == 6:
            out += [rng.randrange(256) for _ in range(2)]
        elif mod == 1:
            out += [rng.randrange(256)]
        elif mod == 2:
            out += [rng.randrange(256) for _ in range(2)]
        return out, False
    if rm == 4:
        sib = rng.randrange(256)
        out.append(sib)
        if mod == 0 and sib & 7 == 5:
            out += [rng.randrange(256) for _ in range(4)]
    if mod == 0 and rm == 5:
        out += [rng.randrange(256) for _ in range(4)]
    elif mod == 1:
        out += [rng.randrange(256)]
    elif mod == 2:
        out += [rng.randrange(256) for _ in range(4)]
    return out, False


def imm(rng, n):
    return [rng.randrange(256) for _ in range(n)]


def one(rng):
    opsize16 = rng.random() < 0.12
    addr16 = rng.random() < 0.08
    prefixes = []
    if opsize16:
        prefixes.append(0x66)
    if addr16:
        prefixes.append(0x67)
    if rng.random() < 0.1:
        prefixes.append(rng.choice(SEGMENT_PREFIXES))
    z = 2 if opsize16 else 4
    kind = rng.randrange(20)
    if kind == 0:
        body = [rng.choice([rng.randrange(0x40, 0x60), 0x90, 0xF5, 0xF8, 0xF9, 0xFC, 0xFD])]
    elif kind == 1:
        m, _ = modrm_bytes(rng, rng.randrange(8), addr16)
        body = [rng.choice([0x31, 0x88, 0x89, 0x8A, 0x8B])] + m
    elif kind == 2:
        op = rng.choice([0x80, 0x81, 0x83])
        reg = rng.randrange(8)
        m, is_reg = modrm_bytes(rng, reg, addr16)
        body = [op] + m + imm(rng, z if op == 0x81 else 1)
        if not is_reg and reg != 7 and rng.random() < 0.3:
            prefixes.append(0xF0)
    elif kind == 3:
        m, _ = modrm_bytes(rng, 0, addr16)
        body = [0xC6] + m + imm(rng, 1)
    elif kind == 4:
        m, _ = modrm_bytes(rng, 0, addr16)
        body = [0xC7] + m + imm(rng, z)
    elif kind == 5:
        body = [0x68] + imm(rng, z)
    elif kind == 6:
        body = [0x6A] + imm(rng, 1)
    elif kind == 7:
        body = [rng.randrange(0xB0, 0xB8)] + imm(rng, 1)
    elif kind == 8:
        body = [rng.randrange(0xB8, 0xC0)] + imm(rng, z)
    elif kind == 9:
        body = [0xC3] if rng.random() < 0.7 else [0xC2] + imm(rng, 2)
        if rng.random() < 0.2:
            prefixes.append(0xF3)
    elif kind == 10:
        body = [rng.randrange(0x70, 0x80)] + imm(rng, 1)
    elif kind == 11:
        body = [0x0F, rng.randrange(0x80, 0x90)] + imm(rng, z)
    elif kind == 12:
        body = [0xE8] + imm(rng, z)
    elif kind == 13:
        body = [0xE9] + imm(rng, z)
    elif kind == 14:
        body = [0xEB] + imm(rng, 1)
    elif kind == 15:
        m, _ = modrm_bytes(rng, 2, addr16)
        body = [0xFF] + m
    elif kind == 16:
        m, _ = modrm_bytes(rng, 4, addr16)
        body = [0xFF] + m
    elif kind == 17:
        m, _ = modrm_bytes(rng, rng.choice([0, 1, 6]), addr16)
        body = [0xFF] + m
    elif kind == 18:
        m, _ = modrm_bytes(rng, 0, addr16)
        body = [0x0F, 0x1F] + m
    else:
        body = [rng.randrange(0x50, 0x60)]
    return bytes(prefixes + body)


def classify(insn):
    groups = set(insn.groups)
    if capstone.CS_GRP_RET in groups:
        return "return"
    direct = any(op.type == cx86.X86_OP_IMM for op in insn.operands)
    if capstone.CS_GRP_CALL in groups:
        return "call" if direct else "indirect_call"
    if capstone.CS_GRP_JUMP in groups:
        if insn.mnemonic.split()[-1] == "jmp":
            return "direct_uncond" if direct else "indirect_uncond"
        return "direct_cond"
    return "non_branch"


def main():
    md = capstone.Cs(capstone.CS_ARCH_X86, capstone.CS_MODE_32)
    md.detail = True
    rng = random.Random(SEED)
    emitted = 0
    while emitted < COUNT:
        raw = one(rng)
        # Trailing junk makes sure the decoder, not the buffer end, picks the length.
        insns = list(md.disasm(raw + bytes([0xD6] * 4), 0x1000, count=1))
        if not insns:
            print(f"capstone rejected {raw.hex()}", file=sys.stderr)
            continue
        insn = insns[0]
        if insn.size != len(raw):
            print(f"length disagreement {raw.hex()} capstone={insn.size}", file=sys.stderr)
        print(f"{raw[:insn.size].hex()} {insn.size} {classify(insn)}")
        emitted += 1


if __name__ == "__main__":
    main()
