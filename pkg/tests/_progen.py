"""Deterministic random MiniC program generator for property tests.

Programs use a reduced byte domain (default 16) and short inputs so that
brute-force oracles over the full input space stay cheap.  The same seed
always yields the same source text.
"""

import random

from rarepath import minic

VAR_NAMES = ["x", "y", "z"]


def gen_source(seed: int, byte_domain: int = 16, max_len: int = 3) -> str:
    rng = random.Random(seed)
    input_len = rng.randint(1, max_len)
    lit = lambda: rng.randrange(byte_domain)
    n_procs = rng.randint(1, 3)
    names = ["main", "helper", "util"][:n_procs]

    def byteref() -> str:
        if rng.random() < 0.5:
            return f"in[{rng.randrange(input_len)}]"
        off = rng.randrange(input_len)
        return f"in[cur+{off}]" if off else "in[cur]"

    def cond() -> str:
        op = rng.choice(["==", "!=", "<", "<=", ">", ">="])
        kind = rng.random()
        if kind < 0.55:
            return f"{byteref()} {op} {lit()}"
        if kind < 0.75 and input_len >= 2:
            return f"in[{rng.randrange(input_len)}] {op} in[{rng.randrange(input_len)}]"
        if kind < 0.9:
            return f"{rng.choice(VAR_NAMES)} {op} {lit()}"
        ops = ["&&", "||"]
        return f"{cond_simple()} {rng.choice(ops)} {cond_simple()}"

    def cond_simple() -> str:
        op = rng.choice(["==", "!=", "<", ">"])
        return f"{byteref()} {op} {lit()}"

    def stmts(depth: int, proc_idx: int, budget: int) -> list:
        out = []
        n = rng.randint(1, 3 if depth else 4)
        for _ in range(n):
            if budget[0] <= 0:
                break
            budget[0] -= 1
            choice = rng.random()
            if choice < 0.3:
                src = rng.random()
                if src < 0.4:
                    out.append(f"{rng.choice(VAR_NAMES)} = {byteref()};")
                elif src < 0.7:
                    out.append(f"{rng.choice(VAR_NAMES)} = {lit()};")
                else:
                    out.append(f"{rng.choice(VAR_NAMES)} = {rng.choice(VAR_NAMES)} + {rng.randrange(3)};")
            elif choice < 0.4:
                out.append(f"cur = cur + {rng.randint(0, 2)};")
            elif choice < 0.7 and depth < 2:
                body = stmts(depth + 1, proc_idx, budget)
                block = "\n".join("    " + line for line in body) or "    x = 0;"
                if rng.random() < 0.4:
                    other = stmts(depth + 1, proc_idx, budget)
                    eblock = "\n".join("    " + line for line in other) or "    y = 0;"
                    out.append(f"if ({cond()}) {{\n{block}\n}} else {{\n{eblock}\n}}")
                else:
                    out.append(f"if ({cond()}) {{\n{block}\n}}")
            elif choice < 0.78 and depth < 2:
                bound = rng.randint(1, 3)
                out.append(
                    f"while [{bound}] ({byteref()} != {lit()}) {{\n    cur = cur + 1;\n}}"
                )
            elif choice < 0.88 and proc_idx + 1 < n_procs:
                callee = names[proc_idx + 1]
                if rng.random() < 0.5:
                    out.append(f"call {callee}();")
                else:
                    out.append(f"{rng.choice(VAR_NAMES)} = {callee}();")
            else:
                out.append(f"return {rng.choice(VAR_NAMES + [str(lit())])};")
                break
        return out

    chunks = [f"input[{input_len}];", ""]
    for idx, name in enumerate(names):
        budget = [rng.randint(4, 9)]
        body = stmts(0, idx, budget)
        decls = [f"    int {v};" for v in VAR_NAMES]
        body_text = "\n".join("    " + line.replace("\n", "\n    ") for line in body)
        chunks.append(f"proc {name}() {{")
        chunks.extend(decls)
        chunks.append(body_text)
        chunks.append("}")
        chunks.append("")
    return "\n".join(chunks)


def gen_program(seed: int, byte_domain: int = 16, max_len: int = 3) -> minic.Program:
    return minic.parse(gen_source(seed, byte_domain, max_len), byte_domain=byte_domain)
