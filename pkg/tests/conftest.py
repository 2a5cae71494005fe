import pathlib

import pytest

from rarepath import bytecode, cfg, minic, paths, prob

ROOT = pathlib.Path(__file__).resolve().parents[1]
PROGRAMS = ROOT / "programs"

SCANNER = PROGRAMS / "scanner.mc"
GATE_NOISE = PROGRAMS / "gate_noise.mc"
STRAIGHTLINE = PROGRAMS / "straightline.mc"


@pytest.fixture(scope="session")
def scanner_program():
    return minic.parse_file(SCANNER)


@pytest.fixture(scope="session")
def scanner_graph(scanner_program):
    return cfg.build_eip_cfg(scanner_program)


@pytest.fixture(scope="session")
def scanner_pg(scanner_program, scanner_graph):
    return prob.build_prob_cfg(scanner_program, scanner_graph)


@pytest.fixture(scope="session")
def scanner_compiled(scanner_program, scanner_graph):
    return bytecode.compile_program(scanner_program, scanner_graph)


@pytest.fixture(scope="session")
def scanner_ii(scanner_pg):
    return paths.enumerate_paths(scanner_pg, "ii", bound=60)


def scanner_branches(graph):
    """Branch vertex ids of the scanner, keyed by role, in source order."""
    per_proc = {}
    for vid in graph.branch_vertices():
        per_proc.setdefault(graph.vertices[vid].proc, []).append(vid)
    b_main = per_proc["main"]
    b_cmt = per_proc["parse_cmt"]
    b_att = per_proc["parse_att"]
    return {
        "D": b_main[0], "O": b_main[1], "C": b_main[2], "ret": b_main[3],
        "gt": b_cmt[0], "lt": b_cmt[1],
        "A": b_att[0], "T1": b_att[1], "T2": b_att[2],
    }


def taken_side(graph, path_vertices, branch_vid):
    """True/False edge taken at a branch, or None if the path skips it."""
    pairs = dict(zip(path_vertices, path_vertices[1:]))
    if branch_vid not in pairs:
        return None
    t_target, f_target = graph.branch_targets(branch_vid)
    return pairs[branch_vid] == t_target


def scanner_signature(graph, path_vertices):
    """Structural classification of a scanner path.

    -> ("d"|"o"|"c",) for a failed prefix check, else
    ("pass", cmt in {skip, gt, lt, none}, att in {skip, a, t1, t2, match},
     ret taken bool).
    """
    b = scanner_branches(graph)
    for key, tag in (("D", "d"), ("O", "o"), ("C", "c")):
        side = taken_side(graph, path_vertices, b[key])
        if side is False:
            return (tag,)
    if graph.proc_entry["parse_cmt"] not in path_vertices:
        cmt = "skip"
    elif taken_side(graph, path_vertices, b["gt"]):
        cmt = "gt"
    elif taken_side(graph, path_vertices, b["lt"]):
        cmt = "lt"
    else:
        cmt = "none"
    if graph.proc_entry["parse_att"] not in path_vertices:
        att = "skip"
    elif taken_side(graph, path_vertices, b["A"]) is False:
        att = "a"
    elif taken_side(graph, path_vertices, b["T1"]) is False:
        att = "t1"
    elif taken_side(graph, path_vertices, b["T2"]) is False:
        att = "t2"
    else:
        att = "match"
    return ("pass", cmt, att, taken_side(graph, path_vertices, b["ret"]))


def paths_by_signature(graph, path_list):
    out = {}
    for t in path_list:
        sig = scanner_signature(graph, t.vertices)
        assert sig not in out, f"duplicate signature {sig}"
        out[sig] = t
    return out
