"""rarepath: rare-path analysis and seed generation for fuzzing MiniC programs.

Pipeline: parse MiniC -> build control flow graphs -> score branch
selectivity by model counting -> enumerate bounded paths and pick the rarest
-> generate inputs for them with path-guided concolic execution -> feed the
inputs as initial seeds to the built-in coverage-guided fuzzer.
"""

__version__ = "0.1.0"

from .cfg import build_cfg, build_eip_cfg, build_ip_cfg, export_dot
from .concolic import execute, is_feasible, negated_path, solve
from .fuzz import compare_experiment, fuzz, run_coverage
from .gce import GceEngine, gen_seed_corpus, overlap
from .minic import list_branches, parse, parse_file, unparse
from .paths import enumerate_paths, path_probability, rare_paths
from .prob import analyze_dependency, build_prob_cfg, selectivity

__all__ = [
    "__version__",
    "analyze_dependency",
    "build_cfg",
    "build_eip_cfg",
    "build_ip_cfg",
    "build_prob_cfg",
    "compare_experiment",
    "enumerate_paths",
    "execute",
    "export_dot",
    "fuzz",
    "GceEngine",
    "gen_seed_corpus",
    "is_feasible",
    "list_branches",
    "negated_path",
    "overlap",
    "parse",
    "parse_file",
    "path_probability",
    "rare_paths",
    "run_coverage",
    "selectivity",
    "solve",
    "unparse",
]
