"""Frozen expected path table for the bundled scanner example.

Expected probabilities were computed by hand from the per-branch
selectivities, in rounded mode (each selectivity rounded to three decimals
before multiplying): every matched byte-equality contributes 0.004, every
failed one 0.996, and the branch on parse_att's return value 0.5.  E.g. the
rarest rows multiply seven 0.004 factors, one 0.996 and one 0.5:
0.004**7 * 0.996 * 0.5 = 8.159232e-18 -> "8.16e-18".

Keys are structural signatures (see conftest.scanner_signature); values are
the expected 3-significant-figure decimal in rounded mode.  The numbering
of ROW_ORDER fixes the expected ascending-rarity picks for k = 3:
rows 34, 35 and 26.
"""

EXPECTED = {
    ("d",): "9.96e-01",
    ("o",): "3.98e-03",
    ("c",): "1.59e-05",
    ("pass", "skip", "skip", False): "3.20e-08",
    ("pass", "skip", "skip", True): "3.20e-08",
    ("pass", "skip", "a", False): "3.19e-08",
    ("pass", "skip", "a", True): "3.19e-08",
    ("pass", "skip", "t1", False): "1.27e-10",
    ("pass", "skip", "t1", True): "1.27e-10",
    ("pass", "skip", "t2", False): "5.10e-13",
    ("pass", "skip", "t2", True): "5.10e-13",
    ("pass", "skip", "match", False): "2.05e-15",
    ("pass", "skip", "match", True): "2.05e-15",
    ("pass", "gt", "skip", False): "1.28e-10",
    ("pass", "gt", "skip", True): "1.28e-10",
    ("pass", "lt", "skip", False): "1.27e-10",
    ("pass", "lt", "skip", True): "1.27e-10",
    ("pass", "none", "skip", False): "3.17e-08",
    ("pass", "none", "skip", True): "3.17e-08",
    ("pass", "gt", "a", False): "1.27e-10",
    ("pass", "gt", "a", True): "1.27e-10",
    ("pass", "gt", "t1", False): "5.10e-13",
    ("pass", "gt", "t1", True): "5.10e-13",
    ("pass", "gt", "t2", False): "2.04e-15",
    ("pass", "gt", "t2", True): "2.04e-15",
    ("pass", "gt", "match", False): "8.19e-18",
    ("pass", "gt", "match", True): "8.19e-18",
    ("pass", "lt", "a", False): "1.27e-10",
    ("pass", "lt", "a", True): "1.27e-10",
    ("pass", "lt", "t1", False): "5.08e-13",
    ("pass", "lt", "t1", True): "5.08e-13",
    ("pass", "lt", "t2", False): "2.03e-15",
    ("pass", "lt", "t2", True): "2.03e-15",
    ("pass", "lt", "match", False): "8.16e-18",
    ("pass", "lt", "match", True): "8.16e-18",
    ("pass", "none", "a", False): "3.16e-08",
    ("pass", "none", "a", True): "3.16e-08",
    ("pass", "none", "t1", False): "1.26e-10",
    ("pass", "none", "t1", True): "1.26e-10",
    ("pass", "none", "t2", False): "5.06e-13",
    ("pass", "none", "t2", True): "5.06e-13",
    ("pass", "none", "match", False): "2.03e-15",
    ("pass", "none", "match", True): "2.03e-15",
}

# Signature -> reference row number (the order the rows are conventionally
# listed in: intra rows first, then mixed, then fully inter-procedural).
ROW_ORDER = {
    ("d",): 1,
    ("o",): 2,
    ("c",): 3,
    ("pass", "skip", "skip", False): 4,
    ("pass", "skip", "skip", True): 5,
    ("pass", "skip", "a", False): 6,
    ("pass", "skip", "a", True): 7,
    ("pass", "skip", "t1", False): 8,
    ("pass", "skip", "t1", True): 9,
    ("pass", "skip", "t2", False): 10,
    ("pass", "skip", "t2", True): 11,
    ("pass", "skip", "match", False): 12,
    ("pass", "skip", "match", True): 13,
    ("pass", "gt", "skip", False): 14,
    ("pass", "gt", "skip", True): 15,
    ("pass", "lt", "skip", False): 16,
    ("pass", "lt", "skip", True): 17,
    ("pass", "none", "skip", False): 18,
    ("pass", "none", "skip", True): 19,
    ("pass", "gt", "a", False): 20,
    ("pass", "gt", "a", True): 21,
    ("pass", "gt", "t1", False): 22,
    ("pass", "gt", "t1", True): 23,
    ("pass", "gt", "t2", False): 24,
    ("pass", "gt", "t2", True): 25,
    ("pass", "gt", "match", False): 26,
    ("pass", "gt", "match", True): 27,
    ("pass", "lt", "a", False): 28,
    ("pass", "lt", "a", True): 29,
    ("pass", "lt", "t1", False): 30,
    ("pass", "lt", "t1", True): 31,
    ("pass", "lt", "t2", False): 32,
    ("pass", "lt", "t2", True): 33,
    ("pass", "lt", "match", False): 34,
    ("pass", "lt", "match", True): 35,
    ("pass", "none", "a", False): 36,
    ("pass", "none", "a", True): 37,
    ("pass", "none", "t1", False): 38,
    ("pass", "none", "t1", True): 39,
    ("pass", "none", "t2", False): 40,
    ("pass", "none", "t2", True): 41,
    ("pass", "none", "match", False): 42,
    ("pass", "none", "match", True): 43,
}

assert set(ROW_ORDER) == set(EXPECTED) and len(EXPECTED) == 43
