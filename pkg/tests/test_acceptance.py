"""Acceptance criteria 1-18, one PASS/FAIL line each.

Run directly (``python3 tests/test_acceptance.py``) or through pytest; the
pytest summary repeats the lines.
"""

import json
import subprocess
import sys
import time

import pytest

from qtamper.audit import REGISTRY, run_all

# criterion -> (label, audit cases, loosest tolerance allowed on any of their checks)
CRITERIA = {
    1: ("Helstrom measurement saturates the trace norm", ("T01",), 1e-9),
    2: ("pure-state distance formula agrees with the dense one", ("T02",), 1e-9),
    3: ("coherent gentle measurement identity and bound", ("T05",), 1e-9),
    4: ("trace norm adds over orthogonal blocks", ("T04",), 1e-9),
    5: ("multi-copy distance lower bound", ("T03",), 1e-9),
    6: ("baseline schemes: one-time pad, identity, always-reject", ("T20",), 1e-10),
    7: ("distinguisher attack breaks identity scheme for every key", ("T08",), 1e-9),
    8: ("parallel composition error, factorization, hybrid lift", ("T07",), 1e-10),
    9: ("double construction: split attack decodes both halves, forgery < 1", ("T18",), 1e-9),
    10: ("share construction: split attack accepts both halves, forgery oracle", ("T11",), 1e-9),
    11: ("parity-pad scheme is malleable", ("T16",), 1e-10),
    12: ("parity-pad scheme is not quantum encryption", ("T17",), 1e-9),
    13: ("star inclusion-exclusion operator identity", ("T19",), 1e-10),
    14: ("revocation to tamper evidence: identity, error bound, equality chain", ("T14", "T15"), 1e-9),
    15: ("revocation game translations", ("T13",), 1e-9),
    16: ("probability lemmas and set discrimination", ("T12", "T21"), 1e-12),
    17: ("tamper evidence bounds encryption gap, gap shrinks with n", ("T09",), 1e-9),
}
SUITE_BUDGET = 600.0
HELSTROM_BUDGET = 5.0

LINES: dict[int, str] = {}


def _record(n: int, ok: bool, label: str, detail: str = "") -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {label}" + (f" ({detail})" if detail else "")
    LINES[n] = line
    print(line)


@pytest.fixture(scope="session")
def suite():
    t0 = time.perf_counter()
    reports = run_all(seed=0)
    return {r.case_id: r for r in reports}, time.perf_counter() - t0


def _evaluate(n, reports):
    label, cases, ceiling = CRITERIA[n]
    problems = []
    for cid in cases:
        r = reports[cid]
        if r.error:
            problems.append(f"{cid} error: {r.error}")
        if not r.checks:
            problems.append(f"{cid} has no checks")
        for c in r.checks:
            if not c.passed:
                problems.append(f"{cid} '{c.name}' slack {c.slack:.3g}")
            if c.tolerance > ceiling:
                problems.append(f"{cid} '{c.name}' tolerance {c.tolerance:g} above {ceiling:g}")
    if n == 1 and reports["T01"].wall_time >= HELSTROM_BUDGET:
        problems.append(f"runtime {reports['T01'].wall_time:.2f} s")
    n_checks = sum(len(reports[c].checks) for c in cases)
    return label, problems, n_checks


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(suite, n):
    reports, _ = suite
    label, problems, n_checks = _evaluate(n, reports)
    _record(n, not problems, label, "; ".join(problems) or f"{n_checks} checks")
    assert not problems, problems


def _strip_timing(doc):
    return [{k: v for k, v in d.items() if k != "wall_time"} for d in doc]


def test_criterion_18_determinism(suite):
    reports, elapsed = suite
    label = "same seed reproduces every numeric field, suite under 10 minutes"
    first = _strip_timing(json.loads(json.dumps([r.to_dict() for r in reports.values()])))
    # second run in a fresh interpreter through the command line, so no cached state is shared
    t0 = time.perf_counter()
    out = subprocess.run([sys.executable, "-m", "qtamper.cli", "run", "--case", "all", "--seed", "0",
                          "--format", "json"], capture_output=True, text=True)
    rerun_time = time.perf_counter() - t0
    problems = []
    if out.returncode not in (0, 1):
        problems.append(f"rerun exit code {out.returncode}: {out.stderr.strip()[:200]}")
    else:
        second = _strip_timing(json.loads(out.stdout))
        diffs = [a["case_id"] for a, b in zip(first, second) if a != b]
        if len(first) != len(second) or diffs:
            problems.append(f"differs in {diffs or 'case count'}")
    if max(elapsed, rerun_time) >= SUITE_BUDGET:
        problems.append(f"suite took {max(elapsed, rerun_time):.0f} s")
    detail = f"{elapsed:.0f} s in process, {rerun_time:.0f} s rerun"
    _record(18, not problems, label, "; ".join(problems) or detail)
    assert not problems, problems


def test_every_case_belongs_to_a_criterion():
    covered = {c for _, cases, _ in CRITERIA.values() for c in cases}
    # the remaining cases are supporting checks exercised by the determinism rerun
    assert covered <= set(REGISTRY)
    assert set(REGISTRY) - covered == {"T06", "T10"}


if __name__ == "__main__":
    t0 = time.perf_counter()
    reps = {r.case_id: r for r in run_all(seed=0)}
    elapsed = time.perf_counter() - t0
    ok_all = True
    for k in sorted(CRITERIA):
        lab, probs, cnt = _evaluate(k, reps)
        _record(k, not probs, lab, "; ".join(probs) or f"{cnt} checks")
        ok_all &= not probs
    again = {r.case_id: r.to_dict() for r in run_all(seed=0)}
    same = all(_strip_timing([reps[c].to_dict()]) == _strip_timing([again[c]]) for c in reps)
    _record(18, same and elapsed < SUITE_BUDGET, "same seed reproduces every numeric field, suite under 10 minutes",
            f"{elapsed:.0f} s")
    sys.exit(0 if ok_all and same and elapsed < SUITE_BUDGET else 1)
