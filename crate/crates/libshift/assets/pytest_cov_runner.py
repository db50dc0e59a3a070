"""Self-contained pytest runner with line coverage for one implementation file.

Runs pytest on a single test file while tracing which lines of the
implementation file execute, then writes a coverage report compatible with
the coverage.py JSON shape:

    {"files": {"<impl>": {"summary": {"covered_lines": N,
                                      "num_statements": M,
                                      "percent_covered": P}}}}

Only the standard library and pytest are required, so the runner works in
minimal environments where a coverage plugin is not installed.
"""

import argparse
import ast
import json
import os
import sys
import threading


def executable_lines(path):
    """Line numbers of executable statements, docstrings excluded."""
    with open(path, "r", encoding="utf-8") as handle:
        tree = ast.parse(handle.read(), filename=path)
    lines = set()
    for node in ast.walk(tree):
        if not isinstance(node, ast.stmt):
            continue
        if (
            isinstance(node, ast.Expr)
            and isinstance(node.value, ast.Constant)
            and isinstance(node.value.value, str)
        ):
            continue
        lines.add(node.lineno)
    return lines


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--impl", required=True)
    parser.add_argument("--tests", required=True)
    parser.add_argument("--out", required=True)
    args = parser.parse_args()

    target = os.path.abspath(args.impl)
    executed = set()

    def tracer(frame, event, arg):
        if event == "line":
            try:
                if os.path.abspath(frame.f_code.co_filename) == target:
                    executed.add(frame.f_lineno)
            except (OSError, ValueError):
                pass
        return tracer

    import pytest

    sys.settrace(tracer)
    threading.settrace(tracer)
    exit_code = pytest.main([args.tests, "-q", "-p", "no:cacheprovider"])
    sys.settrace(None)
    threading.settrace(None)

    try:
        statements = executable_lines(target)
    except (OSError, SyntaxError):
        statements = set()
    covered = executed & statements
    percent = 100.0 * len(covered) / len(statements) if statements else 100.0
    report = {
        "files": {
            os.path.basename(target): {
                "summary": {
                    "covered_lines": len(covered),
                    "num_statements": len(statements),
                    "percent_covered": percent,
                }
            }
        }
    }
    with open(args.out, "w", encoding="utf-8") as handle:
        json.dump(report, handle, sort_keys=True)
    sys.exit(0 if exit_code == 0 else 1)


if __name__ == "__main__":
    main()
