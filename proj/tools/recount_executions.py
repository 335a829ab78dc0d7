#!/usr/bin/env python3
"""Recount the circuit executions of a DQN trial from its own output files.

Every acting step runs the online circuit once. Every update runs, for each
sampled transition, one forward pass plus a parameter-shift gradient (2P
executions) of the online circuit and one target-circuit forward pass.
Classical agents never execute circuits.

Usage: recount_executions.py TRIAL_DIR
Exit status 0 when every metrics record matches the recount, 1 otherwise.
"""

import json
import sys
from pathlib import Path


def updates_through(step, acc):
    start = max(acc["learning_starts"], acc["batch_size"])
    freq = acc["train_frequency"]
    if acc["buffer_size"] < acc["batch_size"] or step < start:
        return 0
    # multiples of freq in [start, step]
    return step // freq - (start - 1) // freq


def expected(step, summary):
    if summary["agent_kind"] == "classical":
        return 0
    acc = summary["accounting"]
    p = acc["parameter_occurrences"]
    return step + updates_through(step, acc) * acc["batch_size"] * (2 * p + 2)


def main(argv):
    if len(argv) != 2:
        print(__doc__.strip().splitlines()[-2], file=sys.stderr)
        return 2
    trial = Path(argv[1])
    summary = json.loads((trial / "summary.json").read_text())
    if summary["algorithm"] != "dqn":
        print(f"unsupported algorithm {summary['algorithm']}", file=sys.stderr)
        return 2

    records = [json.loads(line) for line in (trial / "metrics.jsonl").read_text().splitlines() if line]
    bad = 0
    for r in records:
        want = expected(r["global_step"], summary)
        if r["circuit_executions"] != want:
            bad += 1
            print(f"episode {r['episode']}: logged {r['circuit_executions']}, recounted {want}")

    steps = records[-1]["global_step"] if records else 0
    total = expected(steps, summary)
    if summary["total_circuit_executions"] != total:
        bad += 1
        print(f"summary: logged {summary['total_circuit_executions']}, recounted {total}")
    print(f"records={len(records)} steps={steps} recounted={total} discrepancies={bad}")
    return 0 if bad == 0 else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv))
