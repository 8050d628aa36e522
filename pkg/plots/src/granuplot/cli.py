"""`make-figures` batch CLI.

The manifest is a JSON list of jobs:

    [{"kind": "criteria_map",
      "inputs": ["runs/criteria.tsv"],
      "output": "figures/criteria_map.png",
      "style": {}}]

Relative paths resolve against the manifest's directory.
"""

import argparse
import json
import sys
from pathlib import Path

from . import figures
from .formats import FormatError


def load_manifest(path):
    base = Path(path).resolve().parent
    try:
        jobs = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if not isinstance(jobs, list):
        raise FormatError(f"{path}: manifest must be a JSON list")
    out = []
    for job in jobs:
        try:
            kind = job["kind"]
            inputs = [base / p for p in job["inputs"]]
            output = base / job["output"]
        except (TypeError, KeyError) as exc:
            raise FormatError(f"{path}: job missing {exc}") from exc
        out.append((kind, inputs, output, job.get("style")))
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="make-figures",
        description="regenerate figures from granufrac artifacts")
    parser.add_argument("--manifest", required=True)
    args = parser.parse_args(argv)

    try:
        jobs = load_manifest(args.manifest)
        for kind, inputs, output, style in jobs:
            figures.make_figure(kind, inputs, output, style)
            print(f"wrote {output}")
    except (FormatError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
