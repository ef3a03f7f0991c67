"""Reference classifier worker for the EVAL stdio protocol.

Runs one of the built-in synthetic classifiers behind the wire
protocol, for loopback/integration testing of the external-classifier
adapter and as a template for wrapping real models:

    python -m smoothcert.eval_worker ball-l2 --radius 1.0
    python -m smoothcert.eval_worker constant --label 1
    python -m smoothcert.eval_worker halfspace --w 1,0,0 --c 0.0

Stdlib only, so the file can be copied into any Python runtime.
"""

from __future__ import annotations

import argparse
import sys


def _parse_vector(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok != ""]


def _label(mode: str, args: argparse.Namespace, row: list[float]) -> int:
    if mode == "constant":
        return args.label
    if mode == "ball-l2":
        center = args.center or [0.0] * len(row)
        dist = sum((x - c) ** 2 for x, c in zip(row, center)) ** 0.5
        return 1 if dist <= args.radius else 0
    if mode == "ball-linf":
        center = args.center or [0.0] * len(row)
        dist = max(abs(x - c) for x, c in zip(row, center))
        return 1 if dist <= args.radius else 0
    # halfspace
    return 1 if sum(w * x for w, x in zip(args.w, row)) >= args.c else 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("mode", choices=["constant", "ball-l2", "ball-linf", "halfspace"])
    parser.add_argument("--label", type=int, default=1)
    parser.add_argument("--radius", type=float, default=1.0)
    parser.add_argument("--center", type=_parse_vector, default=None)
    parser.add_argument("--w", type=_parse_vector, default=[1.0])
    parser.add_argument("--c", type=float, default=0.0)
    args = parser.parse_args(argv)

    stdin, stdout = sys.stdin, sys.stdout
    while True:
        header = stdin.readline()
        if header == "":
            return 0
        parts = header.split()
        if len(parts) != 3 or parts[0] != "EVAL":
            print(f"bad header: {header!r}", file=sys.stderr)
            return 1
        n, d = int(parts[1]), int(parts[2])
        out = []
        for _ in range(n):
            row = [float(tok) for tok in stdin.readline().split()]
            if len(row) != d:
                print("bad row length", file=sys.stderr)
                return 1
            out.append(f"{_label(args.mode, args, row)}\n")
        stdout.write("".join(out))
        stdout.flush()


if __name__ == "__main__":
    raise SystemExit(main())
