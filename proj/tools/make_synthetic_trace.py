#!/usr/bin/env python3
"""Writes a small drifting-popularity trace in the `timestamp,key` format.

Keys follow a Zipf law whose ranking is partially reshuffled halfway through,
so the trace has the kind of popularity drift the trace experiments probe.
"""
import argparse
import random


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--records", type=int, default=20000)
    ap.add_argument("--keys", type=int, default=300)
    ap.add_argument("--alpha", type=float, default=0.9)
    ap.add_argument("--reshuffle", type=float, default=0.3, help="fraction of ranks moved in the second half")
    ap.add_argument("--seed", type=int, default=20240601)
    ap.add_argument("--out", default="configs/data/synthetic_trace.csv")
    args = ap.parse_args()

    rng = random.Random(args.seed)
    keys = [f"obj{i:04d}" for i in range(args.keys)]
    weights = [1.0 / (r + 1) ** args.alpha for r in range(args.keys)]
    first = keys[:]
    second = keys[:]
    moved = rng.sample(range(args.keys), int(args.reshuffle * args.keys))
    shuffled = moved[:]
    rng.shuffle(shuffled)
    for src, dst in zip(moved, shuffled):
        second[dst] = first[src]

    t = 0.0
    with open(args.out, "w") as f:
        f.write("timestamp,key\n")
        for i in range(args.records):
            order = first if i < args.records // 2 else second
            t += rng.expovariate(1.0)
            f.write(f"{t:.6f},{rng.choices(order, weights)[0]}\n")


if __name__ == "__main__":
    main()
