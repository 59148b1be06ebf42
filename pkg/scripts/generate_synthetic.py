#!/usr/bin/env python3
"""Generate the seeded synthetic corpus/annotation world, or a bulk timing corpus.

Examples:
    python3 scripts/generate_synthetic.py --out /tmp/world --seed 42
    python3 scripts/generate_synthetic.py --out /tmp/bulk --throughput-bytes 5242880
"""
from __future__ import annotations

import argparse
import json
from pathlib import Path

from comorbid.synth import generate_throughput_corpus, generate_world


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument(
        "--throughput-bytes",
        type=int,
        default=None,
        help="instead of the annotated world, write a bulk corpus of at least this many text bytes",
    )
    args = parser.parse_args()
    out = Path(args.out)
    if args.throughput_bytes is not None:
        out.mkdir(parents=True, exist_ok=True)
        path = out / "corpus.jsonl"
        total = generate_throughput_corpus(path, seed=args.seed, target_bytes=args.throughput_bytes)
        print(f"wrote {total} bytes of note text -> {path}")
        return 0
    world = generate_world(out, seed=args.seed)
    meta = json.loads(world.meta_path.read_text(encoding="utf-8"))
    print(
        f"wrote synthetic world to {out}: {meta['documents']} documents, "
        f"{meta['planted_mentions']} planted mentions, {meta['conditions']} conditions"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
