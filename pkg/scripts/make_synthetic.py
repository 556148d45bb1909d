"""Write a synthetic CoNLL-2012 corpus for trying the CLI end to end.

    python3 scripts/make_synthetic.py --out /tmp/synth.conll
    simcoref preprocess --input /tmp/synth.conll --output /tmp/synth.jsonl
"""

import argparse

from simcoref.corpus import write_conll
from simcoref.synthetic import make_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True)
    parser.add_argument("--docs", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-tokens", type=int, default=40)
    parser.add_argument("--speakers", action="store_true", help="alternate two named speakers")
    args = parser.parse_args()
    docs = make_corpus(args.docs, seed=args.seed, max_tokens=args.max_tokens, speakers=args.speakers)
    with open(args.out, "w", encoding="utf-8") as fh:
        write_conll(docs, fh)
    print(f"wrote {len(docs)} documents to {args.out}")


if __name__ == "__main__":
    main()
