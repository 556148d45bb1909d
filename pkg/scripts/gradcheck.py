"""Compare autograd gradients with central finite differences, per parameter."""

import argparse

from simcoref.encoder import EncoderConfig
from simcoref.gradcheck import gradient_check
from simcoref.learning import TrainConfig
from simcoref.model import CorefModel, ModelConfig
from simcoref.synthetic import make_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=11)
    parser.add_argument("--step", type=float, default=1e-5)
    parser.add_argument("--floor", type=float, default=1e-4, help="denominator floor of the relative error")
    parser.add_argument("--detect-scope", choices=["all", "pruned"], default="all")
    args = parser.parse_args()

    model = CorefModel(ModelConfig(EncoderConfig(dim=4, max_segment=8, vocab_size=64, seed=args.seed), hidden=8))
    docs = make_corpus(2, seed=args.seed, max_tokens=20)
    config = TrainConfig(max_width=4, detect_scope=args.detect_scope)
    errors = gradient_check(model, docs, config, step=args.step, floor=args.floor)
    width = max(map(len, errors))
    for name, err in errors.items():
        print(f"{name:{width}s}  {err:.3e}")
    print(f"{'max':{width}s}  {max(errors.values()):.3e}")


if __name__ == "__main__":
    main()
