"""Overfit a handful of synthetic documents and print both report tables.

    python3 scripts/overfit_synthetic.py --docs 5 --seed 0
"""

import argparse
import logging
import time

import torch

from simcoref.learning import TrainConfig, document_losses, predict, pretrain_mentions, run_document, train
from simcoref.metrics import evaluate_clusters, mention_recall
from simcoref.synthetic import make_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--docs", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--pretrain-epochs", type=int, default=100)
    parser.add_argument("--epochs", type=int, default=1900)
    parser.add_argument("--lr-decay", type=float, default=1.0)
    parser.add_argument("--log-every", type=int, default=100)
    args = parser.parse_args()
    logging.basicConfig(level=logging.WARNING)

    docs = make_corpus(args.docs, seed=args.seed)
    config = TrainConfig(
        pretrain_epochs=args.pretrain_epochs, epochs=args.epochs, lr_decay=args.lr_decay, seed=args.seed
    )

    def report(phase, epoch, loss, lr_enc, lr_head):
        if epoch % args.log_every == 0:
            print(f"{phase:8s} epoch {epoch:5d}  loss {loss:.6f}  lr {lr_enc:.4g}/{lr_head:.4g}")

    start = time.perf_counter()
    model = pretrain_mentions(docs, config, callback=report)
    model = train(docs, config, model, callback=report)
    preds = predict(model, docs, config)
    with torch.no_grad():
        final = sum(document_losses(run_document(model, d, config), d, config)[1].item() for d in docs)
    print(f"\nfinal marginal loss {final:.6f}  ({time.perf_counter() - start:.1f}s)\n")
    print(evaluate_clusters((d.clusters, p.clusters) for d, p in zip(docs, preds)).to_table("synthetic"))
    print()
    print(mention_recall([d.gold_mentions for d in docs], [p.proposed for p in preds]).to_table("synthetic"))


if __name__ == "__main__":
    main()
