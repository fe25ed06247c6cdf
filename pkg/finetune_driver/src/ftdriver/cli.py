"""ftdriver command line: init-base, train, predict."""
from __future__ import annotations

import argparse
import sys

from .formats import FormatError
from .model import AdapterLoadError, BaseConfig, init_base
from .predict import predict
from .train import train


def _cmd_init_base(args) -> int:
    config = BaseConfig(
        d_model=args.dim, n_layers=args.layers, n_heads=args.heads,
        max_len=args.max_len, seed=args.seed,
    )
    init_base(config, args.out)
    print(f"wrote base checkpoint to {args.out}")
    return 0


def _cmd_train(args) -> int:
    loss_log = train(args.config, args.pairs, args.base, args.out, seed=args.seed)
    print(f"trained {len(loss_log)} epochs; loss {loss_log[0]:.4f} -> {loss_log[-1]:.4f}")
    print(f"wrote adapter to {args.out}")
    return 0


def _cmd_predict(args) -> int:
    records = predict(
        args.adapter, args.manifest, args.taxonomy, args.out,
        repetitions=args.reps, mode=args.mode, max_new_tokens=args.max_new_tokens,
    )
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ftdriver", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init-base", help="create the frozen base checkpoint")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=96)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--max-len", type=int, default=2048)
    p.set_defaults(func=_cmd_init_base)

    p = sub.add_parser("train", help="train LoRA adapters on exported pairs")
    p.add_argument("--config", required=True, help="#ftconfig-v1 file")
    p.add_argument("--pairs", required=True, help="#ftpairs-v1 file")
    p.add_argument("--base", required=True, help="base checkpoint from init-base")
    p.add_argument("--out", required=True, help="adapter artifact path")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="run inference over a corpus manifest")
    p.add_argument("--adapter", required=True)
    p.add_argument("--manifest", required=True, help="#corpus-v1 file")
    p.add_argument("--taxonomy", required=True, help="#taxonomy-v1 fixture")
    p.add_argument("--out", required=True, help="#predictions-v1 output path")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--mode", default="ft")
    p.add_argument("--max-new-tokens", type=int, default=32)
    p.set_defaults(func=_cmd_predict)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, AdapterLoadError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
