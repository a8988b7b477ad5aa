"""Command-line interface tying the training, evaluation, and oracle tools together.

Exit codes: 0 on success, 1 on usage errors, 2 on runtime or estimation
failures.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import likelihood, model, modelio, oracle, train as train_mod
from .data import (BinaryDataset, IDX_IMAGE_MAGIC, SyntheticSpec,
                   generate_synthetic, load_dense_text, load_idx,
                   save_dense_text)
from .exceptions import FlowtrainError
from .flow import (ODD_FUNCTIONS, OneBitFlip, TransitionSpec,
                   enumerate_full_flow, one_bit_flip_flow)
from .oracle import build_chain, check_detailed_balance, stationarity_residual
from .train import TrainConfig

BALANCE_TOLERANCE = 1e-10
STATIONARITY_TOLERANCE = 1e-10
EQUIVALENCE_TOLERANCE = 1e-10


class _Parser(argparse.ArgumentParser):
    """argparse terminates with status 2 on bad usage; we reserve 2 for
    runtime failures and use 1 for usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def load_dataset(path: str, threshold: float = 0.5) -> BinaryDataset:
    """Load IDX (by magic number) or dense-text data from ``path``."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if len(head) == 4 and int.from_bytes(head, "big") == IDX_IMAGE_MAGIC:
        return load_idx(path, threshold=threshold)
    return load_dense_text(path)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flowtrain",
                     description="Train and evaluate Bernoulli RBMs with "
                                 "probability-flow and contrastive-divergence methods.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model on a dataset")
    p_train.add_argument("--method", required=True, choices=train_mod.METHODS)
    p_train.add_argument("--data", required=True, help="IDX or dense-text dataset")
    p_train.add_argument("--out", required=True, help="output model file")
    p_train.add_argument("--metrics", help="metrics CSV path (default: <out>.csv)")
    p_train.add_argument("--hidden", type=int, default=20)
    p_train.add_argument("--k", type=int, default=1)
    p_train.add_argument("--lr", type=float, default=0.05)
    p_train.add_argument("--epochs", type=int, default=20)
    p_train.add_argument("--batch-size", type=int, default=None,
                         help="default 25 for flow methods, 100 for cd/pcd")
    p_train.add_argument("--chains", type=int, default=25)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--eval-every", type=int, default=0,
                         help="epochs between exact log-likelihood evaluations")
    p_train.add_argument("--tau", type=float, default=1.0)
    p_train.add_argument("--threshold", type=float, default=0.5,
                         help="binarization threshold for IDX pixel data")
    p_train.add_argument("--deterministic", action="store_true",
                         help="blank the wall-clock column so repeated runs are "
                              "byte-identical")

    p_eval = sub.add_parser("eval", help="evaluate a model's log-likelihood")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--estimator", required=True, choices=("exact", "ais", "csl"))
    p_eval.add_argument("--threshold", type=float, default=0.5)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--ais-temps", type=int, default=10_000)
    p_eval.add_argument("--ais-chains", type=int, default=100)
    p_eval.add_argument("--ais-transitions", type=int, default=1)
    p_eval.add_argument("--csl-samples", type=int, default=500)
    p_eval.add_argument("--csl-burn-in", type=int, default=2000)
    p_eval.add_argument("--csl-thinning", type=int, default=10)

    p_sample = sub.add_parser("sample", help="export model samples as a PGM grid")
    p_sample.add_argument("--model", required=True)
    p_sample.add_argument("--out", required=True)
    p_sample.add_argument("--n", type=int, default=25)
    p_sample.add_argument("--gibbs-steps", type=int, default=100)
    p_sample.add_argument("--grid-side", type=int, default=5)
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--width", type=int)
    p_sample.add_argument("--height", type=int)
    p_sample.add_argument("--init-data", help="initialize chains at rows of this dataset")
    p_sample.add_argument("--threshold", type=float, default=0.5)

    p_oracle = sub.add_parser("oracle", help="run dynamics ground-truth checks")
    p_oracle.add_argument("--check", required=True,
                          choices=("balance", "stationarity", "taylor", "flow-equivalence"))
    p_oracle.add_argument("--dim", type=int, default=6, help="visible units (<= 12)")
    p_oracle.add_argument("--hidden", type=int, default=4)
    p_oracle.add_argument("--trials", type=int, default=50)
    p_oracle.add_argument("--odd", default="zero", choices=sorted(ODD_FUNCTIONS))
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.add_argument("--sigma", type=float, default=1.0,
                          help="std of the random Gaussian parameters")
    p_oracle.add_argument("--csv", help="write per-trial results to this CSV")

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--generator", required=True,
                         choices=("bars", "parity", "teacher-rbm"))
    p_synth.add_argument("--n", type=int, required=True)
    p_synth.add_argument("--out", required=True, help="dense-text output path")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--side", type=int, help="grid side for bars")
    p_synth.add_argument("--bits", type=int, help="vector length for parity")
    p_synth.add_argument("--teacher-model", help="model file for teacher-rbm")
    return parser


def _cmd_train(args) -> int:
    dataset = load_dataset(args.data, args.threshold)
    batch_size = args.batch_size
    if batch_size is None:
        batch_size = 100 if args.method in ("cd", "pcd") else 25
    batch_size = min(batch_size, dataset.n_examples)
    config = TrainConfig(method=args.method, learning_rate=args.lr,
                         epochs=args.epochs, batch_size=batch_size, k=args.k,
                         n_chains=args.chains, seed=args.seed,
                         eval_every=args.eval_every)
    params0 = model.init_params(dataset.n_features, args.hidden,
                                seed=args.seed, tau=args.tau)
    hook = None
    if args.eval_every > 0 and min(dataset.n_features, args.hidden) <= model.ENUMERATION_LIMIT:
        hook = lambda params, epoch: model.exact_avg_log_likelihood(params, dataset.rows)
    params, trace = train_mod.fit(params0, dataset.rows, config, eval_hook=hook)
    provenance = {"method": args.method, "k": args.k, "seed": args.seed,
                  "epochs": args.epochs, "lr": args.lr, "data": args.data}
    modelio.save_model(args.out, params, provenance)
    metrics = args.metrics or (args.out + ".csv")
    trace.write_csv(metrics, include_seconds=not args.deterministic)
    print(f"trained {args.method} model -> {args.out} (metrics: {metrics})")
    return 0


def _cmd_eval(args) -> int:
    params = modelio.load_model(args.model)
    dataset = load_dataset(args.data, args.threshold)
    if args.estimator == "exact":
        estimate = likelihood.exact_avg_log_likelihood(params, dataset.rows)
    elif args.estimator == "ais":
        cfg = likelihood.AisConfig(
            n_temperatures=args.ais_temps, n_chains=args.ais_chains,
            transitions_per_temp=args.ais_transitions, seed=args.seed,
            base_visible_bias=likelihood.base_biases_from_data(dataset.rows))
        estimate = likelihood.ais_avg_log_likelihood(params, dataset.rows, cfg)
    else:
        cfg = likelihood.CslConfig(
            n_hidden_samples=args.csl_samples, burn_in=args.csl_burn_in,
            thinning=args.csl_thinning, seed=args.seed)
        estimate = likelihood.csl_log_likelihood(params, dataset.rows, cfg)
    print(f"{estimate.method} avg log-likelihood: {estimate.value:.6f} "
          f"(std error {estimate.std_error:.6f}, n={dataset.n_examples})")
    return 0


def _cmd_sample(args) -> int:
    params = modelio.load_model(args.model)
    init_states = None
    if args.init_data:
        init_states = load_dataset(args.init_data, args.threshold).rows
    modelio.export_samples_pgm(args.out, params, n=args.n,
                               gibbs_steps=args.gibbs_steps,
                               grid_side=args.grid_side, seed=args.seed,
                               width=args.width, height=args.height,
                               init_states=init_states)
    print(f"wrote sample grid -> {args.out}")
    return 0


def _random_params(rng, d: int, h: int, sigma: float) -> model.RbmParams:
    return model.RbmParams(rng.normal(0, sigma, (d, h)),
                           rng.normal(0, sigma, d),
                           rng.normal(0, sigma, h))


def _cmd_oracle(args) -> int:
    if args.dim > oracle.MAX_ORACLE_BITS:
        raise FlowtrainError(f"--dim must be <= {oracle.MAX_ORACLE_BITS}")
    rng = np.random.default_rng(args.seed)
    odd = ODD_FUNCTIONS[args.odd]
    rows_out = []
    worst = 0.0
    ok = True

    for trial in range(args.trials):
        d = int(rng.integers(2, args.dim + 1))
        h = int(rng.integers(1, args.hidden + 1))
        params = _random_params(rng, d, h, args.sigma)
        if args.check in ("balance", "stationarity"):
            chain = build_chain(params, TransitionSpec(OneBitFlip(), odd))
            if args.check == "balance":
                value = check_detailed_balance(chain, params)
            else:
                value = stationarity_residual(chain, params)
            worst = max(worst, value)
            rows_out.append({"trial": trial, "check": args.check, "d": d, "h": h,
                             "value": value})
        elif args.check == "taylor":
            chain = build_chain(params, TransitionSpec(OneBitFlip(), odd))
            n_rows = min(int(rng.integers(2, 5)), (1 << d) - 1)
            idx = rng.choice(1 << d, size=n_rows, replace=False)
            data_rows = model.enumerate_states(d)[idx]
            table = oracle.taylor_check(chain, data_rows, (1e-2, 1e-3, 1e-4))
            j = table[0].linear_prediction / table[0].epsilon
            ratios = [abs(r.kl_divergence / r.epsilon - j) / abs(j) for r in table]
            if not (ratios[0] > ratios[1] > ratios[2]):
                ok = False
            worst = max(worst, ratios[-1])
            for r in table:
                rows_out.append({"trial": trial, "check": "taylor", "d": d, "h": h,
                                 "epsilon": r.epsilon, "kl": r.kl_divergence,
                                 "prediction": r.linear_prediction})
        else:  # flow-equivalence
            spec = SyntheticSpec("parity", n_samples=8, seed=int(rng.integers(2**31)),
                                 n_bits=d)
            batch = generate_synthetic(spec).rows
            sparse = one_bit_flip_flow(params, batch).objective
            p0 = oracle.empirical_distribution(batch, d)
            g = _one_bit_adjacency(d)
            dense = enumerate_full_flow(params, p0, g)
            value = abs(sparse - dense) / max(abs(dense), 1e-300)
            worst = max(worst, value)
            rows_out.append({"trial": trial, "check": args.check, "d": d, "h": h,
                             "value": value})

    if args.csv:
        keys = sorted({k for row in rows_out for k in row})
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=keys)
            writer.writeheader()
            writer.writerows(rows_out)

    if args.check == "balance":
        ok = worst < BALANCE_TOLERANCE
        print(f"detailed balance: max relative violation {worst:.3e} over "
              f"{args.trials} trials (odd={args.odd}) -> {'ok' if ok else 'FAIL'}")
    elif args.check == "stationarity":
        ok = worst < STATIONARITY_TOLERANCE
        print(f"stationarity: max residual {worst:.3e} over {args.trials} trials "
              f"-> {'ok' if ok else 'FAIL'}")
    elif args.check == "taylor":
        print(f"taylor: ratio decreasing on all trials -> {'ok' if ok else 'FAIL'} "
              f"(final ratio <= {worst:.3e})")
    else:
        ok = worst < EQUIVALENCE_TOLERANCE
        print(f"flow equivalence: max relative error {worst:.3e} over "
              f"{args.trials} trials -> {'ok' if ok else 'FAIL'}")
    return 0 if ok else 2


def _one_bit_adjacency(d: int) -> np.ndarray:
    n = 1 << d
    g = np.zeros((n, n))
    idx = np.arange(n)
    for bit in range(d):
        g[idx ^ (1 << bit), idx] = 1.0
    return g


def _cmd_synth(args) -> int:
    if args.generator == "bars":
        spec = SyntheticSpec("bars", n_samples=args.n, seed=args.seed, side=args.side)
    elif args.generator == "parity":
        spec = SyntheticSpec("parity", n_samples=args.n, seed=args.seed,
                             n_bits=args.bits)
    else:
        if not args.teacher_model:
            raise FlowtrainError("teacher-rbm requires --teacher-model")
        params = modelio.load_model(args.teacher_model)
        spec = SyntheticSpec("teacher_rbm", n_samples=args.n, seed=args.seed,
                             params=params)
    dataset = generate_synthetic(spec)
    save_dense_text(args.out, dataset)
    print(f"wrote {dataset.n_examples} x {dataset.n_features} dataset -> {args.out}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "sample": _cmd_sample,
    "oracle": _cmd_oracle,
    "synth": _cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (FlowtrainError, OSError, ValueError) as exc:
        print(f"flowtrain: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
