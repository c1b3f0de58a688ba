"""Command line: ``asa gen-data | train-si | adapt | eval | sweep``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .adapt import METHODS, SUPERVISION, AdaptConfig, adapt
from .datagen import CorpusConfig, build_corpus
from .errors import FormatError, ShapeError, TrainingDiverged
from .formats import check_compatible, load_checkpoint, load_dataset, save_checkpoint, save_dataset
from .harness import SIConfig, SweepPlan, evaluate, format_csv, grid, run_experiment, train_si_from
from .metrics import frame_error_rate
from .models import AcousticModel

DATA_FILES = ("si_train", "si_heldout", "target_adapt", "target_test")
_ADAPT_DEFAULTS = AdaptConfig()


def _sizes(text: str) -> tuple[int, ...]:
    try:
        out = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("layer sizes must be positive")
    return out


def _add_adapt_flags(p: argparse.ArgumentParser, sweep: bool = False) -> None:
    d = _ADAPT_DEFAULTS
    many = dict(nargs="+") if sweep else {}
    p.add_argument("--method", choices=METHODS, default=[d.method] if sweep else d.method, **many)
    p.add_argument("--lambda", dest="lam", type=float, default=[d.lam] if sweep else d.lam,
                   help="GRL weight (asa, asa_sp)", **many)
    p.add_argument("--rho", type=float, default=[d.rho] if sweep else d.rho,
                   help="SI-posterior weight in the KLD targets", **many)
    p.add_argument("--mu", type=float, default=d.mu, help=f"SGD learning rate (default {d.mu})")
    p.add_argument("--epochs", type=int, default=d.epochs, help=f"adaptation epochs (default {d.epochs})")
    p.add_argument("--batch-size", type=int, default=d.batch_size, help=f"minibatch size (default {d.batch_size})")
    p.add_argument("--n-h", type=int, default=None, help="expected split index of the SI model")
    p.add_argument("--supervision", choices=SUPERVISION, default=d.supervision)
    p.add_argument("--disc-hidden", type=_sizes, default=d.disc_hidden,
                   help="discriminator hidden sizes, e.g. 64,64")


def _adapt_config(a: argparse.Namespace, **over) -> AdaptConfig:
    kw = dict(method=a.method, lam=a.lam, rho=a.rho, mu=a.mu, epochs=a.epochs, batch_size=a.batch_size,
              seed=a.seed, supervision=a.supervision, n_h=a.n_h, disc_hidden=a.disc_hidden)
    kw.update(over)
    return AdaptConfig(**kw)


def _load_model(path) -> AcousticModel:
    m = load_checkpoint(path)
    if not isinstance(m, AcousticModel):
        raise ShapeError(f"{path} holds a discriminator, not an acoustic model")
    return m


def _require(*paths) -> None:
    for p in paths:
        if not Path(p).is_file():
            raise FileNotFoundError(f"no such file: {p}")


# ---------------------------------------------------------------- commands

def cmd_gen_data(a) -> None:
    cfg = CorpusConfig(seed=a.seed, input_dim=a.input_dim, num_senones=a.num_senones,
                       adapt_pool_frames=a.adapt_frames, target_test_frames=a.test_frames)
    corpus = build_corpus(cfg)
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in DATA_FILES:
        save_dataset(getattr(corpus, name), out / f"{name}.asad")
        print(f"wrote {out / name}.asad ({len(getattr(corpus, name))} frames)")


def cmd_train_si(a) -> None:
    _require(a.data)
    data = load_dataset(a.data)
    cfg = SIConfig(hidden=a.hidden, epochs=a.epochs, mu=a.mu, batch_size=a.batch_size, n_h=a.n_h, seed=a.seed)
    si = train_si_from(cfg, data)
    save_checkpoint(si, a.out)
    print(f"wrote {a.out}; training-set FER {frame_error_rate(si, data):.4f}")


def cmd_adapt(a) -> None:
    _require(a.si, a.data)
    si = _load_model(a.si)
    data = load_dataset(a.data)
    check_compatible(si, data)
    if a.frames is not None:
        data = data.head(a.frames)
    result = adapt(si, data, _adapt_config(a))
    save_checkpoint(result.sd, a.out)
    if a.disc_out and result.disc is not None:
        save_checkpoint(result.disc, a.disc_out)
    t = result.trace
    last = f"senone loss {t.senone_loss[-1]:.4f}, disc loss {t.disc_loss[-1]:.4f}" if t.senone_loss else "no epochs run"
    print(f"wrote {a.out} after {len(t.senone_loss)} epochs on {len(data)} frames; {last}")


def cmd_eval(a) -> None:
    _require(a.model, a.test, *([a.si] if a.si else []))
    m = _load_model(a.model)
    test = load_dataset(a.test)
    check_compatible(m, test)
    if a.si is None:
        print(f"fer={frame_error_rate(m, test):.6f}")
        return
    r = evaluate(m, _load_model(a.si), test, a.method, 0.0, 0.0, 0, a.seed)
    print(f"fer={r.frame_error_rate:.6f} probe_acc={r.probe_accuracy:.6f} mmd={r.mmd:.6f}")


def cmd_sweep(a) -> None:
    methods = list(dict.fromkeys(a.method))
    base = _adapt_config(a, method=methods[0], lam=0.0, rho=0.0)
    plan = SweepPlan(a.si, a.adapt_data, a.test, grid(base, methods, a.sizes, a.lam, a.rho), list(a.seeds))
    rows = run_experiment(plan, a.out, jobs=a.jobs, deterministic=a.deterministic)
    if a.out is None:
        sys.stdout.write(format_csv(rows, a.deterministic))
    else:
        print(f"wrote {a.out} ({len(rows)} rows)")


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="asa", description="Adversarial speaker adaptation on synthetic frames.")
    sub = p.add_subparsers(dest="command", required=True)
    corpus = CorpusConfig()
    si = SIConfig()

    g = sub.add_parser("gen-data", help="write a synthetic corpus as .asad files")
    g.add_argument("--out-dir", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--input-dim", type=int, default=corpus.input_dim)
    g.add_argument("--num-senones", type=int, default=corpus.num_senones)
    g.add_argument("--adapt-frames", type=int, default=corpus.adapt_pool_frames, help="size of the adaptation pool")
    g.add_argument("--test-frames", type=int, default=corpus.target_test_frames)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train-si", help="train the speaker-independent model")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--hidden", type=_sizes, default=si.hidden, help="hidden sizes, e.g. 64,64,64,16")
    t.add_argument("--epochs", type=int, default=si.epochs)
    t.add_argument("--mu", type=float, default=si.mu)
    t.add_argument("--batch-size", type=int, default=si.batch_size)
    t.add_argument("--n-h", type=int, default=None, help="split index (default: all hidden layers)")
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_train_si)

    ad = sub.add_parser("adapt", help="adapt a copy of the SI model to one speaker")
    ad.add_argument("--si", required=True)
    ad.add_argument("--data", required=True)
    ad.add_argument("--out", required=True)
    ad.add_argument("--frames", type=int, default=None, help="use only the first N frames")
    ad.add_argument("--disc-out", default=None, help="also save the trained discriminator")
    ad.add_argument("--seed", type=int, default=0)
    _add_adapt_flags(ad)
    ad.set_defaults(func=cmd_adapt)

    e = sub.add_parser("eval", help="frame error rate, and probe/MMD against --si")
    e.add_argument("--model", required=True)
    e.add_argument("--test", required=True)
    e.add_argument("--si", default=None)
    e.add_argument("--method", choices=METHODS, default="asa", help="asa_sp probes posteriors, others features")
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="run a method x weight x size grid and write a CSV report")
    s.add_argument("--si", required=True)
    s.add_argument("--adapt-data", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--out", default=None, help="CSV path (default: stdout)")
    s.add_argument("--sizes", type=int, nargs="+", default=[50, 100, 200, 400])
    s.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    s.add_argument("--seed", type=int, default=0, help=argparse.SUPPRESS)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--deterministic", action="store_true", help="omit the timestamp line")
    _add_adapt_flags(s, sweep=True)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (FileNotFoundError, FormatError, ShapeError, TrainingDiverged) as e:
        print(f"asa {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
