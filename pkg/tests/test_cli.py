from dataclasses import fields

import numpy as np
import pytest

from asa.adapt import AdaptConfig, train_si
from asa.cli import build_parser, main
from asa.datagen import CorpusConfig, build_corpus
from asa.errors import ShapeError
from asa.formats import load_checkpoint, load_dataset, save_checkpoint, save_dataset
from asa.harness import CSV_FIELDS, EvalReport, SweepPlan, grid, read_csv, run_experiment
from asa.metrics import frame_error_rate

SMALL = CorpusConfig(n_si_speakers=3, si_frames=600, si_heldout_frames=100, adapt_pool_frames=400,
                     target_test_frames=300)


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    root = tmp_path_factory.mktemp("sweep")
    c = build_corpus(SMALL)
    si = train_si(c.si_train, [16, 8], epochs=10, mu=0.05, seed=0)
    paths = {"si": root / "si.asam", "adapt": root / "adapt.asad", "test": root / "test.asad"}
    save_checkpoint(si, paths["si"])
    save_dataset(c.target_adapt, paths["adapt"])
    save_dataset(c.target_test, paths["test"])
    return {k: str(v) for k, v in paths.items()}


def plan(files, cells, seeds=(0,)):
    return SweepPlan(files["si"], files["adapt"], files["test"], cells, list(seeds))


def test_report_validates_fractions():
    with pytest.raises(ShapeError):
        EvalReport("asa", 1.0, 0.0, 50, 0, 1.2, 0.5, 0.0)
    with pytest.raises(ShapeError):
        EvalReport("asa", 1.0, 0.0, 50, 0, 0.2, 0.5, -0.1)


def test_report_row_echoes_descriptors():
    r = EvalReport("kld", 0.0, 0.2, 100, 3, 0.1, 0.55, 0.01)
    assert r.row()[:5] == ["kld", "0.0", "0.2", "100", "3"]


def test_grid_shape():
    cells = grid(AdaptConfig(), ["asa"], [50, 100, 200, 400], lambdas=[1.0, 3.0, 5.0])
    assert len(cells) == 12
    assert len({c.key for c in cells}) == 12
    mixed = grid(AdaptConfig(), ["finetune", "kld", "asa_sp"], [50], lambdas=[1.0, 3.0], rhos=[0.2, 0.5, 0.8])
    assert [c.config.method for c in mixed] == ["finetune", "kld", "kld", "kld", "asa_sp", "asa_sp"]


def test_zero_epoch_fine_tune_reports_si_fer(files):
    rows = run_experiment(plan(files, grid(AdaptConfig(epochs=0), ["finetune"], [50])))
    si = load_checkpoint(files["si"])
    fer = frame_error_rate(si, load_dataset(files["test"]))
    assert rows[0].method == "si" and rows[0].frame_error_rate == fer
    assert all(r.frame_error_rate == fer for r in rows)


def test_lambda_sweep_emits_twelve_aggregate_rows(files, tmp_path):
    cells = grid(AdaptConfig(epochs=1), ["asa"], [50, 100, 200, 400], lambdas=[1.0, 3.0, 5.0])
    run_experiment(plan(files, cells), tmp_path / "r.csv", deterministic=True)
    rows = read_csv(tmp_path / "r.csv")
    assert tuple(rows[0].keys()) == CSV_FIELDS
    agg = [r for r in rows if r["seed"] == "mean"]
    assert len(agg) == 12
    assert len({(r["lambda"], r["adapt_frames"]) for r in agg}) == 12
    assert rows[0]["method"] == "si"
    assert len(rows) == 1 + 12 + 12


def test_missing_inputs_fail_before_training(files, tmp_path):
    bad = SweepPlan(str(tmp_path / "nope.asam"), files["adapt"], str(tmp_path / "gone.asad"),
                    grid(AdaptConfig(), ["asa"], [50]))
    with pytest.raises(FileNotFoundError) as e:
        run_experiment(bad)
    assert "nope.asam" in str(e.value) and "gone.asad" in str(e.value)


def test_oversized_cell_rejected(files):
    with pytest.raises(ShapeError):
        run_experiment(plan(files, grid(AdaptConfig(), ["finetune"], [10_000])))


def test_sweep_csv_is_reproducible_and_independent_of_jobs(files, tmp_path):
    cells = grid(AdaptConfig(epochs=2), ["finetune", "asa"], [50, 100], lambdas=[1.0])
    p = plan(files, cells, seeds=(0, 1))
    run_experiment(p, tmp_path / "a.csv", deterministic=True)
    run_experiment(p, tmp_path / "b.csv", deterministic=True)
    run_experiment(p, tmp_path / "c.csv", jobs=2, deterministic=True)
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes() == (tmp_path / "c.csv").read_bytes()
    run_experiment(p, tmp_path / "d.csv")
    stamped = (tmp_path / "d.csv").read_text().splitlines()
    assert stamped[0].startswith("# generated ")
    assert "\n".join(stamped[1:]) + "\n" == a.decode()


def test_sweep_aggregates_are_seed_means(files):
    cells = grid(AdaptConfig(epochs=1), ["finetune"], [50])
    rows = run_experiment(plan(files, cells, seeds=(0, 1, 2)))
    per_seed = [r for r in rows if isinstance(r.seed, int)]
    assert [r.seed for r in per_seed] == [0, 1, 2]
    assert rows[-1].seed == "mean"
    assert rows[-1].frame_error_rate == pytest.approx(np.mean([r.frame_error_rate for r in per_seed]))


# --------------------------------------------------------------------- CLI

def test_adapt_flags_mirror_config():
    p = build_parser()
    a = p.parse_args(["adapt", "--si", "s", "--data", "d", "--out", "o", "--method", "kld", "--lambda", "3",
                      "--rho", "0.2", "--mu", "0.05", "--epochs", "7", "--batch-size", "16", "--seed", "4",
                      "--n-h", "2", "--supervision", "unsupervised", "--disc-hidden", "32,32"])
    got = dict(method=a.method, lam=a.lam, rho=a.rho, mu=a.mu, epochs=a.epochs, batch_size=a.batch_size,
               seed=a.seed, n_h=a.n_h, supervision=a.supervision, disc_hidden=a.disc_hidden)
    assert set(got) == {f.name for f in fields(AdaptConfig)}
    assert got == dict(method="kld", lam=3.0, rho=0.2, mu=0.05, epochs=7, batch_size=16, seed=4, n_h=2,
                       supervision="unsupervised", disc_hidden=(32, 32))


def test_cli_round_trip(tmp_path, capsys):
    d = tmp_path / "data"
    assert main(["gen-data", "--out-dir", str(d), "--seed", "2", "--test-frames", "500"]) == 0
    assert main(["train-si", "--data", str(d / "si_train.asad"), "--out", str(tmp_path / "si.asam"),
                 "--hidden", "16,8", "--epochs", "3"]) == 0
    assert main(["adapt", "--si", str(tmp_path / "si.asam"), "--data", str(d / "target_adapt.asad"),
                 "--frames", "100", "--method", "asa_sp", "--epochs", "2", "--out", str(tmp_path / "sd.asam"),
                 "--disc-out", str(tmp_path / "d.asam")]) == 0
    assert load_checkpoint(tmp_path / "d.asam").input_dim == 10
    capsys.readouterr()
    assert main(["eval", "--model", str(tmp_path / "sd.asam"), "--test", str(d / "target_test.asad"),
                 "--si", str(tmp_path / "si.asam"), "--method", "asa_sp"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("fer=") and "probe_acc=" in out and "mmd=" in out


def test_cli_sweep_to_stdout(files, capsys):
    assert main(["sweep", "--si", files["si"], "--adapt-data", files["adapt"], "--test", files["test"],
                 "--method", "finetune", "--sizes", "50", "--seeds", "0", "--epochs", "1", "--deterministic"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == ",".join(CSV_FIELDS)
    assert len(lines) == 1 + 3


def test_cli_missing_file_is_an_error(files, capsys):
    assert main(["sweep", "--si", "missing.asam", "--adapt-data", files["adapt"], "--test", files["test"]]) == 1
    assert "missing.asam" in capsys.readouterr().err


def test_cli_rejects_mismatched_dataset(files, tmp_path, capsys):
    from asa.datagen import FrameDataset

    save_dataset(FrameDataset(np.zeros((5, 3)), [0] * 5, "x", 10), tmp_path / "bad.asad")
    code = main(["adapt", "--si", files["si"], "--data", str(tmp_path / "bad.asad"), "--out", str(tmp_path / "o.asam")])
    assert code == 1
    assert "r_x" in capsys.readouterr().err
    assert not (tmp_path / "o.asam").exists()
