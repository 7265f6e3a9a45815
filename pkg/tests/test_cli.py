"""Command-line interface: argument parsing, exit-code contract, artifact
files, and manifest reproducibility.

Commands run in-process through main(argv) so exit codes and files can be
asserted directly; one subprocess test covers the installed entry point.
"""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from hrtfkit.archive import save_archive
from hrtfkit.cli import build_parser, main
from hrtfkit.siren import load_model
from hrtfkit.synthetic import fibonacci_directions, make_archive, ring_directions

TRAIN_FLAGS = [
    "--epochs", "2", "--batch-size", "2", "--latent-dim", "3",
    "--hidden-dim", "10", "--n-hidden", "1", "--n-bins", "8",
    "--lr0", "1e-3", "--precision", "f64",
]


@pytest.fixture(scope="module")
def tiny_archive(tmp_path_factory):
    """One subject (two ears) on a 3-ring, 12-azimuth grid."""
    path = tmp_path_factory.mktemp("data") / "tiny.hrdf"
    arc = make_archive("tiny", 1, ring_directions([-30.0, 0.0, 30.0], 12),
                       n_taps=32, seed=1)
    save_archive(arc, path)
    return str(path)


@pytest.fixture(scope="module")
def scattered_archive(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "scattered.hrdf"
    arc = make_archive("scat", 1, fibonacci_directions(150), n_taps=32, seed=2)
    save_archive(arc, path)
    return str(path)


@pytest.fixture(scope="module")
def trained_model(tmp_path_factory, tiny_archive):
    out = tmp_path_factory.mktemp("trained")
    code = main(["train", "--data", tiny_archive, "--out", str(out)]
                + TRAIN_FLAGS)
    assert code == 0
    return str(out / "model.hfnf")


# --- parsing ------------------------------------------------------------------


class TestParsing:
    def test_train_defaults(self):
        args = build_parser().parse_args(["train", "--data", "x.hrdf"])
        assert args.epochs == 300
        assert args.batch_size == 18
        assert args.latent_dim == 32
        assert args.hidden_dim == 2048
        assert args.n_hidden == 2
        assert args.n_bins == 92
        assert args.lr0 == 3.0e-4
        assert args.lr_decay == 0.01
        assert args.grad_mode == "exact"
        assert args.latent_steps == 1
        assert args.precision == "f32"
        assert args.seed == 0 and args.threads == 1

    def test_experiment_defaults(self):
        args = build_parser().parse_args(
            ["experiment", "interp-r", "--target", "x.hrdf"]
        )
        assert args.setting == "ours_r"
        assert args.split == "checkerboard"
        assert args.fraction == 0.5
        cg = build_parser().parse_args(
            ["experiment", "cond-gen", "--target", "x.hrdf"]
        )
        assert cg.fractions == [0.05, 0.10, 0.15, 0.20, 0.25]
        assert cg.seeds == [0, 1, 2, 3, 4]
        m = build_parser().parse_args(
            ["experiment", "latent-morph", "--model", "m", "--data", "d"]
        )
        assert m.t == [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]

    def test_usage_errors_exit_1(self):
        assert main([]) == 1
        assert main(["train"]) == 1  # --data is required
        assert main(["baseline", "--data", "x", "--method", "nearest"]) == 1
        assert main(["frobnicate"]) == 1

    def test_help_exits_0(self, capsys):
        assert main(["--help"]) == 0
        assert "usage" in capsys.readouterr().out


# --- exit codes on failures ------------------------------------------------------


class TestFailureExitCodes:
    def test_missing_file_is_data_error(self, tmp_path, capsys):
        code = main(["train", "--data", str(tmp_path / "nope.hrdf"),
                     "--out", str(tmp_path)] + TRAIN_FLAGS)
        assert code == 2
        assert "data error" in capsys.readouterr().err

    def test_corrupt_file_is_data_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.hrdf"
        bad.write_bytes(b"not an archive at all")
        code = main(["train", "--data", str(bad), "--out", str(tmp_path)]
                    + TRAIN_FLAGS)
        assert code == 2

    def test_numeric_failure_is_exit_3(self, tmp_path, tiny_archive,
                                       monkeypatch, capsys):
        def explode(*a, **kw):
            raise FloatingPointError("non-finite gradient")

        monkeypatch.setattr("hrtfkit.cli.fit", explode)
        code = main(["train", "--data", tiny_archive, "--out", str(tmp_path)]
                    + TRAIN_FLAGS)
        assert code == 3
        assert "numeric failure" in capsys.readouterr().err

    def test_scattered_grid_bilinear_is_data_error(self, tmp_path,
                                                   scattered_archive, capsys):
        code = main(["baseline", "--data", scattered_archive,
                     "--method", "bilinear", "--n-bins", "8",
                     "--out", str(tmp_path)])
        assert code == 2
        assert "ring-structured" in capsys.readouterr().err


# --- train ------------------------------------------------------------------------


class TestTrain:
    def test_artifacts_and_manifest(self, tmp_path, tiny_archive):
        out = tmp_path / "run"
        code = main(["train", "--data", tiny_archive, "--out", str(out)]
                    + TRAIN_FLAGS)
        assert code == 0
        net = load_model(out / "model.hfnf")
        assert net.dims == [5, 10, 8]
        with open(out / "training_log.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["epoch", "lr", "mean_loss", "wall_seconds"]
        assert len(rows) == 3
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["epochs"] == 2
        assert manifest["config"]["precision"] == "f64"
        assert len(manifest["config_hash"]) == 64
        assert manifest["n_ears"] == 2
        assert np.isfinite(manifest["final_loss"])

    def test_reruns_are_byte_identical(self, tmp_path, tiny_archive):
        """Same configuration, same archive: the saved model is identical
        down to the byte, and the manifests share one config hash."""
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["train", "--data", tiny_archive, "--out", str(out)]
                        + TRAIN_FLAGS) == 0
            outs.append(out)
        bytes_a = (outs[0] / "model.hfnf").read_bytes()
        bytes_b = (outs[1] / "model.hfnf").read_bytes()
        assert bytes_a == bytes_b
        hash_a = json.loads((outs[0] / "manifest.json").read_text())["config_hash"]
        hash_b = json.loads((outs[1] / "manifest.json").read_text())["config_hash"]
        assert hash_a != hash_b  # --out differs, so the resolved config differs

    def test_database_norm_flag(self, tmp_path, tiny_archive):
        out = tmp_path / "norm"
        code = main(["train", "--data", tiny_archive, "--out", str(out),
                     "--database-norm"] + TRAIN_FLAGS)
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["database_norm"] is True


# --- baseline ----------------------------------------------------------------------


class TestBaseline:
    def test_vbap_checkerboard(self, tmp_path, tiny_archive):
        out = tmp_path / "vbap"
        code = main(["baseline", "--data", tiny_archive, "--method", "vbap",
                     "--n-bins", "8", "--out", str(out)])
        assert code == 0
        with open(out / "lsd_per_frequency.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["freq_hz", "vbap_reconstruction", "vbap_interpolation"]
        assert len(rows) == 9
        recon = np.array([float(r[1]) for r in rows[1:]])
        interp = np.array([float(r[2]) for r in rows[1:]])
        assert recon.max() < 1.0e-6  # node reproduction
        assert interp.max() > recon.max()
        with open(out / "predictions.csv", newline="") as fh:
            preds = list(csv.reader(fh))
        assert len(preds) == 1 + 2 * 18  # 2 ears, half of 36 locations each
        assert preds[0][:3] == ["subject_id", "azimuth_deg", "elevation_deg"]
        manifest = json.loads((out / "manifest.json").read_text())
        assert set(manifest["overall_lsd_db"]) == {"reconstruction",
                                                   "interpolation"}

    def test_bilinear_decimation(self, tmp_path, tiny_archive):
        out = tmp_path / "bil"
        code = main(["baseline", "--data", tiny_archive, "--method", "bilinear",
                     "--n-bins", "8", "--split", "decimation", "--every-n", "2",
                     "--out", str(out)])
        assert code == 0
        assert (out / "lsd_per_frequency.csv").exists()


# --- experiments -----------------------------------------------------------------------


class TestExperiments:
    def test_interp_r(self, tmp_path, tiny_archive):
        out = tmp_path / "interp"
        code = main(["experiment", "interp-r", "--target", tiny_archive,
                     "--out", str(out)] + TRAIN_FLAGS)
        assert code == 0
        for name in ("reconstruction.csv", "interpolation.csv"):
            with open(out / name, newline="") as fh:
                rows = list(csv.reader(fh))
            assert len(rows) == 9
            assert rows[0][0] == "freq_hz"
            assert len(rows[0]) == 4  # freq + field/vbap/bilinear
        net = load_model(out / "model.hfnf")
        assert net.output_dim == 8
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["overall_lsd_db"]) == 6

    def test_interp_e_needs_others(self, tmp_path, tiny_archive, capsys):
        code = main(["experiment", "interp-e", "--target", tiny_archive,
                     "--out", str(tmp_path / "e")] + TRAIN_FLAGS)
        assert code == 2
        assert "ours_e" in capsys.readouterr().err

    def test_cond_gen_with_model(self, tmp_path, tiny_archive, trained_model):
        """With a pretrained model the bin count comes from the model file,
        so the run needs no training flags and no --n-bins."""
        out = tmp_path / "cg"
        code = main(["experiment", "cond-gen", "--target", tiny_archive,
                     "--model", trained_model, "--fractions", "0.1",
                     "--seeds", "0,1", "--out", str(out)])
        assert code == 0
        with open(out / "condgen.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][0] == "method"
        assert len(rows) == 4  # three methods at one fraction
        by_method = {r[0]: r for r in rows[1:]}
        assert float(by_method["field"][2]) > 0.0
        assert int(by_method["field"][4]) == 4  # 2 ears x 2 seeds
        with open(out / "manifest.json") as fh:
            manifest = json.load(fh)
        assert manifest["config"]["n_bins"] == 8  # derived, not the 92 default

    def test_cond_gen_without_model_or_others(self, tmp_path, tiny_archive,
                                              capsys):
        code = main(["experiment", "cond-gen", "--target", tiny_archive,
                     "--out", str(tmp_path / "x")] + TRAIN_FLAGS)
        assert code == 2
        assert "--model or --others" in capsys.readouterr().err

    def test_latent_morph(self, tmp_path, tiny_archive, trained_model):
        """The morph bin count always comes from the model file (here 8,
        visible as 9 CSV columns), never from a flag."""
        out = tmp_path / "morph"
        code = main(["experiment", "latent-morph", "--model", trained_model,
                     "--data", tiny_archive, "--ear-a", "0", "--ear-b", "1",
                     "--t", "0,1", "--out", str(out)])
        assert code == 0
        for name in ("morph_t_0.csv", "morph_t_1.csv"):
            with open(out / name, newline="") as fh:
                rows = list(csv.reader(fh))
            assert len(rows) == 362  # header + the 361-point polar sweep
            assert rows[0][0] == "polar_angle_deg"
            assert len(rows[0]) == 9

    def test_latent_morph_bad_ear_index(self, tmp_path, tiny_archive,
                                        trained_model, capsys):
        code = main(["experiment", "latent-morph", "--model", trained_model,
                     "--data", tiny_archive, "--ear-a", "0", "--ear-b", "99",
                     "--out", str(tmp_path / "m")])
        assert code == 2
        assert "out of range" in capsys.readouterr().err


# --- installed entry point ---------------------------------------------------------------


class TestEntryPoint:
    def test_module_help_subprocess(self):
        proc = subprocess.run(
            [sys.executable, "-m", "hrtfkit.cli", "--help"],
            capture_output=True, text=True, timeout=60,
        )
        assert proc.returncode == 0
        assert "usage" in proc.stdout
