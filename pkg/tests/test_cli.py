import json
import os

import numpy as np
import pytest

from scribbleprop.cli import main
from scribbleprop.core import (Scribble, ScribbleSet, load_labelmap, save_image,
                               save_labelmap, save_scribbles)
from scribbleprop.evaluation import SynthSpec, generate_synthetic

from helpers import solid_image, two_tone_image


def write_two_tone_inputs(tmp_path):
    img_path = tmp_path / "img.png"
    save_image(two_tone_image(), img_path)
    sset = ScribbleSet("img", 16, 16, [Scribble(0, [(2, 8), (5, 8)]),
                                       Scribble(1, [(10, 8), (13, 8)])])
    scr_path = tmp_path / "scr.json"
    save_scribbles(sset, scr_path)
    return img_path, scr_path


class TestSuperpixelsCmd:
    def test_uniform_image_count_one(self, tmp_path, capsys):
        p = tmp_path / "img.png"
        save_image(solid_image(16, 16, (90, 90, 90)), p)
        code = main(["superpixels", str(p), "--out", str(tmp_path / "out"),
                     "--min-size", "1"])
        assert code == 0
        assert "count: 1" in capsys.readouterr().out
        assert (tmp_path / "out" / "ids.png").is_file()
        assert (tmp_path / "out" / "boundaries.png").is_file()

    def test_missing_file_exit_1(self, tmp_path):
        assert main(["superpixels", str(tmp_path / "nope.png"),
                     "--out", str(tmp_path / "out")]) == 1

    def test_bad_k_exit_2(self, tmp_path):
        p = tmp_path / "img.png"
        save_image(solid_image(8, 8, (0, 0, 0)), p)
        assert main(["superpixels", str(p), "--out", str(tmp_path / "out"),
                     "--k", "0"]) == 2

    def test_unknown_flag_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as e:
            main(["superpixels", "x.png", "--out", "o", "--definitely-not-a-flag"])
        assert e.value.code == 2

    def test_help_exits_0(self):
        for cmd in ("superpixels", "propagate", "train", "infer", "eval",
                    "synth", "gen", "serve"):
            with pytest.raises(SystemExit) as e:
                main([cmd, "--help"])
            assert e.value.code == 0


class TestPropagateCmd:
    def test_writes_labels_and_stats(self, tmp_path):
        img_path, scr_path = write_two_tone_inputs(tmp_path)
        out = tmp_path / "out"
        code = main(["propagate", str(img_path), str(scr_path), "--out", str(out),
                     "--min-size", "1", "--sigma", "0"])
        assert code == 0
        labels = load_labelmap(out / "labels.png")
        assert set(np.unique(labels.labels).tolist()) == {0, 1}
        stats = json.loads((out / "stats.json").read_text())
        assert "energy" in stats and np.isfinite(stats["energy"])

    def test_byte_identical_reruns(self, tmp_path):
        img_path, scr_path = write_two_tone_inputs(tmp_path)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["propagate", str(img_path), str(scr_path), "--out", str(out),
                         "--seed", "0"]) == 0
            outs.append((out / "labels.png").read_bytes())
        assert outs[0] == outs[1]

    def test_no_pairwise_sets_unmarked_background(self, tmp_path):
        img, gt, sset = generate_synthetic(SynthSpec(seed=3, noise_std=25.0))
        img_path = tmp_path / "img.png"
        save_image(img, img_path)
        scr_path = tmp_path / "scr.json"
        save_scribbles(sset, scr_path)
        out = tmp_path / "out"
        code = main(["propagate", str(img_path), str(scr_path), "--out", str(out),
                     "--no-pairwise", "--predictor", "none",
                     "--k", "20", "--min-size", "10"])
        assert code == 0
        labels = load_labelmap(out / "labels.png").labels
        # unmarked area heavily background, objects only under scribbles
        assert (labels == 0).mean() > 0.5

    def test_bad_predictor_spec_exit_2(self, tmp_path):
        img_path, scr_path = write_two_tone_inputs(tmp_path)
        assert main(["propagate", str(img_path), str(scr_path),
                     "--out", str(tmp_path / "o"), "--predictor", "magic"]) == 2

    def test_config_file_with_flag_override(self, tmp_path):
        img_path, scr_path = write_two_tone_inputs(tmp_path)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"superpixel": {"k": 0.0}}))
        # config alone is invalid -> exit 2; flag overrides it -> ok
        assert main(["propagate", str(img_path), str(scr_path),
                     "--out", str(tmp_path / "o1"), "--config", str(cfg)]) == 2
        assert main(["propagate", str(img_path), str(scr_path),
                     "--out", str(tmp_path / "o2"), "--config", str(cfg),
                     "--k", "80"]) == 0


class TestDatasetCommands:
    def test_gen_train_infer_eval_pipeline(self, tmp_path):
        data = tmp_path / "data"
        assert main(["gen", "--out", str(data), "--count", "4", "--noise", "20",
                     "--seed", "0"]) == 0
        assert (data / "index.json").is_file()
        assert (data / "manifest.json").is_file()
        assert (data / "images" / "synth_0000.png").is_file()
        assert (data / "scribbles" / "synth_0000.json").is_file()

        ckpt = tmp_path / "ckpt"
        assert main(["train", str(data / "index.json"), "--out", str(ckpt),
                     "--iters", "2"]) == 0
        assert (ckpt / "iter1" / "model.json").is_file()
        assert (ckpt / "iter2" / "labels" / "synth_0000.png").is_file()
        assert (ckpt / "iterations.csv").is_file()
        assert (ckpt / "training_curves.png").is_file()

        pred = tmp_path / "pred.png"
        assert main(["infer", str(data / "images" / "synth_0000.png"),
                     "--model", str(ckpt / "iter2" / "model.json"),
                     "--out", str(pred)]) == 0

        report = tmp_path / "report"
        assert main(["eval", str(pred), str(data / "masks" / "synth_0000.png"),
                     "--out", str(report)]) == 0
        stats = json.loads((report / "stats.json").read_text())
        assert 0.0 <= stats["miou"] <= 1.0
        assert (report / "eval_per_class.csv").is_file()
        assert (report / "eval_per_class.png").is_file()

    def test_train_default_iters_is_three(self, tmp_path):
        data = tmp_path / "data"
        assert main(["gen", "--out", str(data), "--count", "2", "--size", "64"]) == 0
        ckpt = tmp_path / "ckpt"
        assert main(["train", str(data / "index.json"), "--out", str(ckpt)]) == 0
        assert (ckpt / "iter3").is_dir()
        assert not (ckpt / "iter4").exists()

    def test_eval_identity_prints_miou_one(self, tmp_path, capsys):
        from scribbleprop.core import LabelMap
        m = tmp_path / "m.png"
        save_labelmap(LabelMap(np.tile(np.array([[0, 1]], dtype=np.uint8), (4, 2))), m)
        assert main(["eval", str(m), str(m), "--out", str(tmp_path / "r")]) == 0
        assert "miou: 1.0" in capsys.readouterr().out


class TestSynthCmd:
    def test_ratio_zero_spots(self, tmp_path):
        _, scr_path = write_two_tone_inputs(tmp_path)
        out = tmp_path / "short.json"
        assert main(["synth", str(scr_path), "--ratio", "0", "--out", str(out)]) == 0
        obj = json.loads(out.read_text())
        assert all(len(s["polyline"]) == 1 for s in obj["scribbles"])

    def test_deterministic_given_seed(self, tmp_path):
        _, scr_path = write_two_tone_inputs(tmp_path)
        outs = []
        for name in ("s1.json", "s2.json"):
            out = tmp_path / name
            assert main(["synth", str(scr_path), "--ratio", "0.5", "--seed", "9",
                         "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


def test_gen_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["gen", "--out", str(out), "--count", "2", "--noise", "15",
                     "--seed", "4"]) == 0
    for rel in ("images/synth_0000.png", "masks/synth_0001.png",
                "scribbles/synth_0000.json", "index.json"):
        assert (a / rel).read_bytes() == (b / rel).read_bytes()
