"""Configuration materialization and the four command-line entry points.

The CLI tests run real end-to-end commands on a deliberately tiny
synthetic graph (6 anchors, 1 conv layer) so every invocation finishes
in well under a second.
"""

import copy
import os
import shutil

import numpy as np
import pytest
import yaml

from hyphin import cli
from hyphin.config import DEFAULTS, dump_config, effective_config, load_config
from hyphin.errors import ConfigError
from hyphin.evalbench import parse_results
from hyphin.hingraph import load_graph

# small enough that train/eval/sweep commands are near-instant
TINY = {
    "seed": 0,
    "train": {
        "hidden_dim": 8,
        "embed_dim": 4,
        "conv_depth": 1,
        "num_clusters": 2,
        "max_epochs": 6,
        "patience": 5,
        "probe_epochs": 50,
        "feature_mask_rate": 0.0,
        "hyperedge_drop_rate": 0.0,
    },
    "synth": {
        "num_classes": 2,
        "anchors_per_class": 3,
        "aux_a": 3,
        "aux_s": 3,
        "p_in": 0.9,
        "p_out": 0.1,
        "feature_dim": 4,
        "noise_std": 0.3,
        "class_sep": 1.0,
    },
    "eval": {"ratios": [20, 40], "seeds": 1, "model": "ours"},
}

GRAPH_FILES = ("nodes.tsv", "edges.tsv", "features.tsv", "labels.tsv")


def _write_yaml(path, doc) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh)
    return str(path)


@pytest.fixture(scope="module")
def tiny_cfg(tmp_path_factory):
    return _write_yaml(tmp_path_factory.mktemp("cfg") / "tiny.yaml", TINY)


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory, tiny_cfg):
    out = str(tmp_path_factory.mktemp("graph"))
    assert cli.entry(["synth", "--out", out, "--config", tiny_cfg]) == 0
    return out


@pytest.fixture(scope="module")
def train_dir(tmp_path_factory, tiny_cfg, synth_dir):
    out = str(tmp_path_factory.mktemp("run"))
    code = cli.entry(
        ["train", "--graph", synth_dir, "--out", out, "--config", tiny_cfg]
    )
    assert code == 0
    return out


def _read(path) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _read_bytes(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


# ---------------------------------------------------------------- config


class TestLoadConfig:
    def test_no_file_yields_declared_defaults(self):
        rc = load_config()
        assert rc.seed == 0
        assert rc.metapaths == [["P", "A", "P"], ["P", "S", "P"]]
        assert rc.train.learning_rate == 2e-3
        assert rc.train.patience == 20
        assert rc.train.probe_epochs == 300
        assert rc.synth.num_classes == 3
        assert rc.synth.anchors_per_class == 100
        assert rc.eval_ratios == [20, 40, 60]
        assert rc.eval_seeds == 1
        assert rc.model_name == "ours"

    def test_materialized_defaults_equal_declared_table(self):
        # every dataclass carries exactly the documented defaults
        assert effective_config(load_config()) == DEFAULTS

    def test_empty_file_equals_defaults(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("", encoding="utf-8")
        assert effective_config(load_config(str(path))) == DEFAULTS

    def test_file_values_override_defaults(self, tmp_path):
        path = _write_yaml(tmp_path / "c.yaml", {"train": {"learning_rate": 1e-3}})
        rc = load_config(path)
        assert rc.train.learning_rate == 1e-3
        assert rc.train.patience == 20

    def test_flag_overrides_beat_file_values(self, tmp_path):
        path = _write_yaml(tmp_path / "c.yaml", {"train": {"learning_rate": 1e-3}})
        rc = load_config(path, {"train.learning_rate": 1.5e-3})
        assert rc.train.learning_rate == 1.5e-3

    def test_seed_override_propagates_everywhere(self, tiny_cfg):
        rc = load_config(tiny_cfg, {"seed": 7})
        assert rc.seed == 7
        assert rc.train.seed == 7
        assert rc.synth.seed == 7

    def test_unknown_top_level_key_named(self, tmp_path):
        path = _write_yaml(tmp_path / "c.yaml", {"foo": 1})
        with pytest.raises(ConfigError, match="foo"):
            load_config(path)

    def test_unknown_nested_key_reported_with_dotted_path(self, tmp_path):
        path = _write_yaml(tmp_path / "c.yaml", {"train": {"foo": 1}})
        with pytest.raises(ConfigError, match=r"train\.foo"):
            load_config(path)

    @pytest.mark.parametrize(
        "dotted", ["train.foo", "nope.learning_rate", "seed.inner", "foo"]
    )
    def test_unknown_override_key_rejected(self, dotted):
        with pytest.raises(ConfigError, match="unknown configuration key"):
            load_config(None, {dotted: 1})

    def test_percent_style_ratios_normalized(self, tmp_path):
        path = _write_yaml(
            tmp_path / "c.yaml", {"train": {"train_ratio": 20, "val_fraction": 10}}
        )
        rc = load_config(path)
        assert rc.train.train_ratio == 0.2
        assert rc.train.val_fraction == 0.1

    def test_fraction_ratios_pass_through(self, tmp_path):
        path = _write_yaml(tmp_path / "c.yaml", {"train": {"train_ratio": 0.4}})
        assert load_config(path).train.train_ratio == 0.4

    def test_eval_ratios_accept_fractions_and_percents(self, tmp_path):
        path = _write_yaml(tmp_path / "c.yaml", {"eval": {"ratios": [0.2, 40]}})
        assert load_config(path).eval_ratios == [20, 40]

    @pytest.mark.parametrize(
        "doc,needle",
        [
            ({"train": {"learning_rate": 1.0}}, "learning_rate"),
            ({"train": {"learning_rate": 1e-6}}, "learning_rate"),
            ({"train": {"patience": 3}}, "patience"),
            ({"train": {"dropout": 0.9}}, "dropout"),
            ({"train": {"max_epochs": 5}}, "max_epochs"),
            ({"train": {"feature_mask_rate": 0.8}}, "feature_mask_rate"),
            ({"train": {"weighting": "banana"}}, "weighting"),
            ({"synth": {"num_classes": 1}}, "num_classes"),
            ({"seed": -1}, "seed"),
            ({"seed": True}, "seed"),
            ({"seed": "zero"}, "seed"),
            ({"metapaths": []}, "metapaths"),
            ({"metapaths": "PAP"}, "metapaths"),
            ({"metapaths": [["P", 3, "P"]]}, "metapaths"),
            ({"eval": {"ratios": []}}, "ratios"),
            ({"eval": {"ratios": [150]}}, "150"),
            ({"eval": {"ratios": [0]}}, "0"),
            ({"eval": {"seeds": 0}}, "seeds"),
        ],
    )
    def test_invalid_values_rejected_at_load(self, tmp_path, doc, needle):
        path = _write_yaml(tmp_path / "c.yaml", doc)
        with pytest.raises(ConfigError, match=needle):
            load_config(path)

    def test_top_level_must_be_mapping(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("- 1\n- 2\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="mapping"):
            load_config(str(path))

    def test_echoed_config_is_a_fixed_point(self, tmp_path, tiny_cfg):
        rc1 = load_config(tiny_cfg)
        echo = tmp_path / "echo.yaml"
        dump_config(rc1, str(echo))
        rc2 = load_config(str(echo))
        assert effective_config(rc2) == effective_config(rc1)
        # the echo document itself matches the materialized dict
        with open(echo, encoding="utf-8") as fh:
            assert yaml.safe_load(fh) == effective_config(rc1)


# ---------------------------------------------------------------- grids


class TestParseGrid:
    def test_explicit_comma_list(self):
        assert cli._parse_grid("1e-4,1e-3") == [1e-4, 1e-3]
        assert cli._parse_grid("0.3") == [0.3]
        assert cli._parse_grid("0.1, 0.2") == [0.1, 0.2]

    def test_range_shorthand_inclusive_of_stop(self):
        assert cli._parse_grid("0.2:0.4:0.1") == [0.2, 0.3, 0.4]

    def test_dropout_range_yields_nine_points(self):
        grid = cli._parse_grid("0.1:0.5:0.05")
        assert len(grid) == 9
        np.testing.assert_allclose(grid, 0.1 + 0.05 * np.arange(9), atol=1e-12)

    def test_degenerate_range_is_single_point(self):
        assert cli._parse_grid("0.3:0.3:0.1") == [0.3]

    @pytest.mark.parametrize(
        "text", ["1:2", "2:1:0.5", "1:2:0", "1:2:-1", "", ",,"]
    )
    def test_malformed_grids_rejected(self, text):
        with pytest.raises(ConfigError):
            cli._parse_grid(text)


# ---------------------------------------------------------------- synth


class TestCmdSynth:
    def test_writes_loadable_graph_and_echo(self, synth_dir):
        for name in GRAPH_FILES + ("effective_config.yaml",):
            assert os.path.isfile(os.path.join(synth_dir, name)), name
        g = load_graph(synth_dir)
        assert g.num_anchor == 6
        assert g.anchor_type == "P"
        assert len(g.labels) == 6

    def test_same_seed_twice_is_byte_identical(self, tmp_path, tiny_cfg):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        assert cli.entry(["synth", "--out", out1, "--config", tiny_cfg]) == 0
        assert cli.entry(["synth", "--out", out2, "--config", tiny_cfg]) == 0
        for name in GRAPH_FILES:
            a = _read_bytes(os.path.join(out1, name))
            b = _read_bytes(os.path.join(out2, name))
            assert a == b, name

    def test_rerun_from_echoed_config_reproduces_outputs(
        self, tmp_path, synth_dir
    ):
        echo = os.path.join(synth_dir, "effective_config.yaml")
        out = str(tmp_path / "again")
        assert cli.entry(["synth", "--out", out, "--config", echo]) == 0
        for name in GRAPH_FILES:
            assert _read_bytes(os.path.join(out, name)) == _read_bytes(
                os.path.join(synth_dir, name)
            ), name

    def test_unknown_config_key_exits_with_error_line(self, tmp_path, capsys):
        path = _write_yaml(tmp_path / "bad.yaml", {"foo": 1})
        code = cli.entry(["synth", "--out", str(tmp_path / "o"), "--config", path])
        assert code == 1
        err = capsys.readouterr().err
        assert err.startswith("ERROR\tconfig\t")
        assert "foo" in err

    def test_seed_flag_changes_the_graph(self, tmp_path, tiny_cfg, synth_dir):
        out = str(tmp_path / "s9")
        args = ["synth", "--out", out, "--config", tiny_cfg, "--seed", "9"]
        assert cli.entry(args) == 0
        base = _read_bytes(os.path.join(synth_dir, "features.tsv"))
        assert _read_bytes(os.path.join(out, "features.tsv")) != base

    def test_missing_subcommand_is_a_usage_error(self):
        with pytest.raises(SystemExit):
            cli.entry([])


# ---------------------------------------------------------------- train


class TestCmdTrain:
    def test_writes_log_checkpoints_and_echo(self, train_dir):
        for name in (
            "training_log.tsv",
            "best.ckpt",
            "final.ckpt",
            "effective_config.yaml",
        ):
            assert os.path.isfile(os.path.join(train_dir, name)), name

    def test_log_bounded_by_max_epochs_and_parses(self, train_dir):
        lines = _read(os.path.join(train_dir, "training_log.tsv")).splitlines()
        assert lines[0] == cli.LOG_HEADER
        assert 1 <= len(lines) - 1 <= TINY["train"]["max_epochs"]
        for line in lines[1:]:
            cols = line.split("\t")
            assert len(cols) == 5
            int(cols[0])
            for col in cols[1:]:
                float(col)  # repr floats, including nan, must parse

    def test_rerun_is_byte_identical(self, tmp_path, tiny_cfg, synth_dir, train_dir):
        out = str(tmp_path / "rerun")
        code = cli.entry(
            ["train", "--graph", synth_dir, "--out", out, "--config", tiny_cfg]
        )
        assert code == 0
        for name in ("training_log.tsv", "best.ckpt", "final.ckpt"):
            assert _read_bytes(os.path.join(out, name)) == _read_bytes(
                os.path.join(train_dir, name)
            ), name

    def test_rerun_from_echoed_config_reproduces_log(
        self, tmp_path, synth_dir, train_dir
    ):
        echo = os.path.join(train_dir, "effective_config.yaml")
        out = str(tmp_path / "echo-run")
        code = cli.entry(["train", "--graph", synth_dir, "--out", out, "--config", echo])
        assert code == 0
        assert _read_bytes(os.path.join(out, "training_log.tsv")) == _read_bytes(
            os.path.join(train_dir, "training_log.tsv")
        )

    def test_corrupt_features_file_reports_format_error(
        self, tmp_path, tiny_cfg, synth_dir, capsys
    ):
        broken = str(tmp_path / "broken")
        shutil.copytree(synth_dir, broken)
        feat = os.path.join(broken, "features.tsv")
        lines = _read(feat).splitlines()
        lines[0] = lines[0].rsplit("\t", 1)[0] + "\tnot-a-number"
        with open(feat, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        code = cli.entry(
            ["train", "--graph", broken, "--out", str(tmp_path / "o"), "--config", tiny_cfg]
        )
        assert code == 1
        err = capsys.readouterr().err
        assert err.startswith("ERROR\tformat\t")
        assert "features.tsv" in err

    def test_missing_graph_dir_reports_ingestion_error(
        self, tmp_path, tiny_cfg, capsys
    ):
        code = cli.entry(
            [
                "train",
                "--graph",
                str(tmp_path / "nowhere"),
                "--out",
                str(tmp_path / "o"),
                "--config",
                tiny_cfg,
            ]
        )
        assert code == 1
        assert capsys.readouterr().err.startswith("ERROR\tingestion\t")


# ---------------------------------------------------------------- eval


class TestCmdEval:
    def test_ratio_list_yields_one_row_per_setting(
        self, tmp_path, tiny_cfg, synth_dir, train_dir
    ):
        out = str(tmp_path / "eval")
        code = cli.entry(
            [
                "eval",
                "--graph",
                synth_dir,
                "--checkpoint",
                os.path.join(train_dir, "best.ckpt"),
                "--out",
                out,
                "--config",
                tiny_cfg,
            ]
        )
        assert code == 0
        table = parse_results(os.path.join(out, "results.tsv"))
        assert [row.setting for row in table.rows] == [20, 40]
        assert all(row.model == "ours" for row in table.rows)
        assert all(0.0 <= row.acc <= 100.0 for row in table.rows)
        assert os.path.isfile(os.path.join(out, "results_bars.tsv"))
        assert os.path.isfile(os.path.join(out, "effective_config.yaml"))

    def test_multi_seed_mean_matches_per_seed_log(
        self, tmp_path, tiny_cfg, synth_dir, train_dir
    ):
        out = str(tmp_path / "eval5")
        code = cli.entry(
            [
                "eval",
                "--graph",
                synth_dir,
                "--checkpoint",
                os.path.join(train_dir, "best.ckpt"),
                "--out",
                out,
                "--config",
                tiny_cfg,
                "--ratios",
                "20",
                "--seeds",
                "3",
            ]
        )
        assert code == 0
        lines = _read(os.path.join(out, "results_seeds.tsv")).splitlines()
        assert lines[0] == "setting\tseed\tacc"
        assert len(lines) == 1 + 3
        accs = []
        for i, line in enumerate(lines[1:]):
            setting, seed, acc = line.split("\t")
            assert setting == "20%"
            assert int(seed) == i
            accs.append(float(acc))
        table = parse_results(os.path.join(out, "results.tsv"))
        assert len(table.rows) == 1
        assert table.rows[0].acc == round(float(np.mean(accs)), 2)

    def test_mismatched_checkpoint_reports_compatibility(
        self, tmp_path, synth_dir, train_dir, capsys
    ):
        wide = copy.deepcopy(TINY)
        wide["train"]["embed_dim"] = 8
        cfg = _write_yaml(tmp_path / "wide.yaml", wide)
        code = cli.entry(
            [
                "eval",
                "--graph",
                synth_dir,
                "--checkpoint",
                os.path.join(train_dir, "best.ckpt"),
                "--out",
                str(tmp_path / "o"),
                "--config",
                cfg,
            ]
        )
        assert code == 1
        assert capsys.readouterr().err.startswith("ERROR\tcompatibility\t")

    def test_out_of_range_ratio_flag_rejected(
        self, tmp_path, tiny_cfg, synth_dir, train_dir, capsys
    ):
        code = cli.entry(
            [
                "eval",
                "--graph",
                synth_dir,
                "--checkpoint",
                os.path.join(train_dir, "best.ckpt"),
                "--out",
                str(tmp_path / "o"),
                "--config",
                tiny_cfg,
                "--ratios",
                "150",
            ]
        )
        assert code == 1
        err = capsys.readouterr().err
        assert err.startswith("ERROR\tconfig\t")
        assert "150" in err


# ---------------------------------------------------------------- sweep


class TestCmdSweep:
    def test_two_by_two_grid_emits_four_ranked_rows(
        self, tmp_path, tiny_cfg, synth_dir
    ):
        out1, out2 = str(tmp_path / "s1"), str(tmp_path / "s2")
        args = [
            "sweep",
            "--graph",
            synth_dir,
            "--config",
            tiny_cfg,
            "--lr-grid",
            "1e-3,2e-3",
            "--dropout-grid",
            "0.1,0.2",
        ]
        assert cli.entry(args + ["--out", out1]) == 0
        lines = _read(os.path.join(out1, "sweep.tsv")).splitlines()
        assert lines[0] == "learning_rate\tdropout\tbest_metric\tbest_epoch"
        assert len(lines) == 1 + 4
        metrics = []
        for line in lines[1:]:
            lr, dropout, metric, epoch = line.split("\t")
            assert float(lr) in (1e-3, 2e-3)
            assert float(dropout) in (0.1, 0.2)
            metrics.append(float(metric))
            int(epoch)
        assert metrics == sorted(metrics, reverse=True)
        # repeated sweep with the same seed reproduces the table exactly
        assert cli.entry(args + ["--out", out2]) == 0
        assert _read_bytes(os.path.join(out2, "sweep.tsv")) == _read_bytes(
            os.path.join(out1, "sweep.tsv")
        )

    def test_out_of_range_grid_rejected_before_any_run(
        self, tmp_path, tiny_cfg, synth_dir, capsys
    ):
        out = str(tmp_path / "bad")
        code = cli.entry(
            [
                "sweep",
                "--graph",
                synth_dir,
                "--config",
                tiny_cfg,
                "--lr-grid",
                "1.0,1e-3",
                "--out",
                out,
            ]
        )
        assert code == 1
        assert capsys.readouterr().err.startswith("ERROR\tconfig\t")
        assert not os.path.exists(os.path.join(out, "sweep.tsv"))
