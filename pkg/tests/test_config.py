import shutil
from pathlib import Path

import numpy as np
import pytest

from mgdispatch.config import DEFAULTS, load_config, replace
from mgdispatch.errors import ConfigError

ROOT = Path(__file__).resolve().parents[1]


def write(tmp_path, text, name="run.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_minimal_config_gets_defaults(tmp_path):
    cfg = load_config(write(tmp_path, "dataset: bundled:pge69\n"))
    assert cfg.seed == DEFAULTS["seed"]
    assert (cfg.n_generate, cfg.n_keep) == (1000, 30)
    assert cfg.horizon == 24 and cfg.period_len == 3
    assert len(cfg.fleet.chps) == 3 and len(cfg.fleet.esss) == 3
    assert len(cfg.fleet.wts) == 2 and len(cfg.fleet.pvs) == 2
    assert cfg.coa.max_population == 50 and cfg.coa.seed == cfg.seed
    assert len(cfg.digest) == 64


def test_bundled_configs_load():
    for name in ("pge69.yaml", "smoke.yaml"):
        cfg = load_config(ROOT / "configs" / name)
        assert cfg.dataset.is_dir()
    cfg = load_config(ROOT / "configs" / "pge69.yaml")
    assert (cfg.seed, cfg.n_generate, cfg.n_keep, cfg.coa.max_iterations) == (42, 200, 20, 150)


def test_dangling_bus_names_the_key(tmp_path):
    text = "dataset: bundled:pge69\nfleet:\n  chp:\n    - {bus: 999}\n"
    with pytest.raises(ConfigError) as exc:
        load_config(write(tmp_path, text))
    assert exc.value.key == "fleet.chp[0].bus"


@pytest.mark.parametrize("text, key", [
    ("dataset: bundled:pge69\nsede: 4\n", "sede"),
    ("dataset: bundled:pge69\ncoa: {max_iterationz: 3}\n", "coa.max_iterationz"),
    ("dataset: bundled:pge69\nseed: forty\n", "seed"),
    ("dataset: bundled:pge69\nseed: 1.5\n", "seed"),
    ("dataset: bundled:pge69\nscenarios: {n_generate: 10, n_keep: 11}\n", "scenarios.n_keep"),
    ("dataset: bundled:pge69\nconfig_version: 2\n", "config_version"),
    ("dataset: bundled:pge69\nperiod_len: 5\n", "period_len"),
    ("dataset: bundled:pge69\nreliability: {t_res: 5, t_rep: 4}\n", "reliability.t_res"),
    ("dataset: bundled:pge69\nscenarios: {beta_variant: odd}\n", "scenarios.beta_variant"),
    ("dataset: bundled:pge69\nprofiles: {load_mean: [1, 2]}\n", "profiles.load_mean"),
    ("dataset: bundled:pge69\nfleet: {fuel_cell: []}\n", "fleet.fuel_cell"),
    ("dataset: bundled:pge69\nfleet: {ess: [{bus: 5, colour: red}]}\n", "fleet.ess[0].colour"),
    ("dataset: bundled:nowhere\n", "dataset"),
    ("seed: 3\n", "dataset"),
    ("- just\n- a list\n", "<root>"),
])
def test_invalid_configs(tmp_path, text, key):
    with pytest.raises(ConfigError) as exc:
        load_config(write(tmp_path, text))
    assert exc.value.key == key
    assert key in str(exc.value)


def test_bad_yaml_and_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "dataset: [unterminated\n"))
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")


def test_relative_dataset_path(tmp_path):
    src = ROOT / "src" / "mgdispatch" / "data" / "pge69"
    shutil.copytree(src, tmp_path / "cases" / "mine")
    sub = tmp_path / "cfg"
    sub.mkdir()
    cfg = load_config(write(sub, "dataset: ../cases/mine\noutput: {dir: out}\n"))
    assert cfg.dataset == (tmp_path / "cases" / "mine").resolve()
    assert cfg.out_dir == sub.resolve() / "out"


def test_scalar_profile_repeats(tmp_path):
    cfg = load_config(write(tmp_path, "dataset: bundled:pge69\nprofiles: {load_std: 0.02}\n"))
    assert np.all(np.asarray(cfg.models.load_std) == 0.02)


def test_replace_reseeds_optimiser(tmp_path):
    cfg = load_config(write(tmp_path, "dataset: bundled:pge69\n"))
    other = replace(cfg, seed=9)
    assert other.seed == 9 and other.coa.seed == 9 and cfg.coa.seed == 42
