"""Command-line pipeline: config plumbing, artifact rendering, exit codes."""

import numpy as np
import pytest
from PIL import Image

from roughlsm import IndicatorField
from roughlsm.cli import (
    ExperimentConfig,
    main,
    preset_configs,
    read_config_file,
    resolve_config,
    write_config_file,
)
from roughlsm.errors import ConfigError


# ------------------------------------------------------------ configuration

def test_defaults_resolve():
    cfg = resolve_config({}, {})
    assert cfg.profile == "flat"
    assert cfg.kappa2 == 2.0
    assert cfg.n == 201
    assert cfg.grid_x1 == (-10.0, 10.0)
    assert cfg.delta == (0.0,)
    assert cfg.mesh_h is None
    assert cfg.cell_width() == pytest.approx(np.pi / 20.0)


def test_flags_override_file_overrides_defaults(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment line\n\nkappa2 = 4.0\nn = 51  # trailing comment\n")
    file_values = read_config_file(path)
    cfg = resolve_config(file_values, {"n": "101"})
    assert cfg.kappa2 == 4.0   # from file
    assert cfg.n == 101        # flag wins


def test_unknown_config_key_rejected(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("kappa3 = 4.0\n")
    with pytest.raises(ConfigError, match="kappa3"):
        read_config_file(path)


def test_malformed_config_line_rejected(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("kappa2: 4.0\n")
    with pytest.raises(ConfigError):
        read_config_file(path)


def test_config_value_validation():
    with pytest.raises(ConfigError):
        resolve_config({}, {"kappa2": "-2"})
    with pytest.raises(ConfigError):
        resolve_config({}, {"variant": "blurred"})
    with pytest.raises(ConfigError):
        resolve_config({}, {"delta": "0.02,-0.01"})
    with pytest.raises(ConfigError):
        resolve_config({}, {"grid_x1": "1;2"})
    with pytest.raises(ConfigError):
        resolve_config({}, {"n": "1"})


def test_config_file_round_trip(tmp_path):
    cfg = resolve_config({}, {"profile": "gaussians_f2", "delta": "0,0.02",
                              "mesh_h": "0.125", "b": "0.25"})
    path = tmp_path / "saved.cfg"
    write_config_file(cfg, path)
    again = resolve_config(read_config_file(path), {})
    assert again == cfg


def test_preset_sweep_expansion():
    runs = preset_configs("ex4", "paper", "out")
    assert [label for label, _ in runs] == [
        "ex4_paper_n201", "ex4_paper_n401", "ex4_paper_n601"]
    assert [cfg.n for _, cfg in runs] == [201, 401, 601]
    for _, cfg in runs:
        assert cfg.kappa2 == 10.0
        assert cfg.delta == (0.02,)
        assert cfg.seed == 0
        assert cfg.profile == "bspline_f1"


def test_preset_scales():
    (label, desk), = preset_configs("ex1", "desk", "out")
    assert desk.kappa2 == 2.0 and desk.n == 201
    assert desk.delta == (0.0, 0.02, 0.05)
    (_, paper), = preset_configs("ex1", "paper", "out")
    assert paper.kappa2 == 10.0 and paper.n == 601
    with pytest.raises(ConfigError):
        preset_configs("ex7", "desk", "out")
    with pytest.raises(ConfigError):
        preset_configs("ex1", "bench", "out")


def test_experiment_config_is_frozen():
    cfg = resolve_config({}, {})
    with pytest.raises(AttributeError):
        cfg.kappa2 = 3.0


# -------------------------------------------------------------- exit codes

def test_exit_code_config_error(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("bogus_key = 1\n")
    assert main(["synthesize", "--config", str(bad)]) == 2


def test_exit_code_bad_flag_value():
    assert main(["synthesize", "--kappa2", "-3", "--outdir", "/tmp/never"]) == 2


def test_exit_code_numerical_failure():
    # a receiver node lands exactly on the source
    assert main(["green-table", "--source", "0,1", "--segment=-2,2,1.0",
                 "--count", "3"]) == 3


def test_exit_code_missing_matrix(tmp_path):
    assert main(["invert", "--matrix", str(tmp_path / "nope.nfm")]) == 2


# ---------------------------------------------------------------- pipeline

@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    """synthesize -> noise -> invert on a small problem, via the real CLI."""
    root = tmp_path_factory.mktemp("pipeline")
    args = ["--profile", "bspline_f1", "--n", "21", "--b", "0.55",
            "--grid-x1=-4,4", "--grid-x2=-1,0.5", "--outdir", str(root)]
    assert main(["synthesize", *args, "--csv", str(root / "matrix.csv")]) == 0
    assert main(["noise", "--matrix", str(root / "matrix.nfm"),
                 "--delta", "0.02", "--seed", "42",
                 "--out", str(root / "noisy.nfm")]) == 0
    assert main(["invert", "--matrix", str(root / "noisy.nfm"), *args]) == 0
    return root


def test_pipeline_artifacts_exist(pipeline_dir):
    for name in ("matrix.nfm", "matrix.csv", "noisy.nfm", "field.csv",
                 "heatmap.png", "overlay.csv", "overlay.png"):
        assert (pipeline_dir / name).stat().st_size > 0


def test_heatmap_matches_field(pipeline_dir):
    field = IndicatorField.from_csv(pipeline_dir / "field.csv")
    image = Image.open(pipeline_dir / "heatmap.png")
    assert image.mode == "L"
    assert image.size == (field.values.shape[1], field.values.shape[0])
    pixels = np.asarray(image)
    assert np.array_equal(pixels, np.rint(255.0 * field.values).astype(np.uint8))
    # the brightest pixel saturates by construction
    assert pixels.max() == 255


def test_field_is_mirror_symmetric_without_noise(tmp_path):
    # even profile, symmetric grid, no noise: the indicator inherits the
    # mirror symmetry of the data
    args = ["--profile", "bspline_f1", "--n", "21", "--b", "0.55",
            "--grid-x1=-4,4", "--grid-x2=-1,0.5", "--outdir", str(tmp_path)]
    assert main(["synthesize", *args]) == 0
    assert main(["invert", "--matrix", str(tmp_path / "matrix.nfm"), *args]) == 0
    field = IndicatorField.from_csv(tmp_path / "field.csv")
    assert np.max(np.abs(field.values - field.values[:, ::-1])) < 1e-9


def test_overlay_csv_lists_estimate_and_truth(pipeline_dir):
    lines = (pipeline_dir / "overlay.csv").read_text().splitlines()
    assert lines[0].startswith("# cutoff=")
    assert lines[1] == "x1,true_f,estimate"
    rows = [ln.split(",") for ln in lines[2:]]
    assert len(rows) == 17  # grid x1 count at (-4, 4) step 0.5
    x_mid, truth_mid, _ = rows[8]
    assert float(x_mid) == 0.0
    assert float(truth_mid) == pytest.approx(0.4, abs=1e-12)


def test_invert_is_deterministic(pipeline_dir, tmp_path):
    args = ["--profile", "bspline_f1", "--n", "21", "--b", "0.55",
            "--grid-x1=-4,4", "--grid-x2=-1,0.5", "--outdir", str(tmp_path)]
    assert main(["invert", "--matrix", str(pipeline_dir / "noisy.nfm"), *args]) == 0
    for name in ("field.csv", "heatmap.png", "overlay.csv"):
        assert (tmp_path / name).read_bytes() == (pipeline_dir / name).read_bytes()


def test_single_point_grid_renders_one_saturated_pixel(pipeline_dir, tmp_path):
    args = ["--grid-x1", "0,0.1", "--grid-x2", "0.2,0.25", "--outdir", str(tmp_path)]
    assert main(["invert", "--matrix", str(pipeline_dir / "matrix.nfm"), *args]) == 0
    image = Image.open(tmp_path / "heatmap.png")
    assert image.size == (1, 1)
    assert np.asarray(image)[0, 0] == 255


def test_green_table_stdout(capsys):
    assert main(["green-table", "--count", "5", "--segment=-2,2,0.5"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "x1,x2,re_g0,im_g0"
    assert len(out) == 6
    first = [float(v) for v in out[1].split(",")]
    assert first[0] == -2.0 and first[1] == 0.5


def test_green_table_file_with_reference(tmp_path):
    out = tmp_path / "table.csv"
    assert main(["green-table", "--count", "3", "--segment=-1,1,0.5",
                 "--gr-radius", "1.0", "--mesh-h", "0.15", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "x1,x2,re_g0,im_g0,re_grs,im_grs"
    assert len(lines) == 4
