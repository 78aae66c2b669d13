"""Command-line driver tests: configuration round trips, precedence, exit
codes, and byte-level determinism of the artifacts."""

from fractions import Fraction

import pytest

from ggr.cli import (
    RunConfig,
    env_overrides,
    load_config,
    main,
    make_config,
    parse_config,
    print_config,
    run,
)
from ggr.errors import ConfigError


FAST = """\
potential = hard_core
R0 = 0.1
L = 2.0
kF_up_ratio = 1
kF_dn_ratio = 1
grid_M = 6
k_max = 1
max_internal = 2
K = 1
"""


# ---------------------------------------------------------------------------
# configuration text


def test_print_parse_roundtrip_defaults():
    cfg = RunConfig()
    text = print_config(cfg)
    assert text.startswith("# ggr-config v1\n")
    assert parse_config(text) == cfg
    assert print_config(parse_config(text)) == text


def test_print_parse_roundtrip_nontrivial():
    cfg = make_config(
        potential="square_well",
        v0=25.0,
        R0=0.12,
        L=3.5,
        kF_up_ratio=Fraction(39, 10),
        kF_dn_ratio=Fraction(2),
        s_up=16,
        grid_M=8,
        tolerance=2e-4,
    )
    assert parse_config(print_config(cfg)) == cfg


def test_parse_ignores_comments_and_blanks():
    cfg = parse_config("# ggr-config v1\n\nL = 4.0  # box edge\n\n")
    assert cfg.L == 4.0


def test_parse_error_messages_carry_line_numbers():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("L = 2.0\nnonsense\n")
    with pytest.raises(ConfigError, match="line 3.*unknown key"):
        parse_config("L = 2.0\n\nbogus = 1\n")
    with pytest.raises(ConfigError, match="line 2.*duplicate"):
        parse_config("L = 2.0\nL = 3.0\n")
    with pytest.raises(ConfigError, match="line 1.*bad value"):
        parse_config("grid_M = ten\n")


@pytest.mark.parametrize(
    "overrides",
    [
        {"potential": "coulomb"},
        {"L": -1.0},
        {"b": 1.5},  # beyond L/2 at default L=2
        {"R0": 0.7},  # beyond default b
        {"s_up": 12},
        {"grid_M": 1},
        {"K": 0},
        {"threads": 0},
        {"tolerance": 0.0},
        {"kF_up_ratio": Fraction(-1)},
    ],
)
def test_validation_rejects(overrides):
    with pytest.raises(ConfigError):
        make_config(**overrides)


def test_zero_potential_needs_no_core_radius():
    cfg = make_config(potential="zero", R0=0.0)
    assert cfg.potential == "zero"


# ---------------------------------------------------------------------------
# precedence: flags beat environment beats file


def test_load_config_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("threads = 2\nL = 4.0\n")
    env = {"GGR_THREADS": "3", "GGR_GRID_M": "12"}
    cfg = load_config(path, environ=env, flag_overrides={"threads": 4})
    assert cfg.threads == 4  # flag wins
    assert cfg.grid_M == 12  # env fills what flags left open
    assert cfg.L == 4.0  # file fills the rest


def test_env_overrides_parse_and_reject():
    assert env_overrides({"GGR_K_MAX": "2"}) == {"k_max": 2}
    assert env_overrides({"UNRELATED": "1"}) == {}
    with pytest.raises(ConfigError, match="GGR_GRID_M"):
        env_overrides({"GGR_GRID_M": "ten"})


def test_load_config_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/path.cfg")


# ---------------------------------------------------------------------------
# exit codes


def test_main_config_error_is_2(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("bogus = 1\n")
    code = main(["diagrams", "--config", str(bad), "--out", str(tmp_path)])
    assert code == 2
    assert "configuration error" in capsys.readouterr().err


def test_main_cap_exceeded_is_3(tmp_path, capsys):
    code = main(["diagrams", "--out", str(tmp_path), "5", "5", "0", "0"])
    assert code == 3
    assert "resource cap" in capsys.readouterr().err


def test_main_bad_diagram_arity_is_2(tmp_path, capsys):
    assert main(["diagrams", "--out", str(tmp_path), "2", "1"]) == 2
    assert "four non-negative integers" in capsys.readouterr().err


def test_main_success_is_0(tmp_path, capsys):
    assert main(["diagrams", "--out", str(tmp_path), "2", "1", "0", "0"]) == 0
    text = (tmp_path / "diagrams.txt").read_text()
    assert text.startswith("# ggr-diagrams v1\n")
    assert "# linked = 8" in text


def test_verify_failure_is_1(tmp_path, capsys):
    cfg = tmp_path / "strict.cfg"
    cfg.write_text(FAST + "tolerance = 1e-18\n")
    code = main(["verify", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 1
    out = capsys.readouterr().out
    assert "FAIL" in out
    assert (tmp_path / "verify.csv").read_text().startswith("# ggr-verify v1\n")


def test_verify_passes_at_documented_tolerance(tmp_path, capsys):
    cfg = tmp_path / "fast.cfg"
    cfg.write_text(FAST)
    code = main(["verify", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out


def test_run_unknown_command():
    with pytest.raises(ConfigError):
        run("fold", RunConfig())


# ---------------------------------------------------------------------------
# determinism


def rerun_bytes(tmp_path, argv, names):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b)]) == 0
    return [((a / n).read_bytes(), (b / n).read_bytes()) for n in names]


def test_scattering_artifact_deterministic(tmp_path, capsys):
    cfg = tmp_path / "fast.cfg"
    cfg.write_text(FAST)
    argv = ["scattering", "--config", str(cfg)]
    for first, second in rerun_bytes(tmp_path, argv, ["scattering.csv"]):
        assert first == second
    header = (tmp_path / "a" / "scattering.csv").read_text().splitlines()[0]
    assert header == "# ggr-scattering v1"


def test_polyhedron_artifact_deterministic(tmp_path, capsys):
    cfg = tmp_path / "fast.cfg"
    cfg.write_text(FAST)
    argv = ["polyhedron", "--config", str(cfg)]
    names = ["polyhedron_up.txt", "polyhedron_dn.txt", "polyhedron.json"]
    for first, second in rerun_bytes(tmp_path, argv, names):
        assert first == second


def test_expand_artifact_deterministic(tmp_path, capsys):
    cfg = tmp_path / "fast.cfg"
    cfg.write_text(FAST)
    argv = ["expand", "--config", str(cfg)]
    for first, second in rerun_bytes(tmp_path, argv, ["series.csv"]):
        assert first == second
    assert (tmp_path / "a" / "series.csv").read_text().startswith("# ggr-series v1\n")


def test_energy_artifact_independent_of_out_dir_and_threads(tmp_path, capsys):
    cfg = tmp_path / "fast.cfg"
    cfg.write_text(FAST)
    argv = ["energy", "--config", str(cfg)]
    (first, second) = rerun_bytes(tmp_path, argv, ["energy.json"])[0]
    assert first == second
    c, d = tmp_path / "c", tmp_path / "d"
    assert main(argv + ["--out", str(c), "--threads", "3"]) == 0
    assert first == (c / "energy.json").read_bytes()
