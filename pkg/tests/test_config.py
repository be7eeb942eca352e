import pytest

from ropper import config
from ropper.errors import InputError
from ropper.sim import DEFAULT_BETA


def test_defaults_filled_per_kind():
    cfg = config.load("scenario.kind=emulated_education\n")
    assert cfg["scenario.K"] == 862 and cfg["scenario.n_max"] == 20
    assert cfg["scenario.beta"] == DEFAULT_BETA["emulated_education"]
    cfg = config.load("")
    assert cfg["scenario.K"] == 50 and cfg["scenario.beta"] == (1.0, 0.0)


def test_comments_blank_lines_and_types():
    text = """
    # a comment
    scenario.K = 30
    scenario.sigma2=5
    fit.standardize = yes
    mm.seed = none
    scenario.beta = 1, -0.5
    """
    cfg = config.load(text)
    assert cfg["scenario.K"] == 30 and cfg["scenario.sigma2"] == 5.0
    assert cfg["fit.standardize"] is True and cfg["mm.seed"] is None
    assert cfg["scenario.beta"] == (1.0, -0.5)


@pytest.mark.parametrize("text,match", [
    ("scenario.bogus=1\n", "unknown config key"),
    ("scenario.K=1\nscenario.K=2\n", "duplicate key"),
    ("just words\n", "expected key=value"),
    ("scenario.K=ten\n", "expected an integer"),
    ("scenario.re_dist=cauchy\n", "not one of"),
    ("fit.standardize=maybe\n", "boolean"),
])
def test_rejects_with_line_numbers(text, match):
    with pytest.raises(InputError, match=match) as exc:
        config.load(text, source="run.cfg")
    assert "run.cfg:" in str(exc.value)


def test_indexed_override_and_range():
    cfg = config.load("scenario.beta.1=-1\n")
    assert cfg["scenario.beta"] == (1.0, -1.0)
    with pytest.raises(InputError, match="out of range"):
        config.load("scenario.beta.5=1\n")


def test_overrides_replace_file_values():
    cfg = config.load("scenario.K=30\n", ["scenario.K=40", "fit.tau_method=nn"])
    assert cfg["scenario.K"] == 40 and cfg["fit.tau_method"] == "nn"
    with pytest.raises(InputError):
        config.load("", ["nonsense"])
    with pytest.raises(InputError):
        config.load("", ["fit.unknown=1"])


def test_dump_round_trips_exactly():
    cfg = config.load("scenario.sigma2=0.1\nscenario.beta=0.30000000000000004,1e-300\noutput.dir=/tmp/x\n")
    text = config.dump(cfg)
    assert "output.dir" not in text
    again = config.load(text)
    again["output.dir"] = cfg["output.dir"]
    assert again == cfg
    assert config.dump(again) == text
    lines = text.splitlines()
    assert lines == sorted(lines)


def test_sweep_parsing_and_points():
    key, vals = config.parse_sweep("scenario.beta.1=-1,0,1")
    assert key == "scenario.beta.1" and vals == (-1.0, 0.0, 1.0)
    cfg = config.load("", ["sweep.key=scenario.beta.1", "sweep.values=-1,0,1"])
    pts = config.sweep_points(cfg)
    assert [v for v, _ in pts] == [-1.0, 0.0, 1.0]
    assert [c["scenario.beta"][1] for _, c in pts] == [-1.0, 0.0, 1.0]
    cfg = config.load("", ["sweep.key=scenario.K", "sweep.values=20,30"])
    assert [c["scenario.K"] for _, c in config.sweep_points(cfg)] == [20, 30]
    for bad in ("scenario.kind=a,b", "scenario.beta=1", "fit.tau_method=reml", "scenario.K=", "noequals"):
        with pytest.raises(InputError):
            config.parse_sweep(bad)
    cfg = config.load("", ["sweep.key=scenario.K", "sweep.values=20.5"])
    with pytest.raises(InputError):
        config.sweep_points(cfg)


def test_builders():
    cfg = config.load("fit.tau_method=nn\nmm.max_iter=7\nfit.order_h=2\n")
    opts = config.fit_options(cfg)
    assert opts.tau_method == "nn" and opts.mm.max_iter == 7 and opts.risk_order == 2
    sc = config.scenario_config(cfg)
    assert sc.tau_method == "nn" and sc.order_h == 2
    with pytest.raises(InputError):
        config.fit_options(config.load("fit.tau_method=both\n"))


def test_embedded_config_is_preferred(tmp_path):
    out = tmp_path / "out.csv"
    out.write_text("# ropper 0.1.0\n#config scenario.K=33\n#config fit.order_h=2\nid,x\n1,2\n")
    assert config.read_config_file(str(out)) == "scenario.K=33\nfit.order_h=2\n"
    plain = tmp_path / "plain.cfg"
    plain.write_text("scenario.K=12\n")
    assert config.read_config_file(str(plain)) == "scenario.K=12\n"
