import pytest

from dampwave.dynamics import Mode
from dampwave.errors import ConfigParseError, InvalidConfigError
from dampwave.harness.config import (
    CertificateOptions,
    SweepAxis,
    get_path,
    parse_config,
    parse_sweep_spec,
    set_path,
    validate_config,
)


def delayed_document(config_dict):
    return config_dict(mode="delayed", tau=0.1, history={"kind": "zero"})


def test_minimal_config_fills_defaults(config_dict):
    cfg = validate_config(delayed_document(config_dict))
    assert cfg.mode == Mode.DELAYED
    assert cfg.time.cfl == 0.5
    assert cfg.time.output_stride == 1
    assert cfg.time.dt is None
    assert cfg.grid.L == 1.0
    assert cfg.seed == 0
    assert cfg.certificate is None
    assert cfg.nonlinearity.u.kind == "zero"


def test_mode_specific_fields(config_dict):
    with pytest.raises(InvalidConfigError, match="tau forbidden for mode=indefinite"):
        validate_config(config_dict(mode="indefinite", tau=0.1))
    with pytest.raises(InvalidConfigError, match="history forbidden for mode=linear_reference"):
        validate_config(config_dict(history={"kind": "zero"}))
    with pytest.raises(InvalidConfigError, match="tau required for mode=delayed"):
        validate_config(config_dict(mode="delayed", history={"kind": "zero"}))
    with pytest.raises(InvalidConfigError, match="history required for mode=delayed"):
        validate_config(config_dict(mode="delayed", tau=0.1))
    with pytest.raises(InvalidConfigError, match="nonlinearities forbidden for mode=definite"):
        validate_config(config_dict(mode="definite", nonlinearity={"u": {"kind": "odd_power"}}))


def test_out_of_range_values_are_rejected(config_dict):
    with pytest.raises(InvalidConfigError, match="grid.n_interior"):
        validate_config(config_dict(grid={"n_interior": 0}))
    with pytest.raises(InvalidConfigError, match="time.T_final"):
        validate_config(config_dict(time={"T_final": -1.0}))
    with pytest.raises(InvalidConfigError, match="fit_window"):
        validate_config(config_dict(fit_window=[2.0, 1.0]))


def test_unknown_keys_are_rejected(config_dict):
    with pytest.raises(InvalidConfigError, match="extra_key"):
        validate_config(config_dict(extra_key=1))


def test_malformed_json_reports_position():
    text = '{\n  "grid": {"n_interior": 3,,}\n}'
    with pytest.raises(ConfigParseError) as info:
        parse_config(text)
    assert info.value.line == 2
    assert info.value.column > 1
    assert isinstance(info.value, InvalidConfigError)


def test_parse_config_from_file(config_dict, write_config):
    path = write_config(delayed_document(config_dict))
    cfg = parse_config(path)
    assert cfg.tau == 0.1
    assert parse_config(str(path)).tau == 0.1
    with pytest.raises(InvalidConfigError):
        parse_config(path.parent / "missing.json")


def test_given_certificate_needs_constants():
    with pytest.raises(ValueError):
        CertificateOptions(method="given", M=2.0)
    options = CertificateOptions(method="given", M=2.0, alpha=1.0)
    assert options.T_step == 0.01
    assert options.shrink_rho


def test_dotted_paths():
    document = {"a": {"b": [{"c": 1.0}, {"c": 2.0}]}}
    assert get_path(document, "a.b.1.c") == 2.0
    updated = set_path(document, "a.b.0.c", 5.0)
    assert updated["a"]["b"][0]["c"] == 5.0
    assert document["a"]["b"][0]["c"] == 1.0
    with pytest.raises(InvalidConfigError):
        get_path(document, "a.x")
    with pytest.raises(InvalidConfigError):
        get_path(document, "a.b.7.c")
    with pytest.raises(InvalidConfigError):
        set_path(document, "a.b.0.d", 1.0)


def test_sweep_axis_values():
    assert SweepAxis(path="tau", min=0.0, max=1.0, steps=3).values() == [0.0, 0.5, 1.0]
    with pytest.raises(ValueError):
        SweepAxis(path="tau", min=0.0, max=1.0, steps=1)


def test_sweep_spec_validation(config_dict, write_config):
    base = delayed_document(config_dict)
    spec = parse_sweep_spec(write_config({
        "base": base,
        "axes": [{"path": "tau", "min": 0.1, "max": 0.5, "steps": 3},
                 {"path": "coefficients.a2.value", "min": 0.0, "max": 1.0, "steps": 2}],
    }))
    assert spec.classifier.growth_threshold == 0.01
    assert spec.classifier.fit_fraction == pytest.approx(1.0 / 3.0)

    with pytest.raises(InvalidConfigError, match="numeric"):
        parse_sweep_spec(write_config({"base": base, "axes": [{"path": "mode", "min": 0, "max": 1, "steps": 2}]},
                                      name="mode.json"))
    with pytest.raises(InvalidConfigError):
        parse_sweep_spec(write_config({"base": base, "axes": [{"path": "grid.missing", "min": 0, "max": 1,
                                                               "steps": 2}]}, name="missing.json"))
    three = [{"path": "tau", "min": 0.1, "max": 0.5, "steps": 2}] * 3
    with pytest.raises(InvalidConfigError):
        parse_sweep_spec(write_config({"base": base, "axes": three}, name="three.json"))
