import math

import pytest

import layerspectra as ls

FLAT = {"schema_version": 1, "profile": {"family": "flat"}, "half_width": 1.0}
BUMP = {"schema_version": 1, "profile": {"family": "gaussian_bump", "beta": 0.3, "width": 1.0}, "half_width": 0.2}


def test_eta_matches_quadrature():
    for k in (2, 4, 6):
        assert ls.eta_closed(k, 1.0) == pytest.approx(ls.eta_quadrature(k, 1.0), rel=1e-10)
    assert ls.eta_closed(4, 1.0) == pytest.approx(2 - 12 / math.pi**2, rel=1e-12)


def test_bessel_value():
    # K_0(1) from tables
    assert ls.bessel_k(0, 1.0) == pytest.approx(0.42102443824070834, rel=1e-12)


def test_config_round_trip():
    once = ls.normalize_config(FLAT)
    assert ls.normalize_config(once) == once
    assert ls.input_hash(FLAT) == ls.input_hash(once)


def test_bad_schema_raises():
    with pytest.raises(ls.ConfigError):
        ls.normalize_config({"schema_version": 7, "profile": {"family": "flat"}, "half_width": 1.0})


def test_validate_flat():
    report = ls.validate(FLAT)
    assert report["A1"] == report["A2"] == report["A3"] == "pass"
    assert report["admissible"]


def test_k_total_bump_positive():
    k = ls.k_total(BUMP)
    assert k["value"] > 0
    assert k["integrable"]


def test_certify_flat_has_no_certificate():
    assert ls.certify(FLAT)["verdict"] == "NoCertificate"


def test_run_writes_record(tmp_path):
    code, run_dir, record, _ = ls.run(FLAT, "validate", out=str(tmp_path))
    assert code == 0
    assert record["results"]["admissibility"]["admissible"]
    assert (tmp_path / record["input_hash"] / "run.json").exists()
