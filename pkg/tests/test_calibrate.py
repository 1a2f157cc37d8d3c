import math

import pytest

from dynrcm import calibrate, norms, registry


def test_registry_contents():
    reg = registry.load()
    assert reg["version"] == calibrate.VERSION
    for name in ("c_l1[d=2]", "c_box[d=2]", "c2", "c7", "c10", "c11", "tilde"):
        e = registry.entry(name, reg)
        assert e["value"] > 0 and "oracle" in e
    for d, a, b in calibrate.SOBOLEV_CASES:
        assert registry.value(registry.c0_key(d, a, b), reg) > 0
    with pytest.raises(KeyError, match="missing"):
        registry.entry("nope", reg)


@pytest.mark.parametrize("d", [2, 3])
def test_sobolev_constants_recalibrate(d):
    reg = registry.load()
    assert calibrate.calibrate_l1_sobolev(d)["value"] == pytest.approx(registry.value(f"c_l1[d={d}]", reg), rel=0.02)
    assert calibrate.calibrate_box_sobolev(d)["value"] == pytest.approx(registry.value(f"c_box[d={d}]", reg),
                                                                        rel=0.02)


def test_registry_values_dominate_empirical_sups():
    reg = registry.load()
    for name, e in reg["constants"].items():
        if isinstance(e.get("empirical_sup"), (int, float)):
            assert e["empirical_sup"] <= e["value"] * (1 + 1e-12), name


def test_c0_registry_uses_explicit_bound():
    reg = registry.load()
    for d, a, b in calibrate.SOBOLEV_CASES:
        assert registry.value(registry.c0_key(d, a, b), reg) == pytest.approx(norms.c0_bound(d, a, b))


def test_compare_flags_drift():
    a = {"constants": {"x": {"value": 1.0}, "y": {"value": 2.0}}}
    b = {"constants": {"x": {"value": 1.01}, "y": {"value": 2.2}}}
    assert calibrate.compare(a, b) == {"y": (2.0, 2.2)}
    assert calibrate.compare(a, {"constants": {}}) == {"x": "missing", "y": "missing"}


def test_small_sobolev_suite_holds():
    recs = calibrate.sobolev_suite(40)
    assert recs and all(r["holds"] for r in recs)


def test_tilde_suite_small():
    r = calibrate.tilde_suite(2000)
    assert r["holds"] and r["violations"] == 0 and r["max_ratio"] <= 1


def test_corpus_generators_are_deterministic():
    a = calibrate.site_corpus(10, 2, 5)
    b = calibrate.site_corpus(10, 2, 5)
    assert all((x[0] == y[0]).all() and x[1] == y[1] for x, y in zip(a, b))
