import pytest

from weakmeas.verify import CheckResult, apply_overrides, run_suite


def test_unknown_suite():
    with pytest.raises(ValueError, match="unknown suite"):
        run_suite("nope")


def test_gabor_suite_passes():
    results = run_suite("gabor")
    assert results and all(r.passed for r in results)
    assert len({r.check_name for r in results}) == len(results)


def test_overrides_rejudge():
    results = [CheckResult("a", 0.5, 1.0, True, "<="), CheckResult("b", 0.9, 0.99, False, ">=")]
    out = apply_overrides(results, {"a": 0.1, "b": 0.5})
    assert [r.passed for r in out] == [False, True]
    assert out[0].tolerance == 0.1


def test_json_shape():
    d = CheckResult("x", 1.0, 2.0, True).to_json()
    assert d == {"check_name": "x", "value": 1.0, "tolerance": 2.0, "pass": True, "comparison": "<="}
