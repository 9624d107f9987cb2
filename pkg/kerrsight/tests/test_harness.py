import json

import pytest

from kerrsight.core.harness import CHECKS, CheckCase, CheckHarness, default_cases
from kerrsight.core.tracer import RunTracer, StepType


def case(check, params=None, case_id=None):
    return CheckCase(id=case_id or check, name=check.replace("_", " "), check=check,
                     expected_behavior="", params=params or {})


def test_default_cases_reference_known_checks():
    cases = default_cases()
    ids = {c.id for c in cases}
    assert {"disk_oracle", "nonlinear_scaling", "operator_identities", "lipschitz_estimates", "no_contraction",
            "separation"} <= ids
    assert all(c.check in CHECKS for c in cases)


def test_unknown_check_rejected():
    with pytest.raises(KeyError):
        CheckHarness().add_case(case("not_a_check"))


def test_lipschitz_estimates_check_passes():
    result = CheckHarness().run_case(case("lipschitz_estimates", {"samples": 5000, "pairs": 2000}))
    assert result.status == "passed"
    assert result.measured["power_difference_failures"] == 0
    assert result.measured["c_q"] <= result.measured["proven_bound"]


def test_no_contraction_check_passes():
    result = CheckHarness().run_case(case("no_contraction", {"J": 10, "M": 64, "N": 8}))
    assert result.status == "passed"
    assert result.measured["sweeps"] >= 1


def test_operator_identities_check_passes():
    params = {"M": 64, "N": 8, "J": 20, "pairs": 20, "densities": 5, "direction_pairs": 8}
    result = CheckHarness().run_case(case("operator_identities", params))
    assert result.status == "passed", result.failure_reason
    assert result.measured["reciprocity"] <= 1e-8
    assert result.measured["linear_factorization"] <= 1e-8
    assert result.measured["born_disk"] <= 5e-2


def test_invalid_parameters_are_reported_as_errors():
    result = CheckHarness().run_case(case("disk_oracle", {"radius": -1.0, "J": 5}))
    assert result.status == "error"
    assert result.measured["error_type"] == "invariant_violation"
    assert "InvalidParameterError" in result.failure_reason


def test_run_all_summary_and_results_file(tmp_path):
    tracer = RunTracer()
    tracer.start_run("check")
    harness = CheckHarness(tracer)
    harness.add_case(case("lipschitz_estimates", {"samples": 2000, "pairs": 500}))
    harness.add_case(case("disk_oracle", {"radius": -1.0, "J": 5}, case_id="broken"))
    harness.run_all()
    summary = harness.get_summary()
    assert (summary["total_checks"], summary["passed"], summary["errors"]) == (2, 1, 1)
    assert summary["pass_rate"] == 0.5
    assert [r.case_id for r in harness.rerun_failed()] == ["broken"]

    path = tmp_path / "out" / "results.json"
    harness.save_results(path)
    saved = json.loads(path.read_text())
    assert saved["summary"]["total_checks"] == 2
    assert [r["status"] for r in saved["results"]] == ["passed", "error"]
    assert sum(s.step_type is StepType.ACCEPTANCE_CHECK for s in tracer.steps) == 3


def test_load_cases(tmp_path):
    path = tmp_path / "cases.json"
    path.write_text(json.dumps([case("lipschitz_estimates", {"samples": 100}).to_dict()]))
    harness = CheckHarness()
    harness.load_cases(path)
    assert harness.cases[0].params == {"samples": 100}
