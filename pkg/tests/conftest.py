"""Prints a one-line verdict per acceptance criterion after the run."""

_LABELS = {
    "test_criterion_1_coverage_confidence_oracle":
        "criterion 1: coverage/confidence equal a brute-force oracle on 50+ random datasets",
    "test_criterion_2_objective_worked_values":
        "criterion 2: objective reproduces the four hand-computed values to 1e-12",
    "test_criterion_3_extraction_soundness":
        "criterion 3: extracted rules cover their sources; boundary recovered to 0.02",
    "test_criterion_4_fusion_interval_algebra":
        "criterion 4: fusion interval algebra exact on 200 random rule pairs",
    "test_criterion_5_lasso_solver":
        "criterion 5: lasso matches grid minimizer, descends monotonically, zeros at lambda_max",
    "test_criterion_6_reference_rules_roundtrip":
        "criterion 6: reference rules parse/re-serialize losslessly; fusion adds no conditions",
    "test_criterion_7_rank_statistics":
        "criterion 7: rank tests match exhaustive enumeration and hand formulas",
    "test_criterion_8_pipeline_budget_determinism":
        "criterion 8: end-to-end run inside budget, byte-identical under a fixed seed",
    "test_criterion_9_percentile_noise_filter":
        "criterion 9: higher attribution percentile filters noise (mean objective rises)",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::" not in nodeid:
                continue
            name = nodeid.rsplit("::", 1)[-1]
            if name not in _LABELS:
                continue
            if outcome == "passed" and getattr(rep, "when", "call") != "call":
                continue
            # a failure at any phase outranks an earlier pass
            if outcome != "passed" or name not in verdicts:
                verdicts[name] = "PASS" if outcome == "passed" else "FAIL"
    if not verdicts:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name in sorted(_LABELS, key=lambda k: int(k.split("_")[2])):
        if name in verdicts:
            terminalreporter.write_line(f"[{verdicts[name]}] {_LABELS[name]}")
