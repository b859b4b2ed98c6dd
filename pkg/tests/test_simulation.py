import json

import pytest

from sigverify.corpus import generate_synthetic_corpus
from sigverify.errors import ConfigError
from sigverify.simulation import (
    SimulationConfig,
    emit_report,
    report_csv_text,
    report_json_document,
    run_simulation,
)

SMOKE_K = 8


@pytest.fixture(scope="module")
def smoke_corpus():
    return generate_synthetic_corpus(12, 10, 4, seed=7)


@pytest.fixture(scope="module")
def smoke_report(smoke_corpus):
    config = SimulationConfig(
        ratio_thresholds=(0.6,),
        refs_count=3,
        fusion="max",
        enroll_modes=("intelligent", "normal"),
        threshold_modes=("ct", "it"),
        random_forgeries=True,
        split_seed=7,
        coefficient_count=SMOKE_K,
    )
    return run_simulation(smoke_corpus, config), config


class TestConfigValidation:
    def test_bad_refs(self):
        with pytest.raises(ConfigError):
            SimulationConfig(refs_count=4)

    def test_bad_modes(self):
        with pytest.raises(ConfigError):
            SimulationConfig(enroll_modes=("clever",))
        with pytest.raises(ConfigError):
            SimulationConfig(threshold_modes=("both",))


class TestRunSimulation:
    def test_row_inventory(self, smoke_report):
        report, config = smoke_report
        # 2 enroll modes x 2 threshold modes x 2 protocols x 1 ratio
        assert len(report.rows) == 8
        combos = {(r.enrollment, r.threshold_mode, r.forgery_protocol) for r in report.rows}
        assert len(combos) == 8

    def test_protocol_counts_normal_mode(self, smoke_report):
        report, _ = smoke_report
        db3 = report.metadata["db3_size"]
        for row in report.rows:
            if row.enrollment != "normal":
                continue
            assert row.fte_rate == 0.0
            if row.forgery_protocol == "skilled":
                assert row.n_genuine_tests == db3 * 4  # 10 genuine - 6 reserved
                assert row.n_impostor_tests == db3 * 4
            else:
                assert row.n_impostor_tests == db3 * (db3 - 1)

    def test_intelligent_counts_scale_with_enrolled(self, smoke_report):
        report, _ = smoke_report
        db3 = report.metadata["db3_size"]
        for row in report.rows:
            if row.enrollment != "intelligent":
                continue
            enrolled = round(db3 * (1 - row.fte_rate))
            if row.forgery_protocol == "skilled":
                assert row.n_genuine_tests == enrolled * 4
                assert row.n_impostor_tests == enrolled * 4
            else:
                assert row.n_impostor_tests == enrolled * (enrolled - 1)

    def test_apriori_never_below_posterior(self, smoke_report):
        report, _ = smoke_report
        for row in report.rows:
            assert row.dcf_apriori >= row.min_dcf

    def test_fte_zero_under_normal_enrollment(self, smoke_report):
        report, _ = smoke_report
        assert all(r.fte_rate == 0.0 for r in report.rows if r.enrollment == "normal")

    def test_determinism_byte_identical(self, smoke_corpus, smoke_report):
        report, config = smoke_report
        again = run_simulation(smoke_corpus, config)
        assert report_csv_text(again) == report_csv_text(report)
        assert json.dumps(report_json_document(again)) == json.dumps(
            report_json_document(report)
        )

    def test_disjoint_split_metadata(self, smoke_report):
        report, _ = smoke_report
        m = report.metadata
        assert m["db1_size"] + m["db2_size"] + m["db3_size"] == 12


class TestAlphaOverrideReduction:
    def test_it_report_equals_ct_report_with_zero_alphas(self, smoke_corpus):
        base = dict(
            ratio_thresholds=(0.6,),
            refs_count=3,
            fusion="max",
            enroll_modes=("intelligent",),
            random_forgeries=False,
            split_seed=7,
            coefficient_count=SMOKE_K,
        )
        ct_report = run_simulation(
            smoke_corpus, SimulationConfig(threshold_modes=("ct",), **base)
        )
        it_report = run_simulation(
            smoke_corpus,
            SimulationConfig(threshold_modes=("it",), alpha_override=(0.0, 0.0), **base),
        )
        ct_csv = report_csv_text(ct_report).replace(",ct,", ",_,")
        it_csv = report_csv_text(it_report).replace(",it,", ",_,")
        assert ct_csv == it_csv


class TestEmitReport:
    def test_files_and_roundtrip(self, tmp_path, smoke_report):
        report, _ = smoke_report
        csv_path, json_path = emit_report(report, tmp_path)
        text = csv_path.read_text()
        lines = text.strip().splitlines()
        assert len(lines) == 1 + len(report.rows)
        assert lines[0].startswith("ratio_threshold,")
        doc = json.loads(json_path.read_text())
        for row, emitted in zip(report.rows, doc["rows"]):
            assert emitted["frr"] == row.frr  # full precision survives JSON
            assert emitted["min_dcf"] == row.min_dcf
            assert len(emitted["det_points"]) == len(row.det_points)

    def test_header_only_for_empty_report(self, tmp_path):
        from sigverify.simulation import SimulationReport

        empty = SimulationReport(rows=[], metadata={})
        csv_path, _ = emit_report(empty, tmp_path, basename="empty")
        assert csv_path.read_text().strip().count("\n") == 0

    def test_four_significant_digits(self, smoke_report):
        report, _ = smoke_report
        text = report_csv_text(report)
        row = text.splitlines()[1].split(",")
        frr_field = row[6]
        assert len(frr_field.replace(".", "").replace("-", "").lstrip("0")) <= 4
