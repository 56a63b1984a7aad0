import math
from pathlib import Path

import pytest

from gazeseg.metrics import EvalRecord
from gazeseg.report import (CSV_HEADER, TOTAL_ROW, compare_csv,
                            parse_report_csv, records_csv,
                            render_ablation_figure, sequences_csv, summarize,
                            to_csv, to_text, write_report_bundle)


def rec(cls, fid, iou, t=0.1, flags=(), seq=""):
    return EvalRecord(cls, fid, iou, t, "mock", list(flags), seq)


RECORDS = [
    rec("Bowl", "b0", 0.8, 0.10, seq="Bowl/1/a"),
    rec("Bowl", "b1", 0.6, 0.30, seq="Bowl/1/a"),
    rec("Mug", "m0", 1.0, 0.20, seq="Mug/2/b"),
]


class TestSummarize:
    def test_per_class_and_total(self):
        reports = summarize(RECORDS)
        assert [r.class_name for r in reports] == ["Bowl", "Mug", TOTAL_ROW]
        bowl, mug, total = reports
        assert bowl.mean_iou == pytest.approx(0.7)
        assert bowl.std_iou == pytest.approx(0.1)     # population std
        assert bowl.mean_time_s == pytest.approx(0.2)
        assert mug.std_iou == 0.0
        assert total.mean_iou == pytest.approx(0.8)
        assert total.std_iou == pytest.approx(
            math.sqrt(((0.8 - 0.8)**2 + (0.6 - 0.8)**2 + (1.0 - 0.8)**2) / 3))
        assert total.frame_count == 3

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            summarize([])


class TestCsv:
    def test_header_and_formatting(self):
        text = to_csv(summarize(RECORDS))
        lines = text.splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        assert lines[1] == "Bowl,0.700000,0.100000,0.200000,0.100000,2"
        assert lines[-1].startswith("total,0.800000,")

    def test_roundtrip_through_file(self, tmp_path):
        reports = summarize(RECORDS)
        path = tmp_path / "r.csv"
        path.write_text(to_csv(reports))
        back = parse_report_csv(path)
        assert [r.class_name for r in back] == [r.class_name for r in reports]
        for a, b in zip(back, reports):
            assert a.mean_iou == pytest.approx(b.mean_iou, abs=5e-7)
            assert a.frame_count == b.frame_count

    def test_records_csv_flags_joined(self):
        text = records_csv([rec("Bowl", "b0", 0.0, 0.0,
                                flags=["no-fixation", "x"])])
        assert "no-fixation;x" in text.splitlines()[1]

    def test_sequences_csv(self):
        lines = sequences_csv(RECORDS).splitlines()
        assert lines[0] == "sequence,mean_iou,std_iou,frames"
        assert lines[1] == "Bowl/1/a,0.700000,0.100000,2"
        assert lines[2] == "Mug/2/b,1.000000,0.000000,1"


class TestText:
    def test_aligned_columns_and_total(self):
        text = to_text(summarize(RECORDS), title="demo")
        lines = text.splitlines()
        assert lines[0] == "demo"
        assert lines[1].split() == ["class", "mIoU", "std", "time_s", "std",
                                    "frames"]
        assert lines[-1].split()[0] == TOTAL_ROW
        assert "0.7000" in lines[2]


class TestCompare:
    def test_pct_delta(self):
        a = summarize([rec("Bowl", "b0", 0.5)])
        b = summarize([rec("Bowl", "b0", 0.6)])
        lines = compare_csv(a, b).splitlines()
        assert lines[0].endswith("pct_delta")
        row = lines[1].split(",")
        assert row[0] == "Bowl"
        assert row[1] == "0.500000" and row[2] == "0.600000"
        assert row[5] == "20.00"

    def test_zero_baseline(self):
        a = summarize([rec("Bowl", "b0", 0.0)])
        b = summarize([rec("Bowl", "b0", 0.0)])
        assert compare_csv(a, b).splitlines()[1].endswith("0.00")


class TestBundle:
    def test_all_artifacts_written(self, tmp_path):
        paths = write_report_bundle(RECORDS, tmp_path, stem="eval")
        names = [Path(p).name for p in paths]
        assert names == ["eval.csv", "eval.txt", "eval_records.csv",
                         "eval_sequences.csv", "eval.png"]
        for p in paths:
            assert Path(p).stat().st_size > 0
        assert Path(paths[-1]).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_figure_bytes_deterministic(self, tmp_path):
        a = write_report_bundle(RECORDS, tmp_path / "a", stem="eval")
        b = write_report_bundle(RECORDS, tmp_path / "b", stem="eval")
        for pa, pb in zip(a, b):
            assert Path(pa).read_bytes() == Path(pb).read_bytes(), pa

    def test_ablation_figure(self, tmp_path):
        per_window = {t: summarize([rec("Bowl", "b0", 0.5 + 0.1 * t)])
                      for t in (1, 3, 5)}
        path = tmp_path / "ablation.png"
        render_ablation_figure(per_window, path)
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
