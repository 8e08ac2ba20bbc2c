"""Study driver, order estimation, report files and the CLI."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from conftest import get_physical_k
from teig.cli import load_config_file, main, parse_eigs, parse_ladder
from teig.harness import StudyConfig, StudyRecord, estimate_order, run_study
from teig.report import CSV_HEADER, emit_report, render_csv, render_svg, render_text_table

SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# estimate_order

def test_slope_exact_fourth_order():
    assert estimate_order([(0.1, 1e-4), (0.05, 6.25e-6)]) == pytest.approx(4.0, abs=1e-12)


def test_slope_flat():
    assert estimate_order([(0.1, 3.0), (0.05, 3.0)]) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize(
    "bad",
    [
        [(0.1, 1e-4)],                      # too few points
        [(0.1, 1e-4), (0.1, 2e-4)],         # duplicate h
        [(0.1, 1e-4), (0.05, 0.0)],         # nonpositive error
        [(0.1, 1e-4), (-0.05, 1e-5)],       # nonpositive h
    ],
)
def test_slope_rejects_degenerate(bad):
    with pytest.raises(ValueError):
        estimate_order(bad)


def test_slope_from_own_solves():
    # eigenvalue convergence of the direct discretization is fourth order
    k_ref = get_physical_k("square", "const16", 128, 1, how_many=6)
    errors = []
    for cells in (16, 32, 64):
        k = get_physical_k("square", "const16", cells, 1)
        errors.append((SQRT2 / cells, abs(k - k_ref) / abs(k_ref)))
    slope = estimate_order(errors)
    assert 3.5 <= slope <= 4.5, slope


# ---------------------------------------------------------------------------
# configuration

def test_config_validation():
    StudyConfig().validate()
    with pytest.raises(ValueError):
        StudyConfig(ladder=[]).validate()
    with pytest.raises(ValueError):
        StudyConfig(ladder=[(4, 6)]).validate()
    with pytest.raises(ValueError):
        StudyConfig(mode="fast").validate()
    with pytest.raises(ValueError):
        StudyConfig(eigs=[0]).validate()
    with pytest.raises(ValueError):
        StudyConfig(domain="triangle").validate()
    with pytest.raises(ValueError):
        StudyConfig(index="n42").validate()


def test_parse_helpers():
    assert parse_ladder("4:16,8:32, 16:64") == [(4, 16), (8, 32), (16, 64)]
    assert parse_eigs("1,2,4") == [1, 2, 4]
    with pytest.raises(ValueError):
        parse_ladder("4-16")


# ---------------------------------------------------------------------------
# run_study

@pytest.fixture(scope="module")
def small_study():
    config = StudyConfig(domain="square", index="const16", mode="both",
                         ladder=[(4, 8)], eigs=[1, 2])
    return run_study(config)


def test_study_rows_complete(small_study):
    assert len(small_study.rows) == 2
    for row in small_study.rows:
        assert row.error is None
        assert row.k_H is not None and row.k_h is not None and row.k_tg is not None
        assert row.residual is not None and row.residual <= 1e-9
    k1 = small_study.rows[0]
    assert abs(k1.k_H - get_physical_k("square", "const16", 4, 1)) < 1e-12
    assert abs(k1.k_h - get_physical_k("square", "const16", 8, 1)) < 1e-12


def test_study_reference_prefers_direct_on_square(small_study):
    ref = [r for r in small_study.references if r.j == 1][0]
    assert ref.series == "direct"
    assert ref.h_cells == 8


def test_study_twogrid_mode_consistency():
    config = StudyConfig(domain="square", index="const16", mode="twogrid",
                         ladder=[(8, 8)], eigs=[1])
    record = run_study(config)
    row = record.rows[0]
    assert row.k_h is not None  # filled from the coarse solve when H == h
    assert abs(row.k_tg - row.k_h) <= 1e-9 * abs(row.k_h)


def test_study_direct_mode_has_no_twogrid():
    config = StudyConfig(domain="square", index="const16", mode="direct",
                         ladder=[(4, 8)], eigs=[1])
    record = run_study(config)
    assert record.rows[0].k_tg is None
    assert record.rows[0].k_h is not None


def test_study_skips_large_direct_solves():
    config = StudyConfig(domain="square", index="const16", mode="both",
                         ladder=[(4, 8)], eigs=[1], max_direct_cells=4)
    record = run_study(config)
    row = record.rows[0]
    assert row.k_h is None  # skipped, mirrored by '---' in the text table
    assert row.k_tg is not None
    assert "---" in render_text_table(record)


def test_study_records_row_failure():
    config = StudyConfig(domain="square", index="const16", mode="both",
                         ladder=[(1, 4), (4, 8)], eigs=[1])
    record = run_study(config)
    failed = {(r.H_cells, r.h_cells): r for r in record.rows}
    assert failed[(1, 4)].error is not None  # no free DOFs on the 1-cell mesh
    assert failed[(4, 8)].error is None
    assert record.failed_rows


def test_study_lshape_reference_prefers_twogrid():
    config = StudyConfig(domain="lshape", index="const16", mode="both",
                         ladder=[(2, 4), (4, 8)], eigs=[1])
    record = run_study(config)
    ref = record.references[0]
    assert ref.series == "twogrid"
    assert ref.h_cells == 8


def test_study_determinism_and_threads(small_study):
    config = StudyConfig(domain="square", index="const16", mode="both",
                         ladder=[(4, 8)], eigs=[1, 2], threads=2)
    record = run_study(config)
    for a, b in zip(small_study.rows, record.rows):
        assert a.k_H == b.k_H
        assert a.k_h == b.k_h
        assert a.k_tg == b.k_tg


# ---------------------------------------------------------------------------
# reports

def test_csv_schema(small_study):
    text = render_csv(small_study)
    lines = text.strip().split("\n")
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + len(small_study.rows)
    first = lines[1].split(",")
    assert len(first) == 11
    assert complex(float(first[3]), float(first[4])) == small_study.rows[0].k_H


def test_csv_complex_pair():
    config = StudyConfig(domain="square", index="tilt", mode="direct",
                         ladder=[(4, 8)], eigs=[5, 6])
    record = run_study(config)
    lines = render_csv(record).strip().split("\n")
    kh_im = [float(ln.split(",")[6]) for ln in lines[1:]]
    assert kh_im[0] > 0 and kh_im[1] < 0
    text = render_text_table(record)
    assert "±" in text  # paired imaginary line


def test_json_roundtrip(small_study):
    blob = json.dumps(small_study.to_dict(), indent=2)
    back = StudyRecord.from_dict(json.loads(blob))
    assert back == small_study


def test_emit_deterministic_bytes(small_study, tmp_path):
    a = emit_report(small_study, out_dir=tmp_path / "a")
    b = emit_report(small_study, out_dir=tmp_path / "b")
    for fmt in a:
        assert a[fmt].read_bytes() == b[fmt].read_bytes()


def test_rerun_matches_modulo_timing(small_study):
    again = run_study(small_study.config)
    strip = lambda rec: [
        (r.j, r.H_cells, r.h_cells, r.k_H, r.k_h, r.k_tg, r.residual, r.error)
        for r in rec.rows
    ]
    assert strip(again) == strip(small_study)
    # with timing columns masked the CSV bytes agree too
    mask = lambda text: "\n".join(ln.rsplit(",", 1)[0] for ln in text.split("\n"))
    assert mask(render_csv(again)) == mask(render_csv(small_study))


def test_svg_structure(small_study):
    svg = render_svg(small_study)
    n_series = len({(p.j, p.series) for p in small_study.error_points})
    assert svg.count("<polyline") == n_series
    assert "2^-" in svg
    assert svg.startswith("<svg")


# ---------------------------------------------------------------------------
# CLI

def test_cli_study(tmp_path, capsys):
    out = tmp_path / "run"
    code = main([
        "study", "--domain", "square", "--index", "const16", "--mode", "both",
        "--ladder", "4:8", "--eigs", "1", "--out", str(out),
    ])
    assert code == 0
    for name in ("study.txt", "study.csv", "study.json", "errors.svg"):
        assert (out / name).exists()
    captured = capsys.readouterr()
    assert "k_jH" in captured.out


def test_cli_config_file(tmp_path):
    cfg = tmp_path / "study.cfg"
    cfg.write_text(
        "# benchmark setup\n"
        "domain = square\n"
        "index = const16\n"
        "ladder = 4:8\n"
        "eigs = 1\n"
        "mode = direct\n"
        f"out = {tmp_path / 'cfg-run'}\n"
    )
    assert main(["study", "--config", str(cfg)]) == 0
    data = json.loads((tmp_path / "cfg-run" / "study.json").read_text())
    assert data["config"]["mode"] == "direct"
    # explicit flags override the file
    assert main(["study", "--config", str(cfg), "--mode", "both",
                 "--out", str(tmp_path / "cfg-run2")]) == 0
    data2 = json.loads((tmp_path / "cfg-run2" / "study.json").read_text())
    assert data2["config"]["mode"] == "both"


def test_cli_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("TEIG_THREADS", "2")
    out = tmp_path / "env-run"
    assert main(["study", "--ladder", "4:8", "--eigs", "1", "--out", str(out)]) == 0
    data = json.loads((out / "study.json").read_text())
    assert data["config"]["threads"] == 2


def test_cli_rejects_bad_config():
    assert main(["study", "--ladder", "4:6"]) == 2


def test_cli_bad_config_file(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("nonsense-key = 1\n")
    assert main(["study", "--config", str(cfg)]) == 2
    with pytest.raises(ValueError):
        load_config_file(cfg)
