import csv
import subprocess
import sys

import numpy as np
import pytest

from corrocrack.cli import main
from corrocrack.io import CAMPAIGN_COLUMNS, read_series_csv
from corrocrack.mesh import load_mesh

COARSE = "[concrete]\nell = 0.01\n[solver]\nh_fine = 0.002\nh_coarse = 0.01\n"


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


@pytest.fixture
def idle_cfg(tmp_path):
    return write(tmp_path, "idle.ini", "i_a = 0.0\n" + COARSE + "t_end = 1000.0\n")


class TestRun:
    def test_no_current(self, tmp_path, idle_cfg, capsys):
        out = tmp_path / "out"
        assert main(["run", idle_cfg, "-o", str(out)]) == 0
        i_a, cols = read_series_csv(out / "series.csv")
        assert i_a == 0.0 and np.all(cols["w"] == 0.0) and cols["t"][-1] == pytest.approx(1000.0)
        assert (out / "summary.txt").read_text().startswith("corrocrack run summary")
        assert "not cracked" in capsys.readouterr().out

    def test_vtk_layout(self, tmp_path, idle_cfg):
        out = tmp_path / "out"
        main(["run", idle_cfg, "-o", str(out), "--vtk-every", "50"])
        files = sorted(out.glob("fields_*.vtk"))
        assert len(files) >= 2 and files[0].name == "fields_000000.vtk"
        text = files[-1].read_text()
        assert text.startswith("# vtk DataFile Version 2.0\n")
        for token in ("DATASET UNSTRUCTURED_GRID", "SCALARS phi", "SCALARS c_II", "SCALARS c_III",
                      "SCALARS theta_o", "SCALARS theta_h", "VECTORS displacement", "CELL_DATA"):
            assert token in text
        head = text.splitlines()
        n = int(head[4].split()[1])
        assert f"POINT_DATA {n}" in text

    def test_force_rerun_identical(self, tmp_path):
        cfg = write(tmp_path, "c.ini", "i_a_uA_cm2 = 100\n" + COARSE + "t_cor_end = 1e-6\n")
        out = tmp_path / "out"
        assert main(["run", cfg, "-o", str(out)]) == 0
        first = {p.name: p.read_bytes() for p in out.iterdir()}
        assert main(["run", cfg, "-o", str(out)]) == 3
        assert main(["run", cfg, "-o", str(out), "--force"]) == 0
        assert {p.name: p.read_bytes() for p in out.iterdir()} == first

    def test_config_error_exit(self, tmp_path, capsys):
        cfg = write(tmp_path, "bad.ini", "i_a = 1.0\n[geometry]\ncover = -1\n")
        assert main(["run", cfg, "-o", str(tmp_path / "o")]) == 1
        assert "cover" in capsys.readouterr().err

    def test_output_is_file(self, tmp_path, idle_cfg):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["run", idle_cfg, "-o", str(blocker)]) == 3

    def test_run_rejects_campaign(self, tmp_path):
        cfg = write(tmp_path, "camp.ini", "[campaign]\ni_a_uA_cm2 = 1 10\n")
        assert main(["run", cfg, "-o", str(tmp_path / "o")]) == 1


class TestCampaign:
    def test_two_cases_trend(self, tmp_path):
        cfg = write(tmp_path, "c.ini", COARSE + "t_cor_end = 6e-6\n[campaign]\ni_a_uA_cm2 = 100 1\njobs = 1\n")
        out = tmp_path / "camp"
        assert main(["campaign", cfg, "-o", str(out)]) == 0
        with open(out / "campaign.csv") as f:
            rows = list(csv.DictReader(f))
        assert tuple(rows[0].keys()) == CAMPAIGN_COLUMNS
        assert [float(r["i_a"]) for r in rows] == [0.01, 1.0]
        assert float(rows[0]["beta"]) > float(rows[1]["beta"]) > 0.0
        assert float(rows[0]["k_beta"]) == 1.0 and float(rows[0]["gamma2"]) < 0.0
        assert "power law" in (out / "report.txt").read_text()
        series = [str(out / d / "series.csv") for d in ("case_1uA_cm2", "case_100uA_cm2")]
        assert main(["fit", *series]) == 0

    def test_single_case(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.ini", COARSE + "t_cor_end = 4e-6\n[campaign]\ni_a_uA_cm2 = 100\n")
        assert main(["campaign", cfg, "-o", str(tmp_path / "one")]) == 0
        report = capsys.readouterr().out
        assert "beta =" in report and "insufficient points" in report

    def test_failed_case_flagged(self, tmp_path):
        cfg = write(tmp_path, "c.ini", COARSE + "t_cor_end = 4e-6\nmax_steps = 3\n"
                    "[campaign]\ni_a_uA_cm2 = 1 100\njobs = 1\n")
        out = tmp_path / "fail"
        assert main(["campaign", cfg, "-o", str(out)]) == 2
        with open(out / "campaign.csv") as f:
            status = [r["status"] for r in csv.DictReader(f)]
        assert all(s.startswith("failed") for s in status)


class TestFitAndMesh:
    def test_fit_uncracked(self, tmp_path, idle_cfg, capsys):
        out = tmp_path / "o"
        main(["run", idle_cfg, "-o", str(out)])
        assert main(["fit", str(out / "series.csv")]) == 2
        assert "not cracked" in capsys.readouterr().out

    def test_fit_missing_file(self, tmp_path):
        assert main(["fit", str(tmp_path / "none.csv")]) == 1

    def test_mesh(self, tmp_path, idle_cfg):
        target = tmp_path / "mesh.txt"
        assert main(["mesh", idle_cfg, "-o", str(target)]) == 0
        mesh = load_mesh(target)
        mesh.validate()

    def test_console_script(self, tmp_path, idle_cfg):
        r = subprocess.run([sys.executable, "-m", "corrocrack.cli", "mesh", idle_cfg, "-o",
                            str(tmp_path / "m.txt")], capture_output=True, text=True)
        assert r.returncode == 0 and "nodes" in r.stdout
