import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from pmhhdr.cli import main
from pmhhdr.config import ConfigError, load_config, parse_sections

ROOT = Path(__file__).resolve().parents[1]

SMALL = """
[system]
b_z = 1840
a_par = -11.3
a_perp = 20

[protocol]
tag = pm_hhdr
omega_prime = 104
t_f = 300

[sweep]
ranges = 1862:1882, 2070:2090
step = 0.5

[noise]
seed = 5
"""


def write(tmp_path, text, name="c.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_sweep_writes_outputs(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(cfg), "--out-dir", str(out), "--dump-program"]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["manifest.json", "program.txt", "report.json", "spectrum.csv"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 5 and "numpy" in manifest["versions"]
    assert manifest["config"]["protocol"]["omega_prime"] == 104.0
    report = json.loads((out / "report.json").read_text())
    assert report["pairs"][0]["a_par_khz"] == pytest.approx(-11.3, abs=0.5)
    assert "sideband pair" in capsys.readouterr().out


def test_manifest_reproduces(tmp_path):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "a"
    main(["sweep", "--config", str(cfg), "--out-dir", str(out)])
    first = (out / "spectrum.csv").read_text()
    manifest = json.loads((out / "manifest.json").read_text())
    lines = []
    for section, values in manifest["config"].items():
        lines.append(f"[{section}]")
        for k, v in values.items():
            if k == "ranges":
                v = ", ".join(f"{a!r}:{b!r}" for a, b in v)
            elif isinstance(v, list):
                v = ", ".join(map(str, v))
            lines.append(f"{k} = {v}")
    cfg2 = write(tmp_path, "\n".join(lines), "echo.cfg")
    main(["sweep", "--config", str(cfg2), "--out-dir", str(tmp_path / "b")])
    assert (tmp_path / "b" / "spectrum.csv").read_text() == first


def test_json_format(tmp_path):
    cfg = write(tmp_path, SMALL)
    assert main(["sweep", "--config", str(cfg), "--out-dir", str(tmp_path), "--format", "json"]) == 0
    doc = json.loads((tmp_path / "spectrum.json").read_text())
    assert doc["protocol"] == "pm_hhdr" and len(doc["x"]) == len(doc["signal"])


@pytest.mark.parametrize("edit,key", [
    (("b_z = 1840", "b_z = -1840"), "system.b_z"),
    (("step = 0.5", "step = 0.5\nwidth = 3"), "sweep.width"),
    (("tag = pm_hhdr", "tag = cpmg"), "protocol.tag"),
    (("[noise]", "[extras]"), "extras"),
    (("a_perp = 20", "a_perp = 20, 3"), "system.a_perp"),
    (("t_f = 300", "t_f = abc"), "protocol.t_f"),
])
def test_config_errors_exit_1_without_files(tmp_path, capsys, edit, key):
    cfg = write(tmp_path, SMALL.replace(*edit))
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(cfg), "--out-dir", str(out)]) == 1
    assert key in capsys.readouterr().err
    assert not out.exists()


def test_missing_required_key():
    with pytest.raises(ConfigError) as info:
        parse_sections("[system]\nb_z = 1\n[protocol]\ntag = hhdr\n[sweep]\nstep = 1\n")
    assert info.value.key == "sweep.ranges"


def test_numerical_failure_exit_2(tmp_path, capsys):
    cfg = write(tmp_path, SMALL.replace("ranges = 1862:1882, 2070:2090", "ranges = 6000000:6000001"))
    assert main(["sweep", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 2
    assert "grid point 0" in capsys.readouterr().err


def test_fit_flat_csv(tmp_path, capsys):
    path = tmp_path / "flat.csv"
    rows = "\n".join(f"{x},1.0" for x in np.arange(1850, 1900, 1.0))
    path.write_text("# protocol=pm_hhdr swept=nu shots=1 seed=0\n"
                    "# larmor_khz=1970.3456 fixed.omega_prime=104 fixed.t_f=300\nx,signal\n" + rows + "\n")
    assert main(["fit", str(path)]) == 0
    assert json.loads(capsys.readouterr().out)["dips"] == []


def test_fit_missing_file(tmp_path):
    assert main(["fit", str(tmp_path / "nope.csv")]) == 1


def test_predict(capsys):
    assert main(["predict", "--bz", "1840", "--apar", "-11.3", "--omega", "104"]) == 0
    out = capsys.readouterr().out
    assert "1871.996" in out and "2079.996" in out
    assert main(["predict", "--bz", "1840"]) == 1


def test_power_ratio(capsys):
    assert main(["power", "--scheme", "pm", "--omega-prime", "104", "--scheme", "hhdr", "--omega", "1970"]) == 0
    out = capsys.readouterr().out
    assert "peak power 89.70" in out
    assert main(["power", "--scheme", "xy", "--omega-pulse", "26000"]) == 1


def test_power_table_from_config(tmp_path):
    cfg = write(tmp_path, SMALL + "\n[power]\nefficiency = 50\nb_min = 500\nb_max = 1500\nb_step = 500\n"
                "[output]\npower_table = power_vs_field.csv\n")
    assert main(["power", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 0
    assert len((tmp_path / "power_vs_field.csv").read_text().splitlines()) == 1 + 9


def test_oracle_check(capsys):
    assert main(["oracle-check", "--points", "20"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_bundled_configs_load():
    for name in ("fig3_pm.cfg", "fig4_3015G.cfg"):
        cfg = load_config(ROOT / "configs" / name)
        assert cfg.plan.protocol_tag == "pm_hhdr"
    assert load_config(ROOT / "configs" / "fig4_3015G.cfg").plan.emulate_resolution


def test_console_script_installed():
    assert shutil.which("pmhhdr") is not None
