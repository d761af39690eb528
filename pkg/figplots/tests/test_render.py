"""figplots consumes the solver only through its CSV/manifest interface, so
the fixtures generate real sweep output via the `hflow` command line."""

import hashlib
import json
import os
import shutil
import subprocess
import sys

import numpy as np
import pytest

from figplots import EmptyInput, PlotSpec, SchemaMismatch, render
from figplots.cli import main as cli_main


def _run_hflow(*args):
    res = subprocess.run(["hflow", *args], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    return res


@pytest.fixture(scope="session")
def three_dir(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("sweep3"))
    _run_hflow("sweep", "--ansatz", "three", "--resolution", "5",
               "--t0=-0.4", "--t1", "0", "--sample-every", "20",
               "--workers", "2", "--out", out)
    return out


@pytest.fixture(scope="session")
def two_dir(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("sweep2"))
    _run_hflow("sweep", "--ansatz", "two", "--resolution", "6",
               "--t0=-1.5", "--t1", "1.5", "--sample-every", "40",
               "--x-min=-1.5", "--x-max=-0.2", "--workers", "1", "--out", out)
    return out


def _checksums(path):
    out = {}
    for name in sorted(os.listdir(path)):
        with open(os.path.join(path, name), "rb") as fh:
            out[name] = hashlib.sha256(fh.read()).hexdigest()
    return out


PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


class TestRenderKinds:
    def test_curves2d_from_planar_sweep(self, two_dir, tmp_path):
        out = str(tmp_path / "curves2d.png")
        render(PlotSpec(two_dir, "curves2d", out))
        assert open(out, "rb").read(8) == PNG_MAGIC

    def test_volume(self, three_dir, tmp_path):
        out = str(tmp_path / "volume.png")
        render(PlotSpec(three_dir, "volume", out, stride=2))
        assert open(out, "rb").read(8) == PNG_MAGIC

    def test_curves3d(self, three_dir, tmp_path):
        out = str(tmp_path / "curves3d.png")
        render(PlotSpec(three_dir, "curves3d", out))
        assert open(out, "rb").read(8) == PNG_MAGIC

    def test_down_axis(self, three_dir, tmp_path):
        out = str(tmp_path / "down.png")
        render(PlotSpec(three_dir, "down-axis", out))
        assert open(out, "rb").read(8) == PNG_MAGIC

    def test_planar_abc(self, two_dir, tmp_path):
        out = str(tmp_path / "abc.png")
        render(PlotSpec(two_dir, "planar-abc", out))
        assert open(out, "rb").read(8) == PNG_MAGIC

    def test_svg_output(self, three_dir, tmp_path):
        out = str(tmp_path / "volume.svg")
        render(PlotSpec(three_dir, "volume", out))
        head = open(out, "rb").read(200)
        assert b"<svg" in head or b"<?xml" in head

    def test_rendering_is_read_only(self, three_dir, tmp_path):
        before = _checksums(three_dir)
        for kind in ("curves2d", "volume", "curves3d", "down-axis"):
            render(PlotSpec(three_dir, kind, str(tmp_path / f"{kind}.png")))
        assert _checksums(three_dir) == before


class TestErrors:
    def test_empty_input(self, tmp_path):
        with pytest.raises(EmptyInput):
            render(PlotSpec(str(tmp_path), "volume", str(tmp_path / "x.png")))

    def test_schema_mismatch(self, three_dir, tmp_path):
        broken = tmp_path / "broken"
        shutil.copytree(three_dir, broken)
        manifest = json.load(open(broken / "manifest.json"))
        name = manifest["trajectories"][0]["csv"]
        # keep only the time column
        import csv as csvmod
        rows = list(csvmod.reader(open(broken / name, newline="")))
        with open(broken / name, "w", newline="") as fh:
            w = csvmod.writer(fh)
            for r in rows:
                w.writerow(r[:1])
        with pytest.raises(SchemaMismatch):
            render(PlotSpec(str(broken), "curves3d", str(tmp_path / "y.png")))

    def test_unknown_kind(self, three_dir, tmp_path):
        with pytest.raises(ValueError):
            render(PlotSpec(three_dir, "nope", str(tmp_path / "z.png")))


class TestCli:
    def test_cli_renders(self, three_dir, tmp_path):
        out = str(tmp_path / "cli.png")
        assert cli_main(["--kind", "down-axis", "--in", three_dir,
                         "--out", out]) == 0
        assert os.path.exists(out)

    def test_cli_error_exit(self, tmp_path):
        assert cli_main(["--kind", "volume", "--in", str(tmp_path),
                         "--out", str(tmp_path / "x.png")]) == 2

    def test_installed_entry_points(self, three_dir, tmp_path):
        for exe in ("hflow-plot", "plot"):
            res = subprocess.run([exe, "--kind", "volume", "--in", three_dir,
                                  "--out", str(tmp_path / f"{exe}.png")],
                                 capture_output=True, text=True)
            assert res.returncode == 0, res.stderr


class TestDownAxisSymmetry:
    def test_threefold_symmetry_under_column_permutation(self, three_dir,
                                                         tmp_path):
        from PIL import Image
        from scipy import ndimage

        permuted = tmp_path / "permuted"
        shutil.copytree(three_dir, permuted)
        manifest = json.load(open(permuted / "manifest.json"))
        import csv as csvmod
        for rec in manifest["trajectories"]:
            path = permuted / rec["csv"]
            rows = list(csvmod.reader(open(path, newline="")))
            header = rows[0]
            iu, iv, iw = header.index("U"), header.index("V"), header.index("W")
            ju, jv, jw = header.index("pU"), header.index("pV"), header.index("pW")
            for r in rows[1:]:
                r[iu], r[iv], r[iw] = r[iv], r[iw], r[iu]
                r[ju], r[jv], r[jw] = r[jv], r[jw], r[ju]
            with open(path, "w", newline="") as fh:
                csvmod.writer(fh).writerows(rows)
            x, y, z = rec["velocity"]
            rec["velocity"] = [y, z, x]
        json.dump(manifest, open(permuted / "manifest.json", "w"))

        out_a = str(tmp_path / "orig.png")
        out_b = str(tmp_path / "perm.png")
        render(PlotSpec(three_dir, "down-axis", out_a))
        render(PlotSpec(str(permuted), "down-axis", out_b))
        im_a = np.asarray(Image.open(out_a).convert("L"), dtype=float) / 255.0
        im_b = np.asarray(Image.open(out_b).convert("L"), dtype=float) / 255.0
        assert im_a.shape == im_b.shape
        best = 1.0
        for angle in (120.0, -120.0):
            rot = ndimage.rotate(im_a, angle, reshape=False, order=1, cval=1.0)
            mism = np.mean(np.abs(rot - im_b) > 0.25)
            best = min(best, mism)
        # identical up to rotation, modulo antialiasing along the strokes
        assert best < 0.02, f"mismatched pixel fraction {best:.4f}"
        # negative control: without rotating, the images genuinely differ
        assert np.mean(np.abs(im_a - im_b) > 0.25) > best
