import numpy as np
import pytest

from heterocyl.cli import main
from heterocyl.config import RunConfig, fmt, save_config
from heterocyl.storage import load_field, save_field


def solve_config(tmp_path, lam, **kw):
    cfg = RunConfig(
        nx=32,
        nz_per_unit=32,
        n_schedule=(4.0, 6.0),
        lambda_override=lam,
        eps_tail=1e-2,
        eps_H=1.0,  # the slice-Hamiltonian floor is O(h^2), large on this grid
        output_dir=str(tmp_path / "out"),
        **kw,
    )
    path = tmp_path / "run.cfg"
    save_config(cfg, path)
    return cfg, path


@pytest.fixture(scope="module")
def lam32(calib32):
    return calib32["params"].lam


@pytest.fixture(scope="module")
def solved(tmp_path_factory, lam32):
    tmp = tmp_path_factory.mktemp("solve")
    cfg, path = solve_config(tmp, lam32)
    code = main(["solve", "--config", str(path)])
    ckpt = tmp / "out" / "field.ckpt"
    return {"code": code, "cfg": cfg, "cfg_path": path, "ckpt": ckpt, "tmp": tmp}


class TestLambdaStar:
    def test_agreement_exit_zero(self, tmp_path):
        out = tmp_path / "out"
        code = main(
            ["lambda-star", "--nx", "64", "--output-dir", str(out)]
        )
        assert code == 0
        text = (out / "lambda_star.txt").read_text()
        assert "lambda_star" in text and "PASS" in text
        assert (out / "phi.csv").exists()

    def test_unreachable_tolerance_exit_two(self, tmp_path):
        code = main(
            [
                "lambda-star",
                "--nx",
                "32",
                "--lambda-tol",
                "1e-12",
                "--output-dir",
                str(tmp_path / "out"),
            ]
        )
        assert code == 2

    def test_missing_output_dir_exit_one(self):
        assert main(["lambda-star", "--nx", "32"]) == 1


class TestSolve:
    def test_exit_zero_and_checkpoint(self, solved):
        assert solved["code"] == 0
        assert solved["ckpt"].exists()
        field = load_field(solved["ckpt"])
        assert field.nx == 32
        assert (solved["tmp"] / "out" / "hamiltonian.csv").exists()
        report = (solved["tmp"] / "out" / "solve_report.txt").read_text()
        assert "met = True" in report

    def test_checkpoint_reload_bit_identical(self, solved, tmp_path):
        field = load_field(solved["ckpt"])
        other = tmp_path / "copy.ckpt"
        save_field(field, other)
        assert other.read_bytes() == solved["ckpt"].read_bytes()

    def test_short_schedule_strict_criteria_exit_three(self, tmp_path, lam32):
        cfg, path = solve_config(tmp_path, lam32)
        cfg = cfg.replace(n_schedule=(4.0,), eps_H=1e-9)
        save_config(cfg, path)
        assert main(["solve", "--config", str(path)]) == 3

    def test_determinism(self, tmp_path, lam32):
        outs = []
        for name in ("a", "b"):
            sub = tmp_path / name
            sub.mkdir()
            cfg, path = solve_config(sub, lam32)
            assert main(["solve", "--config", str(path)]) == 0
            outs.append(sub / "out")
        for fname in ("field.ckpt", "hamiltonian.csv", "solve_report.txt"):
            assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


class TestVerify:
    def test_converged_checkpoint_passes(self, solved, tmp_path):
        code = main(
            [
                "verify",
                str(solved["ckpt"]),
                "--config",
                str(solved["cfg_path"]),
                "--output-dir",
                str(tmp_path / "vout"),
            ]
        )
        assert code == 0
        text = (tmp_path / "vout" / "verification.txt").read_text()
        assert "FAIL" not in text

    def test_negated_node_fails(self, solved, tmp_path):
        field = load_field(solved["ckpt"])
        i, j = field.nx // 2, field.nz // 2
        field.values[i, j] = -field.values[i, j]
        bad = tmp_path / "bad.ckpt"
        save_field(field, bad)
        code = main(
            [
                "verify",
                str(bad),
                "--config",
                str(solved["cfg_path"]),
                "--output-dir",
                str(tmp_path / "vout"),
            ]
        )
        assert code == 4
        assert "FAIL" in (tmp_path / "vout" / "verification.txt").read_text()

    def test_zero_field_fails_limits(self, solved, tmp_path):
        field = load_field(solved["ckpt"])
        field.values[:] = 0.0
        zero = tmp_path / "zero.ckpt"
        save_field(field, zero)
        code = main(
            [
                "verify",
                str(zero),
                "--config",
                str(solved["cfg_path"]),
                "--output-dir",
                str(tmp_path / "vout"),
            ]
        )
        assert code == 4

    def test_corrupt_checkpoint(self, solved, tmp_path):
        bad = tmp_path / "garbage.ckpt"
        bad.write_text("nonsense\n")
        code = main(
            [
                "verify",
                str(bad),
                "--config",
                str(solved["cfg_path"]),
                "--output-dir",
                str(tmp_path / "vout"),
            ]
        )
        assert code == 1


class TestEulerExport:
    def _load(self, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        xs = np.unique(data[:, 0])
        zs = np.unique(data[:, 1])
        cols = {
            name: data[:, k].reshape(xs.size, zs.size)
            for k, name in ((2, "u1"), (3, "u2"), (4, "p"))
        }
        return xs, zs, cols

    def test_strip_export_divergence(self, solved, tmp_path):
        out = tmp_path / "eout"
        code = main(
            [
                "euler-export",
                str(solved["ckpt"]),
                "--kind",
                "strip",
                "--window",
                "0,1,-4,4",
                "--output-dir",
                str(out),
            ]
        )
        assert code == 0
        xs, zs, cols = self._load(out / "euler_flow.csv")
        hx, hz = xs[1] - xs[0], zs[1] - zs[0]
        u1, u2 = cols["u1"], cols["u2"]
        div = (u1[2:, 1:-1] - u1[:-2, 1:-1]) / (2 * hx) + (
            u2[1:-1, 2:] - u2[1:-1, :-2]
        ) / (2 * hz)
        assert np.max(np.abs(div)) <= 1e-12
        assert (out / "theta_field.csv").exists()

    def test_plane_export_odd(self, solved, tmp_path):
        out = tmp_path / "eout2"
        code = main(
            [
                "euler-export",
                str(solved["ckpt"]),
                "--kind",
                "plane",
                "--window=-2,2,-1,1",
                "--output-dir",
                str(out),
            ]
        )
        assert code == 0
        xs, zs, cols = self._load(out / "euler_flow.csv")
        mid = np.argmin(np.abs(xs))
        assert abs(xs[mid]) < 1e-12
        u1 = cols["u1"]
        k = min(mid, u1.shape[0] - 1 - mid)
        flipped = u1[mid - k : mid + k + 1][::-1]
        assert np.allclose(u1[mid - k : mid + k + 1], -flipped, atol=1e-12)

    def test_half_plane_zero_line(self, solved, tmp_path):
        out = tmp_path / "eout3"
        code = main(
            [
                "euler-export",
                str(solved["ckpt"]),
                "--kind",
                "half_plane",
                "--window=1.5,2.5,-1,1",
                "--output-dir",
                str(out),
            ]
        )
        assert code == 0
        xs, zs, cols = self._load(out / "euler_flow.csv")
        j2 = int(np.argmin(np.abs(xs - 2.0)))
        assert abs(xs[j2] - 2.0) < 1e-12
        assert np.max(np.abs(cols["u1"][j2, :])) == 0.0

    def test_bad_window_exit_one(self, solved, tmp_path):
        code = main(
            [
                "euler-export",
                str(solved["ckpt"]),
                "--kind",
                "strip",
                "--window=-1,2,-1,1",
                "--output-dir",
                str(tmp_path / "eout4"),
            ]
        )
        assert code == 1


class TestReport:
    def test_prints_saved_reports(self, solved, capsys):
        code = main(["report", "--output-dir", str(solved["tmp"] / "out")])
        assert code == 0
        assert "heteroclinic solve" in capsys.readouterr().out

    def test_empty_dir(self, tmp_path):
        assert main(["report", "--output-dir", str(tmp_path)]) == 1


class TestEnvOverride:
    def test_output_dir_env(self, tmp_path, monkeypatch, lam32):
        cfg, path = solve_config(tmp_path, lam32)
        env_out = tmp_path / "env_out"
        monkeypatch.setenv("HETEROCYL_OUTPUT_DIR", str(env_out))
        cfg2 = cfg.replace(output_dir=None, n_schedule=(4.0,), eps_H=10.0)
        save_config(cfg2, path)
        code = main(["solve", "--config", str(path)])
        assert code == 0
        assert (env_out / "field.ckpt").exists()
