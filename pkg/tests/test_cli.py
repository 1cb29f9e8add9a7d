import filecmp

import pytest

from lossychain import cli, montecarlo


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_fixture(tmp_path, capsys):
    assert run("fixture", "--out", tmp_path) == 0
    out = capsys.readouterr().out
    for line in ("FS(j,j+5) = 3", "FS(j,j+6) = 4", "BS(j,j-5) = 4", "BS(j,j-6) = 5", "FU(j,j+4) = 1", "BU(j,j-3) = 2"):
        assert line in out
    assert (tmp_path / "fixture-0.csv").exists() and (tmp_path / "fixture-0.manifest").exists()


def test_simulate_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("simulate", "--seed", 7, "--horizon", 200, "--out", a) == 0
    assert run("simulate", "--seed", 7, "--horizon", 200, "--out", b) == 0
    cmp = filecmp.dircmp(a, b)
    assert sorted(cmp.same_files) == sorted(p.name for p in a.iterdir())
    for suffix in (".csv", "-blocks.csv", "-edges.csv"):
        assert filecmp.cmp(a / f"simulate-7{suffix}", b / f"simulate-7{suffix}", shallow=False)


@pytest.mark.parametrize(
    "argv",
    [
        ("simulate", "--seed", 3, "--horizon", 150, "--beta", 0.3),
        ("estimate", "--seed", 3, "--horizon", 150, "--trials", 30, "--tau", "5,10"),
        ("estimate", "--experiment", "nakamoto", "--horizon", 300, "--window", 50, "--trials", 2),
        ("sweep", "--grid-size", 3, "--trials", 30, "--horizon", 100, "--tau", 8),
    ],
)
def test_manifest_replay_byte_identical(tmp_path, argv):
    first, second, third = tmp_path / "1", tmp_path / "2", tmp_path / "3"
    assert run(*argv, "--out", first) == 0
    cmd = argv[0]
    manifest = next(first.glob(f"{cmd}-*.manifest"))
    assert run("replay", manifest, "--out", second) == 0
    assert run(cmd, "--config", manifest, "--out", third) == 0
    for p in first.iterdir():
        assert filecmp.cmp(p, second / p.name, shallow=False), p.name
        assert filecmp.cmp(p, third / p.name, shallow=False), p.name


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# comment\nbeta=0.4\nhorizon=100\nseed=5\n")
    assert run("simulate", "--config", cfg, "--horizon", 80, "--out", tmp_path) == 0
    text = (tmp_path / "simulate-5.manifest").read_text()
    assert "beta=0.4\n" in text and "horizon=80\n" in text


@pytest.mark.parametrize(
    "argv",
    [
        ("simulate", "--beta", 1.5),
        ("simulate", "--d", -0.1),
        ("estimate", "--trials", 5, "--horizon", 100),
        ("estimate", "--tau", "1,x"),
        ("simulate", "--adversary", "bribe"),
        ("simulate", "--no-such-flag"),
        ("simulate", "--config", "/nonexistent/file"),
    ],
)
def test_config_errors_exit_2(tmp_path, argv):
    assert run(*argv, "--out", tmp_path) == 2


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("colour=blue\n")
    assert run("simulate", "--config", cfg, "--out", tmp_path) == 2
    cfg.write_text("command=sweep\n")
    assert run("simulate", "--config", cfg, "--out", tmp_path) == 2
    cfg.write_text("beta\n")
    assert run("simulate", "--config", cfg, "--out", tmp_path) == 2


def test_verify_exit_codes(tmp_path, monkeypatch):
    argv = ("verify", "--seeds", 2, "--horizon", 300, "--window", 50, "--out", tmp_path)
    assert run(*argv) == 0
    header = (tmp_path / "verify-0.csv").read_text().splitlines()[0]
    assert header == ",".join(montecarlo.VERDICT_COLUMNS)

    def failing(*a, **k):
        rep = montecarlo.VerifyReport(seeds=1, thm2_checked=1, thm2_failed=1)
        rep.failures.append((0, "theorem2", (5, "ii", 9)))
        return rep

    monkeypatch.setattr(montecarlo, "verify_seeds", failing)
    assert run(*argv) == 1


def test_dists(tmp_path):
    assert run("dists", "--d", 0.3, "--beta", 0.2, "--out", tmp_path) == 0
    rows = (tmp_path / "dists-0.csv").read_text().splitlines()
    assert rows[0].startswith("law,statistic,pvalue")
    assert len(rows) == 9


def test_estimate_columns(tmp_path):
    assert run("estimate", "--horizon", 150, "--trials", 30, "--tau", "5", "--out", tmp_path) == 0
    rows = (tmp_path / "estimate-0.csv").read_text().splitlines()
    assert rows[0] == ",".join(cli.ESTIMATE_COLUMNS)
    assert rows[1].startswith("violation,")


def test_help(capsys):
    assert run("--help") == 0
    assert "simulate" in capsys.readouterr().out
