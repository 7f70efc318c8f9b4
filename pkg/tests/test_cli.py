import json
import subprocess
import sys

import pytest

from condmix.cli import DEFAULTS, main, resolve_config
from condmix.errors import ConfigError

SMALL = {
    "lozi-cond-hist": {"n_steps": 300, "n_init": 50},
    "lozi-cond-mix": {"n_max": 3, "N": 200, "R": 2, "n_init": 50},
    "lozi-covering": {"n_max": 4, "M": 200, "N": 20_000, "n_init": 50},
    "baker-mix": {"n_max": 4, "M": 2000, "R": 3},
    "baker-fourier": {"j_max": 16, "M": 20_000},
    "bayes-forecast": {"n_max": 5, "count": 5000, "K": 3, "sigmas": [0.5, 0.0], "tol": 0.01},
}
CSVS = {
    "lozi-cond-hist": ["histogram.csv", "summary.csv"],
    "lozi-cond-mix": ["correlation.csv"],
    "lozi-covering": ["covering.csv"],
    "baker-mix": ["correlation.csv"],
    "baker-fourier": ["fourier.csv", "fit.csv"],
    "bayes-forecast": ["forecast.csv", "posterior.csv"],
}
HEADERS = {
    ("lozi-cond-mix", "correlation.csv"): "n,estimate_mid,det_err,stat_err,replicas,samples",
    ("lozi-covering", "covering.csv"): "n,d_n,h,occupied_a,occupied_b",
    ("baker-mix", "correlation.csv"): "n,estimate,ci_halfwidth",
    ("bayes-forecast", "forecast.csv"): "sigma,n,abs_error,stat_err",
}


def run(tmp_path, command, cfg, *extra, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    out = tmp_path / "runs"
    return main([command, "--config", str(path), "--out", str(out), *extra])


def test_every_subcommand_has_small_config():
    assert set(SMALL) | {"selftest"} == set(DEFAULTS)


@pytest.mark.parametrize("command", sorted(SMALL))
def test_subcommand_is_deterministic_across_threads(tmp_path, command):
    outputs = []
    for threads in (1, 2):
        d = tmp_path / f"t{threads}"
        d.mkdir()
        assert run(d, command, SMALL[command], "--threads", str(threads), "--overwrite",
                   "--seed", "3") == 0
        rd = d / "runs" / command
        outputs.append({f: (rd / f).read_bytes() for f in CSVS[command]})
        man = json.loads((rd / "manifest.json").read_text())
        assert man["seed"] == 3 and man["outputs"] == CSVS[command]
        assert set(man["versions"]) >= {"condmix", "numpy", "scipy", "gmpy2", "python"}
        assert man["config"]["experiment"] == command
        for (cmd, f), header in HEADERS.items():
            if cmd == command:
                assert (rd / f).read_text().splitlines()[0] == header
    assert outputs[0] == outputs[1]


def test_config_schema_and_errors():
    cfg = resolve_config("baker-mix", {"M": 10.0}, 5, None)
    assert cfg["M"] == 10 and cfg["seed"] == 5 and cfg["precision_bits"] == 196
    bad = [("baker-mix", {"bogus": 1}), ("baker-mix", {"M": "ten"}), ("baker-mix", {"M": 0}),
           ("baker-mix", {"mu": 1.5}), ("baker-mix", {"offsets": [0.0]}),
           ("lozi-cond-mix", {"a": 1.0, "b": 0.1}), ("lozi-cond-mix", {"R": 1}),
           ("lozi-cond-mix", {"observable": "x^3"}), ("baker-fourier", {"j_max": 4}),
           ("bayes-forecast", {"sigmas": [-1.0]}), ("nope", {})]
    for command, user in bad:
        with pytest.raises(ConfigError):
            resolve_config(command, user, None, None)
    with pytest.raises(ConfigError):
        resolve_config("baker-mix", {}, None, 20)


def test_config_error_exit_code(tmp_path, capsys):
    assert run(tmp_path, "baker-mix", {"bogus": 1}) == 2
    assert "bogus" in capsys.readouterr().err
    (tmp_path / "broken.json").write_text("{")
    assert main(["baker-mix", "--config", str(tmp_path / "broken.json")]) == 2


def test_timestamped_run_dirs_do_not_collide(tmp_path):
    cfg = SMALL["baker-fourier"]
    assert run(tmp_path, "baker-fourier", cfg) == 0
    assert run(tmp_path, "baker-fourier", cfg) == 0
    assert len(list((tmp_path / "runs").iterdir())) == 2


def test_selftest_exit_code():
    res = subprocess.run([sys.executable, "-m", "condmix", "selftest"], capture_output=True,
                         text=True, timeout=300)
    assert res.returncode == 0, res.stdout + res.stderr
    assert "FAIL" not in res.stdout
