import json

import numpy as np
import pytest

from satolab import __version__
from satolab.cli import main

STABLE = """
[spec]
marginal = "Stable"
alpha = 1.0
H = 1.0

[g]
family = "iterated_log"
n = 1
alpha = 1.0
eps = 0.0

[run]
N = {N}
paths = 20
seed = 7

[output]
directory = "{out}"
name = "exp"
"""


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def report(path):
    return json.loads(open(path).read())


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr().out.strip()
    return code, out


class TestSimulate:
    def test_minimal_stable(self, tmp_path, capsys):
        cfg = write(tmp_path, STABLE.format(N=6, out=tmp_path / "o"))
        code, path = run(["simulate", cfg], capsys)
        assert code == 0
        doc = report(path)
        assert doc["toolkit"] == {"name": "satolab", "version": __version__}
        assert doc["result"]["predicted"]["C"] == "inf"  # eps = 0
        assert doc["config"]["run"]["N"] == 6
        q = np.loadtxt(tmp_path / "o" / "exp_quantiles.txt")
        assert q.shape == (3, 7)

    def test_byte_identical_rerun(self, tmp_path, capsys):
        cfg = write(tmp_path, STABLE.format(N=5, out=tmp_path / "o"))
        _, p1 = run(["simulate", cfg], capsys)
        first = open(p1, "rb").read()
        _, p2 = run(["simulate", cfg, "--threads", "3"], capsys)
        assert open(p2, "rb").read() == first

    def test_rerun_embedded_config(self, tmp_path, capsys):
        cfg = write(tmp_path, STABLE.format(N=5, out=tmp_path / "o"))
        _, p1 = run(["simulate", cfg], capsys)
        code, p2 = run(["simulate", p1, "--out", str(tmp_path / "again")], capsys)
        assert code == 0
        a, b = report(p1), report(p2)
        a["config"]["output"].pop("directory")
        b["config"]["output"].pop("directory")
        assert a["config"] == b["config"]
        for doc in (a, b):
            doc["result"].pop("files")
        assert a["result"] == b["result"]

    def test_seed_override(self, tmp_path, capsys):
        cfg = write(tmp_path, STABLE.format(N=4, out=tmp_path / "o"))
        _, p1 = run(["simulate", cfg], capsys)
        r1 = report(p1)["result"]["quantiles"]
        _, p2 = run(["simulate", cfg, "--seed", "8", "--paths", "30"], capsys)
        doc = report(p2)
        assert doc["config"]["run"]["seed"] == 8 and doc["config"]["run"]["paths"] == 30
        assert doc["result"]["quantiles"] != r1

    def test_write_paths_binary(self, tmp_path, capsys):
        text = STABLE.format(N=3, out=tmp_path / "o").replace('name = "exp"', 'name = "exp"\nwrite_paths = true\nformats = ["text", "binary"]')
        code, _ = run(["simulate", write(tmp_path, text)], capsys)
        assert code == 0
        for f in ("exp_paths.txt", "exp_paths.bin", "exp_quantiles.bin"):
            assert (tmp_path / "o" / f).exists()

    def test_negative_N(self, tmp_path, capsys):
        assert main(["simulate", write(tmp_path, STABLE.format(N=-1, out=tmp_path))]) == 1

    def test_unknown_key(self, tmp_path, capsys):
        text = STABLE.format(N=3, out=tmp_path).replace("seed = 7", "seed = 7\nbogus = 1")
        assert main(["simulate", write(tmp_path, text)]) == 1

    def test_unknown_section(self, tmp_path):
        text = STABLE.format(N=3, out=tmp_path) + "\n[extra]\nx = 1\n"
        assert main(["simulate", write(tmp_path, text)]) == 1

    def test_missing_file(self, tmp_path):
        assert main(["simulate", str(tmp_path / "none.toml")]) == 3

    def test_bad_threads(self, tmp_path):
        assert main(["simulate", write(tmp_path, STABLE.format(N=3, out=tmp_path)), "--threads", "0"]) == 1

    def test_bad_arguments(self):
        assert main(["simulate"]) == 1


class TestClassify:
    def test_power_law_OR(self, tmp_path, capsys):
        cfg = write(tmp_path, f"""
[classify]
class = "OR"
[tail]
family = "power_log"
params = {{c = 1.0, p = 1.5, q = 0.0}}
[output]
directory = "{tmp_path}"
""")
        code, path = run(["classify", cfg], capsys)
        assert code == 0 and report(path)["result"]["verdict"] == "InClass"

    def test_lognormal_tail_not_OR(self, tmp_path, capsys):
        cfg = write(tmp_path, f"""
[classify]
class = "OR"
[tail]
family = "stretched"
params = {{c = 1.0, a = 0.5, q = 1.0}}
[output]
directory = "{tmp_path}"
""")
        code, path = run(["classify", cfg], capsys)
        assert code == 0 and report(path)["result"]["verdict"] == "NotInClass"

    def test_constant_submultiplicative(self, tmp_path, capsys):
        cfg = write(tmp_path, f"""
[classify]
class = "submult"
budget = 5000
[h]
family = "constant"
value = 1.0
[output]
directory = "{tmp_path}"
""")
        code, path = run(["classify", cfg], capsys)
        res = report(path)["result"]
        assert code == 0 and res["verdict"] == "Yes" and res["c"] == pytest.approx(1.0)

    def test_bad_class(self, tmp_path):
        cfg = write(tmp_path, f'[classify]\nclass = "XX"\n[output]\ndirectory = "{tmp_path}"\n')
        assert main(["classify", cfg]) == 1

    def test_seed_not_allowed(self, tmp_path):
        cfg = write(tmp_path, f'[classify]\nclass = "submult"\n[output]\ndirectory = "{tmp_path}"\n')
        assert main(["classify", cfg, "--seed", "1"]) == 1


class TestConstruct:
    def test_g_from_exponential_tail(self, tmp_path, capsys):
        cfg = write(tmp_path, f"""
[construct]
mode = "g-from-tail"
[tail]
family = "log_weibull"
params = {{c = 1.0, alpha = 1.0, beta = 0.0}}
r_max = 1e3
[output]
directory = "{tmp_path}"
""")
        code, path = run(["construct", cfg], capsys)
        res = report(path)["result"]
        assert code == 0 and res["status"] == "Constructed"
        assert res["report"]["divergence_proxy"] and res["report"]["convergence_proxy"]
        assert np.loadtxt(tmp_path / "construct_table.txt").shape[1] == 2

    def test_K_from_exp_sqrt(self, tmp_path, capsys):
        cfg = write(tmp_path, f"""
[construct]
mode = "K-from-g"
H = 0.25
[g]
family = "exp_power_inverse"
c = 1.0
a = 0.5
[output]
directory = "{tmp_path}"
""")
        code, path = run(["construct", cfg], capsys)
        res = report(path)["result"]
        assert code == 0 and res["status"] == "Constructed"

    def test_OR_tail_not_constructible(self, tmp_path, capsys):
        cfg = write(tmp_path, f"""
[construct]
mode = "g-from-tail"
[tail]
family = "power_log"
params = {{c = 1.0, p = 2.0, q = 0.0}}
[output]
directory = "{tmp_path}"
""")
        code, path = run(["construct", cfg], capsys)
        assert code == 2 and report(path)["result"]["status"] == "NotConstructible"
