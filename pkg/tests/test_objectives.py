import itertools
import math
import sys

import numpy as np
import pytest

from pgsrhb.fourier import Surrogate, all_points, eval_surrogate
from pgsrhb.objectives import (ExternalCommand, LogLinear2D, ObjectiveError,
                               SyntheticSparse, keyed_normal, known_support, make_objective,
                               parse_loss, random_sparse)
from pgsrhb.space import CategoricalCategory, NumericCategory, SearchSpace, decode_config


def basin_space():
    return SearchSpace((NumericCategory("lr", 3, 2, -6), NumericCategory("pen", 3, 2, -6)))


class TestSyntheticSparse:
    def test_noiseless_example(self):
        obj = SyntheticSparse(4, [((0, 1), 3.0)])
        assert obj((1, -1, 1, 1), 1) == -3.0

    def test_matches_surrogate(self, rng):
        obj = random_sparse(8, 6, 3, seed=2)
        g = Surrogate(tuple(obj.true_terms))
        for x in all_points(8)[::7]:
            assert obj(x, 5) == eval_surrogate(g, x)

    def test_deterministic_noise(self):
        obj = random_sparse(6, 3, 2, seed=0, noise=0.5)
        x = np.array([1, -1, 1, 1, -1, -1])
        assert obj(x, 3, 9) == obj(x, 3, 9)
        assert obj(x, 3, 9) != obj(x, 3, 10)

    def test_noise_law(self):
        sigma = 0.7
        obj = SyntheticSparse(5, [((0,), 1.0)], noise=sigma, seed=3)
        x = np.ones(5)
        for r in (1, 4, 16):
            v = np.var([obj(x, r, t) for t in range(1000)], ddof=1)
            assert 1 / 1.5 <= v / (sigma ** 2 / r) <= 1.5

    def test_keyed_normal_is_standard(self):
        z = np.array([keyed_normal([1, -1], 1.0, 0, t) for t in range(4000)])
        assert abs(z.mean()) < 0.06 and abs(z.std() - 1) < 0.05

    def test_errors(self):
        obj = SyntheticSparse(3, [((0,), 1.0)])
        with pytest.raises(ObjectiveError):
            obj((1, 1), 1)
        with pytest.raises(ObjectiveError):
            obj((1, 1, 1), 0.5)
        with pytest.raises(ValueError):
            SyntheticSparse(3, [], noise=-1)

    def test_known_support(self):
        assert known_support(SyntheticSparse(3, [((0, 1), 1.0), ((2,), -1.0)])) == [(0, 1), (2,)]
        assert known_support(SyntheticSparse(3, [])) == []
        with pytest.raises(TypeError):
            known_support(LogLinear2D(basin_space(), "lr", "pen"))

    def test_generator(self):
        obj = random_sparse(20, 5, 2, seed=11)
        supports = known_support(obj)
        assert len(set(supports)) == 5 and all(1 <= len(S) <= 2 for S in supports)
        assert all(1 <= abs(c) <= 3 for _, c in obj.true_terms)

    def test_optimum(self):
        obj = SyntheticSparse(3, [((0, 1), -2.0), ((2,), 0.5)])
        assert obj.optimum == -2.5


class TestLogLinear2D:
    def test_basin_by_exhaustion(self):
        sp = basin_space()
        obj = LogLinear2D(sp, "lr", "pen")
        X = all_points(sp.total_bits)
        losses = np.array([obj(x, 1) for x in X])
        best = decode_config(sp, X[np.argmin(losses)])
        assert 1e-3 <= best["lr"] <= 1e-2 and 1e-5 <= best["pen"] <= 1e-4
        # the representable point nearest the centre is a global minimiser
        centre = min(range(len(X)), key=lambda k: (
            (math.log10(decode_config(sp, X[k])["lr"]) + 2.5) ** 2
            + (math.log10(decode_config(sp, X[k])["pen"]) + 4.5) ** 2))
        assert losses[centre] <= losses.min()

    def test_value(self):
        obj = LogLinear2D(basin_space(), "lr", "pen")
        assert obj.value(10 ** -2.5, 10 ** -4.5) == pytest.approx(0.5)

    def test_needs_numeric(self):
        sp = SearchSpace((NumericCategory("lr", 1, 1, -3), CategoricalCategory("o", (1, 2))))
        with pytest.raises(ValueError):
            LogLinear2D(sp, "lr", "o")


class TestParseLoss:
    @pytest.mark.parametrize("text,expected", [
        ("loss 0.25\n", 0.25), ("epoch 3\nval loss: 1e-3\n\n", 1e-3), ("-2\n", -2.0),
        ("x\n 3.5E+2 \n", 350.0), (".5", 0.5)])
    def test_valid(self, text, expected):
        assert parse_loss(text) == expected

    @pytest.mark.parametrize("text", ["", "\n\n", "loss nan", "done", "1.2.3", "inf"])
    def test_invalid(self, text):
        with pytest.raises(ObjectiveError):
            parse_loss(text)


SCRIPT = """
import os, sys
args = dict(a.split("=", 1) for a in sys.argv[1:])
if args.get("fail") == "yes":
    sys.exit(4)
print("training...")
print("final", float(args["lr"]) * 1000 + float(args["resource"]) + int(os.environ["PGSRHB_TRIAL_SEED"]))
"""


class TestExternalCommand:
    def command(self, tmp_path):
        script = tmp_path / "train.py"
        script.write_text(SCRIPT)
        return [sys.executable, str(script)]

    def test_round_trip(self, tmp_path):
        sp = SearchSpace((NumericCategory("lr", 3, 1, -6),))
        obj = ExternalCommand(sp, self.command(tmp_path))
        x = np.array([-1, 1, 1, -1])  # 5e-4
        assert obj.arguments(x, 3.0)[-2:] == ["lr=0.0005", "resource=3.0"]
        assert obj(x, 3, trial_seed=7) == pytest.approx(0.5 + 3 + 7)

    def test_failure(self, tmp_path):
        sp = SearchSpace((NumericCategory("lr", 3, 1, -6),
                          CategoricalCategory("fail", ("no", "yes"))))
        obj = ExternalCommand(sp, self.command(tmp_path))
        with pytest.raises(ObjectiveError):
            obj(np.array([-1, 1, 1, -1, 1]), 1)

    def test_missing_binary(self):
        obj = ExternalCommand(SearchSpace(()), ["/nonexistent/trainer"])
        with pytest.raises(ObjectiveError):
            obj(np.empty(0, np.int8), 1)

    def test_timeout(self, tmp_path):
        script = tmp_path / "slow.py"
        script.write_text("import time; time.sleep(5)")
        obj = ExternalCommand(SearchSpace(()), [sys.executable, str(script)], timeout=0.2)
        with pytest.raises(ObjectiveError):
            obj(np.empty(0, np.int8), 1)


class TestMakeObjective:
    def test_kinds(self):
        sp = basin_space()
        assert make_objective({"kind": "loglinear-2d", "lr": "lr", "penalty": "pen"},
                              sp).kind == "loglinear-2d"
        obj = make_objective({"kind": "synthetic-sparse",
                              "terms": [{"indices": [0, 3], "coef": 2.0}]}, sp)
        assert known_support(obj) == [(0, 3)]
        gen = make_objective({"kind": "synthetic-sparse", "seed": 4,
                              "generate": {"n_terms": 3, "max_degree": 2}}, sp)
        assert len(gen.true_terms) == 3
        ext = make_objective({"kind": "external-command", "command": "echo 1"}, sp)
        assert ext.command == ["echo", "1"]

    def test_errors(self):
        sp = basin_space()
        with pytest.raises(ValueError):
            make_objective({"kind": "cnn"}, sp)
        with pytest.raises(ValueError):
            make_objective({"kind": "synthetic-sparse",
                            "terms": [{"indices": [99], "coef": 1.0}]}, sp)
