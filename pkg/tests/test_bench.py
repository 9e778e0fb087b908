import csv
import json
import os

import numpy as np
import pytest

from nort.bench import (
    TRACE_HEADER,
    ExperimentConfig,
    choose_D,
    run_experiment,
    write_trace_csv,
)
from nort.errors import ConfigError
from nort.penalties import Penalty
from nort.solvers import Objective, SolverConfig, nort_solve
from nort.svd import SvdConfig
from nort.synth import SynthSpec, rmse, synth_generate
from nort.tensors import Shape3

SPEC = SynthSpec(Shape3((15, 12, 5)), rank=2, obs_count=300, seed=5)
FAST = SolverConfig(max_iters=20, svd_cfg=SvdConfig(tol=1e-8))


class TestChooseD:
    def test_auto_rule(self):
        assert choose_D(Shape3((100, 100, 5)), "auto") == 2
        assert choose_D(Shape3((100, 100, 10)), None) == 2
        assert choose_D(Shape3((60, 60, 60)), "auto") == 3

    def test_explicit(self):
        assert choose_D(Shape3((4, 4, 4)), 1) == 1
        assert choose_D(Shape3((4, 4, 4)), "3") == 3
        with pytest.raises(ConfigError):
            choose_D(Shape3((4, 4, 4)), 4)


class TestConfigValidation:
    def test_unknown_solver(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(solver="sgd", synth=SPEC)

    def test_empty_grid(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(lambda_grid=(), synth=SPEC)

    def test_needs_data(self):
        with pytest.raises(ConfigError):
            ExperimentConfig()


class TestRunExperiment:
    def test_single_cell_matches_direct_solve(self):
        cfg = ExperimentConfig(solver="nort", penalty="lsp", D=2,
                               lambda_grid=(0.5,), theta_grid=(1.0,),
                               solver_cfg=FAST, synth=SPEC)
        report = run_experiment(cfg)
        train, val, _, _ = synth_generate(SPEC)
        obj = Objective(train, (0.5, 0.5), Penalty("lsp", 1.0))
        res = nort_solve(obj, FAST, val=val)
        cell = report["grid"][0]
        assert report["best"] == {"lambda": 0.5, "theta": 1.0,
                                  "val_rmse": cell["val_rmse"]}
        assert cell["val_rmse"] == pytest.approx(rmse(res.point, val), abs=1e-12)
        assert cell["iterations"] == len(res.trace)
        assert "test_rmse" in report

    def test_best_cell_minimizes_val_rmse(self):
        cfg = ExperimentConfig(solver="nort", penalty="lsp", D=2,
                               lambda_grid=(0.05, 0.5), theta_grid=(0.5, 2.0),
                               solver_cfg=FAST, synth=SPEC)
        report = run_experiment(cfg)
        assert len(report["grid"]) == 4
        best = report["best"]["val_rmse"]
        assert best == min(r["val_rmse"] for r in report["grid"])

    def test_bad_cell_recorded_not_fatal(self):
        # tau below the floor fails only cells it applies to; here it kills
        # all cells, so there is no best, but the run still completes
        cfg = ExperimentConfig(solver="nort", penalty="lsp", D=2,
                               lambda_grid=(0.5,), theta_grid=(1.0,),
                               solver_cfg=SolverConfig(tau=0.5, max_iters=3),
                               synth=SPEC)
        report = run_experiment(cfg)
        assert "error" in report["grid"][0]
        assert "best" not in report

    def test_report_deterministic(self):
        cfg = ExperimentConfig(solver="snort", penalty="capped-l1", D=2,
                               lambda_grid=(0.5,), theta_grid=(1.0,),
                               solver_cfg=FAST, synth=SPEC)
        a = run_experiment(cfg)
        b = run_experiment(cfg)
        strip = lambda r: {k: [{kk: vv for kk, vv in c.items() if kk != "seconds"}
                               for c in v] if k == "grid" else v
                           for k, v in r.items()}
        assert strip(a) == strip(b)

    def test_threaded_matches_serial(self, monkeypatch):
        cfg = ExperimentConfig(solver="snort", penalty="lsp", D=2,
                               lambda_grid=(0.1, 0.5), theta_grid=(1.0,),
                               solver_cfg=FAST, synth=SPEC)
        serial = run_experiment(cfg)
        monkeypatch.setenv("NORT_THREADS", "2")
        threaded = run_experiment(cfg)
        for a, b in zip(serial["grid"], threaded["grid"]):
            assert a["val_rmse"] == b["val_rmse"]
            assert a["final_objective"] == b["final_objective"]

    def test_output_files(self, tmp_path):
        out = tmp_path / "run"
        cfg = ExperimentConfig(solver="nort", penalty="lsp", D=2,
                               lambda_grid=(0.5,), theta_grid=(1.0,),
                               solver_cfg=FAST, synth=SPEC,
                               output_dir=str(out))
        report = run_experiment(cfg)
        with open(out / "report.json") as fh:
            assert json.load(fh) == report
        files = os.listdir(out)
        assert "trace_lam0.5_theta1.csv" in files


class TestTraceCsv:
    def test_header_and_rows(self, tmp_path):
        train, val, _, _ = synth_generate(SPEC)
        res = nort_solve(Objective(train, (0.5, 0.5), Penalty("lsp", 1.0)),
                         FAST, val=val)
        p = tmp_path / "trace.csv"
        write_trace_csv(p, res.trace)
        with open(p) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == TRACE_HEADER
        assert len(rows) == len(res.trace) + 1
        first = rows[1]
        assert int(first[0]) == 1
        assert float(first[2]) == res.trace[0].objective
        assert float(first[3]) == pytest.approx(res.trace[0].val_rmse)
