"""Harness tests: config validation and parsing, CSV schema, end-to-end
determinism, aggregation consistency, bound checks, and the CLI surface."""

import math

import numpy as np
import pytest

from oevi import cli
from oevi.harness import (
    TRAJECTORY_HEADER,
    ConfigError,
    ExperimentConfig,
    PolicyRun,
    aggregate_rows,
    check_bounds,
    checkpoints,
    load_config,
    run_experiment,
    suite_glm,
    suite_traffic,
    write_aggregate_csv,
)
from oevi.problems import problem_to_json, traffic_generate


def tiny_problem(noise=0.0):
    return traffic_generate(10, 5, 0.5, seed=42)


def tiny_config(tmp_path, policies=None, **kw):
    defaults = dict(
        problem=tiny_problem(),
        policies=policies or [PolicyRun("OE-GSMVI")],
        k=10,
        seeds=(1,),
        output=tmp_path / "out",
    )
    defaults.update(kw)
    return ExperimentConfig(**defaults)


class TestConfigValidation:
    def test_duplicate_seeds_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            tiny_config(tmp_path, seeds=(1, 1))

    def test_empty_policies_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig(problem=tiny_problem(), policies=[], k=10, seeds=(1,))

    def test_bad_k_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            tiny_config(tmp_path, k=0)

    def test_cadence_default(self, tmp_path):
        assert tiny_config(tmp_path, k=500).resolved_cadence() == 1
        assert tiny_config(tmp_path, k=10_000).resolved_cadence() == 100

    def test_checkpoints_include_endpoints(self):
        assert checkpoints(10, 1) == list(range(11))
        assert checkpoints(10, 4) == [0, 4, 8, 10]


class TestRunExperiment:
    def test_row_count_and_header(self, tmp_path):
        cfg = tiny_config(tmp_path)
        run_experiment(cfg)
        csv = (tmp_path / "out" / "OE-GSMVI_s1.csv").read_text().splitlines()
        assert csv[0] == TRAJECTORY_HEADER
        assert len(csv) == 12  # header + t = 0..10

    def test_rerun_byte_identical(self, tmp_path):
        cfg1 = tiny_config(tmp_path, output=tmp_path / "a",
                           policies=[PolicyRun("OE-GSMVI"), PolicyRun("SOE-1")])
        cfg2 = tiny_config(tmp_path, output=tmp_path / "b",
                           policies=[PolicyRun("OE-GSMVI"), PolicyRun("SOE-1")])
        run_experiment(cfg1)
        run_experiment(cfg2)
        for name in ("OE-GSMVI_s1.csv", "SOE-1_s1.csv", "agg_OE-GSMVI.csv", "agg_SOE-1.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_aggregate_recomputable_from_trajectory_rows(self, tmp_path):
        cfg = tiny_config(tmp_path, seeds=(1, 2, 3), policies=[PolicyRun("SOE-1")])
        aggs = run_experiment(cfg)
        # parse the trajectory CSVs back and re-aggregate
        per_seed = []
        for seed in (1, 2, 3):
            lines = (tmp_path / "out" / f"SOE-1_s{seed}.csv").read_text().splitlines()
            header = lines[0].split(",")
            rows = []
            for line in lines[1:]:
                vals = dict(zip(header, line.split(",")))
                rows.append(
                    {
                        "t": int(vals["t"]),
                        "V_to_solution": float(vals["V_to_solution"]) if vals["V_to_solution"] else None,
                        "residual_exact": None,
                        "residual_certificate": float(vals["residual_certificate"]) if vals["residual_certificate"] else None,
                        "gap_surrogate": float(vals["gap_surrogate"]) if vals["gap_surrogate"] else None,
                        "weak_gap_exact": None,
                        "movement_sq": float(vals["movement_sq"]) if vals["movement_sq"] else None,
                        "oracle_calls": int(vals["oracle_calls"]),
                    }
                )
            per_seed.append(rows)
        redone = aggregate_rows("SOE-1", per_seed)
        path = tmp_path / "redone.csv"
        write_aggregate_csv(path, redone)
        original = (tmp_path / "out" / "agg_SOE-1.csv").read_bytes()
        # timing column is empty in both (timing disabled)
        assert path.read_bytes() == original

    def test_timing_column_empty_by_default(self, tmp_path):
        cfg = tiny_config(tmp_path)
        run_experiment(cfg)
        lines = (tmp_path / "out" / "OE-GSMVI_s1.csv").read_text().splitlines()
        assert all(line.endswith(",") for line in lines[1:])

    def test_timing_column_filled_when_enabled(self, tmp_path):
        cfg = tiny_config(tmp_path, timing=True)
        run_experiment(cfg)
        lines = (tmp_path / "out" / "OE-GSMVI_s1.csv").read_text().splitlines()
        assert not lines[-1].endswith(",")

    def test_deterministic_policy_identical_across_seeds(self, tmp_path):
        cfg = tiny_config(tmp_path, seeds=(1, 2))
        aggs = run_experiment(cfg)
        agg = aggs["OE-GSMVI"]
        assert agg.n_seeds == 2
        assert all(se == 0.0 for se in agg.se["V_to_solution"])

    def test_workers_parallel_same_results(self, tmp_path):
        cfg1 = tiny_config(tmp_path, output=tmp_path / "w1", seeds=(1, 2, 3, 4))
        cfg2 = tiny_config(tmp_path, output=tmp_path / "w4", seeds=(1, 2, 3, 4), workers=4)
        run_experiment(cfg1)
        run_experiment(cfg2)
        for seed in (1, 2, 3, 4):
            a = (tmp_path / "w1" / f"OE-GSMVI_s{seed}.csv").read_bytes()
            b = (tmp_path / "w4" / f"OE-GSMVI_s{seed}.csv").read_bytes()
            assert a == b


CONFIG_TEXT = """
[problem]
kind = traffic
n = 10
blocks = 5
d_minus = 0.5
seed = 42

[run]
k = 10
seeds = 1, 2
cadence = 1

[policy:OE-GSMVI]

[policy:SOE-1]
m = 2
"""


class TestConfigFile:
    def test_load_and_run(self, tmp_path):
        path = tmp_path / "exp.ini"
        path.write_text(CONFIG_TEXT)
        cfg = load_config(path)
        assert cfg.k == 10
        assert cfg.seeds == (1, 2)
        assert [p.name for p in cfg.policies] == ["OE-GSMVI", "SOE-1"]
        assert cfg.policies[1].batch == 2
        cfg.output = tmp_path / "out"
        aggs = run_experiment(cfg)
        assert set(aggs) == {"OE-GSMVI", "SOE-1"}

    def test_json_problem_reference(self, tmp_path):
        p = tiny_problem()
        (tmp_path / "prob.json").write_text(problem_to_json(p))
        path = tmp_path / "exp.ini"
        path.write_text(
            "[problem]\nkind = json\npath = %s\n\n[run]\nk = 5\nseeds = 1\n\n[policy:OE-GSMVI]\n"
            % (tmp_path / "prob.json")
        )
        cfg = load_config(path)
        np.testing.assert_array_equal(cfg.problem.affine.G, p.affine.G)

    def test_missing_sections_rejected(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[run]\nk = 5\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.ini")


class TestCheckBounds:
    def test_linear_rate_and_movement_pass(self, tmp_path):
        cfg = tiny_config(
            tmp_path,
            policies=[PolicyRun("OE-GSMVI"), PolicyRun("OE-GMVI")],
            k=100,
        )
        checks = check_bounds(cfg)
        assert all(c.passed for c in checks), [c for c in checks if not c.passed]

    def test_corrupted_schedule_fails_validation(self, tmp_path):
        # L far below the true Lipschitz constant: gamma is too large for the
        # theorem conditions at the problem's actual constants
        cfg = tiny_config(
            tmp_path,
            policies=[PolicyRun("OE-GSMVI", L=0.6)],
            k=50,
        )
        checks = check_bounds(cfg)
        assert any(not c.passed and c.bound == "schedule validation" for c in checks)

    def test_gap_family_bounds(self):
        import dataclasses

        rng = np.random.default_rng(17)
        n = 8
        A = rng.normal(size=(n, n))
        G = A - A.T  # skew: monotone with bounded set, exact gap available
        b = rng.uniform(0, 1, n)
        from oevi.geometry import SimplexProduct
        from oevi.problems import AffineSpec, affine_problem

        fs = SimplexProduct([4, 4], [1.0, 1.0])
        p = affine_problem(AffineSpec(G, b), fs, noise_sigma=0.3, block_partition=(4, 4))
        cfg = ExperimentConfig(
            problem=p,
            policies=[PolicyRun("SOE-MVI"), PolicyRun("SBOE-MVI"), PolicyRun("OE-MVI")],
            k=400,
            seeds=tuple(range(1, 13)),
            compute_reference=False,
        )
        checks = check_bounds(cfg)
        assert len(checks) == 3
        assert all(c.passed for c in checks), [c for c in checks if not c.passed]

    def test_stochastic_mean_bound(self, tmp_path):
        p = tiny_problem()
        import dataclasses

        noisy = dataclasses.replace(
            p,
            oracle=lambda x, rng, m=1: p.operator(x)
            + rng.standard_normal((m, p.dim)).mean(axis=0) * (0.5 / math.sqrt(p.dim)),
            constants=dataclasses.replace(p.constants, sigma=0.5),
        )
        cfg = ExperimentConfig(
            problem=noisy,
            policies=[PolicyRun("SOE-1")],
            k=300,
            seeds=tuple(range(1, 21)),
        )
        checks = check_bounds(cfg)
        assert all(c.passed for c in checks)


class TestSuites:
    def test_traffic_suite_tiny(self, tmp_path):
        report = suite_traffic(sizes=(20, 40), d_minus=0.5, seeds=(1, 2), k=60,
                               output=tmp_path / "traffic")
        # timing assertion skipped below the size threshold; structural files exist
        assert (tmp_path / "traffic" / "timing.csv").exists()
        assert (tmp_path / "traffic" / "n20" / "OE-GSMVI_s1.csv").exists()
        assert (tmp_path / "traffic" / "n40" / "agg_SBOE-GSMVI.csv").exists()
        for label, ok, detail in report.assertions:
            assert ok, (label, detail)

    def test_traffic_suite_deterministic(self, tmp_path):
        for d in ("r1", "r2"):
            suite_traffic(sizes=(20,), d_minus=0.5, seeds=(1,), k=30,
                          output=tmp_path / d)
        a = sorted((tmp_path / "r1").rglob("*.csv"))
        b = sorted((tmp_path / "r2").rglob("*.csv"))
        for fa, fb in zip(a, b):
            if fa.name == "timing.csv":
                continue
            assert fa.read_bytes() == fb.read_bytes(), fa.name

    def test_glm_suite_tiny(self, tmp_path):
        report = suite_glm(
            "ramp", seeds=(1,), n=10, k=40, output=tmp_path / "glm",
            radius_grid=(2.0, 4.0),
        )
        assert report.passed, report.summary()
        assert (tmp_path / "glm" / "ramp_R2" / "agg_SOE-1.csv").exists()


class TestCli:
    def test_validate_schedule_pass(self, capsys):
        rc = cli.main(["validate-schedule", "OE-GSMVI", "--L", "2.0", "--mu", "0.5",
                       "--k", "1000"])
        assert rc == 0
        assert "PASS" in capsys.readouterr().out

    def test_validate_schedule_block_policy(self, capsys):
        rc = cli.main(["validate-schedule", "SBOE-GSMVI", "--L", "2.0", "--mu", "0.5",
                       "--k", "1000", "--b", "5"])
        assert rc == 0

    def test_validate_schedule_failure_exit_code(self, capsys):
        # Lbar far below L: the final-step condition at the true L fails
        rc = cli.main(["validate-schedule", "SBOE-GSMVI", "--L", "50.0", "--mu", "0.5",
                       "--k", "100", "--b", "2", "--Lbar", "1.0"])
        assert rc == 2
        assert "FAIL" in capsys.readouterr().out

    def test_run_subcommand(self, tmp_path, capsys):
        path = tmp_path / "exp.ini"
        path.write_text(CONFIG_TEXT)
        rc = cli.main(["run", str(path), "--output", str(tmp_path / "out"), "--k", "5"])
        assert rc == 0
        assert (tmp_path / "out" / "OE-GSMVI_s1.csv").exists()

    def test_config_error_exit_code(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[problem]\nkind = nosuch\n\n[run]\nk = 5\n\n[policy:SA]\n")
        assert cli.main(["run", str(path)]) == 1

    def test_check_subcommand_pass(self, tmp_path, capsys):
        path = tmp_path / "exp.ini"
        path.write_text(CONFIG_TEXT.replace("[policy:SOE-1]\nm = 2\n", ""))
        rc = cli.main(["check", str(path), "--k", "60"])
        out = capsys.readouterr().out
        assert rc == 0, out
        assert "PASS" in out

    def test_check_subcommand_failure_exit_code(self, tmp_path, capsys):
        path = tmp_path / "exp.ini"
        path.write_text(
            CONFIG_TEXT.replace("[policy:OE-GSMVI]", "[policy:OE-GSMVI]\nL = 0.6")
            .replace("[policy:SOE-1]\nm = 2\n", "")
        )
        rc = cli.main(["check", str(path), "--k", "50"])
        assert rc == 2
