import json
import math

import numpy as np
import pytest

from slmc.experiments import (
    CSV_HEADER,
    PRESETS,
    ConfigError,
    ExperimentReport,
    emit_outputs,
    load_config,
    parse_config,
    preset,
    report_csv,
    run_experiment,
    serialize_config,
)
from slmc.metrics import abs_sum_gaussian_mean


class TestConfig:
    def test_gaussian_defaults(self):
        c = parse_config("experiment: gaussian\nrank: 5\n")
        assert (c.dim, c.steps, c.h, c.ensemble, c.thin) == (20, 20000, 0.01, 100, 100)
        assert c.sampler == "slmc" and c.schedule == {"kind": "identity"}
        assert c.n_blocks == 4 and c.base_step == pytest.approx(0.0025)

    def test_empty_document(self):
        assert parse_config("").experiment == "gaussian"

    def test_base_convention(self):
        c = parse_config("rank: 5\nstep_convention: base\n")
        assert c.base_step == 0.01

    def test_lmc_ignores_convention(self):
        assert parse_config("sampler: lmc\n").base_step == 0.01

    def test_float_strings(self):
        assert parse_config("h: 1e-3\n").h == 1e-3

    def test_rclmc_needs_rank_one(self):
        with pytest.raises(ConfigError, match="^rank: RCLMC"):
            parse_config("sampler: rclmc\nrank: 3\n")
        assert parse_config("sampler: rclmc\nrank: 1\n").rank == 1

    def test_unknown_key_path(self):
        with pytest.raises(ConfigError) as info:
            parse_config("arms:\n  - {sampler: lmc, stepsize: 0.1}\n")
        assert info.value.path.startswith("arms[0]")

    @pytest.mark.parametrize(
        "text,path",
        [
            ("rank: 21\n", "rank"),
            ("h: -1\n", "h"),
            ("steps: -3\n", "steps"),
            ("schedule: {kind: diagonal, values: [1, 2]}\n", "schedule.values"),
            ("experiment: logistic\nschedule: covariance\n", "schedule.kind"),
            ("sampler: lmc\nschedule: rmsprop\n", "sampler"),
            ("rank: 5\nphi: [0.5, 0.5]\n", "phi"),
            ("experiment: funnel\nerr_mode: running\n", "err_mode"),
            ("experiment: logistic\ndim: 3\n", "dim"),
            ("experiment: custom\n", "precision"),
            ("sampler: mala\n", "sampler"),
            ("rotate: 3\n", "rotate"),
        ],
    )
    def test_invalid(self, text, path):
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        assert info.value.path == path

    def test_not_yaml(self):
        with pytest.raises(ConfigError):
            parse_config("a: [1, 2\n")
        with pytest.raises(ConfigError):
            parse_config("- 1\n- 2\n")

    def test_round_trip(self, tmp_path):
        c = preset("fig1-topright")
        text = serialize_config(c)
        assert parse_config(text) == c
        (tmp_path / "c.yaml").write_text(text)
        assert load_config(tmp_path / "c.yaml") == c

    def test_custom_precision(self):
        c = parse_config("experiment: custom\nprecision: [1, 4]\nrank: 1\n")
        assert c.dim == 2

    @pytest.mark.parametrize("name", list(PRESETS))
    def test_presets_resolve(self, name):
        c = preset(name)
        assert len(c.arm_configs()) >= 2
        labels = [a.label for a in c.arm_configs()]
        assert len(set(labels)) == len(labels)

    def test_preset_overrides(self):
        assert preset("fig2", steps=10).steps == 10
        with pytest.raises(KeyError):
            preset("fig9")


def _tiny_gaussian(**kw):
    base = dict(steps=40, thin=10, ensemble=8)
    base.update(kw)
    return preset("fig1-topleft", **base)


class TestRuns:
    def test_gaussian_series_shape(self):
        rep = run_experiment(_tiny_gaussian())
        assert rep.arms() == [a.label for a in rep.config.arm_configs()]
        for s in rep.series:
            assert s.metric == "err"
            assert np.all(np.diff(s.oracle_calls) > 0)
            assert np.all(s.values >= 0)

    def test_oracle_axis_matches_block_rank(self):
        rep = run_experiment(_tiny_gaussian())
        per_step = {a.label: (20 if a.sampler == "lmc" else a.rank) for a in rep.config.arm_configs()}
        for s in rep.series:
            np.testing.assert_array_equal(s.oracle_calls, s.steps * per_step[s.arm])

    def test_zero_steps_err(self):
        rep = run_experiment(_tiny_gaussian(steps=0, ensemble=50, err_mode="ensemble"))
        for s in rep.series:
            assert len(s.values) == 1
        # all arms start from the same ensemble, so Err(0) agrees across arms
        first = {float(s.values[0]) for s in rep.series}
        assert len(first) == 1

    def test_byte_determinism(self, tmp_path):
        a = emit_outputs(run_experiment(_tiny_gaussian()), tmp_path / "a")
        b = emit_outputs(run_experiment(_tiny_gaussian()), tmp_path / "b")
        assert a == b
        assert json.loads((tmp_path / "a" / "manifest.json").read_text()) == a

    def test_threads_do_not_change_results(self):
        cfg = preset("fig2", steps=10, thin=5, ensemble=6, repetitions=3)
        assert report_csv(run_experiment(cfg, threads=1)) == report_csv(run_experiment(cfg, threads=3))

    def test_csv_rows(self):
        rep = run_experiment(_tiny_gaussian())
        lines = report_csv(rep).splitlines()
        assert tuple(lines[0].split(",")) == CSV_HEADER
        n_rec = math.ceil(40 / 10) + 1
        assert len(lines) == 1 + len(rep.config.arm_configs()) * n_rec
        assert lines[1].split(",")[2].endswith("/err")

    def test_empty_report(self, tmp_path):
        rep = ExperimentReport(parse_config("steps: 1\n"))
        assert report_csv(rep).splitlines() == [",".join(CSV_HEADER)]
        manifest = emit_outputs(rep, tmp_path)
        assert "err.svg" in manifest
        assert (tmp_path / "err.svg").read_text().startswith("<svg")

    def test_logistic_and_funnel_outputs(self, tmp_path):
        rep = run_experiment(preset("fig2", steps=10, thin=5, ensemble=10))
        names = emit_outputs(rep, tmp_path / "l")
        assert "ksd.svg" in names and sum(n.startswith("samples_") for n in names) == 3
        rep = run_experiment(preset("fig4-funnel", steps=20, thin=10, ensemble=10, repetitions=2))
        assert {s.metric for s in rep.series} == {"ks_y"}
        assert len(rep.final_values("RMSProp", "ks_y")) == 2
        names = emit_outputs(rep, tmp_path / "f")
        assert "ks_y.svg" in names

    def test_repetition_seeds(self):
        rep = run_experiment(preset("fig2", steps=5, thin=5, ensemble=5, repetitions=3, seed=7))
        assert sorted({s.seed for s in rep.series}) == [7, 8, 9]

    def test_err_decays_after_burn_in(self):
        # Started from N(1, I); after time 25 per coordinate the bias is gone
        # and 4000 chains leave a standard error near 0.01.
        cfg = parse_config(
            "experiment: custom\nprecision: [1, 1]\nrank: 1\nsteps: 2000\nthin: 1000\nensemble: 4000\nh: 0.05\n"
        )
        vals = run_experiment(cfg).series[0].values
        assert vals[0] > 0.3
        assert vals[-1] < 0.05 * abs_sum_gaussian_mean(np.eye(2))
