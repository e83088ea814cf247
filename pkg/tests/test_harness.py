"""Tests for experiment configs, verification rows and the campaign runners."""

import json
from pathlib import Path
from unittest.mock import Mock, patch

import numpy as np
import pytest

from olcb.corpus import CorpusEntry
from olcb.errors import ConfigError, DomainError, FunctionValidationError
from olcb.harness import (
    ROW_HEADER,
    ToleranceBudget,
    VerificationRow,
    _sandwich_rows,
    build_corpus,
    load_config_body,
    load_experiment,
    run_centroid,
    run_converge,
    run_norm,
    run_steiner,
    run_verify_bp,
    summarize,
    tolerance_budget,
    write_metadata,
)
from olcb.orlicz import Constant, NegatedCell, Power

SQUARE = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]
TRIANGLE = [[-1.0, -1.0], [2.0, -1.0], [-1.0, 2.0]]


def make_config(**overrides) -> dict:
    data = {
        "schema_version": 1,
        "name": "square",
        "dim": 2,
        "body": {"inline": {"type": "polytope", "dim": 2, "vertices": SQUARE}},
        "phi": {"family": "power", "p": 1},
        "omega": {"family": "constant"},
        "directions": [[1.0, 0.0], [0.0, 1.0]],
        "grid_size": 16,
        "seed": 7,
    }
    data.update(overrides)
    return data


def read_rows(path) -> list[list[str]]:
    return [line.split(",") for line in path.read_text().splitlines()]


class TestLoadExperiment:
    """Config parsing and validation."""

    def test_inline_config(self):
        """Fields, defaults and the parsed φ/ω."""
        config = load_experiment(make_config())
        assert config.name == "square"
        assert config.phi == Power(1.0)
        assert config.omega == Constant()
        assert config.grid == 16
        assert config.trials == 100
        assert config.directions.shape == (2, 2)
        assert config.solver_omega is config.omega
        assert load_config_body(config).volume().value == pytest.approx(4.0)

    def test_file_config_resolves_body_relative_to_config(self, tmp_path):
        """`body.file` is read next to the config."""
        (tmp_path / "bodies").mkdir()
        (tmp_path / "bodies" / "tri.json").write_text(json.dumps({"type": "polytope", "dim": 2, "vertices": TRIANGLE}))
        path = tmp_path / "exp.json"
        path.write_text(json.dumps(make_config(body={"file": "bodies/tri.json"})))
        config = load_experiment(path)
        assert config.base_dir == tmp_path
        assert load_config_body(config).volume().value == pytest.approx(4.5)

    @pytest.mark.parametrize(
        "overrides, message",
        [
            ({"schema_version": 2}, "schema_version"),
            ({"dim": 1}, "dim"),
            ({"body": {}}, "body"),
            ({"body": {"generator": {"count": 3}}}, "kind"),
            ({"directions": [[1.0, 0.0], [0.0, 0.0]]}, "direction 1"),
            ({"directions": [[1.0, 0.0, 0.0]]}, "length 2"),
            ({"inject_fault": "flip_sign"}, "fault"),
            ({"phi": {"family": "cosh"}}, "phi"),
            ({"phi": {"family": "power", "p": 0.5}}, "p >= 1"),
            ({"omega": {"family": "negated_cell", "base": {"family": "constant"}}}, "inject_fault"),
            ({"omega": {"family": "constant", "value": -1.0}}, "positive"),
        ],
    )
    def test_rejects_bad_configs(self, overrides, message):
        """Every validation error is a ConfigError naming its cause."""
        with pytest.raises(ConfigError, match=message):
            load_experiment(make_config(**overrides))

    def test_functions_are_validated(self):
        """φ and ω pass their defining checks before any solving."""
        with patch("olcb.harness.validate_omega", side_effect=FunctionValidationError("ω is not nonincreasing")) as check:
            with pytest.raises(ConfigError, match="nonincreasing"):
                load_experiment(make_config())
        check.assert_called_once_with(Constant())

    def test_missing_phi(self):
        """Required keys are reported by path."""
        data = make_config()
        del data["phi"]
        with pytest.raises(ConfigError, match="phi"):
            load_experiment(data)

    def test_unreadable_file(self, tmp_path):
        """Broken JSON is a ConfigError, not a traceback."""
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_experiment(path)

    def test_fault_only_touches_solver_weight(self):
        """The bound computations keep the clean ω."""
        config = load_experiment(make_config(inject_fault="negate_weight_cell"))
        assert config.omega == Constant()
        assert isinstance(config.solver_omega, NegatedCell)

    def test_generated_corpus(self):
        """Generated bodies come first, then the reference bodies."""
        config = load_experiment(
            make_config(
                body={"generator": {"kind": "random_polygon", "count": 3, "vertex_count": 6}},
                include_ellipses=True,
                include_regular=[8],
            )
        )
        ids = [entry.body_id for entry in build_corpus(config)]
        assert ids[:3] == ["random_polygon-0000", "random_polygon-0001", "random_polygon-0002"]
        assert "ball" in ids
        assert sum(i.startswith("ellipsoid") for i in ids) == 3
        assert ids[-1] == "regular-008"


class TestRows:
    """Verification rows, summaries and tolerance budgets."""

    def test_pass_within_tolerance(self):
        """slack >= −tolerance passes."""
        assert VerificationRow("k", "s", 1.0, 1.0, -1e-7, 1e-6).passed
        assert not VerificationRow("k", "s", 1.0, 1.0, -1e-5, 1e-6).passed

    def test_nan_fails(self):
        """A failed trial never passes."""
        row = VerificationRow.failed("k", "sandwich_lower", DomainError("boom"))
        assert not row.passed
        assert row.metadata == "error: boom"
        assert len(row.as_cells()) == len(ROW_HEADER)

    def test_summarize(self):
        """Counts per statistic, and the minimum finite slack."""
        rows = [
            VerificationRow("a", "x", 0.0, 0.0, 0.5, 0.0),
            VerificationRow("b", "x", 0.0, 0.0, -0.25, 0.0),
            VerificationRow.failed("c", "y", DomainError("boom")),
        ]
        summary = summarize(rows)
        assert summary.total == 3
        assert summary.failures == 2
        assert summary.min_slack == -0.25
        assert summary.by_statistic == {"x": (2, 1), "y": (1, 1)}
        assert not summary.passed

    def test_tolerance_budget(self):
        """Largest residual and Richardson change across reports."""
        reports = [Mock(residual=1e-9, richardson_delta=2e-8), Mock(residual=3e-9, richardson_delta=0.0)]
        budget = tolerance_budget(reports, bracket_width=1e-3)
        assert budget == ToleranceBudget(3e-9, 2e-8, 1e-3)
        assert budget.total == pytest.approx(1e-3 + 3e-9 + 2e-8)


class TestFaultInjection:
    """Corrupting the weight must be caught by the sandwich rows."""

    def test_clean_sandwich_passes(self, square):
        """Both sides hold for the square with the clean weight."""
        config = load_experiment(make_config())
        rows = _sandwich_rows(CorpusEntry("square", square), config, np.array([[1.0, 0.0]]))
        assert [row.statistic for row in rows] == ["sandwich_lower", "sandwich_upper"]
        assert all(row.passed for row in rows)

    def test_negated_cell_fails_lower_bound(self, square):
        """λ drops to 1/16, below the clean lower bound."""
        config = load_experiment(make_config(inject_fault="negate_weight_cell"))
        lower, upper = _sandwich_rows(CorpusEntry("square", square), config, np.array([[1.0, 0.0]]))
        assert lower.rhs == pytest.approx(1.0 / 16.0, rel=1e-6)
        assert not lower.passed
        assert upper.passed
        assert "displayed_lower=" in lower.metadata


class TestCampaigns:
    """Small end-to-end campaigns writing to a temporary directory."""

    def test_norm(self, tmp_path):
        """One CSV row per direction; φ = s² gives λ = 1/√3 on the square."""
        config = load_experiment(make_config(phi={"family": "power", "p": 2}))
        advance = Mock()
        result = run_norm(config, tmp_path, advance)
        assert result.summary.passed
        assert advance.call_count == 2
        table = read_rows(tmp_path / "norm.csv")
        assert table[0][:5] == ["body_id", "x0", "x1", "lambda", "lambda_lo"]
        assert len(table) == 3
        assert float(table[1][3]) == pytest.approx(np.sqrt(1.0 / 3.0), rel=1e-6)
        assert table[1][-1] == "7"
        assert result.budget.solver_residual < 1e-7

    def test_centroid(self, tmp_path):
        """Exports the support table and a rigorous planar ratio bracket."""
        result = run_centroid(load_experiment(make_config()), tmp_path)
        assert result.summary.passed
        assert [p.name for p in result.artifacts] == ["centroid.csv", "volume_ratio.csv"]
        ratio = read_rows(tmp_path / "volume_ratio.csv")
        assert ratio[1][6] == "true"
        assert float(ratio[1][2]) <= float(ratio[1][0]) <= float(ratio[1][3])

    def test_steiner(self, tmp_path):
        """Volume and chord rows pass and every symmetral is dumped."""
        config = load_experiment(
            make_config(
                body={"inline": {"type": "polytope", "dim": 2, "vertices": TRIANGLE}},
                directions=[[0.6, 0.8], [0.0, 1.0]],
            )
        )
        result = run_steiner(config, tmp_path)
        exact = {"volume", "chord_nonnegative", "maps_involution", "graph_agreement"}
        assert all(row.passed for row in result.rows if row.statistic in exact)
        assert {row.statistic for row in result.rows} >= exact | {"maps_push", "maps_reflect"}
        assert (tmp_path / "symmetral_u0.json").exists()
        assert (tmp_path / "symmetral_u1.json").exists()
        assert read_rows(tmp_path / "steiner.csv")[0] == ROW_HEADER

    def test_steiner_skips_graph_rows_for_boundary_origin(self, tmp_path):
        """Graph functions need an interior origin."""
        config = load_experiment(
            make_config(
                body={"inline": {"type": "polytope", "dim": 2, "vertices": [[0, 0], [1, 0], [0, 1]], "check_origin": False}},
                directions=[[0.0, 1.0]],
            )
        )
        result = run_steiner(config, tmp_path)
        assert not any(row.statistic == "graph_agreement" for row in result.rows)
        assert next(row for row in result.rows if row.statistic == "volume").passed

    def test_verify_bp(self, tmp_path):
        """The square beats the disk and ellipses tie with it."""
        config = load_experiment(make_config(grid_size=64, include_ellipses=True))
        result = run_verify_bp(config, tmp_path)
        assert result.summary.passed
        stats = {row.body_id: row.statistic for row in result.rows}
        assert stats["ball"] == "reference"
        assert stats["body"] == "volume_ratio"
        assert stats["ellipsoid-00"] == "ellipsoid_matches_ball"
        assert result.budget.bracket_width > 0.0

    def test_reruns_are_byte_identical(self, tmp_path):
        """Same config and seed, same CSV bytes."""
        config = load_experiment(
            make_config(body={"generator": {"kind": "random_polygon", "count": 2, "vertex_count": 6}}, seed=11)
        )
        run_verify_bp(config, tmp_path / "a")
        run_verify_bp(config, tmp_path / "b")
        first = (tmp_path / "a" / "verify_bp.csv").read_bytes()
        assert first == (tmp_path / "b" / "verify_bp.csv").read_bytes()
        assert first.count(b"\n") == 4

    def test_verify_bp_rejects_high_dimensions(self, tmp_path):
        """Volume brackets exist only in the plane and in space."""
        config = load_experiment(make_config(dim=4, directions=None, body={"inline": {"type": "ball", "dim": 4}}))
        with pytest.raises(ConfigError):
            run_verify_bp(config, tmp_path)

    def test_converge(self, tmp_path):
        """Centroid volumes shrink along a short trace."""
        config = load_experiment(
            make_config(
                body={"inline": {"type": "polytope", "dim": 2, "vertices": TRIANGLE}},
                steps=3,
                directions=None,
            )
        )
        result = run_converge(config, tmp_path)
        assert result.summary.passed
        assert len((tmp_path / "trace.jsonl").read_text().splitlines()) == 4
        assert len(read_rows(tmp_path / "centroid_brackets.csv")) == 5

    def test_metadata(self, tmp_path):
        """run.jsonl records the command, seed and raw config."""
        config = load_experiment(make_config())
        record = json.loads(write_metadata(tmp_path, config, "norm").read_text())
        assert record["command"] == "norm"
        assert record["seed"] == 7
        assert record["config"]["name"] == "square"


EXPERIMENTS = sorted((Path(__file__).parent.parent / "experiments").glob("*.json"))


class TestShippedExperiments:
    """The configs under experiments/ stay loadable."""

    @pytest.mark.parametrize("path", EXPERIMENTS, ids=[p.stem for p in EXPERIMENTS])
    def test_loads(self, path):
        """Each config parses and its first body builds."""
        config = load_experiment(path)
        assert config.name == path.stem
        assert load_config_body(config).dim == config.dim
