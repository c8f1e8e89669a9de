import json
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simplexlab.averaging import _pin_candidates, _pin_hit_counts, shell_tuples
from simplexlab.core import parse_simplex
from simplexlab.errors import EmptyShellError, PreconditionError
from simplexlab.grids import Box
from simplexlab.lab import (
    ExperimentConfig,
    ExperimentReport,
    corollary_q_check,
    emit_report,
    generate_set,
    load_report,
    periodic_pattern_density,
    pinned_experiment,
)

BERNOULLI_SEED = 20260214


def bernoulli_cfg(**overrides):
    base = dict(
        dim=5,
        simplex="e-orthonormal:1",
        set_kind="bernoulli",
        set_params={"delta": 0.5},
        lambda_sq_min=16,
        lambda_sq_max=25,
        box_side=24,
        eps=0.1,
        seed=BERNOULLI_SEED,
        max_pins=24,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


# --- generators -------------------------------------------------------------


def test_bernoulli_density_near_target():
    A = generate_set("bernoulli", {"delta": 0.5}, Box.cube(10, 5), seed=BERNOULLI_SEED)
    assert A.count == 50056
    assert abs(float(A.density()) - 0.5) < 0.01


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32),
    lo=st.tuples(st.integers(-15, 5), st.integers(-15, 5)),
    ext=st.tuples(st.integers(1, 8), st.integers(1, 8)),
)
def test_bernoulli_membership_is_pointwise(seed, lo, ext):
    # membership is a pure function of (seed, coordinates), so any two
    # boxes agree wherever they overlap
    big = Box.cube(40, 2)
    small = Box(lo, ext)
    A = generate_set("bernoulli", {"delta": 0.35}, big, seed=seed)
    B = generate_set("bernoulli", {"delta": 0.35}, small, seed=seed)
    for p in small.points():
        assert A.contains(p) == B.contains(p)


def test_bernoulli_extremes_and_validation():
    box = Box.cube(6, 2)
    assert generate_set("bernoulli", {"delta": 0.0}, box).count == 0
    assert generate_set("bernoulli", {"delta": 1.0}, box).count == box.size
    with pytest.raises(PreconditionError, match="density"):
        generate_set("bernoulli", {"delta": 1.5}, box)


def test_congruence_counts():
    assert generate_set("congruence", {"r": 2}, Box.cube(10, 2)).count == 25
    full = generate_set("congruence", {"r": 1}, Box.cube(7, 3))
    assert full.count == full.box.size
    with pytest.raises(PreconditionError, match="modulus"):
        generate_set("congruence", {"r": 0}, Box.cube(4, 2))


def test_periodic_pattern_density_on_whole_periods():
    # box side == one full period, so the box density is the exact one
    C = generate_set("periodic-counterexample", {"q": 1, "M": 2}, Box.cube(16, 2))
    assert C.density() == periodic_pattern_density(1, 2, 2) == Fraction(9, 256)
    C1 = generate_set("periodic-counterexample", {"q": 1, "M": 3}, Box.cube(24, 1))
    assert C1.density() == periodic_pattern_density(1, 3, 1) == Fraction(1, 4)
    with pytest.raises(PreconditionError):
        generate_set("periodic-counterexample", {"q": 0, "M": 2}, Box.cube(8, 2))


def test_periodic_pattern_avoids_its_distance():
    # q=1, M=2, d=2: no two members at squared distance (q d M)^2 = 16,
    # while plenty of other squared distances occur
    A = generate_set("periodic-counterexample", {"q": 1, "M": 2}, Box.cube(32, 2))
    pts = A.points()
    diffs = pts[:, None, :] - pts[None, :, :]
    norms = (diffs**2).sum(axis=2)
    assert not (norms == 16).any()
    assert (norms == 1).any() and (norms == 4).any()


def test_union_inclusion_exclusion():
    U = generate_set(
        "union",
        {
            "parts": [
                {"kind": "congruence", "params": {"r": 2}},
                {"kind": "congruence", "params": {"r": 3}},
            ]
        },
        Box.cube(12, 2),
    )
    assert U.count == 36 + 16 - 4


def test_generate_set_validation():
    box = Box.cube(4, 2)
    with pytest.raises(PreconditionError, match="unknown set kind"):
        generate_set("fractal", {}, box)
    with pytest.raises(PreconditionError, match="at least one part"):
        generate_set("union", {"parts": []}, box)


# --- config -----------------------------------------------------------------


def test_config_validation():
    with pytest.raises(PreconditionError, match="lambda_sq"):
        bernoulli_cfg(lambda_sq_min=9, lambda_sq_max=4)
    with pytest.raises(PreconditionError, match="box side"):
        bernoulli_cfg(box_side=0)
    with pytest.raises(PreconditionError, match="eps"):
        bernoulli_cfg(eps=1.0)
    with pytest.raises(PreconditionError, match="scale q"):
        bernoulli_cfg(scale_q=0)
    with pytest.raises(PreconditionError, match="eta"):
        bernoulli_cfg(eta=0.01)
    # the cap itself is allowed
    assert bernoulli_cfg(eta=0.1**2 / 10).eta == pytest.approx(0.001)


def test_config_low_dim_advisory():
    with pytest.warns(UserWarning, match="hypothesis range"):
        bernoulli_cfg(dim=3)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        bernoulli_cfg(dim=5)  # 2k+3 exactly, no warning


# --- pinned experiments -----------------------------------------------------


def test_bernoulli_experiment_regression():
    rep = pinned_experiment(bernoulli_cfg())
    assert rep.lambda_sqs == list(range(16, 26))
    assert rep.skipped_shells == []
    assert rep.delta_hat == Fraction(3982399, 7962624)
    assert rep.threshold == rep.delta_hat - Fraction(1, 10)
    assert len(rep.pins) == 24 and rep.subsampled
    assert rep.best_pin == (-1, -6, 6, -6, 3)
    assert rep.best_value == Fraction(79, 160)
    assert rep.success_fraction == 1
    assert rep.lambda0_found == 16
    assert rep.passes


def test_counterexample_has_no_hits_at_its_distance():
    s = parse_simplex("e-orthonormal:1", 5)
    A = generate_set("periodic-counterexample", {"q": 1, "M": 2}, Box.cube(24, 5))
    assert A.density() == Fraction(1, 32768)
    pins = _pin_candidates(A, s, 100)
    assert len(pins) == 243  # every member point clears the margin
    tuples = shell_tuples(s, 100)
    assert len(tuples) == 10890
    assert int(_pin_hit_counts(A, pins, tuples).max()) == 0


def test_counterexample_experiment_fails():
    cfg = ExperimentConfig(
        dim=5,
        simplex="e-orthonormal:1",
        set_kind="periodic-counterexample",
        set_params={"q": 1, "M": 2},
        lambda_sq_min=100,
        lambda_sq_max=100,
        box_side=24,
        eps=1e-5,
    )
    rep = pinned_experiment(cfg)
    assert rep.threshold == Fraction(1, 32768) - Fraction(1, 100000)
    assert rep.threshold > 0
    assert rep.best_value == 0
    assert rep.success_fraction == 0
    assert rep.lambda0_found is None
    assert not rep.passes


def test_window_start_search():
    # even lattice: radius 3 has a nonempty shell but no even points, so
    # the window can only start passing at radius 4
    def cfg(lo, hi):
        return ExperimentConfig(
            dim=5,
            simplex="e-orthonormal:1",
            set_kind="congruence",
            set_params={"r": 2},
            lambda_sq_min=lo,
            lambda_sq_max=hi,
            box_side=12,
            eps=0.02,
            max_pins=10,
        )

    rep = pinned_experiment(cfg(3, 4))
    assert rep.delta_hat == Fraction(1, 32)
    assert rep.threshold == Fraction(1, 32) - Fraction(1, 50)
    assert [list(row) for row in rep.values] == [[0, Fraction(1, 9)]] * 10
    assert rep.lambda0_found == 4
    assert not rep.passes
    tail = pinned_experiment(cfg(4, 4))
    assert tail.lambda0_found == 4 and tail.passes
    assert tail.best_value == Fraction(1, 9)


def test_experiment_error_paths():
    with pytest.raises(PreconditionError, match="empty"):
        pinned_experiment(bernoulli_cfg(set_params={"delta": 0.0}))
    with pytest.raises(PreconditionError, match="no admissible pins"):
        pinned_experiment(
            bernoulli_cfg(
                box_side=5, lambda_sq_min=4, lambda_sq_max=4, seed=0, max_pins=None
            )
        )
    with pytest.raises(EmptyShellError), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pinned_experiment(
            ExperimentConfig(
                dim=1,
                simplex="e-orthonormal:1",
                set_kind="congruence",
                set_params={"r": 1},
                lambda_sq_min=2,
                lambda_sq_max=3,
                box_side=9,
            )
        )


# --- congruence rescaling ---------------------------------------------------


def test_corollary_identity_exhaustive():
    for r in (1, 2, 3):
        rep = corollary_q_check(r, dim=5, lambda_sq_max=9, box_side=11)
        assert rep.passes


def test_corollary_row_details():
    rep = corollary_q_check(1, dim=5, lambda_sq_max=9, box_side=11)
    # box side 11 contains every vector of norm <= 3, so these are the
    # full five-square representation counts
    assert [row.count_set for row in rep.rows] == [10, 40, 80, 90, 112, 240, 320, 200, 250]
    rep2 = corollary_q_check(2, dim=5, lambda_sq_max=9, box_side=11)
    by_ls = {row.lambda_sq: row for row in rep2.rows}
    assert by_ls[4].rescaled_lambda_sq == 1 and by_ls[4].count_rescaled == 10
    assert by_ls[8].rescaled_lambda_sq == 2 and by_ls[8].count_rescaled == 40
    for ls in (1, 2, 3, 5, 6, 7, 9):
        assert by_ls[ls].count_set == 0 and by_ls[ls].rescaled_lambda_sq is None
    rep3 = corollary_q_check(3, dim=5, lambda_sq_max=9, box_side=11)
    assert {row.lambda_sq: row.count_set for row in rep3.rows}[9] == 10


def test_corollary_validation():
    with pytest.raises(PreconditionError):
        corollary_q_check(0, dim=5)


# --- reports ----------------------------------------------------------------


def small_report():
    return pinned_experiment(
        bernoulli_cfg(
            set_params={"delta": 0.4},
            lambda_sq_min=9,
            lambda_sq_max=12,
            box_side=16,
            eps=0.2,
            seed=7,
            max_pins=3,
        )
    )


def test_report_deterministic_modulo_volatile():
    a, b = small_report().to_dict(), small_report().to_dict()
    for key in ("created", "runtime_s"):
        a.pop(key)
        b.pop(key)
    assert a == b


def test_report_json_roundtrip(tmp_path):
    rep = small_report()
    path = tmp_path / "rep.json"
    emit_report(rep, path, "json")
    back = load_report(path)
    assert back.values == rep.values
    assert back.delta_hat == rep.delta_hat
    assert back.best_pin == rep.best_pin
    assert back.pins == rep.pins
    assert back.success_fraction == rep.success_fraction
    raw = json.loads(path.read_text())
    assert raw["schema_version"] == 1
    assert isinstance(raw["values"][0][0], str)  # exact "p/q", not floats


def test_report_csv_shape(tmp_path):
    rep = small_report()
    path = tmp_path / "rep.csv"
    emit_report(rep, path, "csv")
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "pin_index,pin,lambda_sq,value"
    assert len(lines) == 1 + len(rep.pins) * len(rep.lambda_sqs)
    first = lines[1].split(",")
    assert first[0] == "0" and int(first[2]) == rep.lambda_sqs[0]
    # csv has no volatile fields at all, so reruns are byte-identical
    path2 = tmp_path / "rep2.csv"
    emit_report(small_report(), path2, "csv")
    assert path.read_bytes() == path2.read_bytes()


def test_report_io_errors(tmp_path):
    rep = small_report()
    with pytest.raises(OSError, match="missing"):
        load_report(tmp_path / "missing.json")
    with pytest.raises(OSError, match="no-such-dir"):
        emit_report(rep, tmp_path / "no-such-dir" / "rep.json", "json")
    with pytest.raises(PreconditionError, match="format"):
        emit_report(rep, tmp_path / "rep.xml", "xml")


def test_report_from_dict_reconstructs():
    rep = small_report()
    again = ExperimentReport.from_dict(rep.to_dict())
    assert again.values == rep.values
    assert again.threshold == rep.threshold
    assert again.lambda0_found == rep.lambda0_found
    assert again.passes == rep.passes
