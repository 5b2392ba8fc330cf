import json

import numpy as np
import pytest

from ergolq import (
    DimensionError,
    ProblemFormatError,
    dump_problem,
    load_problem,
    normalize_problem,
    parse_problem,
    with_seed,
)


def minimal_doc():
    return {
        "schema_version": 1,
        "system": {
            "n": 1, "m": 1, "d": 1,
            "A": [[1.0]], "B": [[1.0]],
            "C": [[[1.0]]], "D": [[[0.0]]],
            "b": [1.0], "sigma": [[1.0]],
        },
        "weights": {"Q": [[-1.0]], "S": [[-1.0]], "R": [[0.0]]},
    }


def test_parse_minimal_document():
    p = parse_problem(json.dumps(minimal_doc()))
    assert p.system.n == 1
    assert p.weights.S[0, 0] == -1.0
    # omitted optional pieces default sensibly
    assert np.array_equal(p.weights.q, [0.0])
    assert np.array_equal(p.weights.rho, [0.0])
    assert p.strategy is None
    assert p.sim is None
    assert p.schedule is None


def test_parse_full_document():
    doc = minimal_doc()
    doc["strategy"] = {"Theta": [[-3.0]], "v": [-3.0]}
    doc["sim"] = {"dt": 0.002, "horizon_t": 100.0, "n_paths": 8, "burn_in_t": 10.0,
                  "seed": 99, "abel_lambda": 0.01}
    doc["schedule"] = [1e-2, 1e-3, 1e-4]
    p = parse_problem(json.dumps(doc))
    assert p.strategy.Theta[0, 0] == -3.0
    assert p.sim.dt == 0.002
    assert p.sim.seed == 99
    assert p.schedule == (1e-2, 1e-3, 1e-4)


def test_strategy_offset_defaults_to_zero():
    doc = minimal_doc()
    doc["strategy"] = {"Theta": [[-3.0]]}
    p = parse_problem(json.dumps(doc))
    assert np.array_equal(p.strategy.v, [0.0])


def test_rejects_non_finite_numbers():
    text = json.dumps(minimal_doc()).replace("-1.0", "NaN", 1)
    with pytest.raises(ProblemFormatError):
        parse_problem(text)
    text2 = json.dumps(minimal_doc()).replace("-1.0", "Infinity", 1)
    with pytest.raises(ProblemFormatError):
        parse_problem(text2)


def test_rejects_malformed_json_and_roots():
    with pytest.raises(ProblemFormatError):
        parse_problem("{not json")
    with pytest.raises(ProblemFormatError):
        parse_problem("[1, 2, 3]")


def test_rejects_unknown_and_missing_keys():
    doc = minimal_doc()
    doc["extra"] = 1
    with pytest.raises(ProblemFormatError):
        parse_problem(json.dumps(doc))
    doc2 = minimal_doc()
    del doc2["system"]["A"]
    with pytest.raises(ProblemFormatError):
        parse_problem(json.dumps(doc2))
    doc3 = minimal_doc()
    doc3["sim"] = {"dt": 0.001, "bogus": 2}
    with pytest.raises(ProblemFormatError):
        parse_problem(json.dumps(doc3))


def test_rejects_wrong_schema_version():
    doc = minimal_doc()
    doc["schema_version"] = 2
    with pytest.raises(ProblemFormatError):
        parse_problem(json.dumps(doc))


def test_shape_mismatch_is_a_dimension_error():
    doc = minimal_doc()
    doc["system"]["A"] = [[1.0, 0.0]]
    with pytest.raises(DimensionError):
        parse_problem(json.dumps(doc))
    doc2 = minimal_doc()
    doc2["system"]["C"] = [[[1.0]], [[2.0]]]  # d says 1 matrix
    with pytest.raises(DimensionError):
        parse_problem(json.dumps(doc2))


def test_schedule_validated_at_parse_time():
    for bad in ([], [1e-2, 1e-2], [1e-3, 1e-2], [1e-2, -1.0], [0.0]):
        doc = minimal_doc()
        doc["schedule"] = bad
        with pytest.raises(ProblemFormatError):
            parse_problem(json.dumps(doc))


def test_bool_is_not_an_int():
    doc = minimal_doc()
    doc["system"]["n"] = True
    with pytest.raises(ProblemFormatError):
        parse_problem(json.dumps(doc))


def test_normalize_round_trips_bit_exactly():
    doc = minimal_doc()
    doc["strategy"] = {"Theta": [[-0.1]], "v": [1.0 / 3.0]}
    doc["sim"] = {"dt": 1e-17 + 1e-3}
    doc["weights"]["Q"] = [[0.1 + 0.2]]
    p = parse_problem(json.dumps(doc))
    text = dump_problem(p)
    p2 = parse_problem(text)
    assert np.array_equal(p.weights.Q, p2.weights.Q)
    assert np.array_equal(p.strategy.v, p2.strategy.v)
    assert p.sim.dt == p2.sim.dt
    assert dump_problem(p2) == text


def test_normalize_fills_defaults_explicitly():
    p = parse_problem(json.dumps(minimal_doc()))
    doc = normalize_problem(p)
    assert doc["weights"]["q"] == [0.0]
    assert doc["weights"]["rho"] == [0.0]
    assert "strategy" not in doc


def test_load_problem_missing_file(tmp_path):
    with pytest.raises(ProblemFormatError):
        load_problem(str(tmp_path / "nope.json"))
    path = tmp_path / "p.json"
    path.write_text(json.dumps(minimal_doc()))
    p = load_problem(str(path))
    assert p.system.A[0, 0] == 1.0


def test_with_seed_overrides_or_creates_sim():
    p = parse_problem(json.dumps(minimal_doc()))
    p2 = with_seed(p, 123)
    assert p2.sim is not None and p2.sim.seed == 123
    doc = minimal_doc()
    doc["sim"] = {"dt": 0.002, "seed": 5}
    p3 = with_seed(parse_problem(json.dumps(doc)), 77)
    assert p3.sim.seed == 77
    assert p3.sim.dt == 0.002  # everything else untouched
