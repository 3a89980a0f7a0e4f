"""Canonical encoding, digests, object roundtrips, CSV/JSONL writers."""

import json
import math

import numpy as np
import pytest

from mixlab.errors import ConfigurationError
from mixlab.measures import FiniteMeasure, StateSpace
from mixlab.models import build_block_mixture
from mixlab.reports import make_report, reports_to_jsonl
from mixlab.serialize import (
    canonical_json,
    digest,
    format_float,
    generator_from_dict,
    generator_to_dict,
    measure_from_dict,
    measure_to_dict,
    mixture_from_dict,
    mixture_to_dict,
    read_json,
    space_from_dict,
    space_to_dict,
    write_csv,
    write_json,
)


def test_format_float_edge_cases():
    assert format_float(math.nan) == "NaN"
    assert format_float(math.inf) == "Infinity"
    assert format_float(-math.inf) == "-Infinity"
    assert format_float(-0.0) == "0"
    assert format_float(0.1) == "0.10000000000000001"
    # 17 significant digits reproduce the double exactly
    assert float(format_float(math.pi)) == math.pi


def test_canonical_json_is_sorted_and_stable():
    a = canonical_json({"b": 1, "a": [1.5, True, None, "x"]})
    assert a == '{"a":[1.5,true,null,"x"],"b":1}'
    assert canonical_json({"a": np.array([1.0, 2.0])}) == '{"a":[1,2]}'
    assert canonical_json(np.float64(0.5)) == "0.5"
    assert digest({"x": 1, "y": 2}) == digest({"y": 2, "x": 1})
    assert len(digest([1, 2, 3])) == 16
    assert set(digest([1, 2, 3])) <= set("0123456789abcdef")
    with pytest.raises(ConfigurationError):
        canonical_json({1: "non-string key"})
    with pytest.raises(ConfigurationError):
        canonical_json(object())


def test_json_file_roundtrip_including_nonfinite(tmp_path):
    doc = {"v": [1.0, math.inf, -math.inf], "n": math.nan}
    p = tmp_path / "doc.json"
    write_json(p, doc)
    back = read_json(p)
    assert back["v"] == [1.0, math.inf, -math.inf]
    assert math.isnan(back["n"])


def test_space_measure_mixture_generator_roundtrips():
    gm = build_block_mixture(sizes=(2, 3), bridge=0.04)
    space = gm.space

    s2 = space_from_dict(json.loads(canonical_json(space_to_dict(space))))
    assert s2.same_as(space)

    mu = FiniteMeasure(space, [0.1, 0.2, 0.3, 0.25, 0.15])
    m2 = measure_from_dict(json.loads(canonical_json(measure_to_dict(mu))))
    assert np.array_equal(m2.mass, mu.mass)

    mix2 = mixture_from_dict(json.loads(canonical_json(mixture_to_dict(gm.mix))))
    assert np.allclose(mix2.parent.mass, gm.mix.parent.mass, atol=1e-15)
    assert np.array_equal(mix2.weights.mass, gm.mix.weights.mass)

    gen = gm.parent_generator
    g2 = generator_from_dict(json.loads(canonical_json(generator_to_dict(gen))))
    assert np.allclose(g2.rates, gen.rates, atol=1e-15)
    assert np.allclose(g2.stationary.mass, gen.stationary.mass, atol=1e-15)


def test_space_roundtrip_drops_nothing():
    space = StateSpace.line([0.0, 0.5, 1.5], labels=("a", "b", "c"))
    back = space_from_dict(space_to_dict(space))
    assert back.labels == ("a", "b", "c")
    assert np.array_equal(back.coords, space.coords)
    assert np.array_equal(back.metric, space.metric)


def test_write_csv_formatting(tmp_path):
    p = tmp_path / "t.csv"
    write_csv(
        p,
        ("name", "k", "v", "ok"),
        [("row", 3, -0.0, True), ("inf", 1, math.inf, False)],
        preamble="config_digest=abc seed=0",
    )
    text = p.read_text()
    assert text.splitlines() == [
        "# config_digest=abc seed=0",
        "name,k,v,ok",
        "row,3,0,true",
        "inf,1,Infinity,false",
    ]


def test_reports_jsonl_has_header_line(tmp_path):
    p = tmp_path / "reports.jsonl"
    reports = [make_report("a", 0.0, 1.0), make_report("b", 2.0, 1.0)]
    reports_to_jsonl(p, reports, header={"seed": 7, "config_digest": "beef"})
    lines = p.read_text().splitlines()
    assert len(lines) == 3
    head = json.loads(lines[0])
    assert head == {"header": {"config_digest": "beef", "seed": 7}}
    first = json.loads(lines[1])
    assert first["name"] == "a" and first["pass"] is True
    assert json.loads(lines[2])["pass"] is False
