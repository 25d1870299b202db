import json
from fractions import Fraction as F

import pytest

from normalmarket.curves import build_curves
from normalmarket.markets import list_fixtures, fixture
from normalmarket.specio import SpecError, load_spec, parse_spec, spec_to_json

NAMES = [row["name"] for row in list_fixtures()]


@pytest.mark.parametrize("name", NAMES)
def test_fixture_round_trip(name):
    spec = fixture(name).spec
    doc = spec_to_json(spec)
    again = parse_spec(json.loads(json.dumps(doc)))
    assert spec_to_json(again) == doc
    a, b = build_curves(spec), build_curves(again)
    for p in (F(0), F(1, 2), F(1), F(2), F(5)):
        assert a.supply(p) == b.supply(p)
        assert a.max_d(p) == b.max_d(p)


def test_load_from_file(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec_to_json(fixture("trading?v=0.43").spec)))
    spec, label = load_spec(str(path))
    assert label == str(path)
    assert build_curves(spec).s_max == F(43, 100)


def test_fixture_source_label():
    _, label = load_spec("fixture:credit_basic")
    assert label == "fixture:credit_basic"


def test_decimal_and_fraction_strings_are_exact():
    doc = {
        "kind": "trading",
        "suppliers": [{"weight": {"mass": "0.5"}, "h1": "1/3", "v": "1/3", "h0": 1}],
        "demanders": [{"weight": {"mass": 0.5}, "eta1": 1, "eta0": "2"}],
    }
    spec = parse_spec(doc)
    assert spec.suppliers[0].weight.mass == F(1, 2)
    assert spec.suppliers[0].v == F(1, 3)


@pytest.mark.parametrize(
    "doc, path",
    [
        ({"kind": "barter", "suppliers": [], "demanders": []}, "kind"),
        ({"kind": "trading", "suppliers": [{"weight": {"mass": "1"}, "h1": True, "v": 1}], "demanders": []},
         "suppliers.0.h1"),
        ({"kind": "trading", "suppliers": [], "demanders": [{"weight": {}, "eta1": 1}]}, "demanders.0.weight"),
        ({"kind": "trading", "suppliers": [], "demanders": [], "extra": 1}, "extra"),
        ({"kind": "credit", "suppliers": [], "demanders": [{"weight": {"mass": 1}, "eta1": 1, "eta0": 2}]},
         "demanders.0.project"),
    ],
)
def test_field_paths_in_errors(doc, path):
    with pytest.raises(SpecError) as info:
        parse_spec(doc)
    assert any(path in where or path in msg for where, msg in info.value.issues)


def test_mass_and_segment_are_exclusive():
    doc = {"kind": "trading", "suppliers": [], "demanders": [{"weight": {"mass": 1, "lo": 0}, "eta1": 1}]}
    with pytest.raises(SpecError, match="either mass"):
        parse_spec(doc)


def test_unreadable_and_invalid_files(tmp_path):
    with pytest.raises(SpecError, match="cannot read"):
        load_spec(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(SpecError, match="line 1"):
        load_spec(str(bad))
