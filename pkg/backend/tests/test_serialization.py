"""
JSON artifacts
"""

import json

import pytest

from illum.models.runs import ComputationalRun, SymbolicRun
from illum.models.values import EMPTY_MAP, STAR, TokenBag
from illum.services.serialization import ArtifactError, dumps, load, load_run, loads, save, save_run
from illum.services.simulator import Lockstep

from tests.conftest import A, B, C, wait_actions


@pytest.fixture
def wait_sim(wait_program, keys, wait_deposits):
    sim = Lockstep(wait_program, keys, (A, B, C)).start(wait_deposits, 3)
    for act in wait_actions(wait_program)[0]:
        sim.perform(act)
    return sim


class TestArtifacts:
    def test_runs_survive(self, wait_sim):
        assert loads(dumps(wait_sim.rs)) == wait_sim.rs
        assert loads(dumps(wait_sim.rc)) == wait_sim.rc

    def test_canonical_text(self, wait_sim):
        """Equal objects give byte-identical artifacts"""
        assert dumps(loads(dumps(wait_sim.rc))) == dumps(wait_sim.rc)
        assert json.loads(dumps(wait_sim.rc))["kind"] == "ComputationalRun"

    def test_special_values(self):
        value = (STAR, b"\x01\x02", EMPTY_MAP.update(A, 3), frozenset({1, 2}), {A: TokenBag.single(4)})
        assert loads(dumps(value)) == value

    def test_save_and_load(self, wait_sim, tmp_path):
        path = tmp_path / "chain.json"
        save(wait_sim.chain, path)
        assert [e.tx_id for e in load(path).entries] == [e.tx_id for e in wait_sim.chain.entries]

    def test_run_artifact(self, wait_sim, wait_program, tmp_path):
        """A run artifact carries its clause table and, optionally, the maps"""
        path = tmp_path / "symbolic_run.json"
        save_run(wait_sim.rs, wait_program, path, wait_sim.maps)
        rs, program, maps = load_run(path)
        assert isinstance(rs, SymbolicRun) and rs == wait_sim.rs
        assert program == wait_program
        assert maps.txout == wait_sim.maps.txout
        save_run(wait_sim.rc, wait_program, path)
        rc, _, maps = load_run(path)
        assert isinstance(rc, ComputationalRun)
        assert maps is None


class TestArtifactErrors:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ArtifactError) as info:
            load(tmp_path / "absent.json")
        assert info.value.code == "MissingArtifact"
        with pytest.raises(ArtifactError) as info:
            load_run(tmp_path / "absent.json")
        assert info.value.code == "MissingArtifact"

    @pytest.mark.parametrize("text", [
        "not json",
        '{"kind": "x"}',
        '{"kind": "x", "data": {"$type": "NoSuchThing"}}',
        '{"kind": "x", "data": {"$type": "TokenBag", "bogus": 1}}',
    ])
    def test_malformed(self, text):
        with pytest.raises(ArtifactError) as info:
            loads(text)
        assert info.value.code == "MalformedArtifact"

    def test_not_a_run(self, tmp_path):
        """A plain artifact is not a run artifact"""
        path = tmp_path / "bag.json"
        save(TokenBag.single(1), path)
        with pytest.raises(ArtifactError) as info:
            load_run(path)
        assert info.value.code == "MalformedArtifact"
