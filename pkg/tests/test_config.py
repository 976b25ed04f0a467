import pytest
from hypothesis import given
from hypothesis import strategies as st

from persistence_lab.config import RunConfig, load_config, parse_config, serialize_config
from persistence_lab.errors import DomainError

floats = st.floats(allow_nan=False) | st.none()
ints = st.integers(-(2**63), 2**64) | st.none()
words = st.text(st.characters(whitelist_categories=("L", "N"), whitelist_characters="/._-"), min_size=1) | st.none()

configs = st.builds(
    RunConfig,
    alpha=floats, kappa=floats, chi=floats, beta=floats, pv_epsilon=floats, level=floats,
    paths=ints, steps=ints, horizon=floats, seed=ints, threads=ints, bandwidth=floats,
    max_blocks=ints, n=ints, suite=words, out=words,
)


@given(configs)
def test_round_trip(cfg):
    assert parse_config(serialize_config(cfg)) == cfg


def test_example():
    cfg = parse_config("alpha = 1.5\n# a comment\nchi=-1   # trailing\n\nmax-blocks = 8\nout = runs/a\n")
    assert cfg == RunConfig(alpha=1.5, chi=-1.0, max_blocks=8, out="runs/a")
    assert isinstance(cfg.chi, float) and isinstance(cfg.max_blocks, int)


def test_unknown_key_is_named():
    with pytest.raises(DomainError, match="'gamma'"):
        parse_config("alpha = 2\ngamma = 3\n")


@pytest.mark.parametrize("text", ["paths = 1.5", "alpha = two", "alpha 2"])
def test_bad_lines(text):
    with pytest.raises(DomainError, match="line 1|paths|alpha"):
        parse_config(text)


def test_merge_prefers_other():
    a = RunConfig(alpha=1.5, seed=1)
    b = RunConfig(seed=2, paths=100)
    assert a.merged(b) == RunConfig(alpha=1.5, seed=2, paths=100)
    assert a.merged(b).get("kappa", 1.0) == 1.0


def test_load(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("seed = 7\n", encoding="utf-8")
    assert load_config(str(path)).seed == 7
    with pytest.raises(DomainError, match="not found"):
        load_config(str(tmp_path / "missing.cfg"))
