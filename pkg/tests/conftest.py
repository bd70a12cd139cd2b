import pytest
import torch
from hypothesis import strategies as st

from orsgg.graph import SceneGraph, Triplet
from orsgg.vocab import ENTITIES, PREDICATES

torch.set_num_threads(1)


@st.composite
def triplets(draw):
    s = draw(st.sampled_from(ENTITIES))
    o = draw(st.sampled_from([e for e in ENTITIES if e != s]))
    return Triplet(s, o, draw(st.sampled_from(PREDICATES)))


@st.composite
def graphs(draw, max_size=12, timepoint_id=None):
    ts = draw(st.lists(triplets(), max_size=max_size, unique=True))
    tid = draw(st.integers(0, 10_000)) if timepoint_id is None else timepoint_id
    return SceneGraph(tid, tuple(ts))


@pytest.fixture(scope="session")
def tiny_corpus():
    from orsgg.synth.dataset import DatasetConfig, generate_corpus
    from orsgg.synth.scenario import SynthConfig

    cfg = DatasetConfig(n_scenarios=3, seed=0, synth=SynthConfig(total_timepoints=24, height=32, width=32, skew=0.0))
    return generate_corpus(cfg)


@pytest.fixture(scope="session")
def tiny_model_config():
    from orsgg.encoders import EncoderConfig
    from orsgg.model import ModelConfig

    enc = EncoderConfig(image_size=32, patch=8, d_enc=16, heads=2, n_image_tokens=4, pc_hidden=16,
                        audio_bands=8, audio_channels=8, mask_channels=4)
    return ModelConfig(d_model=16, n_layers=1, n_heads=2, d_ff=32, max_seq_len=1024, encoder=enc)


# One pass/fail line per acceptance criterion, printed after the run.
_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    n = mark.args[0]
    if rep.when == "call" or n not in _CRITERIA:
        _CRITERIA[n] = ("PASS" if rep.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")
