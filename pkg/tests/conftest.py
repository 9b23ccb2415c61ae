import pytest

from igkeywords.corpus import LabelSpace, SynthConfig, generate_synthetic


@pytest.fixture
def label_space():
    return LabelSpace(("HI", "ID", "IN", "NA"))


@pytest.fixture(scope="session")
def small_synth():
    """Shared small synthetic corpus: 4 classes, 40 docs each."""
    config = SynthConfig(num_classes=4, docs_per_class=40,
                         background_vocab_size=400, markers_per_class=3,
                         marker_injection_prob=0.9, doc_length=(15, 30),
                         multilabel_prob=0.1)
    return generate_synthetic(config, seed=123)
