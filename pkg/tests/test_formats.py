import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asa.datagen import FrameDataset
from asa.errors import FormatError, ShapeError, UnsupportedVersionError
from asa.formats import (
    check_compatible,
    checkpoint_bytes,
    dataset_bytes,
    load_checkpoint,
    load_dataset,
    parse_checkpoint,
    parse_dataset,
    save_checkpoint,
    save_dataset,
)
from asa.models import AcousticModel, Discriminator, ModelRole, classify_senones, init_acoustic_network, init_discriminator, split_model


def small_dataset(T=7, dim=3, k=4, seed=0):
    rng = np.random.default_rng(seed)
    return FrameDataset(rng.normal(size=(T, dim)), rng.integers(0, k, T), "spk-é", k)


def test_dataset_round_trip(tmp_path):
    d = small_dataset()
    save_dataset(d, tmp_path / "d.asad")
    e = load_dataset(tmp_path / "d.asad")
    assert e.features.tobytes() == d.features.tobytes()
    assert e.labels.tolist() == d.labels.tolist()
    assert e.speaker_id == d.speaker_id and e.num_senones == d.num_senones


def test_dataset_header_layout():
    buf = dataset_bytes(small_dataset(T=2, dim=3, k=4))
    assert buf[:4] == b"ASAD"
    assert struct.unpack("<IIII", buf[4:20]) == (1, 2, 3, 4)
    name_len = struct.unpack("<I", buf[20:24])[0]
    assert buf[24:24 + name_len].decode() == "spk-é"
    assert len(buf) == 24 + name_len + 2 * 3 * 8 + 2 * 4


def test_empty_dataset_round_trips():
    d = FrameDataset(np.zeros((0, 5)), np.zeros(0, dtype=int), "empty", 3)
    e = parse_dataset(dataset_bytes(d))
    assert e.features.shape == (0, 5) and len(e) == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 20), st.integers(1, 6), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_dataset_round_trip_is_bitwise(T, dim, k, seed):
    d = small_dataset(T, dim, k, seed)
    assert dataset_bytes(parse_dataset(dataset_bytes(d))) == dataset_bytes(d)


def test_bad_magic_reports_offset_zero():
    buf = bytearray(dataset_bytes(small_dataset()))
    buf[0:4] = b"XXXX"
    with pytest.raises(FormatError) as e:
        parse_dataset(bytes(buf))
    assert e.value.offset == 0
    assert "offset 0" in str(e.value)


def test_truncated_dataset():
    buf = dataset_bytes(small_dataset())
    with pytest.raises(FormatError) as e:
        parse_dataset(buf[:-3])
    assert e.value.offset > 0


def test_trailing_bytes_rejected():
    with pytest.raises(FormatError):
        parse_dataset(dataset_bytes(small_dataset()) + b"\0")


@pytest.mark.parametrize("parse, data", [
    (parse_dataset, lambda: dataset_bytes(small_dataset())),
    (parse_checkpoint, lambda: checkpoint_bytes(init_discriminator(3, (4,), seed=0))),
])
def test_version_bump_is_unsupported(parse, data):
    buf = bytearray(data())
    buf[4:8] = struct.pack("<I", 2)
    with pytest.raises(UnsupportedVersionError) as e:
        parse(bytes(buf))
    assert e.value.offset == 4


def am(seed=0, n_h=2):
    return split_model(init_acoustic_network(5, [6, 4, 3], 4, seed), n_h)


def test_checkpoint_round_trip_preserves_posteriors(tmp_path):
    m = am()
    m.role = ModelRole.SD
    save_checkpoint(m, tmp_path / "m.asam")
    back = load_checkpoint(tmp_path / "m.asam")
    assert isinstance(back, AcousticModel)
    assert back.split_index == 2 and back.role is ModelRole.SD
    X = np.random.default_rng(1).normal(size=(8, 5))
    assert classify_senones(back, X).tobytes() == classify_senones(m, X).tobytes()
    assert checkpoint_bytes(back) == checkpoint_bytes(m)


def test_discriminator_round_trip():
    d = init_discriminator(4, (8, 8), seed=3)
    back = parse_checkpoint(checkpoint_bytes(d))
    assert isinstance(back, Discriminator)
    assert all(a.tobytes() == b.tobytes() for a, b in zip(back.net.parameters(), d.net.parameters()))


def test_checkpoint_bytes_are_deterministic():
    assert checkpoint_bytes(am(seed=4)) == checkpoint_bytes(am(seed=4))


def test_checkpoint_metadata_mismatch_detected():
    buf = checkpoint_bytes(am())
    tampered = buf.replace(b'"r_x":5', b'"r_x":6')
    assert tampered != buf
    with pytest.raises(FormatError):
        parse_checkpoint(tampered)


def test_checkpoint_truncation_detected():
    buf = checkpoint_bytes(am())
    for cut in (3, 10, len(buf) // 2, len(buf) - 1):
        with pytest.raises(FormatError):
            parse_checkpoint(buf[:cut])


def test_mismatched_input_dim_rejected_before_training():
    with pytest.raises(ShapeError):
        check_compatible(am(), small_dataset(dim=3, k=4))
    with pytest.raises(ShapeError):
        check_compatible(am(), small_dataset(dim=5, k=3))
    check_compatible(am(), small_dataset(dim=5, k=4))
