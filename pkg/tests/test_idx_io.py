"""IDX parsing, dataset pairing, and parser totality."""

import gzip
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_idx_images, make_idx_labels
from knndigits.errors import (
    BadLabel, BadMagic, BadShape, CountMismatch, TruncatedFile,
)
from knndigits.idx_io import (
    Dataset, Split, load_dataset, parse_idx_images, parse_idx_labels,
)

DECLARED = (BadMagic, TruncatedFile, BadShape, BadLabel)


def test_single_zero_image():
    data = struct.pack(">IIII", 0x00000803, 1, 28, 28) + bytes(784)
    images = parse_idx_images(data)
    assert images.shape == (1, 784)
    assert not images.any()


def test_label_magic_fed_to_image_parser():
    data = struct.pack(">II", 0x00000801, 3) + bytes([5, 0, 4])
    with pytest.raises(BadMagic):
        parse_idx_images(data)


def test_image_magic_fed_to_label_parser():
    with pytest.raises(BadMagic):
        parse_idx_labels(make_idx_images(np.zeros((1, 784), np.uint8)))


def test_labels_direct_copy():
    data = struct.pack(">II", 0x00000801, 3) + bytes([5, 0, 4])
    assert parse_idx_labels(data).tolist() == [5, 0, 4]


def test_label_out_of_range():
    data = struct.pack(">II", 0x00000801, 3) + bytes([5, 12, 4])
    with pytest.raises(BadLabel):
        parse_idx_labels(data)


def test_non_28x28_rejected():
    data = struct.pack(">IIII", 0x00000803, 1, 14, 14) + bytes(196)
    with pytest.raises(BadShape):
        parse_idx_images(data)


@pytest.mark.parametrize("cut", [0, 3, 10, 15, 700])
def test_truncated_image_payload(cut):
    data = make_idx_images(np.zeros((2, 784), np.uint8))
    with pytest.raises(TruncatedFile):
        parse_idx_images(data[:cut] if cut < 16 else data[:-cut])


def test_trailing_garbage_rejected():
    with pytest.raises(TruncatedFile):
        parse_idx_images(make_idx_images(np.zeros((1, 784), np.uint8)) + b"x")
    with pytest.raises(TruncatedFile):
        parse_idx_labels(make_idx_labels([1, 2]) + b"x")


def test_gzip_transparent():
    raw = make_idx_images(np.arange(784, dtype=np.uint8).reshape(1, 784) % 200)
    assert (parse_idx_images(gzip.compress(raw)) == parse_idx_images(raw)).all()
    raw_labels = make_idx_labels([3, 1, 4])
    assert (parse_idx_labels(gzip.compress(raw_labels)) == [3, 1, 4]).all()


def test_corrupt_gzip_stream():
    with pytest.raises(TruncatedFile):
        parse_idx_images(b"\x1f\x8b" + b"\x00" * 20)


def test_load_dataset_pairs(tmp_path):
    img = tmp_path / "i"
    lbl = tmp_path / "l"
    img.write_bytes(make_idx_images(np.full((1, 784), 7, np.uint8)))
    lbl.write_bytes(make_idx_labels([9]))
    ds = load_dataset(img, lbl, Split.TRAIN)
    assert len(ds) == 1
    assert ds.labels[0] == 9
    assert ds.split is Split.TRAIN


def test_load_dataset_count_mismatch(tmp_path):
    img = tmp_path / "i"
    lbl = tmp_path / "l"
    img.write_bytes(make_idx_images(np.zeros((2, 784), np.uint8)))
    lbl.write_bytes(make_idx_labels([1, 2, 3]))
    with pytest.raises(CountMismatch):
        load_dataset(img, lbl, Split.TRAIN)


def test_dataset_take_prefix():
    ds = Dataset(
        np.zeros((5, 784), np.uint8), np.arange(5, dtype=np.uint8), Split.TEST
    )
    assert ds.take(2).labels.tolist() == [0, 1]
    assert ds.take(99) is ds


images_arrays = st.integers(0, 4).flatmap(
    lambda n: st.binary(min_size=n * 784, max_size=n * 784).map(
        lambda b: np.frombuffer(b, np.uint8).reshape(n, 784)
    )
)


@given(images_arrays)
def test_image_round_trip(images):
    assert (parse_idx_images(make_idx_images(images)) == images).all()


@given(st.lists(st.integers(0, 9), max_size=64))
def test_label_round_trip(labels):
    parsed = parse_idx_labels(make_idx_labels(labels))
    assert parsed.tolist() == labels


@settings(max_examples=300)
@given(st.binary(max_size=2048))
def test_parser_totality_on_noise(blob):
    """Arbitrary bytes either parse or raise exactly one declared error."""
    for parser in (parse_idx_images, parse_idx_labels):
        try:
            out = parser(blob)
        except DECLARED:
            pass
        else:
            assert isinstance(out, np.ndarray)


@given(st.binary(max_size=900), st.integers(0, 3), st.integers(0, 2**32 - 1))
def test_parser_totality_near_valid(payload, magic_pick, count):
    """Plausible headers with arbitrary payloads stay total too."""
    magic = [0x00000803, 0x00000801, 0, 0xFFFFFFFF][magic_pick]
    blob = struct.pack(">II", magic, count) + payload
    for parser in (parse_idx_images, parse_idx_labels):
        try:
            parser(blob)
        except DECLARED:
            pass
