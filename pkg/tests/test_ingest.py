import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtwsoh.errors import (
    ChannelLengthMismatch,
    InvalidConfig,
    MissingColumn,
    NonContiguousCycleIds,
    NonFiniteValue,
    ValidationError,
)
from dtwsoh.ingest import (
    BatteryDataset,
    CycleRecord,
    SynthConfig,
    b18_like_config,
    generate_synthetic,
    load_dataset,
    write_dataset,
)

HEADER = "cycle_id,tick_index,temperature_C,current_A,voltage_V,capacity_Ah\n"


def _write(tmp_path, body, header=HEADER, name="d.csv"):
    p = tmp_path / name
    p.write_text(header + body, encoding="utf-8")
    return p


def _rows(cid, n, cap=1.8):
    return "".join(f"{cid},{k},25.0,-2.0,{4.2 - 0.1 * k:.3f},{cap}\n" for k in range(n))


def test_fixture_lengths(three_cycles):
    assert len(three_cycles) == 3
    assert three_cycles.lengths == [5, 4, 4]
    assert [c.cycle_id for c in three_cycles] == [1, 2, 3]
    assert three_cycles.cycle(2).capacity == pytest.approx(1.80)


def test_non_contiguous_ids(tmp_path):
    p = _write(tmp_path, _rows(1, 3) + _rows(3, 3) + _rows(4, 3))
    with pytest.raises(NonContiguousCycleIds, match="cycle_id 3"):
        load_dataset(p)


def test_missing_column(tmp_path):
    p = _write(tmp_path, "1,0,25,-2,4.2\n", header="cycle_id,tick_index,temperature_C,current_A,voltage_V\n")
    with pytest.raises(MissingColumn, match="capacity_Ah"):
        load_dataset(p)


def test_non_finite_names_row(tmp_path):
    body = _rows(1, 3) + "2,0,25.0,-2.0,nan,1.7\n2,1,25.0,-2.0,4.0,1.7\n" + _rows(3, 3)
    with pytest.raises(NonFiniteValue, match=r"row 5 \(cycle 2\)"):
        load_dataset(_write(tmp_path, body))


def test_blank_channel_is_length_mismatch(tmp_path):
    body = _rows(1, 3) + "2,0,25.0,,4.1,1.7\n" + _rows(3, 3)
    with pytest.raises(ChannelLengthMismatch, match="cycle 2"):
        load_dataset(_write(tmp_path, body))


def test_voltage_band_and_capacity(tmp_path):
    with pytest.raises(ValidationError, match="outside"):
        load_dataset(_write(tmp_path, _rows(1, 3) + "2,0,25,-2,11.5,1.7\n2,1,25,-2,4,1.7\n" + _rows(3, 2)))
    with pytest.raises(ValidationError, match="capacity"):
        load_dataset(_write(tmp_path, _rows(1, 3) + _rows(2, 3, cap=0.0) + _rows(3, 3), name="c.csv"))


def test_single_tick_cycle_rejected(tmp_path):
    with pytest.raises(ValidationError, match="at least 2 ticks"):
        load_dataset(_write(tmp_path, _rows(1, 3) + _rows(2, 1) + _rows(3, 3)))


def test_cycle_record_channel_mismatch():
    with pytest.raises(ChannelLengthMismatch):
        CycleRecord(1, [1, 2, 3], [1, 2], [4, 3, 2], 1.0).validate()


def test_round_trip(tmp_path, small_synth):
    p = write_dataset(small_synth, tmp_path / "rt.csv")
    back = load_dataset(p, battery_id=small_synth.battery_id)
    assert back == small_synth
    raw = p.read_bytes()
    assert b"\r" not in raw
    assert raw.splitlines()[1].decode().split(",")[2].count(".") == 1


def test_writer_format(tmp_path, three_cycles):
    p = write_dataset(three_cycles, tmp_path / "w.csv")
    lines = p.read_text().splitlines()
    assert lines[0] == HEADER.strip()
    assert lines[1] == "1,0,25.000000,-2.000000,4.200000,1.860000"


def test_synthetic_deterministic(tmp_path):
    cfg = SynthConfig(n_cycles=100, fade_rate=0.003)
    a = write_dataset(generate_synthetic(cfg, 42), tmp_path / "a.csv").read_bytes()
    b = write_dataset(generate_synthetic(cfg, 42), tmp_path / "b.csv").read_bytes()
    assert a == b


def test_synthetic_seed_changes_capacity():
    cfg = SynthConfig(n_cycles=60, regen_probability=0.1)
    a = generate_synthetic(cfg, 42).capacities
    b = generate_synthetic(cfg, 43).capacities
    assert not np.array_equal(a, b)


def test_no_regeneration_strictly_decreasing():
    caps = generate_synthetic(SynthConfig(n_cycles=80, regen_probability=0.0), 3).capacities
    assert np.all(np.diff(caps) < 0)


def test_regeneration_raises_capacity_and_length():
    ds = generate_synthetic(SynthConfig(n_cycles=120, regen_probability=0.15, regen_gain=0.04), 9)
    caps = ds.capacities
    lengths = np.array(ds.lengths)
    ups = np.flatnonzero(np.diff(caps) > 0)
    assert ups.size > 0
    assert np.all(lengths[ups + 1] > lengths[ups])
    # outside regeneration events capacity only falls
    downs = np.setdiff1d(np.arange(len(caps) - 1), ups)
    assert np.all(np.diff(caps)[downs] < 0)


def test_length_tracks_capacity():
    cfg = SynthConfig(n_cycles=50)
    ds = generate_synthetic(cfg, 1)
    expected = [max(2, round(cfg.base_length * c.capacity / cfg.initial_capacity)) for c in ds]
    # capacity is stored rounded to 1e-6, so allow a one-tick rounding flip
    assert np.max(np.abs(np.array(ds.lengths) - expected)) <= 1
    assert ds.lengths[0] == cfg.base_length


def test_b18_like_lengths(b18_like):
    assert len(b18_like) == 132
    assert b18_like.lengths[0] == 357
    assert b18_like.lengths[-1] == 178
    assert min(b18_like.lengths) == 178


def test_channel_shapes():
    ds = generate_synthetic(SynthConfig(n_cycles=10, regen_probability=0.0, voltage_noise=0.0), 0)
    for c in ds:
        assert np.all(np.diff(c.voltage) <= 0)
        assert c.voltage[0] == pytest.approx(4.2, abs=1e-6)
        assert c.voltage[-1] == pytest.approx(2.5, abs=1e-6)
        assert np.all(np.abs(c.current + 2.0) <= 0.004 + 1e-9)
        peak = int(np.argmax(c.temperature))
        assert 0 < peak < len(c) - 1


@pytest.mark.parametrize("field,value", [("n_cycles", 2), ("initial_capacity", 0.0), ("base_length", 1),
                                         ("fade_rate", -0.1), ("regen_probability", 1.5)])
def test_invalid_config(field, value):
    with pytest.raises(InvalidConfig):
        generate_synthetic(SynthConfig(**{field: value}), 0)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(3, 30), fade=st.floats(0.0005, 0.03), regen=st.floats(0.0, 0.5),
       base=st.integers(10, 120), seed=st.integers(0, 2**16))
def test_generated_cycles_valid(n, fade, regen, base, seed):
    ds = generate_synthetic(SynthConfig(n_cycles=n, fade_rate=fade, regen_probability=regen, base_length=base), seed)
    ds.validate()
    assert [c.cycle_id for c in ds] == list(range(1, n + 1))
    if fade * base >= 1.0:
        assert len(set(ds.lengths)) > 1


def test_dataset_needs_three_cycles(tmp_path):
    with pytest.raises(ValidationError, match="at least 3"):
        load_dataset(_write(tmp_path, _rows(1, 3) + _rows(2, 3)))
    assert len(load_dataset(_write(tmp_path, _rows(1, 3), name="one.csv"), min_cycles=1)) == 1


def test_dataset_equality_ignores_rated_capacity(three_cycles):
    other = BatteryDataset(three_cycles.battery_id, three_cycles.cycles, rated_capacity=2.0)
    assert other == three_cycles
