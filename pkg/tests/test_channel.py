import io

import numpy as np
import pytest

from rssiloc.channel import (AnchorConfig, ChannelModel, Deployment, measure,
                             generate_dataset, load_testbed_config,
                             reference_deployment, rssi_at)
from rssiloc.data import GridSpec, UNKNOWN_TEST_POINTS, reference_grid
from rssiloc.errors import OutOfRange, ParseError
from rssiloc.mlp import Position


class TestAnchorConfig:
    def test_id_subsets(self):
        assert AnchorConfig.TWO_A.ids == (2, 4)
        assert AnchorConfig.TWO_B.ids == (1, 4)
        assert AnchorConfig.THREE_A.ids == (1, 2, 4)
        assert AnchorConfig.THREE_B.ids == (1, 3, 5)
        assert AnchorConfig.FOUR.ids == (1, 2, 4, 5)
        assert AnchorConfig.FIVE.ids == (1, 2, 3, 4, 5)

    def test_from_name(self):
        assert AnchorConfig.from_name("Three_B") is AnchorConfig.THREE_B
        with pytest.raises(ValueError, match="two_a"):
            AnchorConfig.from_name("seven")


class TestDeployment:
    def test_reference_layout(self):
        dep = reference_deployment()
        by_id = dict(dep.anchors)
        assert by_id[1] == Position(0.0, 0.0)
        assert by_id[3] == Position(3.6, 4.5)
        assert by_id[5] == Position(1.8, 2.25)

    def test_selected_ascending(self):
        dep = reference_deployment(AnchorConfig.THREE_B)
        assert [i for i, _ in dep.selected_anchors()] == [1, 3, 5]

    def test_validation(self):
        with pytest.raises(ValueError, match="unique"):
            Deployment(((1, Position(0, 0)), (1, Position(1, 1))),
                       AnchorConfig.TWO_B, (0, 0, 2, 2))
        with pytest.raises(ValueError, match="outside"):
            Deployment(((1, Position(5, 0)), (4, Position(1, 1))),
                       AnchorConfig.TWO_B, (0, 0, 2, 2))
        with pytest.raises(ValueError, match="unknown anchor ids"):
            Deployment(((1, Position(0, 0)),), AnchorConfig.TWO_B,
                       (0, 0, 2, 2))


class TestRssiAt:
    def test_reference_distance_gives_p0(self):
        assert rssi_at(ChannelModel(), 1.0, 0.0) == -45.0

    def test_one_decade_drop(self):
        model = ChannelModel(path_loss_exponent=2.0)
        assert rssi_at(model, 10.0, 0.0) == pytest.approx(-45.0 - 20.0)

    def test_below_reference_saturates(self):
        model = ChannelModel(shadowing_sigma_db=1.0)
        assert rssi_at(model, 0.2, 0.5) == rssi_at(model, 1.0, 0.5)

    def test_beyond_range_raises(self):
        with pytest.raises(OutOfRange):
            rssi_at(ChannelModel(), 40.0001, 0.0)

    def test_floor_clamp(self):
        model = ChannelModel()
        assert rssi_at(model, 39.0, -10.0) == -96.0

    def test_noiseless_strictly_decreasing(self):
        model = ChannelModel(shadowing_sigma_db=0.0, max_range_m=1000,
                             sensitivity_floor_dbm=-1000)
        distances = np.linspace(1.0, 100.0, 300)
        values = [rssi_at(model, d, 0.0) for d in distances]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_monte_carlo_shadowing_std(self):
        # sample std within 5% of sigma when clamping is inactive
        from rssiloc.rng import keyed_normal
        model = ChannelModel(shadowing_sigma_db=2.0)
        draws = np.array([rssi_at(model, 3.0, keyed_normal(3, i))
                          for i in range(10**5)])
        assert abs(draws.std(ddof=1) - 2.0) / 2.0 < 0.05


class TestMeasure:
    def test_four_config_counts(self):
        dep = reference_deployment(AnchorConfig.FOUR)
        inst = measure(dep, ChannelModel(seed=1), Position(1.0, 1.0))
        assert len(inst.readings) == 4
        assert len(inst.exchange_log) == 5

    def test_trace_is_request_then_ordered_beacons(self):
        dep = reference_deployment(AnchorConfig.THREE_B)
        inst = measure(dep, ChannelModel(seed=2), Position(2.0, 2.0))
        kinds = [m.kind for m in inst.exchange_log]
        assert kinds == ["request", "beacon", "beacon", "beacon"]
        assert inst.exchange_log[0].sender == "mobile"
        senders = [m.sender for m in inst.exchange_log[1:]]
        assert senders == ["anchor-1", "anchor-3", "anchor-5"]

    def test_colocated_anchor_reads_p0(self):
        dep = reference_deployment(AnchorConfig.TWO_B)
        inst = measure(dep, ChannelModel(shadowing_sigma_db=0.0, seed=0),
                       Position(0.0, 0.0))  # on top of anchor 1
        assert dict(inst.readings)[1] == -45.0

    def test_same_keys_identical_instances(self):
        dep = reference_deployment(AnchorConfig.FIVE)
        a = measure(dep, ChannelModel(seed=9), Position(1.5, 2.5), 3, 4)
        b = measure(dep, ChannelModel(seed=9), Position(1.5, 2.5), 3, 4)
        assert a == b

    def test_unreachable_anchor_named(self):
        dep = Deployment(((1, Position(0, 0)), (4, Position(90, 0))),
                         AnchorConfig.TWO_B, (0, 0, 100, 10))
        with pytest.raises(OutOfRange, match="anchor 4"):
            measure(dep, ChannelModel(seed=0), Position(0.5, 0.5))


class TestGenerateDataset:
    def test_reference_counts(self):
        dep = reference_deployment(AnchorConfig.FOUR)
        pool, unknown = generate_dataset(dep, ChannelModel(seed=1),
                                         reference_grid(), 25,
                                         UNKNOWN_TEST_POINTS, 15)
        assert len(pool) == 2350
        assert pool.point_count == 94
        assert len(unknown) == 105
        assert unknown.point_count == 7

    def test_noiseless_duplicates_identical(self):
        dep = reference_deployment(AnchorConfig.TWO_A)
        chan = ChannelModel(shadowing_sigma_db=0.0, seed=5)
        grid = GridSpec(rows=3, cols=3)
        a, _ = generate_dataset(dep, chan, grid, 2)
        b, _ = generate_dataset(dep, chan, grid, 2)
        assert np.array_equal(a.inputs, b.inputs)
        # both samples of a point carry the same noiseless reading
        assert np.array_equal(a.inputs[0], a.inputs[1])

    def test_no_reading_below_floor(self):
        dep = reference_deployment(AnchorConfig.FIVE)
        chan = ChannelModel(shadowing_sigma_db=30.0, seed=2)
        pool, _ = generate_dataset(dep, chan, GridSpec(rows=3, cols=3), 5)
        assert pool.inputs.min() >= -96.0

    def test_paired_noise_across_configs(self):
        # same seed: shared anchors see identical noise per (point, sample)
        grid = GridSpec(rows=4, cols=4)
        chan = ChannelModel(seed=31)
        five, _ = generate_dataset(
            reference_deployment(AnchorConfig.FIVE), chan, grid, 3)
        two, _ = generate_dataset(
            reference_deployment(AnchorConfig.TWO_A), chan, grid, 3)
        # columns of TWO_A are anchors 2 and 4 = columns 1 and 3 of FIVE
        assert np.array_equal(two.inputs[:, 0], five.inputs[:, 1])
        assert np.array_equal(two.inputs[:, 1], five.inputs[:, 3])

    def test_column_order_matches_ascending_ids(self):
        grid = GridSpec(rows=2, cols=2)
        chan = ChannelModel(shadowing_sigma_db=0.0, seed=0)
        dep = reference_deployment(AnchorConfig.THREE_B)
        pool, _ = generate_dataset(dep, chan, grid, 1)
        # first grid point is (0,0): anchor 1 at the origin is loudest
        assert pool.inputs[0, 0] == pool.inputs[:, 0].max()


class TestConfigFile:
    def test_defaults_when_empty(self):
        dep, chan = load_testbed_config(io.StringIO(""))
        assert dep == reference_deployment()
        assert chan == ChannelModel()

    def test_full_file(self):
        text = """
# synthetic testbed
anchor.1 = 0.0, 0.0
anchor.2 = 2.0, 0.0
anchor.3 = 2.0, 2.0
anchor.4 = 0.0, 2.0
anchor.5 = 1.0, 1.0
config = three_b
room = 0.0, 0.0, 2.0, 2.0
p0_dbm = -40
path_loss_exponent = 2.0
shadowing_sigma_db = 1.5
seed = 77
"""
        dep, chan = load_testbed_config(io.StringIO(text))
        assert dep.selection is AnchorConfig.THREE_B
        assert dict(dep.anchors)[5] == Position(1.0, 1.0)
        assert chan.p0_dbm == -40.0
        assert chan.seed == 77
        assert chan.d0_m == 1.0  # untouched default

    def test_bad_line_reports_number(self):
        with pytest.raises(ParseError, match="line 2"):
            load_testbed_config(io.StringIO("p0_dbm = -40\nbogus line\n"))

    def test_unknown_key_rejected(self):
        with pytest.raises(ParseError, match="unknown key"):
            load_testbed_config(io.StringIO("nonsense = 3\n"))
