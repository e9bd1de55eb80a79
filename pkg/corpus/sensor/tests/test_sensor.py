from ampdiv.testkit import assert_almost_equal, assert_equal, assert_true
from sensor import Sensor


def test_record_and_summarize():
    probe = Sensor("kitchen", 2.0)
    probe.record(10.5)
    probe.record(11.0)
    stats = probe.summarize()
    assert_equal(2, stats.count)
    assert_almost_equal(43.0, stats.total, 1e-9)
    assert_almost_equal(21.5, stats.get_mean(), 1e-9)
    assert_equal(22.0, probe.get_last())
    assert_equal("kitchen [C]", probe.get_label())
    assert_true(probe.is_active())
