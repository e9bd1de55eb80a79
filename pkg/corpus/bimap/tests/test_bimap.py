from ampdiv.testkit import assert_equal, assert_false, assert_is_none, assert_true
from bimap import BiMap


def test_put_get():
    m = BiMap()
    m.put("one", 1)
    m.put("two", 2)
    assert_equal(1, m.get("one"))
    assert_equal("two", m.inverse_get(2))


def test_overwrite():
    m = BiMap()
    m.put("k", 10)
    assert_equal(10, m.put("k", 20))
    assert_is_none(m.inverse_get(10))


def test_remove():
    m = BiMap()
    m.put("a", True)
    m.remove("a")
    assert_false(m.contains_key("a"))
    assert_true(m.is_empty())


def test_many_entries():
    m = BiMap()
    for i in range(0, 5):
        m.put(i, -i - 100)
    assert_equal(5, m.size())
    assert_equal(3, m.inverse_get(-103))
