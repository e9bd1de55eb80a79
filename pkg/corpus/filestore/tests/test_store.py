from ampdiv.testkit import assert_equal, assert_false, assert_true
from store import FileStore


def test_put_and_get():
    fs = FileStore()
    fs.put("report.txt", "quarterly")
    assert_equal("quarterly", fs.get("report.txt"))


def test_exists_after_put():
    fs = FileStore("archive")
    fs.put("notes.md", "draft")
    assert_true(fs.exists("notes.md"))
    assert_false(fs.exists("other.md"))


def test_delete():
    fs = FileStore()
    fs.put("tmp.log", "x")
    assert_true(fs.delete("tmp.log"))
    assert_equal(0, fs.get_count())


def test_path_of():
    fs = FileStore("/srv/files")
    assert_equal("/srv/files/photo.png", fs.path_of("photo.png"))
