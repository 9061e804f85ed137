import pytest
from hypothesis import given
from hypothesis import strategies as st

from procnet.kernel import FatalError
from procnet.protocol import (
    COMPLETED_OK,
    Data,
    LogSummary,
    Terminator,
    check_rc,
    is_error,
    is_terminator,
    terminator_merge,
)


def test_data_is_not_terminator():
    assert is_terminator(Data(5)) is False


def test_terminator_is_terminator():
    assert is_terminator(Terminator()) is True


def test_variant_not_payload_decides():
    assert is_terminator(Data(Terminator())) is False


def test_merge_empty():
    assert terminator_merge(Terminator(), Terminator()).logs == []


def test_merge_concatenates_in_order():
    r1, r2 = LogSummary("a", 1), LogSummary("b", 2)
    assert terminator_merge(Terminator([r1]), Terminator([r2])).logs == [r1, r2]


def test_merge_rejects_non_terminator():
    with pytest.raises(FatalError):
        terminator_merge(Terminator(), Data(1))


@given(
    st.lists(st.integers(), max_size=5),
    st.lists(st.integers(), max_size=5),
    st.lists(st.integers(), max_size=5),
)
def test_merge_associative_on_log_multisets(a, b, c):
    x, y, z = Terminator(a), Terminator(b), Terminator(c)
    left = terminator_merge(terminator_merge(x, y), z).logs
    right = terminator_merge(x, terminator_merge(y, z)).logs
    assert sorted(left) == sorted(right)
    assert left == right  # concatenation is associative outright


def test_error_codes_strictly_negative():
    assert is_error(-1) and not is_error(0) and not is_error(2)


def test_check_rc_passes_ok_codes():
    assert check_rc(COMPLETED_OK, "cb") == COMPLETED_OK


def test_check_rc_raises_with_user_code():
    with pytest.raises(FatalError) as e:
        check_rc(-42, "cb")
    assert e.value.code == -42
