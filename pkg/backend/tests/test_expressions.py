"""
Values and ILLUM expressions
"""

import pytest

from illum.core.config import settings
from illum.core.errors import MapKeyAbsent, Overflow, TypeMismatch, UnboundParameter
from illum.models.values import EMPTY_MAP, NULL, STAR, MapValue, Participant, TokenBag, ZERO
from illum.services.expressions import eval_expr, free_names, int_size, substitute
from illum.services.illum_syntax import parse_expr


def ev(source, **env):
    return eval_expr(parse_expr(source), env)


class TestTokenBag:
    def test_zero_entries_are_dropped(self):
        """Adding opposite amounts leaves the empty bag"""
        bag = TokenBag.of({"T": 3}) + TokenBag.of({"T": -3})
        assert bag.is_zero()
        assert bag == ZERO

    def test_covers_per_token(self):
        """covers compares every token separately"""
        big = TokenBag.of({"T": 5, "U": 1})
        assert big.covers(TokenBag.of({"T": 5}))
        assert not big.covers(TokenBag.of({"U": 2}))

    def test_canonical_order(self):
        """Bags built in different orders are equal"""
        assert TokenBag.of([("U", 1), ("T", 2)]) == TokenBag.of([("T", 2), ("U", 1)])
        assert str(TokenBag.of({"T": 2, "U": 1})) == "2:T + 1:U"

    def test_single_uses_default_token(self):
        """single() without a token id uses the configured default"""
        assert TokenBag.single(4).amount(settings.DEFAULT_TOKEN) == 4


class TestMapValue:
    def test_update_is_persistent(self):
        """update returns a new map and leaves the old one alone"""
        m = EMPTY_MAP.update(1, 10)
        assert m.lookup(1) == 10
        assert not EMPTY_MAP.contains(1)

    def test_missing_key(self):
        """Looking up an absent key is an error, get() falls back"""
        with pytest.raises(MapKeyAbsent):
            EMPTY_MAP.lookup(Participant("A"))
        assert EMPTY_MAP.get(Participant("A"), 0) == 0

    def test_keys_of_mixed_types(self):
        """Integers, participants and bytes can share one map"""
        m = MapValue.of([(b"k", 1), (Participant("A"), 2), (3, 4)])
        assert [k for k, _ in m.items()] == [3, Participant("A"), b"k"]


class TestEval:
    def test_arithmetic_and_comparison(self):
        """Integer operators and comparisons give integers"""
        assert ev("a + b - 1", a=3, b=4) == 6
        assert ev("a <= b", a=3, b=4) == 1
        assert ev("not (a == b)", a=3, b=3) == 0

    def test_booleans_are_integers(self):
        """true and false evaluate to 1 and 0"""
        assert ev("true and not false") == 1

    def test_overflow(self):
        """Results outside the signed range raise Overflow"""
        with pytest.raises(Overflow):
            ev("a + 1", a=settings.int_max)

    def test_type_mismatch(self):
        """Adding a participant to an integer is a type error"""
        with pytest.raises(TypeMismatch):
            ev("@A + 1")

    def test_equality_requires_equal_types(self):
        """Comparing an integer with a participant is a type error, not false"""
        with pytest.raises(TypeMismatch):
            ev("x == Null", x=0)
        assert ev("x != Null", x=Participant("A")) == 1

    def test_unbound_and_star(self):
        """Free names and the placeholder have no value"""
        with pytest.raises(UnboundParameter):
            ev("x + 1")
        with pytest.raises(UnboundParameter):
            ev("x", x=STAR)

    def test_size(self):
        """Sizes of integers, byte strings and maps"""
        assert ev("|x|", x=0) == 0
        assert ev("|x|", x=255) == 2
        assert ev("|0x0102|") == 2
        assert ev("|emptymap[1 -> 2]|") == 1
        assert int_size(-128) == 1

    def test_hash_is_bytes(self):
        """H() gives 32 bytes and is deterministic"""
        assert ev("H(5)") == ev("H(5)")
        assert len(ev("H(5)")) == 32

    def test_conditional_and_maps(self):
        """if-then-else, lookups, contains and get"""
        assert ev("if a > 1 then a else 0", a=5) == 5
        m = EMPTY_MAP.update(NULL, 7)
        assert ev("m[Null]", m=m) == 7
        assert ev("contains(m, Null)", m=m) == 1
        assert ev("get(m, @A, 3)", m=m) == 3


class TestSubstitution:
    def test_free_names(self):
        """free_names lists the parameters an expression reads"""
        assert free_names(parse_expr("a + b[c]")) == {"a", "b", "c"}

    def test_simultaneous(self):
        """Substitution is simultaneous, not sequential"""
        e = substitute(parse_expr("a - b"), {"a": parse_expr("b"), "b": parse_expr("a")})
        assert eval_expr(e, {"a": 1, "b": 10}) == 9
