#!/usr/bin/env python
"""
This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.
"""

import unittest

from hypothesis import given, strategies as st

from pymmog import protocol
from pymmog.datatype import TypeDescriptor
from pymmog.exception import DataError, ParseError
from pymmog.filter import And, Comparison, Not, Or, eval_filter, parse_filter

ENTITY = TypeDescriptor([('entity_id', 'u64'), ('kind', 'string'),
                         ('region', 'u32'), ('x', 'f32'), ('y', 'f32'),
                         ('alive', 'bool')], ['entity_id'])


def sample(**kw):
    values = {'entity_id': 1, 'kind': 'PLAYER', 'region': 3,
              'x': 10.0, 'y': 20.0, 'alive': True}
    values.update(kw)
    return values


class MmogFilterTest(unittest.TestCase):

    def test_region_set(self):
        expr = parse_filter('region == 3 OR region == 4', ENTITY)
        self.assertTrue(eval_filter(expr, sample(region=3)))
        self.assertTrue(eval_filter(expr, sample(region=4)))
        self.assertFalse(eval_filter(expr, sample(region=5)))

    def test_tree_shape(self):
        expr = parse_filter('region == 3 and not (x < 1.5 or kind != \'NPC\')',
                            ENTITY)
        self.assertEqual(expr.root,
                         And((Comparison('region', '==', 3),
                              Not(Or((Comparison('x', '<', 1.5),
                                      Comparison('kind', '!=', 'NPC')))))))
        self.assertEqual(expr.fields, frozenset(['region', 'x', 'kind']))

    def test_precedence(self):
        # AND binds tighter than OR
        expr = parse_filter('region == 1 OR region == 2 AND alive == false',
                            ENTITY)
        self.assertTrue(expr(sample(region=1, alive=True)))
        self.assertFalse(expr(sample(region=2, alive=True)))
        self.assertTrue(expr(sample(region=2, alive=False)))

    def test_keywords_case_insensitive(self):
        one = parse_filter('alive == TRUE And region >= 2', ENTITY)
        two = parse_filter('alive == true AND region >= 2', ENTITY)
        self.assertEqual(one, two)
        self.assertEqual(hash(one), hash(two))

    def test_string_escape(self):
        expr = parse_filter("kind == 'O''Brien'", ENTITY)
        self.assertTrue(expr(sample(kind="O'Brien")))

    def test_numeric_comparisons(self):
        expr = parse_filter('x >= 10 AND y < 20.5 AND region != 0', ENTITY)
        self.assertTrue(expr(sample()))
        self.assertFalse(expr(sample(x=9.99)))
        self.assertTrue(parse_filter('x > -1e2', ENTITY)(sample(x=-99.0)))

    def test_schema_mapping(self):
        expr = parse_filter('user.match == true AND card.approved == true',
                            {'user.match': 'bool', 'card.approved': 'bool'})
        self.assertTrue(expr({'user.match': True, 'card.approved': True}))
        self.assertFalse(expr({'user.match': True, 'card.approved': False}))

    def test_unknown_field(self):
        with self.assertRaises(DataError):
            parse_filter('speed > 3', ENTITY)

    def test_string_ordering_rejected(self):
        with self.assertRaises(DataError):
            parse_filter("kind < 'NPC'", ENTITY)

    def test_bool_ordering_rejected(self):
        with self.assertRaises(DataError):
            parse_filter('alive > false', ENTITY)

    def test_type_mismatch(self):
        for text in ("region == 'three'", 'region == true',
                     'kind == 3', 'alive == 1'):
            with self.assertRaises(DataError):
                parse_filter(text, ENTITY)

    def test_syntax_error_offset(self):
        with self.assertRaises(ParseError) as cm:
            parse_filter('region == 3 AND', ENTITY)
        self.assertEqual(cm.exception.offset, len('region == 3 AND'))
        self.assertEqual(cm.exception.code, protocol.PARSE_ERROR)

        with self.assertRaises(ParseError) as cm:
            parse_filter('region = 3', ENTITY)
        self.assertEqual(cm.exception.offset, 7)

        with self.assertRaises(ParseError) as cm:
            parse_filter('(region == 3', ENTITY)
        self.assertEqual(cm.exception.offset, 12)

    def test_offset_counts_bytes(self):
        with self.assertRaises(ParseError) as cm:
            parse_filter(u"kind == 'é' #", ENTITY)
        self.assertEqual(cm.exception.offset, 13)

    @given(st.integers(min_value=0, max_value=255),
           st.integers(min_value=0, max_value=255))
    def test_region_comparison(self, region, bound):
        expr = parse_filter('region <= %d' % (bound), ENTITY)
        self.assertEqual(expr(sample(region=region)), region <= bound)
        negated = parse_filter('NOT region <= %d' % (bound), ENTITY)
        self.assertEqual(negated(sample(region=region)), region > bound)


if __name__ == '__main__':
    unittest.main()
