#!/usr/bin/env python
"""
This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.
"""

import io
import unittest

from pymmog import protocol, sqlstore
from pymmog.datatype import Date
from pymmog.exception import (DataError, Error, IntegrityError, ParseError,
                              ProgrammingError)
from pymmog.webapp import fixture_path


def fixture_script():
    with io.open(fixture_path('user_accounts.sql'), encoding='utf-8') as f:
        return f.read()


class MmogSqlTest(unittest.TestCase):

    def setUp(self):
        self.db = sqlstore.Database()
        self.db.run_script(fixture_script())
        self.cursor = sqlstore.connect(self.db).cursor()

    def test_fixture_query(self):
        self.cursor.execute("SELECT user_privilege, account_expiration_date "
                            "FROM user_accounts WHERE user_login = 'Max'")
        self.assertEqual(self.cursor.fetchall(), [('Full', '09/10/2014')])
        self.assertEqual([d[0] for d in self.cursor.description],
                         ['user_privilege', 'account_expiration_date'])

    def test_fixture_shape(self):
        table = self.db.table('USER_ACCOUNTS')
        self.assertEqual(self.db.name, 'game_data')
        self.assertEqual(len(table.rows), 2)
        # the misspelt fixture column maps onto the account field name
        self.assertEqual(table.columns[2].name, 'user_privilege')
        self.assertEqual(table.columns[0].name, table.columns[table.key_index].name)
        self.assertEqual(table.rows[1][4], Date(2013, 5, 11))

    def test_select_star_and_misses(self):
        self.cursor.execute("select * from user_accounts where USER_LOGIN == 'nobody';")
        self.assertEqual(self.cursor.rowcount, 0)
        self.assertIsNone(self.cursor.fetchone())
        self.cursor.execute("SELECT * FROM user_accounts")
        self.assertEqual(len(self.cursor.description), 5)
        self.assertEqual(self.cursor.fetchmany(1)[0][0], 'Max')
        self.assertEqual([row[0] for row in self.cursor], ['John123'])

    def test_where_on_date(self):
        self.cursor.execute("SELECT user_login FROM user_accounts "
                            "WHERE account_creation_date = '05/11/2008'")
        self.assertEqual(self.cursor.fetchall(), [('John123',)])

    def test_where_literal_that_cannot_match(self):
        for where in ("user_login = '%s'" % ('x' * 40),
                      "account_creation_date = '2008-05-11'",
                      "account_creation_date = '13/45/2008'"):
            self.cursor.execute("SELECT user_login FROM user_accounts WHERE " + where)
            self.assertEqual(self.cursor.fetchall(), [], where)

    def test_insert_with_columns(self):
        self.cursor.execute("INSERT INTO user_accounts (password, user_login, "
                            "user_privillage) VALUES ('pw', 'O''Neil', 'basic')")
        self.assertEqual(self.cursor.rowcount, 1)
        self.cursor.execute("SELECT account_creation_date FROM user_accounts "
                            "WHERE user_login = 'O''Neil'")
        self.assertEqual(self.cursor.fetchall(), [(None,)])

    def test_constraints(self):
        with self.assertRaises(IntegrityError) as cm:
            self.cursor.execute("INSERT INTO user_accounts VALUES "
                                "('Max', 'x', 'Full', NULL, NULL)")
        self.assertEqual(cm.exception.code, protocol.CONSTRAINT_VIOLATION)
        with self.assertRaises(IntegrityError) as cm:
            self.cursor.execute("INSERT INTO user_accounts VALUES "
                                "('Ann', NULL, 'Full', NULL, NULL)")
        self.assertEqual(cm.exception.code, protocol.CONSTRAINT_VIOLATION)
        with self.assertRaises(IntegrityError) as cm:
            self.cursor.execute("INSERT INTO user_accounts VALUES ('%s', 'x', "
                                "'Full', NULL, NULL)" % ('a' * 26))
        self.assertEqual(cm.exception.code, protocol.CONSTRAINT_VIOLATION)
        with self.assertRaises(IntegrityError) as cm:
            self.cursor.execute("INSERT INTO user_accounts VALUES ('Ann')")
        self.assertEqual(cm.exception.code, protocol.ARITY_MISMATCH)
        with self.assertRaises(DataError) as cm:
            self.cursor.execute("INSERT INTO user_accounts VALUES "
                                "('Ann', 'x', 'Full', '2008-09-10', NULL)")
        self.assertEqual(cm.exception.code, protocol.TYPE_ERROR)
        self.assertEqual(len(self.db.table('user_accounts').rows), 2)

    def test_schema_errors(self):
        cases = (("CREATE TABLE user_accounts (a DATE)", protocol.TABLE_EXISTS),
                 ("CREATE DATABASE game_data", protocol.TABLE_EXISTS),
                 ("SELECT * FROM missing", protocol.UNKNOWN_TABLE),
                 ("SELECT shoe_size FROM user_accounts", protocol.UNKNOWN_COLUMN),
                 ("CREATE TABLE t (a DATE, A DATE)", protocol.PARSE_ERROR))
        for text, code in cases:
            with self.assertRaises(ProgrammingError) as cm:
                self.cursor.execute(text)
            self.assertEqual(cm.exception.code, code, text)

    def test_parse_errors(self):
        cases = (("SELECT FROM t", 7),
                 ("DROP TABLE t", 0),
                 ("SELECT * FROM t WHERE a > 'x'", 24),
                 ("SELECT * FROM t WHERE a = 3", 26),
                 ("INSERT INTO t VALUES ('x'", 25),
                 ("SELECT * FROM t; SELECT * FROM u", 17),
                 ("SELECT * FROM é", 14))
        for text, offset in cases:
            with self.assertRaises(ParseError) as cm:
                sqlstore.parse_sql(text)
            self.assertEqual(cm.exception.offset, offset, text)
            self.assertEqual(cm.exception.code, protocol.PARSE_ERROR)

    def test_parse_statements(self):
        self.assertEqual(sqlstore.parse_sql("select a, B from T where c == NULL"),
                         sqlstore.Select(('a', 'b'), 'T', ('c', None)))
        self.assertEqual(sqlstore.parse_sql("CREATE TABLE t (a VARCHAR(3) NOT NULL)"),
                         sqlstore.CreateTable('t', (sqlstore.Column('a', 'VARCHAR',
                                                                    3, True),)))
        self.assertEqual(len(sqlstore.parse_script(";;" + fixture_script())), 4)

    def test_closed_cursor(self):
        self.cursor.close()
        with self.assertRaises(Error):
            self.cursor.execute("SELECT * FROM user_accounts")
        connection = sqlstore.connect()
        cursor = connection.cursor()
        with self.assertRaises(Error):
            cursor.fetchone()
        connection.close()
        with self.assertRaises(Error):
            connection.cursor()


if __name__ == '__main__':
    unittest.main()
