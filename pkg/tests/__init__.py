"""Test suite."""



