# filename: tests/parsers/__init__.py
# This file can be empty. Its presence makes 'parsers' a sub-package of 'tests'.