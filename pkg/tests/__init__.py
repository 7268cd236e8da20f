"""mfdlq test suite."""
