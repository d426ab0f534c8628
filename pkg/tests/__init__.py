"""Test suite for detector-based radio tomographic imaging."""
