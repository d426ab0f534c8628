"""Unit tests - fast, isolated tests with no external dependencies."""

