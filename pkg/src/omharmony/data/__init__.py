"""Bundled data files (filter bank definitions)."""
