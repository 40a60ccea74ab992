"""Bundled data files (company registry, fingerprint rules)."""
