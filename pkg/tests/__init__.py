"""Genealogy Research Assistant Tests."""
