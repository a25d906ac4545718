"""Pydantic schemas for configs, records and reports."""
