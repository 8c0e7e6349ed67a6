"""Integration tests for the FastAPI application."""
