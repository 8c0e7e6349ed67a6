"""Test module for fast-api-task."""
