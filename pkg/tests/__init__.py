"""Tests for Magic Umbrella."""
