"""Unit test package for myoselect."""
