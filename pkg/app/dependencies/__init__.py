"""This module contains all the dependencies for the application."""
