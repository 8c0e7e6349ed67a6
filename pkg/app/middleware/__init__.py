"""This module contains all the middleware for the application."""
