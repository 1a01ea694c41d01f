"""
Shared helpers: the exception hierarchy and CSV readers/writers used by every package.
"""
