"""
optostore - optomechanical light storage and OMIT simulation toolkit
"""

__version__ = "0.1.0"
