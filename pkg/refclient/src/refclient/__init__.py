"""Reference client for the road-graph detection wire protocol.

A standalone, dependency-free peer that speaks the v1 length-prefixed
JSON protocol on its standard streams. It exists to pin the protocol
from the client side: a stub mode that answers every request with an
empty prediction set, and a cheat mode that serves ground-truth
segmentations and expert vertex predictions straight from a benchmark
world directory, which lets the host verify a full remote round trip
against its in-process reference run.
"""

__version__ = "0.1.0"
