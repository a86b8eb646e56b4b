"""Square binary fiducials: dictionaries, rendering and two-phase detection."""

from boomtrack.fiducial.detect import (
    Candidate,
    DetectorParams,
    MarkerObservation,
    RejectReason,
    Rejection,
    decode_candidate,
    detect_markers,
    find_candidates,
)
from boomtrack.fiducial.dictionary import InfeasibleDictionaryError, MarkerDictionary, generate_dictionary
from boomtrack.fiducial.render import marker_corners, render_marker

__all__ = [
    "Candidate",
    "DetectorParams",
    "InfeasibleDictionaryError",
    "MarkerDictionary",
    "MarkerObservation",
    "RejectReason",
    "Rejection",
    "decode_candidate",
    "detect_markers",
    "find_candidates",
    "generate_dictionary",
    "marker_corners",
    "render_marker",
]
