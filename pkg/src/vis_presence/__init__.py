"""Shared-presence cursors for collaborative Vega-Lite visualizations.

Submodules:

- ``protocol``: wire messages and canonical JSON encoding
- ``session``: server-side rooms, colors, and last-write-wins user state
- ``server``: the WebSocket relay service
- ``presence``: the client peek/track/fork state machine
- ``annotator``: Vega-Lite document transformations for cursor display
- ``simulator``: deterministic multi-client scenario replay and checks
"""

__version__ = "0.1.0"
