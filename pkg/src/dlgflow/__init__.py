"""dlgflow: learn a dialog manager from a rule-based dialog flow.

The pipeline: parse and validate a flow document, enumerate its walks into
training dialogs with action masks, train a recurrent policy that reproduces
the flow, then improve it by correcting logged conversations and compare
managers by replaying transcripts side by side.
"""

from . import compiler, engine, entities, flow
from .errors import DlgflowError

__version__ = "0.1.0"

__all__ = ["DlgflowError", "compiler", "engine", "entities", "flow", "__version__"]
