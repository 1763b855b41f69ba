"""vulnhunter: desk-scale C/C++ vulnerability triage.

Library surface (one module per subsystem):

  corpus     labeled-function records, ingestion, splitting, synthesis
  tokenizer  byte-level BPE with dual classification tokens
  nnmodel    transformer encoder with exact numpy gradients
  moo        min-norm multi-objective training steps
  trainer    training loops, selection, evaluation
  metrics    accuracy / MSE / MAE / confusion tables
  extractor  lexical C/C++ function extraction with position deltas
  engine     end-to-end analysis pipeline producing diagnostics
  service    local JSON-over-HTTP inference endpoint
  cli        command-line entry point
"""

__version__ = "0.1.0"
