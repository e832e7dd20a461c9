"""Knowledge-graph-augmented sequence classification.

A text encoder attends over KG entity/relation embeddings (directly, or
over conv-encoded balanced clusters), completes the fact by translation,
and classifies from the retrieved fact concatenated with the text context.
"""

__version__ = "0.1.0"
