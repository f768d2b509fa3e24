from .term_core import (BOT, IrwError, Term, Signature, Symbol, TermSequence, parse_term, render,
                        truncate, similarity, distance, glb, lub, liminf, metric_limit, leq_bot)

__all__ = ["BOT", "IrwError", "Term", "Signature", "Symbol", "TermSequence", "parse_term", "render",
           "truncate", "similarity", "distance", "glb", "lub", "liminf", "metric_limit", "leq_bot"]

__version__ = "0.1.0"
