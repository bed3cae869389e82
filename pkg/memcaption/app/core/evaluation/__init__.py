"""
Generación greedy y métricas de corpus (BLEU, CIDEr).
"""
